#include <CLI11.hpp>
#include <iostream>

#include "symspec/driver.hpp"

using namespace symspec;

namespace {

struct Options {
    std::string alg = "trisolve";
    std::string matrix;
    std::string rhs;
    double rhs_density = 0.0;
    std::string passes = "vsblock,viprune,lowlevel";
    long long peel = 2;
    long long min_avg = 160;
    std::uint64_t seed = 1;
    bool emit_c = false;
    std::string out = ".";
};

void add_common(CLI::App* cmd, Options& o) {
    cmd->add_option("--alg", o.alg, "trisolve or cholesky")->check(CLI::IsMember({"trisolve", "cholesky"}));
    cmd->add_option("--matrix", o.matrix, "MatrixMarket file")->required();
    auto* rhs = cmd->add_option("--rhs", o.rhs, "MatrixMarket n x 1 right-hand side");
    cmd->add_option("--rhs-density", o.rhs_density, "fraction of nonzeros in a synthesized rhs")->excludes(rhs);
    cmd->add_option("--passes", o.passes, "ordered subset of vsblock,viprune,lowlevel");
    cmd->add_option("--peel-threshold", o.peel, "peel iterations whose column count exceeds N (-1: never)");
    cmd->add_option("--min-avg-supernode", o.min_avg, "skip VS-Block below this average supernode width");
    cmd->add_option("--seed", o.seed, "seed for the synthesized rhs");
    cmd->add_flag("--emit-c", o.emit_c, "also compile and check the emitted C with $SYMSPEC_CC");
    cmd->add_option("--out", o.out, "output directory");
}

RunConfig to_config(const CLI::App& cmd, const Options& o) {
    RunConfig c;
    c.algorithm = parse_algorithm(o.alg);
    c.matrix_path = o.matrix;
    if (cmd.count("--rhs")) c.rhs_path = o.rhs;
    if (cmd.count("--rhs-density")) c.rhs_density = o.rhs_density;
    c.passes = parse_passes(o.passes);
    c.thresholds.peel_colcount = o.peel < 0 ? kir::Thresholds::kInfinite : static_cast<index_t>(o.peel);
    c.thresholds.min_avg_supernode = static_cast<index_t>(o.min_avg);
    c.seed = o.seed;
    c.emit_c = o.emit_c;
    c.out_dir = o.out;
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparsity-specialized code generation for triangular solve and Cholesky"};
    app.require_subcommand(1);
    Options o;
    auto* inspect = app.add_subcommand("inspect", "run the symbolic inspectors and write <stem>.inspect.json");
    auto* gen = app.add_subcommand("gen", "transform and emit <stem>_<alg>.c with the inspection report and pass log");
    auto* verify = app.add_subcommand("verify", "check the transformed kernel against the oracle kernels");
    auto* bench = app.add_subcommand("bench", "median-of-5 timings and work counters");
    for (auto* cmd : {inspect, gen, verify, bench}) add_common(cmd, o);
    CLI11_PARSE(app, argc, argv);

    try {
        if (inspect->parsed()) {
            const auto j = cmd_inspect(to_config(*inspect, o));
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (gen->parsed()) {
            const auto out = cmd_gen(to_config(*gen, o));
            std::cout << out.source.string() << "\n" << out.inspect_json.string() << "\n" << out.pass_log.string() << "\n";
            return 0;
        }
        if (verify->parsed()) {
            const auto r = cmd_verify(to_config(*verify, o));
            std::cout << (r.pass ? "PASS " : "FAIL ") << r.message << "\n";
            if (r.external_error) std::cout << "emitted C vs executor: " << *r.external_error << "\n";
            return r.pass ? 0 : 1;
        }
        const auto j = cmd_bench(to_config(*bench, o));
        std::cout << j.dump(2) << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "symspec: " << e.what() << "\n";
        return 2;
    }
}
