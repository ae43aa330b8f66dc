#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "support.hpp"
#include "symspec/driver.hpp"

using namespace symspec;
namespace fs = std::filesystem;

namespace {

fs::path out_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("symspec_driver_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig config(Algorithm a, const std::string& file, const std::string& out) {
    RunConfig c;
    c.algorithm = a;
    c.matrix_path = support::data_path(file);
    c.out_dir = out_dir(out);
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Lower bidiagonal chain of order n written to `dir`; returns the path.
fs::path chain_file(const fs::path& dir, index_t n) {
    std::vector<std::vector<index_t>> below(static_cast<std::size_t>(n));
    for (index_t j = 0; j + 1 < n; ++j) below[j] = {j + 1};
    const auto path = dir / "chain.mtx";
    std::ofstream(path) << serialize_matrix_market(support::lower_from_columns(n, below));
    return path;
}

}  // namespace

TEST_CASE("inspect reports") {
    auto c = config(Algorithm::TriangularSolve, "diag3.mtx", "inspect_diag");
    c.rhs_path = support::data_path("diag3_rhs.mtx");
    const auto j = cmd_inspect(c);
    CHECK(j["pruneSet"] == Json::array({2}));
    CHECK(j["n"] == 3);
    CHECK(fs::exists(c.out_dir / "diag3.inspect.json"));
    CHECK(Json::parse(slurp(c.out_dir / "diag3.inspect.json")) == j);

    const auto t = cmd_inspect(config(Algorithm::Cholesky, "tridiag4.mtx", "inspect_tri"));
    CHECK(t["parent"] == Json::parse("[1, 2, 3, null]"));
    CHECK(t["colCounts"] == Json::array({2, 2, 2, 1}));
    CHECK(t["counters"]["etree"].get<std::size_t>() > 0);

    auto f = config(Algorithm::TriangularSolve, "fixture5.mtx", "inspect_f5");
    f.rhs_path = support::data_path("fixture5_rhs.mtx");
    CHECK(cmd_inspect(f)["pruneSet"] == Json::array({0, 2, 3}));
}

TEST_CASE("inspect rejects bad input") {
    auto c = config(Algorithm::TriangularSolve, "does_not_exist.mtx", "inspect_missing");
    CHECK_THROWS(cmd_inspect(c));
    auto r = config(Algorithm::Cholesky, "tridiag4.mtx", "inspect_rhs");
    r.rhs_density = 0.5;
    CHECK_THROWS_AS(cmd_inspect(r), ArgumentError);
}

TEST_CASE("configuration parsing") {
    CHECK(parse_passes("vsblock,viprune,lowlevel") == std::vector<std::string>{"vsblock", "viprune", "lowlevel"});
    CHECK(parse_passes("viprune") == std::vector<std::string>{"viprune"});
    CHECK_THROWS_AS(parse_passes("viprune,unroll"), ArgumentError);
    CHECK_THROWS_AS(parse_passes("viprune,viprune"), ArgumentError);
    CHECK(parse_algorithm("cholesky") == Algorithm::Cholesky);
    CHECK_THROWS_AS(parse_algorithm("lu"), ArgumentError);

    const auto a = synthesize_rhs(100, 0.05, 9);
    CHECK(a == synthesize_rhs(100, 0.05, 9));
    CHECK(std::count_if(a.begin(), a.end(), [](double v) { return v != 0.0; }) == 5);
    const auto one = synthesize_rhs(10, 0.001, 1);
    CHECK(std::count_if(one.begin(), one.end(), [](double v) { return v != 0.0; }) == 1);
}

TEST_CASE("pass log records the supernode-width gate") {
    auto c = config(Algorithm::TriangularSolve, "fig1.mtx", "gen_fig1");
    c.rhs_path = support::data_path("fig1_rhs.mtx");
    const auto g = cmd_gen(c);
    const auto log = slurp(g.pass_log);
    CHECK(log.find("PASS vsblock loop=root set=supernodes result=skipped:avg-supernode-width=2.50<160") !=
          std::string::npos);
    CHECK(log.find("PASS viprune loop=root set=reachSet result=applied") != std::string::npos);
    CHECK(log.find("PASS lowlevel") != std::string::npos);
    CHECK(g.source.filename() == "fig1_trisolve.c");
    CHECK(slurp(g.source) == g.unit.source);

    c.thresholds.min_avg_supernode = 2;
    auto p = inspect_pipeline(c);
    transform_pipeline(p);
    CHECK(p.pass_log.front() == "PASS vsblock loop=root set=supernodes result=applied");
    CHECK(p.pass_log[1] == "PASS viprune loop=root set=reachBlocks result=applied");

    c.thresholds.min_avg_supernode = 160;
    c.passes = {"viprune", "vsblock"};
    p = inspect_pipeline(c);
    transform_pipeline(p);
    CHECK(p.pass_log[1] == "PASS vsblock loop=- set=- result=skipped:no-blockable-loop");
}

TEST_CASE("verify") {
    auto id = config(Algorithm::TriangularSolve, "identity4.mtx", "verify_id");
    id.rhs_path = support::data_path("identity4_rhs.mtx");
    const auto r = cmd_verify(id);
    CHECK(r.pass);
    CHECK(r.max_rel_error == 0.0);

    auto f = config(Algorithm::TriangularSolve, "fixture5.mtx", "verify_f5");
    f.rhs_path = support::data_path("fixture5_rhs.mtx");
    CHECK(cmd_verify(f).pass);

    auto s = config(Algorithm::Cholesky, "spd12.mtx", "verify_spd");
    s.thresholds.min_avg_supernode = 0;
    const auto rs = cmd_verify(s);
    CHECK(rs.pass);
    CHECK(rs.tolerance == 1e-10);

    const auto bad = cmd_verify(config(Algorithm::Cholesky, "notspd3.mtx", "verify_bad"));
    CHECK_FALSE(bad.pass);
    CHECK(bad.message == "not-SPD at column 1");
}

TEST_CASE("bench counters") {
    auto c = config(Algorithm::TriangularSolve, "fig1.mtx", "bench_fig1");
    c.rhs_path = support::data_path("fig1_rhs.mtx");
    const auto j = cmd_bench(c);
    const auto& k = j["counters"];
    CHECK(k["decoupled"]["columns_visited"] <= k["naive"]["columns_visited"]);
    CHECK(k["decoupled"]["columns_visited"] == 6);
    CHECK(k["transformed"]["columns_visited"] == 6);
    CHECK(k["transformed"]["peeled_iterations"] == 2);
    CHECK(j["timing_ms"]["numeric"].contains("library"));
    CHECK(fs::exists(c.out_dir / "fig1.bench.json"));

    // Same seed, same report apart from timings.
    auto again = cmd_bench(c);
    auto strip = [](Json x) {
        x.erase("timing_ms");
        return x;
    };
    CHECK(strip(again) == strip(j));

    auto sparse = config(Algorithm::TriangularSolve, "fig1.mtx", "bench_chain");
    sparse.matrix_path = chain_file(sparse.out_dir, 400).string();
    sparse.rhs_density = 0.0025;
    const auto sj = cmd_bench(sparse);
    CHECK(sj["counters"]["decoupled"]["flops"] < sj["counters"]["naive"]["flops"]);

    sparse.rhs_density = 1.0;
    const auto dj = cmd_bench(sparse);
    CHECK(dj["counters"]["decoupled"]["flops"] == dj["counters"]["naive"]["flops"]);
    CHECK(dj["counters"]["decoupled"]["columns_visited"] == dj["counters"]["naive"]["columns_visited"]);

    const auto cj = cmd_bench(config(Algorithm::Cholesky, "spd12.mtx", "bench_spd"));
    CHECK(cj["counters"]["decoupled"]["update_iterations"] <= cj["counters"]["naive"]["update_iterations"]);
    CHECK(cj["inspector"]["etree"].get<std::size_t>() > 0);
}
