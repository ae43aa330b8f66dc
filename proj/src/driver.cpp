#include "symspec/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "symspec/kernels.hpp"

namespace symspec {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kPassNames{"vsblock", "viprune", "lowlevel"};

InspectionSet make_set(SetTag tag, Algorithm alg, Transformation tr, std::variant<ReachSet, BlockSet, RowPatternTable> p) {
    InspectionSet s;
    s.tag = tag;
    s.algorithm = alg;
    s.transformation = tr;
    s.payload = std::move(p);
    return s;
}

std::string annotation_set(const kir::Loop& loop, kir::Annotation::Kind kind) {
    for (const auto& a : loop.annotations) {
        if (a.kind == kind) return a.set;
    }
    return {};
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out << text;
}

template <class F>
double median_ms(F&& f) {
    std::vector<double> t;
    for (int r = 0; r < 5; ++r) {
        const auto a = std::chrono::steady_clock::now();
        f();
        const auto b = std::chrono::steady_clock::now();
        t.push_back(std::chrono::duration<double, std::milli>(b - a).count());
    }
    std::sort(t.begin(), t.end());
    return t[2];
}

Json stats_json(const KernelStats& s) {
    Json j;
    j["columns_visited"] = s.columns_visited;
    j["flops"] = s.flops;
    return j;
}

Json trace_json(const ExecTrace& t) {
    Json j;
    j["columns_visited"] = t.columns_visited;
    j["flops"] = t.flops;
    j["peeled_iterations"] = t.peeled_iterations;
    j["bytes_moved"] = t.bytes_moved;
    j["update_iterations"] = t.update_iterations;
    return j;
}

// Largest |a_i - b_i| relative to max |b_i|, and where it occurs.
std::pair<double, index_t> max_rel_diff(std::span<const double> a, std::span<const double> b) {
    double scale = 0.0, worst = 0.0;
    index_t at = kNone;
    for (const double v : b) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (d > worst || (at == kNone && d == worst)) {
            worst = d;
            at = static_cast<index_t>(i);
        }
    }
    if (scale > 0.0) worst /= scale;
    return {worst, at};
}

index_t column_of_entry(const SparsityPattern& p, index_t q) {
    const auto it = std::upper_bound(p.colptr.begin(), p.colptr.end(), q);
    return static_cast<index_t>(it - p.colptr.begin()) - 1;
}

}  // namespace

void RunConfig::validate() const {
    if (matrix_path.empty()) throw ArgumentError("--matrix is required");
    if (algorithm == Algorithm::Cholesky && (rhs_path || rhs_density)) {
        throw ArgumentError("rhs options are only valid for trisolve");
    }
    if (rhs_path && rhs_density) throw ArgumentError("--rhs and --rhs-density are mutually exclusive");
    if (rhs_density && !(*rhs_density > 0.0 && *rhs_density <= 1.0)) throw ArgumentError("--rhs-density must be in (0, 1]");
    for (std::size_t i = 0; i < passes.size(); ++i) {
        if (std::find(kPassNames.begin(), kPassNames.end(), passes[i]) == kPassNames.end()) {
            throw ArgumentError("unknown pass '" + passes[i] + "'");
        }
        if (std::find(passes.begin(), passes.begin() + static_cast<std::ptrdiff_t>(i), passes[i]) !=
            passes.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw ArgumentError("pass '" + passes[i] + "' listed twice");
        }
    }
    thresholds.validate();
}

Algorithm parse_algorithm(const std::string& name) {
    if (name == "trisolve") return Algorithm::TriangularSolve;
    if (name == "cholesky") return Algorithm::Cholesky;
    throw ArgumentError("unknown algorithm '" + name + "' (expected trisolve or cholesky)");
}

const char* cli_name(Algorithm a) { return a == Algorithm::TriangularSolve ? "trisolve" : "cholesky"; }

std::vector<std::string> parse_passes(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string name = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!name.empty()) out.push_back(name);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    RunConfig probe;
    probe.matrix_path = "-";
    probe.passes = out;
    probe.validate();
    return out;
}

std::vector<double> synthesize_rhs(index_t n, double density, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("rhs order must be positive");
    const auto k = std::clamp<index_t>(static_cast<index_t>(std::llround(density * n)), 1, n);
    std::mt19937_64 rng(seed);
    std::vector<index_t> idx(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) idx[i] = i;
    for (index_t i = 0; i < k; ++i) {
        const auto r = i + static_cast<index_t>(rng() % static_cast<std::uint64_t>(n - i));
        std::swap(idx[i], idx[r]);
    }
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (index_t i = 0; i < k; ++i) b[idx[i]] = 1.0 + static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return b;
}

Pipeline inspect_pipeline(const RunConfig& config) {
    config.validate();
    Pipeline p;
    p.config = config;
    p.stem = fs::path(config.matrix_path).stem().string();
    CscMatrix m = read_matrix_market(config.matrix_path);

    if (config.algorithm == Algorithm::TriangularSolve) {
        if (m.kind == MatrixKind::SymmetricLowerStored) throw ArgumentError("trisolve expects a general lower-triangular file");
        p.matrix = as_lower_triangular(std::move(m));
        p.pattern = pattern_of(p.matrix);
        p.factor = p.pattern;
        if (config.rhs_path) {
            p.rhs = read_vector_market(*config.rhs_path);
            if (static_cast<index_t>(p.rhs.size()) != p.matrix.n) throw ArgumentError("rhs length does not match matrix order");
        } else {
            p.rhs = synthesize_rhs(p.matrix.n, config.rhs_density.value_or(kDefaultRhsDensity), config.seed);
        }
        p.beta = rhs_pattern_of(p.rhs);

        InspectStats reach_stats;
        const InspectorInputs in{&p.pattern, &p.beta};
        auto reach = inspector_registry(Algorithm::TriangularSolve, Transformation::VIPrune, in, &reach_stats);
        auto blocks = inspector_registry(Algorithm::TriangularSolve, Transformation::VSBlock, in);
        p.counters.reach_set = reach_stats.visits;
        auto touched = blocks_touched(reach.prune_set(), blocks.block_set());
        p.sets.emplace(kir::kReachBlocks, make_set(SetTag::PruneSet, Algorithm::TriangularSolve, Transformation::VIPrune,
                                                   ReachSet{std::move(touched)}));
        p.sets.emplace(kir::kReachSet, std::move(reach));
        p.sets.emplace(kir::kSupernodes, std::move(blocks));
        p.base = kir::build_triangular_ir(p.matrix.n);
    } else {
        if (m.kind == MatrixKind::General) {
            for (index_t j = 0; j < m.n; ++j) {
                const auto c = m.col(j);
                if (!c.empty() && c.front() < j) {
                    throw ArgumentError("cholesky expects a symmetric matrix stored by its lower triangle");
                }
            }
            m.kind = MatrixKind::SymmetricLowerStored;
        }
        p.matrix = std::move(m);
        p.pattern = pattern_of(p.matrix);

        InspectStats te, tr, tc;
        p.tree = etree(p.pattern, &te);
        auto rows = row_patterns(p.pattern, p.tree, &tr);
        p.factor = col_patterns(p.pattern, p.tree, &tc);
        auto blocks = cholesky_supernodes(p.factor, p.tree);
        auto brows = block_row_patterns(rows, blocks);
        p.counters.etree = te.visits;
        p.counters.row_patterns = tr.visits;
        p.counters.col_patterns = tc.visits;
        p.sets.emplace(kir::kRowPattern,
                       make_set(SetTag::RowPatterns, Algorithm::Cholesky, Transformation::VIPrune, std::move(rows)));
        p.sets.emplace(kir::kSupernodes,
                       make_set(SetTag::BlockSet, Algorithm::Cholesky, Transformation::VSBlock, std::move(blocks)));
        p.sets.emplace(kir::kBlockRowPattern,
                       make_set(SetTag::RowPatterns, Algorithm::Cholesky, Transformation::VIPrune, std::move(brows)));
        p.base = kir::build_cholesky_ir(p.matrix.n);
    }
    p.ir = p.base;
    return p;
}

void transform_pipeline(Pipeline& p) {
    using kir::Annotation;
    p.ir = p.base;
    p.pass_log.clear();
    auto log = [&](const std::string& pass, const std::string& loop, const std::string& set, const std::string& result) {
        p.pass_log.push_back("PASS " + pass + " loop=" + loop + " set=" + (set.empty() ? "-" : set) + " result=" + result);
    };
    for (const auto& pass : p.config.passes) {
        try {
            if (pass == "vsblock") {
                const auto path = kir::find_annotated(p.ir, Annotation::Kind::Blockable);
                if (!path) {
                    log(pass, "-", "", "skipped:no-blockable-loop");
                    continue;
                }
                const auto name = annotation_set(kir::loop_at(p.ir, *path), Annotation::Kind::Blockable);
                const auto it = p.sets.find(name);
                if (it == p.sets.end()) throw TransformError("set '" + name + "' not inspected");
                const double avg = average_supernode_width(it->second.block_set());
                if (avg < static_cast<double>(p.config.thresholds.min_avg_supernode)) {
                    log(pass, kir::to_string(*path), name,
                        "skipped:avg-supernode-width=" + fixed2(avg) + "<" +
                            std::to_string(p.config.thresholds.min_avg_supernode));
                    continue;
                }
                p.ir = kir::vs_block(p.ir, *path, name, it->second);
                log(pass, kir::to_string(*path), name, "applied");
            } else if (pass == "viprune") {
                const auto path = kir::find_annotated(p.ir, Annotation::Kind::Prunable);
                if (!path) {
                    log(pass, "-", "", "skipped:no-prunable-loop");
                    continue;
                }
                const auto name = annotation_set(kir::loop_at(p.ir, *path), Annotation::Kind::Prunable);
                const auto it = p.sets.find(name);
                if (it == p.sets.end()) throw TransformError("set '" + name + "' not inspected");
                p.ir = kir::vi_prune(p.ir, *path, name, it->second, p.config.thresholds);
                log(pass, kir::to_string(*path), name, "applied");
            } else {
                auto next = kir::apply_lowlevel(p.ir, p.config.thresholds, p.sets, p.factor);
                const bool changed = !(next == p.ir);
                p.ir = std::move(next);
                log(pass, "root", "", changed ? "applied" : "skipped:nothing-to-apply");
            }
        } catch (const TransformError& e) {
            throw TransformError("pass " + pass + ": " + e.what());
        }
    }
}

Json inspect_report(const Pipeline& p) {
    Json j;
    j["matrix"] = p.stem;
    j["algorithm"] = cli_name(p.config.algorithm);
    j["n"] = p.matrix.n;
    j["nnz"] = p.matrix.nnz();
    if (p.config.algorithm == Algorithm::TriangularSolve) {
        j["rhsPattern"] = p.beta.indices;
        j["pruneSet"] = p.sets.at(kir::kReachSet).prune_set().order;
    } else {
        j["parent"] = to_json(p.tree);
        Json rows = Json::array();
        for (const auto& r : p.sets.at(kir::kRowPattern).row_patterns().rows) rows.push_back(r);
        j["rowPatterns"] = std::move(rows);
    }
    const auto& bs = p.sets.at(kir::kSupernodes).block_set();
    Json blocks = Json::array();
    for (const auto& b : bs.blocks) blocks.push_back({b.start, b.width});
    j["blockSet"] = std::move(blocks);
    j["averageSupernodeWidth"] = average_supernode_width(bs);
    j["colCounts"] = column_counts(p.factor);
    Json c;
    if (p.config.algorithm == Algorithm::TriangularSolve) {
        c["reachSet"] = p.counters.reach_set;
    } else {
        c["etree"] = p.counters.etree;
        c["rowPatterns"] = p.counters.row_patterns;
        c["colPatterns"] = p.counters.col_patterns;
    }
    j["counters"] = std::move(c);
    Json sets;
    for (const auto& [name, s] : p.sets) sets[name] = to_json(s);
    j["sets"] = std::move(sets);
    return j;
}

Json cmd_inspect(const RunConfig& config) {
    const Pipeline p = inspect_pipeline(config);
    Json j = inspect_report(p);
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / (p.stem + ".inspect.json"), j.dump(2) + "\n");
    return j;
}

GenOutputs cmd_gen(const RunConfig& config) {
    Pipeline p = inspect_pipeline(config);
    transform_pipeline(p);
    GenOutputs out;
    try {
        out.unit = emit_source(p.ir, p.sets, p.factor, entry_name_for(p.stem, config.algorithm));
    } catch (const EmitError& e) {
        throw EmitError("emit " + p.stem + ": " + e.what());
    }
    fs::create_directories(config.out_dir);
    out.source = config.out_dir / (out.unit.entry_name + ".c");
    out.inspect_json = config.out_dir / (p.stem + ".inspect.json");
    out.pass_log = config.out_dir / (p.stem + ".passes.log");
    write_text(out.source, out.unit.source);
    write_text(out.inspect_json, inspect_report(p).dump(2) + "\n");
    std::string log;
    for (const auto& line : p.pass_log) log += line + "\n";
    write_text(out.pass_log, log);
    return out;
}

VerifyReport cmd_verify(const RunConfig& config) {
    Pipeline p = inspect_pipeline(config);
    transform_pipeline(p);
    VerifyReport r;
    const bool solve = config.algorithm == Algorithm::TriangularSolve;
    r.tolerance = solve ? 1e-12 : 1e-10;

    ExecResult got;
    try {
        got = execute(p.ir, p.sets, p.matrix, p.rhs, solve ? nullptr : &p.factor);
    } catch (const NotSpdError& e) {
        r.worst = e.column;
        r.message = e.what();
        return r;
    } catch (const SingularError& e) {
        r.worst = e.column;
        r.message = e.what();
        return r;
    }

    std::span<const double> values;
    if (solve) {
        const auto expect = naive_forward_solve(p.matrix, p.rhs);
        std::tie(r.max_rel_error, r.worst) = max_rel_diff(got.x, expect);
        values = got.x;
    } else {
        const auto& rows = p.sets.at(kir::kRowPattern).row_patterns();
        const auto expect = leftlooking_cholesky(p.matrix, rows, p.factor);
        const auto [err, at] = max_rel_diff(got.factor->values, expect.values);
        r.max_rel_error = err;
        r.worst = at == kNone ? kNone : column_of_entry(p.factor, at);
        values = got.factor->values;
    }
    r.pass = r.max_rel_error <= r.tolerance;

    if (config.emit_c) {
        const auto unit = emit_source(p.ir, p.sets, p.factor, entry_name_for(p.stem, config.algorithm));
        const auto ext = compile_and_run_external(unit, config.algorithm, config.out_dir / (p.stem + "_build"), p.matrix,
                                                  p.rhs, solve ? nullptr : &p.factor);
        if (ext.available) {
            if (ext.status != 0) {
                r.pass = false;
                r.message = "emitted kernel reported not-SPD at column " + std::to_string(ext.status - 1);
                return r;
            }
            r.external_error = max_rel_diff(ext.values, values).first;
            if (*r.external_error > r.tolerance) r.pass = false;
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "max relative error %.3e at %s %d (tolerance %.0e)", r.max_rel_error,
                  solve ? "entry" : "column", static_cast<int>(r.worst), r.tolerance);
    r.message = buf;
    return r;
}

Json cmd_bench(const RunConfig& config) {
    Pipeline p;
    const double t_inspect = median_ms([&] { p = inspect_pipeline(config); });
    EmitUnit unit;
    const double t_transform = median_ms([&] {
        transform_pipeline(p);
        unit = emit_source(p.ir, p.sets, p.factor, entry_name_for(p.stem, config.algorithm));
    });

    Json numeric, counters;
    if (config.algorithm == Algorithm::TriangularSolve) {
        const auto& reach = p.sets.at(kir::kReachSet).prune_set();
        KernelStats naive, library, decoupled;
        naive_forward_solve(p.matrix, p.rhs, &naive);
        library_style_solve(p.matrix, p.rhs, &library);
        decoupled_solve(p.matrix, p.rhs, reach, &decoupled);
        const auto transformed = execute(p.ir, p.sets, p.matrix, p.rhs).trace;
        numeric["naive"] = median_ms([&] { naive_forward_solve(p.matrix, p.rhs); });
        numeric["library"] = median_ms([&] { library_style_solve(p.matrix, p.rhs); });
        numeric["decoupled"] = median_ms([&] { decoupled_solve(p.matrix, p.rhs, reach); });
        numeric["transformed"] = median_ms([&] { execute(p.ir, p.sets, p.matrix, p.rhs); });
        counters["naive"] = stats_json(naive);
        counters["library"] = stats_json(library);
        counters["decoupled"] = stats_json(decoupled);
        counters["transformed"] = trace_json(transformed);
    } else {
        const auto& rows = p.sets.at(kir::kRowPattern);
        const auto path = kir::find_annotated(p.base, kir::Annotation::Kind::Prunable);
        const auto pruned = kir::vi_prune(p.base, *path, kir::kRowPattern, rows, config.thresholds);
        KernelStats library;
        leftlooking_cholesky(p.matrix, rows.row_patterns(), p.factor, &library);
        counters["naive"] = trace_json(execute(p.base, p.sets, p.matrix, {}, &p.factor).trace);
        counters["library"] = stats_json(library);
        counters["decoupled"] = trace_json(execute(pruned, p.sets, p.matrix, {}, &p.factor).trace);
        counters["transformed"] = trace_json(execute(p.ir, p.sets, p.matrix, {}, &p.factor).trace);
        numeric["naive"] = median_ms([&] { execute(p.base, p.sets, p.matrix, {}, &p.factor); });
        numeric["library"] = median_ms([&] { leftlooking_cholesky(p.matrix, rows.row_patterns(), p.factor); });
        numeric["decoupled"] = median_ms([&] { execute(pruned, p.sets, p.matrix, {}, &p.factor); });
        numeric["transformed"] = median_ms([&] { execute(p.ir, p.sets, p.matrix, {}, &p.factor); });
    }

    Json j;
    j["matrix"] = p.stem;
    j["algorithm"] = cli_name(config.algorithm);
    j["n"] = p.matrix.n;
    j["nnz"] = p.matrix.nnz();
    j["seed"] = config.seed;
    j["passes"] = config.passes;
    j["passLog"] = p.pass_log;
    j["checksum"] = unit.checksum;
    j["counters"] = std::move(counters);
    Json insp;
    insp["reachSet"] = p.counters.reach_set;
    insp["etree"] = p.counters.etree;
    insp["rowPatterns"] = p.counters.row_patterns;
    insp["colPatterns"] = p.counters.col_patterns;
    j["inspector"] = std::move(insp);
    Json timing;
    timing["inspection"] = t_inspect;
    timing["transform_emit"] = t_transform;
    timing["numeric"] = std::move(numeric);
    j["timing_ms"] = std::move(timing);
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / (p.stem + ".bench.json"), j.dump(2) + "\n");
    return j;
}

}  // namespace symspec
