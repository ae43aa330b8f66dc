#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "symspec/emit.hpp"
#include "symspec/json_io.hpp"
#include "symspec/kir.hpp"

namespace symspec {

struct RunConfig {
    Algorithm algorithm = Algorithm::TriangularSolve;
    std::string matrix_path;
    std::optional<std::string> rhs_path;
    std::optional<double> rhs_density;  // default 0.02 when neither rhs option is given
    kir::Thresholds thresholds;
    std::vector<std::string> passes{"vsblock", "viprune", "lowlevel"};
    std::filesystem::path out_dir = ".";
    std::uint64_t seed = 1;
    bool emit_c = false;

    void validate() const;
};

inline constexpr double kDefaultRhsDensity = 0.02;

Algorithm parse_algorithm(const std::string& name);
const char* cli_name(Algorithm a);

/// Comma-separated pass list; rejects unknown and repeated names.
std::vector<std::string> parse_passes(const std::string& text);

/// Right-hand side with round(density * n) nonzeros (at least one) at
/// positions drawn from the seed.
std::vector<double> synthesize_rhs(index_t n, double density, std::uint64_t seed);

struct InspectorCounters {
    std::size_t reach_set = 0;
    std::size_t etree = 0;
    std::size_t row_patterns = 0;
    std::size_t col_patterns = 0;
};

/// Everything derived from one matrix: inspection sets and the transformed kernel.
struct Pipeline {
    RunConfig config;
    std::string stem;
    CscMatrix matrix;           // L for the solve, A (lower stored) for Cholesky
    SparsityPattern pattern;    // SP(matrix)
    SparsityPattern factor;     // SP(L): the pattern kernels are specialized for
    std::vector<double> rhs;    // solve only
    RhsPattern beta;            // solve only
    EliminationTree tree;       // Cholesky only
    kir::SetTable sets;
    InspectorCounters counters;
    kir::KernelIR base;
    kir::KernelIR ir;
    std::vector<std::string> pass_log;
};

/// Reads the matrix (and rhs) and runs the inspectors.
Pipeline inspect_pipeline(const RunConfig& config);

/// Applies the configured passes in order, recording one log line per pass.
void transform_pipeline(Pipeline& p);

Json inspect_report(const Pipeline& p);

Json cmd_inspect(const RunConfig& config);

struct GenOutputs {
    std::filesystem::path source;
    std::filesystem::path inspect_json;
    std::filesystem::path pass_log;
    EmitUnit unit;
};

GenOutputs cmd_gen(const RunConfig& config);

struct VerifyReport {
    bool pass = false;
    double max_rel_error = 0.0;
    index_t worst = kNone;  // worst solution entry or factor column
    double tolerance = 0.0;
    std::optional<double> external_error;  // emitted C vs executor, when compiled
    std::string message;
};

VerifyReport cmd_verify(const RunConfig& config);

Json cmd_bench(const RunConfig& config);

}  // namespace symspec
