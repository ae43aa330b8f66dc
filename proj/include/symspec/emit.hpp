#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symspec/kir.hpp"
#include "symspec/matio.hpp"

namespace symspec {

/// Specialized C source for one kernel and the sets compiled into it.
struct EmitUnit {
    std::string source;
    std::string entry_name;
    kir::SetTable embedded_sets;
    std::uint64_t checksum = 0;
};

/// Counters collected while executing a kernel.
struct ExecTrace {
    std::size_t flops = 0;
    std::size_t columns_visited = 0;
    std::size_t peeled_iterations = 0;
    std::size_t bytes_moved = 0;
    std::size_t update_iterations = 0;

    bool operator==(const ExecTrace&) const = default;
};

struct ExecResult {
    std::vector<double> x;           // triangular solve
    std::optional<CscMatrix> factor;  // cholesky
    ExecTrace trace;
};

/// Emits a single C99 translation unit. `pattern` is the structure the kernel
/// is specialized for: L for the triangular solve, SP(L) for Cholesky.
///
/// Triangular solve entry:
///   void <entry>(const double* Lx, const int* Lp, const int* Li, double* x)
/// Cholesky entry (returns 0, or k+1 if the pivot of column k is not positive):
///   int <entry>(const double* Ax, const int* Ap, const int* Ai,
///               double* Lx, const int* Lp, const int* Li)
EmitUnit emit_source(const kir::KernelIR& ir, const kir::SetTable& sets, const SparsityPattern& pattern,
                     const std::string& entry_name);

/// Interprets the kernel. For a triangular solve `matrix` is L and `b` the
/// right-hand side; for Cholesky `matrix` is A (lower stored) and
/// `factor_pattern` is SP(L).
ExecResult execute(const kir::KernelIR& ir, const kir::SetTable& sets, const CscMatrix& matrix,
                   std::span<const double> b = {}, const SparsityPattern* factor_pattern = nullptr);

/// "<stem>_<algorithm>" with non-identifier characters replaced.
std::string entry_name_for(const std::string& matrix_stem, Algorithm algorithm);

struct ExternalResult {
    bool available = false;  // false when SYMSPEC_CC is unset
    std::vector<double> values;  // x for the solve, Lx for Cholesky
    int status = 0;              // Cholesky return code
};

/// Compiles the unit with $SYMSPEC_CC inside `scratch_dir` and runs it on the
/// given data. Compile failures raise EmitError with the compiler output.
ExternalResult compile_and_run_external(const EmitUnit& unit, Algorithm algorithm,
                                        const std::filesystem::path& scratch_dir, const CscMatrix& matrix,
                                        std::span<const double> b = {}, const SparsityPattern* factor_pattern = nullptr);

struct ExternalCase {
    const EmitUnit* unit = nullptr;
    Algorithm algorithm = Algorithm::TriangularSolve;
    const CscMatrix* matrix = nullptr;
    std::span<const double> b;
    const SparsityPattern* factor_pattern = nullptr;
};

/// Links several units into one program (file-scope names prefixed per unit)
/// so a whole corpus costs a single compiler run. Results follow `cases`.
std::vector<ExternalResult> compile_and_run_external_batch(std::span<const ExternalCase> cases,
                                                          const std::filesystem::path& scratch_dir);

}  // namespace symspec
