#pragma once

#include <span>
#include <vector>

#include "symspec/inspect.hpp"
#include "symspec/matio.hpp"

namespace symspec {

/// Column-major dense buffer.
struct DenseMatrix {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(index_t r, index_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(index_t i, index_t j) { return data[static_cast<std::size_t>(j) * rows + i]; }
    double operator()(index_t i, index_t j) const { return data[static_cast<std::size_t>(j) * rows + i]; }

    static DenseMatrix identity(index_t n);
    bool operator==(const DenseMatrix&) const = default;
};

/// Columns touched and floating point operations performed by a reference kernel.
struct KernelStats {
    std::size_t columns_visited = 0;
    std::size_t flops = 0;
    std::vector<index_t> visited;
};

// Triangular solve variants. L must be lower triangular with its diagonal stored first.
std::vector<double> naive_forward_solve(const CscMatrix& L, std::span<const double> b, KernelStats* stats = nullptr);

/// Skips column j whenever x[j] == 0.0 exactly.
std::vector<double> library_style_solve(const CscMatrix& L, std::span<const double> b, KernelStats* stats = nullptr);

/// Visits only the columns of `reach`, in order.
std::vector<double> decoupled_solve(const CscMatrix& L, std::span<const double> b, const ReachSet& reach,
                                    KernelStats* stats = nullptr);

/// Left-looking Cholesky over a preallocated factor pattern; the update of
/// column j visits only rows.rows[j].
CscMatrix leftlooking_cholesky(const CscMatrix& A, const RowPatternTable& rows, const SparsityPattern& Lpat,
                               KernelStats* stats = nullptr);

DenseMatrix dense_cholesky(const DenseMatrix& D);

/// Solves X * Ldiag^T = B for X (the off-diagonal panel update of a supernode).
DenseMatrix dense_trisolve(const DenseMatrix& Ldiag, const DenseMatrix& B);

/// Subtracts panel * panel^T from `target`, restricted to the lower triangle.
/// rowmap[i] is the target row of panel row i; only panel rows whose mapped
/// row is below target.cols contribute target columns.
void block_update(DenseMatrix& target, const DenseMatrix& panel, std::span<const index_t> rowmap);

// Oracles.

/// Dense boolean right-looking elimination; returns SP(L) including fill. O(n^3).
SparsityPattern boolean_elimination_oracle(const SparsityPattern& A);

/// Boolean forward substitution; returns the structurally nonzero entries of x, ascending.
std::vector<index_t> structural_solve_oracle(const SparsityPattern& Lpat, const RhsPattern& beta);

/// ||L L^T - A||_F / ||A||_F with A given by its lower triangle.
double reconstruction_error(const CscMatrix& L, const CscMatrix& A);

/// ||L x - b||_inf.
double residual_inf(const CscMatrix& L, std::span<const double> x, std::span<const double> b);

}  // namespace symspec
