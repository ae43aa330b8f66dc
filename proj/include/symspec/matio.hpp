#pragma once

#include <istream>
#include <span>
#include <string>
#include <vector>

#include "symspec/common.hpp"

namespace symspec {

enum class MatrixKind { General, LowerTriangular, SymmetricLowerStored };

/// Structure-only compressed sparse column storage.
struct SparsityPattern {
    index_t n = 0;
    std::vector<index_t> colptr{0};
    std::vector<index_t> rowind;

    index_t nnz() const { return colptr.empty() ? 0 : colptr.back(); }
    index_t col_count(index_t j) const { return colptr[j + 1] - colptr[j]; }
    std::span<const index_t> col(index_t j) const {
        return {rowind.data() + colptr[j], static_cast<std::size_t>(col_count(j))};
    }

    bool operator==(const SparsityPattern&) const = default;
};

/// Numeric CSC matrix. Also the adjacency structure of the dependence graph
/// when only its pattern is consulted.
struct CscMatrix {
    index_t n = 0;
    std::vector<index_t> colptr{0};
    std::vector<index_t> rowind;
    std::vector<double> values;
    MatrixKind kind = MatrixKind::General;

    index_t nnz() const { return colptr.empty() ? 0 : colptr.back(); }
    std::span<const index_t> col(index_t j) const {
        return {rowind.data() + colptr[j], static_cast<std::size_t>(colptr[j + 1] - colptr[j])};
    }
    std::span<const double> col_values(index_t j) const {
        return {values.data() + colptr[j], static_cast<std::size_t>(colptr[j + 1] - colptr[j])};
    }

    bool operator==(const CscMatrix&) const = default;
};

/// Sorted nonzero row positions of a right-hand side.
struct RhsPattern {
    std::vector<index_t> indices;

    bool operator==(const RhsPattern&) const = default;
};

/// One (row, col, value) entry, 0-based.
struct Triplet {
    index_t row;
    index_t col;
    double value;
};

CscMatrix parse_matrix_market(std::istream& in);
CscMatrix parse_matrix_market(const std::string& text);
CscMatrix read_matrix_market(const std::string& path);

/// Reads an n x 1 coordinate MatrixMarket file as a dense vector.
std::vector<double> parse_vector_market(std::istream& in);
std::vector<double> read_vector_market(const std::string& path);

std::string serialize_matrix_market(const CscMatrix& m);
std::string serialize_vector_market(std::span<const double> v);

/// Sorts, sums duplicates and compresses; entries outside [0,n) throw ArgumentError.
CscMatrix from_triplets(index_t n, std::vector<Triplet> entries, MatrixKind kind = MatrixKind::General);

SparsityPattern pattern_of(const CscMatrix& m);

/// Empty iff every CSC invariant of `m` (including those implied by its kind) holds.
std::vector<std::string> validate(const CscMatrix& m);
std::vector<std::string> validate(const SparsityPattern& p);

/// Re-tags `m` as lower triangular; throws ArgumentError listing the first violation.
CscMatrix as_lower_triangular(CscMatrix m);

RhsPattern rhs_pattern_of(std::span<const double> b);
/// Throws ArgumentError unless indices are strictly increasing and below n.
void check_rhs_pattern(const RhsPattern& beta, index_t n);

/// Transpose of the structure; row i of the result lists the columns of row i of `p`.
SparsityPattern transpose(const SparsityPattern& p);

}  // namespace symspec
