#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "symspec/inspect.hpp"
#include "symspec/kernels.hpp"
#include "symspec/kir.hpp"
#include "symspec/matio.hpp"

namespace support {

using namespace symspec;

inline std::string data_path(const std::string& name) { return std::string(SYMSPEC_TEST_DATA) + "/" + name; }

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}

    index_t below(index_t n) { return static_cast<index_t>(g_() % static_cast<std::uint64_t>(n)); }
    index_t between(index_t lo, index_t hi) { return lo + below(hi - lo + 1); }
    double unit() { return static_cast<double>(g_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    bool chance(double p) { return unit() < p; }

private:
    std::mt19937_64 g_;
};

/// Lower-triangular L with a nonzero diagonal and off-diagonal density `d`.
inline CscMatrix random_lower(index_t n, double d, Rng& rng) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) {
        t.push_back({j, j, rng.uniform(1.0, 2.0)});
        for (index_t i = j + 1; i < n; ++i) {
            if (rng.chance(d)) t.push_back({i, j, rng.uniform(-0.5, 0.5)});
        }
    }
    return as_lower_triangular(from_triplets(n, std::move(t)));
}

inline RhsPattern random_beta(index_t n, double d, Rng& rng) {
    RhsPattern b;
    for (index_t i = 0; i < n; ++i) {
        if (rng.chance(d)) b.indices.push_back(i);
    }
    return b;
}

inline std::vector<double> rhs_on(const RhsPattern& beta, index_t n, Rng& rng) {
    std::vector<double> b(static_cast<std::size_t>(n), 0.0);
    for (const index_t i : beta.indices) b[i] = rng.uniform(0.5, 1.5) * (rng.chance(0.5) ? 1.0 : -1.0);
    return b;
}

/// Lower-stored symmetric pattern with full diagonal.
inline SparsityPattern random_symmetric(index_t n, double d, Rng& rng) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) {
        t.push_back({j, j, 1.0});
        for (index_t i = j + 1; i < n; ++i) {
            if (rng.chance(d)) t.push_back({i, j, 1.0});
        }
    }
    return pattern_of(from_triplets(n, std::move(t), MatrixKind::SymmetricLowerStored));
}

/// A = B B^T + n I, B with about `per_col` random off-diagonal entries per column.
inline CscMatrix random_spd(index_t n, index_t per_col, Rng& rng) {
    std::vector<double> B(static_cast<std::size_t>(n) * n, 0.0);
    for (index_t j = 0; j < n; ++j) {
        B[static_cast<std::size_t>(j) * n + j] = rng.uniform(0.5, 1.5);
        for (index_t k = 0; k < per_col; ++k) B[static_cast<std::size_t>(j) * n + rng.below(n)] = rng.uniform(-1.0, 1.0);
    }
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) {
        for (index_t i = j; i < n; ++i) {
            double s = 0.0;
            bool nz = false;
            for (index_t k = 0; k < n; ++k) {
                const double a = B[static_cast<std::size_t>(k) * n + i], b = B[static_cast<std::size_t>(k) * n + j];
                if (a != 0.0 && b != 0.0) {
                    s += a * b;
                    nz = true;
                }
            }
            if (i == j) {
                s += n;
                nz = true;
            }
            if (nz) t.push_back({i, j, s});
        }
    }
    return from_triplets(n, std::move(t), MatrixKind::SymmetricLowerStored);
}

inline CscMatrix lower_from_columns(index_t n, const std::vector<std::vector<index_t>>& below) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) {
        t.push_back({j, j, 2.0 + 0.25 * j});
        for (std::size_t k = 0; k < below[j].size(); ++k) {
            t.push_back({below[j][k], j, -0.5 + 0.125 * static_cast<double>(k) + 0.0625 * j});
        }
    }
    return as_lower_triangular(from_triplets(n, std::move(t)));
}

/// The ten-node dependence graph of the running example, 0-based. With
/// beta = {0, 5} the reach-set is 5, 0, 6, 7, 8, 9.
inline CscMatrix fig1_matrix() {
    return lower_from_columns(10, {{6}, {3}, {3, 8}, {9}, {5}, {6, 7}, {7}, {8, 9}, {9}, {}});
}

inline RhsPattern fig1_beta() { return RhsPattern{{0, 5}}; }

/// 5x5 L with subdiagonal entries (2,0), (3,2), (4,1).
inline CscMatrix fixture5() { return lower_from_columns(5, {{2}, {4}, {3}, {}, {}}); }

inline CscMatrix diagonal(index_t n) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) t.push_back({j, j, 1.0 + j});
    return as_lower_triangular(from_triplets(n, std::move(t)));
}

inline CscMatrix identity(index_t n) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) t.push_back({j, j, 1.0});
    return as_lower_triangular(from_triplets(n, std::move(t)));
}

inline CscMatrix dense_lower(index_t n) {
    std::vector<std::vector<index_t>> below(static_cast<std::size_t>(n));
    for (index_t j = 0; j < n; ++j) {
        for (index_t i = j + 1; i < n; ++i) below[j].push_back(i);
    }
    return lower_from_columns(n, below);
}

inline SparsityPattern sym_pattern(index_t n, const std::vector<std::pair<index_t, index_t>>& lower) {
    std::vector<Triplet> t;
    for (index_t j = 0; j < n; ++j) t.push_back({j, j, 1.0});
    for (const auto& [i, j] : lower) t.push_back({i, j, 1.0});
    return pattern_of(from_triplets(n, std::move(t), MatrixKind::SymmetricLowerStored));
}

inline SparsityPattern tridiagonal(index_t n) {
    std::vector<std::pair<index_t, index_t>> e;
    for (index_t j = 0; j + 1 < n; ++j) e.push_back({j + 1, j});
    return sym_pattern(n, e);
}

inline SparsityPattern arrow(index_t n) {
    std::vector<std::pair<index_t, index_t>> e;
    for (index_t i = 1; i < n; ++i) e.push_back({i, 0});
    return sym_pattern(n, e);
}

inline SparsityPattern dense_sym(index_t n) {
    std::vector<std::pair<index_t, index_t>> e;
    for (index_t j = 0; j < n; ++j) {
        for (index_t i = j + 1; i < n; ++i) e.push_back({i, j});
    }
    return sym_pattern(n, e);
}

/// Numeric SPD matrix on a lower-stored pattern: diagonally dominant.
inline CscMatrix spd_on(const SparsityPattern& p, Rng& rng) {
    CscMatrix a;
    a.n = p.n;
    a.colptr = p.colptr;
    a.rowind = p.rowind;
    a.kind = MatrixKind::SymmetricLowerStored;
    a.values.resize(p.rowind.size());
    for (auto& v : a.values) v = rng.uniform(-1.0, 1.0);
    for (index_t j = 0; j < p.n; ++j) a.values[p.colptr[j]] = 2.0 * p.n;
    return a;
}

// ---- independent oracles ----

/// parent[j] = min{i > j : L(i,j) != 0} applied directly to a factor pattern.
inline std::vector<index_t> parent_by_definition(const SparsityPattern& L) {
    std::vector<index_t> parent(static_cast<std::size_t>(L.n), kNone);
    for (index_t j = 0; j < L.n; ++j) {
        for (const index_t i : L.col(j)) {
            if (i > j) {
                parent[j] = i;
                break;
            }
        }
    }
    return parent;
}

/// Reachability by repeated relaxation over the edge list, no DFS.
inline std::set<index_t> reach_by_closure(const SparsityPattern& L, const RhsPattern& beta) {
    std::set<index_t> r(beta.indices.begin(), beta.indices.end());
    bool grew = true;
    while (grew) {
        grew = false;
        for (index_t j = 0; j < L.n; ++j) {
            if (!r.count(j)) continue;
            for (const index_t i : L.col(j)) grew |= r.insert(i).second;
        }
    }
    return r;
}

/// Maximal runs of adjacent columns whose destination sets, ignoring the
/// edge between them, coincide.
inline std::vector<Block> supernodes_by_pairs(const SparsityPattern& L) {
    auto out = [&](index_t j) {
        std::set<index_t> s;
        for (const index_t i : L.col(j)) {
            if (i > j) s.insert(i);
        }
        return s;
    };
    std::vector<Block> blocks;
    for (index_t j = 0; j < L.n; ++j) {
        bool merge = false;
        if (j > 0) {
            auto prev = out(j - 1);
            const bool linked = prev.erase(j) > 0;
            const auto cur = out(j);
            merge = prev == cur && (linked || !cur.empty());
        }
        if (merge) ++blocks.back().width;
        else blocks.push_back({j, 1});
    }
    return blocks;
}

inline std::vector<std::vector<double>> dense_of(const CscMatrix& m) {
    std::vector<std::vector<double>> d(static_cast<std::size_t>(m.n), std::vector<double>(static_cast<std::size_t>(m.n), 0.0));
    for (index_t j = 0; j < m.n; ++j) {
        for (index_t p = m.colptr[j]; p < m.colptr[j + 1]; ++p) d[m.rowind[p]][j] = m.values[p];
    }
    return d;
}

/// Dense ||L L^T - A||_F / ||A||_F with A given by its lower triangle.
inline double dense_reconstruction(const CscMatrix& L, const CscMatrix& A) {
    const auto l = dense_of(L);
    const auto a = dense_of(A);
    const index_t n = L.n;
    double e = 0.0, s = 0.0;
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            double v = 0.0;
            for (index_t k = 0; k < n; ++k) v += l[i][k] * l[j][k];
            const double aij = i >= j ? a[i][j] : a[j][i];
            e += (v - aij) * (v - aij);
            s += aij * aij;
        }
    }
    return std::sqrt(e / s);
}

inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0, s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
        s = std::max(s, std::abs(b[i]));
    }
    return s == 0.0 ? d : d / s;
}

inline bool exactly_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] == b[i])) return false;
    }
    return true;
}

// ---- inspection sets as the driver builds them ----

inline InspectionSet tagged(SetTag tag, Algorithm a, Transformation t, std::variant<ReachSet, BlockSet, RowPatternTable> p) {
    InspectionSet s;
    s.tag = tag;
    s.algorithm = a;
    s.transformation = t;
    s.payload = std::move(p);
    return s;
}

inline kir::SetTable trisolve_sets(const SparsityPattern& L, const RhsPattern& beta) {
    const InspectorInputs in{&L, &beta};
    kir::SetTable sets;
    auto reach = inspector_registry(Algorithm::TriangularSolve, Transformation::VIPrune, in);
    auto blocks = inspector_registry(Algorithm::TriangularSolve, Transformation::VSBlock, in);
    sets.emplace(kir::kReachBlocks, tagged(SetTag::PruneSet, Algorithm::TriangularSolve, Transformation::VIPrune,
                                           ReachSet{blocks_touched(reach.prune_set(), blocks.block_set())}));
    sets.emplace(kir::kReachSet, std::move(reach));
    sets.emplace(kir::kSupernodes, std::move(blocks));
    return sets;
}

inline kir::SetTable cholesky_sets(const SparsityPattern& A, SparsityPattern& factor) {
    const auto t = etree(A);
    auto rows = row_patterns(A, t);
    factor = col_patterns(A, t);
    auto blocks = cholesky_supernodes(factor, t);
    auto brows = block_row_patterns(rows, blocks);
    kir::SetTable sets;
    sets.emplace(kir::kRowPattern, tagged(SetTag::RowPatterns, Algorithm::Cholesky, Transformation::VIPrune, std::move(rows)));
    sets.emplace(kir::kSupernodes, tagged(SetTag::BlockSet, Algorithm::Cholesky, Transformation::VSBlock, std::move(blocks)));
    sets.emplace(kir::kBlockRowPattern,
                 tagged(SetTag::RowPatterns, Algorithm::Cholesky, Transformation::VIPrune, std::move(brows)));
    return sets;
}

/// Applies VS-Block (optional), VI-Prune and the low-level pass in the default order.
inline kir::KernelIR transformed(kir::KernelIR ir, const kir::SetTable& sets, const SparsityPattern& pattern,
                                 bool block, const kir::Thresholds& th = {}) {
    using kir::Annotation;
    if (block) {
        const auto path = kir::find_annotated(ir, Annotation::Kind::Blockable);
        ir = kir::vs_block(ir, *path, kir::kSupernodes, sets.at(kir::kSupernodes));
    }
    const auto path = kir::find_annotated(ir, Annotation::Kind::Prunable);
    std::string name;
    for (const auto& a : kir::loop_at(ir, *path).annotations) {
        if (a.kind == Annotation::Kind::Prunable) name = a.set;
    }
    ir = kir::vi_prune(ir, *path, name, sets.at(name), th);
    return kir::apply_lowlevel(ir, th, sets, pattern);
}

}  // namespace support
