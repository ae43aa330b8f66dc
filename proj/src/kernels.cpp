#include "symspec/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace symspec {

DenseMatrix DenseMatrix::identity(index_t n) {
    DenseMatrix m(n, n);
    for (index_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

namespace {

void require_solve_inputs(const CscMatrix& L, std::span<const double> b) {
    if (static_cast<index_t>(b.size()) != L.n) {
        throw ArgumentError("rhs length " + std::to_string(b.size()) + " != order " + std::to_string(L.n));
    }
}

// One column of forward substitution: x[j] /= L(j,j); x[i] -= L(i,j) x[j].
inline void solve_column(const CscMatrix& L, index_t j, std::vector<double>& x, KernelStats* stats) {
    const index_t b = L.colptr[j], e = L.colptr[j + 1];
    if (b == e || L.rowind[b] != j || L.values[b] == 0.0) throw SingularError(j);
    x[j] /= L.values[b];
    for (index_t p = b + 1; p < e; ++p) x[L.rowind[p]] -= L.values[p] * x[j];
    if (stats) {
        ++stats->columns_visited;
        stats->flops += 1 + 2 * static_cast<std::size_t>(e - b - 1);
        stats->visited.push_back(j);
    }
}

}  // namespace

std::vector<double> naive_forward_solve(const CscMatrix& L, std::span<const double> b, KernelStats* stats) {
    require_solve_inputs(L, b);
    std::vector<double> x(b.begin(), b.end());
    for (index_t j = 0; j < L.n; ++j) solve_column(L, j, x, stats);
    return x;
}

std::vector<double> library_style_solve(const CscMatrix& L, std::span<const double> b, KernelStats* stats) {
    require_solve_inputs(L, b);
    std::vector<double> x(b.begin(), b.end());
    for (index_t j = 0; j < L.n; ++j) {
        if (x[j] == 0.0) continue;
        solve_column(L, j, x, stats);
    }
    return x;
}

std::vector<double> decoupled_solve(const CscMatrix& L, std::span<const double> b, const ReachSet& reach,
                                    KernelStats* stats) {
    require_solve_inputs(L, b);
    std::vector<double> x(b.begin(), b.end());
    for (const index_t j : reach.order) {
        if (j < 0 || j >= L.n) throw ArgumentError("reach-set entry outside matrix order");
        solve_column(L, j, x, stats);
    }
    return x;
}

CscMatrix leftlooking_cholesky(const CscMatrix& A, const RowPatternTable& rows, const SparsityPattern& Lpat,
                               KernelStats* stats) {
    const index_t n = A.n;
    if (Lpat.n != n || static_cast<index_t>(rows.rows.size()) != n) {
        throw ArgumentError("cholesky inputs disagree on matrix order");
    }
    CscMatrix L;
    L.n = n;
    L.colptr = Lpat.colptr;
    L.rowind = Lpat.rowind;
    L.values.assign(Lpat.rowind.size(), 0.0);
    L.kind = MatrixKind::LowerTriangular;

    std::vector<double> f(static_cast<std::size_t>(n), 0.0);
    for (index_t j = 0; j < n; ++j) {
        for (const index_t i : Lpat.col(j)) f[i] = 0.0;
        for (index_t p = A.colptr[j]; p < A.colptr[j + 1]; ++p) {
            if (A.rowind[p] >= j) f[A.rowind[p]] = A.values[p];
        }
        for (const index_t k : rows.rows[j]) {
            const auto col = Lpat.col(k);
            const auto it = std::lower_bound(col.begin(), col.end(), j);
            if (it == col.end() || *it != j) throw ArgumentError("row pattern disagrees with column pattern");
            const index_t q = Lpat.colptr[k] + static_cast<index_t>(it - col.begin());
            const double ljk = L.values[q];
            for (index_t p = q; p < Lpat.colptr[k + 1]; ++p) f[Lpat.rowind[p]] -= L.values[p] * ljk;
            if (stats) stats->flops += 2 * static_cast<std::size_t>(Lpat.colptr[k + 1] - q);
        }
        const double d = f[j];
        if (!(d > 0.0)) throw NotSpdError(j);
        const index_t diag = Lpat.colptr[j];
        L.values[diag] = std::sqrt(d);
        for (index_t p = diag + 1; p < Lpat.colptr[j + 1]; ++p) L.values[p] = f[Lpat.rowind[p]] / L.values[diag];
        if (stats) {
            ++stats->columns_visited;
            stats->flops += static_cast<std::size_t>(Lpat.colptr[j + 1] - diag);
            stats->visited.push_back(j);
        }
    }
    return L;
}

DenseMatrix dense_cholesky(const DenseMatrix& D) {
    if (D.rows != D.cols) throw ArgumentError("dense cholesky needs a square matrix");
    const index_t n = D.rows;
    DenseMatrix L(n, n);
    // Row-oriented (Banachiewicz) order.
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j <= i; ++j) {
            double s = D(i, j);
            for (index_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (!(s > 0.0)) throw NotSpdError(i);
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return L;
}

DenseMatrix dense_trisolve(const DenseMatrix& Ldiag, const DenseMatrix& B) {
    if (Ldiag.rows != Ldiag.cols || B.cols != Ldiag.rows) throw ArgumentError("dense trisolve shape mismatch");
    DenseMatrix X = B;
    for (index_t i = 0; i < B.rows; ++i) {
        for (index_t j = 0; j < Ldiag.rows; ++j) {
            double s = X(i, j);
            for (index_t k = 0; k < j; ++k) s -= X(i, k) * Ldiag(j, k);
            if (Ldiag(j, j) == 0.0) throw SingularError(j);
            X(i, j) = s / Ldiag(j, j);
        }
    }
    return X;
}

void block_update(DenseMatrix& target, const DenseMatrix& panel, std::span<const index_t> rowmap) {
    if (static_cast<index_t>(rowmap.size()) != panel.rows) throw ArgumentError("rowmap length mismatch");
    for (index_t a = 0; a < panel.rows; ++a) {
        const index_t ti = rowmap[a];
        for (index_t c = 0; c < panel.rows; ++c) {
            const index_t tj = rowmap[c];
            if (tj >= target.cols || ti < tj) continue;
            for (index_t k = 0; k < panel.cols; ++k) target(ti, tj) -= panel(a, k) * panel(c, k);
        }
    }
}

SparsityPattern boolean_elimination_oracle(const SparsityPattern& A) {
    const index_t n = A.n;
    std::vector<char> M(static_cast<std::size_t>(n) * n, 0);
    auto at = [&](index_t i, index_t j) -> char& { return M[static_cast<std::size_t>(j) * n + i]; };
    for (index_t j = 0; j < n; ++j) {
        at(j, j) = 1;
        for (const index_t i : A.col(j)) {
            at(i, j) = 1;
            at(j, i) = 1;
        }
    }
    for (index_t k = 0; k < n; ++k) {
        for (index_t i = k + 1; i < n; ++i) {
            if (!at(i, k)) continue;
            for (index_t j = k + 1; j < n; ++j) {
                if (at(j, k)) at(i, j) = 1;
            }
        }
    }
    SparsityPattern L;
    L.n = n;
    L.colptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (index_t j = 0; j < n; ++j) {
        for (index_t i = j; i < n; ++i) {
            if (at(i, j)) L.rowind.push_back(i);
        }
        L.colptr[j + 1] = static_cast<index_t>(L.rowind.size());
    }
    return L;
}

std::vector<index_t> structural_solve_oracle(const SparsityPattern& Lpat, const RhsPattern& beta) {
    std::vector<char> nz(static_cast<std::size_t>(Lpat.n), 0);
    for (const index_t i : beta.indices) nz[i] = 1;
    for (index_t j = 0; j < Lpat.n; ++j) {
        if (!nz[j]) continue;
        for (const index_t i : Lpat.col(j)) nz[i] = 1;
    }
    std::vector<index_t> out;
    for (index_t i = 0; i < Lpat.n; ++i) {
        if (nz[i]) out.push_back(i);
    }
    return out;
}

double reconstruction_error(const CscMatrix& L, const CscMatrix& A) {
    const index_t n = L.n;
    if (A.n != n) throw ArgumentError("reconstruction: order mismatch");
    const SparsityPattern Lt = transpose(pattern_of(L));
    // Position of each transposed entry back in L.
    std::vector<index_t> pos(L.rowind.size());
    {
        std::vector<index_t> next(Lt.colptr.begin(), Lt.colptr.end() - 1);
        for (index_t k = 0; k < n; ++k) {
            for (index_t p = L.colptr[k]; p < L.colptr[k + 1]; ++p) pos[next[L.rowind[p]]++] = p;
        }
    }
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    std::vector<char> touched(static_cast<std::size_t>(n), 0);
    std::vector<index_t> list;
    double err2 = 0.0, norm2 = 0.0;
    for (index_t j = 0; j < n; ++j) {
        list.clear();
        // Column j of L L^T restricted to rows >= j: sum over k with L(j,k) != 0.
        for (index_t q = Lt.colptr[j]; q < Lt.colptr[j + 1]; ++q) {
            const index_t k = Lt.rowind[q];
            const double ljk = L.values[pos[q]];
            for (index_t p = L.colptr[k]; p < L.colptr[k + 1]; ++p) {
                const index_t i = L.rowind[p];
                if (i < j) continue;
                if (!touched[i]) {
                    touched[i] = 1;
                    list.push_back(i);
                }
                w[i] += L.values[p] * ljk;
            }
        }
        for (index_t p = A.colptr[j]; p < A.colptr[j + 1]; ++p) {
            const index_t i = A.rowind[p];
            if (i < j) continue;
            const double a = A.values[p];
            const double mult = i == j ? 1.0 : 2.0;
            norm2 += mult * a * a;
            if (!touched[i]) {
                touched[i] = 1;
                list.push_back(i);
            }
            w[i] -= a;
        }
        for (const index_t i : list) {
            err2 += (i == j ? 1.0 : 2.0) * w[i] * w[i];
            w[i] = 0.0;
            touched[i] = 0;
        }
    }
    return norm2 == 0.0 ? std::sqrt(err2) : std::sqrt(err2 / norm2);
}

double residual_inf(const CscMatrix& L, std::span<const double> x, std::span<const double> b) {
    std::vector<double> r(b.begin(), b.end());
    for (index_t j = 0; j < L.n; ++j) {
        for (index_t p = L.colptr[j]; p < L.colptr[j + 1]; ++p) r[L.rowind[p]] -= L.values[p] * x[j];
    }
    double m = 0.0;
    for (const double v : r) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace symspec
