#include <doctest.h>

#include <cmath>
#include <set>

#include "support.hpp"

using namespace symspec;
using support::Rng;

namespace {

CscMatrix csc(index_t n, std::vector<index_t> colptr, std::vector<index_t> rowind, std::vector<double> values,
              MatrixKind kind) {
    CscMatrix m;
    m.n = n;
    m.colptr = std::move(colptr);
    m.rowind = std::move(rowind);
    m.values = std::move(values);
    m.kind = kind;
    return m;
}

CscMatrix factor_of(const CscMatrix& A, KernelStats* stats = nullptr) {
    const auto p = pattern_of(A);
    const auto t = etree(p);
    return leftlooking_cholesky(A, row_patterns(p, t), col_patterns(p, t), stats);
}

std::vector<double> dense_b(index_t n, Rng& rng) {
    std::vector<double> b(static_cast<std::size_t>(n));
    for (auto& v : b) v = rng.uniform(-1, 1);
    return b;
}

}  // namespace

TEST_CASE("naive solve examples") {
    const auto I = support::identity(4);
    const std::vector<double> b{1, -2, 0, 3.5};
    CHECK(naive_forward_solve(I, b) == b);
    const auto L = csc(2, {0, 2, 3}, {0, 1, 1}, {2, 1, 1}, MatrixKind::LowerTriangular);
    CHECK(naive_forward_solve(L, std::vector<double>{2, 3}) == std::vector<double>{1, 2});

    const auto Z = csc(2, {0, 2, 3}, {0, 1, 1}, {2, 1, 0}, MatrixKind::LowerTriangular);
    CHECK_THROWS_AS(naive_forward_solve(Z, std::vector<double>{1, 1}), SingularError);
    CHECK_THROWS_AS(naive_forward_solve(L, std::vector<double>{1}), ArgumentError);
}

TEST_CASE("naive solve residual on random 50x50") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const auto L = support::random_lower(50, 0.1, rng);
        const auto b = dense_b(50, rng);
        double bmax = 0;
        for (const double v : b) bmax = std::max(bmax, std::abs(v));
        CHECK(residual_inf(L, naive_forward_solve(L, b), b) <= 1e-11 * bmax);
    }
}

TEST_CASE("library-style solve") {
    const auto f5 = support::fixture5();
    KernelStats s;
    CHECK(library_style_solve(f5, std::vector<double>(5, 0.0), &s) == std::vector<double>(5, 0.0));
    CHECK(s.columns_visited == 0);

    std::vector<double> b(5, 0.0);
    b[0] = 3.0;
    KernelStats ls, ns;
    CHECK(library_style_solve(f5, b, &ls) == naive_forward_solve(f5, b, &ns));
    CHECK(ns.columns_visited == 5);
    const auto reach = structural_solve_oracle(pattern_of(f5), RhsPattern{{0}});
    CHECK(std::includes(ls.visited.begin(), ls.visited.end(), reach.begin(), reach.end()));

    // x1 = 1 - 1 cancels to exactly zero, so columns 1 and 2 are never processed.
    const auto C = csc(3, {0, 2, 4, 5}, {0, 1, 1, 2, 2}, {1, 1, 1, 1, 1}, MatrixKind::LowerTriangular);
    const std::vector<double> bc{1, 1, 0};
    KernelStats cs;
    CHECK(library_style_solve(C, bc, &cs) == naive_forward_solve(C, bc));
    CHECK(cs.visited == std::vector<index_t>{0});
    CHECK(structural_solve_oracle(pattern_of(C), RhsPattern{{0, 1}}).size() == 3);
}

TEST_CASE("decoupled solve") {
    const auto I = support::identity(3);
    const std::vector<double> b{0, 5, 0};
    KernelStats s;
    CHECK(decoupled_solve(I, b, ReachSet{{1}}, &s) == b);
    CHECK(s.columns_visited == 1);

    const auto f5 = support::fixture5();
    std::vector<double> b5(5, 0.0);
    b5[0] = 3.0;
    KernelStats d;
    const auto x = decoupled_solve(f5, b5, reach_set(pattern_of(f5), RhsPattern{{0}}), &d);
    CHECK(support::rel_diff(x, naive_forward_solve(f5, b5)) <= 1e-14);
    CHECK(d.columns_visited == 3);
    CHECK(d.visited == std::vector<index_t>{0, 2, 3});

    Rng rng(4);
    const auto L = support::random_lower(30, 0.15, rng);
    const auto bd = dense_b(30, rng);
    RhsPattern all;
    for (index_t i = 0; i < 30; ++i) all.indices.push_back(i);
    KernelStats full, naive;
    decoupled_solve(L, bd, reach_set(pattern_of(L), all), &full);
    naive_forward_solve(L, bd, &naive);
    CHECK(full.flops == naive.flops);
    CHECK(full.columns_visited == naive.columns_visited);
}

TEST_CASE("property: three solve variants agree") {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const index_t n = rng.between(1, 120);
        const auto L = support::random_lower(n, rng.uniform(0.0, 0.1), rng);
        const auto beta = support::random_beta(n, 0.05, rng);
        const auto b = support::rhs_on(beta, n, rng);
        const auto reach = reach_set(pattern_of(L), beta);
        KernelStats ns, ls, ds;
        const auto xn = naive_forward_solve(L, b, &ns);
        CHECK(support::rel_diff(library_style_solve(L, b, &ls), xn) <= 1e-12);
        CHECK(support::rel_diff(decoupled_solve(L, b, reach, &ds), xn) <= 1e-12);
        CHECK(ds.columns_visited == reach.order.size());
        CHECK(ds.columns_visited <= ns.columns_visited);
        const auto oracle = structural_solve_oracle(pattern_of(L), beta);
        const std::set<index_t> allowed(oracle.begin(), oracle.end());
        for (const index_t j : ls.visited) CHECK(allowed.count(j) == 1);
    }
}

TEST_CASE("left-looking cholesky examples") {
    const auto one = csc(1, {0, 1}, {0}, {4}, MatrixKind::SymmetricLowerStored);
    CHECK(factor_of(one).values == std::vector<double>{2});
    const auto two = csc(2, {0, 2, 3}, {0, 1, 1}, {4, 2, 5}, MatrixKind::SymmetricLowerStored);
    const auto L = factor_of(two);
    CHECK(L.rowind == std::vector<index_t>{0, 1, 1});
    CHECK(L.values == std::vector<double>{2, 1, 2});

    const auto bad = csc(2, {0, 2, 3}, {0, 1, 1}, {1, 2, 1}, MatrixKind::SymmetricLowerStored);
    try {
        factor_of(bad);
        FAIL("expected NotSpdError");
    } catch (const NotSpdError& e) {
        CHECK(e.column == 1);
        CHECK(std::string(e.what()) == "not-SPD at column 1");
    }
}

TEST_CASE("left-looking cholesky on B B^T + n I, n = 100") {
    Rng rng(8);
    const auto A = support::random_spd(100, 3, rng);
    const auto p = pattern_of(A);
    const auto t = etree(p);
    const auto rows = row_patterns(p, t);
    const auto Lpat = col_patterns(p, t);
    KernelStats s;
    const auto L = leftlooking_cholesky(A, rows, Lpat, &s);
    CHECK(reconstruction_error(L, A) <= 1e-10);
    CHECK(pattern_of(L) == Lpat);
    for (const double v : L.values) CHECK(v != 0.0);
    CHECK(support::dense_reconstruction(L, A) <= 1e-10);
}

TEST_CASE("dense kernels") {
    CHECK(dense_cholesky(DenseMatrix::identity(3)) == DenseMatrix::identity(3));
    DenseMatrix D(2, 2);
    D(0, 0) = 4;
    D(1, 0) = 2;
    D(0, 1) = 2;
    D(1, 1) = 5;
    const auto L = dense_cholesky(D);
    CHECK(L(0, 0) == 2);
    CHECK(L(1, 0) == 1);
    CHECK(L(0, 1) == 0);
    CHECK(L(1, 1) == 2);

    DenseMatrix N(1, 1);
    N(0, 0) = -1;
    CHECK_THROWS_AS(dense_cholesky(N), NotSpdError);

    Rng rng(2);
    DenseMatrix B(8, 8), S(8, 8);
    for (auto& v : B.data) v = rng.uniform(-1, 1);
    for (index_t i = 0; i < 8; ++i) {
        for (index_t j = 0; j < 8; ++j) {
            double acc = i == j ? 8.0 : 0.0;
            for (index_t k = 0; k < 8; ++k) acc += B(i, k) * B(j, k);
            S(i, j) = acc;
        }
    }
    const auto F = dense_cholesky(S);
    double err = 0, norm = 0;
    for (index_t i = 0; i < 8; ++i) {
        for (index_t j = 0; j < 8; ++j) {
            double acc = 0;
            for (index_t k = 0; k < 8; ++k) acc += F(i, k) * F(j, k);
            err += (acc - S(i, j)) * (acc - S(i, j));
            norm += S(i, j) * S(i, j);
        }
    }
    CHECK(std::sqrt(err / norm) <= 1e-12);

    // X * F^T = P recovers X.
    DenseMatrix X(3, 8), P(3, 8);
    for (auto& v : X.data) v = rng.uniform(-1, 1);
    for (index_t r = 0; r < 3; ++r) {
        for (index_t c = 0; c < 8; ++c) {
            double acc = 0;
            for (index_t k = 0; k < 8; ++k) acc += X(r, k) * F(c, k);
            P(r, c) = acc;
        }
    }
    const auto Y = dense_trisolve(F, P);
    for (std::size_t k = 0; k < X.data.size(); ++k) CHECK(Y.data[k] == doctest::Approx(X.data[k]).epsilon(1e-12));
}

TEST_CASE("block_update subtracts the lower part of panel panel^T through rowmap") {
    DenseMatrix target(4, 2);
    DenseMatrix panel(3, 1);
    panel(0, 0) = 1;
    panel(1, 0) = 2;
    panel(2, 0) = 3;
    const std::vector<index_t> rowmap{0, 1, 3};
    block_update(target, panel, rowmap);
    // Target columns 0 and 1 receive rows >= column.
    CHECK(target(0, 0) == -1);
    CHECK(target(1, 0) == -2);
    CHECK(target(3, 0) == -3);
    CHECK(target(1, 1) == -4);
    CHECK(target(3, 1) == -6);
    CHECK(target(0, 1) == 0);
    CHECK(target(2, 0) == 0);
}

TEST_CASE("oracle examples") {
    const auto diag = support::sym_pattern(4, {});
    CHECK(boolean_elimination_oracle(diag) == diag);
    CHECK(boolean_elimination_oracle(support::tridiagonal(5)) == support::tridiagonal(5));
    // Arrow n=3 by hand: eliminating column 0 connects rows 1 and 2.
    const auto a3 = boolean_elimination_oracle(support::arrow(3));
    CHECK(a3.rowind == std::vector<index_t>{0, 1, 2, 1, 2, 2});
    CHECK(boolean_elimination_oracle(support::arrow(5)) == support::dense_sym(5));

    CHECK(structural_solve_oracle(pattern_of(support::diagonal(4)), RhsPattern{}).empty());
    CHECK(structural_solve_oracle(pattern_of(support::diagonal(4)), RhsPattern{{3}}) == std::vector<index_t>{3});
}

TEST_CASE("property: numeric pattern equals symbolic pattern") {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        const index_t n = rng.between(2, 60);
        const auto A = support::random_spd(n, rng.between(1, 3), rng);
        const auto L = factor_of(A);
        CHECK(reconstruction_error(L, A) <= 1e-10);
        const auto p = pattern_of(A);
        CHECK(pattern_of(L) == boolean_elimination_oracle(p));
        for (const double v : L.values) CHECK(v != 0.0);
    }
}
