#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "support.hpp"

using namespace symspec;
using support::Rng;

namespace {

const char* kExample =
    "%%MatrixMarket matrix coordinate real general\n"
    "% four entries\n"
    "3 3 4\n"
    "1 1 2.0\n"
    "3 1 0.5\n"
    "2 2 4.0\n"
    "3 3 1.0\n";

// Brute-force coordinate-to-CSC: bucket by column, sort rows, sum duplicates.
CscMatrix brute_csc(index_t n, const std::vector<Triplet>& t) {
    std::map<std::pair<index_t, index_t>, double> m;
    for (const auto& e : t) m[{e.col, e.row}] += e.value;
    CscMatrix out;
    out.n = n;
    out.colptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (const auto& [key, v] : m) {
        ++out.colptr[key.first + 1];
        out.rowind.push_back(key.second);
        out.values.push_back(v);
    }
    for (index_t j = 0; j < n; ++j) out.colptr[j + 1] += out.colptr[j];
    return out;
}

std::string to_mm(index_t n, const std::vector<Triplet>& t, const char* sym = "general") {
    std::ostringstream os;
    os << "%%MatrixMarket matrix coordinate real " << sym << "\n" << n << " " << n << " " << t.size() << "\n";
    os.precision(17);
    for (const auto& e : t) os << e.row + 1 << " " << e.col + 1 << " " << e.value << "\n";
    return os.str();
}

}  // namespace

TEST_CASE("identity parses to unit CSC") {
    const auto m = parse_matrix_market(std::string("%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 1\n2 2 1\n3 3 1\n"));
    CHECK(m.colptr == std::vector<index_t>{0, 1, 2, 3});
    CHECK(m.rowind == std::vector<index_t>{0, 1, 2});
    CHECK(m.values == std::vector<double>{1, 1, 1});
    CHECK(validate(m).empty());
    CHECK(pattern_of(m).colptr == std::vector<index_t>{0, 1, 2, 3});
}

TEST_CASE("general 3x3 example and its reversed listing") {
    const auto m = parse_matrix_market(std::string(kExample));
    CHECK(m.colptr == std::vector<index_t>{0, 2, 3, 4});
    CHECK(m.rowind == std::vector<index_t>{0, 2, 1, 2});
    const std::vector<Triplet> t{{0, 0, 2.0}, {2, 0, 0.5}, {1, 1, 4.0}, {2, 2, 1.0}};
    CHECK(m.colptr == brute_csc(3, t).colptr);
    CHECK(m.rowind == brute_csc(3, t).rowind);

    std::vector<Triplet> rev(t.rbegin(), t.rend());
    const auto r = parse_matrix_market(to_mm(3, rev));
    CHECK(r.colptr == m.colptr);
    CHECK(r.rowind == m.rowind);
    CHECK(r.values == m.values);
}

TEST_CASE("duplicates are summed and 1-based indices shifted") {
    const auto m = parse_matrix_market(std::string("%%MatrixMarket matrix coordinate real general\n2 2 3\n2 1 1.5\n1 1 1\n2 1 2.5\n"));
    CHECK(m.rowind == std::vector<index_t>{0, 1});
    CHECK(m.values == std::vector<double>{1.0, 4.0});
}

TEST_CASE("symmetric header keeps the lower triangle") {
    const auto m = parse_matrix_market(
        std::string("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 4\n2 1 2\n2 2 5\n"));
    CHECK(m.kind == MatrixKind::SymmetricLowerStored);
    CHECK(m.rowind == std::vector<index_t>{0, 1, 1});
    CHECK(validate(m).empty());
}

TEST_CASE("explicit zeros stay in the pattern") {
    const auto m = parse_matrix_market(std::string("%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1\n2 1 0\n2 2 1\n"));
    CHECK(pattern_of(m).rowind == std::vector<index_t>{0, 1, 1});
}

TEST_CASE("parse errors name the line") {
    auto line_of = [](const std::string& text) -> std::size_t {
        try {
            parse_matrix_market(text);
        } catch (const ParseError& e) {
            return e.line;
        }
        return 0;
    };
    CHECK(line_of("%%NotMarket matrix coordinate real general\n1 1 1\n1 1 1\n") == 1);
    CHECK(line_of("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n") == 1);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n% c\n2 2 1\n3 1 1\n") == 4);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n") == 4);
    CHECK(line_of("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1\n") == 2);
    CHECK(line_of("%%MatrixMarket matrix array real general\n2 2\n") == 1);
}

TEST_CASE("validate names invariant and column") {
    SparsityPattern bad;
    bad.n = 2;
    bad.colptr = {0, 2, 1};
    bad.rowind = {0};
    const auto v = validate(bad);
    REQUIRE(!v.empty());
    CHECK(v.front() == "colptr non-decreasing violated at column 1");

    CscMatrix m;
    m.n = 3;
    m.colptr = {0, 1, 2, 3};
    m.rowind = {0, 1, 1};
    m.values = {1, 1, 1};
    m.kind = MatrixKind::LowerTriangular;
    const auto w = validate(m);
    REQUIRE(w.size() == 1);
    CHECK(w.front().find("column 2") != std::string::npos);
    CHECK(validate(support::identity(3)).empty());

    m.rowind = {0, 1, 2};
    m.values = {1, 0, 1};
    CHECK(validate(m) == std::vector<std::string>{"zero diagonal in column 1"});
}

TEST_CASE("vector market round trip") {
    const std::vector<double> b{0.0, 2.5, 0.0, -1.0};
    std::istringstream in(serialize_vector_market(b));
    CHECK(parse_vector_market(in) == b);
}

TEST_CASE("property: parse is insensitive to entry order and stable under round trip") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const index_t n = rng.between(1, 30);
        std::vector<Triplet> t;
        const bool sym = rng.chance(0.5);
        for (index_t k = rng.between(0, 3 * n); k > 0; --k) {
            index_t i = rng.below(n), j = rng.below(n);
            if (sym && i < j) std::swap(i, j);
            t.push_back({i, j, rng.uniform(-2, 2)});
        }
        const auto a = parse_matrix_market(to_mm(n, t, sym ? "symmetric" : "general"));
        CHECK(validate(a).empty());
        for (std::size_t k = t.size(); k > 1; --k) std::swap(t[k - 1], t[rng.below(static_cast<index_t>(k))]);
        const auto b = parse_matrix_market(to_mm(n, t, sym ? "symmetric" : "general"));
        CHECK(a.colptr == b.colptr);
        CHECK(a.rowind == b.rowind);
        if (!sym) {
            const auto o = brute_csc(n, t);
            CHECK(a.colptr == o.colptr);
            CHECK(a.rowind == o.rowind);
        }
        const auto c = parse_matrix_market(serialize_matrix_market(a));
        CHECK(c == a);
        CHECK(parse_matrix_market(serialize_matrix_market(c)) == c);
    }
}

TEST_CASE("data files parse and validate") {
    for (const char* f : {"diag3.mtx", "fixture5.mtx", "fig1.mtx", "tridiag4.mtx", "spd12.mtx"}) {
        CAPTURE(f);
        CHECK(validate(read_matrix_market(support::data_path(f))).empty());
    }
    CHECK(as_lower_triangular(read_matrix_market(support::data_path("fig1.mtx"))) == support::fig1_matrix());
    CHECK(read_matrix_market(support::data_path("fixture5.mtx")).rowind == support::fixture5().rowind);
}
