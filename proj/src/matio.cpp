#include "symspec/matio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace symspec {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct Header {
    bool symmetric = false;
    index_t rows = 0;
    index_t cols = 0;
    std::size_t nnz = 0;
};

// Reads the banner and size line, leaving `in` positioned at the first entry.
Header read_header(std::istream& in, std::size_t& lineno) {
    std::string line;
    lineno = 0;
    if (!std::getline(in, line)) throw ParseError(1, "empty input");
    ++lineno;
    std::istringstream banner(line);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (tag != "%%MatrixMarket") throw ParseError(lineno, "missing %%MatrixMarket banner");
    if (lower(object) != "matrix") throw ParseError(lineno, "object must be 'matrix'");
    if (lower(format) != "coordinate") throw ParseError(lineno, "only coordinate format is supported");
    if (lower(field) != "real") throw ParseError(lineno, "field must be 'real', got '" + field + "'");
    Header h;
    const auto sym = lower(symmetry);
    if (sym == "symmetric") {
        h.symmetric = true;
    } else if (sym != "general") {
        throw ParseError(lineno, "symmetry must be general or symmetric, got '" + symmetry + "'");
    }

    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '%') continue;
        std::istringstream dims(line);
        long long r = -1, c = -1, nz = -1;
        if (!(dims >> r >> c >> nz) || r < 0 || c < 0 || nz < 0) {
            throw ParseError(lineno, "malformed size line");
        }
        if (r > std::numeric_limits<index_t>::max() || c > std::numeric_limits<index_t>::max()) {
            throw ParseError(lineno, "dimension too large");
        }
        h.rows = static_cast<index_t>(r);
        h.cols = static_cast<index_t>(c);
        h.nnz = static_cast<std::size_t>(nz);
        return h;
    }
    throw ParseError(lineno, "missing size line");
}

// Reads `count` coordinate entries as 0-based triplets.
std::vector<Triplet> read_entries(std::istream& in, const Header& h, std::size_t& lineno) {
    std::vector<Triplet> out;
    out.reserve(h.nnz);
    std::string line;
    while (out.size() < h.nnz && std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '%') continue;
        std::istringstream is(line);
        long long i = 0, j = 0;
        double v = 0.0;
        if (!(is >> i >> j >> v)) throw ParseError(lineno, "malformed entry");
        if (i < 1 || i > h.rows || j < 1 || j > h.cols) {
            throw ParseError(lineno, "index (" + std::to_string(i) + "," + std::to_string(j) +
                                         ") out of declared bounds");
        }
        out.push_back({static_cast<index_t>(i - 1), static_cast<index_t>(j - 1), v});
    }
    if (out.size() < h.nnz) {
        throw ParseError(lineno + 1, "expected " + std::to_string(h.nnz) + " entries, found " +
                                         std::to_string(out.size()));
    }
    return out;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

CscMatrix from_triplets(index_t n, std::vector<Triplet> entries, MatrixKind kind) {
    for (const auto& t : entries) {
        if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
            throw ArgumentError("triplet (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                                ") outside order " + std::to_string(n));
        }
    }
    // Stable sort keeps the summation order of duplicates equal to input order.
    std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });

    CscMatrix m;
    m.n = n;
    m.kind = kind;
    m.colptr.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const auto& t = entries[k];
        if (!m.rowind.empty() && k > 0 && entries[k - 1].col == t.col && entries[k - 1].row == t.row) {
            m.values.back() += t.value;
            continue;
        }
        m.rowind.push_back(t.row);
        m.values.push_back(t.value);
        ++m.colptr[t.col + 1];
    }
    for (index_t j = 0; j < n; ++j) m.colptr[j + 1] += m.colptr[j];
    return m;
}

CscMatrix parse_matrix_market(std::istream& in) {
    std::size_t lineno = 0;
    const Header h = read_header(in, lineno);
    if (h.rows != h.cols) {
        throw ParseError(lineno, "matrix must be square, got " + std::to_string(h.rows) + "x" +
                                     std::to_string(h.cols));
    }
    auto entries = read_entries(in, h, lineno);
    if (h.symmetric) {
        std::erase_if(entries, [](const Triplet& t) { return t.row < t.col; });
        return from_triplets(h.rows, std::move(entries), MatrixKind::SymmetricLowerStored);
    }
    return from_triplets(h.rows, std::move(entries), MatrixKind::General);
}

CscMatrix parse_matrix_market(const std::string& text) {
    std::istringstream in(text);
    return parse_matrix_market(in);
}

CscMatrix read_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open matrix file '" + path + "'");
    return parse_matrix_market(in);
}

std::vector<double> parse_vector_market(std::istream& in) {
    std::size_t lineno = 0;
    const Header h = read_header(in, lineno);
    if (h.cols != 1) throw ParseError(lineno, "vector file must have exactly one column");
    const auto entries = read_entries(in, h, lineno);
    std::vector<double> v(static_cast<std::size_t>(h.rows), 0.0);
    for (const auto& t : entries) v[t.row] += t.value;
    return v;
}

std::vector<double> read_vector_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open vector file '" + path + "'");
    return parse_vector_market(in);
}

std::string serialize_matrix_market(const CscMatrix& m) {
    std::ostringstream os;
    os << "%%MatrixMarket matrix coordinate real "
       << (m.kind == MatrixKind::SymmetricLowerStored ? "symmetric" : "general") << "\n";
    os << m.n << " " << m.n << " " << m.nnz() << "\n";
    for (index_t j = 0; j < m.n; ++j) {
        for (index_t p = m.colptr[j]; p < m.colptr[j + 1]; ++p) {
            os << (m.rowind[p] + 1) << " " << (j + 1) << " " << fmt_double(m.values[p]) << "\n";
        }
    }
    return os.str();
}

std::string serialize_vector_market(std::span<const double> v) {
    std::ostringstream os;
    std::size_t nz = std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; });
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << v.size() << " 1 " << nz << "\n";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) os << (i + 1) << " 1 " << fmt_double(v[i]) << "\n";
    }
    return os.str();
}

SparsityPattern pattern_of(const CscMatrix& m) {
    SparsityPattern p;
    p.n = m.n;
    p.colptr = m.colptr;
    p.rowind = m.rowind;
    return p;
}

namespace {

void check_structure(index_t n, const std::vector<index_t>& colptr, const std::vector<index_t>& rowind,
                     std::vector<std::string>& out, bool& columns_usable) {
    columns_usable = false;
    if (n < 0) {
        out.push_back("negative order");
        return;
    }
    if (colptr.size() != static_cast<std::size_t>(n) + 1) {
        out.push_back("colptr length " + std::to_string(colptr.size()) + " != n+1");
        return;
    }
    bool ok = true;
    if (colptr[0] != 0) {
        out.push_back("colptr[0] != 0");
        ok = false;
    }
    for (index_t j = 0; j < n; ++j) {
        if (colptr[j + 1] < colptr[j]) {
            out.push_back("colptr non-decreasing violated at column " + std::to_string(j));
            ok = false;
        }
    }
    if (static_cast<std::size_t>(colptr[n]) != rowind.size()) {
        out.push_back("colptr[n] != len(rowind)");
        ok = false;
    }
    if (!ok) return;
    columns_usable = true;
    for (index_t j = 0; j < n; ++j) {
        for (index_t p = colptr[j]; p < colptr[j + 1]; ++p) {
            if (rowind[p] < 0 || rowind[p] >= n) {
                out.push_back("row index out of range in column " + std::to_string(j));
                break;
            }
            if (p > colptr[j] && rowind[p] <= rowind[p - 1]) {
                out.push_back("rowind not strictly increasing in column " + std::to_string(j));
                break;
            }
        }
    }
}

}  // namespace

std::vector<std::string> validate(const SparsityPattern& p) {
    std::vector<std::string> out;
    bool usable = false;
    check_structure(p.n, p.colptr, p.rowind, out, usable);
    return out;
}

std::vector<std::string> validate(const CscMatrix& m) {
    std::vector<std::string> out;
    bool usable = false;
    check_structure(m.n, m.colptr, m.rowind, out, usable);
    if (m.values.size() != m.rowind.size()) out.push_back("len(values) != len(rowind)");
    if (!usable || !out.empty()) return out;

    if (m.kind == MatrixKind::General) return out;
    for (index_t j = 0; j < m.n; ++j) {
        const index_t b = m.colptr[j], e = m.colptr[j + 1];
        if (b < e && m.rowind[b] < j) {
            out.push_back("entry above the diagonal in column " + std::to_string(j));
            continue;
        }
        if (m.kind == MatrixKind::LowerTriangular) {
            if (b == e || m.rowind[b] != j) {
                out.push_back("missing diagonal in column " + std::to_string(j));
            } else if (m.values[b] == 0.0) {
                out.push_back("zero diagonal in column " + std::to_string(j));
            }
        }
    }
    return out;
}

CscMatrix as_lower_triangular(CscMatrix m) {
    m.kind = MatrixKind::LowerTriangular;
    const auto v = validate(m);
    if (!v.empty()) throw ArgumentError("not a lower-triangular matrix: " + v.front());
    return m;
}

RhsPattern rhs_pattern_of(std::span<const double> b) {
    RhsPattern beta;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i] != 0.0) beta.indices.push_back(static_cast<index_t>(i));
    }
    return beta;
}

void check_rhs_pattern(const RhsPattern& beta, index_t n) {
    for (std::size_t k = 0; k < beta.indices.size(); ++k) {
        const index_t i = beta.indices[k];
        if (i < 0 || i >= n) {
            throw ArgumentError("rhs index " + std::to_string(i) + " outside order " + std::to_string(n));
        }
        if (k > 0 && i <= beta.indices[k - 1]) throw ArgumentError("rhs pattern not strictly increasing");
    }
}

SparsityPattern transpose(const SparsityPattern& p) {
    SparsityPattern t;
    t.n = p.n;
    t.colptr.assign(static_cast<std::size_t>(p.n) + 1, 0);
    for (const index_t i : p.rowind) ++t.colptr[i + 1];
    for (index_t i = 0; i < p.n; ++i) t.colptr[i + 1] += t.colptr[i];
    t.rowind.resize(p.rowind.size());
    std::vector<index_t> next(t.colptr.begin(), t.colptr.end() - 1);
    for (index_t j = 0; j < p.n; ++j) {
        for (const index_t i : p.col(j)) t.rowind[next[i]++] = j;
    }
    return t;
}

}  // namespace symspec
