#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "symspec/emit.hpp"

namespace symspec {

namespace {

using namespace kir;

// Dense helpers at or below this block width are emitted fully unrolled.
constexpr index_t kUnrollWidth = 8;

std::string num(index_t v) { return std::to_string(v); }

std::string plus(const std::string& e, index_t v) {
    if (v == 0) return e;
    return e + (v > 0 ? " + " + num(v) : " - " + num(-v));
}

void emit_array(std::ostringstream& os, const std::string& name, const std::vector<index_t>& values) {
    os << "static const int " << name << "[" << std::max<std::size_t>(values.size(), 1) << "] = {";
    if (values.empty()) os << "0";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i % 16 == 0) os << "\n    ";
        os << values[i] << (i + 1 < values.size() ? ", " : "");
    }
    os << "\n};\n";
}

class Emitter {
public:
    Emitter(const KernelIR& ir, const SetTable& sets, const SparsityPattern& pattern)
        : ir_(ir), sets_(sets), P_(pattern), solve_(ir.algorithm == Algorithm::TriangularSolve) {}

    EmitUnit run(const std::string& entry) {
        if (P_.n != ir_.n) throw EmitError("pattern order does not match kernel order");
        collect(ir_.root);
        for (const auto& name : used_) {
            const auto it = sets_.find(name);
            if (it == sets_.end()) throw EmitError("unresolved set name '" + name + "'");
            unit_.embedded_sets.emplace(name, it->second);
        }
        if (block_sets_.size() > 1) throw EmitError("statements reference more than one block set");
        if (!block_sets_.empty()) prepare_blocks(*block_sets_.begin());

        std::ostringstream os;
        os << "/* " << entry << ": generated for n=" << ir_.n << ", nnz=" << P_.rowind.size() << " */\n";
        os << "#include <math.h>\n\n";
        emit_sets(os);
        emit_work(os);
        if (solve_ && !block_.empty()) emit_tri_helpers(os);
        if (!solve_) block_.empty() ? emit_chol_helpers(os) : emit_snode_helpers(os);

        if (solve_) {
            os << "void " << entry << "(const double* Lx, const int* Lp, const int* Li, double* x)\n{\n";
            os << "    (void)Lx; (void)Lp; (void)Li; (void)x;\n";
        } else {
            os << "int " << entry
               << "(const double* Ax, const int* Ap, const int* Ai, double* Lx, const int* Lp, const int* Li)\n{\n";
            os << "    (void)Ax; (void)Ap; (void)Ai; (void)Lx; (void)Lp; (void)Li;\n";
        }
        node(os, ir_.root, 1);
        if (!solve_) os << "    return 0;\n";
        os << "}\n";

        unit_.source = os.str();
        unit_.entry_name = entry;
        unit_.checksum = fnv1a(unit_.source);
        return std::move(unit_);
    }

private:
    // ---- set discovery ----

    void use(const std::string& name) {
        if (!name.empty()) used_.insert(name);
    }

    void collect_expr(const IndexExpr& e) {
        if (e.kind == IndexExpr::Kind::SetElem) use(e.name);
    }

    void collect(const Node& node) {
        if (const auto* s = std::get_if<Stmt>(&node.v)) {
            for (const auto& e : s->operands) collect_expr(e);
            if (!s->blocks.empty()) {
                use(s->blocks);
                block_sets_.insert(s->blocks);
            }
            return;
        }
        const std::vector<Node>* body = nullptr;
        if (const auto* l = std::get_if<Loop>(&node.v)) {
            collect_expr(l->domain.lo.col);
            collect_expr(l->domain.hi.col);
            if (l->domain.kind != Domain::Kind::Range) use(l->domain.set);
            body = &l->body;
        } else if (const auto* s = std::get_if<Seq>(&node.v)) {
            body = &s->body;
        } else {
            const auto& p = std::get<Peeled>(node.v);
            use(p.set);
            body = &p.body;
        }
        for (const auto& c : *body) collect(c);
    }

    const InspectionSet& set(const std::string& name) const { return unit_.embedded_sets.at(name); }

    // ---- block set checks (same conditions as the executor) ----

    void prepare_blocks(const std::string& name) {
        const auto& s = set(name);
        if (s.tag != SetTag::BlockSet) throw EmitError("set '" + name + "' is not a block set");
        const auto& bs = s.block_set();
        try {
            check_partition(bs, ir_.n);
        } catch (const ArgumentError& e) {
            throw EmitError(e.what());
        }
        block_ = name;
        for (std::size_t b = 0; b < bs.blocks.size(); ++b) {
            const auto& blk = bs.blocks[b];
            const std::string bad = "block " + std::to_string(b) + " is not a supernode of the pattern";
            widths_.insert(blk.width);
            if (solve_) {
                const auto tail = below(blk.end() - 1, blk.end());
                for (index_t c = blk.start; c < blk.end(); ++c) {
                    const auto t = below(c, blk.end());
                    if (!std::equal(t.begin(), t.end(), tail.begin(), tail.end())) throw EmitError(bad);
                }
                temp_size_ = std::max(temp_size_, tail.size());
            } else {
                const auto first = P_.col(blk.start);
                if (static_cast<index_t>(first.size()) < blk.width) throw EmitError(bad);
                for (index_t c = blk.start; c < blk.end(); ++c) {
                    const auto col = P_.col(c);
                    const auto expect = first.subspan(static_cast<std::size_t>(c - blk.start));
                    if (!std::equal(col.begin(), col.end(), expect.begin(), expect.end())) throw EmitError(bad);
                    if (first[c - blk.start] != c) throw EmitError(bad);
                }
                temp_size_ = std::max(temp_size_, first.size() * static_cast<std::size_t>(blk.width));
            }
        }
    }

    std::span<const index_t> below(index_t c, index_t end) const {
        const auto col = P_.col(c);
        const auto it = std::lower_bound(col.begin(), col.end(), end);
        return col.subspan(static_cast<std::size_t>(it - col.begin()));
    }

    // ---- preamble ----

    void emit_sets(std::ostringstream& os) const {
        for (const auto& [name, s] : unit_.embedded_sets) {
            switch (s.tag) {
                case SetTag::PruneSet:
                    os << "enum { " << name << "_len = " << s.prune_set().order.size() << " };\n";
                    emit_array(os, name, s.prune_set().order);
                    break;
                case SetTag::RowPatterns: {
                    std::vector<index_t> ptr{0}, idx;
                    for (const auto& row : s.row_patterns().rows) {
                        idx.insert(idx.end(), row.begin(), row.end());
                        ptr.push_back(static_cast<index_t>(idx.size()));
                    }
                    emit_array(os, name + "_ptr", ptr);
                    emit_array(os, name + "_idx", idx);
                    break;
                }
                case SetTag::BlockSet: {
                    std::vector<index_t> start;
                    for (const auto& b : s.block_set().blocks) start.push_back(b.start);
                    start.push_back(ir_.n);
                    os << "enum { " << name << "_count = " << s.block_set().blocks.size() << " };\n";
                    emit_array(os, name + "_start", start);
                    break;
                }
            }
            os << "\n";
        }
    }

    void emit_work(std::ostringstream& os) const {
        if (!solve_) {
            os << "static double f_work[" << ir_.n << "];\n";
            os << "static int rowmap_work[" << ir_.n << "];\n";
        }
        if (!block_.empty()) os << "static double temp_work[" << std::max<std::size_t>(temp_size_, 1) << "];\n";
        if (solve_ && !block_.empty()) {
            const index_t wmax = *widths_.rbegin();
            if (wmax > kUnrollWidth) os << "static double diag_work[" << static_cast<std::size_t>(wmax) * wmax << "];\n";
        }
        os << "\n";
    }

    // ---- triangular solve helpers ----

    void emit_tri_helpers(std::ostringstream& os) const {
        const std::string args = "const double* Lx, const int* Lp, const int* Li, double* x";
        const std::string pass = "Lx, Lp, Li, x";
        const bool generic = *widths_.rbegin() > kUnrollWidth;

        for (const index_t w : widths_) {
            if (w > kUnrollWidth) continue;
            os << "static void dts_w" << w << "(int s, " << args << ")\n{\n";
            os << "    double d[" << w * w << "] = {0};\n";
            os << "    (void)Li;\n";
            os << "    for (int c = 0; c < " << w << "; ++c)\n";
            os << "        for (int p = Lp[s + c]; p < Lp[s + c + 1] && Li[p] < s + " << w << "; ++p) d[c * " << w
               << " + (Li[p] - s)] = Lx[p];\n";
            for (index_t c = 0; c < w; ++c) {
                os << "    x[s + " << c << "] /= d[" << c * w + c << "];\n";
                for (index_t r = c + 1; r < w; ++r) {
                    os << "    x[s + " << r << "] -= d[" << c * w + r << "] * x[s + " << c << "];\n";
                }
            }
            os << "}\n\n";
            os << "static void bupd_w" << w << "(int s, int m, " << args << ")\n{\n";
            os << "    (void)Li;\n";
            for (index_t c = 0; c < w; ++c) {
                os << "    { const int base = Lp[s + " << c + 1 << "] - m;\n";
                os << "      for (int i = 0; i < m; ++i) temp_work[i] -= Lx[base + i] * x[s + " << c << "]; }\n";
            }
            os << "}\n\n";
        }
        if (generic) {
            os << "static void dts_gen(int s, int w, " << args << ")\n{\n";
            os << "    for (int i = 0; i < w * w; ++i) diag_work[i] = 0.0;\n";
            os << "    for (int c = 0; c < w; ++c)\n";
            os << "        for (int p = Lp[s + c]; p < Lp[s + c + 1] && Li[p] < s + w; ++p) diag_work[c * w + (Li[p] - s)] = "
                  "Lx[p];\n";
            os << "    for (int c = 0; c < w; ++c) {\n";
            os << "        x[s + c] /= diag_work[c * w + c];\n";
            os << "        for (int r = c + 1; r < w; ++r) x[s + r] -= diag_work[c * w + r] * x[s + c];\n";
            os << "    }\n}\n\n";
            os << "static void bupd_gen(int s, int w, int m, " << args << ")\n{\n";
            os << "    (void)Li;\n";
            os << "    for (int c = s; c < s + w; ++c) {\n";
            os << "        const int base = Lp[c + 1] - m;\n";
            os << "        for (int i = 0; i < m; ++i) temp_work[i] -= Lx[base + i] * x[c];\n";
            os << "    }\n}\n\n";
        }

        const std::string start = block_ + "_start";
        auto head = [&](const std::string& name) {
            os << "static void " << name << "(int b, " << args << ")\n{\n";
            os << "    const int s = " << start << "[b], w = " << start << "[b + 1] - s;\n";
            os << "    (void)Lx; (void)Li; (void)x; (void)w;\n";
        };
        auto dispatch = [&](const std::string& stem, const std::string& extra) {
            os << "    switch (w) {\n";
            for (const index_t w : widths_) {
                if (w <= kUnrollWidth) os << "    case " << w << ": " << stem << "_w" << w << "(s, " << extra << pass << "); return;\n";
            }
            os << "    default: break;\n    }\n";
            if (generic) os << "    " << stem << "_gen(s, w, " << extra << pass << ");\n";
        };
        // Rows below a supernode: the off-diagonal entries of its last column.
        head("blk_trisolve");
        dispatch("dts", "");
        os << "}\n\n";
        head("blk_gather");
        os << "    const int q = Lp[s + w - 1] + 1, m = Lp[s + w] - q;\n";
        os << "    for (int i = 0; i < m; ++i) temp_work[i] = x[Li[q + i]];\n}\n\n";
        head("blk_update");
        os << "    const int m = Lp[s + w] - Lp[s + w - 1] - 1;\n";
        dispatch("bupd", "m, ");
        os << "}\n\n";
        head("blk_scatter");
        os << "    const int q = Lp[s + w - 1] + 1, m = Lp[s + w] - q;\n";
        os << "    for (int i = 0; i < m; ++i) x[Li[q + i]] = temp_work[i];\n}\n\n";
    }

    // ---- cholesky helpers ----

    static constexpr const char* kCholArgs =
        "const double* Ax, const int* Ap, const int* Ai, double* Lx, const int* Lp, const int* Li";

    void emit_chol_helpers(std::ostringstream& os) const {
        os << "static int find_row(const int* Li, int lo, int hi, int row)\n{\n";
        os << "    while (lo < hi) {\n";
        os << "        const int mid = lo + (hi - lo) / 2;\n";
        os << "        if (Li[mid] < row) lo = mid + 1; else hi = mid;\n";
        os << "    }\n    return lo;\n}\n\n";
        if (!block_.empty()) return;
        const std::string args = kCholArgs;
        os << "static void col_gather(int j, " << args << ")\n{\n";
        os << "    (void)Lx;\n";
        os << "    for (int p = Lp[j]; p < Lp[j + 1]; ++p) f_work[Li[p]] = 0.0;\n";
        os << "    for (int p = Ap[j]; p < Ap[j + 1]; ++p) if (Ai[p] >= j) f_work[Ai[p]] = Ax[p];\n}\n\n";
        os << "static void col_update(int j, int k, " << args << ")\n{\n";
        os << "    (void)Ax; (void)Ap; (void)Ai;\n";
        os << "    const int end = Lp[k + 1], q = find_row(Li, Lp[k], end, j);\n";
        os << "    if (q == end || Li[q] != j) return;\n";
        os << "    const double ljk = Lx[q];\n";
        os << "    for (int p = q; p < end; ++p) f_work[Li[p]] -= Lx[p] * ljk;\n}\n\n";
        os << "static int col_sqrt(int j, " << args << ")\n{\n";
        os << "    (void)Ax; (void)Ap; (void)Ai; (void)Li;\n";
        os << "    const double d = f_work[j];\n";
        os << "    if (!(d > 0.0)) return j + 1;\n";
        os << "    Lx[Lp[j]] = sqrt(d);\n    return 0;\n}\n\n";
        os << "static void col_div(int j, " << args << ")\n{\n";
        os << "    (void)Ax; (void)Ap; (void)Ai;\n";
        os << "    const int diag = Lp[j], end = Lp[j + 1];\n";
        os << "    for (int p = diag + 1; p < end; ++p) Lx[p] = f_work[Li[p]] / Lx[diag];\n}\n\n";
    }

    void emit_snode_helpers(std::ostringstream& os) const {
        const std::string args = kCholArgs;
        const std::string pass = "Ax, Ap, Ai, Lx, Lp, Li";
        const std::string start = block_ + "_start";
        const bool generic = *widths_.rbegin() > kUnrollWidth;

        emit_chol_helpers(os);

        os << "static void sn_gather(int b, " << args << ")\n{\n";
        os << "    (void)Lx;\n";
        os << "    const int s = " << start << "[b], w = " << start << "[b + 1] - s;\n";
        os << "    const int m = Lp[s + 1] - Lp[s];\n";
        os << "    for (int i = 0; i < m; ++i) rowmap_work[Li[Lp[s] + i]] = i;\n";
        os << "    for (int i = 0; i < m * w; ++i) temp_work[i] = 0.0;\n";
        os << "    for (int c = s; c < s + w; ++c)\n";
        os << "        for (int p = Ap[c]; p < Ap[c + 1]; ++p)\n";
        os << "            if (Ai[p] >= c) temp_work[(c - s) * m + rowmap_work[Ai[p]]] = Ax[p];\n}\n\n";

        // Contribution of source column k to the supernode starting at s.
        os << "static void sn_column(int k, int s, int w, int m, const double* Lx, const int* Lp, const int* Li)\n{\n";
        os << "    const int end = Lp[k + 1];\n";
        os << "    for (int q = find_row(Li, Lp[k], end, s); q < end && Li[q] < s + w; ++q) {\n";
        os << "        const double ljk = Lx[q];\n";
        os << "        double* dst = temp_work + (Li[q] - s) * m;\n";
        os << "        for (int p = q; p < end; ++p) dst[rowmap_work[Li[p]]] -= Lx[p] * ljk;\n";
        os << "    }\n}\n\n";

        for (const index_t w : widths_) {
            if (w > kUnrollWidth) continue;
            os << "static void sn_update_w" << w << "(int k, int s, int w, int m, const double* Lx, const int* Lp, const int* Li)\n{\n";
            for (index_t c = 0; c < w; ++c) os << "    sn_column(k + " << c << ", s, w, m, Lx, Lp, Li);\n";
            os << "}\n\n";

            os << "static int sn_potrf_w" << w << "(int s, int m)\n{\n";
            for (index_t j = 0; j < w; ++j) {
                os << "    double* c" << j << " = temp_work + " << j << " * m;\n";
            }
            os << "    (void)m;\n";
            for (index_t j = 0; j < w; ++j) {
                for (index_t k = 0; k < j; ++k) {
                    os << "    { const double l = c" << k << "[" << j << "];";
                    for (index_t i = j; i < w; ++i) os << " c" << j << "[" << i << "] -= c" << k << "[" << i << "] * l;";
                    os << " }\n";
                }
                os << "    if (!(c" << j << "[" << j << "] > 0.0)) return s + " << j + 1 << ";\n";
                os << "    c" << j << "[" << j << "] = sqrt(c" << j << "[" << j << "]);\n";
                for (index_t i = j + 1; i < w; ++i) {
                    os << "    c" << j << "[" << i << "] /= c" << j << "[" << j << "];\n";
                }
            }
            os << "    return 0;\n}\n\n";

            os << "static void sn_trsm_w" << w << "(int m)\n{\n";
            for (index_t j = 0; j < w; ++j) {
                os << "    double* c" << j << " = temp_work + " << j << " * m;\n";
            }
            for (index_t j = 0; j < w; ++j) {
                for (index_t k = 0; k < j; ++k) {
                    os << "    { const double l = c" << k << "[" << j << "]; for (int i = " << w << "; i < m; ++i) c" << j
                       << "[i] -= c" << k << "[i] * l; }\n";
                }
                os << "    for (int i = " << w << "; i < m; ++i) c" << j << "[i] /= c" << j << "[" << j << "];\n";
            }
            os << "}\n\n";
        }
        if (generic) {
            os << "static void sn_update_gen(int k, int s, int w, int m, const double* Lx, const int* Lp, const int* Li, int kw)\n{\n";
            os << "    for (int c = 0; c < kw; ++c) sn_column(k + c, s, w, m, Lx, Lp, Li);\n}\n\n";
            os << "static int sn_potrf_gen(int s, int w, int m)\n{\n";
            os << "    for (int j = 0; j < w; ++j) {\n";
            os << "        double* cj = temp_work + j * m;\n";
            os << "        for (int k = 0; k < j; ++k) {\n";
            os << "            const double* ck = temp_work + k * m;\n";
            os << "            const double l = ck[j];\n";
            os << "            for (int i = j; i < w; ++i) cj[i] -= ck[i] * l;\n";
            os << "        }\n";
            os << "        if (!(cj[j] > 0.0)) return s + j + 1;\n";
            os << "        cj[j] = sqrt(cj[j]);\n";
            os << "        for (int i = j + 1; i < w; ++i) cj[i] /= cj[j];\n";
            os << "    }\n    return 0;\n}\n\n";
            os << "static void sn_trsm_gen(int w, int m)\n{\n";
            os << "    for (int j = 0; j < w; ++j) {\n";
            os << "        double* cj = temp_work + j * m;\n";
            os << "        for (int k = 0; k < j; ++k) {\n";
            os << "            const double* ck = temp_work + k * m;\n";
            os << "            const double l = ck[j];\n";
            os << "            for (int i = w; i < m; ++i) cj[i] -= ck[i] * l;\n";
            os << "        }\n";
            os << "        for (int i = w; i < m; ++i) cj[i] /= cj[j];\n";
            os << "    }\n}\n\n";
        }

        auto head = [&](const std::string& ret, const std::string& name, const std::string& params) {
            os << "static " << ret << " " << name << "(" << params << args << ")\n{\n";
            os << "    (void)Ax; (void)Ap; (void)Ai; (void)Lx; (void)Li;\n";
            os << "    const int s = " << start << "[b], w = " << start << "[b + 1] - s;\n";
            os << "    const int m = Lp[s + 1] - Lp[s];\n";
            os << "    (void)w; (void)m;\n";
        };
        head("void", "sn_update", "int b, int t, ");
        os << "    const int k = " << start << "[t], kw = " << start << "[t + 1] - k;\n";
        os << "    switch (kw) {\n";
        for (const index_t w : widths_) {
            if (w <= kUnrollWidth) os << "    case " << w << ": sn_update_w" << w << "(k, s, w, m, Lx, Lp, Li); return;\n";
        }
        os << "    default: break;\n    }\n";
        if (generic) os << "    sn_update_gen(k, s, w, m, Lx, Lp, Li, kw);\n";
        os << "}\n\n";

        head("int", "sn_potrf", "int b, ");
        os << "    switch (w) {\n";
        for (const index_t w : widths_) {
            if (w <= kUnrollWidth) os << "    case " << w << ": return sn_potrf_w" << w << "(s, m);\n";
        }
        os << "    default: break;\n    }\n";
        os << (generic ? "    return sn_potrf_gen(s, w, m);\n" : "    return 0;\n");
        os << "}\n\n";

        head("void", "sn_trsm", "int b, ");
        os << "    switch (w) {\n";
        for (const index_t w : widths_) {
            if (w <= kUnrollWidth) os << "    case " << w << ": sn_trsm_w" << w << "(m); return;\n";
        }
        os << "    default: break;\n    }\n";
        if (generic) os << "    sn_trsm_gen(w, m);\n";
        os << "}\n\n";

        head("void", "sn_scatter", "int b, ");
        os << "    for (int c = s; c < s + w; ++c) {\n";
        os << "        const double* src = temp_work + (c - s) * m;\n";
        os << "        for (int p = Lp[c]; p < Lp[c + 1]; ++p) Lx[p] = src[rowmap_work[Li[p]]];\n";
        os << "    }\n}\n\n";
        (void)pass;
    }

    // ---- kernel body ----

    std::string expr(const IndexExpr& e) const {
        switch (e.kind) {
            case IndexExpr::Kind::Var: return e.name;
            case IndexExpr::Kind::Const: return num(e.value);
            case IndexExpr::Kind::SetElem:
                if (e.key.empty()) return e.name + "[" + e.pos + "]";
                return e.name + "_idx[" + e.name + "_ptr[" + e.key + "] + " + e.pos + "]";
        }
        return "0";
    }

    std::string bound(const Bound& b) const {
        switch (b.kind) {
            case Bound::Kind::Const: return num(b.value);
            case Bound::Kind::Order: return num(ir_.n);
            case Bound::Kind::Index:
                if (b.col.kind == IndexExpr::Kind::Const) return num(b.col.value + b.value);
                return plus(expr(b.col), b.value);
            case Bound::Kind::ColPtr:
                if (b.col.kind == IndexExpr::Kind::Const) {
                    const index_t c = b.col.value + b.shift;
                    if (c < 0 || c > P_.n) throw EmitError("column pointer index outside pattern");
                    return num(P_.colptr[c] + b.value);
                }
                return plus("Lp[" + plus(expr(b.col), b.shift) + "]", b.value);
        }
        return "0";
    }

    void line(std::ostringstream& os, int depth, const std::string& text) const {
        os << std::string(static_cast<std::size_t>(depth) * 4, ' ') << text << "\n";
    }

    void node(std::ostringstream& os, const Node& n, int depth) const {
        if (const auto* s = std::get_if<Stmt>(&n.v)) return stmt(os, *s, depth);
        if (const auto* seq = std::get_if<Seq>(&n.v)) {
            for (const auto& c : seq->body) node(os, c, depth);
            return;
        }
        if (const auto* p = std::get_if<Peeled>(&n.v)) {
            line(os, depth, "{ /* peeled " + p->set + "[" + num(p->position) + "] = " + num(p->element) + " */");
            for (const auto& c : p->body) node(os, c, depth + 1);
            line(os, depth, "}");
            return;
        }
        loop(os, std::get<Loop>(n.v), depth);
    }

    void loop(std::ostringstream& os, const Loop& l, int depth) const {
        for (const auto& a : l.annotations) {
            switch (a.kind) {
                case Annotation::Kind::VecHint: line(os, depth, "#pragma GCC ivdep"); break;
                case Annotation::Kind::Unroll: line(os, depth, "#pragma GCC unroll " + num(a.value)); break;
                case Annotation::Kind::Distribute: line(os, depth, "/* distribute */"); break;
                default: break;
            }
        }
        const auto& d = l.domain;
        const std::string& v = l.index;
        std::string lo, hi;
        switch (d.kind) {
            case Domain::Kind::Range:
                lo = bound(d.lo);
                hi = bound(d.hi);
                break;
            case Domain::Kind::SetRef: {
                const auto& s = set(d.set);
                lo = num(d.slice_lo);
                if (d.key.empty()) {
                    if (s.tag != SetTag::PruneSet) throw EmitError("set '" + d.set + "' is not a prune set");
                    const index_t size = static_cast<index_t>(s.prune_set().order.size());
                    hi = num(d.slice_hi < 0 ? size : std::min(d.slice_hi, size));
                } else {
                    if (s.tag != SetTag::RowPatterns) throw EmitError("set '" + d.set + "' is not a keyed table");
                    const std::string size = d.set + "_ptr[" + d.key + " + 1] - " + d.set + "_ptr[" + d.key + "]";
                    hi = d.slice_hi < 0 ? size : "(" + size + " < " + num(d.slice_hi) + " ? " + size + " : " + num(d.slice_hi) + ")";
                }
                break;
            }
            case Domain::Kind::BlockRef: {
                const auto& s = set(d.set);
                if (s.tag != SetTag::BlockSet) throw EmitError("set '" + d.set + "' is not a block set");
                lo = "0";
                hi = d.set + "_count";
                if (d.part == BlockPart::OffDiagonal) {
                    line(os, depth, "for (int " + v + " = 0; " + v + " < " + d.key + " && " + v + " < " + hi + "; ++" + v + ") {");
                    for (const auto& c : l.body) node(os, c, depth + 1);
                    line(os, depth, "}");
                    return;
                }
                break;
            }
        }
        line(os, depth, "for (int " + v + " = " + lo + "; " + v + " < " + hi + "; ++" + v + ") {");
        for (const auto& c : l.body) node(os, c, depth + 1);
        line(os, depth, "}");
    }

    void stmt(std::ostringstream& os, const Stmt& s, int depth) const {
        auto op = [&](std::size_t i) -> const IndexExpr& {
            if (i >= s.operands.size()) throw EmitError("statement is missing an operand");
            return s.operands[i];
        };
        if (!s.blocks.empty() && s.blocks != block_) throw EmitError("unresolved block set '" + s.blocks + "'");
        if (solve_) {
            const std::string pass = ", Lx, Lp, Li, x);";
            switch (s.kind) {
                case StmtKind::Div: {
                    const auto& c = op(0);
                    if (c.kind == IndexExpr::Kind::Const) {
                        check_column(c.value);
                        return line(os, depth, "x[" + num(c.value) + "] /= Lx[" + num(P_.colptr[c.value]) + "];");
                    }
                    const std::string e = expr(c);
                    return line(os, depth, "x[" + e + "] /= Lx[Lp[" + e + "]];");
                }
                case StmtKind::SubMul: {
                    const auto& c = op(0);
                    const auto& p = op(1);
                    if (c.kind == IndexExpr::Kind::Const && p.kind == IndexExpr::Kind::Const) {
                        check_column(c.value);
                        if (p.value < P_.colptr[c.value] || p.value >= P_.colptr[c.value + 1]) {
                            throw EmitError("entry outside column");
                        }
                        return line(os, depth, "x[" + num(P_.rowind[p.value]) + "] -= Lx[" + num(p.value) + "] * x[" +
                                                   num(c.value) + "];");
                    }
                    const std::string pe = expr(p);
                    return line(os, depth, "x[Li[" + pe + "]] -= Lx[" + pe + "] * x[" + expr(c) + "];");
                }
                case StmtKind::DenseTriSolve: return line(os, depth, "blk_trisolve(" + expr(op(0)) + pass);
                case StmtKind::Gather: return line(os, depth, "blk_gather(" + expr(op(0)) + pass);
                case StmtKind::BlockUpdate: return line(os, depth, "blk_update(" + expr(op(0)) + pass);
                case StmtKind::Scatter: return line(os, depth, "blk_scatter(" + expr(op(0)) + pass);
                default: break;
            }
        } else {
            const std::string pass = ", Ax, Ap, Ai, Lx, Lp, Li)";
            switch (s.kind) {
                case StmtKind::Gather:
                    if (s.blocks.empty()) return line(os, depth, "col_gather(" + expr(op(0)) + pass + ";");
                    return line(os, depth, "sn_gather(" + expr(op(0)) + pass + ";");
                case StmtKind::SubMul:
                    return line(os, depth, "col_update(" + expr(op(0)) + ", " + expr(op(1)) + pass + ";");
                case StmtKind::Sqrt:
                    return line(os, depth, "{ const int st = col_sqrt(" + expr(op(0)) + pass + "; if (st) return st; }");
                case StmtKind::Div: return line(os, depth, "col_div(" + expr(op(0)) + pass + ";");
                case StmtKind::BlockUpdate:
                    return line(os, depth, "sn_update(" + expr(op(0)) + ", " + expr(op(1)) + pass + ";");
                case StmtKind::DenseCholesky:
                    return line(os, depth, "{ const int st = sn_potrf(" + expr(op(0)) + pass + "; if (st) return st; }");
                case StmtKind::DenseTriSolve: return line(os, depth, "sn_trsm(" + expr(op(0)) + pass + ";");
                case StmtKind::Scatter: return line(os, depth, "sn_scatter(" + expr(op(0)) + pass + ";");
            }
        }
        throw EmitError("statement kind not valid for this algorithm");
    }

    void check_column(index_t c) const {
        if (c < 0 || c >= P_.n) throw EmitError("column " + num(c) + " outside pattern");
    }

    const KernelIR& ir_;
    const SetTable& sets_;
    const SparsityPattern& P_;
    const bool solve_;
    std::set<std::string> used_;
    std::set<std::string> block_sets_;
    std::string block_;
    std::set<index_t> widths_;
    std::size_t temp_size_ = 0;
    EmitUnit unit_;
};

// ---- external compile path ----

template <class T>
void put(std::ofstream& out, const T* data, std::size_t count) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

void put_int(std::ofstream& out, int v) { put(out, &v, 1); }

struct Linked {
    std::string entry;
    Algorithm algorithm;
};

std::string harness(const std::vector<Linked>& kernels) {
    std::ostringstream os;
    os << "#include <stdio.h>\n#include <stdlib.h>\n\n";
    os << "static void* rd(FILE* f, size_t size, size_t count)\n{\n"
          "    void* p = malloc(size * (count ? count : 1));\n"
          "    if (count && fread(p, size, count, f) != count) exit(3);\n"
          "    return p;\n}\n\n"
          "static int rd_int(FILE* f)\n{\n"
          "    int v;\n"
          "    if (fread(&v, sizeof v, 1, f) != 1) exit(3);\n"
          "    return v;\n}\n\n";
    for (const auto& k : kernels) {
        if (k.algorithm == Algorithm::TriangularSolve) {
            os << "void " << k.entry << "(const double*, const int*, const int*, double*);\n";
        } else {
            os << "int " << k.entry << "(const double*, const int*, const int*, double*, const int*, const int*);\n";
        }
    }
    os << "\nint main(int argc, char** argv)\n{\n";
    os << "    if (argc != 3) return 2;\n";
    os << "    FILE* in = fopen(argv[1], \"rb\");\n";
    os << "    FILE* out = fopen(argv[2], \"wb\");\n";
    os << "    if (!in || !out) return 2;\n";
    os << "    const int count = rd_int(in);\n";
    os << "    if (count != " << kernels.size() << ") return 3;\n";
    os << "    for (int c = 0; c < count; ++c) {\n";
    os << "        const int n = rd_int(in), annz = rd_int(in);\n";
    os << "        int* Ap = rd(in, sizeof(int), (size_t)n + 1);\n";
    os << "        int* Ai = rd(in, sizeof(int), (size_t)annz);\n";
    os << "        double* Ax = rd(in, sizeof(double), (size_t)annz);\n";
    os << "        const int m = rd_int(in);\n";
    os << "        int status = 0;\n";
    os << "        double* v = NULL;\n";
    os << "        switch (c) {\n";
    for (std::size_t c = 0; c < kernels.size(); ++c) {
        const auto& k = kernels[c];
        os << "        case " << c << ": {\n";
        if (k.algorithm == Algorithm::TriangularSolve) {
            os << "            v = rd(in, sizeof(double), (size_t)m);\n";
            os << "            " << k.entry << "(Ax, Ap, Ai, v);\n";
        } else {
            os << "            int* Lp = rd(in, sizeof(int), (size_t)n + 1);\n";
            os << "            int* Li = rd(in, sizeof(int), (size_t)m);\n";
            os << "            v = calloc(m ? (size_t)m : 1, sizeof(double));\n";
            os << "            status = " << k.entry << "(Ax, Ap, Ai, v, Lp, Li);\n";
            os << "            free(Lp);\n            free(Li);\n";
        }
        os << "            break;\n        }\n";
    }
    os << "        default: return 3;\n        }\n";
    os << "        fwrite(&status, sizeof status, 1, out);\n";
    os << "        fwrite(&m, sizeof m, 1, out);\n";
    os << "        fwrite(v, sizeof(double), (size_t)m, out);\n";
    os << "        free(Ap);\n        free(Ai);\n        free(Ax);\n        free(v);\n";
    os << "    }\n";
    os << "    fclose(in);\n    fclose(out);\n    return 0;\n}\n";
    return os.str();
}

bool ident_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Names defined at file scope: `static ... name[`, `static ... name(`, `enum { name =`, and the entry.
std::set<std::string> file_scope_names(const EmitUnit& unit) {
    std::set<std::string> names{unit.entry_name};
    std::istringstream in(unit.source);
    std::string line;
    while (std::getline(in, line)) {
        std::size_t end = std::string::npos;
        if (line.rfind("static ", 0) == 0) {
            end = line.find_first_of("[(");
        } else if (line.rfind("enum { ", 0) == 0) {
            end = line.find(" =");
        }
        if (end == std::string::npos) continue;
        std::size_t begin = end;
        while (begin > 0 && ident_char(line[begin - 1])) --begin;
        if (begin < end) names.insert(line.substr(begin, end - begin));
    }
    return names;
}

// Prefixes every file-scope identifier so several units can share one translation unit.
std::string prefixed(const EmitUnit& unit, const std::string& prefix) {
    const auto names = file_scope_names(unit);
    const std::string& src = unit.source;
    std::string out;
    out.reserve(src.size() + src.size() / 4);
    for (std::size_t i = 0; i < src.size();) {
        if (!ident_char(src[i]) || (i > 0 && ident_char(src[i - 1]))) {
            out += src[i++];
            continue;
        }
        std::size_t j = i;
        while (j < src.size() && ident_char(src[j])) ++j;
        const std::string token = src.substr(i, j - i);
        if (names.count(token)) out += prefix;
        out += token;
        i = j;
    }
    return out;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string quote(const std::string& s) {
    std::string out = "'";
    for (const char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

}  // namespace

EmitUnit emit_source(const KernelIR& ir, const SetTable& sets, const SparsityPattern& pattern,
                     const std::string& entry_name) {
    return Emitter(ir, sets, pattern).run(entry_name);
}

std::string entry_name_for(const std::string& matrix_stem, Algorithm algorithm) {
    std::string name = matrix_stem + (algorithm == Algorithm::TriangularSolve ? "_trisolve" : "_cholesky");
    for (char& c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
        if (!ok) c = '_';
    }
    if (name.front() >= '0' && name.front() <= '9') name = "m_" + name;
    return name;
}

std::vector<ExternalResult> compile_and_run_external_batch(std::span<const ExternalCase> cases,
                                                          const std::filesystem::path& scratch_dir) {
    std::vector<ExternalResult> results(cases.size());
    const char* cc = std::getenv("SYMSPEC_CC");
    if (cc == nullptr || *cc == '\0' || cases.empty()) return results;

    namespace fs = std::filesystem;
    fs::create_directories(scratch_dir);
    const bool single = cases.size() == 1;
    const std::string stem = single ? cases[0].unit->entry_name : "batch";
    const fs::path kernel = scratch_dir / (stem + ".c");
    const fs::path driver = scratch_dir / (stem + "_harness.c");
    const fs::path exe = scratch_dir / (stem + "_run");
    const fs::path input = scratch_dir / (stem + ".in");
    const fs::path output = scratch_dir / (stem + ".out");
    const fs::path log = scratch_dir / (stem + ".log");

    std::vector<Linked> linked;
    {
        std::ofstream src(kernel);
        for (std::size_t c = 0; c < cases.size(); ++c) {
            const auto& k = cases[c];
            if (k.unit == nullptr || k.matrix == nullptr) throw ArgumentError("external case " + std::to_string(c) + " is incomplete");
            if (single) {
                src << k.unit->source;
                linked.push_back({k.unit->entry_name, k.algorithm});
            } else {
                const std::string prefix = "k" + std::to_string(c) + "_";
                src << prefixed(*k.unit, prefix) << "\n";
                linked.push_back({prefix + k.unit->entry_name, k.algorithm});
            }
        }
    }
    std::ofstream(driver) << harness(linked);

    const std::string compile = std::string(cc) + " -O2 -ffp-contract=off -std=c99 -o " + quote(exe.string()) + " " +
                                quote(kernel.string()) + " " + quote(driver.string()) + " -lm > " +
                                quote(log.string()) + " 2>&1";
    if (std::system(compile.c_str()) != 0) throw EmitError("compile failed:\n" + read_text(log));

    {
        std::ofstream in(input, std::ios::binary);
        put_int(in, static_cast<int>(cases.size()));
        for (const auto& k : cases) {
            const CscMatrix& m = *k.matrix;
            put_int(in, m.n);
            put_int(in, static_cast<int>(m.rowind.size()));
            put(in, m.colptr.data(), m.colptr.size());
            put(in, m.rowind.data(), m.rowind.size());
            put(in, m.values.data(), m.values.size());
            if (k.algorithm == Algorithm::TriangularSolve) {
                if (static_cast<index_t>(k.b.size()) != m.n) throw ExecError("rhs length does not match matrix order");
                put_int(in, m.n);
                put(in, k.b.data(), k.b.size());
            } else {
                if (k.factor_pattern == nullptr) throw ExecError("cholesky execution needs the factor pattern");
                put_int(in, static_cast<int>(k.factor_pattern->rowind.size()));
                put(in, k.factor_pattern->colptr.data(), k.factor_pattern->colptr.size());
                put(in, k.factor_pattern->rowind.data(), k.factor_pattern->rowind.size());
            }
        }
    }
    const std::string run = quote(exe.string()) + " " + quote(input.string()) + " " + quote(output.string());
    if (std::system(run.c_str()) != 0) throw ExecError("emitted kernel exited abnormally");

    std::ifstream out(output, std::ios::binary);
    for (auto& r : results) {
        int count = 0;
        out.read(reinterpret_cast<char*>(&r.status), sizeof(int));
        out.read(reinterpret_cast<char*>(&count), sizeof(int));
        if (!out || count < 0) throw ExecError("emitted kernel produced truncated output");
        r.values.resize(static_cast<std::size_t>(count));
        out.read(reinterpret_cast<char*>(r.values.data()), static_cast<std::streamsize>(r.values.size() * sizeof(double)));
        if (!out) throw ExecError("emitted kernel produced truncated output");
        r.available = true;
    }
    return results;
}

ExternalResult compile_and_run_external(const EmitUnit& unit, Algorithm algorithm,
                                        const std::filesystem::path& scratch_dir, const CscMatrix& matrix,
                                        std::span<const double> b, const SparsityPattern* factor_pattern) {
    const ExternalCase one{&unit, algorithm, &matrix, b, factor_pattern};
    return compile_and_run_external_batch(std::span<const ExternalCase>(&one, 1), scratch_dir).front();
}

}  // namespace symspec
