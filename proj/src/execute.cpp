#include <algorithm>
#include <cmath>
#include <utility>

#include "symspec/emit.hpp"

namespace symspec {

namespace {

using namespace kir;

constexpr std::size_t kDouble = sizeof(double);

// Interpreter for KernelIR. Every statement here has a line-for-line twin in
// the C emitter; both must perform the same floating point operations in the
// same order.
class Machine {
public:
    Machine(const KernelIR& ir, const SetTable& sets) : ir_(ir), sets_(sets) {}

    ExecResult run_solve(const CscMatrix& L, std::span<const double> b) {
        if (L.n != ir_.n) throw ExecError("matrix order " + std::to_string(L.n) + " != kernel order " + std::to_string(ir_.n));
        if (static_cast<index_t>(b.size()) != L.n) throw ExecError("rhs length does not match matrix order");
        const auto v = validate(L);
        if (!v.empty()) throw ExecError("invalid matrix: " + v.front());
        L_ = &L;
        colptr_ = &L.colptr;
        x_.assign(b.begin(), b.end());
        run(ir_.root);
        ExecResult r;
        r.x = std::move(x_);
        r.trace = trace_;
        return r;
    }

    ExecResult run_cholesky(const CscMatrix& A, const SparsityPattern& Lpat) {
        if (A.n != ir_.n || Lpat.n != ir_.n) throw ExecError("matrix order does not match kernel order");
        const auto v = validate(A);
        if (!v.empty()) throw ExecError("invalid matrix: " + v.front());
        for (index_t j = 0; j < A.n; ++j) {
            const auto lc = Lpat.col(j);
            if (lc.empty() || lc.front() != j) throw ExecError("factor pattern lacks diagonal at column " + std::to_string(j));
            for (const index_t i : A.col(j)) {
                if (i >= j && !std::binary_search(lc.begin(), lc.end(), i)) {
                    throw ExecError("A(" + std::to_string(i) + "," + std::to_string(j) + ") outside the factor pattern");
                }
            }
        }
        A_ = &A;
        P_ = &Lpat;
        colptr_ = &Lpat.colptr;
        Lx_.assign(Lpat.rowind.size(), 0.0);
        f_.assign(static_cast<std::size_t>(A.n), 0.0);
        rowmap_.assign(static_cast<std::size_t>(A.n), 0);
        run(ir_.root);
        CscMatrix L;
        L.n = Lpat.n;
        L.colptr = Lpat.colptr;
        L.rowind = Lpat.rowind;
        L.values = std::move(Lx_);
        L.kind = MatrixKind::LowerTriangular;
        ExecResult r;
        r.factor = std::move(L);
        r.trace = trace_;
        return r;
    }

private:
    // ---- environment and set access ----

    index_t lookup(const std::string& name) const {
        for (auto it = env_.rbegin(); it != env_.rend(); ++it) {
            if (it->first == name) return it->second;
        }
        throw ExecError("unbound index variable '" + name + "'");
    }

    const InspectionSet& set(const std::string& name) const {
        const auto it = sets_.find(name);
        if (it == sets_.end()) throw ExecError("set '" + name + "' not bound");
        return it->second;
    }

    const std::vector<index_t>& flat(const std::string& name) const {
        const auto& s = set(name);
        if (s.tag != SetTag::PruneSet) throw ExecError("set '" + name + "' is not a prune set");
        return s.prune_set().order;
    }

    const std::vector<index_t>& keyed(const std::string& name, index_t key) const {
        const auto& s = set(name);
        if (s.tag != SetTag::RowPatterns) throw ExecError("set '" + name + "' is not a keyed table");
        const auto& rows = s.row_patterns().rows;
        if (key < 0 || static_cast<std::size_t>(key) >= rows.size()) throw ExecError("key outside table '" + name + "'");
        return rows[key];
    }

    const BlockSet& blocks(const std::string& name) {
        const auto& s = set(name);
        if (s.tag != SetTag::BlockSet) throw ExecError("set '" + name + "' is not a block set");
        return s.block_set();
    }

    index_t eval(const IndexExpr& e) const {
        switch (e.kind) {
            case IndexExpr::Kind::Var: return lookup(e.name);
            case IndexExpr::Kind::Const: return e.value;
            case IndexExpr::Kind::SetElem: {
                const index_t pos = lookup(e.pos);
                const auto& list = e.key.empty() ? flat(e.name) : keyed(e.name, lookup(e.key));
                if (pos < 0 || static_cast<std::size_t>(pos) >= list.size()) throw ExecError("position outside set '" + e.name + "'");
                return list[pos];
            }
        }
        return 0;
    }

    index_t eval(const Bound& b) const {
        switch (b.kind) {
            case Bound::Kind::Const: return b.value;
            case Bound::Kind::Order: return ir_.n;
            case Bound::Kind::Index: return eval(b.col) + b.value;
            case Bound::Kind::ColPtr: {
                const index_t c = eval(b.col) + b.shift;
                if (c < 0 || c > ir_.n) throw ExecError("column pointer index outside matrix");
                return (*colptr_)[c] + b.value;
            }
        }
        return 0;
    }

    index_t column(const IndexExpr& e) const {
        const index_t c = eval(e);
        if (c < 0 || c >= ir_.n) throw ExecError("column index " + std::to_string(c) + " outside matrix");
        return c;
    }

    // ---- traversal ----

    void run(const Node& node) {
        if (const auto* s = std::get_if<Stmt>(&node.v)) return exec(*s);
        if (const auto* seq = std::get_if<Seq>(&node.v)) {
            for (const auto& c : seq->body) run(c);
            return;
        }
        if (const auto* p = std::get_if<Peeled>(&node.v)) {
            ++trace_.peeled_iterations;
            for (const auto& c : p->body) run(c);
            return;
        }
        const auto& loop = std::get<Loop>(node.v);
        auto iterate = [&](index_t lo, index_t hi) {
            env_.emplace_back(loop.index, 0);
            const std::size_t slot = env_.size() - 1;
            for (index_t v = lo; v < hi; ++v) {
                env_[slot].second = v;
                for (const auto& c : loop.body) run(c);
            }
            env_.pop_back();
        };
        const auto& d = loop.domain;
        switch (d.kind) {
            case Domain::Kind::Range: return iterate(eval(d.lo), eval(d.hi));
            case Domain::Kind::SetRef: {
                const index_t size = static_cast<index_t>(d.key.empty() ? flat(d.set).size()
                                                                        : keyed(d.set, lookup(d.key)).size());
                const index_t hi = d.slice_hi < 0 ? size : std::min(d.slice_hi, size);
                return iterate(d.slice_lo, hi);
            }
            case Domain::Kind::BlockRef: {
                const index_t count = static_cast<index_t>(blocks(d.set).blocks.size());
                if (d.part == BlockPart::Diagonal) return iterate(0, count);
                return iterate(0, std::min(lookup(d.key), count));
            }
        }
    }

    void exec(const Stmt& s) {
        auto operand = [&](std::size_t i) -> const IndexExpr& {
            if (i >= s.operands.size()) throw ExecError("statement is missing an operand");
            return s.operands[i];
        };
        if (ir_.algorithm == Algorithm::TriangularSolve) {
            switch (s.kind) {
                case StmtKind::Div: return tri_div(column(operand(0)));
                case StmtKind::SubMul: return tri_submul(column(operand(0)), eval(operand(1)));
                case StmtKind::DenseTriSolve: return tri_diag_solve(block(s, eval(operand(0))));
                case StmtKind::Gather: return tri_gather(block(s, eval(operand(0))));
                case StmtKind::BlockUpdate: return tri_block_update(block(s, eval(operand(0))));
                case StmtKind::Scatter: return tri_scatter(block(s, eval(operand(0))));
                default: break;
            }
        } else {
            switch (s.kind) {
                case StmtKind::Gather:
                    if (s.blocks.empty()) return chol_gather(column(operand(0)));
                    return snode_gather(block(s, eval(operand(0))));
                case StmtKind::SubMul: return chol_submul(column(operand(0)), column(operand(1)));
                case StmtKind::Sqrt: return chol_sqrt(column(operand(0)));
                case StmtKind::Div: return chol_div(column(operand(0)));
                case StmtKind::BlockUpdate:
                    return snode_update(block(s, eval(operand(0))), block(s, eval(operand(1))));
                case StmtKind::DenseCholesky: return snode_potrf(block(s, eval(operand(0))));
                case StmtKind::DenseTriSolve: return snode_trsm(block(s, eval(operand(0))));
                case StmtKind::Scatter: return snode_scatter(block(s, eval(operand(0))));
                default: break;
            }
        }
        throw ExecError("statement kind not valid for this algorithm");
    }

    Block block(const Stmt& s, index_t id) {
        if (s.blocks.empty()) throw ExecError("block statement without a block set");
        const auto& bs = blocks(s.blocks);
        if (!checked_) {
            check_blocks(bs);
            checked_ = true;
        }
        if (id < 0 || static_cast<std::size_t>(id) >= bs.blocks.size()) throw ExecError("block index outside block set");
        return bs.blocks[id];
    }

    void check_blocks(const BlockSet& bs) {
        try {
            check_partition(bs, ir_.n);
        } catch (const ArgumentError& e) {
            throw ExecError(e.what());
        }
        std::size_t buffer = 0;
        for (std::size_t b = 0; b < bs.blocks.size(); ++b) {
            const auto& blk = bs.blocks[b];
            const std::string bad = "block " + std::to_string(b) + " is not a supernode of the factor";
            if (ir_.algorithm == Algorithm::TriangularSolve) {
                // Every column shares the rows below the block.
                const auto tail = below(blk.end() - 1, blk.end());
                for (index_t c = blk.start; c < blk.end(); ++c) {
                    const auto t = below(c, blk.end());
                    if (!std::equal(t.begin(), t.end(), tail.begin(), tail.end())) throw ExecError(bad);
                }
                buffer = std::max(buffer, tail.size());
            } else {
                const auto first = P_->col(blk.start);
                if (static_cast<index_t>(first.size()) < blk.width) throw ExecError(bad);
                for (index_t c = blk.start; c < blk.end(); ++c) {
                    const auto col = P_->col(c);
                    const auto expect = first.subspan(static_cast<std::size_t>(c - blk.start));
                    if (!std::equal(col.begin(), col.end(), expect.begin(), expect.end())) throw ExecError(bad);
                    if (first[c - blk.start] != c) throw ExecError(bad);
                }
                buffer = std::max(buffer, first.size() * static_cast<std::size_t>(blk.width));
            }
        }
        temp_.assign(buffer, 0.0);
    }

    std::span<const index_t> below(index_t c, index_t end) const {
        const auto col = L_->col(c);
        const auto it = std::lower_bound(col.begin(), col.end(), end);
        return col.subspan(static_cast<std::size_t>(it - col.begin()));
    }

    // ---- triangular solve ----

    void tri_div(index_t c) {
        const index_t d = L_->colptr[c];
        if (d == L_->colptr[c + 1] || L_->rowind[d] != c || L_->values[d] == 0.0) throw SingularError(c);
        x_[c] /= L_->values[d];
        ++trace_.flops;
        ++trace_.columns_visited;
    }

    void tri_submul(index_t c, index_t p) {
        if (p < L_->colptr[c] || p >= L_->colptr[c + 1]) throw ExecError("entry outside column");
        x_[L_->rowind[p]] -= L_->values[p] * x_[c];
        trace_.flops += 2;
    }

    void tri_diag_solve(const Block& blk) {
        const index_t w = blk.width, s = blk.start;
        diag_.assign(static_cast<std::size_t>(w) * w, 0.0);
        for (index_t c = 0; c < w; ++c) {
            for (index_t p = L_->colptr[s + c]; p < L_->colptr[s + c + 1] && L_->rowind[p] < blk.end(); ++p) {
                diag_[static_cast<std::size_t>(c) * w + (L_->rowind[p] - s)] = L_->values[p];
                trace_.bytes_moved += kDouble;
            }
        }
        for (index_t c = 0; c < w; ++c) {
            const double d = diag_[static_cast<std::size_t>(c) * w + c];
            if (d == 0.0) throw SingularError(s + c);
            x_[s + c] /= d;
            for (index_t r = c + 1; r < w; ++r) x_[s + r] -= diag_[static_cast<std::size_t>(c) * w + r] * x_[s + c];
        }
        trace_.flops += static_cast<std::size_t>(w) * w;
        trace_.columns_visited += static_cast<std::size_t>(w);
    }

    void tri_gather(const Block& blk) {
        const auto rows = below(blk.end() - 1, blk.end());
        for (std::size_t i = 0; i < rows.size(); ++i) temp_[i] = x_[rows[i]];
        trace_.bytes_moved += rows.size() * kDouble;
    }

    void tri_block_update(const Block& blk) {
        const std::size_t m = below(blk.end() - 1, blk.end()).size();
        for (index_t c = blk.start; c < blk.end(); ++c) {
            const index_t base = L_->colptr[c + 1] - static_cast<index_t>(m);
            for (std::size_t i = 0; i < m; ++i) temp_[i] -= L_->values[base + i] * x_[c];
        }
        trace_.flops += 2 * m * static_cast<std::size_t>(blk.width);
    }

    void tri_scatter(const Block& blk) {
        const auto rows = below(blk.end() - 1, blk.end());
        for (std::size_t i = 0; i < rows.size(); ++i) x_[rows[i]] = temp_[i];
        trace_.bytes_moved += rows.size() * kDouble;
    }

    // ---- cholesky, column by column ----

    void chol_gather(index_t j) {
        for (const index_t i : P_->col(j)) f_[i] = 0.0;
        for (index_t p = A_->colptr[j]; p < A_->colptr[j + 1]; ++p) {
            if (A_->rowind[p] >= j) {
                f_[A_->rowind[p]] = A_->values[p];
                trace_.bytes_moved += kDouble;
            }
        }
    }

    void chol_submul(index_t j, index_t k) {
        ++trace_.update_iterations;
        const auto col = P_->col(k);
        const auto it = std::lower_bound(col.begin(), col.end(), j);
        if (it == col.end() || *it != j) return;
        const index_t q = P_->colptr[k] + static_cast<index_t>(it - col.begin());
        const index_t end = P_->colptr[k + 1];
        const double ljk = Lx_[q];
        for (index_t p = q; p < end; ++p) f_[P_->rowind[p]] -= Lx_[p] * ljk;
        trace_.flops += 2 * static_cast<std::size_t>(end - q);
    }

    void chol_sqrt(index_t j) {
        const double d = f_[j];
        if (!(d > 0.0)) throw NotSpdError(j);
        Lx_[P_->colptr[j]] = std::sqrt(d);
        ++trace_.flops;
        ++trace_.columns_visited;
    }

    void chol_div(index_t j) {
        const index_t diag = P_->colptr[j], end = P_->colptr[j + 1];
        for (index_t p = diag + 1; p < end; ++p) Lx_[p] = f_[P_->rowind[p]] / Lx_[diag];
        trace_.flops += static_cast<std::size_t>(end - diag - 1);
    }

    // ---- cholesky, supernodal ----

    index_t ld(const Block& blk) const { return P_->col_count(blk.start); }

    void snode_gather(const Block& blk) {
        const auto rows = P_->col(blk.start);
        const index_t m = static_cast<index_t>(rows.size());
        for (index_t i = 0; i < m; ++i) rowmap_[rows[i]] = i;
        std::fill_n(temp_.begin(), static_cast<std::size_t>(m) * blk.width, 0.0);
        for (index_t c = blk.start; c < blk.end(); ++c) {
            for (index_t p = A_->colptr[c]; p < A_->colptr[c + 1]; ++p) {
                if (A_->rowind[p] >= c) {
                    temp_[static_cast<std::size_t>(c - blk.start) * m + rowmap_[A_->rowind[p]]] = A_->values[p];
                    trace_.bytes_moved += kDouble;
                }
            }
        }
    }

    void snode_update(const Block& blk, const Block& src) {
        ++trace_.update_iterations;
        const index_t m = ld(blk);
        for (index_t k = src.start; k < src.end(); ++k) {
            const auto col = P_->col(k);
            const index_t end = P_->colptr[k + 1];
            index_t q = P_->colptr[k] + static_cast<index_t>(std::lower_bound(col.begin(), col.end(), blk.start) - col.begin());
            for (; q < end && P_->rowind[q] < blk.end(); ++q) {
                const index_t j = P_->rowind[q];
                const double ljk = Lx_[q];
                double* dst = temp_.data() + static_cast<std::size_t>(j - blk.start) * m;
                for (index_t p = q; p < end; ++p) dst[rowmap_[P_->rowind[p]]] -= Lx_[p] * ljk;
                trace_.flops += 2 * static_cast<std::size_t>(end - q);
            }
        }
    }

    void snode_potrf(const Block& blk) {
        const index_t m = ld(blk), w = blk.width;
        double* T = temp_.data();
        for (index_t j = 0; j < w; ++j) {
            double* cj = T + static_cast<std::size_t>(j) * m;
            for (index_t k = 0; k < j; ++k) {
                const double* ck = T + static_cast<std::size_t>(k) * m;
                const double ljk = ck[j];
                for (index_t i = j; i < w; ++i) cj[i] -= ck[i] * ljk;
                trace_.flops += 2 * static_cast<std::size_t>(w - j);
            }
            if (!(cj[j] > 0.0)) throw NotSpdError(blk.start + j);
            cj[j] = std::sqrt(cj[j]);
            for (index_t i = j + 1; i < w; ++i) cj[i] /= cj[j];
            trace_.flops += static_cast<std::size_t>(w - j);
        }
        trace_.columns_visited += static_cast<std::size_t>(w);
    }

    void snode_trsm(const Block& blk) {
        const index_t m = ld(blk), w = blk.width;
        double* T = temp_.data();
        for (index_t j = 0; j < w; ++j) {
            double* cj = T + static_cast<std::size_t>(j) * m;
            for (index_t k = 0; k < j; ++k) {
                const double* ck = T + static_cast<std::size_t>(k) * m;
                const double ljk = ck[j];
                for (index_t i = w; i < m; ++i) cj[i] -= ck[i] * ljk;
                trace_.flops += 2 * static_cast<std::size_t>(m - w);
            }
            for (index_t i = w; i < m; ++i) cj[i] /= cj[j];
            trace_.flops += static_cast<std::size_t>(m - w);
        }
    }

    void snode_scatter(const Block& blk) {
        const index_t m = ld(blk);
        for (index_t c = blk.start; c < blk.end(); ++c) {
            const double* src = temp_.data() + static_cast<std::size_t>(c - blk.start) * m;
            for (index_t p = P_->colptr[c]; p < P_->colptr[c + 1]; ++p) Lx_[p] = src[rowmap_[P_->rowind[p]]];
            trace_.bytes_moved += static_cast<std::size_t>(P_->colptr[c + 1] - P_->colptr[c]) * kDouble;
        }
    }

    const KernelIR& ir_;
    const SetTable& sets_;
    std::vector<std::pair<std::string, index_t>> env_;
    ExecTrace trace_;
    bool checked_ = false;
    const std::vector<index_t>* colptr_ = nullptr;

    const CscMatrix* L_ = nullptr;
    std::vector<double> x_;
    std::vector<double> diag_;

    const CscMatrix* A_ = nullptr;
    const SparsityPattern* P_ = nullptr;
    std::vector<double> Lx_;
    std::vector<double> f_;
    std::vector<index_t> rowmap_;

    std::vector<double> temp_;
};

}  // namespace

ExecResult execute(const KernelIR& ir, const SetTable& sets, const CscMatrix& matrix, std::span<const double> b,
                   const SparsityPattern* factor_pattern) {
    Machine m(ir, sets);
    if (ir.algorithm == Algorithm::TriangularSolve) return m.run_solve(matrix, b);
    if (factor_pattern == nullptr) throw ExecError("cholesky execution needs the factor pattern");
    return m.run_cholesky(matrix, *factor_pattern);
}

}  // namespace symspec
