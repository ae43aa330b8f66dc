#include "symspec/kir.hpp"

#include <algorithm>
#include <sstream>

namespace symspec::kir {

namespace {

// Fully unroll a fixed-trip loop at or below this many iterations; larger
// loops keep their form and get an Unroll hint.
constexpr index_t kMaxFullUnroll = 64;
constexpr index_t kPartialUnroll = 8;

Stmt stmt(StmtKind kind, std::vector<IndexExpr> operands, std::string blocks = {}) {
    return Stmt{kind, std::move(operands), std::move(blocks)};
}

Annotation annotate(Annotation::Kind kind, std::string set = {}, index_t value = 0) {
    return Annotation{kind, std::move(set), value};
}

bool has(const Loop& loop, Annotation::Kind kind) {
    return std::any_of(loop.annotations.begin(), loop.annotations.end(),
                       [&](const Annotation& a) { return a.kind == kind; });
}

const Annotation* find(const Loop& loop, Annotation::Kind kind) {
    for (const auto& a : loop.annotations) {
        if (a.kind == kind) return &a;
    }
    return nullptr;
}

void drop(Loop& loop, Annotation::Kind kind) {
    std::erase_if(loop.annotations, [&](const Annotation& a) { return a.kind == kind; });
}

std::vector<Node>* children(Node& node) {
    if (auto* l = std::get_if<Loop>(&node.v)) return &l->body;
    if (auto* s = std::get_if<Seq>(&node.v)) return &s->body;
    if (auto* p = std::get_if<Peeled>(&node.v)) return &p->body;
    return nullptr;
}

const std::vector<Node>* children(const Node& node) { return children(const_cast<Node&>(node)); }

Node& node_at(Node& root, const LoopPath& path) {
    Node* cur = &root;
    for (const std::size_t i : path) {
        auto* kids = children(*cur);
        if (kids == nullptr || i >= kids->size()) throw TransformError("loop path " + to_string(path) + " does not resolve");
        cur = &(*kids)[i];
    }
    return *cur;
}

Loop& loop_at(Node& root, const LoopPath& path) {
    auto* loop = std::get_if<Loop>(&node_at(root, path).v);
    if (loop == nullptr) throw TransformError("node at " + to_string(path) + " is not a loop");
    return *loop;
}

// Visits every index expression in a subtree.
template <class F>
void for_each_expr(Node& node, F&& f) {
    auto bound = [&](Bound& b) {
        if (b.kind == Bound::Kind::Index || b.kind == Bound::Kind::ColPtr) f(b.col);
    };
    if (auto* s = std::get_if<Stmt>(&node.v)) {
        for (auto& e : s->operands) f(e);
        return;
    }
    if (auto* l = std::get_if<Loop>(&node.v)) {
        bound(l->domain.lo);
        bound(l->domain.hi);
    }
    for (auto& child : *children(node)) for_each_expr(child, f);
}

void substitute_var(std::vector<Node>& body, const std::string& var, const IndexExpr& with) {
    for (auto& node : body) {
        for_each_expr(node, [&](IndexExpr& e) {
            if (e.kind == IndexExpr::Kind::Var && e.name == var) e = with;
        });
    }
}

bool is_column_loop(const Loop& loop) {
    return loop.domain.kind == Domain::Kind::Range && loop.domain.lo == Bound::constant(0) &&
           loop.domain.hi == Bound::order();
}

// Keyed loops iterate a per-column or per-block table; returns the key variable.
std::optional<std::string> loop_key(const Loop& loop) {
    const auto& d = loop.domain;
    if (d.kind == Domain::Kind::Range && d.lo == Bound::constant(0) && d.hi.kind == Bound::Kind::Index &&
        d.hi.value == 0) {
        if (d.hi.col.kind != IndexExpr::Kind::Var) return std::nullopt;
        return d.hi.col.name;
    }
    if (d.kind == Domain::Kind::BlockRef && d.part == BlockPart::OffDiagonal) return d.key;
    return std::nullopt;
}

}  // namespace

std::string to_string(const LoopPath& path) {
    std::string out = "root";
    for (const std::size_t i : path) out += "." + std::to_string(i);
    return out;
}

void Thresholds::validate() const {
    if (peel_colcount < 0 || min_avg_supernode < 0 || colcount_dense_switch < 0) {
        throw ArgumentError("thresholds must be non-negative");
    }
}

KernelIR build_triangular_ir(index_t n) {
    if (n < 1) throw ArgumentError("kernel order must be at least 1");
    const auto j = IndexExpr::var("j");
    Loop inner{"p",
               Domain::range(Bound::colptr(j, 0, 1), Bound::colptr(j, 1, 0)),
               {stmt(StmtKind::SubMul, {j, IndexExpr::var("p")})},
               {}};
    Loop outer{"j",
               Domain::range(Bound::constant(0), Bound::order()),
               {stmt(StmtKind::Div, {j}), std::move(inner)},
               {annotate(Annotation::Kind::Prunable, kReachSet), annotate(Annotation::Kind::Blockable, kSupernodes)}};
    return KernelIR{Algorithm::TriangularSolve, n, std::move(outer)};
}

KernelIR build_cholesky_ir(index_t n) {
    if (n < 1) throw ArgumentError("kernel order must be at least 1");
    const auto j = IndexExpr::var("j");
    Loop update{"k",
                Domain::range(Bound::constant(0), Bound::index(j)),
                {stmt(StmtKind::SubMul, {j, IndexExpr::var("k")})},
                {annotate(Annotation::Kind::Prunable, kRowPattern)}};
    Loop outer{"j",
               Domain::range(Bound::constant(0), Bound::order()),
               {stmt(StmtKind::Gather, {j}), std::move(update), stmt(StmtKind::Sqrt, {j}), stmt(StmtKind::Div, {j})},
               {annotate(Annotation::Kind::Blockable, kSupernodes)}};
    return KernelIR{Algorithm::Cholesky, n, std::move(outer)};
}

const Loop& loop_at(const KernelIR& ir, const LoopPath& path) {
    return loop_at(const_cast<Node&>(ir.root), path);
}

std::optional<LoopPath> find_annotated(const KernelIR& ir, Annotation::Kind kind) {
    std::optional<LoopPath> found;
    LoopPath path;
    auto visit = [&](auto&& self, const Node& node) -> void {
        if (found) return;
        if (const auto* l = std::get_if<Loop>(&node.v); l && has(*l, kind)) {
            found = path;
            return;
        }
        if (const auto* kids = children(node)) {
            for (std::size_t i = 0; i < kids->size(); ++i) {
                path.push_back(i);
                self(self, (*kids)[i]);
                path.pop_back();
            }
        }
    };
    visit(visit, ir.root);
    return found;
}

KernelIR vi_prune(const KernelIR& ir, const LoopPath& path, const std::string& set_name, const InspectionSet& set,
                  const Thresholds& thresholds) {
    thresholds.validate();
    KernelIR out = ir;
    Loop& loop = loop_at(out.root, path);
    const Annotation* prunable = find(loop, Annotation::Kind::Prunable);
    if (prunable == nullptr) throw TransformError("loop " + to_string(path) + " is not annotated prunable");
    if (prunable->set != set_name) {
        throw TransformError("loop " + to_string(path) + " is prunable by '" + prunable->set + "', not '" + set_name + "'");
    }

    const bool column_loop = is_column_loop(loop);
    const auto key = loop_key(loop);
    const bool flat = column_loop || (loop.domain.kind == Domain::Kind::BlockRef && loop.domain.part == BlockPart::Diagonal);
    if (!flat && !key) throw TransformError("loop " + to_string(path) + " has an iteration space VI-Prune cannot replace");
    const SetTag expected = flat ? SetTag::PruneSet : SetTag::RowPatterns;
    if (set.tag != expected) {
        throw TransformError(std::string("set '") + set_name + "' has tag " + to_string(set.tag) + ", loop needs " +
                             to_string(expected));
    }

    const std::string old_index = loop.index;
    const std::string pos = old_index + "p";
    const std::string key_var = key.value_or(std::string{});
    substitute_var(loop.body, old_index, IndexExpr::set_elem(set_name, pos, key_var));
    loop.index = pos;
    loop.domain = Domain::set_ref(set_name, key_var);
    drop(loop, Annotation::Kind::Prunable);
    drop(loop, Annotation::Kind::Blockable);

    // Enabled low-level hints: the pruned column loop of the triangular solve
    // can be peeled by column count and its inner update loops vectorized.
    if (out.algorithm == Algorithm::TriangularSolve && column_loop) {
        if (thresholds.peel_colcount != Thresholds::kInfinite) {
            loop.annotations.push_back(annotate(Annotation::Kind::Peel, {}, thresholds.peel_colcount));
        }
        for (auto& child : loop.body) {
            if (auto* inner = std::get_if<Loop>(&child.v); inner && !has(*inner, Annotation::Kind::VecHint)) {
                inner->annotations.push_back(annotate(Annotation::Kind::VecHint));
            }
        }
    }
    return out;
}

KernelIR vs_block(const KernelIR& ir, const LoopPath& path, const std::string& set_name, const InspectionSet& set) {
    KernelIR out = ir;
    Node& node = node_at(out.root, path);
    auto* loop = std::get_if<Loop>(&node.v);
    if (loop == nullptr) throw TransformError("node at " + to_string(path) + " is not a loop");
    const Annotation* blockable = find(*loop, Annotation::Kind::Blockable);
    if (blockable == nullptr) throw TransformError("loop " + to_string(path) + " is not annotated blockable");
    if (blockable->set != set_name) {
        throw TransformError("loop " + to_string(path) + " is blockable by '" + blockable->set + "', not '" + set_name + "'");
    }
    if (set.tag != SetTag::BlockSet) {
        throw TransformError(std::string("set '") + set_name + "' has tag " + to_string(set.tag) + ", loop needs BlockSet");
    }
    if (!is_column_loop(*loop)) throw TransformError("VS-Block applies to the full column loop only");
    try {
        check_partition(set.block_set(), out.n);
    } catch (const ArgumentError& e) {
        throw TransformError(std::string("block set is not a partition: ") + e.what());
    }

    if (out.algorithm == Algorithm::TriangularSolve) {
        const auto b = IndexExpr::var("b");
        node = Loop{"b",
                    Domain::block_ref(set_name, BlockPart::Diagonal),
                    {stmt(StmtKind::DenseTriSolve, {b}, set_name), stmt(StmtKind::Gather, {b}, set_name),
                     stmt(StmtKind::BlockUpdate, {b}, set_name), stmt(StmtKind::Scatter, {b}, set_name)},
                    {annotate(Annotation::Kind::Prunable, kReachBlocks)}};
    } else {
        const auto s = IndexExpr::var("s");
        Loop update{"t",
                    Domain::block_ref(set_name, BlockPart::OffDiagonal, "s"),
                    {stmt(StmtKind::BlockUpdate, {s, IndexExpr::var("t")}, set_name)},
                    {annotate(Annotation::Kind::Prunable, kBlockRowPattern)}};
        node = Loop{"s",
                    Domain::block_ref(set_name, BlockPart::Diagonal),
                    {stmt(StmtKind::Gather, {s}, set_name), std::move(update), stmt(StmtKind::DenseCholesky, {s}, set_name),
                     stmt(StmtKind::DenseTriSolve, {s}, set_name), stmt(StmtKind::Scatter, {s}, set_name)},
                    {}};
    }
    return out;
}

namespace {

struct LowLevel {
    const Thresholds& config;
    const SetTable& sets;
    const SparsityPattern& pattern;
    index_t n;

    std::optional<index_t> eval(const Bound& b) const {
        switch (b.kind) {
            case Bound::Kind::Const: return b.value;
            case Bound::Kind::Order: return n;
            case Bound::Kind::Index:
                if (b.col.kind != IndexExpr::Kind::Const) return std::nullopt;
                return b.col.value + b.value;
            case Bound::Kind::ColPtr: {
                if (b.col.kind != IndexExpr::Kind::Const) return std::nullopt;
                const index_t c = b.col.value + b.shift;
                if (c < 0 || c > pattern.n) throw TransformError("column pointer index outside pattern");
                return pattern.colptr[c] + b.value;
            }
        }
        return std::nullopt;
    }

    // Expands loops whose bounds became constants after peeling.
    std::vector<Node> unroll_fixed(std::vector<Node> body) const {
        std::vector<Node> out;
        for (auto& node : body) {
            if (auto* l = std::get_if<Loop>(&node.v); l && l->domain.kind == Domain::Kind::Range) {
                const auto lo = eval(l->domain.lo), hi = eval(l->domain.hi);
                if (lo && hi) {
                    if (*hi - *lo <= kMaxFullUnroll) {
                        for (index_t v = *lo; v < *hi; ++v) {
                            auto copy = l->body;
                            substitute_var(copy, l->index, IndexExpr::constant(v));
                            for (auto& c : unroll_fixed(std::move(copy))) out.push_back(std::move(c));
                        }
                        continue;
                    }
                    l->domain.lo = Bound::constant(*lo);
                    l->domain.hi = Bound::constant(*hi);
                    if (!has(*l, Annotation::Kind::Unroll)) {
                        l->annotations.push_back(annotate(Annotation::Kind::Unroll, {}, kPartialUnroll));
                    }
                }
            }
            out.push_back(std::move(node));
        }
        return out;
    }

    Node peel(const Loop& loop) const {
        const auto it = sets.find(loop.domain.set);
        if (it == sets.end()) throw TransformError("peel: set '" + loop.domain.set + "' not bound");
        if (it->second.tag != SetTag::PruneSet) throw TransformError("peel: set '" + loop.domain.set + "' is not a prune set");
        const auto& order = it->second.prune_set().order;
        const index_t size = static_cast<index_t>(order.size());
        const index_t lo = loop.domain.slice_lo;
        const index_t hi = loop.domain.slice_hi < 0 ? size : loop.domain.slice_hi;

        std::vector<index_t> peeled;
        for (index_t p = lo; p < hi; ++p) {
            const index_t col = order[p];
            if (col < 0 || col >= pattern.n) throw TransformError("peel: set element outside pattern");
            if (config.peel_colcount != Thresholds::kInfinite && pattern.col_count(col) > config.peel_colcount) {
                peeled.push_back(p);
            }
        }
        if (peeled.empty()) return loop;

        Seq seq;
        auto residual = [&](index_t a, index_t b) {
            if (a >= b) return;
            Loop r = loop;
            drop(r, Annotation::Kind::Peel);
            r.domain.slice_lo = a;
            r.domain.slice_hi = b;
            seq.body.emplace_back(std::move(r));
        };
        index_t cursor = lo;
        for (const index_t p : peeled) {
            residual(cursor, p);
            std::vector<Node> body = loop.body;
            for (auto& node : body) {
                for_each_expr(node, [&](IndexExpr& e) {
                    if (e.kind == IndexExpr::Kind::SetElem && e.name == loop.domain.set && e.pos == loop.index &&
                        e.key.empty()) {
                        e = IndexExpr::constant(order[p]);
                    } else if (e.kind == IndexExpr::Kind::Var && e.name == loop.index) {
                        e = IndexExpr::constant(p);
                    }
                });
            }
            seq.body.emplace_back(Peeled{loop.domain.set, p, order[p], unroll_fixed(std::move(body))});
            cursor = p + 1;
        }
        residual(cursor, hi);
        return seq;
    }

    void apply(Node& node) const {
        if (auto* l = std::get_if<Loop>(&node.v)) {
            if (has(*l, Annotation::Kind::Peel)) {
                if (l->domain.kind != Domain::Kind::SetRef || !l->domain.key.empty()) {
                    throw TransformError("peel annotation on a loop that does not iterate a flat set");
                }
                node = peel(*l);
                return;
            }
        }
        if (auto* kids = children(node)) {
            for (auto& child : *kids) apply(child);
        }
    }
};

}  // namespace

KernelIR apply_lowlevel(const KernelIR& ir, const Thresholds& config, const SetTable& sets,
                        const SparsityPattern& pattern) {
    config.validate();
    if (pattern.n != ir.n) throw TransformError("pattern order does not match kernel order");
    KernelIR out = ir;
    LowLevel{config, sets, pattern, ir.n}.apply(out.root);
    return out;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

const char* stmt_name(StmtKind k) {
    switch (k) {
        case StmtKind::Div: return "Div";
        case StmtKind::SubMul: return "SubMul";
        case StmtKind::Sqrt: return "Sqrt";
        case StmtKind::DenseTriSolve: return "DenseTriSolve";
        case StmtKind::DenseCholesky: return "DenseCholesky";
        case StmtKind::BlockUpdate: return "BlockUpdate";
        case StmtKind::Gather: return "Gather";
        case StmtKind::Scatter: return "Scatter";
    }
    return "?";
}

std::string expr(const IndexExpr& e) {
    switch (e.kind) {
        case IndexExpr::Kind::Var: return e.name;
        case IndexExpr::Kind::Const: return std::to_string(e.value);
        case IndexExpr::Kind::SetElem:
            return e.name + (e.key.empty() ? "" : "[" + e.key + "]") + "[" + e.pos + "]";
    }
    return "?";
}

std::string bound(const Bound& b) {
    auto plus = [](index_t v) { return v == 0 ? std::string{} : (v > 0 ? "+" : "") + std::to_string(v); };
    switch (b.kind) {
        case Bound::Kind::Const: return std::to_string(b.value);
        case Bound::Kind::Order: return "n";
        case Bound::Kind::Index: return expr(b.col) + plus(b.value);
        case Bound::Kind::ColPtr: return "Lp[" + expr(b.col) + plus(b.shift) + "]" + plus(b.value);
    }
    return "?";
}

std::string domain(const Domain& d) {
    switch (d.kind) {
        case Domain::Kind::Range: return "[" + bound(d.lo) + ", " + bound(d.hi) + ")";
        case Domain::Kind::SetRef: {
            std::string s = d.set + (d.key.empty() ? "" : "[" + d.key + "]");
            if (d.slice_lo != 0 || d.slice_hi >= 0) {
                s += "[" + std::to_string(d.slice_lo) + ":" + (d.slice_hi < 0 ? "" : std::to_string(d.slice_hi)) + "]";
            }
            return s;
        }
        case Domain::Kind::BlockRef:
            return d.part == BlockPart::Diagonal ? "blocks(" + d.set + ")" : "blocks(" + d.set + ") left of " + d.key;
    }
    return "?";
}

std::string annotation(const Annotation& a) {
    switch (a.kind) {
        case Annotation::Kind::Prunable: return "@prunable(" + a.set + ")";
        case Annotation::Kind::Blockable: return "@blockable(" + a.set + ")";
        case Annotation::Kind::Peel: return "@peel(colcount>" + std::to_string(a.value) + ")";
        case Annotation::Kind::Unroll: return "@unroll(" + std::to_string(a.value) + ")";
        case Annotation::Kind::VecHint: return "@vectorize";
        case Annotation::Kind::Distribute: return "@distribute";
    }
    return "?";
}

void print_node(std::ostringstream& os, const Node& node, int depth) {
    const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
    if (const auto* s = std::get_if<Stmt>(&node.v)) {
        os << pad << stmt_name(s->kind) << (s->blocks.empty() ? "" : "[" + s->blocks + "]") << "(";
        for (std::size_t i = 0; i < s->operands.size(); ++i) os << (i ? ", " : "") << expr(s->operands[i]);
        os << ")\n";
        return;
    }
    if (const auto* l = std::get_if<Loop>(&node.v)) {
        os << pad << "for " << l->index << " in " << domain(l->domain);
        for (const auto& a : l->annotations) os << " " << annotation(a);
        os << "\n";
        for (const auto& c : l->body) print_node(os, c, depth + 1);
        return;
    }
    if (const auto* s = std::get_if<Seq>(&node.v)) {
        os << pad << "seq\n";
        for (const auto& c : s->body) print_node(os, c, depth + 1);
        return;
    }
    const auto& p = std::get<Peeled>(node.v);
    os << pad << "peeled " << p.set << "[" << p.position << "] = " << p.element << "\n";
    for (const auto& c : p.body) print_node(os, c, depth + 1);
}

}  // namespace

std::string print(const KernelIR& ir) {
    std::ostringstream os;
    os << "kernel " << symspec::to_string(ir.algorithm) << " n=" << ir.n << "\n";
    print_node(os, ir.root, 0);
    return os.str();
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash(const KernelIR& ir) { return fnv1a(print(ir)); }

}  // namespace symspec::kir
