#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "symspec/inspect.hpp"

namespace symspec::kir {

// ---------------------------------------------------------------------------
// Index expressions and bounds
// ---------------------------------------------------------------------------

/// A loop variable, a constant, or an element of a named inspection set.
/// SetElem reads set[pos] for flat sets, or set[key][pos] for keyed tables
/// (row patterns indexed by column or block).
struct IndexExpr {
    enum class Kind { Var, Const, SetElem };
    Kind kind = Kind::Const;
    std::string name;  // variable name, or set name for SetElem
    std::string pos;   // position variable (SetElem)
    std::string key;   // key variable for keyed tables, empty otherwise
    index_t value = 0;

    static IndexExpr var(std::string n) { return {Kind::Var, std::move(n), {}, {}, 0}; }
    static IndexExpr constant(index_t v) { return {Kind::Const, {}, {}, {}, v}; }
    static IndexExpr set_elem(std::string set, std::string pos, std::string key = {}) {
        return {Kind::SetElem, std::move(set), std::move(pos), std::move(key), 0};
    }
    bool operator==(const IndexExpr&) const = default;
};

/// Loop bound: a constant, the matrix order, an index expression plus a
/// constant, or a column-pointer read colptr[col + shift] + add.
struct Bound {
    enum class Kind { Const, Order, Index, ColPtr };
    Kind kind = Kind::Const;
    index_t value = 0;  // Const value, or `add` for ColPtr
    IndexExpr col;
    index_t shift = 0;

    static Bound constant(index_t v) { return {Kind::Const, v, {}, 0}; }
    static Bound order() { return {Kind::Order, 0, {}, 0}; }
    static Bound index(IndexExpr e, index_t add = 0) { return {Kind::Index, add, std::move(e), 0}; }
    static Bound colptr(IndexExpr c, index_t shift, index_t add) { return {Kind::ColPtr, add, std::move(c), shift}; }
    bool operator==(const Bound&) const = default;
};

enum class BlockPart { Diagonal, OffDiagonal };

/// Range [lo, hi); SetRef over positions [slice_lo, slice_hi) of a set (or of
/// set[key]); BlockRef over all blocks (Diagonal) or over blocks left of `key`
/// (OffDiagonal).
struct Domain {
    enum class Kind { Range, SetRef, BlockRef };
    Kind kind = Kind::Range;
    Bound lo;
    Bound hi;
    std::string set;
    std::string key;
    index_t slice_lo = 0;
    index_t slice_hi = -1;  // -1: to the end of the set
    BlockPart part = BlockPart::Diagonal;

    static Domain range(Bound lo, Bound hi) { return {Kind::Range, std::move(lo), std::move(hi), {}, {}, 0, -1, {}}; }
    static Domain set_ref(std::string set, std::string key = {}) {
        return {Kind::SetRef, {}, {}, std::move(set), std::move(key), 0, -1, {}};
    }
    static Domain block_ref(std::string set, BlockPart part, std::string key = {}) {
        return {Kind::BlockRef, {}, {}, std::move(set), std::move(key), 0, -1, part};
    }
    bool operator==(const Domain&) const = default;
};

struct Annotation {
    enum class Kind { Prunable, Blockable, Peel, Unroll, VecHint, Distribute };
    Kind kind = Kind::VecHint;
    std::string set;    // Prunable / Blockable
    index_t value = 0;  // Peel threshold, Unroll factor

    bool operator==(const Annotation&) const = default;
};

// ---------------------------------------------------------------------------
// Nodes
// ---------------------------------------------------------------------------

/// Statement kinds. Operand meaning depends on the kernel's algorithm:
///
/// triangular solve
///   Div(c)              x[c] /= L(c,c)
///   SubMul(c, p)        x[Li[p]] -= Lx[p] * x[c]
///   DenseTriSolve(b)    dense forward solve on block b's diagonal segment
///   Gather(b)           temp = x[rows below block b]
///   BlockUpdate(b)      temp -= L(rows below b, b) * x[b]
///   Scatter(b)          x[rows below block b] = temp
/// cholesky
///   Gather(j)           f = A(:, j) on the pattern of L(:, j)
///   SubMul(j, k)        f[i] -= L(i,k) * L(j,k) for i >= j
///   Sqrt(j)             L(j,j) = sqrt(f[j])
///   Div(j)              L(i,j) = f[i] / L(j,j)
///   Gather(s)           temp block = A on supernode s
///   BlockUpdate(s, t)   temp block -= contributions of supernode t
///   DenseCholesky(s)    factor the diagonal segment of temp
///   DenseTriSolve(s)    off-diagonal rows of temp times L_diag^-T
///   Scatter(s)          temp block -> L
enum class StmtKind { Div, SubMul, Sqrt, DenseTriSolve, DenseCholesky, BlockUpdate, Gather, Scatter };

struct Node;

struct Stmt {
    StmtKind kind = StmtKind::Div;
    std::vector<IndexExpr> operands;
    std::string blocks;  // block set indexed by block operands; empty for column statements
    bool operator==(const Stmt&) const = default;
};

struct Loop {
    std::string index;
    Domain domain;
    std::vector<Node> body;
    std::vector<Annotation> annotations;
    bool operator==(const Loop&) const;
};

struct Seq {
    std::vector<Node> body;
    bool operator==(const Seq&) const;
};

/// One iteration of a SetRef loop lifted out as straight-line code. The
/// body has the loop's position variable folded to a constant.
struct Peeled {
    std::string set;
    index_t position = 0;
    index_t element = 0;
    std::vector<Node> body;
    bool operator==(const Peeled&) const;
};

struct Node {
    std::variant<Loop, Stmt, Seq, Peeled> v;

    Node(Loop l) : v(std::move(l)) {}
    Node(Stmt s) : v(std::move(s)) {}
    Node(Seq s) : v(std::move(s)) {}
    Node(Peeled p) : v(std::move(p)) {}
    bool operator==(const Node&) const = default;
};

inline bool Loop::operator==(const Loop& o) const {
    return index == o.index && domain == o.domain && body == o.body && annotations == o.annotations;
}
inline bool Seq::operator==(const Seq& o) const { return body == o.body; }
inline bool Peeled::operator==(const Peeled& o) const {
    return set == o.set && position == o.position && element == o.element && body == o.body;
}

struct KernelIR {
    Algorithm algorithm = Algorithm::TriangularSolve;
    index_t n = 0;
    Node root = Seq{};
    bool operator==(const KernelIR&) const = default;
};

/// Path of body indices from the root; empty addresses the root.
using LoopPath = std::vector<std::size_t>;

std::string to_string(const LoopPath& path);

/// Named inspection sets available to a kernel.
using SetTable = std::map<std::string, InspectionSet>;

struct Thresholds {
    static constexpr index_t kInfinite = std::numeric_limits<index_t>::max();

    index_t peel_colcount = 2;
    index_t min_avg_supernode = 160;
    index_t colcount_dense_switch = 0;  // 0: disabled

    void validate() const;
};

// Canonical set names used by the builders and the driver.
inline constexpr const char* kReachSet = "reachSet";
inline constexpr const char* kReachBlocks = "reachBlocks";
inline constexpr const char* kSupernodes = "supernodes";
inline constexpr const char* kRowPattern = "rowPattern";
inline constexpr const char* kBlockRowPattern = "blockRowPattern";

// ---------------------------------------------------------------------------
// Builders and passes
// ---------------------------------------------------------------------------

KernelIR build_triangular_ir(index_t n);
KernelIR build_cholesky_ir(index_t n);

const Loop& loop_at(const KernelIR& ir, const LoopPath& path);

/// First loop (pre-order) carrying an annotation of `kind`, if any.
std::optional<LoopPath> find_annotated(const KernelIR& ir, Annotation::Kind kind);

/// Replaces the loop's iteration space by the named prune set and rewrites
/// every use of its index as set[position].
KernelIR vi_prune(const KernelIR& ir, const LoopPath& loop, const std::string& set_name, const InspectionSet& set,
                  const Thresholds& thresholds = {});

/// Rewrites the column loop into a loop over variable-sized blocks with dense sub-kernels.
KernelIR vs_block(const KernelIR& ir, const LoopPath& loop, const std::string& set_name, const InspectionSet& set);

/// Applies annotated low-level transformations: peels set iterations whose
/// column count exceeds the threshold and unrolls the resulting fixed-trip loops.
KernelIR apply_lowlevel(const KernelIR& ir, const Thresholds& config, const SetTable& sets,
                        const SparsityPattern& pattern);

/// Deterministic rendering used for golden tests and hashing.
std::string print(const KernelIR& ir);

std::uint64_t fnv1a(std::string_view text);
std::uint64_t hash(const KernelIR& ir);

}  // namespace symspec::kir
