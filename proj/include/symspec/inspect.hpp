#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "symspec/matio.hpp"

namespace symspec {

/// Parent array of the elimination forest; parent[j] is kNone or > j.
struct EliminationTree {
    std::vector<index_t> parent;

    index_t size() const { return static_cast<index_t>(parent.size()); }
    bool operator==(const EliminationTree&) const = default;
};

/// Columns reachable from the rhs pattern, in topological order of the
/// dependence graph (edge j -> i iff L(i,j) != 0, i > j).
struct ReachSet {
    std::vector<index_t> order;

    bool operator==(const ReachSet&) const = default;
};

struct Block {
    index_t start = 0;
    index_t width = 1;

    index_t end() const { return start + width; }
    bool operator==(const Block&) const = default;
};

/// Contiguous column partition. For Cholesky supernodes `row_patterns[b]` is the
/// sorted row set of the block, beginning with the block's own columns.
struct BlockSet {
    std::vector<Block> blocks;
    std::optional<std::vector<std::vector<index_t>>> row_patterns;

    bool operator==(const BlockSet&) const = default;
};

/// rows[i] lists the columns j < i with L(i,j) != 0, ascending.
struct RowPatternTable {
    std::vector<std::vector<index_t>> rows;

    bool operator==(const RowPatternTable&) const = default;
};

enum class Algorithm { TriangularSolve, Cholesky };
enum class Transformation { VIPrune, VSBlock };
enum class SetTag { PruneSet, BlockSet, RowPatterns };

struct InspectionSet {
    SetTag tag = SetTag::PruneSet;
    std::variant<ReachSet, BlockSet, RowPatternTable> payload;
    Algorithm algorithm = Algorithm::TriangularSolve;
    Transformation transformation = Transformation::VIPrune;

    const ReachSet& prune_set() const { return std::get<ReachSet>(payload); }
    const BlockSet& block_set() const { return std::get<BlockSet>(payload); }
    const RowPatternTable& row_patterns() const { return std::get<RowPatternTable>(payload); }

    bool operator==(const InspectionSet&) const = default;
};

/// Work counters for the inspectors (edges examined, tree steps taken).
struct InspectStats {
    std::size_t visits = 0;
};

const char* to_string(Algorithm a);
const char* to_string(Transformation t);
const char* to_string(SetTag t);

ReachSet reach_set(const SparsityPattern& L, const RhsPattern& beta, InspectStats* stats = nullptr);

BlockSet node_equivalence_supernodes(const SparsityPattern& L);

EliminationTree etree(const SparsityPattern& A, InspectStats* stats = nullptr);

RowPatternTable row_patterns(const SparsityPattern& A, const EliminationTree& t, InspectStats* stats = nullptr);

/// Unoptimized variant: every up-traversal runs to row i, marks only dedupe.
RowPatternTable row_patterns_unmarked(const SparsityPattern& A, const EliminationTree& t);

/// Column patterns of L by the children-union rule, allowing L to be allocated up front.
SparsityPattern col_patterns(const SparsityPattern& A, const EliminationTree& t, InspectStats* stats = nullptr);

BlockSet cholesky_supernodes(const SparsityPattern& Lpat, const EliminationTree& t);

std::vector<index_t> column_counts(const SparsityPattern& p);

/// Mean width of the blocks wider than one column; 0 when there are none.
double average_supernode_width(const BlockSet& blocks);

/// Throws ArgumentError unless the blocks partition {0..n-1} in order.
void check_partition(const BlockSet& blocks, index_t n);

/// Indices of blocks that contain at least one column of `reach`, ascending.
std::vector<index_t> blocks_touched(const ReachSet& reach, const BlockSet& blocks);

/// For each block s, the blocks t < s holding a column k with L(j,k) != 0 for some j in s.
RowPatternTable block_row_patterns(const RowPatternTable& rows, const BlockSet& blocks);

struct InspectorInputs {
    const SparsityPattern* pattern = nullptr;  // L for triangular solve, A for Cholesky
    const RhsPattern* rhs = nullptr;           // triangular VI-Prune only
};

/// Dispatches (algorithm, transformation) to its inspection graph and strategy.
InspectionSet inspector_registry(Algorithm algorithm, Transformation transformation, const InspectorInputs& inputs,
                                 InspectStats* stats = nullptr);

}  // namespace symspec
