#include "symspec/inspect.hpp"

#include <algorithm>
#include <numeric>

namespace symspec {

const char* to_string(Algorithm a) {
    return a == Algorithm::TriangularSolve ? "TriangularSolve" : "Cholesky";
}

const char* to_string(Transformation t) { return t == Transformation::VIPrune ? "VIPrune" : "VSBlock"; }

const char* to_string(SetTag t) {
    switch (t) {
        case SetTag::PruneSet: return "PruneSet";
        case SetTag::BlockSet: return "BlockSet";
        case SetTag::RowPatterns: return "RowPatterns";
    }
    return "?";
}

namespace {

void require_valid(const SparsityPattern& p, const char* what) {
    const auto v = validate(p);
    if (!v.empty()) throw ArgumentError(std::string(what) + ": " + v.front());
}

void require_lower_with_diagonal(const SparsityPattern& L) {
    require_valid(L, "triangular pattern");
    for (index_t j = 0; j < L.n; ++j) {
        const auto c = L.col(j);
        if (c.empty() || c.front() != j) {
            throw ArgumentError("triangular pattern lacks diagonal or is not lower at column " + std::to_string(j));
        }
    }
}

void require_lower_stored(const SparsityPattern& A) {
    require_valid(A, "symmetric pattern");
    for (index_t j = 0; j < A.n; ++j) {
        const auto c = A.col(j);
        if (!c.empty() && c.front() < j) {
            throw ArgumentError("upper-triangular entry in column " + std::to_string(j) +
                                " of a lower-stored symmetric pattern");
        }
    }
}

void require_tree(const EliminationTree& t, index_t n) {
    if (t.size() != n) {
        throw ArgumentError("elimination tree has " + std::to_string(t.size()) + " nodes, matrix order is " +
                            std::to_string(n));
    }
    for (index_t j = 0; j < n; ++j) {
        if (t.parent[j] != kNone && (t.parent[j] <= j || t.parent[j] >= n)) {
            throw ArgumentError("invalid parent for node " + std::to_string(j));
        }
    }
}

}  // namespace

ReachSet reach_set(const SparsityPattern& L, const RhsPattern& beta, InspectStats* stats) {
    require_lower_with_diagonal(L);
    check_rhs_pattern(beta, L.n);

    std::vector<char> marked(static_cast<std::size_t>(L.n), 0);
    std::vector<index_t> postorder;
    // Explicit stack of (node, next child position) keeps deep chains off the call stack.
    std::vector<std::pair<index_t, index_t>> stack;
    std::size_t visits = 0;

    for (const index_t root : beta.indices) {
        ++visits;
        if (marked[root]) continue;
        marked[root] = 1;
        stack.emplace_back(root, L.colptr[root]);
        while (!stack.empty()) {
            auto& [node, pos] = stack.back();
            const index_t end = L.colptr[node + 1];
            bool descended = false;
            while (pos < end) {
                const index_t child = L.rowind[pos++];
                if (child == node) continue;
                ++visits;
                if (!marked[child]) {
                    marked[child] = 1;
                    stack.emplace_back(child, L.colptr[child]);
                    descended = true;
                    break;
                }
            }
            if (!descended) {
                postorder.push_back(node);
                stack.pop_back();
            }
        }
    }
    if (stats) stats->visits += visits;
    return ReachSet{{postorder.rbegin(), postorder.rend()}};
}

BlockSet node_equivalence_supernodes(const SparsityPattern& L) {
    require_lower_with_diagonal(L);
    BlockSet out;
    if (L.n == 0) return out;
    out.blocks.push_back({0, 1});
    for (index_t j = 1; j < L.n; ++j) {
        // Outgoing edges of j-1 and j, diagonals excluded.
        auto prev = L.col(j - 1).subspan(1);
        const auto cur = L.col(j).subspan(1);
        const bool links = !prev.empty() && prev.front() == j;
        if (links) prev = prev.subspan(1);
        const bool same = std::equal(prev.begin(), prev.end(), cur.begin(), cur.end());
        if (same && (links || !cur.empty())) {
            ++out.blocks.back().width;
        } else {
            out.blocks.push_back({j, 1});
        }
    }
    return out;
}

EliminationTree etree(const SparsityPattern& A, InspectStats* stats) {
    require_lower_stored(A);
    const SparsityPattern rows = transpose(A);  // rows.col(k) = columns j <= k of row k
    EliminationTree t;
    t.parent.assign(static_cast<std::size_t>(A.n), kNone);
    std::vector<index_t> ancestor(static_cast<std::size_t>(A.n), kNone);
    std::size_t visits = 0;
    for (index_t k = 0; k < A.n; ++k) {
        for (index_t i : rows.col(k)) {
            ++visits;
            // Walk from i toward the root, compressing the path onto k.
            while (i != kNone && i < k) {
                ++visits;
                const index_t next = ancestor[i];
                ancestor[i] = k;
                if (next == kNone) t.parent[i] = k;
                i = next;
            }
        }
    }
    if (stats) stats->visits += visits;
    return t;
}

RowPatternTable row_patterns(const SparsityPattern& A, const EliminationTree& t, InspectStats* stats) {
    require_lower_stored(A);
    require_tree(t, A.n);
    const SparsityPattern rows = transpose(A);
    RowPatternTable out;
    out.rows.resize(static_cast<std::size_t>(A.n));
    std::vector<index_t> mark(static_cast<std::size_t>(A.n), kNone);
    std::size_t visits = 0;
    for (index_t k = 0; k < A.n; ++k) {
        mark[k] = k;
        auto& row = out.rows[k];
        for (index_t i : rows.col(k)) {
            ++visits;
            for (; mark[i] != k; i = t.parent[i]) {
                ++visits;
                mark[i] = k;
                row.push_back(i);
            }
        }
        std::sort(row.begin(), row.end());
    }
    if (stats) stats->visits += visits;
    return out;
}

RowPatternTable row_patterns_unmarked(const SparsityPattern& A, const EliminationTree& t) {
    require_lower_stored(A);
    require_tree(t, A.n);
    RowPatternTable out;
    out.rows.resize(static_cast<std::size_t>(A.n));
    std::vector<char> in_row(static_cast<std::size_t>(A.n), 0);
    const SparsityPattern rows = transpose(A);
    for (index_t i = 0; i < A.n; ++i) {
        auto& row = out.rows[i];
        for (const index_t j : rows.col(i)) {
            if (j == i) continue;
            for (index_t k = j; k != i; k = t.parent[k]) {
                if (k == kNone) throw ArgumentError("row " + std::to_string(i) + " not reachable in etree");
                if (!in_row[k]) {
                    in_row[k] = 1;
                    row.push_back(k);
                }
            }
        }
        for (const index_t k : row) in_row[k] = 0;
        std::sort(row.begin(), row.end());
    }
    return out;
}

SparsityPattern col_patterns(const SparsityPattern& A, const EliminationTree& t, InspectStats* stats) {
    require_lower_stored(A);
    require_tree(t, A.n);
    const index_t n = A.n;

    // Children lists in ascending order.
    std::vector<index_t> head(static_cast<std::size_t>(n), kNone), next(static_cast<std::size_t>(n), kNone);
    for (index_t j = n - 1; j >= 0; --j) {
        if (t.parent[j] != kNone) {
            next[j] = head[t.parent[j]];
            head[t.parent[j]] = j;
        }
    }

    SparsityPattern L;
    L.n = n;
    L.colptr.assign(static_cast<std::size_t>(n) + 1, 0);
    std::vector<std::vector<index_t>> cols(static_cast<std::size_t>(n));
    std::vector<index_t> mark(static_cast<std::size_t>(n), kNone);
    std::size_t visits = 0;
    for (index_t j = 0; j < n; ++j) {
        auto& c = cols[j];
        auto add = [&](index_t i) {
            ++visits;
            if (mark[i] != j) {
                mark[i] = j;
                c.push_back(i);
            }
        };
        add(j);
        for (const index_t i : A.col(j)) add(i);
        for (index_t s = head[j]; s != kNone; s = next[s]) {
            for (const index_t i : cols[s]) {
                if (i != s) add(i);
            }
        }
        std::sort(c.begin(), c.end());
        L.colptr[j + 1] = L.colptr[j] + static_cast<index_t>(c.size());
    }
    L.rowind.reserve(static_cast<std::size_t>(L.colptr[n]));
    for (const auto& c : cols) L.rowind.insert(L.rowind.end(), c.begin(), c.end());
    if (stats) stats->visits += visits;
    return L;
}

BlockSet cholesky_supernodes(const SparsityPattern& Lpat, const EliminationTree& t) {
    require_lower_with_diagonal(Lpat);
    require_tree(t, Lpat.n);
    const index_t n = Lpat.n;
    std::vector<index_t> children(static_cast<std::size_t>(n), 0);
    for (index_t j = 0; j < n; ++j) {
        if (t.parent[j] != kNone) ++children[t.parent[j]];
    }

    BlockSet out;
    std::vector<std::vector<index_t>> patterns;
    for (index_t j = 0; j < n; ++j) {
        const bool merge = j > 0 && t.parent[j - 1] == j && children[j] == 1 &&
                           Lpat.col_count(j) == Lpat.col_count(j - 1) - 1;
        if (merge) {
            const auto prev = Lpat.col(j - 1).subspan(1);
            const auto cur = Lpat.col(j);
            if (!std::equal(prev.begin(), prev.end(), cur.begin(), cur.end())) {
                throw ArgumentError("column " + std::to_string(j) + " pattern is not column " +
                                    std::to_string(j - 1) + " minus its diagonal; inputs inconsistent");
            }
            ++out.blocks.back().width;
        } else {
            out.blocks.push_back({j, 1});
            const auto c = Lpat.col(j);
            patterns.emplace_back(c.begin(), c.end());
        }
    }
    out.row_patterns = std::move(patterns);
    return out;
}

std::vector<index_t> column_counts(const SparsityPattern& p) {
    std::vector<index_t> out(static_cast<std::size_t>(p.n));
    for (index_t j = 0; j < p.n; ++j) out[j] = p.col_count(j);
    return out;
}

double average_supernode_width(const BlockSet& blocks) {
    std::size_t count = 0, total = 0;
    for (const auto& b : blocks.blocks) {
        if (b.width > 1) {
            ++count;
            total += static_cast<std::size_t>(b.width);
        }
    }
    return count == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(count);
}

void check_partition(const BlockSet& blocks, index_t n) {
    index_t next = 0;
    for (std::size_t b = 0; b < blocks.blocks.size(); ++b) {
        const auto& blk = blocks.blocks[b];
        if (blk.width < 1) throw ArgumentError("block " + std::to_string(b) + " has width < 1");
        if (blk.start != next) throw ArgumentError("block " + std::to_string(b) + " does not start at column " +
                                                   std::to_string(next));
        next = blk.end();
    }
    if (next != n) throw ArgumentError("blocks cover " + std::to_string(next) + " of " + std::to_string(n) + " columns");
    if (blocks.row_patterns && blocks.row_patterns->size() != blocks.blocks.size()) {
        throw ArgumentError("row pattern count does not match block count");
    }
}

namespace {

std::vector<index_t> block_of_column(const BlockSet& blocks) {
    std::vector<index_t> owner;
    for (std::size_t b = 0; b < blocks.blocks.size(); ++b) {
        owner.insert(owner.end(), static_cast<std::size_t>(blocks.blocks[b].width), static_cast<index_t>(b));
    }
    return owner;
}

}  // namespace

std::vector<index_t> blocks_touched(const ReachSet& reach, const BlockSet& blocks) {
    const auto owner = block_of_column(blocks);
    std::vector<index_t> out;
    for (const index_t j : reach.order) {
        if (j < 0 || static_cast<std::size_t>(j) >= owner.size()) throw ArgumentError("reach index outside blocks");
        out.push_back(owner[j]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

RowPatternTable block_row_patterns(const RowPatternTable& rows, const BlockSet& blocks) {
    const auto owner = block_of_column(blocks);
    if (owner.size() != rows.rows.size()) throw ArgumentError("row pattern table does not match block set");
    RowPatternTable out;
    out.rows.resize(blocks.blocks.size());
    for (std::size_t s = 0; s < blocks.blocks.size(); ++s) {
        auto& dst = out.rows[s];
        const auto& blk = blocks.blocks[s];
        for (index_t j = blk.start; j < blk.end(); ++j) {
            for (const index_t k : rows.rows[j]) {
                if (k < blk.start) dst.push_back(owner[k]);
            }
        }
        std::sort(dst.begin(), dst.end());
        dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
    }
    return out;
}

InspectionSet inspector_registry(Algorithm algorithm, Transformation transformation, const InspectorInputs& inputs,
                                 InspectStats* stats) {
    if (inputs.pattern == nullptr) throw ArgumentError("inspector requires a sparsity pattern");
    const SparsityPattern& p = *inputs.pattern;
    InspectionSet out;
    out.algorithm = algorithm;
    out.transformation = transformation;

    if (algorithm == Algorithm::TriangularSolve && transformation == Transformation::VIPrune) {
        if (inputs.rhs == nullptr) throw ArgumentError("triangular VI-Prune inspection requires the rhs pattern");
        out.tag = SetTag::PruneSet;
        out.payload = reach_set(p, *inputs.rhs, stats);
    } else if (algorithm == Algorithm::TriangularSolve && transformation == Transformation::VSBlock) {
        out.tag = SetTag::BlockSet;
        out.payload = node_equivalence_supernodes(p);
    } else if (algorithm == Algorithm::Cholesky && transformation == Transformation::VIPrune) {
        const auto t = etree(p, stats);
        out.tag = SetTag::RowPatterns;
        out.payload = row_patterns(p, t, stats);
    } else if (algorithm == Algorithm::Cholesky && transformation == Transformation::VSBlock) {
        const auto t = etree(p, stats);
        const auto L = col_patterns(p, t, stats);
        out.tag = SetTag::BlockSet;
        out.payload = cholesky_supernodes(L, t);
    } else {
        throw ArgumentError("no inspector registered for this algorithm/transformation pair");
    }
    return out;
}

}  // namespace symspec
