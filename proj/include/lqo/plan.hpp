#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lqo/common.hpp"

namespace lqo {

using RelationId = int32_t;

/// Join algorithms. The enum order doubles as the one-hot slot order used by
/// the plan featurizer, so it is part of the public contract: merge, hash, loop.
enum class JoinOp : uint8_t { merge = 0, hash = 1, loop = 2 };

/// Scan access paths. `unspec` is a placeholder leaf whose access path has not
/// been chosen yet; complete plans contain none.
enum class ScanKind : uint8_t { table = 0, index = 1, unspec = 2 };

enum class PredOp : uint8_t { eq = 0, neq, lt, gt, in_list, like_prefix };

const char* to_string(JoinOp op);
const char* to_string(ScanKind kind);
const char* to_string(PredOp op);

/// Filter on a single column. Literal values are integers; `like_prefix`
/// interprets its single value as a decimal-string prefix of the column value.
struct ColumnPredicate {
    RelationId relation = -1;
    int32_t column = -1;
    PredOp op = PredOp::eq;
    std::vector<int64_t> values;
};

/// Equi-join edge between two relation/column pairs, stored with a < b.
struct JoinEdge {
    RelationId a = -1;
    int32_t a_col = -1;
    RelationId b = -1;
    int32_t b_col = -1;
};

/// A join query: participating relations, the equi-join graph over them, and
/// per-column filters. Relations are catalog ids, sorted ascending.
struct Query {
    int32_t id = -1;
    std::vector<RelationId> relations;
    std::vector<JoinEdge> join_edges;
    std::vector<ColumnPredicate> predicates;

    bool has_relation(RelationId r) const;
};

/// Throws ContractError unless relations are sorted/unique, every edge and
/// predicate references a participating relation, and the join graph connects
/// all relations.
void validate_query(const Query& q);

struct PlanNode;
using PlanNodeRef = std::shared_ptr<const PlanNode>;

/// Immutable node of an operator tree. Scan nodes carry (scan_kind, relation);
/// join nodes carry join_op and two children. Sharing subtrees is safe.
struct PlanNode {
    enum class Kind : uint8_t { scan, join };

    Kind kind = Kind::scan;
    ScanKind scan_kind = ScanKind::unspec;
    JoinOp join_op = JoinOp::merge;
    RelationId relation = -1;
    PlanNodeRef left, right;

    static PlanNodeRef make_scan(ScanKind kind, RelationId rel);
    static PlanNodeRef make_join(JoinOp op, PlanNodeRef l, PlanNodeRef r);

    bool is_scan() const { return kind == Kind::scan; }
    bool is_join() const { return kind == Kind::join; }
};

/// A (possibly partial) plan for one query: a forest of disjoint operator
/// trees whose leaves cover the query's relations exactly once.
struct PlanForest {
    int32_t query_id = -1;
    std::vector<PlanNodeRef> roots;
};

/// Sorted relation ids under `node`.
std::vector<RelationId> leaf_relations(const PlanNode& node);
/// Smallest relation id under `node`.
RelationId min_relation(const PlanNode& node);
/// Number of unspecified-scan leaves in the forest.
int count_unspecified(const PlanForest& plan);

/// A plan is complete when it is a single tree with no unspecified scans.
bool is_complete(const PlanForest& plan, const Query& q);

/// Throws ContractError unless the forest's leaves cover q.relations exactly
/// once and the forest belongs to q.
void validate_plan(const PlanForest& plan, const Query& q);

/// All plans reachable from `plan` by one construction step, in a pinned
/// deterministic order:
///   1. for each root in order, preorder over its leaves: specialize one
///      unspecified scan to a table scan, then to an index scan when
///      `indexable[rel]` holds;
///   2. for each root pair (i, j), i < j, skipping pairs with no join edge
///      between their relation sets unless `allow_cross_products`: for each
///      op in (merge, hash, loop), join root i with root j, then j with i.
///      The joined tree replaces slot i and slot j is erased.
/// `indexable` is indexed by catalog relation id. A complete plan has no
/// children.
std::vector<PlanForest> children(const PlanForest& plan, const Query& q,
                                 const std::vector<bool>& indexable,
                                 bool allow_cross_products = false);

/// True when every tree of `partial` appears as a subtree of `full` with
/// compatible scans (an unspecified scan matches any scan of the same
/// relation; specialized scans must match exactly). Both forests must belong
/// to the same query or a ContractError is thrown.
bool is_subplan(const PlanForest& partial, const PlanForest& full);

/// Canonical text key: scans are T<rel>/I<rel>/U<rel>, joins are
/// "(<M|H|L> <left> <right>)", roots sorted by smallest relation id and
/// joined with '|'. Equal keys <=> structurally equal plans (up to root
/// order, which carries no meaning).
std::string canonical_key(const PlanForest& plan);
std::string canonical_key(const PlanNode& node);

/// Inverse of canonical_key; throws IntegrityError on malformed input.
PlanForest parse_canonical_key(const std::string& key, int32_t query_id);

/// The canonical on-path construction sequence of a complete plan: the
/// all-unspecified forest, then one scan specialization per relation in
/// relation-id order, then one join per internal node in postorder. Returns
/// 2n states for n relations; the last equals `complete` and each state is a
/// child of its predecessor.
std::vector<PlanForest> construction_states(const PlanForest& complete,
                                            const Query& q);

}  // namespace lqo
