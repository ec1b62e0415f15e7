#pragma once

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"
#include "lqo/simulator.hpp"

namespace lqo {

/// Cost of a plan under the classical estimator, plus the per-node estimated
/// cardinalities in preorder (roots in forest order; within a tree: node,
/// left subtree, right subtree).
struct EstimatedCost {
    double value = 0.0;
    std::vector<double> est_cards;
};

/// Selinger-style estimated output rows of the subtree rooted at `node`:
/// scans multiply the table's row count by per-predicate histogram
/// selectivities; joins divide the child product by max(distinct) per
/// crossing equi-join edge (independence + inclusion assumptions). Every
/// estimate is floored at one row. An unspecified scan in the subtree
/// throws ContractError.
double estimated_cardinality(const Catalog& catalog, const PlanNode& node, const Query& q);

/// The latency-model formulas evaluated over ESTIMATED cardinalities, with
/// the same delivered-order rule as the simulator. Requires a complete plan.
EstimatedCost estimate_cost(const Catalog& catalog, const PlanForest& plan, const Query& q,
                            const LatencyModel& model = {});

/// Exhaustive-equivalent dynamic program over connected relation subsets that
/// minimizes estimate_cost. Keeps a Pareto frontier per (subset, delivered
/// order) over (cost, estimated cardinality), which makes it exact even
/// though merge joins give sort interest to otherwise dominated entries.
/// Returns a complete plan; ties broken by canonical key.
PlanForest expert_plan(const Catalog& catalog, const Query& q,
                       const LatencyModel& model = {}, bool allow_cross_products = false);

}  // namespace lqo
