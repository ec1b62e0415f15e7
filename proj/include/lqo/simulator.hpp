#pragma once

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"

namespace lqo {

/// Closed-form latency model evaluated over true cardinalities.
///
/// Scans:   table  c_ts * row_count
///          index  c_io + c_is * selected_rows
/// Joins:   loop   c_l * |L| * |R|
///          hash   c_hb * |L| + c_hp * |R| + c_ho * |O|
///          merge  c_m * (|L| + |R|) + c_ho * |O|, plus a sort penalty
///                 c_s * x * log2(x + 1) for each input of size x that does
///                 not already arrive ordered on its join key
///
/// An index scan delivers its table ordered by the primary key; a merge join
/// delivers both key columns ordered. Every coefficient defaults to a regime
/// where each operator wins somewhere: loop joins on very small inputs,
/// index scans under selective filters, merge joins on presorted inputs.
struct LatencyModel {
    double c_ts = 1.0;
    double c_io = 50.0;
    double c_is = 2.0;
    double c_l = 0.01;
    double c_hb = 1.5;
    double c_hp = 1.0;
    double c_ho = 0.5;
    double c_m = 1.0;
    double c_s = 0.2;
    /// Optional multiplicative log-normal noise; 0 disables it. The draw is
    /// deterministic in (noise_seed, plan shape), so repeated simulation of
    /// the same plan returns the same latency.
    double noise_sigma = 0.0;
    uint64_t noise_seed = 0;
};

/// Fraction of `pred`'s table selected by the predicate, estimated from the
/// column's equal-width histogram under uniformity within buckets. Always in
/// [0, 1]. Unknown columns raise CatalogError.
double histogram_selectivity(const Catalog& catalog, const ColumnPredicate& pred);

/// True row value check used by the executor-style evaluation.
bool predicate_matches(const ColumnPredicate& pred, int64_t value);

/// Exact output cardinality of the operator subtree rooted at `node`,
/// obtained by actually evaluating scans and joins against the catalog data.
/// The result is independent of join operators and scan access paths, but the
/// subtree must be fully specified; an unspecified scan throws ContractError.
int64_t true_cardinality(const Catalog& catalog, const PlanNode& node, const Query& q);

/// Deterministic latency of a complete plan under `model`, computed from the
/// exact per-node cardinalities. Throws ContractError when `plan` is not a
/// complete plan of `q`.
double simulate_latency(const Catalog& catalog, const PlanForest& plan, const Query& q,
                        const LatencyModel& model = {});

}  // namespace lqo
