#pragma once

#include <cstdint>

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"

namespace lqo {

/// Scores partial or complete plans; lower is better. Implementations must
/// be deterministic for a fixed model state.
struct PlanEvaluator {
    virtual ~PlanEvaluator() = default;
    virtual double score(const PlanForest& plan) = 0;
};

struct SearchConfig {
    enum class Cutoff { expansions = 0, wallclock = 1 };
    Cutoff cutoff = Cutoff::expansions;
    int64_t expansion_budget = 96;  ///< node pops when cutoff == expansions
    double wallclock_ms = 250.0;    ///< time budget when cutoff == wallclock
    bool allow_cross_products = false;
};

/// Best-first anytime search from the all-unspecified starting state. Pops
/// the lowest-scoring open state (FIFO among exact ties), pushes all scored
/// children (deduplicated by canonical key), and tracks the best-scoring
/// complete plan seen. On cutoff with no complete plan seen, greedily
/// completes from the last expanded state. Always returns a complete plan.
PlanForest best_first_search(PlanEvaluator& evaluator, const Query& q, const Catalog& catalog,
                             const SearchConfig& cfg);

/// Greedy descent: repeatedly steps to the lowest-scoring child (first among
/// exact ties) until the plan is complete.
PlanForest hurry_up(PlanEvaluator& evaluator, const PlanForest& start, const Query& q,
                    const Catalog& catalog, const SearchConfig& cfg);

}  // namespace lqo
