// Shared helpers for the test binaries: exhaustive plan enumeration and
// small fixture builders. Test-only code; the library never includes this.
#pragma once

#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"
#include "lqo/search.hpp"
#include "lqo/simulator.hpp"

namespace lqo::testutil {

/// Every complete plan of `q` reachable by the construction grammar:
/// recursive enumeration over (connected) binary splits, all three join
/// operators, both orientations, and every scan specialization. Exponential;
/// intended for queries of at most ~4 relations.
inline std::vector<PlanForest> enumerate_complete_plans(const Query& q, const Catalog& catalog,
                                                        bool allow_cross_products = false) {
    int n = int(q.relations.size());
    uint32_t full = (1u << n) - 1;

    auto rels_of = [&](uint32_t mask) {
        std::vector<RelationId> v;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) v.push_back(q.relations[size_t(i)]);
        return v;
    };
    auto connected = [&](uint32_t a, uint32_t b) {
        auto av = rels_of(a), bv = rels_of(b);
        for (const auto& e : q.join_edges) {
            bool a_has_ea = std::binary_search(av.begin(), av.end(), e.a);
            bool a_has_eb = std::binary_search(av.begin(), av.end(), e.b);
            bool b_has_ea = std::binary_search(bv.begin(), bv.end(), e.a);
            bool b_has_eb = std::binary_search(bv.begin(), bv.end(), e.b);
            if ((a_has_ea && b_has_eb) || (a_has_eb && b_has_ea)) return true;
        }
        return false;
    };

    std::vector<std::vector<PlanNodeRef>> trees(full + 1);
    for (int i = 0; i < n; ++i) {
        RelationId rel = q.relations[size_t(i)];
        trees[1u << i].push_back(PlanNode::make_scan(ScanKind::table, rel));
        if (catalog.indexable(rel))
            trees[1u << i].push_back(PlanNode::make_scan(ScanKind::index, rel));
    }
    for (uint32_t mask = 1; mask <= full; ++mask) {
        if (__builtin_popcount(mask) < 2) continue;
        for (uint32_t s = (mask - 1) & mask; s; s = (s - 1) & mask) {
            uint32_t t = mask ^ s;
            if (s < t) continue;  // each unordered split once; orientations below
            if (!allow_cross_products && !connected(s, t)) continue;
            for (const auto& l : trees[s])
                for (const auto& r : trees[t])
                    for (JoinOp op : {JoinOp::merge, JoinOp::hash, JoinOp::loop}) {
                        trees[mask].push_back(PlanNode::make_join(op, l, r));
                        trees[mask].push_back(PlanNode::make_join(op, r, l));
                    }
        }
    }

    std::vector<PlanForest> out;
    out.reserve(trees[full].size());
    for (auto& t : trees[full]) {
        PlanForest p;
        p.query_id = q.id;
        p.roots = {std::move(t)};
        out.push_back(std::move(p));
    }
    return out;
}

/// Scores every state with the true minimum simulated latency over all of
/// its completions, memoized per canonical key: the idealized evaluator that
/// makes best-first search provably return the global optimum.
class BestCompletionEvaluator final : public PlanEvaluator {
  public:
    BestCompletionEvaluator(const Query& q, const Catalog& catalog, bool allow_cross_products,
                            const LatencyModel& model = {})
        : q_(q), catalog_(catalog), allow_cross_(allow_cross_products), model_(model) {}

    double score(const PlanForest& plan) override {
        const std::string key = canonical_key(plan);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        double s;
        if (is_complete(plan, q_)) {
            s = simulate_latency(catalog_, plan, q_, model_);
        } else {
            s = std::numeric_limits<double>::infinity();
            for (const PlanForest& kid : children(plan, q_, catalog_.index_flags, allow_cross_))
                s = std::min(s, score(kid));
        }
        return memo_.emplace(key, s).first->second;
    }

  private:
    const Query& q_;
    const Catalog& catalog_;
    bool allow_cross_;
    LatencyModel model_;
    std::unordered_map<std::string, double> memo_;
};

/// Minimum of `cost` over every complete plan, with the minimizing plan.
inline std::pair<double, PlanForest> exhaustive_min(
    const Query& q, const Catalog& catalog, bool allow_cross,
    const std::function<double(const PlanForest&)>& cost) {
    auto all = enumerate_complete_plans(q, catalog, allow_cross);
    double best = 0.0;
    const PlanForest* arg = nullptr;
    for (const auto& p : all) {
        double c = cost(p);
        if (!arg || c < best) {
            best = c;
            arg = &p;
        }
    }
    return {best, *arg};
}

}  // namespace lqo::testutil
