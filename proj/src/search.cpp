#include "lqo/search.hpp"

#include <chrono>
#include <queue>
#include <unordered_set>
#include <vector>

#include "lqo/common.hpp"

namespace lqo {

namespace {

PlanForest initial_state(const Query& q) {
    PlanForest f;
    f.query_id = q.id;
    for (RelationId r : q.relations) f.roots.push_back(PlanNode::make_scan(ScanKind::unspec, r));
    return f;
}

struct OpenItem {
    double score;
    uint64_t seq;
    PlanForest plan;
};

struct OpenOrder {
    // std::priority_queue keeps the largest on top, so invert: the best item
    // is the lowest score, breaking exact ties in favour of the oldest push.
    bool operator()(const OpenItem& a, const OpenItem& b) const {
        if (a.score != b.score) return a.score > b.score;
        return a.seq > b.seq;
    }
};

}  // namespace

PlanForest hurry_up(PlanEvaluator& evaluator, const PlanForest& start, const Query& q,
                    const Catalog& catalog, const SearchConfig& cfg) {
    PlanForest cur = start;
    while (!is_complete(cur, q)) {
        std::vector<PlanForest> kids =
            children(cur, q, catalog.index_flags, cfg.allow_cross_products);
        LQO_CHECK(!kids.empty(), "hurry_up: incomplete state with no children");
        size_t best = 0;
        double best_score = evaluator.score(kids[0]);
        for (size_t i = 1; i < kids.size(); ++i) {
            const double s = evaluator.score(kids[i]);
            if (s < best_score) {
                best_score = s;
                best = i;
            }
        }
        cur = std::move(kids[best]);
    }
    return cur;
}

PlanForest best_first_search(PlanEvaluator& evaluator, const Query& q, const Catalog& catalog,
                             const SearchConfig& cfg) {
    validate_query(q);
    LQO_CHECK(q.relations.back() < catalog.num_relations(),
              "best_first_search: query references relations outside the catalog");
    const auto t0 = std::chrono::steady_clock::now();
    const auto out_of_budget = [&](int64_t pops) {
        if (cfg.cutoff == SearchConfig::Cutoff::expansions) return pops >= cfg.expansion_budget;
        const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
        return dt.count() >= cfg.wallclock_ms;
    };

    std::priority_queue<OpenItem, std::vector<OpenItem>, OpenOrder> open;
    std::unordered_set<std::string> visited;
    uint64_t seq = 0;

    bool have_complete = false;
    double best_complete_score = 0.0;
    PlanForest best_complete;

    const auto push = [&](PlanForest&& plan) {
        std::string key = canonical_key(plan);
        if (!visited.insert(std::move(key)).second) return;
        const double s = evaluator.score(plan);
        if (is_complete(plan, q) && (!have_complete || s < best_complete_score)) {
            have_complete = true;
            best_complete_score = s;
            best_complete = plan;
        }
        open.push(OpenItem{s, seq++, std::move(plan)});
    };

    PlanForest start = initial_state(q);
    PlanForest last_popped = start;
    push(std::move(start));

    int64_t pops = 0;
    while (!open.empty()) {
        if (out_of_budget(pops)) break;
        OpenItem item = open.top();
        open.pop();
        ++pops;
        last_popped = item.plan;
        if (is_complete(item.plan, q)) continue;
        std::vector<PlanForest> kids =
            children(item.plan, q, catalog.index_flags, cfg.allow_cross_products);
        for (PlanForest& kid : kids) push(std::move(kid));
    }

    if (have_complete) return best_complete;
    return hurry_up(evaluator, last_popped, q, catalog, cfg);
}

}  // namespace lqo
