// Best-first plan search: optimality under an exact evaluator, tie and
// budget semantics, deduplication, and the greedy fallback.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unordered_map>

#include "lqo/search.hpp"
#include "lqo/simulator.hpp"
#include "test_util.hpp"

using namespace lqo;

namespace {

CatalogConfig small_config() {
    CatalogConfig cfg;
    cfg.fact_tables = 1;
    cfg.dim_tables = 3;
    cfg.fact_rows = 2000;
    cfg.dim_rows = 150;
    cfg.attr_columns = 2;
    cfg.attr_domain = 10;
    return cfg;
}

/// Deterministic pseudo-random score derived from the canonical key only.
struct HashEvaluator final : PlanEvaluator {
    double score(const PlanForest& plan) override {
        return double(fnv1a64(canonical_key(plan)) >> 11) / double(1ull << 53);
    }
};

struct ConstantEvaluator final : PlanEvaluator {
    double score(const PlanForest&) override { return 0.0; }
};

/// Counts how many times each canonical key was scored.
struct CountingEvaluator final : PlanEvaluator {
    std::unordered_map<std::string, int> calls;
    double score(const PlanForest& plan) override {
        return double(++calls[canonical_key(plan)]);
    }
};

/// Start state scores low so it pops first; all other states tie at 1.
struct FlatEvaluator final : PlanEvaluator {
    int start_roots;
    explicit FlatEvaluator(int n) : start_roots(n) {}
    double score(const PlanForest& plan) override {
        return int(plan.roots.size()) == start_roots && count_unspecified(plan) == start_roots
                   ? 0.0
                   : 1.0;
    }
};

PlanForest start_state(const Query& q) {
    PlanForest f;
    f.query_id = q.id;
    for (RelationId r : q.relations) f.roots.push_back(PlanNode::make_scan(ScanKind::unspec, r));
    return f;
}

}  // namespace

TEST_CASE("exact best-completion evaluator makes the search optimal") {
    // Queries stay at <= 3 relations here; the acceptance gate runs the same
    // check at 4 relations with a longer budget.
    Catalog cat = generate_catalog(small_config(), 41);
    WorkloadConfig wcfg;
    wcfg.num_queries = 12;
    wcfg.joins_min = 1;
    wcfg.joins_max = 2;
    auto queries = generate_workload(cat, wcfg, 7);

    SearchConfig cfg;
    cfg.expansion_budget = 1 << 30;  // effectively no cutoff
    for (const Query& q : queries) {
        testutil::BestCompletionEvaluator eval(q, cat, cfg.allow_cross_products);
        PlanForest found = best_first_search(eval, q, cat, cfg);
        REQUIRE(is_complete(found, q));
        const auto [best, arg] = testutil::exhaustive_min(
            q, cat, cfg.allow_cross_products,
            [&](const PlanForest& p) { return simulate_latency(cat, p, q); });
        CHECK(simulate_latency(cat, found, q) == best);
    }
}

TEST_CASE("with no cutoff the returned plan minimizes the score over all completions") {
    Catalog cat = generate_catalog(small_config(), 43);
    WorkloadConfig wcfg;
    wcfg.num_queries = 8;
    wcfg.joins_min = 1;
    wcfg.joins_max = 2;
    auto queries = generate_workload(cat, wcfg, 11);

    SearchConfig cfg;
    cfg.expansion_budget = 1 << 30;
    for (const Query& q : queries) {
        HashEvaluator eval;
        PlanForest found = best_first_search(eval, q, cat, cfg);
        const auto [best, arg] = testutil::exhaustive_min(
            q, cat, cfg.allow_cross_products, [&](const PlanForest& p) { return eval.score(p); });
        CHECK(eval.score(found) == best);
    }
}

TEST_CASE("every state is scored exactly once") {
    Catalog cat = generate_catalog(small_config(), 47);
    WorkloadConfig wcfg;
    wcfg.num_queries = 4;
    wcfg.joins_min = 2;
    wcfg.joins_max = 2;
    auto queries = generate_workload(cat, wcfg, 13);

    SearchConfig cfg;
    cfg.expansion_budget = 1 << 30;
    for (const Query& q : queries) {
        CountingEvaluator eval;
        best_first_search(eval, q, cat, cfg);
        CHECK(eval.calls.size() > 50);  // reconvergent states exist
        for (const auto& [key, n] : eval.calls) {
            CAPTURE(key);
            CHECK(n == 1);
        }
    }
}

TEST_CASE("greedy fallback follows first-among-ties children in enumeration order") {
    Catalog cat = generate_catalog(small_config(), 53);
    Query q;
    q.id = 0;
    q.relations = {1, 2};
    q.join_edges = {{1, 1, 2, 1}};  // any connecting edge works for the grammar
    validate_query(q);

    ConstantEvaluator flat;
    SearchConfig cfg;
    // Ties everywhere: the walk specializes scans left to right choosing the
    // table scan first, then takes the first enumerated join.
    PlanForest greedy = hurry_up(flat, start_state(q), q, cat, cfg);
    CHECK(canonical_key(greedy) == "(M T1 T2)");
}

TEST_CASE("expansion budget of one falls back to greedy from the start state") {
    Catalog cat = generate_catalog(small_config(), 53);
    Query q;
    q.id = 0;
    q.relations = {0, 1};
    q.join_edges = {{0, 1, 1, 0}};
    validate_query(q);

    FlatEvaluator eval(2);
    SearchConfig cfg;
    cfg.expansion_budget = 1;
    PlanForest got = best_first_search(eval, q, cat, cfg);
    ConstantEvaluator flat;
    PlanForest want = hurry_up(flat, start_state(q), q, cat, cfg);
    CHECK(canonical_key(got) == canonical_key(want));

    // Two pops: the second pop takes the oldest of the tied children, which
    // is the first child pushed (table scan of the first relation).
    cfg.expansion_budget = 2;
    FlatEvaluator eval2(2);
    PlanForest got2 = best_first_search(eval2, q, cat, cfg);
    CHECK(canonical_key(got2) == canonical_key(want));  // same greedy tail

    // Three pops reach the second child in push order: the index scan of the
    // first relation (it is indexable by construction), whose greedy
    // completion keeps that index scan.
    cfg.expansion_budget = 3;
    FlatEvaluator eval3(2);
    PlanForest got3 = best_first_search(eval3, q, cat, cfg);
    CHECK(canonical_key(got3) == "(M I0 T1)");
}

TEST_CASE("zero wallclock budget still returns a complete plan") {
    Catalog cat = generate_catalog(small_config(), 59);
    WorkloadConfig wcfg;
    wcfg.num_queries = 3;
    wcfg.joins_min = 2;
    wcfg.joins_max = 3;
    auto queries = generate_workload(cat, wcfg, 17);

    SearchConfig cfg;
    cfg.cutoff = SearchConfig::Cutoff::wallclock;
    cfg.wallclock_ms = 0.0;
    for (const Query& q : queries) {
        HashEvaluator eval;
        PlanForest got = best_first_search(eval, q, cat, cfg);
        CHECK(is_complete(got, q));
    }
}

TEST_CASE("search is deterministic") {
    Catalog cat = generate_catalog(small_config(), 61);
    WorkloadConfig wcfg;
    wcfg.num_queries = 6;
    wcfg.joins_min = 1;
    wcfg.joins_max = 3;
    auto queries = generate_workload(cat, wcfg, 19);

    SearchConfig cfg;  // default finite budget
    for (const Query& q : queries) {
        HashEvaluator a, b;
        CHECK(canonical_key(best_first_search(a, q, cat, cfg)) ==
              canonical_key(best_first_search(b, q, cat, cfg)));
    }
}

TEST_CASE("queries outside the catalog are rejected") {
    Catalog cat = generate_catalog(small_config(), 67);
    Query q;
    q.id = 0;
    q.relations = {0, RelationId(cat.num_relations())};
    q.join_edges = {{0, 0, RelationId(cat.num_relations()), 0}};
    HashEvaluator eval;
    SearchConfig cfg;
    CHECK_THROWS_AS(best_first_search(eval, q, cat, cfg), ContractError);
}
