// Latency oracle: selectivities, exact cardinalities, cost formulas, noise.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lqo/catalog.hpp"
#include "lqo/simulator.hpp"

using namespace lqo;

namespace {

CatalogConfig tiny_config() {
    CatalogConfig cfg;
    cfg.fact_tables = 1;
    cfg.dim_tables = 2;
    cfg.fact_rows = 1000;
    cfg.dim_rows = 200;
    cfg.attr_columns = 2;
    cfg.attr_domain = 10;
    return cfg;
}

/// fact0 = relation 0, dim0 = 1, dim1 = 2; fact0 has FKs to both dims.
Query fact_dim_query(const Catalog& cat, int ndims) {
    Query q;
    q.id = 1;
    q.relations = {0};
    for (int d = 0; d < ndims; ++d) q.relations.push_back(RelationId(1 + d));
    for (const auto& fk : cat.table(0).fk_edges)
        if (fk.ref_table <= RelationId(ndims)) q.join_edges.push_back({0, fk.column, fk.ref_table, 0});
    return q;
}

int64_t exact_match_count(const Catalog& cat, const ColumnPredicate& p) {
    int64_t n = 0;
    for (const auto& row : cat.rows[size_t(p.relation)])
        if (predicate_matches(p, row[size_t(p.column)])) ++n;
    return n;
}

PlanForest single_scan(int32_t qid, ScanKind k, RelationId r) {
    PlanForest p;
    p.query_id = qid;
    p.roots = {PlanNode::make_scan(k, r)};
    return p;
}

}  // namespace

TEST_CASE("predicate_matches implements every operator") {
    ColumnPredicate p;
    p.relation = 0;
    p.column = 1;

    p.op = PredOp::eq;
    p.values = {5};
    CHECK(predicate_matches(p, 5));
    CHECK_FALSE(predicate_matches(p, 4));

    p.op = PredOp::neq;
    CHECK(predicate_matches(p, 4));
    CHECK_FALSE(predicate_matches(p, 5));

    p.op = PredOp::lt;
    CHECK(predicate_matches(p, 4));
    CHECK_FALSE(predicate_matches(p, 5));

    p.op = PredOp::gt;
    CHECK(predicate_matches(p, 6));
    CHECK_FALSE(predicate_matches(p, 5));

    p.op = PredOp::in_list;
    p.values = {2, 5, 9};
    CHECK(predicate_matches(p, 9));
    CHECK_FALSE(predicate_matches(p, 3));

    p.op = PredOp::like_prefix;
    p.values = {12};
    CHECK(predicate_matches(p, 12));
    CHECK(predicate_matches(p, 120));
    CHECK(predicate_matches(p, 1234));
    CHECK_FALSE(predicate_matches(p, 212));
    CHECK_FALSE(predicate_matches(p, 13));
}

TEST_CASE("histogram_selectivity: bounds, edge cases, and accuracy") {
    Catalog cat = generate_catalog(tiny_config(), 17);
    // Attribute column of fact0 (uniform over [0, 10)).
    int32_t acol = -1;
    for (int32_t c = 1; c < int32_t(cat.table(0).columns.size()); ++c)
        if (cat.table(0).columns[size_t(c)].name == "a0") acol = c;
    REQUIRE(acol > 0);

    ColumnPredicate p;
    p.relation = 0;
    p.column = acol;

    // Full-range predicate selects everything.
    p.op = PredOp::lt;
    p.values = {1000};
    CHECK(histogram_selectivity(cat, p) == doctest::Approx(1.0));

    // Out-of-range literals select nothing.
    p.op = PredOp::eq;
    p.values = {-3};
    CHECK(histogram_selectivity(cat, p) == 0.0);
    p.values = {999};
    CHECK(histogram_selectivity(cat, p) == 0.0);

    // Equality on a uniform 10-valued column: about 1/10, and within one
    // bucket of the exact fraction.
    double worst = 0.0;
    for (int64_t v = 0; v < 10; ++v) {
        p.values = {v};
        double est = histogram_selectivity(cat, p);
        double exact = double(exact_match_count(cat, p)) / double(cat.row_count(0));
        worst = std::max(worst, std::abs(est - exact));
        CHECK(est == doctest::Approx(0.1).epsilon(0.5));
    }
    CHECK(worst <= 1.0 / double(cat.config.histogram_buckets));

    // in_list sums member selectivities and ignores duplicates.
    p.op = PredOp::in_list;
    p.values = {3, 3, 4};
    ColumnPredicate e3 = p, e4 = p;
    e3.op = e4.op = PredOp::eq;
    e3.values = {3};
    e4.values = {4};
    CHECK(histogram_selectivity(cat, p) ==
          doctest::Approx(histogram_selectivity(cat, e3) + histogram_selectivity(cat, e4)));

    // lt + eq + gt partitions the domain.
    ColumnPredicate lt = p, gt = p, eq = p;
    lt.op = PredOp::lt;
    gt.op = PredOp::gt;
    eq.op = PredOp::eq;
    lt.values = gt.values = eq.values = {6};
    CHECK(histogram_selectivity(cat, lt) + histogram_selectivity(cat, eq) +
              histogram_selectivity(cat, gt) ==
          doctest::Approx(1.0).epsilon(1e-9));

    // like_prefix "1" covers [1,2) and [10,20): on a 10-valued column that
    // is close to the fraction matching values {1}.
    p.op = PredOp::like_prefix;
    p.values = {1};
    double lp = histogram_selectivity(cat, p);
    double exact_lp = double(exact_match_count(cat, p)) / double(cat.row_count(0));
    CHECK(std::abs(lp - exact_lp) <= 2.0 / double(cat.config.histogram_buckets));

    // Unknown column raises CatalogError; all selectivities stay in [0,1].
    ColumnPredicate bad = p;
    bad.column = 99;
    CHECK_THROWS_AS(histogram_selectivity(cat, bad), CatalogError);
}

TEST_CASE("true_cardinality matches brute-force evaluation") {
    Catalog cat = generate_catalog(tiny_config(), 23);
    Query q = fact_dim_query(cat, 1);

    // Bare scan: the table's row count.
    auto scan0 = PlanNode::make_scan(ScanKind::table, 0);
    CHECK(true_cardinality(cat, *scan0, q) == cat.row_count(0));

    // Scan with eq predicate: exact matching-row count.
    int32_t acol = 3;  // fact0: id, fk_dim0, fk_dim1, a0, a1
    REQUIRE(cat.table(0).columns[size_t(acol)].name == "a0");
    ColumnPredicate p{0, acol, PredOp::eq, {4}};
    q.predicates.push_back(p);
    CHECK(true_cardinality(cat, *scan0, q) == exact_match_count(cat, p));

    // FK join: each fact row matches exactly one dim row, so the join
    // cardinality equals the filtered fact cardinality.
    auto scan1 = PlanNode::make_scan(ScanKind::index, 1);
    int64_t filtered = true_cardinality(cat, *scan0, q);
    for (JoinOp op : {JoinOp::merge, JoinOp::hash, JoinOp::loop}) {
        auto fwd = PlanNode::make_join(op, scan0, scan1);
        auto rev = PlanNode::make_join(op, scan1, scan0);
        CHECK(true_cardinality(cat, *fwd, q) == filtered);
        CHECK(true_cardinality(cat, *rev, q) == filtered);
    }

    // Adding a predicate never increases any node's cardinality.
    Query more = q;
    more.predicates.push_back({0, 4, PredOp::lt, {5}});
    auto join = PlanNode::make_join(JoinOp::hash, scan0, scan1);
    CHECK(true_cardinality(cat, *join, more) <= true_cardinality(cat, *join, q));

    // Unspecified scans are rejected.
    auto uns = PlanNode::make_scan(ScanKind::unspec, 0);
    CHECK_THROWS_AS(true_cardinality(cat, *uns, q), ContractError);
}

TEST_CASE("simulate_latency implements the operator cost formulas") {
    CatalogConfig cfg = tiny_config();
    Catalog cat = generate_catalog(cfg, 31);
    LatencyModel m;  // defaults

    // Single-relation plan, table scan, c_ts = 1: latency == row count.
    Query q1;
    q1.id = 0;
    q1.relations = {0};
    CHECK(simulate_latency(cat, single_scan(0, ScanKind::table, 0), q1, m) ==
          doctest::Approx(double(cat.row_count(0))));

    // Index scan: c_io + c_is * selected.
    CHECK(simulate_latency(cat, single_scan(0, ScanKind::index, 0), q1, m) ==
          doctest::Approx(m.c_io + m.c_is * double(cat.row_count(0))));

    // Joins: compute each operator's formula from true cardinalities.
    Query q = fact_dim_query(cat, 1);
    auto ts0 = PlanNode::make_scan(ScanKind::table, 0);
    auto ts1 = PlanNode::make_scan(ScanKind::table, 1);
    double nl = double(true_cardinality(cat, *ts0, q));
    double nr = double(true_cardinality(cat, *ts1, q));
    auto join_of = [&](JoinOp op) {
        PlanForest p;
        p.query_id = q.id;
        p.roots = {PlanNode::make_join(op, ts0, ts1)};
        return p;
    };
    double no = double(true_cardinality(cat, *join_of(JoinOp::hash).roots[0], q));
    double base = m.c_ts * nl + m.c_ts * nr;

    CHECK(simulate_latency(cat, join_of(JoinOp::loop), q, m) ==
          doctest::Approx(base + m.c_l * nl * nr));
    CHECK(simulate_latency(cat, join_of(JoinOp::hash), q, m) ==
          doctest::Approx(base + m.c_hb * nl + m.c_hp * nr + m.c_ho * no));
    auto pen = [&](double x) { return m.c_s * x * std::log2(x + 1.0); };
    CHECK(simulate_latency(cat, join_of(JoinOp::merge), q, m) ==
          doctest::Approx(base + m.c_m * (nl + nr) + m.c_ho * no + pen(nl) + pen(nr)));

    // Loop join dominates hash join on 1000x1000 when c_l = c_hb = c_hp = 1.
    LatencyModel flat;
    flat.c_l = flat.c_hb = flat.c_hp = 1.0;
    CHECK(simulate_latency(cat, join_of(JoinOp::loop), q, flat) >
          simulate_latency(cat, join_of(JoinOp::hash), q, flat));

    // Incomplete plans are rejected.
    PlanForest incomplete;
    incomplete.query_id = q.id;
    incomplete.roots = {ts0, PlanNode::make_scan(ScanKind::unspec, 1)};
    CHECK_THROWS_AS(simulate_latency(cat, incomplete, q, m), ContractError);
}

TEST_CASE("merge-join sort penalty honors delivered order") {
    Catalog cat = generate_catalog(tiny_config(), 41);
    Query q = fact_dim_query(cat, 1);
    LatencyModel m;

    // The FK edge joins fact0.fk_dim0 with dim0.id. An index scan of dim0
    // delivers dim0 ordered by id (the join column), so only the fact side
    // pays the sort penalty.
    auto t_fact = PlanNode::make_scan(ScanKind::table, 0);
    auto t_dim = PlanNode::make_scan(ScanKind::table, 1);
    auto i_dim = PlanNode::make_scan(ScanKind::index, 1);

    double nf = double(true_cardinality(cat, *t_fact, q));
    double nd = double(true_cardinality(cat, *t_dim, q));
    auto pen = [&](double x) { return m.c_s * x * std::log2(x + 1.0); };

    auto forest = [&](PlanNodeRef root) {
        PlanForest p;
        p.query_id = q.id;
        p.roots = {std::move(root)};
        return p;
    };
    double both_unsorted = simulate_latency(cat, forest(PlanNode::make_join(JoinOp::merge, t_fact, t_dim)), q, m);
    double dim_sorted = simulate_latency(cat, forest(PlanNode::make_join(JoinOp::merge, t_fact, i_dim)), q, m);
    // Swapping the table scan of dim0 for an index scan changes cost by the
    // scan-cost delta and removes exactly one sort penalty.
    double scan_delta = (m.c_io + m.c_is * nd) - m.c_ts * double(cat.row_count(1));
    CHECK(dim_sorted == doctest::Approx(both_unsorted + scan_delta - pen(nd)));

    // A merge join's output is ordered on its key: reusing it in a second
    // merge join on the same key pays no new penalty for that input. Build
    // (fact0 M dim0) M dim1 and check the top join's penalty terms.
    Query q2 = fact_dim_query(cat, 2);
    auto lower = PlanNode::make_join(JoinOp::merge, PlanNode::make_scan(ScanKind::table, 0),
                                     PlanNode::make_scan(ScanKind::table, 1));
    auto upper_in_order = PlanNode::make_join(JoinOp::merge, lower,
                                              PlanNode::make_scan(ScanKind::table, 2));
    // The upper join's key is fact0.fk_dim1 = dim1.id; the lower merge
    // ordered its output on (fact0.fk_dim0, dim0.id), which does NOT cover
    // the upper key, so the left input still pays a penalty. This pins the
    // key-specific (not merely operator-specific) order rule.
    double nlow = double(true_cardinality(cat, *lower, q2));
    double nd1 = double(true_cardinality(cat, *PlanNode::make_scan(ScanKind::table, 2), q2));
    double nout = double(true_cardinality(cat, *upper_in_order, q2));
    double nf2 = double(true_cardinality(cat, *PlanNode::make_scan(ScanKind::table, 0), q2));
    double nd0 = double(true_cardinality(cat, *PlanNode::make_scan(ScanKind::table, 1), q2));
    double lower_cost = m.c_ts * double(cat.row_count(0)) + m.c_ts * double(cat.row_count(1)) +
                        m.c_m * (nf2 + nd0) + m.c_ho * nlow + pen(nf2) + pen(nd0);
    double expect = lower_cost + m.c_ts * double(cat.row_count(2))  // dim1 scan
                    + m.c_m * (nlow + nd1) + m.c_ho * nout + pen(nlow) + pen(nd1);
    PlanForest whole;
    whole.query_id = q2.id;
    whole.roots = {upper_in_order};
    CHECK(simulate_latency(cat, whole, q2, m) == doctest::Approx(expect));
}

TEST_CASE("latency noise is reproducible and plan-keyed") {
    Catalog cat = generate_catalog(tiny_config(), 51);
    Query q = fact_dim_query(cat, 1);
    auto make = [&](JoinOp op) {
        PlanForest p;
        p.query_id = q.id;
        p.roots = {PlanNode::make_join(op, PlanNode::make_scan(ScanKind::table, 0),
                                       PlanNode::make_scan(ScanKind::table, 1))};
        return p;
    };

    LatencyModel noisy;
    noisy.noise_sigma = 0.3;
    noisy.noise_seed = 99;

    double a1 = simulate_latency(cat, make(JoinOp::hash), q, noisy);
    double a2 = simulate_latency(cat, make(JoinOp::hash), q, noisy);
    CHECK(a1 == a2);  // same plan, same draw

    LatencyModel clean = noisy;
    clean.noise_sigma = 0.0;
    double base = simulate_latency(cat, make(JoinOp::hash), q, clean);
    CHECK(a1 != base);  // the draw actually moved the value
    CHECK(a1 > 0.0);

    LatencyModel other_seed = noisy;
    other_seed.noise_seed = 100;
    CHECK(simulate_latency(cat, make(JoinOp::hash), q, other_seed) != a1);
}
