#include "lqo/expert.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace lqo {

namespace {

using OrderKey = std::vector<std::pair<RelationId, int32_t>>;

struct EstState {
    double card = 0.0;
    double cost = 0.0;
    OrderKey order;
};

/// Crossing equi-join edge with the left/right sides resolved and the
/// distinct counts of both key columns attached.
struct CrossEdge {
    RelationId l_rel, r_rel;
    int32_t l_col, r_col;
    double l_dist, r_dist;
};

std::vector<CrossEdge> crossing_edges(const Catalog& cat, const Query& q,
                                      const std::vector<RelationId>& left,
                                      const std::vector<RelationId>& right) {
    auto in = [](const std::vector<RelationId>& v, RelationId r) {
        return std::binary_search(v.begin(), v.end(), r);
    };
    std::vector<CrossEdge> out;
    for (const auto& e : q.join_edges) {
        CrossEdge c{};
        if (in(left, e.a) && in(right, e.b)) {
            c = {e.a, e.b, e.a_col, e.b_col, 0, 0};
        } else if (in(left, e.b) && in(right, e.a)) {
            c = {e.b, e.a, e.b_col, e.a_col, 0, 0};
        } else {
            continue;
        }
        c.l_dist = double(cat.histogram(c.l_rel, c.l_col).total_distinct);
        c.r_dist = double(cat.histogram(c.r_rel, c.r_col).total_distinct);
        out.push_back(c);
    }
    return out;
}

double scan_card_estimate(const Catalog& cat, const Query& q, RelationId rel) {
    double card = double(cat.row_count(rel));
    for (const auto& p : q.predicates)
        if (p.relation == rel) card *= histogram_selectivity(cat, p);
    return std::max(1.0, card);
}

EstState scan_state(const Catalog& cat, const Query& q, RelationId rel, ScanKind kind,
                    const LatencyModel& m) {
    EstState s;
    s.card = scan_card_estimate(cat, q, rel);
    if (kind == ScanKind::index) {
        s.cost = m.c_io + m.c_is * s.card;
        s.order = {{rel, 0}};
    } else {
        // Unspecified scans are costed like table scans.
        s.cost = m.c_ts * double(cat.row_count(rel));
    }
    return s;
}

/// Shared join arithmetic. Both estimate_cost and the DP run through this
/// function so their costs agree exactly, double for double.
EstState join_state(JoinOp op, const EstState& l, const EstState& r,
                    const std::vector<CrossEdge>& keys, const LatencyModel& m) {
    EstState out;
    double card = l.card * r.card;
    for (const auto& k : keys) card /= std::max(k.l_dist, k.r_dist);
    out.card = std::max(1.0, card);

    double cost = l.cost + r.cost;
    switch (op) {
        case JoinOp::loop:
            cost += m.c_l * l.card * r.card;
            break;
        case JoinOp::hash:
            cost += m.c_hb * l.card + m.c_hp * r.card + m.c_ho * out.card;
            break;
        case JoinOp::merge: {
            auto sorted_on = [](const OrderKey& o, RelationId rel, int32_t col) {
                return std::find(o.begin(), o.end(), std::make_pair(rel, col)) != o.end();
            };
            bool ls = !keys.empty() && sorted_on(l.order, keys[0].l_rel, keys[0].l_col);
            bool rs = !keys.empty() && sorted_on(r.order, keys[0].r_rel, keys[0].r_col);
            auto pen = [&](double x) { return m.c_s * x * std::log2(x + 1.0); };
            cost += m.c_m * (l.card + r.card) + m.c_ho * out.card;
            if (!ls) cost += pen(l.card);
            if (!rs) cost += pen(r.card);
            if (!keys.empty())
                out.order = {{keys[0].l_rel, keys[0].l_col}, {keys[0].r_rel, keys[0].r_col}};
            break;
        }
    }
    out.cost = cost;
    return out;
}

EstState estimate_node(const Catalog& cat, const Query& q, const PlanNode& node,
                       const LatencyModel& m, std::vector<double>& cards) {
    size_t slot = cards.size();
    cards.push_back(0.0);
    EstState st;
    if (node.is_scan()) {
        st = scan_state(cat, q, node.relation, node.scan_kind, m);
    } else {
        EstState l = estimate_node(cat, q, *node.left, m, cards);
        EstState r = estimate_node(cat, q, *node.right, m, cards);
        auto keys = crossing_edges(cat, q, leaf_relations(*node.left), leaf_relations(*node.right));
        st = join_state(node.join_op, l, r, keys, m);
    }
    cards[slot] = st.card;
    return st;
}

}  // namespace

namespace {
bool subtree_has_unspecified(const PlanNode& node) {
    if (node.is_scan()) return node.scan_kind == ScanKind::unspec;
    return subtree_has_unspecified(*node.left) || subtree_has_unspecified(*node.right);
}
}  // namespace

double estimated_cardinality(const Catalog& catalog, const PlanNode& node, const Query& q) {
    LQO_CHECK(!subtree_has_unspecified(node),
              "estimated_cardinality: unspecified scan in subtree");
    std::vector<double> cards;
    LatencyModel m;
    return estimate_node(catalog, q, node, m, cards).card;
}

EstimatedCost estimate_cost(const Catalog& catalog, const PlanForest& plan, const Query& q,
                            const LatencyModel& model) {
    LQO_CHECK(is_complete(plan, q), "estimate_cost requires a complete plan");
    EstimatedCost out;
    for (const auto& root : plan.roots)
        out.value += estimate_node(catalog, q, *root, model, out.est_cards).cost;
    return out;
}

namespace {

struct DpEntry {
    EstState st;
    PlanNodeRef plan;
};

/// Insert keeping, per delivered order, only (cost, card)-Pareto-optimal
/// entries. Exact ties keep the lexicographically smaller canonical key so
/// the DP result is independent of insertion order.
void pareto_insert(std::vector<DpEntry>& entries, DpEntry e) {
    for (auto it = entries.begin(); it != entries.end();) {
        if (it->st.order != e.st.order) {
            ++it;
            continue;
        }
        if (it->st.cost == e.st.cost && it->st.card == e.st.card) {
            if (canonical_key(*e.plan) < canonical_key(*it->plan)) *it = std::move(e);
            return;
        }
        if (it->st.cost <= e.st.cost && it->st.card <= e.st.card) return;  // dominated
        if (e.st.cost <= it->st.cost && e.st.card <= it->st.card)
            it = entries.erase(it);
        else
            ++it;
    }
    entries.push_back(std::move(e));
}

}  // namespace

PlanForest expert_plan(const Catalog& catalog, const Query& q, const LatencyModel& model,
                       bool allow_cross_products) {
    validate_query(q);
    int n = int(q.relations.size());
    LQO_CHECK(n <= 24, "query too large for the expert DP");

    uint32_t full = n == 32 ? ~0u : (1u << n) - 1;
    std::vector<std::vector<DpEntry>> table(full + 1);

    for (int i = 0; i < n; ++i) {
        RelationId rel = q.relations[size_t(i)];
        uint32_t mask = 1u << i;
        DpEntry t;
        t.st = scan_state(catalog, q, rel, ScanKind::table, model);
        t.plan = PlanNode::make_scan(ScanKind::table, rel);
        pareto_insert(table[mask], std::move(t));
        if (catalog.indexable(rel)) {
            DpEntry ix;
            ix.st = scan_state(catalog, q, rel, ScanKind::index, model);
            ix.plan = PlanNode::make_scan(ScanKind::index, rel);
            pareto_insert(table[mask], std::move(ix));
        }
    }

    auto rels_of = [&](uint32_t mask) {
        std::vector<RelationId> v;
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) v.push_back(q.relations[size_t(i)]);
        return v;
    };

    for (uint32_t mask = 1; mask <= full; ++mask) {
        if (std::popcount(mask) < 2) continue;
        for (uint32_t s = (mask - 1) & mask; s; s = (s - 1) & mask) {
            uint32_t t = mask ^ s;
            if (table[s].empty() || table[t].empty()) continue;
            auto keys = crossing_edges(catalog, q, rels_of(s), rels_of(t));
            if (!allow_cross_products && keys.empty()) continue;
            static constexpr JoinOp kOps[] = {JoinOp::merge, JoinOp::hash, JoinOp::loop};
            for (const auto& e1 : table[s])
                for (const auto& e2 : table[t])
                    for (JoinOp op : kOps) {
                        DpEntry cand;
                        cand.st = join_state(op, e1.st, e2.st, keys, model);
                        cand.plan = PlanNode::make_join(op, e1.plan, e2.plan);
                        pareto_insert(table[mask], std::move(cand));
                    }
        }
    }

    LQO_CHECK(!table[full].empty(), "expert DP found no plan (disconnected query?)");
    const DpEntry* best = &table[full][0];
    for (const auto& e : table[full]) {
        if (e.st.cost < best->st.cost) best = &e;
        else if (e.st.cost == best->st.cost &&
                 canonical_key(*e.plan) < canonical_key(*best->plan))
            best = &e;
    }
    PlanForest plan;
    plan.query_id = q.id;
    plan.roots = {best->plan};
    return plan;
}

}  // namespace lqo
