#include "lqo/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

namespace lqo {

bool predicate_matches(const ColumnPredicate& pred, int64_t value) {
    switch (pred.op) {
        case PredOp::eq: return value == pred.values.at(0);
        case PredOp::neq: return value != pred.values.at(0);
        case PredOp::lt: return value < pred.values.at(0);
        case PredOp::gt: return value > pred.values.at(0);
        case PredOp::in_list:
            return std::find(pred.values.begin(), pred.values.end(), value) != pred.values.end();
        case PredOp::like_prefix: {
            std::string s = std::to_string(value);
            std::string p = std::to_string(pred.values.at(0));
            return s.compare(0, p.size(), p) == 0;
        }
    }
    throw ContractError("bad PredOp");
}

namespace {

double bucket_width(const ColumnHistogram& h) {
    return (h.hi - h.lo) / double(h.counts.size());
}

int bucket_of(const ColumnHistogram& h, double v) {
    int b = int((v - h.lo) / bucket_width(h));
    return std::clamp(b, 0, int(h.counts.size()) - 1);
}

double selectivity_eq(const ColumnHistogram& h, int64_t v) {
    if (h.rows == 0) return 0.0;
    if (double(v) < h.lo || double(v) >= h.hi) return 0.0;
    int b = bucket_of(h, double(v));
    if (h.counts[size_t(b)] <= 0 || h.distinct[size_t(b)] <= 0) return 0.0;
    return double(h.counts[size_t(b)]) / double(h.rows) / double(h.distinct[size_t(b)]);
}

/// P(value < v) assuming uniformity inside buckets.
double selectivity_lt(const ColumnHistogram& h, double v) {
    if (h.rows == 0) return 0.0;
    if (v <= h.lo) return 0.0;
    if (v >= h.hi) return 1.0;
    double w = bucket_width(h);
    int b = bucket_of(h, v);
    double acc = 0.0;
    for (int i = 0; i < b; ++i) acc += double(h.counts[size_t(i)]);
    double frac = (v - (h.lo + b * w)) / w;
    acc += frac * double(h.counts[size_t(b)]);
    return std::clamp(acc / double(h.rows), 0.0, 1.0);
}

double selectivity_range(const ColumnHistogram& h, double lo, double hi) {
    return std::max(0.0, selectivity_lt(h, hi) - selectivity_lt(h, lo));
}

}  // namespace

double histogram_selectivity(const Catalog& catalog, const ColumnPredicate& pred) {
    const ColumnHistogram& h = catalog.histogram(pred.relation, pred.column);
    LQO_CHECK(!pred.values.empty(), "predicate has no literal");
    double sel = 0.0;
    switch (pred.op) {
        case PredOp::eq:
            sel = selectivity_eq(h, pred.values[0]);
            break;
        case PredOp::neq:
            sel = 1.0 - selectivity_eq(h, pred.values[0]);
            break;
        case PredOp::lt:
            sel = selectivity_lt(h, double(pred.values[0]));
            break;
        case PredOp::gt:
            sel = 1.0 - selectivity_lt(h, double(pred.values[0])) -
                  selectivity_eq(h, pred.values[0]);
            break;
        case PredOp::in_list: {
            std::vector<int64_t> vals = pred.values;
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (int64_t v : vals) sel += selectivity_eq(h, v);
            break;
        }
        case PredOp::like_prefix: {
            int64_t p = pred.values[0];
            LQO_CHECK(p >= 0, "like prefix literal must be non-negative");
            if (p == 0) {
                sel = selectivity_eq(h, 0);
            } else {
                // A decimal prefix covers the value intervals
                // [p*10^k, (p+1)*10^k) for k = 0, 1, ...
                for (double scale = 1.0; p * scale < h.hi; scale *= 10.0)
                    sel += selectivity_range(h, double(p) * scale, double(p + 1) * scale);
            }
            break;
        }
    }
    return std::clamp(sel, 0.0, 1.0);
}

namespace {

/// Materialized intermediate result: which relations it covers and, per
/// output tuple, one row index per covered relation.
struct Intermediate {
    std::vector<RelationId> rels;
    std::vector<std::vector<int32_t>> tuples;
    double cost = 0.0;
    /// Columns the tuples arrive ordered by, as (relation, column) pairs.
    std::vector<std::pair<RelationId, int32_t>> order;
};

struct Executor {
    const Catalog& cat;
    const Query& q;
    const LatencyModel& m;

    Intermediate eval_scan(const PlanNode& node) const {
        Intermediate out;
        RelationId r = node.relation;
        LQO_CHECK(q.has_relation(r), "scan of a relation outside the query");
        out.rels = {r};
        int64_t nrows = cat.row_count(r);
        for (int32_t row = 0; row < nrows; ++row) {
            bool pass = true;
            for (const auto& p : q.predicates) {
                if (p.relation != r) continue;
                if (!predicate_matches(p, cat.rows[size_t(r)][size_t(row)][size_t(p.column)])) {
                    pass = false;
                    break;
                }
            }
            if (pass) out.tuples.push_back({row});
        }
        switch (node.scan_kind) {
            case ScanKind::table:
            case ScanKind::unspec:
                out.cost = m.c_ts * double(nrows);
                break;
            case ScanKind::index:
                out.cost = m.c_io + m.c_is * double(out.tuples.size());
                out.order = {{r, 0}};
                break;
        }
        return out;
    }

    int rel_pos(const Intermediate& in, RelationId r) const {
        auto it = std::find(in.rels.begin(), in.rels.end(), r);
        return it == in.rels.end() ? -1 : int(it - in.rels.begin());
    }

    Intermediate eval_join(const PlanNode& node) const {
        Intermediate l = eval(*node.left);
        Intermediate r = eval(*node.right);

        // Crossing join edges, in the query's edge order. The first one acts
        // as the merge key.
        struct Key {
            int l_pos, r_pos;
            int32_t l_col, r_col;
            RelationId l_rel, r_rel;
        };
        std::vector<Key> keys;
        for (const auto& e : q.join_edges) {
            int la = rel_pos(l, e.a), lb = rel_pos(l, e.b);
            int ra = rel_pos(r, e.a), rb = rel_pos(r, e.b);
            if (la >= 0 && rb >= 0) keys.push_back({la, rb, e.a_col, e.b_col, e.a, e.b});
            else if (lb >= 0 && ra >= 0) keys.push_back({lb, ra, e.b_col, e.a_col, e.b, e.a});
        }

        Intermediate out;
        out.rels = l.rels;
        out.rels.insert(out.rels.end(), r.rels.begin(), r.rels.end());

        auto key_of = [&](const Intermediate& side, const std::vector<int32_t>& tup,
                          bool left_side) {
            uint64_t h = 0xcbf29ce484222325ull;
            for (const auto& k : keys) {
                int pos = left_side ? k.l_pos : k.r_pos;
                RelationId rel = left_side ? k.l_rel : k.r_rel;
                int32_t col = left_side ? k.l_col : k.r_col;
                int64_t v = cat.rows[size_t(rel)][size_t(tup[size_t(pos)])][size_t(col)];
                h ^= uint64_t(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
                (void)side;
            }
            return h;
        };
        auto keys_equal = [&](const std::vector<int32_t>& lt, const std::vector<int32_t>& rt) {
            for (const auto& k : keys) {
                int64_t lv = cat.rows[size_t(k.l_rel)][size_t(lt[size_t(k.l_pos)])][size_t(k.l_col)];
                int64_t rv = cat.rows[size_t(k.r_rel)][size_t(rt[size_t(k.r_pos)])][size_t(k.r_col)];
                if (lv != rv) return false;
            }
            return true;
        };

        if (keys.empty()) {
            if (l.tuples.size() * r.tuples.size() > 50'000'000ull)
                throw ContractError("cross product too large to materialize");
            for (const auto& lt : l.tuples)
                for (const auto& rt : r.tuples) {
                    std::vector<int32_t> tup = lt;
                    tup.insert(tup.end(), rt.begin(), rt.end());
                    out.tuples.push_back(std::move(tup));
                }
        } else {
            std::unordered_map<uint64_t, std::vector<size_t>> table;
            table.reserve(r.tuples.size() * 2);
            for (size_t i = 0; i < r.tuples.size(); ++i)
                table[key_of(r, r.tuples[i], false)].push_back(i);
            for (const auto& lt : l.tuples) {
                auto it = table.find(key_of(l, lt, true));
                if (it == table.end()) continue;
                for (size_t ri : it->second) {
                    if (!keys_equal(lt, r.tuples[ri])) continue;
                    std::vector<int32_t> tup = lt;
                    tup.insert(tup.end(), r.tuples[ri].begin(), r.tuples[ri].end());
                    out.tuples.push_back(std::move(tup));
                }
            }
        }

        double nl = double(l.tuples.size());
        double nr = double(r.tuples.size());
        double no = double(out.tuples.size());
        double cost = l.cost + r.cost;
        switch (node.join_op) {
            case JoinOp::loop:
                cost += m.c_l * nl * nr;
                break;
            case JoinOp::hash:
                cost += m.c_hb * nl + m.c_hp * nr + m.c_ho * no;
                break;
            case JoinOp::merge: {
                auto sorted_on = [](const Intermediate& side, RelationId rel, int32_t col) {
                    return std::find(side.order.begin(), side.order.end(),
                                     std::make_pair(rel, col)) != side.order.end();
                };
                bool l_sorted = !keys.empty() && sorted_on(l, keys[0].l_rel, keys[0].l_col);
                bool r_sorted = !keys.empty() && sorted_on(r, keys[0].r_rel, keys[0].r_col);
                auto sort_pen = [&](double x) { return m.c_s * x * std::log2(x + 1.0); };
                cost += m.c_m * (nl + nr) + m.c_ho * no;
                if (!l_sorted) cost += sort_pen(nl);
                if (!r_sorted) cost += sort_pen(nr);
                if (!keys.empty())
                    out.order = {{keys[0].l_rel, keys[0].l_col}, {keys[0].r_rel, keys[0].r_col}};
                break;
            }
        }
        out.cost = cost;
        return out;
    }

    Intermediate eval(const PlanNode& node) const {
        return node.is_scan() ? eval_scan(node) : eval_join(node);
    }
};

}  // namespace

namespace {
bool has_unspecified(const PlanNode& node) {
    if (node.is_scan()) return node.scan_kind == ScanKind::unspec;
    return has_unspecified(*node.left) || has_unspecified(*node.right);
}
}  // namespace

int64_t true_cardinality(const Catalog& catalog, const PlanNode& node, const Query& q) {
    LQO_CHECK(!has_unspecified(node), "true_cardinality: unspecified scan in subtree");
    LatencyModel m;
    Executor ex{catalog, q, m};
    return int64_t(ex.eval(node).tuples.size());
}

double simulate_latency(const Catalog& catalog, const PlanForest& plan, const Query& q,
                        const LatencyModel& model) {
    LQO_CHECK(is_complete(plan, q), "simulate_latency requires a complete plan");
    Executor ex{catalog, q, model};
    double total = ex.eval(*plan.roots[0]).cost;
    if (model.noise_sigma > 0.0) {
        uint64_t stream = model.noise_seed ^ fnv1a64(canonical_key(plan));
        Rng rng(stream);
        total *= std::exp(model.noise_sigma * rng.next_gaussian());
    }
    return total;
}

}  // namespace lqo
