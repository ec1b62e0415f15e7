#include "lqo/plan.hpp"

#include <algorithm>
#include <charconv>

#include "lqo/json_io.hpp"

namespace lqo {

const char* to_string(JoinOp op) {
    switch (op) {
        case JoinOp::merge: return "merge";
        case JoinOp::hash: return "hash";
        case JoinOp::loop: return "loop";
    }
    throw ContractError("bad JoinOp");
}

const char* to_string(ScanKind kind) {
    switch (kind) {
        case ScanKind::table: return "table";
        case ScanKind::index: return "index";
        case ScanKind::unspec: return "unspec";
    }
    throw ContractError("bad ScanKind");
}

const char* to_string(PredOp op) {
    switch (op) {
        case PredOp::eq: return "eq";
        case PredOp::neq: return "neq";
        case PredOp::lt: return "lt";
        case PredOp::gt: return "gt";
        case PredOp::in_list: return "in";
        case PredOp::like_prefix: return "like";
    }
    throw ContractError("bad PredOp");
}

bool Query::has_relation(RelationId r) const {
    return std::binary_search(relations.begin(), relations.end(), r);
}

void validate_query(const Query& q) {
    if (q.relations.empty()) throw ContractError("query has no relations");
    for (size_t i = 1; i < q.relations.size(); ++i)
        if (q.relations[i - 1] >= q.relations[i])
            throw ContractError("query relations must be sorted and unique");
    for (const auto& e : q.join_edges) {
        if (e.a >= e.b) throw ContractError("join edge endpoints must satisfy a < b");
        if (!q.has_relation(e.a) || !q.has_relation(e.b))
            throw ContractError("join edge references a relation outside the query");
    }
    for (const auto& p : q.predicates)
        if (!q.has_relation(p.relation))
            throw ContractError("predicate references a relation outside the query");

    // Connectivity of the join graph over the participating relations.
    size_t n = q.relations.size();
    if (n == 1) return;
    std::vector<int> comp(n);
    for (size_t i = 0; i < n; ++i) comp[i] = int(i);
    auto find = [&](int x) {
        while (comp[x] != x) x = comp[x] = comp[comp[x]];
        return x;
    };
    auto idx_of = [&](RelationId r) {
        return int(std::lower_bound(q.relations.begin(), q.relations.end(), r) -
                   q.relations.begin());
    };
    for (const auto& e : q.join_edges) comp[find(idx_of(e.a))] = find(idx_of(e.b));
    int root = find(0);
    for (size_t i = 1; i < n; ++i)
        if (find(int(i)) != root) throw ContractError("query join graph is disconnected");
}

PlanNodeRef PlanNode::make_scan(ScanKind kind, RelationId rel) {
    LQO_CHECK(rel >= 0, "scan relation id must be non-negative");
    auto n = std::make_shared<PlanNode>();
    n->kind = Kind::scan;
    n->scan_kind = kind;
    n->relation = rel;
    return n;
}

PlanNodeRef PlanNode::make_join(JoinOp op, PlanNodeRef l, PlanNodeRef r) {
    LQO_CHECK(l && r, "join children must be non-null");
    auto n = std::make_shared<PlanNode>();
    n->kind = Kind::join;
    n->join_op = op;
    n->left = std::move(l);
    n->right = std::move(r);
    return n;
}

namespace {
void collect_leaves(const PlanNode& node, std::vector<RelationId>& out) {
    if (node.is_scan()) {
        out.push_back(node.relation);
        return;
    }
    collect_leaves(*node.left, out);
    collect_leaves(*node.right, out);
}
}  // namespace

std::vector<RelationId> leaf_relations(const PlanNode& node) {
    std::vector<RelationId> out;
    collect_leaves(node, out);
    std::sort(out.begin(), out.end());
    return out;
}

RelationId min_relation(const PlanNode& node) {
    if (node.is_scan()) return node.relation;
    return std::min(min_relation(*node.left), min_relation(*node.right));
}

namespace {
int count_unspec_node(const PlanNode& node) {
    if (node.is_scan()) return node.scan_kind == ScanKind::unspec ? 1 : 0;
    return count_unspec_node(*node.left) + count_unspec_node(*node.right);
}
}  // namespace

int count_unspecified(const PlanForest& plan) {
    int c = 0;
    for (const auto& r : plan.roots) c += count_unspec_node(*r);
    return c;
}

void validate_plan(const PlanForest& plan, const Query& q) {
    if (plan.query_id != q.id) throw ContractError("plan belongs to a different query");
    std::vector<RelationId> covered;
    for (const auto& r : plan.roots) {
        LQO_CHECK(r != nullptr, "plan root is null");
        collect_leaves(*r, covered);
    }
    std::sort(covered.begin(), covered.end());
    if (covered != q.relations)
        throw ContractError("plan leaves must cover the query relations exactly once");
}

bool is_complete(const PlanForest& plan, const Query& q) {
    LQO_CHECK(plan.query_id == q.id, "is_complete: plan does not belong to this query");
    if (plan.roots.size() != 1) return false;
    if (count_unspecified(plan) != 0) return false;
    return leaf_relations(*plan.roots[0]) == q.relations;
}

namespace {

/// All versions of `node` with exactly one unspecified scan replaced, leaves
/// visited in preorder, each leaf contributing a table scan then (when
/// allowed) an index scan.
void leaf_variants(const PlanNodeRef& node, const std::vector<bool>& indexable,
                   std::vector<PlanNodeRef>& out) {
    if (node->is_scan()) {
        if (node->scan_kind != ScanKind::unspec) return;
        RelationId r = node->relation;
        out.push_back(PlanNode::make_scan(ScanKind::table, r));
        if (size_t(r) < indexable.size() && indexable[r])
            out.push_back(PlanNode::make_scan(ScanKind::index, r));
        return;
    }
    std::vector<PlanNodeRef> sub;
    leaf_variants(node->left, indexable, sub);
    for (auto& v : sub) out.push_back(PlanNode::make_join(node->join_op, v, node->right));
    sub.clear();
    leaf_variants(node->right, indexable, sub);
    for (auto& v : sub) out.push_back(PlanNode::make_join(node->join_op, node->left, v));
}

bool sets_joined(const Query& q, const std::vector<RelationId>& a,
                 const std::vector<RelationId>& b) {
    for (const auto& e : q.join_edges) {
        bool ea_in_a = std::binary_search(a.begin(), a.end(), e.a);
        bool eb_in_a = std::binary_search(a.begin(), a.end(), e.b);
        bool ea_in_b = std::binary_search(b.begin(), b.end(), e.a);
        bool eb_in_b = std::binary_search(b.begin(), b.end(), e.b);
        if ((ea_in_a && eb_in_b) || (ea_in_b && eb_in_a)) return true;
    }
    return false;
}

}  // namespace

std::vector<PlanForest> children(const PlanForest& plan, const Query& q,
                                 const std::vector<bool>& indexable,
                                 bool allow_cross_products) {
    validate_plan(plan, q);
    std::vector<PlanForest> out;

    for (size_t ri = 0; ri < plan.roots.size(); ++ri) {
        std::vector<PlanNodeRef> vars;
        leaf_variants(plan.roots[ri], indexable, vars);
        for (auto& v : vars) {
            PlanForest c = plan;
            c.roots[ri] = std::move(v);
            out.push_back(std::move(c));
        }
    }

    if (plan.roots.size() < 2) return out;
    std::vector<std::vector<RelationId>> rels(plan.roots.size());
    for (size_t i = 0; i < plan.roots.size(); ++i) rels[i] = leaf_relations(*plan.roots[i]);

    static constexpr JoinOp kOps[] = {JoinOp::merge, JoinOp::hash, JoinOp::loop};
    for (size_t i = 0; i + 1 < plan.roots.size(); ++i) {
        for (size_t j = i + 1; j < plan.roots.size(); ++j) {
            if (!allow_cross_products && !sets_joined(q, rels[i], rels[j])) continue;
            for (JoinOp op : kOps) {
                for (int orient = 0; orient < 2; ++orient) {
                    PlanNodeRef l = orient == 0 ? plan.roots[i] : plan.roots[j];
                    PlanNodeRef r = orient == 0 ? plan.roots[j] : plan.roots[i];
                    PlanForest c;
                    c.query_id = plan.query_id;
                    c.roots = plan.roots;
                    c.roots[i] = PlanNode::make_join(op, std::move(l), std::move(r));
                    c.roots.erase(c.roots.begin() + ptrdiff_t(j));
                    out.push_back(std::move(c));
                }
            }
        }
    }
    return out;
}

namespace {

bool tree_matches(const PlanNode& part, const PlanNode& full) {
    if (part.is_scan()) {
        if (!full.is_scan() || part.relation != full.relation) return false;
        return part.scan_kind == ScanKind::unspec || part.scan_kind == full.scan_kind;
    }
    if (!full.is_join() || part.join_op != full.join_op) return false;
    return tree_matches(*part.left, *full.left) && tree_matches(*part.right, *full.right);
}

bool matches_some_subtree(const PlanNode& part, const PlanNode& full) {
    if (tree_matches(part, full)) return true;
    if (full.is_scan()) return false;
    return matches_some_subtree(part, *full.left) || matches_some_subtree(part, *full.right);
}

}  // namespace

bool is_subplan(const PlanForest& partial, const PlanForest& full) {
    if (partial.query_id != full.query_id)
        throw ContractError("is_subplan: plans belong to different queries");
    for (const auto& root : partial.roots) {
        bool found = false;
        for (const auto& f : full.roots)
            if (matches_some_subtree(*root, *f)) {
                found = true;
                break;
            }
        if (!found) return false;
    }
    return true;
}

namespace {
void key_node(const PlanNode& node, std::string& out) {
    if (node.is_scan()) {
        switch (node.scan_kind) {
            case ScanKind::table: out += 'T'; break;
            case ScanKind::index: out += 'I'; break;
            case ScanKind::unspec: out += 'U'; break;
        }
        out += std::to_string(node.relation);
        return;
    }
    out += '(';
    switch (node.join_op) {
        case JoinOp::merge: out += 'M'; break;
        case JoinOp::hash: out += 'H'; break;
        case JoinOp::loop: out += 'L'; break;
    }
    out += ' ';
    key_node(*node.left, out);
    out += ' ';
    key_node(*node.right, out);
    out += ')';
}
}  // namespace

std::string canonical_key(const PlanNode& node) {
    std::string s;
    key_node(node, s);
    return s;
}

std::string canonical_key(const PlanForest& plan) {
    std::vector<std::pair<RelationId, std::string>> keyed;
    keyed.reserve(plan.roots.size());
    for (const auto& r : plan.roots) keyed.emplace_back(min_relation(*r), canonical_key(*r));
    std::sort(keyed.begin(), keyed.end());
    std::string out;
    for (size_t i = 0; i < keyed.size(); ++i) {
        if (i) out += '|';
        out += keyed[i].second;
    }
    return out;
}

namespace {

struct KeyParser {
    std::string_view text;
    size_t pos = 0;

    [[noreturn]] void fail(const char* why) const {
        throw IntegrityError(std::string("bad plan key: ") + why);
    }
    char peek() const { return pos < text.size() ? text[pos] : '\0'; }
    void expect(char c) {
        if (peek() != c) fail("unexpected character");
        ++pos;
    }

    PlanNodeRef parse_node() {
        char c = peek();
        if (c == '(') {
            ++pos;
            JoinOp op;
            switch (peek()) {
                case 'M': op = JoinOp::merge; break;
                case 'H': op = JoinOp::hash; break;
                case 'L': op = JoinOp::loop; break;
                default: fail("unknown join letter");
            }
            ++pos;
            expect(' ');
            PlanNodeRef l = parse_node();
            expect(' ');
            PlanNodeRef r = parse_node();
            expect(')');
            return PlanNode::make_join(op, std::move(l), std::move(r));
        }
        ScanKind kind;
        switch (c) {
            case 'T': kind = ScanKind::table; break;
            case 'I': kind = ScanKind::index; break;
            case 'U': kind = ScanKind::unspec; break;
            default: fail("unknown scan letter");
        }
        ++pos;
        size_t start = pos;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') ++pos;
        if (pos == start) fail("missing relation id");
        RelationId rel = -1;
        std::from_chars(text.data() + start, text.data() + pos, rel);
        return PlanNode::make_scan(kind, rel);
    }
};

}  // namespace

PlanForest parse_canonical_key(const std::string& key, int32_t query_id) {
    PlanForest plan;
    plan.query_id = query_id;
    KeyParser p{key};
    while (true) {
        plan.roots.push_back(p.parse_node());
        if (p.pos == key.size()) break;
        p.expect('|');
    }
    return plan;
}

namespace {
ScanKind scan_kind_of(const PlanNode& node, RelationId rel) {
    if (node.is_scan()) {
        if (node.relation == rel) return node.scan_kind;
        throw ContractError("relation not found under node");
    }
    std::vector<RelationId> l = leaf_relations(*node.left);
    if (std::binary_search(l.begin(), l.end(), rel)) return scan_kind_of(*node.left, rel);
    return scan_kind_of(*node.right, rel);
}

void postorder_joins(const PlanNodeRef& node, std::vector<const PlanNode*>& out) {
    if (node->is_scan()) return;
    postorder_joins(node->left, out);
    postorder_joins(node->right, out);
    out.push_back(node.get());
}
}  // namespace

std::vector<PlanForest> construction_states(const PlanForest& complete, const Query& q) {
    LQO_CHECK(is_complete(complete, q), "construction_states requires a complete plan");
    std::vector<PlanForest> states;
    states.reserve(2 * q.relations.size());

    PlanForest cur;
    cur.query_id = q.id;
    for (RelationId r : q.relations) cur.roots.push_back(PlanNode::make_scan(ScanKind::unspec, r));
    states.push_back(cur);

    const PlanNode& final_root = *complete.roots[0];
    for (size_t i = 0; i < q.relations.size(); ++i) {
        RelationId r = q.relations[i];
        cur.roots[i] = PlanNode::make_scan(scan_kind_of(final_root, r), r);
        states.push_back(cur);
    }

    std::vector<const PlanNode*> joins;
    postorder_joins(complete.roots[0], joins);
    for (const PlanNode* jn : joins) {
        std::string lk = canonical_key(*jn->left);
        std::string rk = canonical_key(*jn->right);
        size_t li = SIZE_MAX, ri = SIZE_MAX;
        for (size_t k = 0; k < cur.roots.size(); ++k) {
            std::string key = canonical_key(*cur.roots[k]);
            if (key == lk) li = k;
            else if (key == rk) ri = k;
        }
        LQO_CHECK(li != SIZE_MAX && ri != SIZE_MAX, "construction state bookkeeping broke");
        size_t lo = std::min(li, ri), hi = std::max(li, ri);
        cur.roots[lo] = PlanNode::make_join(jn->join_op, cur.roots[li], cur.roots[ri]);
        cur.roots.erase(cur.roots.begin() + ptrdiff_t(hi));
        states.push_back(cur);
    }
    return states;
}

namespace {
nlohmann::json node_to_json(const PlanNode& node) {
    nlohmann::json j;
    if (node.is_scan()) {
        j["scan"] = to_string(node.scan_kind);
        j["rel"] = node.relation;
    } else {
        j["join"] = to_string(node.join_op);
        j["l"] = node_to_json(*node.left);
        j["r"] = node_to_json(*node.right);
    }
    return j;
}

PlanNodeRef node_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw IntegrityError("plan node must be a JSON object");
    if (j.contains("scan")) {
        std::string kind = j.at("scan").get<std::string>();
        ScanKind k;
        if (kind == "table") k = ScanKind::table;
        else if (kind == "index") k = ScanKind::index;
        else if (kind == "unspec") k = ScanKind::unspec;
        else throw IntegrityError("unknown scan kind: " + kind);
        return PlanNode::make_scan(k, j.at("rel").get<RelationId>());
    }
    if (j.contains("join")) {
        std::string op = j.at("join").get<std::string>();
        JoinOp o;
        if (op == "merge") o = JoinOp::merge;
        else if (op == "hash") o = JoinOp::hash;
        else if (op == "loop") o = JoinOp::loop;
        else throw IntegrityError("unknown join op: " + op);
        return PlanNode::make_join(o, node_from_json(j.at("l")), node_from_json(j.at("r")));
    }
    throw IntegrityError("plan node needs a 'scan' or 'join' field");
}
}  // namespace

nlohmann::json plan_to_json(const PlanForest& plan) {
    nlohmann::json j;
    j["query"] = plan.query_id;
    j["roots"] = nlohmann::json::array();
    for (const auto& r : plan.roots) j["roots"].push_back(node_to_json(*r));
    return j;
}

PlanForest plan_from_json(const nlohmann::json& j) {
    PlanForest plan;
    try {
        plan.query_id = j.at("query").get<int32_t>();
        for (const auto& r : j.at("roots")) plan.roots.push_back(node_from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed plan json: ") + e.what());
    }
    if (plan.roots.empty()) throw IntegrityError("plan json has no roots");
    return plan;
}

nlohmann::json query_to_json(const Query& q) {
    nlohmann::json j;
    j["id"] = q.id;
    j["relations"] = q.relations;
    j["join_edges"] = nlohmann::json::array();
    for (const auto& e : q.join_edges)
        j["join_edges"].push_back({e.a, e.a_col, e.b, e.b_col});
    j["predicates"] = nlohmann::json::array();
    for (const auto& p : q.predicates) {
        nlohmann::json pj;
        pj["rel"] = p.relation;
        pj["col"] = p.column;
        pj["op"] = to_string(p.op);
        pj["values"] = p.values;
        j["predicates"].push_back(pj);
    }
    return j;
}

Query query_from_json(const nlohmann::json& j) {
    Query q;
    try {
        q.id = j.at("id").get<int32_t>();
        q.relations = j.at("relations").get<std::vector<RelationId>>();
        for (const auto& e : j.at("join_edges")) {
            JoinEdge edge;
            edge.a = e.at(0).get<RelationId>();
            edge.a_col = e.at(1).get<int32_t>();
            edge.b = e.at(2).get<RelationId>();
            edge.b_col = e.at(3).get<int32_t>();
            q.join_edges.push_back(edge);
        }
        for (const auto& pj : j.at("predicates")) {
            ColumnPredicate p;
            p.relation = pj.at("rel").get<RelationId>();
            p.column = pj.at("col").get<int32_t>();
            std::string op = pj.at("op").get<std::string>();
            if (op == "eq") p.op = PredOp::eq;
            else if (op == "neq") p.op = PredOp::neq;
            else if (op == "lt") p.op = PredOp::lt;
            else if (op == "gt") p.op = PredOp::gt;
            else if (op == "in") p.op = PredOp::in_list;
            else if (op == "like") p.op = PredOp::like_prefix;
            else throw IntegrityError("unknown predicate op: " + op);
            p.values = pj.at("values").get<std::vector<int64_t>>();
            q.predicates.push_back(p);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("malformed query json: ") + e.what());
    }
    validate_query(q);
    return q;
}

}  // namespace lqo
