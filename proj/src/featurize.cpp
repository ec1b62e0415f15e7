#include "lqo/featurize.hpp"

#include <algorithm>
#include <string>

#include "lqo/simulator.hpp"

namespace lqo {

const char* to_string(FeatVariant v) {
    switch (v) {
        case FeatVariant::one_hot: return "one_hot";
        case FeatVariant::histogram: return "histogram";
        case FeatVariant::r_vector: return "r_vector";
    }
    throw ContractError("to_string: bad FeatVariant");
}

FeatVariant feat_variant_from_string(std::string_view s) {
    if (s == "one_hot") return FeatVariant::one_hot;
    if (s == "histogram") return FeatVariant::histogram;
    if (s == "r_vector") return FeatVariant::r_vector;
    throw ConfigError("unknown featurization variant: " + std::string(s));
}

int FeatureLayout::pair_bit(RelationId a, RelationId b) const {
    if (a > b) std::swap(a, b);
    LQO_CHECK(a >= 0 && a < b && b < num_relations, "pair_bit: bad relation pair");
    // Upper-triangular row-major: rows a contribute (R-1-a) bits each.
    int idx = 0;
    idx = a * (2 * num_relations - a - 1) / 2 + (b - a - 1);
    return idx;
}

int FeatureLayout::column_index(RelationId rel, int32_t col) const {
    LQO_CHECK(rel >= 0 && rel < num_relations, "column_index: relation out of range");
    const int width = col_offset[size_t(rel) + 1] - col_offset[size_t(rel)];
    LQO_CHECK(col >= 0 && col < width, "column_index: column out of range");
    return col_offset[size_t(rel)] + col;
}

FeatureLayout layout_from_catalog(const Catalog& catalog, FeatVariant variant,
                                  const EmbeddingModel* embeddings) {
    FeatureLayout layout;
    layout.num_relations = catalog.num_relations();
    layout.col_offset.assign(size_t(layout.num_relations) + 1, 0);
    for (RelationId t = 0; t < layout.num_relations; ++t)
        layout.col_offset[size_t(t) + 1] =
            layout.col_offset[size_t(t)] + int32_t(catalog.table(t).columns.size());
    if (variant == FeatVariant::r_vector) {
        if (!embeddings || embeddings->empty())
            throw ConfigError("r_vector featurization requires a trained embedding model");
        layout.emb_dim = embeddings->dim;
    }
    return layout;
}

std::vector<double> encode_query(const Query& q, const Catalog& catalog, FeatVariant variant,
                                 const EmbeddingModel* embeddings, const FeatureLayout& layout) {
    LQO_CHECK(layout.num_relations == catalog.num_relations(),
              "encode_query: layout does not match catalog");
    if (variant == FeatVariant::r_vector && (!embeddings || embeddings->empty()))
        throw ConfigError("encode_query: r_vector requires a trained embedding model");

    const int slot = layout.pred_slot_width(variant);
    std::vector<double> out(size_t(layout.query_width(variant)), 0.0);
    for (const JoinEdge& e : q.join_edges) out[size_t(layout.pair_bit(e.a, e.b))] = 1.0;

    const int base = layout.join_graph_bits();
    // Group predicates by column, preserving query order within a column.
    for (size_t start = 0; start < q.predicates.size(); ++start) {
        const ColumnPredicate& p = q.predicates[start];
        bool first = true;
        for (size_t j = 0; j < start; ++j)
            if (q.predicates[j].relation == p.relation && q.predicates[j].column == p.column)
                first = false;
        if (!first) continue;

        double* cell = out.data() + size_t(base) + size_t(layout.column_index(p.relation, p.column)) * size_t(slot);
        switch (variant) {
            case FeatVariant::one_hot:
                cell[0] = 1.0;
                break;
            case FeatVariant::histogram: {
                double sel = 1.0;
                for (size_t j = start; j < q.predicates.size(); ++j) {
                    const ColumnPredicate& pj = q.predicates[j];
                    if (pj.relation == p.relation && pj.column == p.column)
                        sel *= histogram_selectivity(catalog, pj);
                }
                cell[0] = sel;
                break;
            }
            case FeatVariant::r_vector: {
                int n = 0;
                for (size_t j = start; j < q.predicates.size(); ++j) {
                    const ColumnPredicate& pj = q.predicates[j];
                    if (pj.relation != p.relation || pj.column != p.column) continue;
                    const std::vector<double> v = embed_predicate(*embeddings, pj, catalog);
                    LQO_CHECK(int(v.size()) == slot, "encode_query: embedding width mismatch");
                    for (int k = 0; k < slot; ++k) cell[k] += v[size_t(k)];
                    ++n;
                }
                for (int k = 0; k < slot; ++k) cell[k] /= n;
                break;
            }
        }
    }
    return out;
}

template <class T>
void encode_scan_row(const FeatureLayout& layout, ScanKind kind, RelationId rel, T* out) {
    LQO_CHECK(rel >= 0 && rel < layout.num_relations, "encode_scan_row: relation out of range");
    std::fill(out, out + layout.node_width(), T(0));
    T* bits = out + layout.join_ops;
    switch (kind) {
        case ScanKind::table: bits[2 * rel] = T(1); break;
        case ScanKind::index: bits[2 * rel + 1] = T(1); break;
        case ScanKind::unspec:
            bits[2 * rel] = T(1);
            bits[2 * rel + 1] = T(1);
            break;
    }
}

template <class T>
void encode_join_row(const FeatureLayout& layout, JoinOp op, const T* left, const T* right, T* out) {
    const int w = layout.node_width();
    std::fill(out, out + w, T(0));
    const int slot = int(op);
    LQO_CHECK(slot < layout.join_ops, "encode_join_row: operator outside layout");
    out[slot] = T(1);
    for (int k = layout.join_ops; k < w; ++k)
        out[k] = (left[k] != T(0) || right[k] != T(0)) ? T(1) : T(0);
}

namespace {

template <class T>
int32_t add_node(const PlanNodeRef& node, const FeatureLayout& layout, nn::VecForest<T>& f) {
    const int32_t idx = int32_t(f.left.size());
    f.left.push_back(-1);
    f.right.push_back(-1);
    f.x.resize(f.x.size() + size_t(f.channels), T(0));
    if (node->is_scan()) {
        encode_scan_row(layout, node->scan_kind, node->relation, f.node(idx));
    } else {
        const int32_t l = add_node(node->left, layout, f);
        const int32_t r = add_node(node->right, layout, f);
        f.left[size_t(idx)] = l;
        f.right[size_t(idx)] = r;
        encode_join_row(layout, node->join_op, f.node(l), f.node(r), f.node(idx));
    }
    return idx;
}

}  // namespace

template <class T>
nn::VecForest<T> encode_plan(const PlanForest& plan, const FeatureLayout& layout) {
    LQO_CHECK(!plan.roots.empty(), "encode_plan: empty forest");
    nn::VecForest<T> f;
    f.channels = layout.node_width();
    for (const PlanNodeRef& root : plan.roots) f.roots.push_back(add_node(root, layout, f));
    return f;
}

#define LQO_FEAT_INSTANTIATE(T)                                                                  \
    template void encode_scan_row<T>(const FeatureLayout&, ScanKind, RelationId, T*);            \
    template void encode_join_row<T>(const FeatureLayout&, JoinOp, const T*, const T*, T*);      \
    template nn::VecForest<T> encode_plan<T>(const PlanForest&, const FeatureLayout&);

LQO_FEAT_INSTANTIATE(float)
LQO_FEAT_INSTANTIATE(double)

#undef LQO_FEAT_INSTANTIATE

}  // namespace lqo
