#pragma once

#include <string_view>
#include <vector>

#include "lqo/catalog.hpp"
#include "lqo/nn.hpp"
#include "lqo/plan.hpp"
#include "lqo/rvec.hpp"

namespace lqo {

/// How column predicates are summarized in the query vector.
enum class FeatVariant { one_hot = 0, histogram = 1, r_vector = 2 };

const char* to_string(FeatVariant v);
FeatVariant feat_variant_from_string(std::string_view s);

/// Fixed positional layout shared by query and plan encodings. Relation and
/// column order follow the catalog; join operators occupy the leading node
/// slots in enum order (merge, hash, loop).
struct FeatureLayout {
    int join_ops = 3;
    int num_relations = 0;
    std::vector<int32_t> col_offset;  ///< per-relation prefix sums, size R+1
    int emb_dim = 0;                  ///< embedding width for r_vector, else 0

    int total_columns() const { return col_offset.empty() ? 0 : col_offset.back(); }
    int join_graph_bits() const { return num_relations * (num_relations - 1) / 2; }
    int node_width() const { return join_ops + 2 * num_relations; }
    int pred_slot_width(FeatVariant v) const {
        return v == FeatVariant::r_vector ? rvec_width(emb_dim) : 1;
    }
    int query_width(FeatVariant v) const {
        return join_graph_bits() + total_columns() * pred_slot_width(v);
    }
    /// Index of the join-graph bit for the unordered relation pair {a, b}.
    int pair_bit(RelationId a, RelationId b) const;
    /// Flat column index for (relation, column).
    int column_index(RelationId rel, int32_t col) const;
};

FeatureLayout layout_from_catalog(const Catalog& catalog, FeatVariant variant,
                                  const EmbeddingModel* embeddings);

/// Query vector: upper-triangular join-graph bits, then one predicate slot
/// per catalog column. one_hot marks predicated columns with 1; histogram
/// stores the product of the column's predicate selectivities; r_vector
/// stores embed_predicate output (element-wise mean when a column carries
/// several predicates). r_vector without a model throws ConfigError.
std::vector<double> encode_query(const Query& q, const Catalog& catalog, FeatVariant variant,
                                 const EmbeddingModel* embeddings, const FeatureLayout& layout);

/// Plan-node row: join-operator one-hot, then per-relation (table, index)
/// scan bits. Unspecified scans set both bits; internal nodes take the union
/// of their children's relation bits.
template <class T>
void encode_scan_row(const FeatureLayout& layout, ScanKind kind, RelationId rel, T* out);

template <class T>
void encode_join_row(const FeatureLayout& layout, JoinOp op, const T* left, const T* right, T* out);

/// Whole plan forest as one arena in root order, preorder within each tree.
template <class T>
nn::VecForest<T> encode_plan(const PlanForest& plan, const FeatureLayout& layout);

}  // namespace lqo
