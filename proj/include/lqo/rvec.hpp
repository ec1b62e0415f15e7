#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lqo/catalog.hpp"
#include "lqo/plan.hpp"

namespace lqo {

/// Skip-gram-with-negative-sampling hyperparameters for the row-value
/// embedding. All defaults are pinned so training is reproducible.
struct SgnsParams {
    int dim = 16;
    int window = 5;
    int negatives = 5;
    int epochs = 8;
    double lr = 0.05;
    int min_count = 2;
    uint64_t seed = 1;
};

/// Learned token embeddings over "table.column=value" tokens, plus the
/// bookkeeping needed to resolve predicates against the vocabulary.
struct EmbeddingModel {
    int dim = 0;
    std::vector<std::string> vocab;  ///< index -> token, first-occurrence order
    std::vector<int64_t> counts;     ///< corpus occurrences per kept token
    std::vector<double> vectors;     ///< vocab x dim input-side vectors, row-major
    std::unordered_map<std::string, int32_t> index;
    /// "table.column" -> (value, vocab index), sorted ascending by value.
    std::unordered_map<std::string, std::vector<std::pair<int64_t, int32_t>>> column_values;

    bool empty() const { return vocab.empty(); }
    const double* vec(int32_t i) const { return vectors.data() + size_t(i) * size_t(dim); }
};

/// One sentence per row of every table, tokens in column order. With
/// `denormalize` set, adds one extra sentence per fact-table row holding the
/// fact row's tokens followed by the tokens of every FK-referenced dimension
/// row, so values that co-occur across a join share contexts.
std::vector<std::vector<std::string>> build_sentences(const Catalog& catalog, bool denormalize);

/// Standard SGNS trained in corpus order with a deterministic generator.
/// Returns the model; `epoch_loss`, when given, receives the mean per-pair
/// loss of each epoch (computed before each update).
EmbeddingModel train_embeddings(const std::vector<std::vector<std::string>>& sentences,
                                const SgnsParams& params,
                                std::vector<double>* epoch_loss = nullptr);

/// Fixed width of one per-column predicate slot: 6 operator one-hot entries,
/// a matched-token count, `dim` embedding values, and a corpus-occurrence
/// total.
inline int rvec_width(int dim) { return 8 + dim; }

/// Encodes one predicate into a slot of width rvec_width(model.dim).
/// Equality and inequality look up the literal's token; IN-lists average all
/// in-vocabulary members; prefix predicates average every column value whose
/// decimal spelling starts with the literal; range predicates use the nearest
/// in-vocabulary value to the boundary (ties toward the smaller value).
/// Out-of-vocabulary lookups leave the embedding and count entries at zero.
std::vector<double> embed_predicate(const EmbeddingModel& model, const ColumnPredicate& pred,
                                    const Catalog& catalog);

/// Cosine similarity between two tokens' vectors; ConfigError if either is
/// out of vocabulary.
double embedding_cosine(const EmbeddingModel& model, const std::string& a, const std::string& b);

std::string value_token(const Catalog& catalog, RelationId rel, int32_t col, int64_t value);

void save_embeddings(const EmbeddingModel& model, const std::string& path);
EmbeddingModel load_embeddings(const std::string& path);

}  // namespace lqo
