#include "lqo/rvec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lqo/common.hpp"

namespace lqo {

namespace {

std::string column_key(const std::string& table, const std::string& column) {
    return table + "." + column;
}

void index_column_values(EmbeddingModel& model) {
    model.column_values.clear();
    for (int32_t i = 0; i < int32_t(model.vocab.size()); ++i) {
        const std::string& tok = model.vocab[size_t(i)];
        const size_t eq = tok.rfind('=');
        if (eq == std::string::npos) throw IntegrityError("embedding token lacks '=': " + tok);
        int64_t value = 0;
        const char* b = tok.data() + eq + 1;
        const char* e = tok.data() + tok.size();
        auto res = std::from_chars(b, e, value);
        if (res.ec != std::errc() || res.ptr != e)
            throw IntegrityError("embedding token has non-numeric value: " + tok);
        model.column_values[tok.substr(0, eq)].emplace_back(value, i);
    }
    for (auto& [key, vals] : model.column_values) std::sort(vals.begin(), vals.end());
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::string value_token(const Catalog& catalog, RelationId rel, int32_t col, int64_t value) {
    const TableDef& t = catalog.table(rel);
    LQO_CHECK(col >= 0 && size_t(col) < t.columns.size(), "value_token: column out of range");
    return t.name + "." + t.columns[size_t(col)].name + "=" + std::to_string(value);
}

std::vector<std::vector<std::string>> build_sentences(const Catalog& catalog, bool denormalize) {
    std::vector<std::vector<std::string>> sentences;
    const int R = catalog.num_relations();
    for (RelationId t = 0; t < R; ++t) {
        const TableDef& def = catalog.table(t);
        for (int64_t r = 0; r < def.row_count; ++r) {
            std::vector<std::string> s;
            s.reserve(def.columns.size());
            for (size_t c = 0; c < def.columns.size(); ++c)
                s.push_back(value_token(catalog, t, int32_t(c), catalog.rows[size_t(t)][size_t(r)][c]));
            sentences.push_back(std::move(s));
        }
    }
    if (denormalize) {
        for (RelationId t = 0; t < R; ++t) {
            const TableDef& def = catalog.table(t);
            if (def.fk_edges.empty()) continue;
            for (int64_t r = 0; r < def.row_count; ++r) {
                std::vector<std::string> s;
                for (size_t c = 0; c < def.columns.size(); ++c)
                    s.push_back(
                        value_token(catalog, t, int32_t(c), catalog.rows[size_t(t)][size_t(r)][c]));
                for (const FkEdge& fk : def.fk_edges) {
                    const int64_t key = catalog.rows[size_t(t)][size_t(r)][size_t(fk.column)];
                    const TableDef& dim = catalog.table(fk.ref_table);
                    LQO_CHECK(key >= 0 && key < dim.row_count,
                              "build_sentences: dangling foreign key");
                    for (size_t c = 0; c < dim.columns.size(); ++c)
                        s.push_back(value_token(catalog, fk.ref_table, int32_t(c),
                                                catalog.rows[size_t(fk.ref_table)][size_t(key)][c]));
                }
                sentences.push_back(std::move(s));
            }
        }
    }
    return sentences;
}

EmbeddingModel train_embeddings(const std::vector<std::vector<std::string>>& sentences,
                                const SgnsParams& params, std::vector<double>* epoch_loss) {
    if (sentences.empty()) throw ConfigError("train_embeddings: empty corpus");
    LQO_CHECK(params.dim > 0 && params.window > 0 && params.negatives >= 0 && params.epochs > 0,
              "train_embeddings: invalid hyperparameters");

    // Vocabulary in first-occurrence order, then min-count filter.
    std::unordered_map<std::string, int64_t> freq;
    std::vector<std::string> order;
    for (const auto& s : sentences)
        for (const auto& tok : s) {
            auto [it, fresh] = freq.try_emplace(tok, 0);
            if (fresh) order.push_back(tok);
            ++it->second;
        }
    EmbeddingModel model;
    model.dim = params.dim;
    for (const auto& tok : order) {
        const int64_t n = freq[tok];
        if (n >= params.min_count) {
            model.index.emplace(tok, int32_t(model.vocab.size()));
            model.vocab.push_back(tok);
            model.counts.push_back(n);
        }
    }
    if (model.vocab.empty())
        throw ConfigError("train_embeddings: no token meets min_count");

    const int V = int(model.vocab.size()), D = params.dim;

    // Corpus as id sequences with filtered tokens dropped.
    std::vector<std::vector<int32_t>> corpus;
    corpus.reserve(sentences.size());
    int64_t total_tokens = 0;
    for (const auto& s : sentences) {
        std::vector<int32_t> ids;
        ids.reserve(s.size());
        for (const auto& tok : s) {
            auto it = model.index.find(tok);
            if (it != model.index.end()) ids.push_back(it->second);
        }
        total_tokens += int64_t(ids.size());
        corpus.push_back(std::move(ids));
    }
    LQO_CHECK(total_tokens > 0, "train_embeddings: corpus empty after min_count filter");

    // Unigram^0.75 cumulative table for negative sampling.
    std::vector<double> cum(static_cast<size_t>(V));
    double running = 0.0;
    for (int i = 0; i < V; ++i) {
        running += std::pow(double(model.counts[size_t(i)]), 0.75);
        cum[size_t(i)] = running;
    }

    Rng rng(params.seed);
    model.vectors.assign(size_t(V) * size_t(D), 0.0);
    std::vector<double> ctx(size_t(V) * size_t(D), 0.0);
    for (auto& w : model.vectors) w = (rng.next_double() - 0.5) / D;

    auto sample_negative = [&]() {
        const double r = rng.next_double() * running;
        const auto it = std::lower_bound(cum.begin(), cum.end(), r);
        return int32_t(std::min<size_t>(size_t(it - cum.begin()), size_t(V - 1)));
    };

    const int64_t total_positions = int64_t(params.epochs) * total_tokens;
    int64_t seen = 0;
    std::vector<double> grad_in(static_cast<size_t>(D));
    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        double loss_sum = 0.0;
        int64_t loss_pairs = 0;
        for (const auto& ids : corpus) {
            const int n = int(ids.size());
            for (int i = 0; i < n; ++i, ++seen) {
                const double progress = double(seen) / double(total_positions);
                const double lr = params.lr * std::max(1e-4, 1.0 - progress);
                const int b = 1 + int(rng.next_below(uint64_t(params.window)));
                const int32_t center = ids[size_t(i)];
                double* vin = model.vectors.data() + size_t(center) * size_t(D);
                for (int j = std::max(0, i - b); j <= std::min(n - 1, i + b); ++j) {
                    if (j == i) continue;
                    const int32_t pos = ids[size_t(j)];
                    std::fill(grad_in.begin(), grad_in.end(), 0.0);
                    // Positive pair plus sampled negatives, logistic loss.
                    for (int neg = 0; neg <= params.negatives; ++neg) {
                        int32_t target;
                        double label;
                        if (neg == 0) {
                            target = pos;
                            label = 1.0;
                        } else {
                            target = sample_negative();
                            if (target == pos) continue;
                            label = 0.0;
                        }
                        double* u = ctx.data() + size_t(target) * size_t(D);
                        double dot = 0.0;
                        for (int k = 0; k < D; ++k) dot += vin[k] * u[k];
                        const double p = sigmoid(dot);
                        loss_sum += label > 0.5 ? -std::log(std::max(p, 1e-12))
                                                : -std::log(std::max(1.0 - p, 1e-12));
                        ++loss_pairs;
                        const double g = (p - label) * lr;
                        for (int k = 0; k < D; ++k) {
                            grad_in[size_t(k)] += g * u[k];
                            u[k] -= g * vin[k];
                        }
                    }
                    for (int k = 0; k < D; ++k) vin[k] -= grad_in[size_t(k)];
                }
            }
        }
        if (epoch_loss) epoch_loss->push_back(loss_pairs ? loss_sum / double(loss_pairs) : 0.0);
    }

    index_column_values(model);
    return model;
}

namespace {

struct Matched {
    int matched = 0;
    int64_t count_sum = 0;
    std::vector<double> mean;  // dim wide
};

void add_token(const EmbeddingModel& model, int32_t idx, Matched& m) {
    ++m.matched;
    m.count_sum += model.counts[size_t(idx)];
    const double* v = model.vec(idx);
    for (int k = 0; k < model.dim; ++k) m.mean[size_t(k)] += v[k];
}

}  // namespace

std::vector<double> embed_predicate(const EmbeddingModel& model, const ColumnPredicate& pred,
                                    const Catalog& catalog) {
    if (model.empty()) throw ConfigError("embed_predicate: empty embedding model");
    const TableDef& t = catalog.table(pred.relation);
    LQO_CHECK(pred.column >= 0 && size_t(pred.column) < t.columns.size(),
              "embed_predicate: column out of range");
    LQO_CHECK(!pred.values.empty(), "embed_predicate: predicate without literals");

    const std::string key = column_key(t.name, t.columns[size_t(pred.column)].name);
    const auto vals_it = model.column_values.find(key);
    static const std::vector<std::pair<int64_t, int32_t>> kNone;
    const auto& vals = vals_it == model.column_values.end() ? kNone : vals_it->second;

    Matched m;
    m.mean.assign(size_t(model.dim), 0.0);

    auto lookup_exact = [&](int64_t value) {
        const auto it = model.index.find(value_token(catalog, pred.relation, pred.column, value));
        if (it != model.index.end()) add_token(model, it->second, m);
    };

    switch (pred.op) {
        case PredOp::eq:
        case PredOp::neq:
            lookup_exact(pred.values.front());
            break;
        case PredOp::in_list: {
            std::vector<int64_t> uniq(pred.values);
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            for (int64_t v : uniq) lookup_exact(v);
            break;
        }
        case PredOp::like_prefix: {
            LQO_CHECK(pred.values.front() >= 0, "embed_predicate: negative prefix literal");
            const std::string prefix = std::to_string(pred.values.front());
            for (const auto& [value, idx] : vals) {
                const std::string s = std::to_string(value);
                if (s.size() >= prefix.size() && s.compare(0, prefix.size(), prefix) == 0)
                    add_token(model, idx, m);
            }
            break;
        }
        case PredOp::lt:
        case PredOp::gt: {
            if (!vals.empty()) {
                const int64_t bound = pred.values.front();
                auto it = std::lower_bound(vals.begin(), vals.end(),
                                           std::make_pair(bound, int32_t(-1)));
                // Nearest value to the boundary; ties prefer the smaller value.
                const auto* best = it != vals.end() ? &*it : nullptr;
                if (it != vals.begin()) {
                    const auto* lo = &*(it - 1);
                    if (!best || (bound - lo->first) <= (best->first - bound)) best = lo;
                }
                if (best) add_token(model, best->second, m);
            }
            break;
        }
    }

    std::vector<double> out(size_t(rvec_width(model.dim)), 0.0);
    out[size_t(int(pred.op))] = 1.0;
    out[6] = double(m.matched);
    if (m.matched > 0)
        for (int k = 0; k < model.dim; ++k) out[size_t(7 + k)] = m.mean[size_t(k)] / m.matched;
    out[size_t(7 + model.dim)] = double(m.count_sum);
    return out;
}

double embedding_cosine(const EmbeddingModel& model, const std::string& a, const std::string& b) {
    const auto ia = model.index.find(a);
    const auto ib = model.index.find(b);
    if (ia == model.index.end() || ib == model.index.end())
        throw ConfigError("embedding_cosine: token out of vocabulary");
    const double* va = model.vec(ia->second);
    const double* vb = model.vec(ib->second);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < model.dim; ++k) {
        dot += va[k] * vb[k];
        na += va[k] * va[k];
        nb += vb[k] * vb[k];
    }
    const double denom = std::sqrt(na) * std::sqrt(nb);
    return denom > 0.0 ? dot / denom : 0.0;
}

void save_embeddings(const EmbeddingModel& model, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["dim"] = model.dim;
    j["vocab"] = model.vocab;
    j["counts"] = model.counts;
    j["vectors"] = doubles_to_base64(model.vectors);
    std::ofstream out(path);
    if (!out) throw ConfigError("save_embeddings: cannot open " + path);
    out << j.dump(2) << '\n';
}

EmbeddingModel load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_embeddings: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("load_embeddings: bad JSON: ") + e.what());
    }
    EmbeddingModel model;
    try {
        model.dim = j.at("dim").get<int>();
        model.vocab = j.at("vocab").get<std::vector<std::string>>();
        model.counts = j.at("counts").get<std::vector<int64_t>>();
        model.vectors = base64_to_doubles(j.at("vectors").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("load_embeddings: missing field: ") + e.what());
    }
    if (model.dim <= 0 || model.vocab.size() != model.counts.size() ||
        model.vectors.size() != model.vocab.size() * size_t(model.dim))
        throw IntegrityError("load_embeddings: inconsistent shapes");
    for (int32_t i = 0; i < int32_t(model.vocab.size()); ++i)
        if (!model.index.emplace(model.vocab[size_t(i)], i).second)
            throw IntegrityError("load_embeddings: duplicate token " + model.vocab[size_t(i)]);
    index_column_values(model);
    return model;
}

}  // namespace lqo
