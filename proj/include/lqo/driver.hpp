#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lqo/config.hpp"

namespace lqo {

struct MetricsRow {
    int episode = 0;
    std::string split;  ///< "train" or "test"
    int32_t query_id = -1;
    double learned_latency = 0.0;
    double expert_latency = 0.0;
    double ratio = 0.0;
};

struct EpisodeSummary {
    int episode = 0;
    double train_mean_ratio = 0.0;
    double test_mean_ratio = 0.0;
    double loss_first = 0.0;
    double loss_last = 0.0;
};

struct EpisodeMetrics {
    int episode = 0;
    std::vector<MetricsRow> rows;  ///< train rows first, then test, by query id
    double train_mean_ratio = 0.0;
    double test_mean_ratio = 0.0;
    std::vector<double> losses;  ///< per-step training losses (empty if untrained)
};

/// Everything one learning run owns. Test queries never enter experience;
/// per-query expert baselines are frozen at bootstrap.
struct RunState {
    RunConfig config;
    Catalog catalog;
    uint64_t catalog_hash = 0;
    std::vector<Query> queries;
    std::vector<int32_t> train_ids, test_ids;  ///< ascending query ids
    std::map<int32_t, PlanForest> expert_plans;
    std::map<int32_t, double> baselines;
    std::vector<ExperienceEntry> experience;
    std::optional<EmbeddingModel> embeddings;
    FeatureLayout layout;
    ValueNet<Real> net;
    int episode = 0;
    std::vector<MetricsRow> metrics;    ///< all rows since bootstrap
    std::vector<EpisodeSummary> curve;  ///< one row per episode

    // Deterministic encoding caches; never persisted.
    std::unordered_map<int32_t, std::vector<Real>> qvec_cache;
    std::unordered_map<std::string, nn::VecForest<Real>> plan_cache;

    const Query& query(int32_t id) const;
};

/// Splits the workload (seeded shuffle, config.train_fraction), builds the
/// feature layout, and initializes the network. r_vector without an
/// embedding model throws ConfigError.
RunState make_run_state(const RunConfig& config, Catalog catalog, std::vector<Query> queries,
                        std::optional<EmbeddingModel> embeddings);

/// Expert-optimizes every query, freezes baselines, seeds experience with
/// the train-split expert plans, and records episode-0 metrics (ratio 1).
void bootstrap(RunState& state);

/// One learning iteration: fit the network to the accumulated experience,
/// then search every train query with the fitted network, simulate and
/// record the found plans, and evaluate the test split without recording.
EpisodeMetrics run_episode(RunState& state);

/// Pure evaluation of the given split ("train", "test", or "both") at the
/// current episode. On a bootstrapped-only state this reports the stored
/// expert plans (ratio exactly 1); after training it searches with the
/// current network. Mutates only the encoding caches.
EpisodeMetrics evaluate(RunState& state, const std::string& split);

/// Directory layout: catalog.json, workload.json, state.json,
/// experience.jsonl, checkpoint.json, embeddings.json (when present).
void save_state(const RunState& state, const std::string& dir);

/// Validates cross-file catalog hashes and checkpoint metadata; throws
/// IntegrityError on any mismatch or corruption.
RunState load_state(const std::string& dir);

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);
void write_curve_csv(const std::vector<EpisodeSummary>& curve, const std::string& path);

}  // namespace lqo
