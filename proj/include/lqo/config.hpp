#pragma once

#include <string>

#include <json.hpp>

#include "lqo/catalog.hpp"
#include "lqo/rvec.hpp"
#include "lqo/search.hpp"
#include "lqo/simulator.hpp"
#include "lqo/value_net.hpp"

namespace lqo {

struct TrainSettings {
    int steps = 300;
    int batch = 16;
    bool cold_start = false;  ///< reinitialize weights at each episode
};

/// Every tunable in one place. All fields have working defaults; JSON config
/// files may set any subset, and CLI flags override the file.
struct RunConfig {
    CatalogConfig catalog;
    WorkloadConfig workload;
    LatencyModel latency;
    SgnsParams sgns;
    ValueNetDims net;
    SearchConfig search;
    TrainSettings training;
    FeatVariant variant = FeatVariant::histogram;
    CostMode cost_mode = CostMode::absolute;
    TargetTransform transform = TargetTransform::log1p;
    bool denormalize = true;    ///< denormalized sentences for embedding training
    double train_fraction = 0.8;
    uint64_t seed = 1;
    int workers = 1;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Rejects unknown keys with ConfigError naming the offender.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace lqo
