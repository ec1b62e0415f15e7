#include "lqo/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string_view>

namespace lqo {

namespace {

using nlohmann::json;

void expect_keys(const json& j, std::initializer_list<std::string_view> allowed,
                 const char* where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool ok = false;
        for (std::string_view a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
}

void read_catalog(const json& j, CatalogConfig& c) {
    expect_keys(j,
                {"fact_tables", "dim_tables", "fact_rows", "dim_rows", "attr_columns",
                 "attr_domain", "histogram_buckets", "extra_fk_per_fact", "indexes",
                 "correlations"},
                "config.catalog");
    read(j, "fact_tables", c.fact_tables);
    read(j, "dim_tables", c.dim_tables);
    read(j, "fact_rows", c.fact_rows);
    read(j, "dim_rows", c.dim_rows);
    read(j, "attr_columns", c.attr_columns);
    read(j, "attr_domain", c.attr_domain);
    read(j, "histogram_buckets", c.histogram_buckets);
    read(j, "extra_fk_per_fact", c.extra_fk_per_fact);
    read(j, "indexes", c.indexes);
    if (j.contains("correlations")) {
        c.correlations.clear();
        for (const auto& e : j.at("correlations")) {
            if (!e.is_array() || e.size() != 5)
                throw ConfigError(
                    "config.catalog.correlations: each entry is "
                    "[source_table, source_column, derived_table, derived_column, strength]");
            CorrelationPair p;
            p.source_table = e.at(0).get<RelationId>();
            p.source_column = e.at(1).get<int32_t>();
            p.derived_table = e.at(2).get<RelationId>();
            p.derived_column = e.at(3).get<int32_t>();
            p.strength = e.at(4).get<double>();
            c.correlations.push_back(p);
        }
    }
}

json catalog_to_json(const CatalogConfig& c) {
    json corr = json::array();
    for (const auto& p : c.correlations)
        corr.push_back({p.source_table, p.source_column, p.derived_table, p.derived_column,
                        p.strength});
    return {{"fact_tables", c.fact_tables},
            {"dim_tables", c.dim_tables},
            {"fact_rows", c.fact_rows},
            {"dim_rows", c.dim_rows},
            {"attr_columns", c.attr_columns},
            {"attr_domain", c.attr_domain},
            {"histogram_buckets", c.histogram_buckets},
            {"extra_fk_per_fact", c.extra_fk_per_fact},
            {"indexes", c.indexes},
            {"correlations", std::move(corr)}};
}

void read_workload(const json& j, WorkloadConfig& w) {
    expect_keys(j,
                {"num_queries", "joins_min", "joins_max", "preds_min", "preds_max", "corr_prob",
                 "consistent_prob"},
                "config.workload");
    read(j, "num_queries", w.num_queries);
    read(j, "joins_min", w.joins_min);
    read(j, "joins_max", w.joins_max);
    read(j, "preds_min", w.preds_min);
    read(j, "preds_max", w.preds_max);
    read(j, "corr_prob", w.corr_prob);
    read(j, "consistent_prob", w.consistent_prob);
}

json workload_to_json(const WorkloadConfig& w) {
    return {{"num_queries", w.num_queries}, {"joins_min", w.joins_min},
            {"joins_max", w.joins_max},     {"preds_min", w.preds_min},
            {"preds_max", w.preds_max},     {"corr_prob", w.corr_prob},
            {"consistent_prob", w.consistent_prob}};
}

void read_latency(const json& j, LatencyModel& m) {
    expect_keys(j,
                {"c_ts", "c_io", "c_is", "c_l", "c_hb", "c_hp", "c_ho", "c_m", "c_s",
                 "noise_sigma", "noise_seed"},
                "config.latency");
    read(j, "c_ts", m.c_ts);
    read(j, "c_io", m.c_io);
    read(j, "c_is", m.c_is);
    read(j, "c_l", m.c_l);
    read(j, "c_hb", m.c_hb);
    read(j, "c_hp", m.c_hp);
    read(j, "c_ho", m.c_ho);
    read(j, "c_m", m.c_m);
    read(j, "c_s", m.c_s);
    read(j, "noise_sigma", m.noise_sigma);
    read(j, "noise_seed", m.noise_seed);
}

json latency_to_json(const LatencyModel& m) {
    return {{"c_ts", m.c_ts}, {"c_io", m.c_io}, {"c_is", m.c_is},
            {"c_l", m.c_l},   {"c_hb", m.c_hb}, {"c_hp", m.c_hp},
            {"c_ho", m.c_ho}, {"c_m", m.c_m},   {"c_s", m.c_s},
            {"noise_sigma", m.noise_sigma},     {"noise_seed", m.noise_seed}};
}

void read_sgns(const json& j, SgnsParams& s) {
    expect_keys(j, {"dim", "window", "negatives", "epochs", "lr", "min_count", "seed"},
                "config.sgns");
    read(j, "dim", s.dim);
    read(j, "window", s.window);
    read(j, "negatives", s.negatives);
    read(j, "epochs", s.epochs);
    read(j, "lr", s.lr);
    read(j, "min_count", s.min_count);
    read(j, "seed", s.seed);
}

json sgns_to_json(const SgnsParams& s) {
    return {{"dim", s.dim},       {"window", s.window}, {"negatives", s.negatives},
            {"epochs", s.epochs}, {"lr", s.lr},         {"min_count", s.min_count},
            {"seed", s.seed}};
}

void read_net(const json& j, ValueNetDims& d) {
    expect_keys(j, {"q1", "q2", "q3", "c1", "c2", "c3", "p1", "p2"}, "config.net");
    read(j, "q1", d.q1);
    read(j, "q2", d.q2);
    read(j, "q3", d.q3);
    read(j, "c1", d.c1);
    read(j, "c2", d.c2);
    read(j, "c3", d.c3);
    read(j, "p1", d.p1);
    read(j, "p2", d.p2);
}

json net_to_json(const ValueNetDims& d) {
    return {{"q1", d.q1}, {"q2", d.q2}, {"q3", d.q3}, {"c1", d.c1},
            {"c2", d.c2}, {"c3", d.c3}, {"p1", d.p1}, {"p2", d.p2}};
}

void read_search(const json& j, SearchConfig& s) {
    expect_keys(j, {"cutoff", "expansion_budget", "wallclock_ms", "allow_cross_products"},
                "config.search");
    if (j.contains("cutoff")) {
        const std::string c = j.at("cutoff").get<std::string>();
        if (c == "expansions")
            s.cutoff = SearchConfig::Cutoff::expansions;
        else if (c == "wallclock")
            s.cutoff = SearchConfig::Cutoff::wallclock;
        else
            throw ConfigError("config.search.cutoff: expected 'expansions' or 'wallclock'");
    }
    read(j, "expansion_budget", s.expansion_budget);
    read(j, "wallclock_ms", s.wallclock_ms);
    read(j, "allow_cross_products", s.allow_cross_products);
}

json search_to_json(const SearchConfig& s) {
    return {{"cutoff", s.cutoff == SearchConfig::Cutoff::expansions ? "expansions" : "wallclock"},
            {"expansion_budget", s.expansion_budget},
            {"wallclock_ms", s.wallclock_ms},
            {"allow_cross_products", s.allow_cross_products}};
}

void read_training(const json& j, TrainSettings& t) {
    expect_keys(j, {"steps", "batch", "cold_start"}, "config.training");
    read(j, "steps", t.steps);
    read(j, "batch", t.batch);
    read(j, "cold_start", t.cold_start);
}

json training_to_json(const TrainSettings& t) {
    return {{"steps", t.steps}, {"batch", t.batch}, {"cold_start", t.cold_start}};
}

}  // namespace

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return {{"catalog", catalog_to_json(cfg.catalog)},
            {"workload", workload_to_json(cfg.workload)},
            {"latency", latency_to_json(cfg.latency)},
            {"sgns", sgns_to_json(cfg.sgns)},
            {"net", net_to_json(cfg.net)},
            {"search", search_to_json(cfg.search)},
            {"training", training_to_json(cfg.training)},
            {"variant", to_string(cfg.variant)},
            {"cost_mode", to_string(cfg.cost_mode)},
            {"transform", to_string(cfg.transform)},
            {"denormalize", cfg.denormalize},
            {"train_fraction", cfg.train_fraction},
            {"seed", cfg.seed},
            {"workers", cfg.workers}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    expect_keys(j,
                {"catalog", "workload", "latency", "sgns", "net", "search", "training", "variant",
                 "cost_mode", "transform", "denormalize", "train_fraction", "seed", "workers"},
                "config");
    RunConfig cfg;
    if (j.contains("catalog")) read_catalog(j.at("catalog"), cfg.catalog);
    if (j.contains("workload")) read_workload(j.at("workload"), cfg.workload);
    if (j.contains("latency")) read_latency(j.at("latency"), cfg.latency);
    if (j.contains("sgns")) read_sgns(j.at("sgns"), cfg.sgns);
    if (j.contains("net")) read_net(j.at("net"), cfg.net);
    if (j.contains("search")) read_search(j.at("search"), cfg.search);
    if (j.contains("training")) read_training(j.at("training"), cfg.training);
    if (j.contains("variant"))
        cfg.variant = feat_variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("cost_mode"))
        cfg.cost_mode = cost_mode_from_string(j.at("cost_mode").get<std::string>());
    if (j.contains("transform"))
        cfg.transform = target_transform_from_string(j.at("transform").get<std::string>());
    read(j, "denormalize", cfg.denormalize);
    read(j, "train_fraction", cfg.train_fraction);
    read(j, "seed", cfg.seed);
    read(j, "workers", cfg.workers);
    if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
        throw ConfigError("config.train_fraction must lie in (0, 1)");
    if (cfg.workers < 1) throw ConfigError("config.workers must be >= 1");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace lqo
