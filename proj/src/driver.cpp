#include "lqo/driver.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "lqo/expert.hpp"
#include "lqo/json_io.hpp"
#include "lqo/simulator.hpp"

namespace lqo {

namespace {

/// Stateless seed derivation: every consumer mixes the run seed with a fixed
/// stream tag (and usually the episode number), so replaying an episode after
/// a save/load round-trip consumes identical random streams.
enum : uint64_t { kSplitStream = 1, kNetInitStream = 2, kTrainStream = 3 };

uint64_t derive_seed(uint64_t root, uint64_t stream, uint64_t n) {
    uint64_t x = root ^ (0x9e3779b97f4a7c15ull * (stream + 1));
    splitmix64(x);
    x ^= 0x9e3779b97f4a7c15ull * (n + 1);
    return splitmix64(x);
}

const std::vector<Real>& query_vector(RunState& s, int32_t qid) {
    auto it = s.qvec_cache.find(qid);
    if (it != s.qvec_cache.end()) return it->second;
    const std::vector<double> v =
        encode_query(s.query(qid), s.catalog, s.config.variant,
                     s.embeddings ? &*s.embeddings : nullptr, s.layout);
    std::vector<Real> cast(v.begin(), v.end());
    return s.qvec_cache.emplace(qid, std::move(cast)).first->second;
}

const nn::VecForest<Real>& plan_forest(RunState& s, const PlanForest& plan) {
    std::string key = canonical_key(plan);
    auto it = s.plan_cache.find(key);
    if (it != s.plan_cache.end()) return it->second;
    return s.plan_cache.emplace(std::move(key), encode_plan<Real>(plan, s.layout)).first->second;
}

struct SearchResult {
    PlanForest plan;
    double latency = 0.0;
};

/// Search one query with the current network and simulate the result.
/// Thread-safe for distinct queries over an immutable net and catalog.
SearchResult search_one(const RunState& s, int32_t qid, const std::vector<Real>& qvec) {
    TreeCacheEvaluator<Real> evaluator(s.net, s.layout, qvec);
    SearchResult r;
    r.plan = best_first_search(evaluator, s.query(qid), s.catalog, s.config.search);
    r.latency = simulate_latency(s.catalog, r.plan, s.query(qid), s.config.latency);
    return r;
}

/// Runs search_one over `ids`, fanning out across config.workers threads;
/// results come back indexed by position so output order never depends on
/// scheduling.
std::vector<SearchResult> search_many(RunState& s, const std::vector<int32_t>& ids) {
    // Fill the query-vector cache up front; worker threads only read it.
    for (int32_t qid : ids) query_vector(s, qid);
    std::vector<SearchResult> results(ids.size());
    const int workers = std::min<int>(s.config.workers, int(ids.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < ids.size(); ++i)
            results[i] = search_one(s, ids[i], s.qvec_cache.at(ids[i]));
        return results;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < ids.size(); i = next.fetch_add(1))
                results[i] = search_one(s, ids[i], s.qvec_cache.at(ids[i]));
        });
    for (auto& t : pool) t.join();
    return results;
}

MetricsRow make_row(const RunState& s, int episode, const char* split, int32_t qid,
                    double learned_latency) {
    const double base = s.baselines.at(qid);
    LQO_CHECK(base > 0.0, "metrics: non-positive expert baseline");
    return MetricsRow{episode, split, qid, learned_latency, base, learned_latency / base};
}

double mean_ratio(const std::vector<MetricsRow>& rows, const std::string& split) {
    double sum = 0.0;
    int n = 0;
    for (const MetricsRow& r : rows)
        if (r.split == split) {
            sum += r.ratio;
            ++n;
        }
    return n ? sum / n : 0.0;
}

void assert_test_isolation(const RunState& s) {
    for (const ExperienceEntry& e : s.experience)
        LQO_CHECK(std::binary_search(s.train_ids.begin(), s.train_ids.end(), e.query_id),
                  "test query leaked into experience");
}

void append_csv_double(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace

const Query& RunState::query(int32_t id) const {
    for (const Query& q : queries)
        if (q.id == id) return q;
    throw ContractError("RunState: unknown query id " + std::to_string(id));
}

RunState make_run_state(const RunConfig& config, Catalog catalog, std::vector<Query> queries,
                        std::optional<EmbeddingModel> embeddings) {
    LQO_CHECK(!queries.empty(), "make_run_state: empty workload");
    if (config.variant == FeatVariant::r_vector && (!embeddings || embeddings->empty()))
        throw ConfigError("r_vector featurization requires trained embeddings");

    RunState s;
    s.config = config;
    s.catalog = std::move(catalog);
    s.catalog_hash = catalog_fingerprint(s.catalog);
    s.queries = std::move(queries);
    s.embeddings = std::move(embeddings);
    s.layout = layout_from_catalog(s.catalog, config.variant,
                                   s.embeddings ? &*s.embeddings : nullptr);

    std::vector<int32_t> ids;
    ids.reserve(s.queries.size());
    for (const Query& q : s.queries) ids.push_back(q.id);
    Rng rng(derive_seed(config.seed, kSplitStream, 0));
    rng.shuffle(ids);
    size_t n_train = size_t(std::llround(config.train_fraction * double(ids.size())));
    n_train = std::clamp<size_t>(n_train, 1, ids.size() > 1 ? ids.size() - 1 : 1);
    s.train_ids.assign(ids.begin(), ids.begin() + ptrdiff_t(n_train));
    s.test_ids.assign(ids.begin() + ptrdiff_t(n_train), ids.end());
    std::sort(s.train_ids.begin(), s.train_ids.end());
    std::sort(s.test_ids.begin(), s.test_ids.end());

    s.net = make_value_net<Real>(s.layout.query_width(config.variant), s.layout.node_width(),
                                 config.net, derive_seed(config.seed, kNetInitStream, 0));
    return s;
}

void bootstrap(RunState& state) {
    LQO_CHECK(state.experience.empty() && state.episode == 0,
              "bootstrap: state already bootstrapped");
    for (const Query& q : state.queries) {
        PlanForest plan = expert_plan(state.catalog, q, state.config.latency,
                                      state.config.search.allow_cross_products);
        const double lat = simulate_latency(state.catalog, plan, q, state.config.latency);
        LQO_CHECK(lat > 0.0, "bootstrap: non-positive expert latency");
        state.expert_plans.emplace(q.id, std::move(plan));
        state.baselines.emplace(q.id, lat);
    }
    for (int32_t qid : state.train_ids)
        state.experience.push_back(
            ExperienceEntry{qid, state.expert_plans.at(qid), state.baselines.at(qid),
                            state.baselines.at(qid)});
    for (int32_t qid : state.train_ids)
        state.metrics.push_back(make_row(state, 0, "train", qid, state.baselines.at(qid)));
    for (int32_t qid : state.test_ids)
        state.metrics.push_back(make_row(state, 0, "test", qid, state.baselines.at(qid)));
    state.curve.push_back(EpisodeSummary{0, 1.0, 1.0, 0.0, 0.0});
    assert_test_isolation(state);
}

EpisodeMetrics run_episode(RunState& state) {
    LQO_CHECK(!state.experience.empty(), "run_episode: bootstrap first");
    const int episode = state.episode + 1;

    if (state.config.training.cold_start)
        state.net = make_value_net<Real>(state.layout.query_width(state.config.variant),
                                         state.layout.node_width(), state.config.net,
                                         derive_seed(state.config.seed, kNetInitStream,
                                                     uint64_t(episode)));

    const std::vector<TrainingSample> samples = build_training_set(
        state.experience, state.queries, state.config.cost_mode, state.config.transform);
    std::vector<EncodedSample<Real>> encoded;
    encoded.reserve(samples.size());
    for (const TrainingSample& t : samples)
        encoded.push_back(EncodedSample<Real>{query_vector(state, t.query_id),
                                              plan_forest(state, t.plan), Real(t.target)});

    EpisodeMetrics m;
    m.episode = episode;
    m.losses = train_value_net(state.net, encoded, state.config.training.steps,
                               state.config.training.batch,
                               derive_seed(state.config.seed, kTrainStream, uint64_t(episode)));

    // The network is untouched from here on: searches run over a snapshot.
    const std::vector<SearchResult> train_found = search_many(state, state.train_ids);
    for (size_t i = 0; i < state.train_ids.size(); ++i) {
        const int32_t qid = state.train_ids[i];
        state.experience.push_back(ExperienceEntry{qid, train_found[i].plan,
                                                   train_found[i].latency,
                                                   state.baselines.at(qid)});
        m.rows.push_back(make_row(state, episode, "train", qid, train_found[i].latency));
    }
    const std::vector<SearchResult> test_found = search_many(state, state.test_ids);
    for (size_t i = 0; i < state.test_ids.size(); ++i)
        m.rows.push_back(
            make_row(state, episode, "test", state.test_ids[i], test_found[i].latency));

    m.train_mean_ratio = mean_ratio(m.rows, "train");
    m.test_mean_ratio = mean_ratio(m.rows, "test");
    state.metrics.insert(state.metrics.end(), m.rows.begin(), m.rows.end());
    state.curve.push_back(EpisodeSummary{episode, m.train_mean_ratio, m.test_mean_ratio,
                                         m.losses.empty() ? 0.0 : m.losses.front(),
                                         m.losses.empty() ? 0.0 : m.losses.back()});
    state.episode = episode;
    assert_test_isolation(state);
    return m;
}

EpisodeMetrics evaluate(RunState& state, const std::string& split) {
    LQO_CHECK(split == "train" || split == "test" || split == "both",
              "evaluate: split must be train, test, or both");
    const size_t experience_size = state.experience.size();
    EpisodeMetrics m;
    m.episode = state.episode;

    const auto eval_split = [&](const std::vector<int32_t>& ids, const char* name) {
        if (state.episode == 0) {
            // Untrained network: report the stored expert plans.
            for (int32_t qid : ids)
                m.rows.push_back(make_row(state, 0, name, qid, state.baselines.at(qid)));
            return;
        }
        const std::vector<SearchResult> found = search_many(state, ids);
        for (size_t i = 0; i < ids.size(); ++i)
            m.rows.push_back(make_row(state, state.episode, name, ids[i], found[i].latency));
    };
    if (split == "train" || split == "both") eval_split(state.train_ids, "train");
    if (split == "test" || split == "both") eval_split(state.test_ids, "test");

    m.train_mean_ratio = mean_ratio(m.rows, "train");
    m.test_mean_ratio = mean_ratio(m.rows, "test");
    LQO_CHECK(state.experience.size() == experience_size, "evaluate must not record experience");
    return m;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::string out = "episode,split,query_id,learned_latency,expert_latency,ratio\n";
    for (const MetricsRow& r : rows) {
        out += std::to_string(r.episode);
        out += ',';
        out += r.split;
        out += ',';
        out += std::to_string(r.query_id);
        out += ',';
        append_csv_double(out, r.learned_latency);
        out += ',';
        append_csv_double(out, r.expert_latency);
        out += ',';
        append_csv_double(out, r.ratio);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open metrics file: " + path);
    f << out;
}

void write_curve_csv(const std::vector<EpisodeSummary>& curve, const std::string& path) {
    std::string out = "episode,train_mean_ratio,test_mean_ratio,loss_first,loss_last\n";
    for (const EpisodeSummary& r : curve) {
        out += std::to_string(r.episode);
        out += ',';
        append_csv_double(out, r.train_mean_ratio);
        out += ',';
        append_csv_double(out, r.test_mean_ratio);
        out += ',';
        append_csv_double(out, r.loss_first);
        out += ',';
        append_csv_double(out, r.loss_last);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open curve file: " + path);
    f << out;
}

namespace {

nlohmann::json metrics_row_to_json(const MetricsRow& r) {
    return {r.episode, r.split, r.query_id, r.learned_latency, r.expert_latency, r.ratio};
}

MetricsRow metrics_row_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 6) throw IntegrityError("state: bad metrics row");
    return MetricsRow{j.at(0).get<int>(),    j.at(1).get<std::string>(),
                      j.at(2).get<int32_t>(), j.at(3).get<double>(),
                      j.at(4).get<double>(),  j.at(5).get<double>()};
}

}  // namespace

void save_state(const RunState& state, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_catalog(state.catalog, dir + "/catalog.json");
    save_workload(state.queries, state.catalog_hash, dir + "/workload.json");
    if (state.embeddings) save_embeddings(*state.embeddings, dir + "/embeddings.json");
    save_value_net(state.net,
                   CheckpointMeta{state.catalog_hash, state.config.variant,
                                  state.config.cost_mode, state.config.transform},
                   dir + "/checkpoint.json");

    {
        std::ofstream f(dir + "/experience.jsonl", std::ios::binary);
        if (!f) throw ConfigError("cannot open experience file");
        for (const ExperienceEntry& e : state.experience) {
            nlohmann::json j{{"query_id", e.query_id},
                             {"plan", plan_to_json(e.plan)},
                             {"latency", e.latency},
                             {"baseline", e.baseline}};
            f << j.dump() << '\n';
        }
    }

    nlohmann::json j;
    j["version"] = 1;
    j["config"] = run_config_to_json(state.config);
    j["catalog_hash"] = hash_hex(state.catalog_hash);
    j["episode"] = state.episode;
    j["train_ids"] = state.train_ids;
    j["test_ids"] = state.test_ids;
    nlohmann::json baselines = nlohmann::json::array();
    for (const auto& [qid, lat] : state.baselines) baselines.push_back({qid, lat});
    j["baselines"] = std::move(baselines);
    nlohmann::json plans = nlohmann::json::array();
    for (const auto& [qid, plan] : state.expert_plans) plans.push_back(plan_to_json(plan));
    j["expert_plans"] = std::move(plans);
    nlohmann::json rows = nlohmann::json::array();
    for (const MetricsRow& r : state.metrics) rows.push_back(metrics_row_to_json(r));
    j["metrics"] = std::move(rows);
    nlohmann::json curve = nlohmann::json::array();
    for (const EpisodeSummary& c : state.curve)
        curve.push_back({c.episode, c.train_mean_ratio, c.test_mean_ratio, c.loss_first,
                         c.loss_last});
    j["curve"] = std::move(curve);

    std::ofstream f(dir + "/state.json", std::ios::binary);
    if (!f) throw ConfigError("cannot open state file");
    f << j.dump() << '\n';
}

RunState load_state(const std::string& dir) {
    std::ifstream f(dir + "/state.json");
    if (!f) throw ConfigError("cannot open state file in " + dir);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("state.json is not valid JSON: ") + e.what());
    }

    try {
        const RunConfig config = run_config_from_json(j.at("config"));
        Catalog catalog = load_catalog(dir + "/catalog.json");
        const uint64_t expect_hash =
            std::strtoull(j.at("catalog_hash").get<std::string>().c_str(), nullptr, 16);
        if (catalog_fingerprint(catalog) != expect_hash)
            throw IntegrityError("state.json catalog hash does not match catalog.json");
        std::vector<Query> queries = load_workload(dir + "/workload.json", expect_hash);

        std::optional<EmbeddingModel> embeddings;
        if (std::filesystem::exists(dir + "/embeddings.json"))
            embeddings = load_embeddings(dir + "/embeddings.json");

        RunState s = make_run_state(config, std::move(catalog), std::move(queries),
                                    std::move(embeddings));

        // The stored split wins over the derived one (they agree for a state
        // saved by this code, but the file is the source of truth).
        s.train_ids = j.at("train_ids").get<std::vector<int32_t>>();
        s.test_ids = j.at("test_ids").get<std::vector<int32_t>>();
        s.episode = j.at("episode").get<int>();

        CheckpointMeta meta;
        s.net = load_value_net<Real>(dir + "/checkpoint.json", meta);
        if (meta.catalog_hash != s.catalog_hash)
            throw IntegrityError("checkpoint manifest hash does not match catalog");
        if (meta.variant != config.variant || meta.cost_mode != config.cost_mode ||
            meta.transform != config.transform)
            throw IntegrityError("checkpoint manifest disagrees with config");
        if (s.net.query_width != s.layout.query_width(config.variant) ||
            s.net.node_width != s.layout.node_width())
            throw IntegrityError("checkpoint shapes do not match feature layout");

        for (const auto& b : j.at("baselines")) {
            if (!b.is_array() || b.size() != 2) throw IntegrityError("state: bad baseline row");
            s.baselines.emplace(b.at(0).get<int32_t>(), b.at(1).get<double>());
        }
        for (const auto& p : j.at("expert_plans")) {
            PlanForest plan = plan_from_json(p);
            s.expert_plans.emplace(plan.query_id, std::move(plan));
        }
        for (const auto& r : j.at("metrics")) s.metrics.push_back(metrics_row_from_json(r));
        for (const auto& c : j.at("curve")) {
            if (!c.is_array() || c.size() != 5) throw IntegrityError("state: bad curve row");
            s.curve.push_back(EpisodeSummary{c.at(0).get<int>(), c.at(1).get<double>(),
                                             c.at(2).get<double>(), c.at(3).get<double>(),
                                             c.at(4).get<double>()});
        }

        std::ifstream ef(dir + "/experience.jsonl");
        if (!ef) throw IntegrityError("experience.jsonl missing in " + dir);
        std::string line;
        while (std::getline(ef, line)) {
            if (line.empty()) continue;
            nlohmann::json ej = nlohmann::json::parse(line);
            ExperienceEntry e;
            e.query_id = ej.at("query_id").get<int32_t>();
            e.plan = plan_from_json(ej.at("plan"));
            e.latency = ej.at("latency").get<double>();
            e.baseline = ej.at("baseline").get<double>();
            s.experience.push_back(std::move(e));
        }

        if (s.episode > 0 || !s.experience.empty()) {
            for (int32_t qid : s.train_ids)
                if (!s.baselines.count(qid) || !s.expert_plans.count(qid))
                    throw IntegrityError("state: missing baseline or expert plan for query " +
                                         std::to_string(qid));
            assert_test_isolation(s);
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("state.json malformed: ") + e.what());
    }
}

}  // namespace lqo
