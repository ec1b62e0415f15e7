#include "lqo/cli.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqo/driver.hpp"
#include "lqo/expert.hpp"
#include "lqo/json_io.hpp"
#include "lqo/simulator.hpp"

namespace lqo {

namespace {

struct CommonOpts {
    std::string config_path;
    bool show_config = false;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path, "JSON config file (defaults apply when omitted)");
    sub->add_flag("--show-config", c.show_config,
                  "print the effective configuration as JSON and exit");
}

RunConfig effective_config(const CommonOpts& c) {
    return c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
}

/// Returns true when --show-config was requested (and printed).
bool maybe_show(const CommonOpts& c, const RunConfig& cfg) {
    if (!c.show_config) return false;
    std::cout << run_config_to_json(cfg).dump(2) << '\n';
    return true;
}

double untransform(double value, TargetTransform t) {
    return t == TargetTransform::log1p ? std::expm1(value) : value;
}

void print_metrics(const EpisodeMetrics& m, bool as_json) {
    if (as_json) {
        nlohmann::json rows = nlohmann::json::array();
        for (const MetricsRow& r : m.rows)
            rows.push_back({{"episode", r.episode},
                            {"split", r.split},
                            {"query_id", r.query_id},
                            {"learned_latency", r.learned_latency},
                            {"expert_latency", r.expert_latency},
                            {"ratio", r.ratio}});
        nlohmann::json j{{"episode", m.episode},
                         {"train_mean_ratio", m.train_mean_ratio},
                         {"test_mean_ratio", m.test_mean_ratio},
                         {"rows", std::move(rows)}};
        if (!m.losses.empty()) {
            j["loss_first"] = m.losses.front();
            j["loss_last"] = m.losses.back();
        }
        std::cout << j.dump() << '\n';
        return;
    }
    for (const MetricsRow& r : m.rows)
        std::printf("episode %d %s query %d: latency %.6g expert %.6g ratio %.4f\n", r.episode,
                    r.split.c_str(), r.query_id, r.learned_latency, r.expert_latency, r.ratio);
    std::printf("episode %d summary: train mean ratio %.4f, test mean ratio %.4f", m.episode,
                m.train_mean_ratio, m.test_mean_ratio);
    if (!m.losses.empty())
        std::printf(", loss %.6g -> %.6g", m.losses.front(), m.losses.back());
    std::printf("\n");
}

int run_gen_catalog(const CommonOpts& common, const CLI::App* sub, uint64_t seed,
                    const std::string& out) {
    RunConfig cfg = effective_config(common);
    if (sub->count("--seed")) cfg.seed = seed;
    if (maybe_show(common, cfg)) return 0;
    const Catalog catalog = generate_catalog(cfg.catalog, cfg.seed);
    save_catalog(catalog, out);
    std::printf("catalog: %d tables, fingerprint %016llx -> %s\n", catalog.num_relations(),
                static_cast<unsigned long long>(catalog_fingerprint(catalog)), out.c_str());
    return 0;
}

int run_gen_workload(const CommonOpts& common, const CLI::App* sub, uint64_t seed,
                     const std::string& catalog_path, const std::string& out) {
    RunConfig cfg = effective_config(common);
    if (sub->count("--seed")) cfg.seed = seed;
    if (maybe_show(common, cfg)) return 0;
    const Catalog catalog = load_catalog(catalog_path);
    const std::vector<Query> queries = generate_workload(catalog, cfg.workload, cfg.seed);
    save_workload(queries, catalog_fingerprint(catalog), out);
    std::printf("workload: %zu queries -> %s\n", queries.size(), out.c_str());
    return 0;
}

int run_embed_train(const CommonOpts& common, const CLI::App* sub, uint64_t seed,
                    const std::string& catalog_path, const std::string& out, bool denormalize) {
    RunConfig cfg = effective_config(common);
    if (sub->count("--seed")) cfg.sgns.seed = seed;
    if (sub->count("--denormalize") || sub->count("--no-denormalize"))
        cfg.denormalize = denormalize;
    if (maybe_show(common, cfg)) return 0;
    const Catalog catalog = load_catalog(catalog_path);
    const auto sentences = build_sentences(catalog, cfg.denormalize);
    std::vector<double> losses;
    const EmbeddingModel model = train_embeddings(sentences, cfg.sgns, &losses);
    save_embeddings(model, out);
    std::printf("embeddings: %zu sentences, vocab %zu, dim %d; epoch losses:",
                sentences.size(), model.vocab.size(), model.dim);
    for (double l : losses) std::printf(" %.4f", l);
    std::printf("\n-> %s\n", out.c_str());
    return 0;
}

int run_bootstrap(const CommonOpts& common, const CLI::App* sub, const std::string& catalog_path,
                  const std::string& workload_path, const std::string& embeddings_path,
                  const std::string& state_dir, const std::string& variant,
                  const std::string& cost_mode, const std::string& transform, uint64_t seed,
                  double train_fraction, int workers) {
    RunConfig cfg = effective_config(common);
    if (sub->count("--variant")) cfg.variant = feat_variant_from_string(variant);
    if (sub->count("--cost-mode")) cfg.cost_mode = cost_mode_from_string(cost_mode);
    if (sub->count("--transform")) cfg.transform = target_transform_from_string(transform);
    if (sub->count("--seed")) cfg.seed = seed;
    if (sub->count("--train-fraction")) cfg.train_fraction = train_fraction;
    if (sub->count("--workers")) cfg.workers = workers;
    if (maybe_show(common, cfg)) return 0;

    Catalog catalog = load_catalog(catalog_path);
    const uint64_t hash = catalog_fingerprint(catalog);
    std::vector<Query> queries = load_workload(workload_path, hash);
    std::optional<EmbeddingModel> embeddings;
    if (!embeddings_path.empty()) embeddings = load_embeddings(embeddings_path);

    RunState state =
        make_run_state(cfg, std::move(catalog), std::move(queries), std::move(embeddings));
    bootstrap(state);
    save_state(state, state_dir);
    std::printf("bootstrap: %zu train / %zu test queries, experience %zu -> %s\n",
                state.train_ids.size(), state.test_ids.size(), state.experience.size(),
                state_dir.c_str());
    return 0;
}

void apply_runtime_overrides(RunState& state, const CLI::App* sub, int workers, bool cold_start,
                             int64_t budget, bool wallclock, double wallclock_ms, int steps,
                             int batch) {
    if (sub->count("--workers")) state.config.workers = workers;
    if (sub->count("--cold-start")) state.config.training.cold_start = cold_start;
    if (sub->count("--budget")) state.config.search.expansion_budget = budget;
    if (sub->count("--wallclock") && wallclock)
        state.config.search.cutoff = SearchConfig::Cutoff::wallclock;
    if (sub->count("--wallclock-ms")) {
        state.config.search.wallclock_ms = wallclock_ms;
        state.config.search.cutoff = SearchConfig::Cutoff::wallclock;
    }
    if (sub->count("--steps")) state.config.training.steps = steps;
    if (sub->count("--batch")) state.config.training.batch = batch;
}

}  // namespace

int dispatch(std::vector<std::string> args) {
    CLI::App app{"learned query optimizer playground: synthetic database, expert bootstrap, "
                 "value-network training, and guided plan search"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "print help for every subcommand");

    // gen-catalog
    CommonOpts gc_common;
    uint64_t gc_seed = 1;
    std::string gc_out;
    CLI::App* gen_catalog = app.add_subcommand("gen-catalog", "generate the synthetic database");
    add_common(gen_catalog, gc_common);
    gen_catalog->add_option("--seed", gc_seed, "generation seed (overrides config)");
    gen_catalog->add_option("--out", gc_out, "output catalog JSON path")->required();

    // gen-workload
    CommonOpts gw_common;
    uint64_t gw_seed = 1;
    std::string gw_catalog, gw_out;
    CLI::App* gen_workload = app.add_subcommand("gen-workload", "sample join queries");
    add_common(gen_workload, gw_common);
    gen_workload->add_option("--seed", gw_seed, "generation seed (overrides config)");
    gen_workload->add_option("--catalog", gw_catalog, "catalog JSON path")->required();
    gen_workload->add_option("--out", gw_out, "output workload JSON path")->required();

    // embed-train
    CommonOpts et_common;
    uint64_t et_seed = 1;
    std::string et_catalog, et_out;
    bool et_denorm = true;
    CLI::App* embed_train =
        app.add_subcommand("embed-train", "train row-value embeddings on the catalog");
    add_common(embed_train, et_common);
    embed_train->add_option("--seed", et_seed, "embedding training seed (overrides config)");
    embed_train->add_option("--catalog", et_catalog, "catalog JSON path")->required();
    embed_train->add_option("--out", et_out, "output embeddings JSON path")->required();
    embed_train->add_flag("--denormalize,!--no-denormalize", et_denorm,
                          "add join-derived sentences (default on)");

    // bootstrap
    CommonOpts bs_common;
    std::string bs_catalog, bs_workload, bs_embeddings, bs_state;
    std::string bs_variant, bs_cost_mode, bs_transform;
    uint64_t bs_seed = 1;
    double bs_train_fraction = 0.8;
    int bs_workers = 1;
    CLI::App* bootstrap_cmd = app.add_subcommand(
        "bootstrap", "expert-optimize the workload and initialize a state directory");
    add_common(bootstrap_cmd, bs_common);
    bootstrap_cmd->add_option("--catalog", bs_catalog, "catalog JSON path")->required();
    bootstrap_cmd->add_option("--workload", bs_workload, "workload JSON path")->required();
    bootstrap_cmd->add_option("--embeddings", bs_embeddings,
                              "embeddings JSON path (required for r_vector)");
    bootstrap_cmd->add_option("--state-dir", bs_state, "state directory to create")->required();
    bootstrap_cmd->add_option("--variant", bs_variant,
                              "featurization: one_hot, histogram, or r_vector");
    bootstrap_cmd->add_option("--cost-mode", bs_cost_mode, "absolute or relative");
    bootstrap_cmd->add_option("--transform", bs_transform, "target transform: log1p or identity");
    bootstrap_cmd->add_option("--seed", bs_seed, "run seed (overrides config)");
    bootstrap_cmd->add_option("--train-fraction", bs_train_fraction, "train split fraction");
    bootstrap_cmd->add_option("--workers", bs_workers, "worker threads");

    // train
    CommonOpts tr_common;
    std::string tr_state, tr_metrics, tr_curve;
    int tr_episodes = 1, tr_workers = 1, tr_steps = 300, tr_batch = 16;
    int64_t tr_budget = 0;
    bool tr_cold = false, tr_wallclock = false, tr_json = false;
    double tr_wallclock_ms = 250.0;
    CLI::App* train_cmd = app.add_subcommand("train", "run learning episodes");
    add_common(train_cmd, tr_common);
    train_cmd->add_option("--state-dir", tr_state, "state directory")->required();
    train_cmd->add_option("--episodes", tr_episodes, "episodes to run (0 is a valid no-op)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--metrics", tr_metrics, "write the full metrics CSV here");
    train_cmd->add_option("--curve", tr_curve, "write the learning-curve CSV here");
    train_cmd->add_option("--workers", tr_workers, "worker threads");
    train_cmd->add_flag("--cold-start", tr_cold, "reinitialize the network each episode");
    train_cmd->add_option("--budget", tr_budget, "search expansion budget");
    train_cmd->add_flag("--wallclock", tr_wallclock, "use the wall-clock search cutoff");
    train_cmd->add_option("--wallclock-ms", tr_wallclock_ms, "wall-clock cutoff in milliseconds");
    train_cmd->add_option("--steps", tr_steps, "training steps per episode");
    train_cmd->add_option("--batch", tr_batch, "minibatch size");
    train_cmd->add_flag("--json", tr_json, "machine-readable output");

    // evaluate
    CommonOpts ev_common;
    std::string ev_state, ev_split = "test";
    int ev_workers = 1;
    bool ev_json = false, ev_wallclock = false;
    int64_t ev_budget = 0;
    double ev_wallclock_ms = 250.0;
    CLI::App* evaluate_cmd =
        app.add_subcommand("evaluate", "search and score a split without recording");
    add_common(evaluate_cmd, ev_common);
    evaluate_cmd->add_option("--state-dir", ev_state, "state directory")->required();
    evaluate_cmd->add_option("--split", ev_split, "train, test, or both");
    evaluate_cmd->add_option("--workers", ev_workers, "worker threads");
    evaluate_cmd->add_option("--budget", ev_budget, "search expansion budget");
    evaluate_cmd->add_flag("--wallclock", ev_wallclock, "use the wall-clock search cutoff");
    evaluate_cmd->add_option("--wallclock-ms", ev_wallclock_ms,
                             "wall-clock cutoff in milliseconds");
    evaluate_cmd->add_flag("--json", ev_json, "machine-readable output");

    // optimize
    CommonOpts op_common;
    std::string op_state, op_query;
    bool op_json = false;
    CLI::App* optimize_cmd =
        app.add_subcommand("optimize", "plan one query with the trained network");
    add_common(optimize_cmd, op_common);
    optimize_cmd->add_option("--state-dir", op_state, "state directory")->required();
    optimize_cmd->add_option("--query", op_query, "workload query id, or a query JSON file")
        ->required();
    optimize_cmd->add_flag("--json", op_json, "machine-readable output");

    std::vector<const char*> argv;
    argv.push_back("lqo");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the diagnostic
        return 2;
    }

    try {
        if (*gen_catalog) return run_gen_catalog(gc_common, gen_catalog, gc_seed, gc_out);
        if (*gen_workload)
            return run_gen_workload(gw_common, gen_workload, gw_seed, gw_catalog, gw_out);
        if (*embed_train)
            return run_embed_train(et_common, embed_train, et_seed, et_catalog, et_out, et_denorm);
        if (*bootstrap_cmd)
            return run_bootstrap(bs_common, bootstrap_cmd, bs_catalog, bs_workload, bs_embeddings,
                                 bs_state, bs_variant, bs_cost_mode, bs_transform, bs_seed,
                                 bs_train_fraction, bs_workers);

        if (*train_cmd) {
            RunConfig cfg = effective_config(tr_common);
            if (maybe_show(tr_common, cfg)) return 0;
            RunState state = load_state(tr_state);
            apply_runtime_overrides(state, train_cmd, tr_workers, tr_cold, tr_budget, tr_wallclock,
                                    tr_wallclock_ms, tr_steps, tr_batch);
            for (int e = 0; e < tr_episodes; ++e) {
                const EpisodeMetrics m = run_episode(state);
                if (tr_json)
                    print_metrics(m, true);
                else
                    std::printf("episode %d: train mean ratio %.4f, test mean ratio %.4f, "
                                "loss %.6g -> %.6g\n",
                                m.episode, m.train_mean_ratio, m.test_mean_ratio,
                                m.losses.empty() ? 0.0 : m.losses.front(),
                                m.losses.empty() ? 0.0 : m.losses.back());
            }
            save_state(state, tr_state);
            if (!tr_metrics.empty()) write_metrics_csv(state.metrics, tr_metrics);
            if (!tr_curve.empty()) write_curve_csv(state.curve, tr_curve);
            return 0;
        }

        if (*evaluate_cmd) {
            RunConfig cfg = effective_config(ev_common);
            if (maybe_show(ev_common, cfg)) return 0;
            RunState state = load_state(ev_state);
            if (evaluate_cmd->count("--workers")) state.config.workers = ev_workers;
            if (evaluate_cmd->count("--budget"))
                state.config.search.expansion_budget = ev_budget;
            if (evaluate_cmd->count("--wallclock") && ev_wallclock)
                state.config.search.cutoff = SearchConfig::Cutoff::wallclock;
            if (evaluate_cmd->count("--wallclock-ms")) {
                state.config.search.wallclock_ms = ev_wallclock_ms;
                state.config.search.cutoff = SearchConfig::Cutoff::wallclock;
            }
            const EpisodeMetrics m = evaluate(state, ev_split);
            print_metrics(m, ev_json);
            return 0;
        }

        if (*optimize_cmd) {
            RunConfig cfg = effective_config(op_common);
            if (maybe_show(op_common, cfg)) return 0;
            RunState state = load_state(op_state);
            Query q;
            const bool is_id = !op_query.empty() &&
                               std::all_of(op_query.begin(), op_query.end(),
                                           [](unsigned char c) { return std::isdigit(c); });
            if (is_id) {
                q = state.query(int32_t(std::stol(op_query)));
            } else {
                std::ifstream f(op_query);
                if (!f) throw ConfigError("cannot open query file: " + op_query);
                nlohmann::json j;
                f >> j;
                q = query_from_json(j);
                LQO_CHECK(q.relations.back() < state.catalog.num_relations(),
                          "query references relations outside the catalog");
            }
            const std::vector<double> qv =
                encode_query(q, state.catalog, state.config.variant,
                             state.embeddings ? &*state.embeddings : nullptr, state.layout);
            const std::vector<Real> qvec(qv.begin(), qv.end());
            TreeCacheEvaluator<Real> evaluator(state.net, state.layout, qvec);
            const PlanForest plan =
                best_first_search(evaluator, q, state.catalog, state.config.search);
            const double score = evaluator.score(plan);
            const double predicted = untransform(score, state.config.transform);
            const double simulated = simulate_latency(state.catalog, plan, q, state.config.latency);
            const PlanForest expert =
                expert_plan(state.catalog, q, state.config.latency,
                            state.config.search.allow_cross_products);
            const double expert_lat =
                simulate_latency(state.catalog, expert, q, state.config.latency);
            if (op_json) {
                nlohmann::json j{{"plan", plan_to_json(plan)},
                                 {"predicted_score", score},
                                 {"predicted_cost", predicted},
                                 {"simulated_latency", simulated},
                                 {"expert_latency", expert_lat},
                                 {"cost_mode", to_string(state.config.cost_mode)}};
                std::cout << j.dump(2) << '\n';
            } else {
                std::cout << plan_to_json(plan).dump(2) << '\n';
                std::printf("predicted score %.6g (cost %.6g, %s %s), simulated latency %.6g, "
                            "expert latency %.6g\n",
                            score, predicted, to_string(state.config.cost_mode),
                            to_string(state.config.transform), simulated, expert_lat);
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const IntegrityError& e) {
        std::fprintf(stderr, "integrity error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;  // no subcommand matched (require_subcommand should prevent this)
}

}  // namespace lqo
