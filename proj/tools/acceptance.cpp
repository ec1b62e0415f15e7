// Acceptance gate: one pass/fail line per release criterion.
//
// Every tolerance, case count, and time limit is pinned as a named constant
// below. Exit status is 0 only when every selected criterion passes.
//
// Usage:
//   acceptance                 run all criteria (1..11)
//   acceptance --only 4,5      run a subset (lines are still printed in order)
//   acceptance --episodes 12   shorten learning runs (development only)
//   acceptance --seeds 11,12   override learning-run seeds (development only)

#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lqo/cli.hpp"
#include "lqo/driver.hpp"
#include "lqo/expert.hpp"
#include "lqo/rvec.hpp"
#include "test_util.hpp"

using namespace lqo;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Pinned acceptance constants.
// ---------------------------------------------------------------------------
constexpr double kConvAbsTol = 1e-6;       // criterion 1
constexpr int kConvForests = 100;          // criterion 1
constexpr double kConvTimeLimit = 5.0;     // criterion 1, seconds
constexpr double kGradEps = 1e-4;          // criterion 2
constexpr double kGradRelTol = 1e-4;       // criterion 2
constexpr double kGradTimeLimit = 30.0;    // criterion 2, seconds
constexpr int kBenchQueries = 50;          // criteria 4/5
constexpr double kSearchTimeLimit = 120.0; // criterion 4, seconds
constexpr int kEpisodes = 50;              // criteria 6/7/8
constexpr double kMedianAt25 = 1.0;        // criterion 6
constexpr double kMedianAt50 = 0.95;       // criterion 6
constexpr double kPerSeedBar = 1.05;       // criterion 6
constexpr int kSeedsWithinBar = 4;         // criterion 6, out of 5
constexpr double kLearnTimeLimit = 1800.0; // criterion 6, seconds
constexpr double kOrderSlack = 0.05;       // criterion 7
constexpr int kEmbedTrials = 5;            // criterion 9
constexpr int kEmbedTrialsNeeded = 4;      // criterion 9
constexpr int kPropertyCases = 1000;       // criterion 11, per suite

std::vector<uint64_t> g_seeds{11, 12, 13, 14, 15};  // criteria 6/7/8
int g_episodes = kEpisodes;

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* pattern, ...) {
    va_list args;
    va_start(args, pattern);
    char buf[512];
    vsnprintf(buf, sizeof buf, pattern, args);
    va_end(args);
    return buf;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

PlanForest start_state(const Query& q) {
    PlanForest f;
    f.query_id = q.id;
    for (RelationId r : q.relations) f.roots.push_back(PlanNode::make_scan(ScanKind::unspec, r));
    return f;
}

// ---------------------------------------------------------------------------
// Criterion 1: batched tree convolution against a straight-line per-node
// recomputation.
// ---------------------------------------------------------------------------

nn::VecForest<double> random_forest(int nodes, int channels, Rng& rng) {
    nn::VecForest<double> f;
    f.channels = channels;
    f.left.assign(size_t(nodes), -1);
    f.right.assign(size_t(nodes), -1);
    std::vector<int> open{0};
    f.roots = {0};
    for (int i = 1; i < nodes; ++i) {
        while (true) {
            int p = open[size_t(rng.next_below(open.size()))];
            if (f.left[size_t(p)] < 0) {
                f.left[size_t(p)] = i;
                break;
            }
            if (f.right[size_t(p)] < 0) {
                f.right[size_t(p)] = i;
                break;
            }
            open.erase(std::find(open.begin(), open.end(), p));
        }
        open.push_back(i);
    }
    f.x.resize(size_t(nodes) * size_t(channels));
    for (auto& v : f.x) v = rng.next_double() * 2.0 - 1.0;
    return f;
}

std::vector<double> conv_by_hand(const nn::Filterbank<double>& fb, const nn::VecForest<double>& in) {
    const int n = in.nodes(), cin = fb.cin, cout = fb.cout;
    std::vector<double> out(size_t(n) * size_t(cout), 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < cout; ++k) {
            double acc = fb.use_bias ? double(fb.b.w[size_t(k)]) : 0.0;
            const double* w = fb.w.w.data() + size_t(k) * size_t(3 * cin);
            for (int j = 0; j < cin; ++j) acc += w[j] * in.node(i)[j];
            if (in.left[size_t(i)] >= 0)
                for (int j = 0; j < cin; ++j) acc += w[cin + j] * in.node(in.left[size_t(i)])[j];
            if (in.right[size_t(i)] >= 0)
                for (int j = 0; j < cin; ++j)
                    acc += w[2 * cin + j] * in.node(in.right[size_t(i)])[j];
            out[size_t(i) * size_t(cout) + size_t(k)] = acc > 0 ? acc : nn::kLeakySlope * acc;
        }
    return out;
}

Outcome criterion_1() {
    const double t0 = now_s();
    Rng rng(0xC1);
    double worst = 0.0;
    for (int iter = 0; iter < kConvForests; ++iter) {
        const int nodes = 1 + int(rng.next_below(15));
        const int cin = 1 + int(rng.next_below(32));
        const int cout = 1 + int(rng.next_below(32));
        nn::VecForest<double> in = random_forest(nodes, cin, rng);

        nn::Filterbank<double> fb;
        fb.cin = cin;
        fb.cout = cout;
        fb.use_bias = true;
        fb.w.resize(size_t(cout) * size_t(3 * cin));
        fb.b.resize(size_t(cout));
        for (auto& w : fb.w.w) w = rng.next_double() * 2.0 - 1.0;
        for (auto& b : fb.b.w) b = rng.next_double() * 2.0 - 1.0;

        nn::VecForest<double> out;
        nn::tree_conv(fb, in, out);
        const std::vector<double> ref = conv_by_hand(fb, in);
        for (size_t i = 0; i < ref.size(); ++i)
            worst = std::max(worst, std::abs(ref[i] - double(out.x[i])));
    }
    const double dt = now_s() - t0;
    return {worst <= kConvAbsTol && dt < kConvTimeLimit,
            fmt("%d forests, max |batched - by hand| = %.2e (tol %.0e), %.1fs (limit %.0fs)",
                kConvForests, worst, kConvAbsTol, dt, kConvTimeLimit)};
}

// ---------------------------------------------------------------------------
// Criterion 2: reverse-mode gradients of a miniature value network against
// central finite differences.
// ---------------------------------------------------------------------------

Outcome criterion_2() {
    const double t0 = now_s();
    CatalogConfig cc;
    cc.fact_tables = 1;
    cc.dim_tables = 1;
    cc.fact_rows = 300;
    cc.dim_rows = 60;
    cc.attr_columns = 1;
    cc.attr_domain = 6;
    Catalog cat = generate_catalog(cc, 21);
    WorkloadConfig wc;
    wc.num_queries = 2;
    wc.joins_min = 1;
    wc.joins_max = 1;
    auto queries = generate_workload(cat, wc, 22);

    FeatureLayout layout = layout_from_catalog(cat, FeatVariant::histogram, nullptr);
    ValueNetDims dims{8, 6, 4, 8, 6, 4, 4, 3};  // every width <= 8

    // Representative states: the multi-root start and a complete plan, per
    // query. Each prediction's gradient is checked on its own.
    std::vector<std::pair<std::vector<double>, nn::VecForest<double>>> states;
    Rng rng(77);
    for (const Query& q : queries) {
        std::vector<double> qvec = encode_query(q, cat, FeatVariant::histogram, nullptr, layout);
        PlanForest state = start_state(q);
        states.emplace_back(qvec, encode_plan<double>(state, layout));
        while (true) {
            auto kids = children(state, q, cat.index_flags, false);
            if (kids.empty()) break;
            state = kids[rng.next_below(kids.size())];
        }
        states.emplace_back(qvec, encode_plan<double>(state, layout));
    }

    // Central differences are only valid on a linear piece: a leaky-ReLU
    // preactivation or a pooling tie inside the +-eps window makes the
    // numeric slope meaningless. Pick the first initialization whose
    // activations clear every kink by a margin, then check there.
    constexpr double kKinkMargin = 1e-3;
    auto min_margin = [&](const ValueNet<double>& candidate) {
        double margin = std::numeric_limits<double>::infinity();
        for (const auto& [qvec, forest] : states) {
            NetTrace<double> tr;
            value_forward(candidate, qvec, forest, tr);
            for (const nn::Mat<double>* pre : {&tr.tq1.preact, &tr.tq2.preact, &tr.tq3.preact,
                                               &tr.tc1.pre, &tr.tc2.pre, &tr.tc3.pre,
                                               &tr.tp1.preact, &tr.tp2.preact})
                for (double v : pre->a) margin = std::min(margin, std::abs(v));
            for (int c = 0; c < tr.c3.channels; ++c) {
                double top = -1e300, second = -1e300;
                for (int n = 0; n < tr.c3.nodes(); ++n) {
                    const double v = double(tr.c3.node(n)[c]);
                    if (v > top) {
                        second = top;
                        top = v;
                    } else {
                        second = std::max(second, v);
                    }
                }
                if (tr.c3.nodes() > 1) margin = std::min(margin, top - second);
            }
        }
        return margin;
    };

    ValueNet<double> net;
    uint64_t seed_used = 0;
    double margin_used = 0.0;
    for (uint64_t seed = 5; seed < 40; ++seed) {
        ValueNet<double> candidate = make_value_net<double>(
            layout.query_width(FeatVariant::histogram), layout.node_width(), dims, seed);
        const double m = min_margin(candidate);
        if (m > kKinkMargin) {
            net = std::move(candidate);
            seed_used = seed;
            margin_used = m;
            break;
        }
    }
    if (seed_used == 0) return {false, "no kink-free initialization found"};

    double worst = 0.0;
    int checked = 0;
    for (const auto& [qvec, forest] : states) {
        auto pred = [&] {
            NetTrace<double> tr;
            return double(value_forward(net, qvec, forest, tr));
        };
        zero_grads(net);
        NetTrace<double> tr;
        value_forward(net, qvec, forest, tr);
        value_backward(net, tr, 1.0);

        net.for_each_param([&](nn::Param<double>& p) {
            for (size_t i = 0; i < p.w.size(); ++i) {
                const double keep = p.w[i];
                p.w[i] = keep + kGradEps;
                const double up = pred();
                p.w[i] = keep - kGradEps;
                const double down = pred();
                p.w[i] = keep;
                const double numeric = (up - down) / (2.0 * kGradEps);
                const double scale = std::max({std::abs(numeric), std::abs(p.g[i]), 1e-6});
                worst = std::max(worst, std::abs(numeric - p.g[i]) / scale);
                ++checked;
            }
        });
    }
    const double dt = now_s() - t0;
    return {worst < kGradRelTol && dt < kGradTimeLimit && checked > 0,
            fmt("%d gradient entries over %d states (init %llu, kink margin %.1e), max rel err "
                "%.2e (tol %.0e), %.1fs (limit %.0fs)",
                checked, int(states.size()), (unsigned long long)seed_used, margin_used, worst,
                kGradRelTol, dt, kGradTimeLimit)};
}

// ---------------------------------------------------------------------------
// Criterion 3: pinned node encoding and the merge-chain detector filter.
// ---------------------------------------------------------------------------

Outcome criterion_3() {
    // Four relations, two join operators; the unspecified scan of the second
    // relation must produce exactly [0 0 0 0 1 1 0 0 0 0].
    FeatureLayout layout;
    layout.join_ops = 2;
    layout.num_relations = 4;
    layout.col_offset = {0, 1, 2, 3, 4};
    if (layout.node_width() != 10) return {false, "layout width is not 10"};

    std::vector<double> row(10, -1.0);
    encode_scan_row(layout, ScanKind::unspec, 1, row.data());
    const std::vector<double> pinned{0, 0, 0, 0, 1, 1, 0, 0, 0, 0};
    if (row != pinned) return {false, "unspecified-scan row mismatch"};

    // A single filter with weights {1,-1,0,...} in all three positions reads
    // (merge bits - hash bits) over each parent/child triangle: 2 for a merge
    // join over a merge join, 0 for a hash join over a merge join.
    auto lower = PlanNode::make_join(JoinOp::merge, PlanNode::make_scan(ScanKind::table, 0),
                                     PlanNode::make_scan(ScanKind::table, 1));
    auto scan_c = PlanNode::make_scan(ScanKind::table, 2);
    PlanForest merge_top, hash_top;
    merge_top.query_id = hash_top.query_id = 0;
    merge_top.roots = {PlanNode::make_join(JoinOp::merge, lower, scan_c)};
    hash_top.roots = {PlanNode::make_join(JoinOp::hash, lower, scan_c)};

    nn::Filterbank<double> fb;
    fb.cin = layout.node_width();
    fb.cout = 1;
    fb.use_bias = false;
    fb.w.resize(size_t(3 * fb.cin));
    fb.b.resize(1);
    for (int seg = 0; seg < 3; ++seg) {
        fb.w.w[size_t(seg * fb.cin) + 0] = 1.0;
        fb.w.w[size_t(seg * fb.cin) + 1] = -1.0;
    }

    double got_merge = 0.0, got_hash = 0.0;
    for (auto [plan, out] : {std::pair{&merge_top, &got_merge}, std::pair{&hash_top, &got_hash}}) {
        auto forest = encode_plan<double>(*plan, layout);
        nn::VecForest<double> conv;
        nn::tree_conv(fb, forest, conv);
        *out = double(conv.node(conv.roots[0])[0]);
    }
    return {got_merge == 2.0 && got_hash == 0.0,
            fmt("scan row pinned; detector outputs %.1f and %.1f (want 2 and 0)", got_merge,
                got_hash)};
}

// ---------------------------------------------------------------------------
// Criteria 4/5: search and expert optimality against exhaustive enumeration
// over a shared set of 50 random queries with at most 4 relations.
// ---------------------------------------------------------------------------

struct Bench4 {
    Catalog cat;
    std::vector<Query> queries;
};

const Bench4& bench4() {
    static Bench4 b = [] {
        CatalogConfig cc;
        cc.fact_tables = 1;
        cc.dim_tables = 3;
        cc.fact_rows = 600;
        cc.dim_rows = 80;
        cc.attr_columns = 2;
        cc.attr_domain = 8;
        Catalog cat = generate_catalog(cc, 7);
        WorkloadConfig wc;
        wc.num_queries = kBenchQueries;
        wc.joins_min = 1;
        wc.joins_max = 3;  // at most 4 relations
        auto queries = generate_workload(cat, wc, 8);
        return Bench4{std::move(cat), std::move(queries)};
    }();
    return b;
}

Outcome criterion_4() {
    const double t0 = now_s();
    const Bench4& b = bench4();
    SearchConfig cfg;
    cfg.cutoff = SearchConfig::Cutoff::expansions;
    cfg.expansion_budget = int64_t(1) << 40;  // effectively uncapped
    cfg.wallclock_ms = 1e12;
    int mismatches = 0;
    for (const Query& q : b.queries) {
        testutil::BestCompletionEvaluator exact(q, b.cat, false);
        PlanForest found = best_first_search(exact, q, b.cat, cfg);
        const double got = simulate_latency(b.cat, found, q, {});
        const double want =
            testutil::exhaustive_min(q, b.cat, false,
                                     [&](const PlanForest& p) {
                                         return simulate_latency(b.cat, p, q, {});
                                     })
                .first;
        if (got != want) ++mismatches;
    }
    const double dt = now_s() - t0;
    return {mismatches == 0 && dt < kSearchTimeLimit,
            fmt("%d queries, %d latency mismatches vs exhaustive minimum, %.1fs (limit %.0fs)",
                kBenchQueries, mismatches, dt, kSearchTimeLimit)};
}

Outcome criterion_5() {
    const Bench4& b = bench4();
    int mismatches = 0;
    for (const Query& q : b.queries) {
        const PlanForest plan = expert_plan(b.cat, q, {}, false);
        const double got = estimate_cost(b.cat, plan, q, {}).value;
        const double want =
            testutil::exhaustive_min(q, b.cat, false,
                                     [&](const PlanForest& p) {
                                         return estimate_cost(b.cat, p, q, {}).value;
                                     })
                .first;
        if (got != want) ++mismatches;
    }
    return {mismatches == 0, fmt("%d queries, %d estimated-cost mismatches vs exhaustive minimum",
                                 kBenchQueries, mismatches)};
}

// ---------------------------------------------------------------------------
// Criteria 6/7/8: end-to-end learning runs on a correlated catalog.
// ---------------------------------------------------------------------------

struct LearnRun {
    std::vector<double> test_curve;        // mean test ratio per episode (1-based)
    std::vector<double> final_test_ratios; // per-query ratios at the last episode
};

RunConfig learning_config(FeatVariant variant, CostMode mode, uint64_t seed) {
    RunConfig cfg;
    cfg.catalog.fact_tables = 1;
    cfg.catalog.dim_tables = 6;
    cfg.catalog.fact_rows = 4000;
    cfg.catalog.dim_rows = 200;
    cfg.catalog.attr_columns = 2;
    cfg.catalog.attr_domain = 6;
    // Two strongly correlated cross-table column pairs: each fact attribute
    // tracks one dimension attribute. Table ids: fact0 = 0, dim0.. = 1..6;
    // fact columns: id, 6 FKs, a0 = 7, a1 = 8; dim columns: id, a0 = 1, a1.
    cfg.catalog.correlations = {{1, 1, 0, 7, 0.85}, {2, 1, 0, 8, 0.85}};
    cfg.workload.num_queries = 50;  // 40 train / 10 test at fraction 0.8
    cfg.workload.joins_min = 2;
    cfg.workload.joins_max = 6;
    cfg.workload.corr_prob = 0.7;
    cfg.workload.consistent_prob = 0.85;
    cfg.latency.noise_sigma = 0.1;
    cfg.sgns.dim = 12;
    cfg.sgns.window = 4;
    cfg.sgns.epochs = 4;
    cfg.sgns.seed = seed;
    cfg.net = ValueNetDims{48, 32, 16, 64, 48, 32, 24, 12};
    cfg.search.expansion_budget = 256;
    cfg.training.steps = 400;
    cfg.training.batch = 16;
    cfg.variant = variant;
    cfg.cost_mode = mode;
    cfg.seed = seed;
    return cfg;
}

LearnRun learning_run(FeatVariant variant, CostMode mode, uint64_t seed, const char* tag) {
    RunConfig cfg = learning_config(variant, mode, seed);
    Catalog cat = generate_catalog(cfg.catalog, cfg.seed);
    auto queries = generate_workload(cat, cfg.workload, cfg.seed);
    std::optional<EmbeddingModel> embeddings;
    if (variant == FeatVariant::r_vector)
        embeddings = train_embeddings(build_sentences(cat, cfg.denormalize), cfg.sgns);

    RunState s = make_run_state(cfg, std::move(cat), std::move(queries), std::move(embeddings));
    bootstrap(s);
    LearnRun out;
    const double t0 = now_s();
    for (int e = 1; e <= g_episodes; ++e) {
        run_episode(s);
        out.test_curve.push_back(s.curve.back().test_mean_ratio);
        if (e % 10 == 0 || e == g_episodes)
            fprintf(stderr, "  [%s seed %llu] episode %d/%d train ratio %.3f test ratio %.3f "
                    "loss %.3f->%.3f (%.0fs)\n",
                    tag, (unsigned long long)seed, e, g_episodes,
                    s.curve.back().train_mean_ratio, out.test_curve.back(),
                    s.curve.back().loss_first, s.curve.back().loss_last, now_s() - t0);
    }
    for (const MetricsRow& r : s.metrics)
        if (r.episode == s.episode && r.split == "test") out.final_test_ratios.push_back(r.ratio);
    {
        std::string dist = "  final test ratios:";
        std::vector<double> sorted = out.final_test_ratios;
        std::sort(sorted.begin(), sorted.end());
        for (double r : sorted) dist += fmt(" %.2f", r);
        fprintf(stderr, "%s\n", dist.c_str());
    }
    return out;
}

std::map<std::string, std::vector<LearnRun>> g_run_cache;

const std::vector<LearnRun>& runs_for(FeatVariant variant, CostMode mode, const char* tag) {
    auto it = g_run_cache.find(tag);
    if (it != g_run_cache.end()) return it->second;
    std::vector<LearnRun> runs;
    for (uint64_t seed : g_seeds) runs.push_back(learning_run(variant, mode, seed, tag));
    return g_run_cache.emplace(tag, std::move(runs)).first->second;
}

double median_curve_at(const std::vector<LearnRun>& runs, int episode) {
    std::vector<double> v;
    for (const LearnRun& r : runs) v.push_back(r.test_curve.at(size_t(episode) - 1));
    return median(v);
}

Outcome criterion_6() {
    const double t0 = now_s();
    const auto& runs = runs_for(FeatVariant::histogram, CostMode::absolute, "histogram-absolute");
    const double dt = now_s() - t0;

    const int mid = std::min(25, g_episodes), last = g_episodes;
    const double med25 = median_curve_at(runs, mid);
    const double med50 = median_curve_at(runs, last);
    int within = 0;
    for (const LearnRun& r : runs) within += r.test_curve.back() <= kPerSeedBar;
    const bool pass = med25 <= kMedianAt25 && med50 <= kMedianAt50 && within >= kSeedsWithinBar &&
                      dt < kLearnTimeLimit;
    return {pass,
            fmt("median test ratio %.3f @ep%d (need <= %.2f), %.3f @ep%d (need <= %.2f), "
                "%d/%d seeds <= %.2f (need >= %d), %.0fs (limit %.0fs)",
                med25, mid, kMedianAt25, med50, last, kMedianAt50, within, int(runs.size()),
                kPerSeedBar, kSeedsWithinBar, dt, kLearnTimeLimit)};
}

Outcome criterion_7() {
    const double h =
        median_curve_at(runs_for(FeatVariant::histogram, CostMode::absolute, "histogram-absolute"),
                        g_episodes);
    const double o =
        median_curve_at(runs_for(FeatVariant::one_hot, CostMode::absolute, "one-hot-absolute"),
                        g_episodes);
    const double r =
        median_curve_at(runs_for(FeatVariant::r_vector, CostMode::absolute, "r-vector-absolute"),
                        g_episodes);
    const bool pass = r <= h + kOrderSlack && h <= o + kOrderSlack;
    return {pass, fmt("final median test ratio: r-vector %.3f <= histogram %.3f <= one-hot %.3f "
                      "(slack %.2f)",
                      r, h, o, kOrderSlack)};
}

Outcome criterion_8() {
    const auto& abs_runs =
        runs_for(FeatVariant::histogram, CostMode::absolute, "histogram-absolute");
    const auto& rel_runs =
        runs_for(FeatVariant::histogram, CostMode::relative, "histogram-relative");

    auto regressed_median = [](const std::vector<LearnRun>& runs) {
        std::vector<double> counts;
        for (const LearnRun& r : runs) {
            int c = 0;
            for (double ratio : r.final_test_ratios) c += ratio > 1.0;
            counts.push_back(double(c));
        }
        return median(counts);
    };
    const double reg_abs = regressed_median(abs_runs);
    const double reg_rel = regressed_median(rel_runs);
    const double med_rel = median_curve_at(rel_runs, g_episodes);
    const bool pass = reg_rel <= reg_abs && med_rel < 1.0;
    return {pass,
            fmt("regressed test queries at final episode: relative %.1f <= absolute %.1f; "
                "relative median mean ratio %.3f (need < 1)",
                reg_rel, reg_abs, med_rel)};
}

// ---------------------------------------------------------------------------
// Criterion 9: embeddings move strongly co-occurring value pairs together.
// ---------------------------------------------------------------------------

Outcome criterion_9() {
    int successes = 0;
    std::string per_trial;
    for (int trial = 0; trial < kEmbedTrials; ++trial) {
        CatalogConfig cc;
        cc.fact_tables = 1;
        cc.dim_tables = 1;
        cc.fact_rows = 2500;
        cc.dim_rows = 100;
        cc.attr_columns = 1;
        cc.attr_domain = 4;
        // dim0.a0 (table 1, column 1) drives fact0.a0 (table 0, column 2):
        // the shifted partner value co-occurs at ~84%, the rest at ~5%.
        cc.correlations = {{1, 1, 0, 2, 0.7}};
        Catalog cat = generate_catalog(cc, 31 + uint64_t(trial));

        SgnsParams sg;
        sg.seed = 100 + uint64_t(trial);
        EmbeddingModel model = train_embeddings(build_sentences(cat, true), sg);

        const int64_t domain = cc.attr_domain;
        double corr = 0.0, uncorr = 0.0;
        for (int64_t v = 0; v < domain; ++v) {
            const std::string dim_tok = value_token(cat, 1, 1, v);
            corr += embedding_cosine(model, dim_tok, value_token(cat, 0, 2, (v + 3) % domain));
            uncorr += embedding_cosine(model, dim_tok,
                                       value_token(cat, 0, 2, (v + 3 + domain / 2) % domain));
        }
        corr /= double(domain);
        uncorr /= double(domain);
        successes += corr > uncorr;
        per_trial += fmt("%s%.2f/%.2f", trial ? " " : "", corr, uncorr);
    }
    return {successes >= kEmbedTrialsNeeded,
            fmt("%d/%d trials with cosine(correlated) > cosine(uncorrelated) [%s]", successes,
                kEmbedTrials, per_trial.c_str())};
}

// ---------------------------------------------------------------------------
// Criterion 10: byte-identical metrics across two identical pipeline runs.
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in.good()) return "<missing " + p.string() + ">";
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome criterion_10() {
    const fs::path base = fs::temp_directory_path() / "lqo_acceptance" / "determinism";
    fs::remove_all(base);
    fs::create_directories(base);

    RunConfig cfg;
    cfg.catalog.fact_tables = 1;
    cfg.catalog.dim_tables = 3;
    cfg.catalog.fact_rows = 1500;
    cfg.catalog.dim_rows = 120;
    cfg.catalog.attr_columns = 2;
    cfg.catalog.attr_domain = 10;
    cfg.workload.num_queries = 10;
    cfg.workload.joins_min = 1;
    cfg.workload.joins_max = 2;
    cfg.latency.noise_sigma = 0.1;
    cfg.net = ValueNetDims{32, 24, 16, 32, 24, 16, 16, 8};
    cfg.training.steps = 25;
    cfg.search.cutoff = SearchConfig::Cutoff::expansions;
    cfg.search.expansion_budget = 48;
    const fs::path cfg_path = base / "config.json";
    std::ofstream(cfg_path) << run_config_to_json(cfg).dump(2);

    // The command-line tool reports progress on stdout; keep this binary's
    // stdout to one line per criterion by parking those reports in a file.
    fflush(stdout);
    const int saved_stdout = dup(1);
    FILE* sink = std::fopen((base / "pipeline.log").string().c_str(), "w");
    dup2(fileno(sink), 1);
    int rc = 0;
    for (const char* leg : {"a", "b"}) {
        const fs::path d = base / leg;
        fs::create_directories(d);
        const std::string conf = "--config=" + cfg_path.string();
        rc = dispatch({"gen-catalog", conf, "--seed=5", "--out=" + (d / "catalog.json").string()});
        if (!rc)
            rc = dispatch({"gen-workload", conf, "--seed=6",
                           "--catalog=" + (d / "catalog.json").string(),
                           "--out=" + (d / "workload.json").string()});
        if (!rc)
            rc = dispatch({"bootstrap", conf, "--catalog=" + (d / "catalog.json").string(),
                           "--workload=" + (d / "workload.json").string(), "--seed=5",
                           "--state-dir=" + (d / "state").string()});
        if (!rc)
            rc = dispatch({"train", "--state-dir=" + (d / "state").string(), "--episodes=3",
                           "--metrics=" + (d / "metrics.csv").string(),
                           "--curve=" + (d / "curve.csv").string()});
        if (rc) break;
    }
    fflush(stdout);
    dup2(saved_stdout, 1);
    close(saved_stdout);
    std::fclose(sink);
    if (rc) return {false, "a pipeline stage exited nonzero"};
    const bool metrics_same = slurp(base / "a" / "metrics.csv") == slurp(base / "b" / "metrics.csv");
    const bool curve_same = slurp(base / "a" / "curve.csv") == slurp(base / "b" / "curve.csv");
    return {metrics_same && curve_same,
            fmt("two gen->bootstrap->3-episode runs: metrics CSV %s, curve CSV %s",
                metrics_same ? "byte-identical" : "DIFFER",
                curve_same ? "byte-identical" : "DIFFER")};
}

// ---------------------------------------------------------------------------
// Criterion 11: property suites at >= 1000 random cases each.
// ---------------------------------------------------------------------------

/// Plan-construction properties: every child refines its parent (parent is a
/// subplan), keys are root-order invariant and parse back, walks terminate in
/// valid complete plans, and the canonical construction sequence chains.
std::pair<int, std::string> plan_properties() {
    CatalogConfig cc;
    cc.fact_tables = 1;
    cc.dim_tables = 4;
    cc.fact_rows = 200;
    cc.dim_rows = 40;
    Catalog cat = generate_catalog(cc, 50);
    WorkloadConfig wc;
    wc.num_queries = 10;
    wc.joins_min = 1;
    wc.joins_max = 4;

    Rng rng(51);
    int cases = 0;
    for (uint64_t ws = 0; ws < 22; ++ws) {
        for (const Query& q : generate_workload(cat, wc, 700 + ws)) {
            PlanForest state = start_state(q);
            while (true) {
                auto kids = children(state, q, cat.index_flags, false);
                if (is_complete(state, q)) {
                    if (!kids.empty()) return {cases, "complete state has children"};
                    validate_plan(state, q);
                    for (const PlanForest& st : construction_states(state, q))
                        if (!is_subplan(st, state)) return {cases, "construction state not a subplan"};
                    break;
                }
                if (kids.empty()) return {cases, "incomplete state has no children"};
                for (const PlanForest& k : kids)
                    if (!is_subplan(state, k)) return {cases, "parent not a subplan of child"};

                PlanForest flipped = state;
                std::reverse(flipped.roots.begin(), flipped.roots.end());
                if (canonical_key(flipped) != canonical_key(state))
                    return {cases, "canonical key depends on root order"};
                if (canonical_key(parse_canonical_key(canonical_key(state), q.id)) !=
                    canonical_key(state))
                    return {cases, "canonical key does not parse back"};

                ++cases;
                state = kids[rng.next_below(kids.size())];
            }
        }
    }
    return {cases, ""};
}

/// Simulator properties: true cardinalities equal a nested-loop brute force,
/// and the simulated latency equals a per-node recomputation of the cost
/// formulas over those cardinalities.
std::pair<int, std::string> simulator_properties() {
    CatalogConfig cc;
    cc.fact_tables = 1;
    cc.dim_tables = 2;
    cc.fact_rows = 400;
    cc.dim_rows = 80;
    cc.attr_columns = 2;
    cc.attr_domain = 6;
    Catalog cat = generate_catalog(cc, 60);
    WorkloadConfig wc;
    wc.num_queries = 12;
    wc.joins_min = 1;
    wc.joins_max = 2;
    const LatencyModel m;

    // Row-id tuples per covered relation, built with filters + nested loops.
    struct Brute {
        std::vector<RelationId> rels;
        std::vector<std::vector<int32_t>> tuples;
    };
    std::function<Brute(const PlanNode&, const Query&)> brute = [&](const PlanNode& n,
                                                                    const Query& q) {
        if (n.is_scan()) {
            Brute b;
            b.rels = {n.relation};
            for (int32_t row = 0; row < cat.row_count(n.relation); ++row) {
                bool pass = true;
                for (const auto& p : q.predicates)
                    if (p.relation == n.relation &&
                        !predicate_matches(p, cat.rows[size_t(n.relation)][size_t(row)]
                                                       [size_t(p.column)]))
                        pass = false;
                if (pass) b.tuples.push_back({row});
            }
            return b;
        }
        Brute l = brute(*n.left, q), r = brute(*n.right, q);
        Brute out;
        out.rels = l.rels;
        out.rels.insert(out.rels.end(), r.rels.begin(), r.rels.end());
        auto pos = [](const Brute& b, RelationId rel) {
            return int(std::find(b.rels.begin(), b.rels.end(), rel) - b.rels.begin());
        };
        for (const auto& lt : l.tuples)
            for (const auto& rt : r.tuples) {
                bool keep = true;
                for (const auto& e : q.join_edges) {
                    RelationId la = e.a, lb = e.b;
                    int pa = pos(l, la) < int(l.rels.size()) ? pos(l, la) : -1;
                    int pb = pos(l, lb) < int(l.rels.size()) ? pos(l, lb) : -1;
                    int qa = pos(r, la) < int(r.rels.size()) ? pos(r, la) : -1;
                    int qb = pos(r, lb) < int(r.rels.size()) ? pos(r, lb) : -1;
                    int64_t lv, rv;
                    if (pa >= 0 && qb >= 0) {
                        lv = cat.rows[size_t(la)][size_t(lt[size_t(pa)])][size_t(e.a_col)];
                        rv = cat.rows[size_t(lb)][size_t(rt[size_t(qb)])][size_t(e.b_col)];
                    } else if (pb >= 0 && qa >= 0) {
                        lv = cat.rows[size_t(lb)][size_t(lt[size_t(pb)])][size_t(e.b_col)];
                        rv = cat.rows[size_t(la)][size_t(rt[size_t(qa)])][size_t(e.a_col)];
                    } else {
                        continue;
                    }
                    if (lv != rv) {
                        keep = false;
                        break;
                    }
                }
                if (!keep) continue;
                auto tup = lt;
                tup.insert(tup.end(), rt.begin(), rt.end());
                out.tuples.push_back(std::move(tup));
            }
        return out;
    };

    // Delivered sort order of a subtree, mirroring the documented rule.
    using Order = std::vector<std::pair<RelationId, int32_t>>;
    std::function<std::set<RelationId>(const PlanNode&)> rels_of = [&](const PlanNode& n) {
        if (n.is_scan()) return std::set<RelationId>{n.relation};
        auto s = rels_of(*n.left);
        for (RelationId r : rels_of(*n.right)) s.insert(r);
        return s;
    };
    auto first_key = [&](const PlanNode& n, const Query& q)
        -> std::optional<std::array<int64_t, 4>> {  // l_rel, l_col, r_rel, r_col
        auto ls = rels_of(*n.left), rs = rels_of(*n.right);
        for (const auto& e : q.join_edges) {
            if (ls.count(e.a) && rs.count(e.b)) return {{e.a, e.a_col, e.b, e.b_col}};
            if (ls.count(e.b) && rs.count(e.a)) return {{e.b, e.b_col, e.a, e.a_col}};
        }
        return std::nullopt;
    };
    std::function<Order(const PlanNode&, const Query&)> order_of = [&](const PlanNode& n,
                                                                       const Query& q) -> Order {
        if (n.is_scan())
            return n.scan_kind == ScanKind::index ? Order{{n.relation, 0}} : Order{};
        if (n.join_op != JoinOp::merge) return {};
        auto k = first_key(n, q);
        if (!k) return {};
        return {{RelationId((*k)[0]), int32_t((*k)[1])}, {RelationId((*k)[2]), int32_t((*k)[3])}};
    };

    // Per-node local cost over true cardinalities; the whole-plan latency is
    // the sum, which simulate_latency must match.
    std::function<double(const PlanNode&, const Query&)> local_cost = [&](const PlanNode& n,
                                                                          const Query& q) {
        if (n.is_scan()) {
            if (n.scan_kind == ScanKind::index)
                return m.c_io + m.c_is * double(true_cardinality(cat, n, q));
            return m.c_ts * double(cat.row_count(n.relation));
        }
        const double nl = double(true_cardinality(cat, *n.left, q));
        const double nr = double(true_cardinality(cat, *n.right, q));
        const double no = double(true_cardinality(cat, n, q));
        switch (n.join_op) {
            case JoinOp::loop:
                return m.c_l * nl * nr;
            case JoinOp::hash:
                return m.c_hb * nl + m.c_hp * nr + m.c_ho * no;
            case JoinOp::merge: {
                double cost = m.c_m * (nl + nr) + m.c_ho * no;
                auto k = first_key(n, q);
                auto sorted_on = [&](const PlanNode& side, RelationId rel, int32_t col) {
                    Order o = order_of(side, q);
                    return std::find(o.begin(), o.end(), std::make_pair(rel, col)) != o.end();
                };
                auto pen = [&](double x) { return m.c_s * x * std::log2(x + 1.0); };
                if (!k || !sorted_on(*n.left, RelationId((*k)[0]), int32_t((*k)[1]))) cost += pen(nl);
                if (!k || !sorted_on(*n.right, RelationId((*k)[2]), int32_t((*k)[3]))) cost += pen(nr);
                return cost;
            }
        }
        return 0.0;
    };

    Rng rng(61);
    int cases = 0;
    for (uint64_t ws = 0; ws < 25; ++ws) {
        for (const Query& q : generate_workload(cat, wc, 900 + ws)) {
            // Random complete plan by descent.
            PlanForest plan = start_state(q);
            while (!is_complete(plan, q)) {
                auto kids = children(plan, q, cat.index_flags, false);
                plan = kids[rng.next_below(kids.size())];
            }

            // Cardinality at every node vs the nested-loop brute force.
            double total = 0.0;
            std::function<bool(const PlanNode&)> walk = [&](const PlanNode& n) {
                if (int64_t(brute(n, q).tuples.size()) != true_cardinality(cat, n, q)) return false;
                total += local_cost(n, q);
                ++cases;
                if (!n.is_scan()) return walk(*n.left) && walk(*n.right);
                return true;
            };
            if (!walk(*plan.roots[0])) return {cases, "cardinality mismatch vs brute force"};

            const double sim = simulate_latency(cat, plan, q, m);
            if (std::abs(sim - total) > 1e-9 * std::max(1.0, std::abs(total)))
                return {cases, fmt("latency %.12g != per-node sum %.12g", sim, total)};

            // Multiplicative noise is deterministic in (seed, plan).
            LatencyModel noisy = m;
            noisy.noise_sigma = 0.25;
            noisy.noise_seed = 99;
            if (simulate_latency(cat, plan, q, noisy) != simulate_latency(cat, plan, q, noisy))
                return {cases, "noise draw not reproducible"};
        }
    }
    return {cases, ""};
}

/// Training-target properties: each state's label is the transformed minimum
/// cost over the experienced completions containing it, and the de-duplicated
/// state set is exactly the union of construction states.
std::pair<int, std::string> target_properties() {
    const Bench4& b = bench4();
    Rng rng(71);
    int cases = 0;
    for (int batch = 0; batch < 40; ++batch) {
        WorkloadConfig wc;
        wc.num_queries = 5;
        wc.joins_min = 1;
        wc.joins_max = 2;
        auto queries = generate_workload(b.cat, wc, 2000 + uint64_t(batch));

        std::vector<ExperienceEntry> exp;
        for (const Query& q : queries) {
            auto all = testutil::enumerate_complete_plans(q, b.cat, false);
            double baseline = 0.0;
            for (int k = 0; k < 6; ++k) {
                const PlanForest& plan = all[rng.next_below(all.size())];
                const double latency = 10.0 + rng.next_double() * 990.0;
                if (k == 0) baseline = latency;
                exp.push_back({q.id, plan, latency, baseline});
            }
        }

        const CostMode mode = batch % 2 ? CostMode::relative : CostMode::absolute;
        const TargetTransform tf = batch % 3 ? TargetTransform::log1p : TargetTransform::identity;
        auto samples = build_training_set(exp, queries, mode, tf);

        std::set<std::pair<int32_t, std::string>> seen;
        for (const auto& s : samples) {
            if (!seen.insert({s.query_id, canonical_key(s.plan)}).second)
                return {cases, "duplicate state in training set"};
            double want = std::numeric_limits<double>::infinity();
            for (const auto& e : exp) {
                if (e.query_id != s.query_id || !is_subplan(s.plan, e.plan)) continue;
                want = std::min(want,
                                mode == CostMode::relative ? e.latency / e.baseline : e.latency);
            }
            if (!std::isfinite(want)) return {cases, "state contained in no completion"};
            if (transform_target(want, tf) != s.target)
                return {cases, "target is not the transformed minimum"};
            ++cases;
        }
        for (const auto& e : exp)
            for (const PlanForest& st : construction_states(e.plan, *std::find_if(
                     queries.begin(), queries.end(),
                     [&](const Query& q) { return q.id == e.query_id; })))
                if (!seen.count({e.query_id, canonical_key(st)}))
                    return {cases, "construction state missing from training set"};
    }
    return {cases, ""};
}

Outcome criterion_11() {
    const auto [plan_cases, plan_err] = plan_properties();
    if (!plan_err.empty()) return {false, "plan properties: " + plan_err};
    const auto [sim_cases, sim_err] = simulator_properties();
    if (!sim_err.empty()) return {false, "simulator properties: " + sim_err};
    const auto [tgt_cases, tgt_err] = target_properties();
    if (!tgt_err.empty()) return {false, "target properties: " + tgt_err};
    const bool enough = plan_cases >= kPropertyCases && sim_cases >= kPropertyCases &&
                        tgt_cases >= kPropertyCases;
    return {enough, fmt("plan construction %d, simulator oracle %d, training targets %d cases "
                        "(need >= %d each), all properties held",
                        plan_cases, sim_cases, tgt_cases, kPropertyCases)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto parse_list = [](const std::string& s, auto insert) {
            std::stringstream ss(s);
            std::string tok;
            while (std::getline(ss, tok, ',')) insert(std::stoi(tok));
        };
        if (arg == "--only" && i + 1 < argc)
            parse_list(argv[++i], [&](int v) { only.insert(v); });
        else if (arg == "--episodes" && i + 1 < argc)
            g_episodes = std::stoi(argv[++i]);
        else if (arg == "--seeds" && i + 1 < argc) {
            g_seeds.clear();
            parse_list(argv[++i], [&](int v) { g_seeds.push_back(uint64_t(v)); });
        } else {
            fprintf(stderr, "unknown argument: %s\n", arg.c_str());
            return 2;
        }
    }

    const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
        {1, criterion_1}, {2, criterion_2},  {3, criterion_3},  {4, criterion_4},
        {5, criterion_5}, {6, criterion_6},  {7, criterion_7},  {8, criterion_8},
        {9, criterion_9}, {10, criterion_10}, {11, criterion_11},
    };

    int failures = 0;
    std::vector<std::string> lines;
    for (const auto& [id, fn] : criteria) {
        if (!only.empty() && !only.count(id)) continue;
        fprintf(stderr, "running criterion %d...\n", id);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        lines.push_back(fmt("[%s] criterion %d: %s", o.pass ? "PASS" : "FAIL", id,
                            o.detail.c_str()));
    }
    for (const std::string& line : lines) printf("%s\n", line.c_str());
    return failures == 0 ? 0 : 1;
}
