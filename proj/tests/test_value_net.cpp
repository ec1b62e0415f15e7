// Value network: end-to-end gradients, training-set construction, overfit
// sanity, checkpointing, and the memoizing search-time evaluator.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lqo/expert.hpp"
#include "lqo/simulator.hpp"
#include "lqo/value_net.hpp"

using namespace lqo;

namespace {

ValueNetDims tiny_dims() {
    ValueNetDims d;
    d.q1 = 10;
    d.q2 = 8;
    d.q3 = 6;
    d.c1 = 8;
    d.c2 = 7;
    d.c3 = 6;
    d.p1 = 5;
    d.p2 = 4;
    return d;
}

FeatureLayout hand_layout(int relations) {
    FeatureLayout layout;
    layout.num_relations = relations;
    layout.col_offset.assign(size_t(relations) + 1, 0);
    for (int r = 0; r < relations; ++r) layout.col_offset[size_t(r) + 1] = int32_t(r + 1);
    return layout;
}

Query two_rel_query() {
    Query q;
    q.id = 0;
    q.relations = {0, 1};
    q.join_edges = {{0, 0, 1, 0}};
    return q;
}

/// Three-node complete plan forest for the two-relation query.
PlanForest hash_plan() {
    PlanForest p;
    p.query_id = 0;
    p.roots = {PlanNode::make_join(JoinOp::hash, PlanNode::make_scan(ScanKind::table, 0),
                                   PlanNode::make_scan(ScanKind::index, 1))};
    return p;
}

PlanForest merge_plan() {
    PlanForest p;
    p.query_id = 0;
    p.roots = {PlanNode::make_join(JoinOp::merge, PlanNode::make_scan(ScanKind::table, 0),
                                   PlanNode::make_scan(ScanKind::table, 1))};
    return p;
}

CatalogConfig tiny_config() {
    CatalogConfig cfg;
    cfg.fact_tables = 1;
    cfg.dim_tables = 2;
    cfg.fact_rows = 300;
    cfg.dim_rows = 80;
    cfg.attr_columns = 2;
    cfg.attr_domain = 8;
    return cfg;
}

}  // namespace

TEST_CASE("target transforms") {
    CHECK(transform_target(0.0, TargetTransform::log1p) == 0.0);
    CHECK(transform_target(std::exp(1.0) - 1.0, TargetTransform::log1p) == doctest::Approx(1.0));
    CHECK(transform_target(-0.25, TargetTransform::identity) == -0.25);
    CHECK_THROWS_AS(transform_target(-1.0, TargetTransform::log1p), ContractError);
    for (CostMode m : {CostMode::absolute, CostMode::relative})
        CHECK(cost_mode_from_string(to_string(m)) == m);
    for (TargetTransform t : {TargetTransform::log1p, TargetTransform::identity})
        CHECK(target_transform_from_string(to_string(t)) == t);
    CHECK_THROWS_AS(cost_mode_from_string("rel"), ConfigError);
}

TEST_CASE("construction is deterministic per seed and counts its tensors") {
    auto a = make_value_net<float>(9, 7, tiny_dims(), 42);
    auto b = make_value_net<float>(9, 7, tiny_dims(), 42);
    auto c = make_value_net<float>(9, 7, tiny_dims(), 43);

    int tensors = 0;
    bool identical = true, differs = false;
    a.for_each_param([&](const nn::Param<float>& p) { ++tensors; (void)p; });
    // 6 dense layers (5 of them layer-normed) plus 3 biased filterbanks.
    CHECK(tensors == 6 * 2 + 5 * 2 + 3 * 2);

    std::vector<std::vector<float>> wa, wb, wc;
    a.for_each_param([&](const nn::Param<float>& p) { wa.push_back(p.w); });
    b.for_each_param([&](const nn::Param<float>& p) { wb.push_back(p.w); });
    c.for_each_param([&](const nn::Param<float>& p) { wc.push_back(p.w); });
    for (size_t i = 0; i < wa.size(); ++i) {
        identical = identical && wa[i] == wb[i];
        differs = differs || wa[i] != wc[i];
    }
    CHECK(identical);
    CHECK(differs);

    CHECK_THROWS_AS(make_value_net<float>(0, 7, tiny_dims(), 1), ContractError);
}

TEST_CASE("forward output changes with both query vector and plan structure") {
    FeatureLayout layout = hand_layout(2);
    auto net = make_value_net<double>(4, layout.node_width(), tiny_dims(), 7);
    std::vector<double> qv{0.2, -0.1, 0.5, 0.9};
    const double base = predict(net, qv, encode_plan<double>(hash_plan(), layout));
    std::vector<double> qv2 = qv;
    qv2[1] = 1.3;
    CHECK(predict(net, qv2, encode_plan<double>(hash_plan(), layout)) != base);
    CHECK(predict(net, qv, encode_plan<double>(merge_plan(), layout)) != base);

    std::vector<double> wrong{0.0, 0.0};
    NetTrace<double> tr;
    CHECK_THROWS_AS(value_forward(net, wrong, encode_plan<double>(hash_plan(), layout), tr),
                    ContractError);
}

TEST_CASE("whole-network gradient agrees with central finite differences") {
    FeatureLayout layout = hand_layout(2);
    auto net = make_value_net<double>(5, layout.node_width(), tiny_dims(), 19);
    Rng rng(3);
    std::vector<double> qv(5);
    for (auto& v : qv) v = rng.next_double() * 2.0 - 1.0;

    // Partial forest exercises multi-root pooling and the unspecified scan.
    PlanForest plan;
    plan.query_id = 0;
    plan.roots = {PlanNode::make_join(JoinOp::merge, PlanNode::make_scan(ScanKind::table, 0),
                                      PlanNode::make_scan(ScanKind::index, 1)),
                  PlanNode::make_scan(ScanKind::unspec, 0)};
    auto forest = encode_plan<double>(plan, layout);

    auto loss = [&]() {
        NetTrace<double> tr;
        return double(value_forward(net, qv, forest, tr));
    };

    NetTrace<double> tr;
    zero_grads(net);
    value_forward(net, qv, forest, tr);
    value_backward(net, tr, 1.0);

    double worst = 0.0;
    int checked = 0;
    net.for_each_param([&](nn::Param<double>& p) {
        for (size_t i = 0; i < p.size(); ++i) {
            const double keep = p.w[i];
            p.w[i] = keep + 1e-5;
            const double up = loss();
            p.w[i] = keep - 1e-5;
            const double down = loss();
            p.w[i] = keep;
            const double numeric = (up - down) / 2e-5;
            const double scale = std::max({std::abs(numeric), std::abs(double(p.g[i])), 1e-6});
            worst = std::max(worst, std::abs(numeric - double(p.g[i])) / scale);
            ++checked;
        }
    });
    CHECK(checked > 900);  // every parameter of the tiny net was exercised
    CHECK(worst < 1e-4);
}

TEST_CASE("training drives a single sample's loss essentially to zero") {
    FeatureLayout layout = hand_layout(2);
    auto net = make_value_net<float>(3, layout.node_width(), tiny_dims(), 11);
    EncodedSample<float> s;
    s.qvec = {1.0f, 0.0f, 0.5f};
    s.plan = encode_plan<float>(hash_plan(), layout);
    s.target = 2.0f;

    auto losses = train_value_net(net, {s}, 800, 4, 5);
    REQUIRE(int(losses.size()) == 800);
    CHECK(losses.back() < losses.front() * 1e-4);
    CHECK(std::abs(predict(net, s.qvec, s.plan) - 2.0) < 0.01 * 2.0);
    CHECK(net.adam_steps == 800);

    // Same seed reproduces the whole loss curve.
    auto net2 = make_value_net<float>(3, layout.node_width(), tiny_dims(), 11);
    auto losses2 = train_value_net(net2, {s}, 800, 4, 5);
    CHECK(losses == losses2);

    CHECK_THROWS_AS(train_value_net(net, {}, 1, 1, 0), ContractError);
    CHECK_THROWS_AS(train_value_net(net, {s}, 1, 0, 0), ContractError);
}

TEST_CASE("build_training_set labels states with the best containing completion") {
    Query q = two_rel_query();
    std::vector<ExperienceEntry> exp{{0, hash_plan(), 10.0, 5.0}, {0, merge_plan(), 4.0, 5.0}};

    SUBCASE("absolute mode, identity transform") {
        auto set = build_training_set(exp, {q}, CostMode::absolute, TargetTransform::identity);
        REQUIRE(set.size() == 6);
        std::vector<std::pair<std::string, double>> got;
        for (const auto& s : set) got.emplace_back(canonical_key(s.plan), s.target);
        // First-insertion order: the hash plan's four states, then the merge
        // plan's two novel ones; shared prefixes take the minimum cost.
        std::vector<std::pair<std::string, double>> want{
            {"U0|U1", 4.0},     {"T0|U1", 4.0},      {"T0|I1", 10.0},
            {"(H T0 I1)", 10.0}, {"T0|T1", 4.0},     {"(M T0 T1)", 4.0}};
        CHECK(got == want);
        for (const auto& s : set) CHECK(s.query_id == 0);
    }
    SUBCASE("relative mode divides by the frozen baseline") {
        auto set = build_training_set(exp, {q}, CostMode::relative, TargetTransform::identity);
        REQUIRE(set.size() == 6);
        CHECK(set[0].target == doctest::Approx(0.8));
        CHECK(set[3].target == doctest::Approx(2.0));

        std::vector<ExperienceEntry> bad = exp;
        bad[0].baseline = 0.0;
        CHECK_THROWS_AS(
            build_training_set(bad, {q}, CostMode::relative, TargetTransform::identity),
            ContractError);
        // Absolute mode never touches the baseline.
        CHECK_NOTHROW(
            build_training_set(bad, {q}, CostMode::absolute, TargetTransform::identity));
    }
    SUBCASE("log1p transform applies after cost selection") {
        auto set = build_training_set(exp, {q}, CostMode::absolute, TargetTransform::log1p);
        CHECK(set[0].target == doctest::Approx(std::log1p(4.0)));
        CHECK(set[2].target == doctest::Approx(std::log1p(10.0)));
    }
    SUBCASE("experience for an unknown query is rejected") {
        CHECK_THROWS_AS(
            build_training_set(exp, {}, CostMode::absolute, TargetTransform::identity),
            ContractError);
    }
}

TEST_CASE("checkpoints round-trip weights, optimizer state, and metadata") {
    FeatureLayout layout = hand_layout(2);
    auto net = make_value_net<float>(3, layout.node_width(), tiny_dims(), 23);
    EncodedSample<float> s;
    s.qvec = {0.3f, -0.2f, 0.7f};
    s.plan = encode_plan<float>(hash_plan(), layout);
    s.target = 1.0f;
    train_value_net(net, {s}, 50, 2, 9);  // populate Adam moments

    CheckpointMeta meta;
    meta.catalog_hash = 0xdeadbeefcafef00dull;
    meta.variant = FeatVariant::r_vector;
    meta.cost_mode = CostMode::relative;
    meta.transform = TargetTransform::identity;
    const std::string path = (std::filesystem::temp_directory_path() / "lqo_net.json").string();
    save_value_net(net, meta, path);

    CheckpointMeta got;
    auto loaded = load_value_net<float>(path, got);
    CHECK(got.catalog_hash == meta.catalog_hash);
    CHECK(got.variant == meta.variant);
    CHECK(got.cost_mode == meta.cost_mode);
    CHECK(got.transform == meta.transform);
    CHECK(loaded.adam_steps == net.adam_steps);

    CHECK(predict(loaded, s.qvec, s.plan) == predict(net, s.qvec, s.plan));

    // Training both copies one more identical step stays in lockstep, which
    // requires the optimizer moments to have survived the round trip.
    auto la = train_value_net(net, {s}, 3, 1, 77);
    auto lb = train_value_net(loaded, {s}, 3, 1, 77);
    CHECK(la == lb);

    // Corrupting one parameter blob must fail integrity checks.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const size_t at = text.find("\"w\":\"");
    REQUIRE(at != std::string::npos);
    text.erase(at + 5, 12);
    std::ofstream(path) << text;
    CHECK_THROWS_AS(load_value_net<float>(path, got), IntegrityError);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_value_net<float>("/nonexistent/net.json", got), ConfigError);
}

TEST_CASE("memoizing evaluator reproduces full-network predictions") {
    Catalog cat = generate_catalog(tiny_config(), 31);
    WorkloadConfig wcfg;
    wcfg.num_queries = 6;
    wcfg.joins_min = 1;
    wcfg.joins_max = 2;
    auto queries = generate_workload(cat, wcfg, 5);
    FeatureLayout layout = layout_from_catalog(cat, FeatVariant::histogram, nullptr);

    auto net = make_value_net<float>(layout.query_width(FeatVariant::histogram),
                                     layout.node_width(), tiny_dims(), 3);

    for (const Query& q : queries) {
        const auto qd = encode_query(q, cat, FeatVariant::histogram, nullptr, layout);
        const std::vector<float> qv(qd.begin(), qd.end());
        TreeCacheEvaluator<float> eval(net, layout, qv);

        // Walk a few levels of the construction space, comparing every state.
        PlanForest state;
        state.query_id = q.id;
        for (RelationId r : q.relations)
            state.roots.push_back(PlanNode::make_scan(ScanKind::unspec, r));
        Rng rng(uint64_t(q.id) + 1);
        int compared = 0;
        while (true) {
            const double direct = predict(net, qv, encode_plan<float>(state, layout));
            CHECK(eval.score(state) == doctest::Approx(direct).epsilon(1e-5));
            ++compared;
            auto kids = children(state, q, cat.index_flags, false);
            if (kids.empty()) break;
            for (const auto& k : kids) {
                const double d = predict(net, qv, encode_plan<float>(k, layout));
                CHECK(eval.score(k) == doctest::Approx(d).epsilon(1e-5));
                ++compared;
            }
            state = kids[size_t(rng.next_below(kids.size()))];
        }
        CHECK(compared > 3);
        CHECK(eval.cache_size() > 0);

        // Repeat scoring hits the cache and stays put.
        const double again = eval.score(state);
        CHECK(eval.score(state) == again);
    }

    // Mismatched query width is rejected up front.
    std::vector<float> bad{1.0f};
    CHECK_THROWS_AS((TreeCacheEvaluator<float>(net, layout, bad)), ContractError);
}
