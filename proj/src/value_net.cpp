#include "lqo/value_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace lqo {

const char* to_string(CostMode m) {
    switch (m) {
        case CostMode::absolute: return "absolute";
        case CostMode::relative: return "relative";
    }
    throw ContractError("to_string: bad CostMode");
}

CostMode cost_mode_from_string(std::string_view s) {
    if (s == "absolute") return CostMode::absolute;
    if (s == "relative") return CostMode::relative;
    throw ConfigError("unknown cost mode: " + std::string(s));
}

const char* to_string(TargetTransform t) {
    switch (t) {
        case TargetTransform::log1p: return "log1p";
        case TargetTransform::identity: return "identity";
    }
    throw ContractError("to_string: bad TargetTransform");
}

TargetTransform target_transform_from_string(std::string_view s) {
    if (s == "log1p") return TargetTransform::log1p;
    if (s == "identity") return TargetTransform::identity;
    throw ConfigError("unknown target transform: " + std::string(s));
}

double transform_target(double cost, TargetTransform t) {
    if (t == TargetTransform::identity) return cost;
    LQO_CHECK(cost > -1.0, "transform_target: log1p needs cost > -1");
    return std::log1p(cost);
}

template <class T>
ValueNet<T> make_value_net(int query_width, int node_width, const ValueNetDims& dims,
                           uint64_t seed) {
    LQO_CHECK(query_width > 0 && node_width > 0, "make_value_net: widths must be positive");
    ValueNet<T> net;
    net.query_width = query_width;
    net.node_width = node_width;
    net.dims = dims;
    Rng rng(seed);
    nn::init_dense(net.q1, query_width, dims.q1, true, true, rng);
    nn::init_dense(net.q2, dims.q1, dims.q2, true, true, rng);
    nn::init_dense(net.q3, dims.q2, dims.q3, true, true, rng);
    const int aug = node_width + dims.q3;
    nn::init_filterbank(net.f1, aug, dims.c1, true, rng);
    nn::init_filterbank(net.f2, dims.c1, dims.c2, true, rng);
    nn::init_filterbank(net.f3, dims.c2, dims.c3, true, rng);
    nn::init_dense(net.p1, dims.c3, dims.p1, true, true, rng);
    nn::init_dense(net.p2, dims.p1, dims.p2, true, true, rng);
    nn::init_dense(net.p3, dims.p2, 1, false, false, rng);
    return net;
}

template <class T>
T value_forward(const ValueNet<T>& net, const std::vector<T>& qvec, const nn::VecForest<T>& plan,
                NetTrace<T>& tr) {
    LQO_CHECK(int(qvec.size()) == net.query_width, "value_forward: query width mismatch");
    LQO_CHECK(plan.channels == net.node_width, "value_forward: node width mismatch");
    tr.q_in.resize(1, net.query_width);
    std::copy(qvec.begin(), qvec.end(), tr.q_in.a.begin());
    nn::dense_forward(net.q1, tr.q_in, tr.g1, &tr.tq1);
    nn::dense_forward(net.q2, tr.g1, tr.g2, &tr.tq2);
    nn::dense_forward(net.q3, tr.g2, tr.g3, &tr.tq3);

    const int qd = net.dims.q3, nw = net.node_width, aw = nw + qd;
    const T* g = tr.g3.row(0);
    tr.aug.channels = aw;
    tr.aug.left = plan.left;
    tr.aug.right = plan.right;
    tr.aug.roots = plan.roots;
    tr.aug.x.assign(size_t(plan.nodes()) * size_t(aw), T(0));
    for (int i = 0; i < plan.nodes(); ++i) {
        T* row = tr.aug.node(i);
        const T* src = plan.node(i);
        std::copy(src, src + nw, row);
        std::copy(g, g + qd, row + nw);
    }

    nn::tree_conv(net.f1, tr.aug, tr.c1, &tr.tc1);
    nn::tree_conv(net.f2, tr.c1, tr.c2, &tr.tc2);
    nn::tree_conv(net.f3, tr.c2, tr.c3, &tr.tc3);

    const std::vector<T> pooled = nn::dynamic_pool(tr.c3, &tr.pool);
    tr.pooled.resize(1, int(pooled.size()));
    std::copy(pooled.begin(), pooled.end(), tr.pooled.a.begin());

    nn::dense_forward(net.p1, tr.pooled, tr.h1, &tr.tp1);
    nn::dense_forward(net.p2, tr.h1, tr.h2, &tr.tp2);
    nn::dense_forward(net.p3, tr.h2, tr.out, &tr.tp3);
    return tr.out.at(0, 0);
}

template <class T>
void value_backward(ValueNet<T>& net, const NetTrace<T>& tr, T dpred) {
    nn::Mat<T> dout, dh2, dh1, dpooled;
    dout.resize(1, 1);
    dout.at(0, 0) = dpred;
    nn::dense_backward(net.p3, tr.tp3, dout, dh2);
    nn::dense_backward(net.p2, tr.tp2, dh2, dh1);
    nn::dense_backward(net.p1, tr.tp1, dh1, dpooled);

    nn::VecForest<T> dc3 = tr.c3.like(tr.c3.channels);
    std::vector<T> dpool(dpooled.row(0), dpooled.row(0) + dpooled.cols);
    nn::dynamic_pool_backward(tr.pool, dpool, dc3);

    nn::VecForest<T> dc2, dc1, daug;
    nn::tree_conv_backward(net.f3, tr.c2, tr.tc3, dc3, dc2);
    nn::tree_conv_backward(net.f2, tr.c1, tr.tc2, dc2, dc1);
    nn::tree_conv_backward(net.f1, tr.aug, tr.tc1, dc1, daug);

    // The per-node slices of the query vector all came from one broadcast,
    // so their gradients sum; the raw node-encoding slice has no parameters.
    const int qd = net.dims.q3, nw = net.node_width;
    nn::Mat<T> dg3;
    dg3.resize(1, qd);
    for (int i = 0; i < daug.nodes(); ++i) {
        const T* row = daug.node(i);
        for (int k = 0; k < qd; ++k) dg3.at(0, k) += row[nw + k];
    }
    nn::Mat<T> dg2, dg1, dq_in;
    nn::dense_backward(net.q3, tr.tq3, dg3, dg2);
    nn::dense_backward(net.q2, tr.tq2, dg2, dg1);
    nn::dense_backward(net.q1, tr.tq1, dg1, dq_in);
}

template <class T>
void zero_grads(ValueNet<T>& net) {
    net.for_each_param([](nn::Param<T>& p) { p.zero_grad(); });
}

template <class T>
void adam_update(ValueNet<T>& net) {
    ++net.adam_steps;
    net.for_each_param([&](nn::Param<T>& p) { nn::adam_step(p, net.adam, net.adam_steps); });
}

template <class T>
double predict(const ValueNet<T>& net, const std::vector<T>& qvec, const nn::VecForest<T>& plan) {
    NetTrace<T> tr;
    return double(value_forward(net, qvec, plan, tr));
}

template <class T>
std::vector<double> train_value_net(ValueNet<T>& net, const std::vector<EncodedSample<T>>& samples,
                                    int steps, int batch, uint64_t seed) {
    LQO_CHECK(!samples.empty(), "train_value_net: no samples");
    LQO_CHECK(steps >= 0 && batch >= 1, "train_value_net: bad schedule");
    const int n = int(samples.size());
    const int B = std::min(batch, n);
    Rng rng(seed);
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;
    int pos = n;  // force an initial shuffle

    std::vector<double> losses;
    losses.reserve(size_t(steps));
    NetTrace<T> tr;
    for (int step = 0; step < steps; ++step) {
        if (pos + B > n) {
            rng.shuffle(order);
            pos = 0;
        }
        zero_grads(net);
        double loss = 0.0;
        for (int b = 0; b < B; ++b) {
            const EncodedSample<T>& s = samples[size_t(order[size_t(pos + b)])];
            const T pred = value_forward(net, s.qvec, s.plan, tr);
            const double e = double(pred) - double(s.target);
            loss += e * e;
            value_backward(net, tr, T(2.0 * e / B));
        }
        adam_update(net);
        losses.push_back(loss / B);
        pos += B;
    }
    return losses;
}

std::vector<TrainingSample> build_training_set(const std::vector<ExperienceEntry>& experience,
                                               const std::vector<Query>& queries, CostMode mode,
                                               TargetTransform transform) {
    std::unordered_map<int32_t, const Query*> qmap;
    for (const Query& q : queries) qmap.emplace(q.id, &q);

    std::vector<int32_t> query_order;
    std::unordered_map<int32_t, std::vector<const ExperienceEntry*>> groups;
    for (const ExperienceEntry& e : experience) {
        LQO_CHECK(qmap.count(e.query_id), "build_training_set: experience for unknown query");
        auto [it, fresh] = groups.try_emplace(e.query_id);
        if (fresh) query_order.push_back(e.query_id);
        it->second.push_back(&e);
    }

    std::vector<TrainingSample> out;
    for (int32_t qid : query_order) {
        const Query& q = *qmap.at(qid);
        const auto& entries = groups.at(qid);

        std::vector<PlanForest> states;
        std::unordered_map<std::string, size_t> seen;
        for (const ExperienceEntry* e : entries) {
            for (PlanForest& st : construction_states(e->plan, q)) {
                std::string key = canonical_key(st);
                if (seen.emplace(std::move(key), states.size()).second)
                    states.push_back(std::move(st));
            }
        }

        for (const PlanForest& st : states) {
            double best = std::numeric_limits<double>::infinity();
            for (const ExperienceEntry* e : entries) {
                if (!is_subplan(st, e->plan)) continue;
                double c = e->latency;
                if (mode == CostMode::relative) {
                    LQO_CHECK(e->baseline > 0.0, "build_training_set: non-positive baseline");
                    c = e->latency / e->baseline;
                }
                best = std::min(best, c);
            }
            LQO_CHECK(std::isfinite(best),
                      "build_training_set: state not contained in any experienced plan");
            out.push_back(TrainingSample{qid, st, transform_target(best, transform)});
        }
    }
    return out;
}

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

uint64_t parse_hash_hex(const std::string& s) {
    LQO_CHECK(s.size() == 16, "checkpoint: bad hash field");
    return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

template <class T>
void save_value_net(const ValueNet<T>& net, const CheckpointMeta& meta, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["meta"] = {{"catalog_hash", hash_hex(meta.catalog_hash)},
                 {"variant", to_string(meta.variant)},
                 {"cost_mode", to_string(meta.cost_mode)},
                 {"transform", to_string(meta.transform)}};
    j["query_width"] = net.query_width;
    j["node_width"] = net.node_width;
    j["dims"] = {net.dims.q1, net.dims.q2, net.dims.q3, net.dims.c1, net.dims.c2,
                 net.dims.c3, net.dims.p1, net.dims.p2};
    j["adam"] = {net.adam.lr, net.adam.beta1, net.adam.beta2, net.adam.eps};
    j["adam_steps"] = net.adam_steps;
    nlohmann::json params = nlohmann::json::array();
    net.for_each_param([&](const nn::Param<T>& p) {
        std::vector<double> w(p.w.begin(), p.w.end());
        params.push_back({{"w", doubles_to_base64(w)},
                          {"m", doubles_to_base64(p.m)},
                          {"v", doubles_to_base64(p.v)}});
    });
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw ConfigError("save_value_net: cannot open " + path);
    out << j.dump() << '\n';
}

template <class T>
ValueNet<T> load_value_net(const std::string& path, CheckpointMeta& meta) {
    std::ifstream in(path);
    if (!in) throw ConfigError("load_value_net: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IntegrityError(std::string("load_value_net: bad JSON: ") + e.what());
    }
    try {
        meta.catalog_hash = parse_hash_hex(j.at("meta").at("catalog_hash").get<std::string>());
        meta.variant = feat_variant_from_string(j.at("meta").at("variant").get<std::string>());
        meta.cost_mode = cost_mode_from_string(j.at("meta").at("cost_mode").get<std::string>());
        meta.transform =
            target_transform_from_string(j.at("meta").at("transform").get<std::string>());
        const auto dims_arr = j.at("dims").get<std::vector<int>>();
        if (dims_arr.size() != 8) throw IntegrityError("load_value_net: bad dims");
        ValueNetDims dims{dims_arr[0], dims_arr[1], dims_arr[2], dims_arr[3],
                          dims_arr[4], dims_arr[5], dims_arr[6], dims_arr[7]};
        ValueNet<T> net = make_value_net<T>(j.at("query_width").get<int>(),
                                            j.at("node_width").get<int>(), dims, 0);
        const auto adam = j.at("adam").get<std::vector<double>>();
        if (adam.size() != 4) throw IntegrityError("load_value_net: bad adam block");
        net.adam = nn::AdamParams{adam[0], adam[1], adam[2], adam[3]};
        net.adam_steps = j.at("adam_steps").get<int64_t>();
        size_t idx = 0;
        const auto& params = j.at("params");
        net.for_each_param([&](nn::Param<T>& p) {
            if (idx >= params.size()) throw IntegrityError("load_value_net: missing parameters");
            const auto& jp = params.at(idx++);
            const std::vector<double> w = base64_to_doubles(jp.at("w").get<std::string>());
            const std::vector<double> m = base64_to_doubles(jp.at("m").get<std::string>());
            const std::vector<double> v = base64_to_doubles(jp.at("v").get<std::string>());
            if (w.size() != p.size() || m.size() != p.size() || v.size() != p.size())
                throw IntegrityError("load_value_net: parameter shape mismatch");
            std::copy(w.begin(), w.end(), p.w.begin());
            p.m = m;
            p.v = v;
        });
        if (idx != params.size()) throw IntegrityError("load_value_net: extra parameters");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(std::string("load_value_net: malformed checkpoint: ") + e.what());
    }
}

namespace {

template <class T>
T leaky_scalar(T v) {
    return v > T(0) ? v : T(nn::kLeakySlope) * v;
}

/// One convolution output row with nullable child input slices. Skipping an
/// absent child's terms matches the zero-padded arena arithmetic exactly.
template <class T>
void conv_row(const nn::Filterbank<T>& f, const T* p, const T* l, const T* r, T* out) {
    const int cin = f.cin;
    for (int k = 0; k < f.cout; ++k) {
        const T* wr = f.w.w.data() + size_t(k) * size_t(3 * cin);
        T acc = f.use_bias ? f.b.w[size_t(k)] : T(0);
        for (int j = 0; j < cin; ++j) acc += wr[j] * p[j];
        if (l)
            for (int j = 0; j < cin; ++j) acc += wr[cin + j] * l[j];
        if (r)
            for (int j = 0; j < cin; ++j) acc += wr[2 * cin + j] * r[j];
        out[k] = leaky_scalar(acc);
    }
}

template <class T>
void dense_plain(const nn::Dense<T>& d, const std::vector<T>& x, std::vector<T>& y) {
    nn::Mat<T> xm, ym;
    xm.resize(1, int(x.size()));
    std::copy(x.begin(), x.end(), xm.a.begin());
    nn::dense_forward(d, xm, ym);
    y.assign(ym.a.begin(), ym.a.end());
}

}  // namespace

template <class T>
TreeCacheEvaluator<T>::TreeCacheEvaluator(const ValueNet<T>& net, const FeatureLayout& layout,
                                          const std::vector<T>& qvec)
    : net_(net), layout_(layout) {
    LQO_CHECK(layout.node_width() == net.node_width,
              "TreeCacheEvaluator: layout does not match network");
    LQO_CHECK(int(qvec.size()) == net.query_width, "TreeCacheEvaluator: query width mismatch");
    std::vector<T> h;
    dense_plain(net_.q1, qvec, h);
    std::vector<T> h2;
    dense_plain(net_.q2, h, h2);
    dense_plain(net_.q3, h2, g_);
    scratch_.assign(size_t(3) * size_t(net.node_width + net.dims.q3), T(0));
}

template <class T>
const typename TreeCacheEvaluator<T>::Entry& TreeCacheEvaluator<T>::subtree(
    const PlanNodeRef& node) {
    std::string key = canonical_key(*node);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;

    const int nw = net_.node_width, qd = net_.dims.q3, aw = nw + qd;
    Entry e;
    e.raw.assign(size_t(nw), T(0));
    const Entry* L = nullptr;
    const Entry* R = nullptr;
    if (node->is_scan()) {
        encode_scan_row(layout_, node->scan_kind, node->relation, e.raw.data());
    } else {
        L = &subtree(node->left);
        R = &subtree(node->right);
        encode_join_row(layout_, node->join_op, L->raw.data(), R->raw.data(), e.raw.data());
    }

    T* ap = scratch_.data();
    T* al = ap + aw;
    T* ar = al + aw;
    std::copy(e.raw.begin(), e.raw.end(), ap);
    std::copy(g_.begin(), g_.end(), ap + nw);
    if (L) {
        std::copy(L->raw.begin(), L->raw.end(), al);
        std::copy(g_.begin(), g_.end(), al + nw);
        std::copy(R->raw.begin(), R->raw.end(), ar);
        std::copy(g_.begin(), g_.end(), ar + nw);
    }

    e.l1.assign(size_t(net_.dims.c1), T(0));
    conv_row(net_.f1, ap, L ? al : nullptr, L ? ar : nullptr, e.l1.data());
    e.l2.assign(size_t(net_.dims.c2), T(0));
    conv_row(net_.f2, e.l1.data(), L ? L->l1.data() : nullptr, R ? R->l1.data() : nullptr,
             e.l2.data());
    e.l3.assign(size_t(net_.dims.c3), T(0));
    conv_row(net_.f3, e.l2.data(), L ? L->l2.data() : nullptr, R ? R->l2.data() : nullptr,
             e.l3.data());

    e.pool = e.l3;
    if (L)
        for (size_t k = 0; k < e.pool.size(); ++k)
            e.pool[k] = std::max(e.pool[k], std::max(L->pool[k], R->pool[k]));

    return cache_.emplace(std::move(key), std::move(e)).first->second;
}

template <class T>
double TreeCacheEvaluator<T>::score(const PlanForest& plan) {
    LQO_CHECK(!plan.roots.empty(), "TreeCacheEvaluator: empty forest");
    std::vector<T> pooled;
    for (const PlanNodeRef& root : plan.roots) {
        const Entry& e = subtree(root);
        if (pooled.empty()) {
            pooled = e.pool;
        } else {
            for (size_t k = 0; k < pooled.size(); ++k) pooled[k] = std::max(pooled[k], e.pool[k]);
        }
    }
    std::vector<T> h1, h2, out;
    dense_plain(net_.p1, pooled, h1);
    dense_plain(net_.p2, h1, h2);
    dense_plain(net_.p3, h2, out);
    return double(out[0]);
}

#define LQO_VN_INSTANTIATE(T)                                                                     \
    template ValueNet<T> make_value_net<T>(int, int, const ValueNetDims&, uint64_t);              \
    template T value_forward<T>(const ValueNet<T>&, const std::vector<T>&,                        \
                                const nn::VecForest<T>&, NetTrace<T>&);                           \
    template void value_backward<T>(ValueNet<T>&, const NetTrace<T>&, T);                         \
    template void zero_grads<T>(ValueNet<T>&);                                                    \
    template void adam_update<T>(ValueNet<T>&);                                                   \
    template double predict<T>(const ValueNet<T>&, const std::vector<T>&,                         \
                               const nn::VecForest<T>&);                                          \
    template std::vector<double> train_value_net<T>(                                              \
        ValueNet<T>&, const std::vector<EncodedSample<T>>&, int, int, uint64_t);                  \
    template void save_value_net<T>(const ValueNet<T>&, const CheckpointMeta&,                    \
                                    const std::string&);                                          \
    template ValueNet<T> load_value_net<T>(const std::string&, CheckpointMeta&);                  \
    template class TreeCacheEvaluator<T>;

LQO_VN_INSTANTIATE(float)
LQO_VN_INSTANTIATE(double)

#undef LQO_VN_INSTANTIATE

}  // namespace lqo
