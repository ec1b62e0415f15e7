#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lqo/featurize.hpp"
#include "lqo/nn.hpp"
#include "lqo/plan.hpp"
#include "lqo/search.hpp"

namespace lqo {

/// Whether plan cost is raw simulated latency or latency normalized by the
/// per-query expert baseline.
enum class CostMode { absolute = 0, relative = 1 };

/// Transform applied to costs before regression; predictions stay in
/// transformed space (the search only compares them).
enum class TargetTransform { log1p = 0, identity = 1 };

const char* to_string(CostMode m);
CostMode cost_mode_from_string(std::string_view s);
const char* to_string(TargetTransform t);
TargetTransform target_transform_from_string(std::string_view s);

double transform_target(double cost, TargetTransform t);

/// One executed plan with its observed latency and the frozen expert
/// baseline latency for the same query.
struct ExperienceEntry {
    int32_t query_id = -1;
    PlanForest plan;
    double latency = 0.0;
    double baseline = 0.0;
};

/// Layer widths; the final scalar output layer is implicit.
struct ValueNetDims {
    int q1 = 128, q2 = 64, q3 = 32;    ///< query stack
    int c1 = 256, c2 = 128, c3 = 64;   ///< tree-convolution channels
    int p1 = 32, p2 = 16;              ///< post-pooling stack
};

/// Value model: a query stack whose output is appended to every plan-node
/// vector, three tree-convolution layers, dynamic pooling over all nodes,
/// and a regression stack ending in one linear unit.
template <class T>
struct ValueNet {
    int query_width = 0;
    int node_width = 0;
    ValueNetDims dims;
    nn::AdamParams adam;
    int64_t adam_steps = 0;

    nn::Dense<T> q1, q2, q3;
    nn::Filterbank<T> f1, f2, f3;
    nn::Dense<T> p1, p2, p3;

    /// Visits every parameter tensor in a pinned order (dense stacks first,
    /// then filterbanks) shared by the updater and the checkpoint format.
    template <class Fn>
    void for_each_param(Fn&& fn) {
        for_each_param_impl(*this, fn);
    }
    template <class Fn>
    void for_each_param(Fn&& fn) const {
        for_each_param_impl(*this, fn);
    }

  private:
    template <class Self, class Fn>
    static void for_each_param_impl(Self& self, Fn& fn) {
        for (auto* d : {&self.q1, &self.q2, &self.q3, &self.p1, &self.p2, &self.p3}) {
            fn(d->w);
            fn(d->b);
            if (d->layer_norm) {
                fn(d->ln_gain);
                fn(d->ln_shift);
            }
        }
        for (auto* f : {&self.f1, &self.f2, &self.f3}) {
            fn(f->w);
            if (f->use_bias) fn(f->b);
        }
    }
};

template <class T>
ValueNet<T> make_value_net(int query_width, int node_width, const ValueNetDims& dims,
                           uint64_t seed);

template <class T>
struct NetTrace {
    nn::Mat<T> q_in, g1, g2, g3;
    nn::DenseTrace<T> tq1, tq2, tq3;
    nn::VecForest<T> aug, c1, c2, c3;
    nn::ConvTrace<T> tc1, tc2, tc3;
    nn::PoolTrace pool;
    nn::Mat<T> pooled, h1, h2, out;
    nn::DenseTrace<T> tp1, tp2, tp3;
};

/// Scores one (query vector, plan forest) pair; fills `tr` for backward.
template <class T>
T value_forward(const ValueNet<T>& net, const std::vector<T>& qvec, const nn::VecForest<T>& plan,
                NetTrace<T>& tr);

/// Accumulates gradients for d(prediction) = dpred.
template <class T>
void value_backward(ValueNet<T>& net, const NetTrace<T>& tr, T dpred);

template <class T>
void zero_grads(ValueNet<T>& net);

/// One Adam update over every parameter with a shared step counter.
template <class T>
void adam_update(ValueNet<T>& net);

template <class T>
double predict(const ValueNet<T>& net, const std::vector<T>& qvec, const nn::VecForest<T>& plan);

template <class T>
struct EncodedSample {
    std::vector<T> qvec;
    nn::VecForest<T> plan;
    T target = T(0);
};

/// Minibatch L2 regression: shuffles an index order, refilling it whenever
/// fewer than a batch remain, and performs `steps` Adam updates. Returns the
/// mean batch loss per step.
template <class T>
std::vector<double> train_value_net(ValueNet<T>& net, const std::vector<EncodedSample<T>>& samples,
                                    int steps, int batch, uint64_t seed);

/// One regression target: a (possibly partial) plan state labelled with the
/// transformed cost of the best experienced completion containing it.
struct TrainingSample {
    int32_t query_id = -1;
    PlanForest plan;
    double target = 0.0;
};

/// Expands every experience entry into its construction states and labels
/// each distinct state (per query, by canonical key) with the minimum cost
/// over all experienced plans of that query containing it as a subplan.
/// Output keeps first-insertion order.
std::vector<TrainingSample> build_training_set(const std::vector<ExperienceEntry>& experience,
                                               const std::vector<Query>& queries, CostMode mode,
                                               TargetTransform transform);

/// Identifying context stored beside weights so a checkpoint is never
/// applied to the wrong catalog or featurization.
struct CheckpointMeta {
    uint64_t catalog_hash = 0;
    FeatVariant variant = FeatVariant::histogram;
    CostMode cost_mode = CostMode::absolute;
    TargetTransform transform = TargetTransform::log1p;
};

template <class T>
void save_value_net(const ValueNet<T>& net, const CheckpointMeta& meta, const std::string& path);

/// Loads weights and Adam state; throws IntegrityError when shapes are
/// inconsistent and fills `meta` for the caller to validate.
template <class T>
ValueNet<T> load_value_net(const std::string& path, CheckpointMeta& meta);

/// Search-time evaluator that memoizes per-subtree convolution outputs by
/// canonical subtree key. The query stack runs once at construction. Scores
/// equal full-network prediction because each convolution layer's output at
/// a node depends only on that node's subtree, and pooling is an associative
/// channel-wise maximum.
template <class T>
class TreeCacheEvaluator final : public PlanEvaluator {
  public:
    TreeCacheEvaluator(const ValueNet<T>& net, const FeatureLayout& layout,
                       const std::vector<T>& qvec);

    double score(const PlanForest& plan) override;
    size_t cache_size() const { return cache_.size(); }

  private:
    struct Entry {
        std::vector<T> raw, l1, l2, l3, pool;
    };

    const Entry& subtree(const PlanNodeRef& node);

    const ValueNet<T>& net_;
    const FeatureLayout& layout_;
    std::vector<T> g_;  ///< query-stack output
    std::unordered_map<std::string, Entry> cache_;
    std::vector<T> scratch_;
};

}  // namespace lqo
