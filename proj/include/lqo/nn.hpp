#pragma once

#include <cstdint>
#include <vector>

#include "lqo/common.hpp"

namespace lqo {

/// Scalar type used by the production network. Tests additionally
/// instantiate the double versions for oracle and gradient checks.
using Real = float;

namespace nn {

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kLnEpsilon = 1e-5;

template <class T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> a;

    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(size_t(r) * size_t(c), T(0));
    }
    T* row(int r) { return a.data() + size_t(r) * size_t(cols); }
    const T* row(int r) const { return a.data() + size_t(r) * size_t(cols); }
    T& at(int r, int c) { return a[size_t(r) * size_t(cols) + size_t(c)]; }
    T at(int r, int c) const { return a[size_t(r) * size_t(cols) + size_t(c)]; }
};

/// A parameter tensor with its gradient accumulator and Adam moments.
/// Moments are kept in double regardless of T.
template <class T>
struct Param {
    std::vector<T> w, g;
    std::vector<double> m, v;

    void resize(size_t n) {
        w.assign(n, T(0));
        g.assign(n, T(0));
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
    size_t size() const { return w.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam update; `step` counts from 1.
template <class T>
void adam_step(Param<T>& p, const AdamParams& hp, int64_t step);

/// Uniform init in ±sqrt(6 / (fan_in + fan_out)), drawn row-major.
template <class T>
void init_uniform(Param<T>& p, int fan_in, int fan_out, Rng& rng);

/// Affine layer with optional layer normalization (applied after the affine
/// map) and optional leaky-rectifier activation (applied last).
template <class T>
struct Dense {
    int in = 0, out = 0;
    bool layer_norm = false;
    bool activation = false;
    Param<T> w;  ///< out x in, row-major
    Param<T> b;
    Param<T> ln_gain, ln_shift;
};

template <class T>
void init_dense(Dense<T>& d, int in, int out, bool layer_norm, bool activation, Rng& rng);

template <class T>
struct DenseTrace {
    Mat<T> in;
    Mat<T> xhat;    ///< normalized pre-gain values (layer_norm only)
    Mat<T> preact;  ///< values entering the activation
    std::vector<T> inv_sigma;
};

/// y = act(LN(W x + b)) row-wise over a batch. `tr` must be passed to enable
/// a later backward call. Throws ShapeError on width mismatch.
template <class T>
void dense_forward(const Dense<T>& d, const Mat<T>& x, Mat<T>& y, DenseTrace<T>* tr = nullptr);

/// Accumulates parameter gradients and writes the input gradient to dx.
template <class T>
void dense_backward(Dense<T>& d, const DenseTrace<T>& tr, const Mat<T>& dy, Mat<T>& dx);

/// Shared tree-convolution filters: for each output channel k the weight row
/// holds the three stacked slices (e_p | e_l | e_r), each c_in wide.
template <class T>
struct Filterbank {
    int cin = 0, cout = 0;
    bool use_bias = true;
    Param<T> w;  ///< cout x 3*cin, row-major
    Param<T> b;
};

template <class T>
void init_filterbank(Filterbank<T>& f, int cin, int cout, bool use_bias, Rng& rng);

/// A forest of vector-labelled binary trees in one arena. Node order is
/// preorder within each tree, trees in root order; children indices are -1
/// for absent children (treated as zero vectors by the convolution).
template <class T>
struct VecForest {
    int channels = 0;
    std::vector<int32_t> left, right;
    std::vector<int32_t> roots;
    std::vector<T> x;  ///< nodes x channels, row-major

    int nodes() const { return int(left.size()); }
    T* node(int i) { return x.data() + size_t(i) * size_t(channels); }
    const T* node(int i) const { return x.data() + size_t(i) * size_t(channels); }

    /// Same structure, `c` channels, zero-filled data.
    VecForest<T> like(int c) const {
        VecForest<T> f;
        f.channels = c;
        f.left = left;
        f.right = right;
        f.roots = roots;
        f.x.assign(left.size() * size_t(c), T(0));
        return f;
    }
};

template <class T>
struct ConvTrace {
    Mat<T> pre;  ///< nodes x cout preactivations
};

/// out_node_k = leaky(e_p_k . x_node + e_l_k . x_left + e_r_k . x_right + b_k)
/// with missing children read as zero vectors. Output forest is structurally
/// isomorphic to the input.
template <class T>
void tree_conv(const Filterbank<T>& f, const VecForest<T>& in, VecForest<T>& out,
               ConvTrace<T>* tr = nullptr);

/// Accumulates filter gradients (summed over every node position of every
/// tree) and writes input-forest gradients to dx.
template <class T>
void tree_conv_backward(Filterbank<T>& f, const VecForest<T>& in, const ConvTrace<T>& tr,
                        const VecForest<T>& dout, VecForest<T>& dx);

struct PoolTrace {
    std::vector<int32_t> argmax;
};

/// Channel-wise maximum over all nodes of all trees. Ties keep the lowest
/// node index (first encountered), which pins the backward routing.
template <class T>
std::vector<T> dynamic_pool(const VecForest<T>& in, PoolTrace* tr = nullptr);

template <class T>
void dynamic_pool_backward(const PoolTrace& tr, const std::vector<T>& dy, VecForest<T>& dx);

}  // namespace nn
}  // namespace lqo
