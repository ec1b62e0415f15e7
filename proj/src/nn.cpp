#include "lqo/nn.hpp"

#include <algorithm>
#include <cmath>

namespace lqo::nn {

namespace {

template <class T>
T leaky(T v) {
    return v > T(0) ? v : T(kLeakySlope) * v;
}

template <class T>
T leaky_grad(T pre) {
    return pre > T(0) ? T(1) : T(kLeakySlope);
}

void check_shape(bool ok, const char* msg) {
    if (!ok) throw ShapeError(msg);
}

}  // namespace

template <class T>
void adam_step(Param<T>& p, const AdamParams& hp, int64_t step) {
    LQO_CHECK(step >= 1, "adam_step: step counter must start at 1");
    const double b1 = hp.beta1, b2 = hp.beta2;
    const double corr1 = 1.0 - std::pow(b1, double(step));
    const double corr2 = 1.0 - std::pow(b2, double(step));
    for (size_t i = 0; i < p.w.size(); ++i) {
        const double g = double(p.g[i]);
        p.m[i] = b1 * p.m[i] + (1.0 - b1) * g;
        p.v[i] = b2 * p.v[i] + (1.0 - b2) * g * g;
        const double mhat = p.m[i] / corr1;
        const double vhat = p.v[i] / corr2;
        p.w[i] = T(double(p.w[i]) - hp.lr * mhat / (std::sqrt(vhat) + hp.eps));
    }
}

template <class T>
void init_uniform(Param<T>& p, int fan_in, int fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / (double(fan_in) + double(fan_out)));
    for (auto& w : p.w) w = T((2.0 * rng.next_double() - 1.0) * bound);
}

template <class T>
void init_dense(Dense<T>& d, int in, int out, bool layer_norm, bool activation, Rng& rng) {
    LQO_CHECK(in > 0 && out > 0, "init_dense: widths must be positive");
    d.in = in;
    d.out = out;
    d.layer_norm = layer_norm;
    d.activation = activation;
    d.w.resize(size_t(out) * size_t(in));
    d.b.resize(size_t(out));
    init_uniform(d.w, in, out, rng);
    if (layer_norm) {
        d.ln_gain.resize(size_t(out));
        d.ln_shift.resize(size_t(out));
        std::fill(d.ln_gain.w.begin(), d.ln_gain.w.end(), T(1));
    } else {
        d.ln_gain.resize(0);
        d.ln_shift.resize(0);
    }
}

template <class T>
void dense_forward(const Dense<T>& d, const Mat<T>& x, Mat<T>& y, DenseTrace<T>* tr) {
    check_shape(x.cols == d.in, "dense_forward: input width mismatch");
    const int B = x.rows, out = d.out, in = d.in;
    y.resize(B, out);
    if (tr) {
        tr->in = x;
        if (d.layer_norm) {
            tr->xhat.resize(B, out);
            tr->inv_sigma.assign(size_t(B), T(0));
        }
        if (d.activation) tr->preact.resize(B, out);
    }
    for (int r = 0; r < B; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        for (int k = 0; k < out; ++k) {
            const T* wr = d.w.w.data() + size_t(k) * size_t(in);
            T acc = d.b.w[size_t(k)];
            for (int j = 0; j < in; ++j) acc += wr[j] * xr[j];
            yr[k] = acc;
        }
        if (d.layer_norm) {
            double mu = 0.0;
            for (int k = 0; k < out; ++k) mu += double(yr[k]);
            mu /= out;
            double var = 0.0;
            for (int k = 0; k < out; ++k) {
                const double c = double(yr[k]) - mu;
                var += c * c;
            }
            var /= out;
            const T inv = T(1.0 / std::sqrt(var + kLnEpsilon));
            for (int k = 0; k < out; ++k) {
                const T xh = (yr[k] - T(mu)) * inv;
                if (tr) tr->xhat.at(r, k) = xh;
                yr[k] = d.ln_gain.w[size_t(k)] * xh + d.ln_shift.w[size_t(k)];
            }
            if (tr) tr->inv_sigma[size_t(r)] = inv;
        }
        if (d.activation) {
            for (int k = 0; k < out; ++k) {
                if (tr) tr->preact.at(r, k) = yr[k];
                yr[k] = leaky(yr[k]);
            }
        }
    }
}

template <class T>
void dense_backward(Dense<T>& d, const DenseTrace<T>& tr, const Mat<T>& dy, Mat<T>& dx) {
    check_shape(dy.cols == d.out && dy.rows == tr.in.rows, "dense_backward: shape mismatch");
    const int B = dy.rows, out = d.out, in = d.in;
    dx.resize(B, in);
    std::vector<T> du(static_cast<size_t>(out));
    std::vector<T> dz(static_cast<size_t>(out));
    for (int r = 0; r < B; ++r) {
        const T* dyr = dy.row(r);
        for (int k = 0; k < out; ++k)
            du[size_t(k)] = d.activation ? dyr[k] * leaky_grad(tr.preact.at(r, k)) : dyr[k];
        if (d.layer_norm) {
            const T inv = tr.inv_sigma[size_t(r)];
            double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
            for (int k = 0; k < out; ++k) {
                const T xh = tr.xhat.at(r, k);
                d.ln_gain.g[size_t(k)] += du[size_t(k)] * xh;
                d.ln_shift.g[size_t(k)] += du[size_t(k)];
                const double dxh = double(du[size_t(k)]) * double(d.ln_gain.w[size_t(k)]);
                mean_dxhat += dxh;
                mean_dxhat_xhat += dxh * double(xh);
            }
            mean_dxhat /= out;
            mean_dxhat_xhat /= out;
            for (int k = 0; k < out; ++k) {
                const double dxh = double(du[size_t(k)]) * double(d.ln_gain.w[size_t(k)]);
                dz[size_t(k)] =
                    T(double(inv) * (dxh - mean_dxhat - double(tr.xhat.at(r, k)) * mean_dxhat_xhat));
            }
        } else {
            dz = du;
        }
        const T* xr = tr.in.row(r);
        T* dxr = dx.row(r);
        std::fill(dxr, dxr + in, T(0));
        for (int k = 0; k < out; ++k) {
            const T g = dz[size_t(k)];
            d.b.g[size_t(k)] += g;
            T* wg = d.w.g.data() + size_t(k) * size_t(in);
            const T* wr = d.w.w.data() + size_t(k) * size_t(in);
            for (int j = 0; j < in; ++j) {
                wg[j] += g * xr[j];
                dxr[j] += g * wr[j];
            }
        }
    }
}

template <class T>
void init_filterbank(Filterbank<T>& f, int cin, int cout, bool use_bias, Rng& rng) {
    LQO_CHECK(cin > 0 && cout > 0, "init_filterbank: widths must be positive");
    f.cin = cin;
    f.cout = cout;
    f.use_bias = use_bias;
    f.w.resize(size_t(cout) * size_t(3 * cin));
    init_uniform(f.w, 3 * cin, cout, rng);
    f.b.resize(use_bias ? size_t(cout) : 0);
}

template <class T>
void tree_conv(const Filterbank<T>& f, const VecForest<T>& in, VecForest<T>& out, ConvTrace<T>* tr) {
    check_shape(in.channels == f.cin, "tree_conv: channel mismatch");
    const int n = in.nodes(), cin = f.cin, cout = f.cout;
    out.channels = cout;
    out.left = in.left;
    out.right = in.right;
    out.roots = in.roots;
    out.x.assign(size_t(n) * size_t(cout), T(0));
    if (tr) tr->pre.resize(n, cout);
    std::vector<T> g(size_t(3 * cin));
    for (int i = 0; i < n; ++i) {
        const T* xp = in.node(i);
        std::copy(xp, xp + cin, g.begin());
        const int32_t l = in.left[size_t(i)], r = in.right[size_t(i)];
        if (l >= 0) {
            const T* xl = in.node(l);
            std::copy(xl, xl + cin, g.begin() + cin);
        } else {
            std::fill(g.begin() + cin, g.begin() + 2 * cin, T(0));
        }
        if (r >= 0) {
            const T* xr = in.node(r);
            std::copy(xr, xr + cin, g.begin() + 2 * cin);
        } else {
            std::fill(g.begin() + 2 * cin, g.end(), T(0));
        }
        T* yr = out.node(i);
        for (int k = 0; k < cout; ++k) {
            const T* wr = f.w.w.data() + size_t(k) * size_t(3 * cin);
            T acc = f.use_bias ? f.b.w[size_t(k)] : T(0);
            for (int j = 0; j < 3 * cin; ++j) acc += wr[j] * g[size_t(j)];
            if (tr) tr->pre.at(i, k) = acc;
            yr[k] = leaky(acc);
        }
    }
}

template <class T>
void tree_conv_backward(Filterbank<T>& f, const VecForest<T>& in, const ConvTrace<T>& tr,
                        const VecForest<T>& dout, VecForest<T>& dx) {
    const int n = in.nodes(), cin = f.cin, cout = f.cout;
    check_shape(dout.nodes() == n && dout.channels == cout, "tree_conv_backward: shape mismatch");
    dx.channels = cin;
    dx.left = in.left;
    dx.right = in.right;
    dx.roots = in.roots;
    dx.x.assign(size_t(n) * size_t(cin), T(0));
    std::vector<T> g(size_t(3 * cin));
    for (int i = 0; i < n; ++i) {
        const T* xp = in.node(i);
        std::copy(xp, xp + cin, g.begin());
        const int32_t l = in.left[size_t(i)], r = in.right[size_t(i)];
        if (l >= 0) {
            const T* xl = in.node(l);
            std::copy(xl, xl + cin, g.begin() + cin);
        } else {
            std::fill(g.begin() + cin, g.begin() + 2 * cin, T(0));
        }
        if (r >= 0) {
            const T* xr = in.node(r);
            std::copy(xr, xr + cin, g.begin() + 2 * cin);
        } else {
            std::fill(g.begin() + 2 * cin, g.end(), T(0));
        }
        const T* doutr = dout.node(i);
        for (int k = 0; k < cout; ++k) {
            const T dpre = doutr[k] * leaky_grad(tr.pre.at(i, k));
            if (dpre == T(0)) continue;
            if (f.use_bias) f.b.g[size_t(k)] += dpre;
            T* wg = f.w.g.data() + size_t(k) * size_t(3 * cin);
            const T* wr = f.w.w.data() + size_t(k) * size_t(3 * cin);
            for (int j = 0; j < 3 * cin; ++j) wg[j] += dpre * g[size_t(j)];
            T* dxp = dx.node(i);
            for (int j = 0; j < cin; ++j) dxp[j] += dpre * wr[j];
            if (l >= 0) {
                T* dxl = dx.node(l);
                for (int j = 0; j < cin; ++j) dxl[j] += dpre * wr[cin + j];
            }
            if (r >= 0) {
                T* dxr = dx.node(r);
                for (int j = 0; j < cin; ++j) dxr[j] += dpre * wr[2 * cin + j];
            }
        }
    }
}

template <class T>
std::vector<T> dynamic_pool(const VecForest<T>& in, PoolTrace* tr) {
    LQO_CHECK(in.nodes() > 0, "dynamic_pool: empty forest");
    const int n = in.nodes(), c = in.channels;
    std::vector<T> out(static_cast<size_t>(c));
    std::vector<int32_t> arg(size_t(c), 0);
    const T* first = in.node(0);
    std::copy(first, first + c, out.begin());
    for (int i = 1; i < n; ++i) {
        const T* xi = in.node(i);
        for (int k = 0; k < c; ++k) {
            if (xi[k] > out[size_t(k)]) {
                out[size_t(k)] = xi[k];
                arg[size_t(k)] = i;
            }
        }
    }
    if (tr) tr->argmax = std::move(arg);
    return out;
}

template <class T>
void dynamic_pool_backward(const PoolTrace& tr, const std::vector<T>& dy, VecForest<T>& dx) {
    check_shape(int(dy.size()) == dx.channels && tr.argmax.size() == dy.size(),
                "dynamic_pool_backward: shape mismatch");
    std::fill(dx.x.begin(), dx.x.end(), T(0));
    for (size_t k = 0; k < dy.size(); ++k) dx.node(tr.argmax[k])[k] += dy[k];
}

#define LQO_NN_INSTANTIATE(T)                                                                      \
    template void adam_step<T>(Param<T>&, const AdamParams&, int64_t);                             \
    template void init_uniform<T>(Param<T>&, int, int, Rng&);                                      \
    template void init_dense<T>(Dense<T>&, int, int, bool, bool, Rng&);                            \
    template void dense_forward<T>(const Dense<T>&, const Mat<T>&, Mat<T>&, DenseTrace<T>*);      \
    template void dense_backward<T>(Dense<T>&, const DenseTrace<T>&, const Mat<T>&, Mat<T>&);     \
    template void init_filterbank<T>(Filterbank<T>&, int, int, bool, Rng&);                        \
    template void tree_conv<T>(const Filterbank<T>&, const VecForest<T>&, VecForest<T>&,           \
                               ConvTrace<T>*);                                                     \
    template void tree_conv_backward<T>(Filterbank<T>&, const VecForest<T>&, const ConvTrace<T>&, \
                                        const VecForest<T>&, VecForest<T>&);                       \
    template std::vector<T> dynamic_pool<T>(const VecForest<T>&, PoolTrace*);                      \
    template void dynamic_pool_backward<T>(const PoolTrace&, const std::vector<T>&, VecForest<T>&);

LQO_NN_INSTANTIATE(float)
LQO_NN_INSTANTIATE(double)

#undef LQO_NN_INSTANTIATE

}  // namespace lqo::nn
