#pragma once

#include <atcn/errors.hpp>
#include <atcn/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace atcn {

enum class Mode { Train, Eval };

enum class PadMode { Symmetric, Causal };

inline const char* pad_mode_name(PadMode m) {
    return m == PadMode::Symmetric ? "symmetric" : "causal";
}

// Same-length padding per the architecture rule: for output length o with
// stride s this is ceil(((o-1)s + (k-1)(d-1) - i + k) / 2), clamped at zero.
inline long same_padding(long o, long i, long s, long k, long d) {
    long num = (o - 1) * s + (k - 1) * (d - 1) - i + k;
    if (num <= 0) {
        if (num < 0)
            std::fprintf(stderr, "same_padding: negative requirement %ld clamped to 0\n", num);
        return 0;
    }
    return (num + 1) / 2;
}

// Split of the exact same-length total (k-1)*d. Odd totals put the extra zero
// on the left; causal mode puts everything on the left.
inline std::pair<long, long> same_pad_split(long k, long d, PadMode mode) {
    long needed = (k - 1) * d;
    if (mode == PadMode::Causal) return {needed, 0};
    long left = (needed + 1) / 2;
    return {left, needed - left};
}

template <typename T>
class Pad1d {
public:
    Pad1d(long left, long right) : left_(left), right_(right) {
        if (left < 0 || right < 0) throw RangeError("pad counts must be >= 0");
    }

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        in_t_ = x.t;
        ran_forward_ = true;
        if (left_ == 0 && right_ == 0) return x;
        Tensor3T<T> y(x.n, x.c, x.t + left_ + right_);
        for (long n = 0; n < x.n; ++n)
            for (long c = 0; c < x.c; ++c)
                std::copy(x.row(n, c), x.row(n, c) + x.t, y.row(n, c) + left_);
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (!ran_forward_) throw StateError("pad1d backward before forward");
        if (left_ == 0 && right_ == 0) return gy;
        Tensor3T<T> gx(gy.n, gy.c, in_t_);
        for (long n = 0; n < gy.n; ++n)
            for (long c = 0; c < gy.c; ++c)
                std::copy(gy.row(n, c) + left_, gy.row(n, c) + left_ + in_t_, gx.row(n, c));
        return gx;
    }

    long left() const { return left_; }
    long right() const { return right_; }

private:
    long left_, right_;
    long in_t_ = 0;
    bool ran_forward_ = false;
};

// Grouped dilated 1-D convolution over (n, c, t), cross-correlation form:
//   y[n, co, to] = b[co] + sum_ci sum_i w[co, ci, i] * x[n, base+ci, s*to + d*i]
// g=1 is standard, g=c_in depthwise, k=1 pointwise. Callers pad beforehand.
template <typename T>
class Conv1d {
public:
    Conv1d(std::string name, long c_in, long c_out, long k, long d, long g, bool bias, long s = 1)
        : name_(std::move(name)), c_in_(c_in), c_out_(c_out), k_(k), d_(d), g_(g), s_(s),
          has_bias_(bias) {
        if (c_in < 1 || c_out < 1 || k < 1 || d < 1 || g < 1 || s < 1)
            throw ConfigError("conv1d dimensions must be >= 1");
        if (c_in % g != 0 || c_out % g != 0)
            throw ConfigError("conv1d channels (" + std::to_string(c_in) + "->" +
                              std::to_string(c_out) + ") not divisible by group " +
                              std::to_string(g));
        w = Param<T>(name_ + ".w", {c_out, c_in / g, k});
        if (has_bias_) b = Param<T>(name_ + ".b", {c_out});
    }

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        if (x.c != c_in_)
            throw ShapeError(name_ + ": expected " + std::to_string(c_in_) + " channels, got " +
                             std::to_string(x.c));
        long extent = d_ * (k_ - 1) + 1;
        if (x.t < extent)
            throw ShapeError(name_ + ": input length " + std::to_string(x.t) +
                             " shorter than kernel extent " + std::to_string(extent));
        x_cache_ = x;
        long t_out = (x.t - d_ * (k_ - 1) - 1) / s_ + 1;
        Tensor3T<T> y(x.n, c_out_, t_out);
        if (MacCounter* mc = mac_counter())
            run_forward<true>(x, y, mc);
        else
            run_forward<false>(x, y, nullptr);
        debug_check_finite(y, name_.c_str());
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (x_cache_.n == 0) throw StateError(name_ + ": backward before forward");
        const Tensor3T<T>& x = x_cache_;
        long cpg_in = c_in_ / g_, cpg_out = c_out_ / g_;
        long t_out = gy.t;
        Tensor3T<T> gx(x.n, c_in_, x.t);

        // Weight/bias grads: each co owns its rows, batch iterated in order.
        parallel_for(c_out_, [&](long b0, long e0) {
            for (long co = b0; co < e0; ++co) {
                long grp = co / cpg_out;
                T* gwrow = &w.g[std::size_t(co) * cpg_in * k_];
                T gbias = 0;
                for (long n = 0; n < x.n; ++n) {
                    const T* gyrow = gy.row(n, co);
                    for (long ci = 0; ci < cpg_in; ++ci) {
                        const T* xrow = x.row(n, grp * cpg_in + ci);
                        for (long i = 0; i < k_; ++i) {
                            const T* xs = xrow + d_ * i;
                            T acc = 0;
                            if (s_ == 1)
                                for (long to = 0; to < t_out; ++to) acc += gyrow[to] * xs[to];
                            else
                                for (long to = 0; to < t_out; ++to) acc += gyrow[to] * xs[to * s_];
                            gwrow[ci * k_ + i] += acc;
                        }
                    }
                    if (has_bias_)
                        for (long to = 0; to < t_out; ++to) gbias += gyrow[to];
                }
                if (has_bias_) b.g[std::size_t(co)] += gbias;
            }
        });

        // Input grads: each batch item owns its slice.
        parallel_for(x.n, [&](long b0, long e0) {
            for (long n = b0; n < e0; ++n)
                for (long co = 0; co < c_out_; ++co) {
                    long grp = co / cpg_out;
                    const T* gyrow = gy.row(n, co);
                    const T* wrow = &w.v[std::size_t(co) * cpg_in * k_];
                    for (long ci = 0; ci < cpg_in; ++ci) {
                        T* gxrow = gx.row(n, grp * cpg_in + ci);
                        for (long i = 0; i < k_; ++i) {
                            T wv = wrow[ci * k_ + i];
                            T* gxs = gxrow + d_ * i;
                            if (s_ == 1)
                                for (long to = 0; to < t_out; ++to) gxs[to] += wv * gyrow[to];
                            else
                                for (long to = 0; to < t_out; ++to) gxs[to * s_] += wv * gyrow[to];
                        }
                    }
                }
        });
        return gx;
    }

    long c_in() const { return c_in_; }
    long c_out() const { return c_out_; }
    long kernel() const { return k_; }
    long dilation() const { return d_; }
    long group() const { return g_; }
    long stride() const { return s_; }
    bool has_bias() const { return has_bias_; }
    const std::string& name() const { return name_; }

    Param<T> w;
    Param<T> b;  // empty unless has_bias

private:
    template <bool Counted>
    void run_forward(const Tensor3T<T>& x, Tensor3T<T>& y, MacCounter* mc) {
        long cpg_in = c_in_ / g_, cpg_out = c_out_ / g_;
        long t_out = y.t;
        std::int64_t macs = 0;
        parallel_for(x.n * c_out_, [&](long b0, long e0) {
            for (long idx = b0; idx < e0; ++idx) {
                long n = idx / c_out_, co = idx % c_out_;
                long grp = co / cpg_out;
                T* yrow = y.row(n, co);
                if (has_bias_) std::fill(yrow, yrow + t_out, b.v[std::size_t(co)]);
                const T* wrow = &w.v[std::size_t(co) * cpg_in * k_];
                for (long ci = 0; ci < cpg_in; ++ci) {
                    const T* xrow = x.row(n, grp * cpg_in + ci);
                    for (long i = 0; i < k_; ++i) {
                        T wv = wrow[ci * k_ + i];
                        const T* xs = xrow + d_ * i;
                        if (s_ == 1) {
                            for (long to = 0; to < t_out; ++to) {
                                yrow[to] += wv * xs[to];
                                if constexpr (Counted) ++macs;
                            }
                        } else {
                            for (long to = 0; to < t_out; ++to) {
                                yrow[to] += wv * xs[to * s_];
                                if constexpr (Counted) ++macs;
                            }
                        }
                    }
                }
            }
        });
        if constexpr (Counted) mc->conv += macs;
    }

    std::string name_;
    long c_in_, c_out_, k_, d_, g_, s_;
    bool has_bias_;
    Tensor3T<T> x_cache_;
};

// Per-channel batch norm over (n, t). Train mode normalizes with batch
// statistics (biased variance) and folds unbiased statistics into the running
// buffers; eval mode uses the running buffers only. eps 1e-5, momentum 0.1.
template <typename T>
class BatchNorm1d {
public:
    explicit BatchNorm1d(std::string name, long c, T eps = T(1e-5), T momentum = T(0.1))
        : name_(std::move(name)), c_(c), eps_(eps), momentum_(momentum) {
        gamma = Param<T>(name_ + ".gamma", {c});
        beta = Param<T>(name_ + ".beta", {c});
        std::fill(gamma.v.begin(), gamma.v.end(), T(1));
        running_mean.assign(std::size_t(c), T(0));
        running_var.assign(std::size_t(c), T(1));
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode) {
        if (x.c != c_)
            throw ShapeError(name_ + ": expected " + std::to_string(c_) + " channels, got " +
                             std::to_string(x.c));
        mode_ = mode;
        long ne = x.n * x.t;
        if (mode == Mode::Train && ne < 2)
            throw RangeError(name_ + ": degenerate batch (n*t = " + std::to_string(ne) + ")");
        xhat_ = Tensor3T<T>(x.n, x.c, x.t);
        inv_std_.assign(std::size_t(c_), T(0));
        Tensor3T<T> y(x.n, x.c, x.t);
        MacCounter* mc = mac_counter();
        for (long ch = 0; ch < c_; ++ch) {
            T mean, var;
            if (mode == Mode::Train) {
                double sum = 0;
                for (long n = 0; n < x.n; ++n) {
                    const T* xr = x.row(n, ch);
                    for (long t = 0; t < x.t; ++t) sum += double(xr[t]);
                }
                mean = T(sum / double(ne));
                double sq = 0;
                for (long n = 0; n < x.n; ++n) {
                    const T* xr = x.row(n, ch);
                    for (long t = 0; t < x.t; ++t) {
                        double dlt = double(xr[t]) - double(mean);
                        sq += dlt * dlt;
                    }
                }
                var = T(sq / double(ne));
                T unbiased = ne > 1 ? T(sq / double(ne - 1)) : var;
                running_mean[std::size_t(ch)] =
                    (T(1) - momentum_) * running_mean[std::size_t(ch)] + momentum_ * mean;
                running_var[std::size_t(ch)] =
                    (T(1) - momentum_) * running_var[std::size_t(ch)] + momentum_ * unbiased;
            } else {
                mean = running_mean[std::size_t(ch)];
                var = running_var[std::size_t(ch)];
            }
            T inv = T(1) / std::sqrt(var + eps_);
            inv_std_[std::size_t(ch)] = inv;
            T gm = gamma.v[std::size_t(ch)], bt = beta.v[std::size_t(ch)];
            for (long n = 0; n < x.n; ++n) {
                const T* xr = x.row(n, ch);
                T* hr = xhat_.row(n, ch);
                T* yr = y.row(n, ch);
                for (long t = 0; t < x.t; ++t) {
                    T h = (xr[t] - mean) * inv;
                    hr[t] = h;
                    yr[t] = gm * h + bt;
                }
            }
        }
        if (mc) mc->bn += 2 * std::int64_t(x.n) * c_ * x.t;
        debug_check_finite(y, name_.c_str());
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (xhat_.n == 0) throw StateError(name_ + ": backward before forward");
        Tensor3T<T> gx(gy.n, gy.c, gy.t);
        long ne = gy.n * gy.t;
        for (long ch = 0; ch < c_; ++ch) {
            double sum_gy = 0, sum_gy_h = 0;
            for (long n = 0; n < gy.n; ++n) {
                const T* gr = gy.row(n, ch);
                const T* hr = xhat_.row(n, ch);
                for (long t = 0; t < gy.t; ++t) {
                    sum_gy += double(gr[t]);
                    sum_gy_h += double(gr[t]) * double(hr[t]);
                }
            }
            gamma.g[std::size_t(ch)] += T(sum_gy_h);
            beta.g[std::size_t(ch)] += T(sum_gy);
            T gm = gamma.v[std::size_t(ch)];
            T inv = inv_std_[std::size_t(ch)];
            if (mode_ == Mode::Train) {
                T a = gm * inv;
                T mean_gy = T(sum_gy / double(ne));
                T mean_gy_h = T(sum_gy_h / double(ne));
                for (long n = 0; n < gy.n; ++n) {
                    const T* gr = gy.row(n, ch);
                    const T* hr = xhat_.row(n, ch);
                    T* xr = gx.row(n, ch);
                    for (long t = 0; t < gy.t; ++t)
                        xr[t] = a * (gr[t] - mean_gy - hr[t] * mean_gy_h);
                }
            } else {
                T a = gm * inv;
                for (long n = 0; n < gy.n; ++n) {
                    const T* gr = gy.row(n, ch);
                    T* xr = gx.row(n, ch);
                    for (long t = 0; t < gy.t; ++t) xr[t] = a * gr[t];
                }
            }
        }
        return gx;
    }

    long channels() const { return c_; }
    const std::string& name() const { return name_; }

    Param<T> gamma, beta;
    std::vector<T> running_mean, running_var;

private:
    std::string name_;
    long c_;
    T eps_, momentum_;
    Mode mode_ = Mode::Train;
    Tensor3T<T> xhat_;
    std::vector<T> inv_std_;
};

enum class ActivationKind { ReLU, ReLU6, Swish, MishPaper, MishStandard, Sigmoid, Softplus };

inline const char* activation_name(ActivationKind k) {
    switch (k) {
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::ReLU6: return "relu6";
        case ActivationKind::Swish: return "swish";
        case ActivationKind::MishPaper: return "mish_paper";
        case ActivationKind::MishStandard: return "mish_standard";
        case ActivationKind::Sigmoid: return "sigmoid";
        case ActivationKind::Softplus: return "softplus";
    }
    return "?";
}

inline ActivationKind parse_activation(const std::string& s) {
    if (s == "relu") return ActivationKind::ReLU;
    if (s == "relu6") return ActivationKind::ReLU6;
    if (s == "swish") return ActivationKind::Swish;
    if (s == "mish_paper" || s == "mish") return ActivationKind::MishPaper;
    if (s == "mish_standard") return ActivationKind::MishStandard;
    if (s == "sigmoid") return ActivationKind::Sigmoid;
    if (s == "softplus") return ActivationKind::Softplus;
    throw ConfigError("unknown activation '" + s + "'");
}

namespace detail {

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T stable_softplus(T x) {
    return std::log1p(std::exp(-std::abs(x))) + std::max(x, T(0));
}

template <typename T>
T act_apply(ActivationKind k, T x) {
    switch (k) {
        case ActivationKind::ReLU: return x > T(0) ? x : T(0);
        case ActivationKind::ReLU6: return std::min(std::max(x, T(0)), T(6));
        case ActivationKind::Swish: return x * stable_sigmoid(x);
        case ActivationKind::MishPaper: return x * stable_softplus(x);
        case ActivationKind::MishStandard: return x * std::tanh(stable_softplus(x));
        case ActivationKind::Sigmoid: return stable_sigmoid(x);
        case ActivationKind::Softplus: return stable_softplus(x);
    }
    return x;
}

template <typename T>
T act_deriv(ActivationKind k, T x) {
    switch (k) {
        case ActivationKind::ReLU: return x > T(0) ? T(1) : T(0);
        case ActivationKind::ReLU6: return (x > T(0) && x < T(6)) ? T(1) : T(0);
        case ActivationKind::Swish: {
            T s = stable_sigmoid(x);
            return s + x * s * (T(1) - s);
        }
        case ActivationKind::MishPaper: return stable_softplus(x) + x * stable_sigmoid(x);
        case ActivationKind::MishStandard: {
            T th = std::tanh(stable_softplus(x));
            return th + x * (T(1) - th * th) * stable_sigmoid(x);
        }
        case ActivationKind::Sigmoid: {
            T s = stable_sigmoid(x);
            return s * (T(1) - s);
        }
        case ActivationKind::Softplus: return stable_sigmoid(x);
    }
    return T(1);
}

}  // namespace detail

template <typename T>
class Activation {
public:
    explicit Activation(ActivationKind kind) : kind_(kind) {}

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        x_cache_ = x;
        Tensor3T<T> y(x.n, x.c, x.t);
        const T* px = x.data.data();
        T* py = y.data.data();
        long sz = x.size();
        for (long i = 0; i < sz; ++i) py[i] = detail::act_apply(kind_, px[i]);
        if (MacCounter* mc = mac_counter()) mc->act += sz;
        debug_check_finite(y, activation_name(kind_));
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (x_cache_.n == 0) throw StateError("activation backward before forward");
        Tensor3T<T> gx(gy.n, gy.c, gy.t);
        const T* px = x_cache_.data.data();
        const T* pg = gy.data.data();
        T* po = gx.data.data();
        long sz = gy.size();
        for (long i = 0; i < sz; ++i) po[i] = pg[i] * detail::act_deriv(kind_, px[i]);
        return gx;
    }

    ActivationKind kind() const { return kind_; }
    const Tensor3T<T>& cached_input() const { return x_cache_; }

    // Distance of the cached pre-activations to the nearest non-smooth point;
    // infinity for smooth kinds. The gradient checker rejects cases that land
    // too close to a kink, where central differences measure the wrong slope.
    double kink_margin() const {
        if (kind_ != ActivationKind::ReLU && kind_ != ActivationKind::ReLU6) return 1e30;
        double m = 1e30;
        for (T v : x_cache_.data) {
            m = std::min(m, std::abs(double(v)));
            if (kind_ == ActivationKind::ReLU6) m = std::min(m, std::abs(double(v) - 6.0));
        }
        return m;
    }

private:
    ActivationKind kind_;
    Tensor3T<T> x_cache_;
};

template <typename T>
class MaxPool1d {
public:
    MaxPool1d(long k, long s) : k_(k), s_(s) {
        if (k < 1 || s < 1) throw ConfigError("maxpool k and s must be >= 1");
    }

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        if (x.t < k_)
            throw ShapeError("maxpool: input length " + std::to_string(x.t) +
                             " shorter than window " + std::to_string(k_));
        in_n_ = x.n;
        in_c_ = x.c;
        in_t_ = x.t;
        long t_out = (x.t - k_) / s_ + 1;
        Tensor3T<T> y(x.n, x.c, t_out);
        argmax_.assign(std::size_t(x.n) * x.c * t_out, 0);
        min_gap_ = 1e30;
        for (long n = 0; n < x.n; ++n)
            for (long c = 0; c < x.c; ++c) {
                const T* xr = x.row(n, c);
                T* yr = y.row(n, c);
                long* ar = argmax_.data() + (std::size_t(n) * x.c + c) * t_out;
                for (long to = 0; to < t_out; ++to) {
                    long base = to * s_;
                    T best = xr[base];
                    long bi = base;
                    T second = -std::numeric_limits<T>::infinity();
                    for (long i = 1; i < k_; ++i) {
                        T v = xr[base + i];
                        if (v > best) {
                            second = best;
                            best = v;
                            bi = base + i;  // ties keep the first index
                        } else if (v > second) {
                            second = v;
                        }
                    }
                    if (k_ > 1) min_gap_ = std::min(min_gap_, double(best) - double(second));
                    yr[to] = best;
                    ar[to] = bi;
                }
            }
        if (MacCounter* mc = mac_counter()) mc->pool += std::int64_t(x.n) * x.c * t_out * k_;
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (argmax_.empty()) throw StateError("maxpool backward before forward");
        Tensor3T<T> gx(in_n_, in_c_, in_t_);
        for (long n = 0; n < gy.n; ++n)
            for (long c = 0; c < gy.c; ++c) {
                const T* gr = gy.row(n, c);
                T* xr = gx.row(n, c);
                const long* ar = argmax_.data() + (std::size_t(n) * gy.c + c) * gy.t;
                for (long to = 0; to < gy.t; ++to) xr[ar[to]] += gr[to];
            }
        return gx;
    }

    long kernel() const { return k_; }
    long stride() const { return s_; }
    double kink_margin() const { return min_gap_; }

private:
    long k_, s_;
    long in_n_ = 0, in_c_ = 0, in_t_ = 0;
    std::vector<long> argmax_;
    double min_gap_ = 1e30;
};

template <typename T>
class AdaptiveAvgPool1d {
public:
    Tensor3T<T> forward(const Tensor3T<T>& x) {
        if (x.t == 0) throw ShapeError("adaptive_avgpool: empty sequence");
        in_t_ = x.t;
        Tensor3T<T> y(x.n, x.c, 1);
        for (long n = 0; n < x.n; ++n)
            for (long c = 0; c < x.c; ++c) {
                const T* xr = x.row(n, c);
                double acc = 0;
                for (long t = 0; t < x.t; ++t) acc += double(xr[t]);
                y.at(n, c, 0) = T(acc / double(x.t));
            }
        if (MacCounter* mc = mac_counter()) mc->avgpool += std::int64_t(x.n) * x.c * x.t;
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (in_t_ == 0) throw StateError("adaptive_avgpool backward before forward");
        Tensor3T<T> gx(gy.n, gy.c, in_t_);
        T inv = T(1) / T(in_t_);
        for (long n = 0; n < gy.n; ++n)
            for (long c = 0; c < gy.c; ++c) {
                T v = gy.at(n, c, 0) * inv;
                T* xr = gx.row(n, c);
                for (long t = 0; t < in_t_; ++t) xr[t] = v;
            }
        return gx;
    }

private:
    long in_t_ = 0;
};

// Fully connected map over flattened per-batch features: y = x*W + b,
// W shaped (in, out). Input may arrive as (n, c, t) with c*t == in.
template <typename T>
class Linear {
public:
    Linear(std::string name, long in, long out) : name_(std::move(name)), in_(in), out_(out) {
        if (in < 1 || out < 1) throw ConfigError("linear dims must be >= 1");
        w = Param<T>(name_ + ".w", {in, out});
        b = Param<T>(name_ + ".b", {out});
    }

    Tensor3T<T> forward(const Tensor3T<T>& x) {
        if (x.c * x.t != in_)
            throw ShapeError(name_ + ": expected " + std::to_string(in_) + " features, got " +
                             std::to_string(x.c * x.t));
        x_cache_ = x;
        Tensor3T<T> y(x.n, out_, 1);
        for (long n = 0; n < x.n; ++n) {
            const T* xr = x.data.data() + std::size_t(n) * in_;
            T* yr = y.row(n, 0);
            for (long o = 0; o < out_; ++o) yr[o] = b.v[std::size_t(o)];
            for (long i = 0; i < in_; ++i) {
                T xv = xr[i];
                const T* wr = &w.v[std::size_t(i) * out_];
                for (long o = 0; o < out_; ++o) yr[o] += xv * wr[o];
            }
        }
        if (MacCounter* mc = mac_counter()) mc->linear += std::int64_t(x.n) * in_ * out_;
        debug_check_finite(y, name_.c_str());
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (x_cache_.n == 0) throw StateError(name_ + ": backward before forward");
        const Tensor3T<T>& x = x_cache_;
        Tensor3T<T> gx(x.n, x.c, x.t);
        for (long n = 0; n < x.n; ++n) {
            const T* xr = x.data.data() + std::size_t(n) * in_;
            const T* gr = gy.row(n, 0);
            T* gxr = gx.data.data() + std::size_t(n) * in_;
            for (long o = 0; o < out_; ++o) b.g[std::size_t(o)] += gr[o];
            for (long i = 0; i < in_; ++i) {
                const T* wr = &w.v[std::size_t(i) * out_];
                T* gwr = &w.g[std::size_t(i) * out_];
                T xv = xr[i];
                T acc = 0;
                for (long o = 0; o < out_; ++o) {
                    gwr[o] += xv * gr[o];
                    acc += wr[o] * gr[o];
                }
                gxr[i] = acc;
            }
        }
        return gx;
    }

    long in() const { return in_; }
    long out() const { return out_; }
    const std::string& name() const { return name_; }

    Param<T> w, b;

private:
    std::string name_;
    long in_, out_;
    Tensor3T<T> x_cache_;
};

// Xavier/Glorot uniform: bound sqrt(6/(fan_in+fan_out)).
template <typename T>
void xavier_fill(Param<T>& p, long fan_in, long fan_out, Prng& rng) {
    double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    for (T& v : p.v) v = T(rng.uniform(-bound, bound));
}

// Fan counts per weight rank: conv weights (c_out, c_in/g, k) have fan_in
// (c_in/g)*k and fan_out c_out*k; linear weights (in, out) use their two
// dims. Rank-1 params (biases, batch-norm affine) keep their constructed
// values.
template <typename T>
void xavier_init_params(const std::vector<Param<T>*>& params, Prng& rng) {
    for (Param<T>* p : params) {
        if (p->dims.size() == 3)
            xavier_fill(*p, p->dims[1] * p->dims[2], p->dims[0] * p->dims[2], rng);
        else if (p->dims.size() == 2)
            xavier_fill(*p, p->dims[0], p->dims[1], rng);
    }
}

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
class Dropout {
public:
    explicit Dropout(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0) throw RangeError("dropout rate must be in [0, 1)");
    }

    Tensor3T<T> forward(const Tensor3T<T>& x, Mode mode, Prng* rng) {
        if (mode == Mode::Eval || rate_ == 0.0) {
            active_ = false;
            return x;
        }
        if (!rng) throw StateError("dropout in train mode needs a prng");
        active_ = true;
        T scale = T(1.0 / (1.0 - rate_));
        mask_ = Tensor3T<T>(x.n, x.c, x.t);
        Tensor3T<T> y(x.n, x.c, x.t);
        const T* px = x.data.data();
        T* pm = mask_.data.data();
        T* py = y.data.data();
        long sz = x.size();
        for (long i = 0; i < sz; ++i) {
            T m = rng->next_double() < rate_ ? T(0) : scale;
            pm[i] = m;
            py[i] = px[i] * m;
        }
        return y;
    }

    Tensor3T<T> backward(const Tensor3T<T>& gy) {
        if (!active_) return gy;
        return elementwise(gy, mask_, Elementwise::Hadamard);
    }

    double rate() const { return rate_; }

private:
    double rate_;
    bool active_ = false;
    Tensor3T<T> mask_;
};

}  // namespace atcn
