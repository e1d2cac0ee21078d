#pragma once

#include <atcn/errors.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace atcn {

// SplitMix64: 64-bit state, pure integer arithmetic, so identical seeds give
// identical streams on every platform. Every random choice in the toolkit
// (init, dropout, shuffling, augmentation, synthetic data) flows through this.
class Prng {
public:
    explicit Prng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Fisher-Yates style helper: uniform integer in [0, n).
    long next_index(long n) { return long(next_u64() % std::uint64_t(n)); }

    // Box-Muller; the second draw of each pair is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Dense (batch, channel, time) tensor, row-major, contiguous. t may be 0 only
// so empty-sequence errors can be reported by the op that hits them.
template <typename T>
struct Tensor3T {
    long n = 0, c = 0, t = 0;
    std::vector<T> data;

    Tensor3T() = default;

    Tensor3T(long n_, long c_, long t_, T fill = T(0)) : n(n_), c(c_), t(t_) {
        if (n < 1 || c < 1 || t < 0)
            throw ShapeError("invalid tensor shape (" + std::to_string(n_) + "," +
                             std::to_string(c_) + "," + std::to_string(t_) + ")");
        data.assign(std::size_t(n) * c * t, fill);
    }

    long size() const { return long(data.size()); }

    T& at(long in, long ic, long it) { return data[(std::size_t(in) * c + ic) * t + it]; }
    T at(long in, long ic, long it) const { return data[(std::size_t(in) * c + ic) * t + it]; }

    T* row(long in, long ic) { return data.data() + (std::size_t(in) * c + ic) * t; }
    const T* row(long in, long ic) const { return data.data() + (std::size_t(in) * c + ic) * t; }

    bool same_shape(const Tensor3T& o) const { return n == o.n && c == o.c && t == o.t; }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(t) + ")";
    }
};

using Tensor3 = Tensor3T<float>;

#ifndef NDEBUG
template <typename T>
inline void debug_check_finite(const Tensor3T<T>& x, const char* where) {
    for (T v : x.data)
        if (!std::isfinite(double(v)))
            throw NumericError(std::string("non-finite value after ") + where);
}
#else
template <typename T>
inline void debug_check_finite(const Tensor3T<T>&, const char*) {}
#endif

template <typename T>
Tensor3T<T> tensor_new(long n, long c, long t, T fill = T(0)) {
    return Tensor3T<T>(n, c, t, fill);
}

inline Tensor3 tensor_new(long n, long c, long t, float fill = 0.0f) {
    return Tensor3(n, c, t, fill);
}

enum class Elementwise { Add, Hadamard };

template <typename T>
Tensor3T<T> elementwise(const Tensor3T<T>& a, const Tensor3T<T>& b, Elementwise kind) {
    if (!a.same_shape(b))
        throw ShapeError("elementwise shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    Tensor3T<T> out = a;
    const T* pb = b.data.data();
    T* po = out.data.data();
    long sz = out.size();
    if (kind == Elementwise::Add)
        for (long i = 0; i < sz; ++i) po[i] += pb[i];
    else
        for (long i = 0; i < sz; ++i) po[i] *= pb[i];
    debug_check_finite(out, "elementwise");
    return out;
}

template <typename T>
Tensor3T<T> rand_uniform(Prng& rng, long n, long c, long t, T lo, T hi) {
    if (!(lo < hi))
        throw RangeError("rand_uniform needs lo < hi");
    Tensor3T<T> out(n, c, t);
    for (T& v : out.data) v = T(rng.uniform(double(lo), double(hi)));
    debug_check_finite(out, "rand_uniform");
    return out;
}

// Trainable parameter: logical rank <= 3 (conv weights (c_out, c_in/g, k),
// matrices (in, out), vectors (c)); value and gradient stay the same size.
template <typename T>
struct Param {
    std::string name;
    std::vector<long> dims;
    std::vector<T> v;
    std::vector<T> g;

    Param() = default;
    Param(std::string nm, std::vector<long> d) : name(std::move(nm)), dims(std::move(d)) {
        long sz = 1;
        for (long x : dims) sz *= x;
        v.assign(std::size_t(sz), T(0));
        g.assign(std::size_t(sz), T(0));
    }

    long size() const { return long(v.size()); }
    void zero_grad() { std::fill(g.begin(), g.end(), T(0)); }
};

// Multiply counter for the analyzer's self-consistency check. Kernels count
// the scalar work they actually execute (one unit per multiply-accumulate,
// two per batch-norm element, one per activation element, one per pooled
// element read) when a counter is installed on this thread.
struct MacCounter {
    std::int64_t conv = 0;
    std::int64_t linear = 0;
    std::int64_t bn = 0;
    std::int64_t act = 0;
    std::int64_t pool = 0;
    std::int64_t avgpool = 0;

    std::int64_t total() const { return conv + linear + bn + act + pool + avgpool; }
};

inline MacCounter*& mac_counter() {
    thread_local MacCounter* counter = nullptr;
    return counter;
}

struct MacScope {
    explicit MacScope(MacCounter& c) { mac_counter() = &c; }
    ~MacScope() { mac_counter() = nullptr; }
    MacScope(const MacScope&) = delete;
    MacScope& operator=(const MacScope&) = delete;
};

inline int thread_budget() {
    static int budget = [] {
        const char* env = std::getenv("ATCN_THREADS");
        if (!env || !*env) return 1;
        int v = std::atoi(env);
        return v < 1 ? 1 : v;
    }();
    return budget;
}

// Static partition over [0, count). Each chunk only writes outputs it owns and
// iterates its own indices in serial order, so results are bit-identical for
// every thread count. Counting mode forces the serial path so one MacCounter
// sees all work.
inline void parallel_for(long count, const std::function<void(long, long)>& fn) {
    int threads = thread_budget();
    if (threads <= 1 || count < 2 || mac_counter()) {
        fn(0, count);
        return;
    }
    if (long(threads) > count) threads = int(count);
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(threads) - 1);
    long chunk = (count + threads - 1) / threads;
    for (int w = 1; w < threads; ++w) {
        long b = w * chunk, e = std::min(count, b + chunk);
        if (b >= e) break;
        pool.emplace_back(fn, b, e);
    }
    fn(0, std::min(count, chunk));
    for (auto& th : pool) th.join();
}

}  // namespace atcn
