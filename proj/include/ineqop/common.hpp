#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ineqop {

inline constexpr const char* kVersion = "0.1.0";

// Error taxonomy. The CLI maps these onto exit codes, the library throws them.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seed derivation
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable per-task seed: independent of scheduling order, so parallel runs
// reproduce serial ones bit for bit.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(master ^ splitmix64(stream + 0x51ed2701ab584c25ULL));
}

// ---------------------------------------------------------------------------
// Weighted moments
// ---------------------------------------------------------------------------

inline double weight_total(const std::vector<double>& w) {
    double t = 0.0;
    for (double v : w) t += v;
    return t;
}

inline double weighted_mean(const std::vector<double>& x, const std::vector<double>& w) {
    if (x.size() != w.size() || x.empty()) throw DataError("weighted_mean: size mismatch or empty input");
    double s = 0.0, t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * x[i];
        t += w[i];
    }
    return s / t;
}

// Population-style weighted variance: sum w*(x-m)^2 / sum w.
inline double weighted_var(const std::vector<double>& x, const std::vector<double>& w) {
    const double m = weighted_mean(x, w);
    double s = 0.0, t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - m;
        s += w[i] * d * d;
        t += w[i];
    }
    return s / t;
}

inline double weighted_cov(const std::vector<double>& x, const std::vector<double>& y,
                           const std::vector<double>& w) {
    if (x.size() != y.size()) throw DataError("weighted_cov: size mismatch");
    const double mx = weighted_mean(x, w);
    const double my = weighted_mean(y, w);
    double s = 0.0, t = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * (x[i] - mx) * (y[i] - my);
        t += w[i];
    }
    return s / t;
}

// ---------------------------------------------------------------------------
// Normal distribution helpers
// ---------------------------------------------------------------------------

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double two_sided_p(double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0)); }

// Inverse standard normal CDF (Wichura's PPND16 rational approximations,
// accurate to ~1e-16 over (0,1)).
inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw NumericError("normal_quantile: p must lie in (0,1)");
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
        x = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        x = num / den;
    }
    return (q < 0.0) ? -x : x;
}

// ---------------------------------------------------------------------------
// Parallel execution
// ---------------------------------------------------------------------------

// Runs fn(i) for i in [0, count). Task i gets the same inputs regardless of
// the thread that picks it up; callers keep determinism by writing results
// into slot i and deriving per-task seeds from the task index.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline int hardware_threads() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

// Shortest round-trip decimal form; integral doubles print without a decimal
// point ("7", not "7.0").
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, bool& ok) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t' || *(e - 1) == '\r')) --e;
    auto res = std::from_chars(b, e, v);
    ok = (res.ec == std::errc() && res.ptr == e && b != e);
    return v;
}

}  // namespace ineqop
