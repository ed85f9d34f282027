#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ineqop/common.hpp"

namespace ineqop {

// ---------------------------------------------------------------------------
// Pairwise sums over sign-ordered keys
// ---------------------------------------------------------------------------
//
// The sums below drive both the standard Gini and its sign-weighted variants:
//
//   S(key) = sum over unordered pairs {i,j} of w_i w_j sgn(key_i - key_j)(y_i - y_j)
//
// With key = y this is half the ordered double sum of w_i w_j |y_i - y_j|.
// Pairs with equal keys contribute zero (sgn(0) = 0), so ties are handled by
// grouping equal keys, never by perturbing them.

namespace detail {

// Rows sorted by key, with tie runs identified. Indices refer to positions
// in the input vectors.
inline std::vector<std::size_t> sort_order(const std::vector<double>& key) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (key[a] != key[b]) return key[a] < key[b];
        return a < b;
    });
    return order;
}

}  // namespace detail

// Unordered-pairs sum S(key) in O(n log n): walk tie groups in key order and
// pair each row against the prefix of strictly smaller keys.
inline double signed_pair_sum(const std::vector<double>& key, const std::vector<double>& y,
                              const std::vector<double>& w) {
    const std::size_t n = key.size();
    if (y.size() != n || w.size() != n) throw DataError("signed_pair_sum: size mismatch");
    const auto order = detail::sort_order(key);

    double total = 0.0;
    double w_prefix = 0.0;   // sum of w over strictly smaller keys
    double wy_prefix = 0.0;  // sum of w*y over strictly smaller keys
    std::size_t g = 0;
    while (g < n) {
        std::size_t g_end = g;
        while (g_end < n && key[order[g_end]] == key[order[g]]) ++g_end;
        double w_group = 0.0, wy_group = 0.0;
        for (std::size_t k = g; k < g_end; ++k) {
            const std::size_t i = order[k];
            total += w[i] * (y[i] * w_prefix - wy_prefix);
            w_group += w[i];
            wy_group += w[i] * y[i];
        }
        w_prefix += w_group;
        wy_prefix += wy_group;
        g = g_end;
    }
    return total;
}

// Per-row sums  t_i = sum_{j != i} w_j sgn(key_i - key_j)(y_i - y_j),
// the building block of the pairwise variance estimators.
inline std::vector<double> per_row_signed_sums(const std::vector<double>& key,
                                               const std::vector<double>& y,
                                               const std::vector<double>& w) {
    const std::size_t n = key.size();
    if (y.size() != n || w.size() != n) throw DataError("per_row_signed_sums: size mismatch");
    const auto order = detail::sort_order(key);

    double w_total = 0.0, wy_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w_total += w[i];
        wy_total += w[i] * y[i];
    }

    std::vector<double> out(n, 0.0);
    double w_below = 0.0, wy_below = 0.0;
    std::size_t g = 0;
    while (g < n) {
        std::size_t g_end = g;
        while (g_end < n && key[order[g_end]] == key[order[g]]) ++g_end;
        double w_group = 0.0, wy_group = 0.0;
        for (std::size_t k = g; k < g_end; ++k) {
            const std::size_t i = order[k];
            w_group += w[i];
            wy_group += w[i] * y[i];
        }
        const double w_above = w_total - w_below - w_group;
        const double wy_above = wy_total - wy_below - wy_group;
        for (std::size_t k = g; k < g_end; ++k) {
            const std::size_t i = order[k];
            // below: +w_j(y_i - y_j); above: -w_j(y_i - y_j); ties drop out.
            out[i] = (y[i] * w_below - wy_below) - (y[i] * w_above - wy_above);
        }
        w_below += w_group;
        wy_below += wy_group;
        g = g_end;
    }
    return out;
}

// Denominator of the pairwise ratio estimators: the ordered double sum
// sum_{i,j} w_i w_j (y_i + y_j) over all pairs including i == j, which
// collapses to 2 * W * sum(w y).
inline double pair_denominator(const std::vector<double>& y, const std::vector<double>& w) {
    double w_total = 0.0, wy_total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        w_total += w[i];
        wy_total += w[i] * y[i];
    }
    return 2.0 * w_total * wy_total;
}

namespace detail {

inline void check_positive_sample(const std::vector<double>& y, const std::vector<double>& w,
                                  const char* who) {
    if (y.size() < 2) throw DataError(std::string(who) + ": need n >= 2");
    if (w.size() != y.size()) throw DataError(std::string(who) + ": weight length mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0) || !std::isfinite(y[i]))
            throw DataError(std::string(who) + ": values must be positive and finite");
        if (!(w[i] > 0.0)) throw DataError(std::string(who) + ": weights must be positive");
    }
}

}  // namespace detail

// Weighted Gini coefficient:
//   sum_{i,j} w_i w_j |y_i - y_j| / sum_{i,j} w_i w_j (y_i + y_j)
inline double gini(const std::vector<double>& y, const std::vector<double>& w) {
    detail::check_positive_sample(y, w, "gini");
    return 2.0 * signed_pair_sum(y, y, w) / pair_denominator(y, w);
}

inline double gini(const std::vector<double>& y) {
    return gini(y, std::vector<double>(y.size(), 1.0));
}

// Weighted mean logarithmic deviation: ln(mean) - mean(ln).
inline double mld(const std::vector<double>& y, const std::vector<double>& w) {
    detail::check_positive_sample(y, w, "mld");
    double w_total = 0.0, wy = 0.0, wlog = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        w_total += w[i];
        wy += w[i] * y[i];
        wlog += w[i] * std::log(y[i]);
    }
    return std::log(wy / w_total) - wlog / w_total;
}

inline double mld(const std::vector<double>& y) {
    return mld(y, std::vector<double>(y.size(), 1.0));
}

}  // namespace ineqop
