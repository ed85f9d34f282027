#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ineqop/common.hpp"

namespace ineqop {

// Random partition of {0..n-1} into K folds with sizes differing by at most
// one. Deterministic in (n, K, seed).
struct FoldAssignment {
    int K = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of;                        // per row
    std::vector<std::vector<std::size_t>> rows_of;   // per fold, ascending rows

    std::size_t n() const { return fold_of.size(); }

    // Rows outside the given folds (k2 < 0: complement of k1 only).
    std::vector<std::size_t> complement(int k1, int k2 = -1) const {
        std::vector<std::size_t> out;
        out.reserve(n());
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != k1 && fold_of[i] != k2) out.push_back(i);
        return out;
    }

    void validate() const {
        if (K < 2) throw ConfigError("folds: K must be >= 2");
        if (fold_of.size() < static_cast<std::size_t>(K)) throw ConfigError("folds: K exceeds n");
        std::size_t mn = fold_of.size(), mx = 0;
        for (const auto& rows : rows_of) {
            mn = std::min(mn, rows.size());
            mx = std::max(mx, rows.size());
        }
        if (mx - mn > 1) throw ConfigError("folds: sizes differ by more than one");
    }
};

inline FoldAssignment make_folds(std::size_t n, int K, std::uint64_t seed) {
    if (K < 2) throw ConfigError("make_folds: K must be >= 2");
    if (static_cast<std::size_t>(K) > n) throw ConfigError("make_folds: K exceeds sample size");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }

    FoldAssignment f;
    f.K = K;
    f.seed = seed;
    f.fold_of.assign(n, -1);
    f.rows_of.assign(static_cast<std::size_t>(K), {});
    const std::size_t base = n / static_cast<std::size_t>(K);
    const std::size_t extra = n % static_cast<std::size_t>(K);
    std::size_t pos = 0;
    for (int k = 0; k < K; ++k) {
        const std::size_t size = base + (static_cast<std::size_t>(k) < extra ? 1 : 0);
        for (std::size_t j = 0; j < size; ++j) {
            f.fold_of[perm[pos]] = k;
            ++pos;
        }
    }
    for (std::size_t i = 0; i < n; ++i) f.rows_of[static_cast<std::size_t>(f.fold_of[i])].push_back(i);
    return f;
}

}  // namespace ineqop
