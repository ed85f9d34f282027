#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/dataset.hpp"

namespace ineqop {

// ---------------------------------------------------------------------------
// Regression tree over categorical circumstances
// ---------------------------------------------------------------------------
//
// Splits send a subset of a feature's categories left. Candidate subsets are
// found the CART way: order the node's categories by mean response and scan
// prefix cuts, which is optimal for weighted squared error. Categories not
// seen at the node (including labels absent from the training rows) fall to
// the right child.

struct TreeConfig {
    int max_depth = 0;  // 0 = grow until min_leaf stops it
    int min_leaf = 5;   // minimum rows per leaf
    int mtry = 0;       // features tried per split; <= 0 = all

    void validate() const {
        if (max_depth < 0) throw ConfigError("tree: max_depth must be >= 0");
        if (min_leaf < 1) throw ConfigError("tree: min_leaf must be >= 1");
    }
};

struct TreeNode {
    int feature = -1;                    // -1: leaf
    double value = 0.0;                  // leaf prediction
    std::vector<std::uint8_t> go_left;   // per category code of `feature`
    int left = -1, right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict_row(const Dataset& d, std::size_t row) const {
        int idx = 0;
        for (;;) {
            const TreeNode& node = nodes[static_cast<std::size_t>(idx)];
            if (node.feature < 0) return node.value;
            const std::int32_t code = d.x[static_cast<std::size_t>(node.feature)].codes[row];
            const bool left = static_cast<std::size_t>(code) < node.go_left.size() &&
                              node.go_left[static_cast<std::size_t>(code)] != 0;
            idx = left ? node.left : node.right;
        }
    }
};

namespace detail {

struct CategoryStats {
    std::int32_t code;
    double count;  // unweighted rows, min_leaf is a row-count constraint
    double sw;
    double swy;
};

struct TreeBuilder {
    const Dataset& d;
    const std::vector<double>& target;
    const std::vector<double>& w;
    const TreeConfig& cfg;
    std::mt19937_64& rng;
    std::vector<std::size_t>& rows;  // reordered in place during building
    RegressionTree tree;

    std::vector<int> sample_features() {
        const int M = static_cast<int>(d.x.size());
        std::vector<int> feats(static_cast<std::size_t>(M));
        for (int j = 0; j < M; ++j) feats[static_cast<std::size_t>(j)] = j;
        if (cfg.mtry <= 0 || cfg.mtry >= M) return feats;
        for (int j = 0; j < cfg.mtry; ++j) {
            std::uniform_int_distribution<int> pick(j, M - 1);
            std::swap(feats[static_cast<std::size_t>(j)], feats[static_cast<std::size_t>(pick(rng))]);
        }
        feats.resize(static_cast<std::size_t>(cfg.mtry));
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    int build(std::size_t lo, std::size_t hi, int depth) {
        const int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        double sw = 0.0, swy = 0.0;
        for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t r = rows[k];
            sw += w[r];
            swy += w[r] * target[r];
        }
        const double node_mean = swy / sw;
        tree.nodes[static_cast<std::size_t>(node_idx)].value = node_mean;

        const std::size_t n_node = hi - lo;
        const bool depth_ok = cfg.max_depth == 0 || depth < cfg.max_depth;
        if (!depth_ok || n_node < 2 * static_cast<std::size_t>(cfg.min_leaf)) return node_idx;

        // Best split across sampled features: maximize S_L^2/W_L + S_R^2/W_R.
        const double parent_score = swy * swy / sw;
        double best_score = parent_score + 1e-12 * (1.0 + std::fabs(parent_score));
        int best_feature = -1;
        std::vector<std::uint8_t> best_go_left;

        std::vector<CategoryStats> stats;
        for (int f : sample_features()) {
            const auto& col = d.x[static_cast<std::size_t>(f)];
            stats.assign(col.labels.size(), CategoryStats{});
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t r = rows[k];
                auto& s = stats[static_cast<std::size_t>(col.codes[r])];
                s.count += 1.0;
                s.sw += w[r];
                s.swy += w[r] * target[r];
            }
            std::vector<CategoryStats> present;
            for (std::size_t c = 0; c < stats.size(); ++c) {
                if (stats[c].count > 0) {
                    stats[c].code = static_cast<std::int32_t>(c);
                    present.push_back(stats[c]);
                }
            }
            if (present.size() < 2) continue;
            std::sort(present.begin(), present.end(), [](const CategoryStats& a, const CategoryStats& b) {
                const double ma = a.swy / a.sw, mb = b.swy / b.sw;
                if (ma != mb) return ma < mb;
                return a.code < b.code;
            });
            double cl = 0.0, wl = 0.0, sl = 0.0;
            for (std::size_t cut = 0; cut + 1 < present.size(); ++cut) {
                cl += present[cut].count;
                wl += present[cut].sw;
                sl += present[cut].swy;
                const double cr = static_cast<double>(n_node) - cl;
                if (cl < cfg.min_leaf || cr < cfg.min_leaf) continue;
                const double wr = sw - wl, sr = swy - sl;
                const double score = sl * sl / wl + sr * sr / wr;
                if (score > best_score) {
                    best_score = score;
                    best_feature = f;
                    best_go_left.assign(col.labels.size(), 0);
                    for (std::size_t c = 0; c <= cut; ++c)
                        best_go_left[static_cast<std::size_t>(present[c].code)] = 1;
                }
            }
        }
        if (best_feature < 0) return node_idx;

        const auto& col = d.x[static_cast<std::size_t>(best_feature)];
        const auto mid = std::stable_partition(rows.begin() + static_cast<std::ptrdiff_t>(lo),
                                               rows.begin() + static_cast<std::ptrdiff_t>(hi),
                                               [&](std::size_t r) {
                                                   return best_go_left[static_cast<std::size_t>(col.codes[r])] != 0;
                                               });
        const std::size_t split = static_cast<std::size_t>(mid - rows.begin());

        tree.nodes[static_cast<std::size_t>(node_idx)].feature = best_feature;
        tree.nodes[static_cast<std::size_t>(node_idx)].go_left = std::move(best_go_left);
        const int left = build(lo, split, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_idx)].left = left;
        const int right = build(split, hi, depth + 1);
        tree.nodes[static_cast<std::size_t>(node_idx)].right = right;
        return node_idx;
    }
};

}  // namespace detail

inline RegressionTree fit_tree(const Dataset& d, const std::vector<double>& target,
                               const std::vector<double>& w, std::vector<std::size_t> rows,
                               const TreeConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    if (rows.empty()) throw DataError("tree: empty training set");
    detail::TreeBuilder builder{d, target, w, cfg, rng, rows, {}};
    builder.build(0, rows.size(), 0);
    return std::move(builder.tree);
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct ForestConfig {
    int trees = 500;
    TreeConfig tree{0, 5, 0};  // mtry resolved by the caller (default sqrt(M))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        if (trees < 1) throw ConfigError("forest: needs at least one tree");
        tree.validate();
    }
};

struct ForestModel {
    std::vector<RegressionTree> trees;

    double predict_row(const Dataset& d, std::size_t row) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict_row(d, row);
        return s / static_cast<double>(trees.size());
    }
};

// Bagged variance-minimizing trees. Tree t draws its RNG from
// derive_seed(seed, t), so the fit is identical for any thread count.
inline ForestModel fit_forest(const Dataset& d, const std::vector<double>& y,
                              const std::vector<double>& w, const std::vector<std::size_t>& rows,
                              const ForestConfig& cfg) {
    cfg.validate();
    if (rows.empty()) throw DataError("forest: empty training set");
    ForestModel model;
    model.trees.resize(static_cast<std::size_t>(cfg.trees));
    parallel_for(static_cast<std::size_t>(cfg.trees), cfg.threads, [&](std::size_t t) {
        std::mt19937_64 rng(derive_seed(cfg.seed, t));
        std::vector<std::size_t> sample;
        if (cfg.bootstrap) {
            sample.reserve(rows.size());
            std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
            for (std::size_t i = 0; i < rows.size(); ++i) sample.push_back(rows[pick(rng)]);
        } else {
            sample = rows;
        }
        model.trees[t] = fit_tree(d, y, w, std::move(sample), cfg.tree, rng);
    });
    return model;
}

// ---------------------------------------------------------------------------
// Gradient boosted trees (least squares)
// ---------------------------------------------------------------------------

struct GbtConfig {
    int rounds = 300;
    double learning_rate = 0.1;
    TreeConfig tree{3, 5, 0};
    std::uint64_t seed = 0;

    void validate() const {
        if (rounds < 0) throw ConfigError("gbt: rounds must be >= 0");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw ConfigError("gbt: learning rate must lie in (0,1]");
        tree.validate();
        if (tree.max_depth < 1) throw ConfigError("gbt: tree depth must be >= 1");
    }
};

struct GbtModel {
    double base = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    double clamp_lo = 0.0, clamp_hi = 0.0;  // training outcome range

    double predict_row(const Dataset& d, std::size_t row) const {
        double pred = base;
        for (const auto& t : trees) pred += learning_rate * t.predict_row(d, row);
        return std::clamp(pred, clamp_lo, clamp_hi);
    }
};

// Stagewise least-squares boosting. Zero rounds gives the weighted-mean
// constant model. Predictions are clamped to the training outcome range so
// they stay convex-combination-bounded (and positive whenever y is).
inline GbtModel fit_gbt(const Dataset& d, const std::vector<double>& y, const std::vector<double>& w,
                        const std::vector<std::size_t>& rows, const GbtConfig& cfg) {
    cfg.validate();
    if (rows.empty()) throw DataError("gbt: empty training set");
    GbtModel model;
    model.learning_rate = cfg.learning_rate;

    double sw = 0.0, swy = 0.0;
    double lo = y[rows[0]], hi = y[rows[0]];
    for (auto r : rows) {
        sw += w[r];
        swy += w[r] * y[r];
        lo = std::min(lo, y[r]);
        hi = std::max(hi, y[r]);
    }
    model.base = swy / sw;
    model.clamp_lo = lo;
    model.clamp_hi = hi;

    std::vector<double> pred(d.n(), model.base);  // tracked on training rows only
    std::vector<double> resid(d.n(), 0.0);
    model.trees.reserve(static_cast<std::size_t>(cfg.rounds));
    for (int round = 0; round < cfg.rounds; ++round) {
        for (auto r : rows) resid[r] = y[r] - pred[r];
        std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(round)));
        RegressionTree t = fit_tree(d, resid, w, rows, cfg.tree, rng);
        for (auto r : rows) pred[r] += cfg.learning_rate * t.predict_row(d, r);
        model.trees.push_back(std::move(t));
        if (!std::isfinite(pred[rows[0]])) throw NumericError("gbt: diverged");
    }
    return model;
}

}  // namespace ineqop
