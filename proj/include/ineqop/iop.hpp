#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/crossfit.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/inequality.hpp"

namespace ineqop {

enum class IneqIndex { gini, mld };

inline const char* to_string(IneqIndex i) { return i == IneqIndex::gini ? "gini" : "mld"; }

inline IneqIndex ineq_index_from(const std::string& s) {
    if (s == "gini") return IneqIndex::gini;
    if (s == "mld") return IneqIndex::mld;
    throw ConfigError("unknown inequality index '" + s + "'");
}

enum class EstimatorKind { plugin, debiased };

inline const char* to_string(EstimatorKind k) { return k == EstimatorKind::plugin ? "plugin" : "debiased"; }

struct ConfidenceInterval {
    double lo = std::nan("");
    double hi = std::nan("");
};

struct IOpEstimate {
    IneqIndex index = IneqIndex::gini;
    EstimatorKind kind = EstimatorKind::debiased;
    double theta = std::nan("");
    double level = 0.95;

    bool has_inference = false;
    double variance = std::nan("");  // asymptotic variance estimate
    double se = std::nan("");        // sqrt(variance / n)
    ConfidenceInterval ci;

    bool has_relative = false;
    double theta_rel = std::nan("");
    double se_rel = std::nan("");
    ConfidenceInterval ci_rel;

    // Centered per-row influence contributions (phi_i); joint tests on the
    // same sample combine these. Empty when no inference is attached.
    std::vector<double> influence;

    // provenance
    std::string learner;
    std::string mode;
    int K = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    double rmse = std::nan("");
    int mld_values_floored = 0;
};

namespace detail {

inline ConfidenceInterval z_interval(double theta, double se, double level) {
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    return ConfidenceInterval{theta - z * se, theta + z * se};
}

// Per-row sums over j != i of w_j * (y_i + y_j).
inline std::vector<double> per_row_sum_terms(const std::vector<double>& y, const std::vector<double>& w) {
    double w_total = 0.0, wy_total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        w_total += w[i];
        wy_total += w[i] * y[i];
    }
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        out[i] = y[i] * (w_total - w[i]) + (wy_total - w[i] * y[i]);
    return out;
}

// Attaches the pairwise-moment inference to a Gini-type ratio estimate:
//   g_i = sum_{j != i} w_j [ theta (y_i+y_j) - sgn(key_i-key_j)(y_i-y_j) ] / W_{-i}
//   Vhat = E_w[ (g_i / mean_w y)^2 ],  se = sqrt(Vhat / n)
// The stored influence vector is g centered, scaled by 1 / mean_w y.
inline void attach_gini_inference(IOpEstimate& est, const std::vector<double>& key,
                                  const std::vector<double>& y, const std::vector<double>& w,
                                  double level) {
    const std::size_t n = y.size();
    const auto signed_sums = per_row_signed_sums(key, y, w);
    const auto sum_terms = per_row_sum_terms(y, w);
    const double w_total = weight_total(w);
    const double y_mean = weighted_mean(y, w);

    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i)
        g[i] = (est.theta * sum_terms[i] - signed_sums[i]) / (w_total - w[i]);

    double vhat = 0.0, g_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vhat += w[i] * g[i] * g[i];
        g_mean += w[i] * g[i];
    }
    vhat /= w_total * y_mean * y_mean;
    g_mean /= w_total;

    est.has_inference = true;
    est.variance = vhat;
    est.se = std::sqrt(vhat / static_cast<double>(n));
    est.level = level;
    est.ci = z_interval(est.theta, est.se, level);
    est.influence.resize(n);
    for (std::size_t i = 0; i < n; ++i) est.influence[i] = (g[i] - g_mean) / y_mean;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Plug-in IOp
// ---------------------------------------------------------------------------

// Inequality index of the fitted values; no inference (the plug-in estimator
// has none). mld_floor > 0 truncates small fitted values instead of erroring.
inline IOpEstimate plugin_iop(const std::vector<double>& fv, const std::vector<double>& w,
                              IneqIndex index, double mld_floor = 0.0) {
    IOpEstimate est;
    est.index = index;
    est.kind = EstimatorKind::plugin;
    est.n = fv.size();
    if (index == IneqIndex::gini) {
        for (double v : fv)
            if (!(v > 0.0)) throw DataError("plugin gini: fitted values must be positive");
        est.theta = gini(fv, w);
    } else {
        std::vector<double> vals = fv;
        for (double& v : vals) {
            if (!(v > 0.0) || v <= mld_floor) {
                if (mld_floor > 0.0 && std::isfinite(v)) {
                    v = mld_floor;
                    ++est.mld_values_floored;
                } else {
                    throw DataError("plugin mld: fitted values must be positive");
                }
            }
        }
        est.theta = mld(vals, w);
    }
    return est;
}

// ---------------------------------------------------------------------------
// Debiased Gini IOp
// ---------------------------------------------------------------------------
//
// theta = sum_{i,j} w_i w_j sgn(gamma(x_i) - gamma(x_j)) (y_i - y_j)
//         ------------------------------------------------------------
//                     sum_{i,j} w_i w_j (y_i + y_j)
//
// with cross-fitted gamma in the numerator (per-row values in fold mode, the
// block's own model for each pair in pair-block mode) and the denominator
// over all ordered pairs including i == j. The variance plugs a single
// non-cross-fitted gamma into the per-row inner sums; callers pass the
// full-sample refit in variance_fv (fold mode falls back to the cross-fitted
// values when it is empty).
inline IOpEstimate debiased_gini_iop(const Dataset& d, const CrossFitFV& cf,
                                     const std::vector<double>& variance_fv, double level = 0.95) {
    d.validate();
    if (cf.n() != d.n()) throw ConfigError("debiased gini: cross-fit does not match the dataset");

    double numerator = 0.0;
    if (cf.mode == CrossFitMode::fold) {
        if (cf.values.size() != d.n()) throw ConfigError("debiased gini: missing fold-mode values");
        numerator = 2.0 * signed_pair_sum(cf.values, d.y, d.w);
    } else {
        if (cf.block_rows.size() != cf.blocks.blocks.size())
            throw ConfigError("debiased gini: malformed pair-block cross-fit");
        // Off-diagonal blocks cover only cross-fold pairs:
        //   pairs(A u B) - pairs(A) - pairs(B).
        for (std::size_t b = 0; b < cf.blocks.blocks.size(); ++b) {
            const auto& rows = cf.block_rows[b];
            const auto& vals = cf.block_values[b];
            const auto& block = cf.blocks.blocks[b];
            std::vector<double> yb(rows.size()), wb(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                yb[i] = d.y[rows[i]];
                wb[i] = d.w[rows[i]];
            }
            double s = signed_pair_sum(vals, yb, wb);
            if (block.k1 != block.k2) {
                const std::size_t n1 = cf.folds.rows_of[static_cast<std::size_t>(block.k1)].size();
                const auto split = [&](std::size_t lo, std::size_t hi) {
                    std::vector<double> v(vals.begin() + lo, vals.begin() + hi);
                    std::vector<double> yy(yb.begin() + lo, yb.begin() + hi);
                    std::vector<double> ww(wb.begin() + lo, wb.begin() + hi);
                    return signed_pair_sum(v, yy, ww);
                };
                s -= split(0, n1);
                s -= split(n1, rows.size());
            }
            numerator += 2.0 * s;
        }
    }

    IOpEstimate est;
    est.index = IneqIndex::gini;
    est.kind = EstimatorKind::debiased;
    est.n = d.n();
    est.learner = cf.learner;
    est.mode = to_string(cf.mode);
    est.K = cf.folds.K;
    est.seed = cf.folds.seed;
    est.theta = numerator / pair_denominator(d.y, d.w);

    const std::vector<double>* vfv = &variance_fv;
    if (variance_fv.empty()) {
        if (cf.mode != CrossFitMode::fold)
            throw ConfigError("debiased gini: pair-block mode needs explicit variance fitted values");
        vfv = &cf.values;
    } else if (variance_fv.size() != d.n()) {
        throw ConfigError("debiased gini: variance fitted values length mismatch");
    }
    detail::attach_gini_inference(est, *vfv, d.y, d.w, level);
    return est;
}

// ---------------------------------------------------------------------------
// Debiased MLD IOp
// ---------------------------------------------------------------------------

struct MldOptions {
    double floor = 1e-6;    // fitted values at or below this are rejected...
    bool truncate = false;  // ...or lifted to the floor when truncate is set
};

// theta = ln(theta1) - theta2 with theta1 the weighted mean outcome and
// theta2 the weighted mean of ln(gamma_i) + (y_i - gamma_i) / gamma_i over
// cross-fitted per-row values; fold mode only.
inline IOpEstimate debiased_mld_iop(const Dataset& d, const CrossFitFV& cf, double level = 0.95,
                                    MldOptions opt = {}) {
    d.validate();
    if (cf.mode != CrossFitMode::fold)
        throw ConfigError("debiased mld: needs fold-mode cross-fitted values");
    if (cf.values.size() != d.n()) throw ConfigError("debiased mld: cross-fit does not match the dataset");

    IOpEstimate est;
    est.index = IneqIndex::mld;
    est.kind = EstimatorKind::debiased;
    est.n = d.n();
    est.learner = cf.learner;
    est.mode = to_string(cf.mode);
    est.K = cf.folds.K;
    est.seed = cf.folds.seed;

    std::vector<double> gamma = cf.values;
    std::string offenders;
    int n_bad = 0;
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (gamma[i] <= opt.floor) {
            if (opt.truncate) {
                gamma[i] = opt.floor;
                ++est.mld_values_floored;
            } else {
                ++n_bad;
                if (n_bad <= 5) offenders += (offenders.empty() ? "" : ", ") + std::to_string(d.ids[i]);
            }
        }
    }
    if (n_bad > 0)
        throw DataError("debiased mld: " + std::to_string(n_bad) +
                        " fitted value(s) at or below the floor (row ids " + offenders + ")");

    const double w_total = weight_total(d.w);
    const double theta1 = weighted_mean(d.y, d.w);
    double theta2 = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i)
        theta2 += d.w[i] * (std::log(gamma[i]) + (d.y[i] - gamma[i]) / gamma[i]);
    theta2 /= w_total;
    est.theta = std::log(theta1) - theta2;

    // V = Var[y]/theta1^2 + Var[psi] - 2 Cov[y, psi]/theta1 = Var[y/theta1 - psi],
    // computed as the variance of the combined contribution so it is a sum of
    // squares and cannot go negative.
    std::vector<double> phi(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double psi = std::log(gamma[i]) - theta2 + (d.y[i] - gamma[i]) / gamma[i];
        phi[i] = (d.y[i] - theta1) / theta1 - psi;
    }
    const double phi_mean = weighted_mean(phi, d.w);
    double vhat = 0.0;
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double c = phi[i] - phi_mean;
        vhat += d.w[i] * c * c;
    }
    vhat /= w_total;

    est.has_inference = true;
    est.variance = vhat;
    est.se = std::sqrt(vhat / static_cast<double>(d.n()));
    est.level = level;
    est.ci = detail::z_interval(est.theta, est.se, level);
    est.influence.resize(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) est.influence[i] = phi[i] - phi_mean;
    return est;
}

// ---------------------------------------------------------------------------
// Relative IOp
// ---------------------------------------------------------------------------

// Centered influence contributions of the unconditional inequality index of y.
inline std::vector<double> unconditional_influence(const Dataset& d, IneqIndex index) {
    const std::size_t n = d.n();
    const double w_total = weight_total(d.w);
    const double y_mean = weighted_mean(d.y, d.w);
    std::vector<double> phi(n);
    if (index == IneqIndex::gini) {
        const double gi = gini(d.y, d.w);
        const auto abs_sums = per_row_signed_sums(d.y, d.y, d.w);  // sgn(y_i-y_j)(y_i-y_j) = |y_i-y_j|
        const auto sum_terms = detail::per_row_sum_terms(d.y, d.w);
        for (std::size_t i = 0; i < n; ++i)
            phi[i] = (gi * sum_terms[i] - abs_sums[i]) / ((w_total - d.w[i]) * y_mean);
    } else {
        std::vector<double> logs(n);
        for (std::size_t i = 0; i < n; ++i) logs[i] = std::log(d.y[i]);
        const double log_mean = weighted_mean(logs, d.w);
        for (std::size_t i = 0; i < n; ++i)
            phi[i] = (d.y[i] - y_mean) / y_mean - (logs[i] - log_mean);
    }
    const double m = weighted_mean(phi, d.w);
    for (double& v : phi) v -= m;
    return phi;
}

// theta_rel = theta / I with I the unconditional index of y on the same
// sample; the delta-method variance combines the two influence vectors.
inline IOpEstimate relative_iop(IOpEstimate est, const Dataset& d) {
    if (est.n != d.n()) throw ConfigError("relative: estimate and dataset sizes differ");
    const double uncond = est.index == IneqIndex::gini ? gini(d.y, d.w) : mld(d.y, d.w);
    if (!(uncond > 0.0)) throw DataError("relative: unconditional inequality is zero (degenerate outcome)");

    est.has_relative = true;
    est.theta_rel = est.theta / uncond;
    if (!est.has_inference || est.influence.size() != d.n()) return est;  // point estimate only

    const auto phi_uncond = unconditional_influence(d, est.index);
    std::vector<double> r(d.n());
    for (std::size_t i = 0; i < d.n(); ++i)
        r[i] = est.influence[i] / uncond - (est.theta / (uncond * uncond)) * phi_uncond[i];
    const double r_mean = weighted_mean(r, d.w);
    double var_rel = 0.0;
    const double w_total = weight_total(d.w);
    for (std::size_t i = 0; i < d.n(); ++i) {
        const double c = r[i] - r_mean;
        var_rel += d.w[i] * c * c;
    }
    var_rel /= w_total;

    est.se_rel = std::sqrt(var_rel / static_cast<double>(d.n()));
    est.ci_rel = detail::z_interval(est.theta_rel, est.se_rel, est.level);
    return est;
}

}  // namespace ineqop
