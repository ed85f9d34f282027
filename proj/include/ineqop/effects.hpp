#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/iop.hpp"
#include "ineqop/pipeline.hpp"

namespace ineqop {

struct TestResult {
    std::string description;
    double statistic = std::nan("");
    double se = std::nan("");
    double z = std::nan("");
    double p_value = std::nan("");       // two-sided normal
    double p_permutation = std::nan("");  // set when a permutation null was run
    int permutations = 0;
};

namespace detail {

inline TestResult make_test(std::string description, double statistic, double se) {
    TestResult t;
    t.description = std::move(description);
    t.statistic = statistic;
    t.se = se;
    if (se > 0.0) {
        t.z = statistic / se;
        t.p_value = two_sided_p(t.z);
    } else {
        // Degenerate spread: identical estimates carry no evidence against
        // equality, anything else is infinitely significant.
        t.z = statistic == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        t.p_value = statistic == 0.0 ? 1.0 : 0.0;
    }
    return t;
}

}  // namespace detail

// Two-sample z test for equal IOp across independent populations:
// se(d) = sqrt(se_A^2 + se_B^2).
inline TestResult compare_iop(const IOpEstimate& a, const IOpEstimate& b) {
    if (a.index != b.index) throw ConfigError("compare: estimates use different inequality indices");
    if (!a.has_inference || !b.has_inference)
        throw ConfigError("compare: both estimates need standard errors (debiased estimates)");
    const double diff = a.theta - b.theta;
    const double se = std::sqrt(a.se * a.se + b.se * b.se);
    return detail::make_test("IOp difference A - B (" + std::string(to_string(a.index)) + ")", diff, se);
}

struct PartialEffect {
    std::string circumstances;  // dropped set, comma-joined
    IneqIndex index = IneqIndex::gini;
    double kappa = std::nan("");
    double se = std::nan("");
    ConfidenceInterval ci;
    double p_value = std::nan("");
    double kappa_rel = std::nan("");
    double se_rel = std::nan("");
    ConfidenceInterval ci_rel;
    IOpEstimate full;
    IOpEstimate reduced;
};

namespace detail {

struct GroupRuns {
    FoldAssignment folds;
    LearnerSpec chosen;
    IOpEstimate full;
    IOpEstimate reduced;
};

inline GroupRuns run_group(const Dataset& d, const std::vector<std::string>& drop,
                           const EstimationConfig& cfg, IneqIndex index) {
    if (drop.empty()) throw ConfigError("effect: empty circumstance set");
    for (const auto& name : drop)
        if (!d.find_column(name)) throw DataError("effect: no circumstance named '" + name + "'");
    cfg.validate();

    GroupRuns runs;
    runs.folds = make_folds(d.n(), cfg.K, cfg.seed);
    const bool want_gini = index == IneqIndex::gini;
    const EstimateRun full_run = run_estimate_with_folds(d, cfg, want_gini, !want_gini, runs.folds);
    runs.chosen = full_run.chosen;

    // The reduced estimate reuses the learner the full set selected, so the
    // comparison never mixes first stages.
    EstimationConfig reduced_cfg = cfg;
    reduced_cfg.learners = {runs.chosen};
    const EstimateRun reduced_run = run_estimate_with_folds(d.drop_columns(drop), reduced_cfg,
                                                            want_gini, !want_gini, runs.folds);
    runs.full = want_gini ? full_run.gini_est->debiased : full_run.mld_est->debiased;
    runs.reduced = want_gini ? reduced_run.gini_est->debiased : reduced_run.mld_est->debiased;
    return runs;
}

// Copy of the dataset with the named columns' values permuted by one shared
// row permutation; everything else stays put.
inline Dataset permute_columns(const Dataset& d, const std::vector<std::string>& names,
                               std::uint64_t seed) {
    Dataset out = d;
    std::vector<std::size_t> perm(d.n());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    for (auto& col : out.x) {
        if (std::find(names.begin(), names.end(), col.name) == names.end()) continue;
        const auto& src = d.find_column(col.name)->codes;
        for (std::size_t i = 0; i < perm.size(); ++i) col.codes[i] = src[perm[i]];
    }
    return out;
}

}  // namespace detail

// Effect of removing a set of circumstances: kappa = theta - theta_{-U},
// both estimated on the same sample with the same fold assignment. The two
// estimates share every observation, so the standard error comes from the
// variance of the per-row influence differences, not from the independent-
// sample formula.
inline PartialEffect group_effect(const Dataset& d, const std::vector<std::string>& drop,
                                  const EstimationConfig& cfg, IneqIndex index) {
    const detail::GroupRuns runs = detail::run_group(d, drop, cfg, index);
    const IOpEstimate& full = runs.full;
    const IOpEstimate& reduced = runs.reduced;

    PartialEffect pe;
    pe.index = index;
    std::string joined;
    for (const auto& name : drop) joined += (joined.empty() ? "" : ",") + name;
    pe.circumstances = joined;
    pe.full = full;
    pe.reduced = reduced;
    pe.kappa = full.theta - reduced.theta;

    const std::size_t n = d.n();
    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = full.influence[i] - reduced.influence[i];
    const double var_diff = weighted_var(diff, d.w);
    pe.se = std::sqrt(var_diff / static_cast<double>(n));
    pe.ci = detail::z_interval(pe.kappa, pe.se, cfg.level);
    pe.p_value = detail::make_test("", pe.kappa, pe.se).p_value;

    if (full.theta == 0.0) throw DataError("effect: IOp estimate is zero, relative effect undefined");

    // kappa_rel = kappa / theta = 1 - theta_r / theta; delta method on
    // (theta, theta_r) with the shared-sample covariance.
    pe.kappa_rel = pe.kappa / full.theta;
    const double t = full.theta, tr = reduced.theta;
    std::vector<double> rphi(n);
    for (std::size_t i = 0; i < n; ++i)
        rphi[i] = (tr / (t * t)) * full.influence[i] - (1.0 / t) * reduced.influence[i];
    pe.se_rel = std::sqrt(weighted_var(rphi, d.w) / static_cast<double>(n));
    pe.ci_rel = detail::z_interval(pe.kappa_rel, pe.se_rel, cfg.level);
    return pe;
}

inline PartialEffect partial_effect(const Dataset& d, const std::string& circumstance,
                                    const EstimationConfig& cfg, IneqIndex index) {
    return group_effect(d, {circumstance}, cfg, index);
}

// Significance test for a group of circumstances: theta with all of them
// against theta without the group. Dropping every circumstance reduces the
// second estimate to exactly zero, so the full set tests theta against 0.
//
// Besides the normal z test, a permutation null is available: the tested
// columns are jointly permuted across rows and the full estimate is redone
// with the same folds and learner, giving the exact distribution of kappa
// when the group is independent of the outcome and the other circumstances.
// The z test's null here is first-order degenerate (both estimates share the
// same influence function when the group carries no signal), so its size is
// driven by second-order terms; the permutation p-value is the calibrated
// one and is what the test suite relies on.
inline TestResult group_test(const Dataset& d, const std::vector<std::string>& group,
                             const EstimationConfig& cfg, IneqIndex index, int permutations = 0,
                             int threads = 1) {
    const detail::GroupRuns runs = detail::run_group(d, group, cfg, index);
    const double kappa = runs.full.theta - runs.reduced.theta;

    std::vector<double> diff(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) diff[i] = runs.full.influence[i] - runs.reduced.influence[i];
    const double se = std::sqrt(weighted_var(diff, d.w) / static_cast<double>(d.n()));

    std::string joined;
    for (const auto& name : group) joined += (joined.empty() ? "" : ",") + name;
    TestResult t = detail::make_test(
        "group significance of {" + joined + "} (" + std::string(to_string(index)) + ")", kappa, se);

    if (permutations > 0) {
        const bool want_gini = index == IneqIndex::gini;
        EstimationConfig single = cfg;
        single.learners = {runs.chosen};
        single.relative = false;
        std::vector<int> geq(static_cast<std::size_t>(permutations), 0);
        parallel_for(static_cast<std::size_t>(permutations), threads, [&](std::size_t b) {
            const Dataset pd = detail::permute_columns(d, group, derive_seed(cfg.seed, 0x9e90 + b));
            const EstimateRun run =
                run_estimate_with_folds(pd, single, want_gini, !want_gini, runs.folds);
            const double k_star =
                (want_gini ? run.gini_est->debiased.theta : run.mld_est->debiased.theta) -
                runs.reduced.theta;
            geq[b] = std::fabs(k_star) >= std::fabs(kappa) ? 1 : 0;
        });
        int count = 0;
        for (int v : geq) count += v;
        t.permutations = permutations;
        t.p_permutation = (1.0 + count) / (permutations + 1.0);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Intergenerational persistence
// ---------------------------------------------------------------------------

// Weighted least-squares slope of the outcome on an ordered categorical
// level (0,1,2,...), heteroskedasticity-robust standard error. If
// level_order is empty the column's labels must parse as numbers.
inline TestResult mobility_slope(const Dataset& d, const std::string& parent_col,
                                 const std::vector<std::string>& level_order = {}) {
    const CategoricalColumn* col = d.find_column(parent_col);
    if (!col) throw DataError("mobility: no circumstance named '" + parent_col + "'");

    std::vector<double> level_of(col->labels.size());
    if (level_order.empty()) {
        for (std::size_t c = 0; c < col->labels.size(); ++c) {
            bool ok = false;
            level_of[c] = parse_double(col->labels[c], ok);
            if (!ok)
                throw DataError("mobility: label '" + col->labels[c] +
                                "' is not numeric; pass the ordered level labels");
        }
    } else {
        for (std::size_t c = 0; c < col->labels.size(); ++c) {
            auto it = std::find(level_order.begin(), level_order.end(), col->labels[c]);
            if (it == level_order.end())
                throw DataError("mobility: label '" + col->labels[c] + "' missing from the level order");
            level_of[c] = static_cast<double>(it - level_order.begin());
        }
    }

    const std::size_t n = d.n();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = level_of[static_cast<std::size_t>(col->codes[i])];

    double w_total = 0.0, wx = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w_total += d.w[i];
        wx += d.w[i] * x[i];
        wy += d.w[i] * d.y[i];
    }
    const double x_mean = wx / w_total, y_mean = wy / w_total;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xc = x[i] - x_mean;
        sxx += d.w[i] * xc * xc;
        sxy += d.w[i] * xc * (d.y[i] - y_mean);
    }
    if (!(sxx > 0.0)) throw DataError("mobility: column '" + parent_col + "' has a single level");

    const double slope = sxy / sxx;
    const double intercept = y_mean - slope * x_mean;
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = d.y[i] - intercept - slope * x[i];
        const double xc = x[i] - x_mean;
        meat += d.w[i] * d.w[i] * xc * xc * e * e;
    }
    const double se = std::sqrt(meat) / sxx;
    return detail::make_test("persistence slope of outcome on " + parent_col, slope, se);
}

}  // namespace ineqop
