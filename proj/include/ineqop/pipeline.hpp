#pragma once

#include <optional>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/crossfit.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/iop.hpp"
#include "ineqop/learners.hpp"

namespace ineqop {

struct EstimationConfig {
    std::vector<LearnerSpec> learners{LearnerSpec::forest()};
    int K = 5;
    std::uint64_t seed = 1;
    // Pair-block cross-fitting is the default: per-row fold models evaluate
    // the two sides of a pair under different models, which breaks exact ties
    // with noise that is correlated with the outcome difference and biases
    // the sign-weighted sum downward (observable on categorical data, where
    // tied conditional means are the norm). Pair blocks evaluate both rows of
    // every pair under one model trained outside both folds, so true ties
    // stay exact ties. Fold mode remains available as the cheap variant.
    CrossFitMode mode = CrossFitMode::pair_block;
    double level = 0.95;
    EncodeConfig encode;
    bool relative = true;
    MldOptions mld;

    void validate() const {
        if (learners.empty()) throw ConfigError("estimation: need at least one learner");
        for (const auto& s : learners) s.validate();
        if (K < 2) throw ConfigError("estimation: K must be >= 2");
        if (!(level > 0.0 && level < 1.0)) throw ConfigError("estimation: confidence level must lie in (0,1)");
        encode.validate();
    }
};

struct IndexEstimates {
    double unconditional = std::nan("");  // inequality of the outcome itself
    IOpEstimate plugin;
    IOpEstimate debiased;
};

struct EstimateRun {
    FoldAssignment folds;
    SelectionResult selection;
    LearnerSpec chosen;
    std::vector<double> fv_full;  // full-sample refit fitted values
    CrossFitFV cf;                // requested mode
    std::optional<IndexEstimates> gini_est;
    std::optional<IndexEstimates> mld_est;
    std::size_t n = 0;
    double mean_y = std::nan("");
};

namespace detail {

inline bool uses_design(const std::vector<LearnerSpec>& specs) {
    for (const auto& s : specs)
        if (s.kind == LearnerKind::ridge || s.kind == LearnerKind::lasso) return true;
    return false;
}

}  // namespace detail

// Full estimation pass over one dataset with a fixed fold assignment:
// pick the learner with the lowest cross-validated first-stage RMSE, produce
// cross-fitted and full-sample fitted values, then the plug-in and debiased
// estimates (plus relative shares) for the requested indices.
inline EstimateRun run_estimate_with_folds(const Dataset& d, const EstimationConfig& cfg,
                                           bool want_gini, bool want_mld,
                                           const FoldAssignment& folds) {
    cfg.validate();
    d.validate();
    if (!want_gini && !want_mld) throw ConfigError("estimation: no index requested");

    EstimateRun run;
    run.folds = folds;
    run.n = d.n();
    run.mean_y = weighted_mean(d.y, d.w);

    FeatureView view(d, cfg.encode);
    if (view.has_circumstances() && detail::uses_design(cfg.learners)) view.design();  // build once

    run.selection = select_best(cfg.learners, view, folds);
    run.chosen = cfg.learners[run.selection.best];

    // Fold-mode values for the chosen learner are exactly its CV predictions.
    CrossFitFV cf_fold;
    cf_fold.mode = CrossFitMode::fold;
    cf_fold.folds = folds;
    cf_fold.learner = run.chosen.name();
    cf_fold.values = run.selection.cv_values[run.selection.best];
    if (!view.has_circumstances()) cf_fold.values.assign(d.n(), run.mean_y);

    if (cfg.mode == CrossFitMode::pair_block) {
        run.cf = crossfit_fitted_values(view, run.chosen, folds, CrossFitMode::pair_block);
    } else {
        run.cf = cf_fold;
    }

    std::vector<std::size_t> all_rows(d.n());
    for (std::size_t i = 0; i < all_rows.size(); ++i) all_rows[i] = i;
    const FittedModel full_model = fit_model(run.chosen, view, all_rows);
    run.fv_full = full_model.predict(view, all_rows);
    if (!view.has_circumstances()) run.fv_full.assign(d.n(), run.mean_y);

    const double rmse = run.selection.rmse[run.selection.best];
    auto finish = [&](IOpEstimate est) {
        est.rmse = rmse;
        if (cfg.relative) est = relative_iop(std::move(est), d);
        return est;
    };
    auto fill_plugin_meta = [&](IOpEstimate& est) {
        est.learner = run.chosen.name();
        est.mode = "none";
        est.K = folds.K;
        est.seed = folds.seed;
        est.rmse = rmse;
    };

    if (want_gini) {
        IndexEstimates ie;
        ie.unconditional = gini(d.y, d.w);
        ie.plugin = finish(plugin_iop(run.fv_full, d.w, IneqIndex::gini));
        fill_plugin_meta(ie.plugin);
        ie.debiased = finish(debiased_gini_iop(d, run.cf, run.fv_full, cfg.level));
        run.gini_est = std::move(ie);
    }
    if (want_mld) {
        IndexEstimates ie;
        ie.unconditional = mld(d.y, d.w);
        ie.plugin = finish(plugin_iop(run.fv_full, d.w, IneqIndex::mld,
                                      cfg.mld.truncate ? cfg.mld.floor : 0.0));
        fill_plugin_meta(ie.plugin);
        ie.debiased = finish(debiased_mld_iop(d, cf_fold, cfg.level, cfg.mld));
        run.mld_est = std::move(ie);
    }
    return run;
}

inline EstimateRun run_estimate(const Dataset& d, const EstimationConfig& cfg, bool want_gini = true,
                                bool want_mld = false) {
    cfg.validate();
    return run_estimate_with_folds(d, cfg, want_gini, want_mld, make_folds(d.n(), cfg.K, cfg.seed));
}

}  // namespace ineqop
