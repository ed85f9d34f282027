#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/design.hpp"
#include "ineqop/folds.hpp"
#include "ineqop/linear.hpp"
#include "ineqop/tree.hpp"

namespace ineqop {

enum class LearnerKind { ridge, lasso, forest, gbt };

inline const char* to_string(LearnerKind k) {
    switch (k) {
        case LearnerKind::ridge: return "ridge";
        case LearnerKind::lasso: return "lasso";
        case LearnerKind::forest: return "forest";
        case LearnerKind::gbt: return "gbt";
    }
    return "?";
}

inline LearnerKind learner_kind_from(const std::string& s) {
    if (s == "ridge") return LearnerKind::ridge;
    if (s == "lasso") return LearnerKind::lasso;
    if (s == "forest") return LearnerKind::forest;
    if (s == "gbt") return LearnerKind::gbt;
    throw ConfigError("unknown learner kind '" + s + "'");
}

// First-stage learner configuration. Linear learners (ridge, lasso) consume
// the dummy-encoded design matrix; tree learners (forest, gbt) consume the
// raw categorical columns.
struct LearnerSpec {
    LearnerKind kind = LearnerKind::forest;

    // ridge / lasso: penalty; negative means tune on the internal CV grid
    double lambda = -1.0;

    // forest
    int trees = 500;
    int max_depth = 0;   // 0 = unlimited
    int min_leaf = 5;
    int mtry = 0;        // 0 = sqrt(#circumstances)
    bool bootstrap = true;

    // gbt
    int rounds = 300;
    double learning_rate = 0.1;
    int depth = 3;

    std::uint64_t seed = 0;
    int threads = 1;

    static LearnerSpec ridge(double lam = -1.0) {
        LearnerSpec s;
        s.kind = LearnerKind::ridge;
        s.lambda = lam;
        return s;
    }
    static LearnerSpec lasso(double lam = -1.0) {
        LearnerSpec s;
        s.kind = LearnerKind::lasso;
        s.lambda = lam;
        return s;
    }
    static LearnerSpec forest(int trees = 500) {
        LearnerSpec s;
        s.kind = LearnerKind::forest;
        s.trees = trees;
        return s;
    }
    static LearnerSpec gbt(int rounds = 300, double rate = 0.1, int tree_depth = 3) {
        LearnerSpec s;
        s.kind = LearnerKind::gbt;
        s.rounds = rounds;
        s.learning_rate = rate;
        s.depth = tree_depth;
        return s;
    }

    void validate() const {
        switch (kind) {
            case LearnerKind::ridge:
            case LearnerKind::lasso:
                break;  // negative lambda = tune
            case LearnerKind::forest:
                if (trees < 1) throw ConfigError("forest: trees must be >= 1");
                if (max_depth < 0) throw ConfigError("forest: max_depth must be >= 0");
                if (min_leaf < 1) throw ConfigError("forest: min_leaf must be >= 1");
                break;
            case LearnerKind::gbt:
                if (rounds < 0) throw ConfigError("gbt: rounds must be >= 0");
                if (!(learning_rate > 0.0 && learning_rate <= 1.0))
                    throw ConfigError("gbt: learning rate must lie in (0,1]");
                if (depth < 1) throw ConfigError("gbt: depth must be >= 1");
                break;
        }
    }

    std::string name() const {
        std::string s = to_string(kind);
        switch (kind) {
            case LearnerKind::ridge:
            case LearnerKind::lasso:
                s += lambda < 0.0 ? "(lambda=cv)" : "(lambda=" + format_double(lambda) + ")";
                break;
            case LearnerKind::forest:
                s += "(trees=" + std::to_string(trees) + ")";
                break;
            case LearnerKind::gbt:
                s += "(rounds=" + std::to_string(rounds) + ",rate=" + format_double(learning_rate) +
                     ",depth=" + std::to_string(depth) + ")";
                break;
        }
        return s;
    }
};

// A dataset plus its (lazily built, cached) design matrix. The design only
// depends on the circumstances, so one dictionary is shared across folds and
// every model sees identical columns.
class FeatureView {
  public:
    explicit FeatureView(const Dataset& d, EncodeConfig enc = {})
        : data_(&d), encode_(enc), lazy_(std::make_shared<Lazy>()) {}

    const Dataset& data() const { return *data_; }
    const EncodeConfig& encode_config() const { return encode_; }
    bool has_circumstances() const { return !data_->x.empty(); }

    const DesignMatrix& design() const {
        std::call_once(lazy_->built, [&] { lazy_->dm = encode_design(*data_, encode_); });
        return lazy_->dm;
    }

  private:
    struct Lazy {
        std::once_flag built;
        DesignMatrix dm;
    };
    const Dataset* data_;
    EncodeConfig encode_;
    std::shared_ptr<Lazy> lazy_;
};

// Fallback when no circumstances remain: the conditional mean collapses to a
// constant.
struct ConstantModel {
    double value = 0.0;
};

struct FittedModel {
    LearnerSpec spec;
    std::vector<std::string> columns;  // circumstance names at training time
    std::variant<ConstantModel, LinearModel, ForestModel, GbtModel> fit;

    std::vector<double> predict(const FeatureView& view, const std::vector<std::size_t>& rows) const {
        if (view.data().circumstance_names() != columns)
            throw DataError("predict: circumstance columns differ from the training columns");
        std::vector<double> out;
        if (const auto* c = std::get_if<ConstantModel>(&fit)) {
            out.assign(rows.size(), c->value);
        } else if (const auto* m = std::get_if<LinearModel>(&fit)) {
            out = predict_linear(*m, view.design(), rows);
        } else if (const auto* f = std::get_if<ForestModel>(&fit)) {
            out.reserve(rows.size());
            for (auto r : rows) out.push_back(f->predict_row(view.data(), r));
        } else {
            const auto& g = std::get<GbtModel>(fit);
            out.reserve(rows.size());
            for (auto r : rows) out.push_back(g.predict_row(view.data(), r));
        }
        for (double v : out)
            if (!std::isfinite(v)) throw NumericError("predict: non-finite fitted value");
        return out;
    }

    std::vector<double> predict_all(const FeatureView& view) const {
        std::vector<std::size_t> rows(view.data().n());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return predict(view, rows);
    }
};

inline FittedModel fit_model(const LearnerSpec& spec, const FeatureView& view,
                             const std::vector<std::size_t>& train_rows) {
    spec.validate();
    if (train_rows.empty()) throw DataError("fit: empty training set");
    const Dataset& d = view.data();

    FittedModel model;
    model.spec = spec;
    model.columns = d.circumstance_names();

    if (!view.has_circumstances()) {
        double sw = 0.0, swy = 0.0;
        for (auto r : train_rows) {
            sw += d.w[r];
            swy += d.w[r] * d.y[r];
        }
        model.fit = ConstantModel{swy / sw};
        return model;
    }

    switch (spec.kind) {
        case LearnerKind::ridge:
            model.fit = fit_linear(false, spec.lambda, view.design(), train_rows, d.y, d.w, spec.seed);
            break;
        case LearnerKind::lasso:
            model.fit = fit_linear(true, spec.lambda, view.design(), train_rows, d.y, d.w, spec.seed);
            break;
        case LearnerKind::forest: {
            ForestConfig cfg;
            cfg.trees = spec.trees;
            cfg.tree.max_depth = spec.max_depth;
            cfg.tree.min_leaf = spec.min_leaf;
            cfg.tree.mtry = spec.mtry > 0
                                ? spec.mtry
                                : static_cast<int>(std::lround(std::sqrt(static_cast<double>(d.x.size()))));
            cfg.bootstrap = spec.bootstrap;
            cfg.seed = spec.seed;
            cfg.threads = spec.threads;
            model.fit = fit_forest(d, d.y, d.w, train_rows, cfg);
            break;
        }
        case LearnerKind::gbt: {
            GbtConfig cfg;
            cfg.rounds = spec.rounds;
            cfg.learning_rate = spec.learning_rate;
            cfg.tree.max_depth = spec.depth;
            cfg.tree.min_leaf = spec.min_leaf;
            cfg.tree.mtry = spec.mtry;  // gbt uses all features unless told otherwise
            cfg.seed = spec.seed;
            model.fit = fit_gbt(d, d.y, d.w, train_rows, cfg);
            break;
        }
    }
    return model;
}

// Per-row out-of-fold fitted values: row i is predicted by the model trained
// on the complement of its fold, with the learner reseeded per fold.
inline std::vector<double> fold_fit_values(const FeatureView& view, const LearnerSpec& spec,
                                           const FoldAssignment& folds) {
    const std::size_t n = view.data().n();
    if (folds.n() != n) throw ConfigError("cross-fit: fold assignment does not match the dataset");
    std::vector<double> values(n, 0.0);
    for (int k = 0; k < folds.K; ++k) {
        LearnerSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(k) + 1);
        try {
            const FittedModel m = fit_model(fold_spec, view, folds.complement(k));
            const auto preds = m.predict(view, folds.rows_of[static_cast<std::size_t>(k)]);
            for (std::size_t j = 0; j < preds.size(); ++j)
                values[folds.rows_of[static_cast<std::size_t>(k)][j]] = preds[j];
        } catch (const std::exception& e) {
            throw NumericError("cross-fit fold " + std::to_string(k + 1) + ": " + e.what());
        }
    }
    return values;
}

// Cross-validated weighted first-stage RMSE for every spec, argmin winner.
struct SelectionResult {
    std::size_t best = 0;
    std::vector<double> rmse;                     // NaN for failed specs
    std::vector<std::string> failures;            // empty string when the fit succeeded
    std::vector<std::vector<double>> cv_values;   // out-of-fold predictions per spec
};

inline SelectionResult select_best(const std::vector<LearnerSpec>& specs, const FeatureView& view,
                                   const FoldAssignment& folds) {
    if (specs.empty()) throw ConfigError("select_best: need at least one learner spec");
    const Dataset& d = view.data();
    SelectionResult res;
    res.rmse.assign(specs.size(), std::nan(""));
    res.failures.assign(specs.size(), "");
    res.cv_values.resize(specs.size());

    bool any_ok = false;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        try {
            auto values = fold_fit_values(view, specs[s], folds);
            double se = 0.0, sw = 0.0;
            for (std::size_t i = 0; i < d.n(); ++i) {
                const double e = d.y[i] - values[i];
                se += d.w[i] * e * e;
                sw += d.w[i];
            }
            res.rmse[s] = std::sqrt(se / sw);
            res.cv_values[s] = std::move(values);
            if (!any_ok || res.rmse[s] < res.rmse[res.best]) res.best = s;
            any_ok = true;
        } catch (const std::exception& e) {
            res.failures[s] = e.what();
        }
    }
    if (!any_ok) throw NumericError("select_best: every learner failed to fit");
    return res;
}

}  // namespace ineqop
