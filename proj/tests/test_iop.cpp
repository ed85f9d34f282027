#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "ineqop/iop.hpp"
#include "ineqop/pipeline.hpp"
#include "ineqop/sim.hpp"
#include "oracles.hpp"

using namespace ineqop;

namespace {

Dataset plain_dataset(std::vector<double> y, std::vector<double> w = {}) {
    Dataset d;
    d.y = std::move(y);
    d.w = w.empty() ? std::vector<double>(d.y.size(), 1.0) : std::move(w);
    for (std::size_t i = 0; i < d.y.size(); ++i) d.ids.push_back(static_cast<std::int64_t>(i + 1));
    CategoricalColumn col;
    col.name = "g";
    col.labels = {"a", "b"};
    for (std::size_t i = 0; i < d.y.size(); ++i) col.codes.push_back(static_cast<std::int32_t>(i % 2));
    d.x.push_back(std::move(col));
    return d;
}

DGPSpec five_cell_dgp() {
    DGPSpec spec;
    spec.circumstances = {"origin"};
    const double means[5] = {7.0, 10.0, 13.0, 15.0, 18.0};
    for (int c = 0; c < 5; ++c)
        spec.cells.push_back({{"c" + std::to_string(c)}, 0.2, means[c]});
    spec.noise_delta = 2.0;
    spec.seed = 20240811;
    return spec;
}

}  // namespace

TEST_CASE("plugin iop on constant fitted values is zero") {
    const auto d = plain_dataset({4.0, 5.0, 6.0, 7.0});
    const std::vector<double> fv(4, 5.5);
    CHECK(plugin_iop(fv, d.w, IneqIndex::gini).theta == 0.0);
    CHECK(plugin_iop(fv, d.w, IneqIndex::mld).theta == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("plugin iop with fv equal to y reproduces the unconditional index") {
    const auto d = plain_dataset({1.0, 2.0, 3.0, 4.0});
    CHECK(plugin_iop(d.y, d.w, IneqIndex::gini).theta == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(plugin_iop(d.y, d.w, IneqIndex::mld).theta == Catch::Approx(mld(d.y, d.w)));
}

TEST_CASE("plugin mld floors or rejects nonpositive fitted values") {
    const auto d = plain_dataset({1.0, 2.0, 3.0, 4.0});
    const std::vector<double> fv{1.0, 2.0, -0.5, 4.0};
    CHECK_THROWS_AS(plugin_iop(fv, d.w, IneqIndex::mld), DataError);
    const auto floored = plugin_iop(fv, d.w, IneqIndex::mld, 1e-6);
    CHECK(floored.mld_values_floored == 1);
    CHECK(std::isfinite(floored.theta));
}

TEST_CASE("debiased gini on hand fixtures") {
    const auto d = plain_dataset({1.0, 2.0, 3.0, 4.0});

    // gamma = y: 20 / 80
    auto cf = injected_fitted_values(d, {1.0, 2.0, 3.0, 4.0});
    auto est = debiased_gini_iop(d, cf, {});
    CHECK(est.theta == Catch::Approx(0.25).epsilon(1e-14));

    // gamma swaps the first two ranks: 16 / 80
    cf = injected_fitted_values(d, {2.0, 1.0, 3.0, 4.0});
    est = debiased_gini_iop(d, cf, {});
    CHECK(est.theta == Catch::Approx(0.20).epsilon(1e-14));

    // constant gamma: all signs zero
    cf = injected_fitted_values(d, {3.0, 3.0, 3.0, 3.0});
    est = debiased_gini_iop(d, cf, {});
    CHECK(est.theta == 0.0);
    CHECK(est.se == 0.0);
}

TEST_CASE("debiased gini equals the naive double-sum is exercised with ties and weights") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> val(0.5, 12.0);
    std::uniform_real_distribution<double> wgt(0.5, 3.0);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 3 + static_cast<std::size_t>(rng() % 60);
        std::vector<double> y(n), w(n), fv(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = val(rng);
            w[i] = wgt(rng);
            fv[i] = val(rng);
        }
        for (std::size_t i = 1; i < n; i += 3) fv[i] = fv[i - 1];  // ties
        auto d = plain_dataset(y, w);
        const auto est = debiased_gini_iop(d, injected_fitted_values(d, fv), {});
        const double naive = oracles::naive_signed_double_sum(fv, y, w) /
                             oracles::naive_pair_denominator(y, w);
        CHECK(est.theta == Catch::Approx(naive).margin(1e-12));
    }
}

TEST_CASE("unweighted gini variance matches the published formula written literally") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> val(1.0, 9.0);
    const std::size_t n = 25;
    std::vector<double> y(n), fv(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = val(rng);
        fv[i] = val(rng);
    }
    auto d = plain_dataset(y);
    const auto est = debiased_gini_iop(d, injected_fitted_values(d, fv), {});

    double outer = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            inner += est.theta * (y[i] + y[j]) - oracles::sgn(fv[i] - fv[j]) * (y[i] - y[j]);
        }
        outer += inner * inner;
    }
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);
    const double vhat = outer / (static_cast<double>(n) * (n - 1.0) * (n - 1.0)) / (y_mean * y_mean);
    CHECK(est.variance == Catch::Approx(vhat).epsilon(1e-10));
    CHECK(est.se == Catch::Approx(std::sqrt(vhat / static_cast<double>(n))).epsilon(1e-10));
}

TEST_CASE("pair-block estimate matches the brute-force block walk") {
    const auto spec = five_cell_dgp();
    const auto d = gen_dgp(spec, 60, 5);
    FeatureView view(d);
    const auto folds = make_folds(d.n(), 4, 11);
    const auto cf = crossfit_fitted_values(view, LearnerSpec::forest(10), folds, CrossFitMode::pair_block);
    std::vector<double> fv_full(d.n(), 0.0);
    {
        std::vector<std::size_t> rows(d.n());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        fv_full = fit_model(LearnerSpec::forest(10), view, rows).predict_all(view);
    }
    const auto est = debiased_gini_iop(d, cf, fv_full);
    CHECK(est.theta == Catch::Approx(oracles::naive_pairblock_gini(d, cf)).margin(1e-12));
}

TEST_CASE("fold and pair-block debiased gini agree within sampling noise") {
    const auto spec = five_cell_dgp();
    const auto d = gen_dgp(spec, 600, 9);
    EstimationConfig cfg;
    cfg.learners = {LearnerSpec::forest(40)};
    cfg.K = 5;
    cfg.seed = 3;
    const auto fold_run = run_estimate(d, cfg, true, false);
    cfg.mode = CrossFitMode::pair_block;
    const auto block_run = run_estimate(d, cfg, true, false);
    const double se = fold_run.gini_est->debiased.se;
    CHECK(std::fabs(fold_run.gini_est->debiased.theta - block_run.gini_est->debiased.theta) < 3.0 * se);
}

TEST_CASE("debiased mld degenerate cases") {
    const auto d = plain_dataset({2.0, 4.0, 8.0, 16.0});

    // gamma = y exactly: recovers the sample MLD
    auto est = debiased_mld_iop(d, injected_fitted_values(d, d.y));
    CHECK(est.theta == Catch::Approx(mld(d.y, d.w)).margin(1e-15));

    // gamma constant at the mean: exactly zero up to fp noise
    const double mean = weighted_mean(d.y, d.w);
    est = debiased_mld_iop(d, injected_fitted_values(d, std::vector<double>(4, mean)));
    CHECK(est.theta == Catch::Approx(0.0).margin(1e-13));
}

TEST_CASE("debiased mld variance equals the three-moment formula") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> val(2.0, 20.0);
    const std::size_t n = 40;
    std::vector<double> y(n), fv(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = val(rng);
        fv[i] = val(rng);
        w[i] = 0.5 + (i % 3);
    }
    auto d = plain_dataset(y, w);
    const auto est = debiased_mld_iop(d, injected_fitted_values(d, fv));

    const double theta1 = weighted_mean(y, w);
    std::vector<double> psi(n);
    double theta2 = 0.0, w_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        theta2 += w[i] * (std::log(fv[i]) + (y[i] - fv[i]) / fv[i]);
        w_total += w[i];
    }
    theta2 /= w_total;
    for (std::size_t i = 0; i < n; ++i)
        psi[i] = std::log(fv[i]) - theta2 + (y[i] - fv[i]) / fv[i];
    const double vhat = weighted_var(y, w) / (theta1 * theta1) + weighted_var(psi, w) -
                        2.0 * weighted_cov(y, psi, w) / theta1;
    CHECK(est.variance == Catch::Approx(vhat).epsilon(1e-10));
    CHECK(est.theta == Catch::Approx(std::log(theta1) - theta2).epsilon(1e-12));
}

TEST_CASE("debiased mld floor rule") {
    const auto d = plain_dataset({2.0, 4.0, 8.0, 16.0});
    const std::vector<double> fv{2.0, 1e-9, 8.0, 16.0};
    CHECK_THROWS_AS(debiased_mld_iop(d, injected_fitted_values(d, fv)), DataError);
    MldOptions opt;
    opt.truncate = true;
    const auto est = debiased_mld_iop(d, injected_fitted_values(d, fv), 0.95, opt);
    CHECK(est.mld_values_floored == 1);
    CHECK(std::isfinite(est.theta));
}

TEST_CASE("mld rejects pair-block cross-fits") {
    const auto spec = five_cell_dgp();
    const auto d = gen_dgp(spec, 40, 2);
    FeatureView view(d);
    const auto folds = make_folds(d.n(), 3, 1);
    const auto cf = crossfit_fitted_values(view, LearnerSpec::forest(5), folds, CrossFitMode::pair_block);
    CHECK_THROWS_AS(debiased_mld_iop(d, cf), ConfigError);
}

TEST_CASE("relative iop endpoints") {
    const auto d = plain_dataset({1.0, 2.0, 3.0, 4.0});

    auto est = debiased_gini_iop(d, injected_fitted_values(d, d.y), {});
    est = relative_iop(est, d);
    CHECK(est.theta_rel == 1.0);
    CHECK(est.se_rel == Catch::Approx(0.0).margin(1e-12));

    est = debiased_gini_iop(d, injected_fitted_values(d, {2.0, 2.0, 2.0, 2.0}), {});
    est = relative_iop(est, d);
    CHECK(est.theta_rel == 0.0);

    auto est_mld = relative_iop(debiased_mld_iop(d, injected_fitted_values(d, d.y)), d);
    CHECK(est_mld.theta_rel == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("relative iop rejects degenerate outcomes") {
    const auto d = plain_dataset({3.0, 3.0, 3.0, 3.0});
    auto est = debiased_gini_iop(d, injected_fitted_values(d, {1.0, 2.0, 3.0, 4.0}), {});
    CHECK_THROWS_AS(relative_iop(est, d), DataError);
}

TEST_CASE("scale equivariance: scaling y leaves the debiased gini unchanged") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> val(1.0, 9.0);
    const std::size_t n = 30;
    std::vector<double> y(n), fv(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = val(rng);
        fv[i] = val(rng);
    }
    auto d = plain_dataset(y);
    const auto base = debiased_gini_iop(d, injected_fitted_values(d, fv), {});
    std::vector<double> scaled = y;
    for (double& v : scaled) v *= 3.7;
    auto d2 = plain_dataset(scaled);
    const auto rescaled = debiased_gini_iop(d2, injected_fitted_values(d2, fv), {});
    CHECK(rescaled.theta == Catch::Approx(base.theta).epsilon(1e-12));
}

TEST_CASE("row permutation with matching folds leaves estimates unchanged") {
    const auto spec = five_cell_dgp();
    const auto d = gen_dgp(spec, 100, 21);
    FeatureView view(d);
    const auto folds = make_folds(d.n(), 5, 13);
    const auto cf = crossfit_fitted_values(view, LearnerSpec::gbt(10), folds, CrossFitMode::fold);
    const auto est = debiased_gini_iop(d, cf, cf.values);

    // permute rows and carry the fold assignment and fitted values along
    std::vector<std::size_t> perm(d.n());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 37 + 11) % d.n();
    Dataset pd = d.select_rows(perm);
    CrossFitFV pcf;
    pcf.mode = CrossFitMode::fold;
    pcf.learner = cf.learner;
    pcf.folds.K = folds.K;
    pcf.folds.seed = folds.seed;
    pcf.folds.fold_of.resize(d.n());
    pcf.folds.rows_of.assign(static_cast<std::size_t>(folds.K), {});
    pcf.values.resize(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) {
        pcf.folds.fold_of[i] = folds.fold_of[perm[i]];
        pcf.folds.rows_of[static_cast<std::size_t>(pcf.folds.fold_of[i])].push_back(i);
        pcf.values[i] = cf.values[perm[i]];
    }
    const auto pest = debiased_gini_iop(pd, pcf, pcf.values);
    CHECK(pest.theta == Catch::Approx(est.theta).epsilon(1e-12));
    CHECK(pest.se == Catch::Approx(est.se).epsilon(1e-10));
}

TEST_CASE("pipeline: run_estimate produces coherent estimates for both indices") {
    const auto spec = five_cell_dgp();
    const auto d = gen_dgp(spec, 400, 31);
    EstimationConfig cfg;
    cfg.learners = {LearnerSpec::forest(30)};
    cfg.K = 5;
    cfg.seed = 8;
    const auto run = run_estimate(d, cfg, true, true);

    REQUIRE(run.gini_est.has_value());
    REQUIRE(run.mld_est.has_value());
    const auto& g = run.gini_est->debiased;
    CHECK(g.has_inference);
    CHECK(g.theta > 0.0);
    CHECK(g.theta < run.gini_est->unconditional + 5.0 * g.se);
    CHECK(g.ci.lo <= g.theta);
    CHECK(g.theta <= g.ci.hi);
    CHECK(g.has_relative);
    CHECK(g.theta_rel > 0.0);
    CHECK(g.theta_rel < 1.0);
    CHECK(run.gini_est->plugin.theta >= 0.0);
    CHECK_FALSE(run.gini_est->plugin.has_inference);

    const auto& m = run.mld_est->debiased;
    CHECK(m.has_inference);
    CHECK(m.theta > 0.0);
    CHECK(m.se > 0.0);
    // truth is within a generous band at this sample size
    CHECK(std::fabs(g.theta - true_iop(spec, IneqIndex::gini)) < 6.0 * g.se);
    CHECK(std::fabs(m.theta - true_iop(spec, IneqIndex::mld)) < 6.0 * m.se);
}

TEST_CASE("variance estimators are nonnegative on random inputs") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> val(1.0, 9.0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 10 + rng() % 40;
        std::vector<double> y(n), fv(n), w(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = val(rng);
            fv[i] = val(rng);
            w[i] = 0.25 + (i % 5) * 0.5;
        }
        auto d = plain_dataset(y, w);
        CHECK(debiased_gini_iop(d, injected_fitted_values(d, fv), {}).variance >= 0.0);
        CHECK(debiased_mld_iop(d, injected_fitted_values(d, fv)).variance >= 0.0);
    }
}
