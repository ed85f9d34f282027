#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "ineqop/inequality.hpp"
#include "ineqop/sim.hpp"

using namespace ineqop;

namespace {

DGPSpec five_cell() {
    DGPSpec spec;
    spec.circumstances = {"origin"};
    const double means[5] = {7.0, 10.0, 13.0, 15.0, 18.0};
    for (int c = 0; c < 5; ++c)
        spec.cells.push_back({{"c" + std::to_string(c)}, 0.2, means[c]});
    spec.noise_delta = 2.0;
    spec.seed = 99;
    return spec;
}

}  // namespace

TEST_CASE("dgp validation") {
    DGPSpec spec = five_cell();
    spec.cells[0].prob = 0.3;
    CHECK_THROWS_AS(spec.validate(), ConfigError);  // probs no longer sum to 1
    spec = five_cell();
    spec.noise_delta = 7.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);  // noise would cross zero
    spec = five_cell();
    spec.cells[0].mean = -1.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("gen_dgp: single cell with zero noise is constant") {
    DGPSpec spec;
    spec.circumstances = {"g"};
    spec.cells = {{{"only"}, 1.0, 9.0}};
    spec.noise_delta = 0.0;
    const auto d = gen_dgp(spec, 50, 1);
    for (double v : d.y) CHECK(v == 9.0);
    CHECK(d.x[0].labels == std::vector<std::string>{"only"});
}

TEST_CASE("gen_dgp is deterministic in the seed") {
    const auto spec = five_cell();
    const auto a = gen_dgp(spec, 200, 5);
    const auto b = gen_dgp(spec, 200, 5);
    CHECK(a.y == b.y);
    CHECK(a.x[0].codes == b.x[0].codes);
    const auto c = gen_dgp(spec, 200, 6);
    CHECK(a.y != c.y);
}

TEST_CASE("gen_dgp cell means converge to the truth") {
    const auto spec = five_cell();
    const auto d = gen_dgp(spec, 100000, 12);
    for (int c = 0; c < 5; ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < d.n(); ++i) {
            if (d.x[0].codes[i] == c) {
                sum += d.y[i];
                ++count;
            }
        }
        CHECK(count > 15000);
        CHECK(sum / static_cast<double>(count) == Catch::Approx(spec.cells[c].mean).margin(0.05));
    }
}

TEST_CASE("true_iop closed forms") {
    DGPSpec spec;
    spec.circumstances = {"g"};
    spec.cells = {{{"lo"}, 0.5, 1.0}, {{"hi"}, 0.5, 3.0}};
    spec.noise_delta = 0.5;
    // E|g_i - g_j| = 0.5 * 2 = 1; E[g_i + g_j] = 4 -> 0.25
    CHECK(true_iop(spec, IneqIndex::gini) == Catch::Approx(0.25).epsilon(1e-14));
    CHECK(true_iop(spec, IneqIndex::mld) ==
          Catch::Approx(std::log(2.0) - 0.5 * std::log(3.0)).epsilon(1e-12));

    const auto fc = five_cell();
    double log_mean = 0.0;
    for (const auto& cell : fc.cells) log_mean += 0.2 * std::log(cell.mean);
    CHECK(true_iop(fc, IneqIndex::mld) == Catch::Approx(std::log(12.6) - log_mean).epsilon(1e-12));

    DGPSpec one;
    one.circumstances = {"g"};
    one.cells = {{{"a"}, 1.0, 5.0}};
    one.noise_delta = 0.0;
    CHECK(true_iop(one, IneqIndex::gini) == 0.0);
    CHECK(true_iop(one, IneqIndex::mld) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("true_iop agrees with the library gini on the exploded cell distribution") {
    const auto spec = five_cell();
    std::vector<double> means, probs;
    for (const auto& cell : spec.cells) {
        means.push_back(cell.mean);
        probs.push_back(cell.prob);
    }
    CHECK(true_iop(spec, IneqIndex::gini) == Catch::Approx(gini(means, probs)).epsilon(1e-12));
    CHECK(true_iop(spec, IneqIndex::mld) == Catch::Approx(mld(means, probs)).epsilon(1e-12));
}

TEST_CASE("true_iop_excluding merges cells by the remaining circumstances") {
    DGPSpec spec;
    spec.circumstances = {"a", "b"};
    spec.cells = {
        {{"a0", "b0"}, 0.25, 4.0},
        {{"a0", "b1"}, 0.25, 6.0},
        {{"a1", "b0"}, 0.25, 10.0},
        {{"a1", "b1"}, 0.25, 12.0},
    };
    spec.noise_delta = 1.0;
    // dropping b merges to means (5, 11) with probs (0.5, 0.5)
    DGPSpec merged;
    merged.circumstances = {"a"};
    merged.cells = {{{"a0"}, 0.5, 5.0}, {{"a1"}, 0.5, 11.0}};
    merged.noise_delta = 1.0;
    for (auto index : {IneqIndex::gini, IneqIndex::mld})
        CHECK(true_iop_excluding(spec, {"b"}, index) == Catch::Approx(true_iop(merged, index)).epsilon(1e-12));
    CHECK(true_iop_excluding(spec, {"a", "b"}, IneqIndex::gini) == 0.0);
}

TEST_CASE("population monotonicity: more circumstances never lower true IOp") {
    const auto spec = five_cell();
    DGPSpec richer = spec;
    richer.circumstances.push_back("extra");
    richer.cells.clear();
    // split each cell in two on the extra circumstance, shifting means apart
    for (const auto& cell : spec.cells) {
        DGPCell lo = cell, hi = cell;
        lo.labels.push_back("e0");
        lo.prob = cell.prob / 2.0;
        lo.mean = cell.mean - 0.5;
        hi.labels.push_back("e1");
        hi.prob = cell.prob / 2.0;
        hi.mean = cell.mean + 0.5;
        richer.cells.push_back(lo);
        richer.cells.push_back(hi);
    }
    for (auto index : {IneqIndex::gini, IneqIndex::mld}) {
        CHECK(true_iop(richer, index) >= true_iop_excluding(richer, {"extra"}, index));
        CHECK(true_iop_excluding(richer, {"extra"}, index) == Catch::Approx(true_iop(spec, index)));
    }
}

TEST_CASE("true outcome inequality explodes the noise atoms") {
    const auto spec = five_cell();
    std::vector<double> atoms, probs;
    for (const auto& cell : spec.cells) {
        atoms.push_back(cell.mean - 2.0);
        probs.push_back(0.1);
        atoms.push_back(cell.mean + 2.0);
        probs.push_back(0.1);
    }
    CHECK(true_outcome_inequality(spec, IneqIndex::gini) ==
          Catch::Approx(gini(atoms, probs)).epsilon(1e-12));
    CHECK(true_outcome_inequality(spec, IneqIndex::gini) > true_iop(spec, IneqIndex::gini));
}

TEST_CASE("monte carlo with an oracle first stage and zero noise is exact") {
    DGPSpec spec = five_cell();
    spec.noise_delta = 0.0;  // y equals the cell mean: a deep tree recovers it
    MonteCarloConfig cfg;
    cfg.est.learners = {LearnerSpec::forest(10)};
    cfg.est.learners[0].max_depth = 0;
    cfg.est.learners[0].min_leaf = 1;
    cfg.est.K = 5;
    cfg.est.seed = 17;
    cfg.gini = true;
    cfg.mld = true;
    cfg.n = 200;
    cfg.replications = 8;
    const auto report = monte_carlo(spec, cfg);
    REQUIRE(report.errors.empty());
    const auto* dg = report.find("debiased_gini");
    const auto* pg = report.find("plugin_gini");
    REQUIRE(dg != nullptr);
    REQUIRE(pg != nullptr);
    CHECK(dg->n_ok == 8);
    // with zero noise each replication's debiased estimate equals the sample
    // gini of y, which equals the plug-in
    for (std::size_t r = 0; r < dg->estimates.size(); ++r)
        CHECK(dg->estimates[r] == Catch::Approx(pg->estimates[r]).margin(1e-10));
}

TEST_CASE("monte carlo is reproducible and thread-count independent") {
    const auto spec = five_cell();
    MonteCarloConfig cfg;
    cfg.est.learners = {LearnerSpec::forest(10)};
    cfg.est.K = 3;
    cfg.est.seed = 23;
    cfg.n = 120;
    cfg.replications = 6;
    cfg.threads = 1;
    const auto a = monte_carlo(spec, cfg);
    cfg.threads = 4;
    const auto b = monte_carlo(spec, cfg);
    REQUIRE(a.summaries.size() == b.summaries.size());
    for (std::size_t s = 0; s < a.summaries.size(); ++s) {
        CHECK(a.summaries[s].estimates == b.summaries[s].estimates);
        const double ca = a.summaries[s].coverage, cb = b.summaries[s].coverage;
        CHECK((std::isnan(ca) ? std::isnan(cb) : ca == cb));
    }
}

TEST_CASE("monte carlo records learner spread when asked") {
    const auto spec = five_cell();
    MonteCarloConfig cfg;
    cfg.est.learners = {LearnerSpec::forest(10), LearnerSpec::gbt(30)};
    cfg.est.K = 3;
    cfg.est.seed = 29;
    cfg.n = 150;
    cfg.replications = 4;
    cfg.learner_spread = true;
    const auto report = monte_carlo(spec, cfg);
    CHECK(std::isfinite(report.plugin_spread));
    CHECK(std::isfinite(report.debiased_spread));
    CHECK(report.plugin_spread >= 0.0);
}

TEST_CASE("monte carlo records per-replication errors without failing") {
    DGPSpec spec = five_cell();
    MonteCarloConfig cfg;
    cfg.est.learners = {LearnerSpec::gbt(5)};
    cfg.est.K = 40;  // passes config validation, but exceeds n per replication
    cfg.n = 30;
    cfg.replications = 3;
    const auto report = monte_carlo(spec, cfg);
    CHECK(report.errors.size() == 3);
    CHECK(report.find("debiased_gini")->n_ok == 0);
}
