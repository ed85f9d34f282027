#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/dataset.hpp"
#include "ineqop/effects.hpp"
#include "ineqop/iop.hpp"
#include "ineqop/pipeline.hpp"

namespace ineqop {

// ---------------------------------------------------------------------------
// Finite-cell data generating processes
// ---------------------------------------------------------------------------
//
// A cell is one combination of circumstance values with a sampling
// probability and a true conditional mean. Noise around the mean is mean-zero
// with support small enough to keep the outcome positive, so every population
// quantity below has a closed form.

enum class NoiseKind { two_point, uniform };

struct DGPCell {
    std::vector<std::string> labels;  // one label per circumstance
    double prob = 0.0;
    double mean = 0.0;
};

struct DGPSpec {
    std::vector<std::string> circumstances;
    std::vector<DGPCell> cells;
    NoiseKind noise = NoiseKind::two_point;
    double noise_delta = 2.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (circumstances.empty()) throw ConfigError("dgp: needs at least one circumstance");
        if (cells.empty()) throw ConfigError("dgp: needs at least one cell");
        double total = 0.0;
        double min_mean = cells.front().mean;
        for (const auto& cell : cells) {
            if (cell.labels.size() != circumstances.size())
                throw ConfigError("dgp: cell label count does not match the circumstances");
            if (!(cell.prob > 0.0)) throw ConfigError("dgp: cell probabilities must be positive");
            if (!(cell.mean > 0.0)) throw ConfigError("dgp: cell means must be positive");
            total += cell.prob;
            min_mean = std::min(min_mean, cell.mean);
        }
        if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("dgp: cell probabilities must sum to 1");
        if (noise_delta < 0.0) throw ConfigError("dgp: noise delta must be >= 0");
        if (!(noise_delta < min_mean)) throw ConfigError("dgp: noise delta must keep outcomes positive");
    }
};

inline Dataset gen_dgp(const DGPSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 2) throw ConfigError("dgp: n must be >= 2");

    std::vector<double> cum(spec.cells.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < spec.cells.size(); ++c) {
        acc += spec.cells[c].prob;
        cum[c] = acc;
    }
    cum.back() = 1.0;

    Dataset d;
    d.x.resize(spec.circumstances.size());
    for (std::size_t j = 0; j < spec.circumstances.size(); ++j) d.x[j].name = spec.circumstances[j];
    // Shared label dictionaries in cell order of first appearance.
    std::vector<std::vector<std::int32_t>> cell_code(spec.cells.size(),
                                                     std::vector<std::int32_t>(spec.circumstances.size()));
    for (std::size_t c = 0; c < spec.cells.size(); ++c) {
        for (std::size_t j = 0; j < spec.circumstances.size(); ++j) {
            auto& col = d.x[j];
            int code = col.find_label(spec.cells[c].labels[j]);
            if (code < 0) {
                code = static_cast<int>(col.labels.size());
                col.labels.push_back(spec.cells[c].labels[j]);
            }
            cell_code[c][j] = static_cast<std::int32_t>(code);
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit(rng);
        std::size_t c = 0;
        while (c + 1 < cum.size() && u > cum[c]) ++c;
        double eps = 0.0;
        if (spec.noise_delta > 0.0) {
            if (spec.noise == NoiseKind::two_point) {
                eps = unit(rng) < 0.5 ? -spec.noise_delta : spec.noise_delta;
            } else {
                eps = (2.0 * unit(rng) - 1.0) * spec.noise_delta;
            }
        }
        d.y.push_back(spec.cells[c].mean + eps);
        d.w.push_back(1.0);
        d.ids.push_back(static_cast<std::int64_t>(i + 1));
        for (std::size_t j = 0; j < spec.circumstances.size(); ++j)
            d.x[j].codes.push_back(cell_code[c][j]);
    }
    d.validate();
    return d;
}

inline Dataset gen_dgp(const DGPSpec& spec, std::size_t n) { return gen_dgp(spec, n, spec.seed); }

// ---------------------------------------------------------------------------
// Population oracles
// ---------------------------------------------------------------------------

namespace detail {

// Exact inequality of a finite distribution (atoms with probabilities) by the
// direct double sum; intentionally independent of the fast sample paths.
inline double finite_inequality(const std::vector<double>& value, const std::vector<double>& prob,
                                IneqIndex index) {
    if (index == IneqIndex::gini) {
        double num = 0.0, den = 0.0;
        for (std::size_t a = 0; a < value.size(); ++a) {
            for (std::size_t b = 0; b < value.size(); ++b) {
                num += prob[a] * prob[b] * std::fabs(value[a] - value[b]);
                den += prob[a] * prob[b] * (value[a] + value[b]);
            }
        }
        return num / den;
    }
    double mean = 0.0, log_mean = 0.0;
    for (std::size_t a = 0; a < value.size(); ++a) {
        mean += prob[a] * value[a];
        log_mean += prob[a] * std::log(value[a]);
    }
    return std::log(mean) - log_mean;
}

}  // namespace detail

// True IOp of the fitted values E[Y|X]: inequality of the cell means under
// the cell probabilities.
inline double true_iop(const DGPSpec& spec, IneqIndex index) {
    spec.validate();
    std::vector<double> means, probs;
    for (const auto& cell : spec.cells) {
        means.push_back(cell.mean);
        probs.push_back(cell.prob);
    }
    return detail::finite_inequality(means, probs, index);
}

// True IOp after removing circumstances: cells that agree on the remaining
// circumstances merge, with the probability-weighted mean as the new gamma.
inline double true_iop_excluding(const DGPSpec& spec, const std::vector<std::string>& drop,
                                 IneqIndex index) {
    spec.validate();
    std::vector<std::size_t> kept_circ;
    for (std::size_t j = 0; j < spec.circumstances.size(); ++j) {
        bool dropped = false;
        for (const auto& name : drop) dropped = dropped || name == spec.circumstances[j];
        if (!dropped) kept_circ.push_back(j);
    }
    std::map<std::vector<std::string>, std::pair<double, double>> merged;  // key -> (prob, prob*mean)
    for (const auto& cell : spec.cells) {
        std::vector<std::string> key;
        for (auto j : kept_circ) key.push_back(cell.labels[j]);
        auto& agg = merged[key];
        agg.first += cell.prob;
        agg.second += cell.prob * cell.mean;
    }
    std::vector<double> means, probs;
    for (const auto& [key, agg] : merged) {
        probs.push_back(agg.first);
        means.push_back(agg.second / agg.first);
    }
    if (means.size() == 1) return 0.0;
    return detail::finite_inequality(means, probs, index);
}

// True inequality of the outcome itself (the mixture of cell means plus
// noise); exact for two-point noise, quadrature for uniform noise.
inline double true_outcome_inequality(const DGPSpec& spec, IneqIndex index) {
    spec.validate();
    std::vector<double> value, prob;
    if (spec.noise_delta == 0.0) return true_iop(spec, index);
    if (spec.noise == NoiseKind::two_point) {
        for (const auto& cell : spec.cells) {
            value.push_back(cell.mean - spec.noise_delta);
            prob.push_back(cell.prob / 2.0);
            value.push_back(cell.mean + spec.noise_delta);
            prob.push_back(cell.prob / 2.0);
        }
    } else {
        constexpr int kAtoms = 2001;  // midpoint rule over each uniform band
        for (const auto& cell : spec.cells) {
            for (int k = 0; k < kAtoms; ++k) {
                const double t = (2.0 * k + 1.0) / (2.0 * kAtoms) * 2.0 - 1.0;
                value.push_back(cell.mean + t * spec.noise_delta);
                prob.push_back(cell.prob / kAtoms);
            }
        }
    }
    return detail::finite_inequality(value, prob, index);
}

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

struct MonteCarloConfig {
    EstimationConfig est;
    bool gini = true;
    bool mld = false;
    bool relative = false;        // also track the relative-IOp CI
    bool learner_spread = false;  // per-replication sd of estimates across learners
    std::size_t n = 2000;
    int replications = 100;
    int threads = 1;
};

struct McSummary {
    std::string name;
    double truth = std::nan("");
    int n_ok = 0;
    double mean_estimate = std::nan("");
    double bias = std::nan("");
    double sd = std::nan("");       // across replications
    double mean_se = std::nan("");  // NaN when the estimator carries no se
    double coverage = std::nan("");
    std::vector<double> estimates;  // per replication, NaN on failure
};

struct MonteCarloReport {
    std::size_t n = 0;
    int replications = 0;
    std::vector<McSummary> summaries;
    std::vector<std::string> errors;
    // Mean across replications of the sd of estimates across learner specs.
    double plugin_spread = std::nan("");
    double debiased_spread = std::nan("");
    double spread_ratio = std::nan("");

    const McSummary* find(const std::string& name) const {
        for (const auto& s : summaries)
            if (s.name == name) return &s;
        return nullptr;
    }
};

namespace detail {

struct McCells {
    std::vector<double> est, se, lo, hi;
    explicit McCells(int R)
        : est(static_cast<std::size_t>(R), std::nan("")),
          se(static_cast<std::size_t>(R), std::nan("")),
          lo(static_cast<std::size_t>(R), std::nan("")),
          hi(static_cast<std::size_t>(R), std::nan("")) {}
    void record(int r, const IOpEstimate& e, bool relative) {
        const auto i = static_cast<std::size_t>(r);
        est[i] = relative ? e.theta_rel : e.theta;
        se[i] = relative ? e.se_rel : e.se;
        lo[i] = relative ? e.ci_rel.lo : e.ci.lo;
        hi[i] = relative ? e.ci_rel.hi : e.ci.hi;
    }
};

inline McSummary summarize(const std::string& name, double truth, const McCells& cells) {
    McSummary s;
    s.name = name;
    s.truth = truth;
    s.estimates = cells.est;
    double sum = 0.0;
    for (double v : cells.est) {
        if (std::isnan(v)) continue;
        ++s.n_ok;
        sum += v;
    }
    if (s.n_ok == 0) return s;
    s.mean_estimate = sum / s.n_ok;
    s.bias = s.mean_estimate - truth;
    double ss = 0.0, se_sum = 0.0;
    int n_se = 0, covered = 0, with_ci = 0;
    for (std::size_t r = 0; r < cells.est.size(); ++r) {
        if (std::isnan(cells.est[r])) continue;
        const double dev = cells.est[r] - s.mean_estimate;
        ss += dev * dev;
        if (!std::isnan(cells.se[r])) {
            se_sum += cells.se[r];
            ++n_se;
        }
        if (!std::isnan(cells.lo[r]) && !std::isnan(cells.hi[r])) {
            ++with_ci;
            if (cells.lo[r] <= truth && truth <= cells.hi[r]) ++covered;
        }
    }
    s.sd = s.n_ok > 1 ? std::sqrt(ss / (s.n_ok - 1)) : 0.0;
    if (n_se > 0) s.mean_se = se_sum / n_se;
    if (with_ci > 0) s.coverage = static_cast<double>(covered) / with_ci;
    return s;
}

}  // namespace detail

// Replications are independent tasks with derived seeds; results land in
// per-replication slots, so the report is identical for any thread count.
inline MonteCarloReport monte_carlo(const DGPSpec& spec, const MonteCarloConfig& cfg) {
    spec.validate();
    cfg.est.validate();
    if (cfg.replications < 1) throw ConfigError("monte carlo: needs at least one replication");
    if (!cfg.gini && !cfg.mld) throw ConfigError("monte carlo: no index requested");

    const int R = cfg.replications;
    detail::McCells plugin_gini(R), debiased_gini(R), rel_gini(R);
    detail::McCells plugin_mld(R), debiased_mld(R), rel_mld(R);
    std::vector<double> spread_plugin(static_cast<std::size_t>(R), std::nan(""));
    std::vector<double> spread_debiased(static_cast<std::size_t>(R), std::nan(""));
    std::vector<std::string> errors(static_cast<std::size_t>(R));

    parallel_for(static_cast<std::size_t>(R), cfg.threads, [&](std::size_t rr) {
        const int r = static_cast<int>(rr);
        try {
            const Dataset data = gen_dgp(spec, cfg.n, derive_seed(spec.seed, rr));
            EstimationConfig est = cfg.est;
            est.seed = derive_seed(cfg.est.seed, rr);
            est.relative = cfg.relative;
            for (std::size_t s = 0; s < est.learners.size(); ++s)
                est.learners[s].seed = derive_seed(est.seed, 7000 + s);

            const EstimateRun run = run_estimate(data, est, cfg.gini, cfg.mld);
            if (cfg.gini) {
                plugin_gini.record(r, run.gini_est->plugin, false);
                debiased_gini.record(r, run.gini_est->debiased, false);
                if (cfg.relative) rel_gini.record(r, run.gini_est->debiased, true);
            }
            if (cfg.mld) {
                plugin_mld.record(r, run.mld_est->plugin, false);
                debiased_mld.record(r, run.mld_est->debiased, false);
                if (cfg.relative) rel_mld.record(r, run.mld_est->debiased, true);
            }

            if (cfg.learner_spread && est.learners.size() > 1) {
                std::vector<double> plugin_ests, debiased_ests;
                for (const auto& learner : est.learners) {
                    EstimationConfig single = est;
                    single.learners = {learner};
                    single.relative = false;
                    const EstimateRun one = run_estimate_with_folds(data, single, cfg.gini, cfg.mld && !cfg.gini,
                                                                    run.folds);
                    const IndexEstimates& ie = cfg.gini ? *one.gini_est : *one.mld_est;
                    plugin_ests.push_back(ie.plugin.theta);
                    debiased_ests.push_back(ie.debiased.theta);
                }
                auto sd_of = [](const std::vector<double>& v) {
                    double m = 0.0;
                    for (double x : v) m += x;
                    m /= static_cast<double>(v.size());
                    double ss = 0.0;
                    for (double x : v) ss += (x - m) * (x - m);
                    return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
                };
                spread_plugin[rr] = sd_of(plugin_ests);
                spread_debiased[rr] = sd_of(debiased_ests);
            }
        } catch (const std::exception& e) {
            errors[rr] = e.what();
        }
    });

    MonteCarloReport report;
    report.n = cfg.n;
    report.replications = R;
    for (std::size_t r = 0; r < errors.size(); ++r)
        if (!errors[r].empty())
            report.errors.push_back("replication " + std::to_string(r + 1) + ": " + errors[r]);

    if (cfg.gini) {
        const double truth = true_iop(spec, IneqIndex::gini);
        report.summaries.push_back(detail::summarize("plugin_gini", truth, plugin_gini));
        report.summaries.push_back(detail::summarize("debiased_gini", truth, debiased_gini));
        if (cfg.relative) {
            const double rel_truth = truth / true_outcome_inequality(spec, IneqIndex::gini);
            report.summaries.push_back(detail::summarize("relative_gini", rel_truth, rel_gini));
        }
    }
    if (cfg.mld) {
        const double truth = true_iop(spec, IneqIndex::mld);
        report.summaries.push_back(detail::summarize("plugin_mld", truth, plugin_mld));
        report.summaries.push_back(detail::summarize("debiased_mld", truth, debiased_mld));
        if (cfg.relative) {
            const double rel_truth = truth / true_outcome_inequality(spec, IneqIndex::mld);
            report.summaries.push_back(detail::summarize("relative_mld", rel_truth, rel_mld));
        }
    }

    if (cfg.learner_spread) {
        double sp = 0.0, sb = 0.0;
        int c = 0;
        for (int r = 0; r < R; ++r) {
            const auto rr = static_cast<std::size_t>(r);
            if (std::isnan(spread_plugin[rr]) || std::isnan(spread_debiased[rr])) continue;
            sp += spread_plugin[rr];
            sb += spread_debiased[rr];
            ++c;
        }
        if (c > 0) {
            report.plugin_spread = sp / c;
            report.debiased_spread = sb / c;
            if (report.debiased_spread > 0.0) report.spread_ratio = report.plugin_spread / report.debiased_spread;
        }
    }
    return report;
}

}  // namespace ineqop
