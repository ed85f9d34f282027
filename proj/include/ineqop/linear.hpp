#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ineqop/common.hpp"
#include "ineqop/design.hpp"

namespace ineqop {

// Penalized linear model over design-matrix columns, coefficients on the
// original (unstandardized) scale. Columns dropped as degenerate during
// fitting keep a zero coefficient.
struct LinearModel {
    std::vector<double> coef;
    double intercept = 0.0;
    double lambda = 0.0;  // penalty actually used (after any tuning)
};

namespace detail {

// Weighted-standardized training problem: columns with weighted mean 0 and
// weighted second moment 1, outcome centered. Degenerate (constant) columns
// are left out.
struct StandardizedProblem {
    std::size_t n = 0;
    std::vector<std::vector<double>> xs;     // standardized active columns
    std::vector<std::size_t> active;         // indices into the design
    std::vector<double> mean, scale;         // per active column
    std::vector<double> yc;                  // centered outcome
    std::vector<double> w;
    double w_total = 0.0;
    double y_mean = 0.0;
};

inline StandardizedProblem standardize(const DesignMatrix& dm, const std::vector<std::size_t>& rows,
                                       const std::vector<double>& y, const std::vector<double>& w) {
    StandardizedProblem pb;
    pb.n = rows.size();
    if (pb.n == 0) throw DataError("linear fit: empty training set");
    pb.w.reserve(pb.n);
    double wy = 0.0;
    for (auto r : rows) {
        pb.w.push_back(w[r]);
        pb.w_total += w[r];
        wy += w[r] * y[r];
    }
    pb.y_mean = wy / pb.w_total;
    pb.yc.reserve(pb.n);
    for (auto r : rows) pb.yc.push_back(y[r] - pb.y_mean);

    for (std::size_t j = 0; j < dm.p(); ++j) {
        const auto& col = dm.cols[j];
        double m = 0.0;
        for (std::size_t i = 0; i < pb.n; ++i) m += pb.w[i] * col[rows[i]];
        m /= pb.w_total;
        double v = 0.0;
        for (std::size_t i = 0; i < pb.n; ++i) {
            const double d = col[rows[i]] - m;
            v += pb.w[i] * d * d;
        }
        v /= pb.w_total;
        if (v <= 0.0) continue;  // constant on the training rows
        const double s = std::sqrt(v);
        std::vector<double> xcol(pb.n);
        for (std::size_t i = 0; i < pb.n; ++i) xcol[i] = (col[rows[i]] - m) / s;
        pb.xs.push_back(std::move(xcol));
        pb.active.push_back(j);
        pb.mean.push_back(m);
        pb.scale.push_back(s);
    }
    return pb;
}

inline LinearModel unstandardize(const StandardizedProblem& pb, const std::vector<double>& beta,
                                 std::size_t p_total, double lambda) {
    LinearModel m;
    m.coef.assign(p_total, 0.0);
    m.lambda = lambda;
    double shift = 0.0;
    for (std::size_t j = 0; j < pb.active.size(); ++j) {
        const double b = beta[j] / pb.scale[j];
        m.coef[pb.active[j]] = b;
        shift += b * pb.mean[j];
    }
    m.intercept = pb.y_mean - shift;
    return m;
}

// In-place Cholesky solve of the SPD system A x = b (A destroyed).
inline std::vector<double> cholesky_solve(std::vector<std::vector<double>>& A, std::vector<double> b) {
    const std::size_t p = A.size();
    for (std::size_t j = 0; j < p; ++j) {
        double d = A[j][j];
        for (std::size_t k = 0; k < j; ++k) d -= A[j][k] * A[j][k];
        if (!(d > 1e-12)) throw NumericError("linear fit: normal equations not positive definite");
        A[j][j] = std::sqrt(d);
        for (std::size_t i = j + 1; i < p; ++i) {
            double s = A[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= A[i][k] * A[j][k];
            A[i][j] = s / A[j][j];
        }
    }
    for (std::size_t i = 0; i < p; ++i) {  // L z = b
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= A[i][k] * b[k];
        b[i] = s / A[i][i];
    }
    for (std::size_t ii = p; ii > 0; --ii) {  // L' x = z
        const std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < p; ++k) s -= A[k][i] * b[k];
        b[i] = s / A[i][i];
    }
    return b;
}

// Ridge on the standardized problem: (X'WX/W + lambda I) beta = X'Wy/W.
inline std::vector<double> ridge_beta(const StandardizedProblem& pb, double lambda) {
    const std::size_t p = pb.xs.size();
    std::vector<std::vector<double>> A(p, std::vector<double>(p, 0.0));
    std::vector<double> b(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t k = 0; k <= j; ++k) {
            double s = 0.0;
            for (std::size_t i = 0; i < pb.n; ++i) s += pb.w[i] * pb.xs[j][i] * pb.xs[k][i];
            A[j][k] = A[k][j] = s / pb.w_total;
        }
        A[j][j] += lambda;
        double s = 0.0;
        for (std::size_t i = 0; i < pb.n; ++i) s += pb.w[i] * pb.xs[j][i] * pb.yc[i];
        b[j] = s / pb.w_total;
    }
    return cholesky_solve(A, std::move(b));
}

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

// Cyclic coordinate descent for the weighted lasso on standardized columns,
// objective (1/2W) sum w (y - X b)^2 + lambda * |b|_1. Stops when the largest
// coefficient change in a sweep falls below tol.
inline std::vector<double> lasso_beta(const StandardizedProblem& pb, double lambda,
                                      std::vector<double> beta, double tol = 1e-7,
                                      int max_sweeps = 10000) {
    const std::size_t p = pb.xs.size();
    if (beta.size() != p) beta.assign(p, 0.0);
    std::vector<double> resid = pb.yc;
    for (std::size_t j = 0; j < p; ++j) {
        if (beta[j] == 0.0) continue;
        for (std::size_t i = 0; i < pb.n; ++i) resid[i] -= pb.xs[j][i] * beta[j];
    }
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            double rho = 0.0;
            for (std::size_t i = 0; i < pb.n; ++i) rho += pb.w[i] * pb.xs[j][i] * resid[i];
            rho = rho / pb.w_total + beta[j];  // columns have unit weighted second moment
            const double bj = soft_threshold(rho, lambda);
            const double delta = bj - beta[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < pb.n; ++i) resid[i] -= pb.xs[j][i] * delta;
                beta[j] = bj;
                max_delta = std::max(max_delta, std::fabs(delta));
            }
            if (!std::isfinite(bj)) throw NumericError("lasso: non-finite coefficient");
        }
        if (max_delta < tol) break;
    }
    return beta;
}

// Smallest penalty that zeroes every lasso slope:
//   lambda_max = max_j |sum_i w_i x~_ij y~_i| / sum_i w_i
inline double lasso_lambda_max(const StandardizedProblem& pb) {
    double lmax = 0.0;
    for (std::size_t j = 0; j < pb.xs.size(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < pb.n; ++i) s += pb.w[i] * pb.xs[j][i] * pb.yc[i];
        lmax = std::max(lmax, std::fabs(s) / pb.w_total);
    }
    return lmax;
}

inline std::vector<double> lambda_grid(double lmax, int points = 50, double ratio = 1e-4) {
    std::vector<double> grid(points);
    if (lmax <= 0.0) lmax = 1e-3;  // degenerate outcome, any penalty works
    const double lmin = lmax * ratio;
    for (int i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
        grid[i] = std::exp(std::log(lmax) + t * (std::log(lmin) - std::log(lmax)));
    }
    return grid;  // descending
}

// Deterministic folds over a training subset for internal penalty tuning.
inline std::vector<int> inner_folds(std::size_t n, int K, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(K));
    return fold;
}

}  // namespace detail

// Weighted ridge / lasso over the rows of a design matrix. lambda < 0 selects
// the penalty on a 50-point grid from lambda_max down to 1e-4 * lambda_max by
// 5-fold cross-validation inside the training rows.
inline LinearModel fit_linear(bool is_lasso, double lambda, const DesignMatrix& dm,
                              const std::vector<std::size_t>& rows, const std::vector<double>& y,
                              const std::vector<double>& w, std::uint64_t seed) {
    const auto pb = detail::standardize(dm, rows, y, w);
    if (pb.xs.empty()) {
        LinearModel m;
        m.coef.assign(dm.p(), 0.0);
        m.intercept = pb.y_mean;
        m.lambda = std::max(lambda, 0.0);
        return m;
    }

    auto solve = [&](const detail::StandardizedProblem& problem, double lam,
                     const std::vector<double>& warm) {
        return is_lasso ? detail::lasso_beta(problem, lam, warm)
                        : detail::ridge_beta(problem, lam);
    };

    double chosen = lambda;
    if (lambda < 0.0) {
        const auto grid = detail::lambda_grid(detail::lasso_lambda_max(pb));
        const int K = pb.n >= 10 ? 5 : 2;
        const auto fold = detail::inner_folds(pb.n, K, derive_seed(seed, 0x1a550));
        std::vector<double> cv_err(grid.size(), 0.0);
        for (int k = 0; k < K; ++k) {
            std::vector<std::size_t> tr, va;
            for (std::size_t i = 0; i < pb.n; ++i) (fold[i] == k ? va : tr).push_back(rows[i]);
            if (tr.empty() || va.empty()) continue;
            const auto pbk = detail::standardize(dm, tr, y, w);
            if (pbk.xs.empty()) continue;
            std::vector<double> warm(pbk.xs.size(), 0.0);
            for (std::size_t g = 0; g < grid.size(); ++g) {
                warm = solve(pbk, grid[g], warm);
                const auto m = detail::unstandardize(pbk, warm, dm.p(), grid[g]);
                for (auto r : va) {
                    double pred = m.intercept;
                    for (std::size_t j = 0; j < dm.p(); ++j)
                        if (m.coef[j] != 0.0) pred += m.coef[j] * dm.cols[j][r];
                    const double e = y[r] - pred;
                    cv_err[g] += w[r] * e * e;
                }
            }
        }
        std::size_t best = 0;
        for (std::size_t g = 1; g < grid.size(); ++g)
            if (cv_err[g] < cv_err[best]) best = g;
        chosen = grid[best];
    }

    std::vector<double> beta = solve(pb, chosen, std::vector<double>(pb.xs.size(), 0.0));
    for (double b : beta)
        if (!std::isfinite(b)) throw NumericError("linear fit: non-finite coefficients");
    return detail::unstandardize(pb, beta, dm.p(), chosen);
}

inline std::vector<double> predict_linear(const LinearModel& m, const DesignMatrix& dm,
                                          const std::vector<std::size_t>& rows) {
    if (m.coef.size() != dm.p()) throw DataError("linear predict: design width mismatch");
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) {
        double pred = m.intercept;
        for (std::size_t j = 0; j < dm.p(); ++j)
            if (m.coef[j] != 0.0) pred += m.coef[j] * dm.cols[j][r];
        out.push_back(pred);
    }
    return out;
}

}  // namespace ineqop
