#pragma once

// Three-stage least-squares calibration of (kappa, eta_bar, V3^eps, V0^delta)
// from an implied-volatility panel:
//   1. per smile, OLS of iv on LMMR      -> (a_hat, b_hat)
//   2. a_hat against a0 a^eps + a1 a^delta, variable projection in kappa
//   3. b_hat against b0 b_bar + b0^2 (a0 b^eps + a1 b^delta), scalar quartic in b0

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "futvol/errors.hpp"
#include "futvol/ivol_expansion.hpp"
#include "futvol/parallel.hpp"
#include "futvol/pricing.hpp"
#include "futvol/quote_panel.hpp"

namespace futvol {

struct SmileFit {
    std::size_t smile_index = 0;  ///< position in the input panel
    double T0 = 0.0;
    double T = 0.0;
    double a_hat = 0.0;  ///< slope, per LMMR unit
    double b_hat = 0.0;  ///< intercept, volatility
    double residual_rms = 0.0;
    std::size_t n_points = 0;
};

struct StageOneFit {
    std::vector<SmileFit> fits;
    std::vector<std::string> warnings;  ///< excluded smiles
};

struct StageTwoResult {
    double a0 = 0.0;
    double a1 = 0.0;
    double kappa = 0.0;
    double objective = 0.0;
    bool converged = false;
    std::string diagnostic;
};

struct StageThreeResult {
    double b0 = 0.0;
    double objective = 0.0;
    bool converged = false;
    std::string diagnostic;
};

struct CalibrationResult {
    double kappa_hat = 0.0;
    double eta_bar_hat = 0.0;
    double V3eps_hat = 0.0;
    double V0delta_hat = 0.0;
    double a0_hat = 0.0;
    double a1_hat = 0.0;
    double b0_hat = 0.0;
    double stage2_objective = 0.0;
    double stage3_objective = 0.0;
    bool converged = false;
    std::vector<std::string> diagnostics;
    StageOneFit stage1;

    [[nodiscard]] GroupMarketParams group() const {
        return {kappa_hat, eta_bar_hat, V3eps_hat, V0delta_hat};
    }
};

struct CalibrationOptions {
    std::optional<double> min_t0;      ///< drop smiles with T0 below this (years)
    double init_kappa = 0.5;
    std::optional<double> init_b0;     ///< default: mean of b_hat
    std::vector<double> smile_weights;  ///< per panel smile; empty = unweighted
    bool allow_two_strikes = false;
    unsigned workers = 0;
};

inline constexpr double kKappaLower = 1e-4;
inline constexpr double kKappaUpper = 20.0;
inline constexpr double kB0Upper = 3.0;

// ---------------------------------------------------------------------------
// stage 1

[[nodiscard]] inline StageOneFit stage1_smile_regression(const QuotePanel& panel,
                                                         bool allow_two_strikes = false,
                                                         unsigned workers = 0) {
    panel.validate(allow_two_strikes);
    struct Outcome {
        std::optional<SmileFit> fit;
        std::string warning;
    };
    const auto outcomes = parallel_map(
        panel.smiles.size(),
        [&](std::size_t i) {
            const Smile& s = panel.smiles[i];
            const std::size_t n = s.strikes.size();
            std::vector<double> x(n);
            for (std::size_t l = 0; l < n; ++l) x[l] = lmmr(s.strikes[l], s.F, s.T0);
            const double xm = std::accumulate(x.begin(), x.end(), 0.0) / n;
            const double ym = std::accumulate(s.ivs.begin(), s.ivs.end(), 0.0) / n;
            double sxx = 0.0, sxy = 0.0, xmax = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                sxx += (x[l] - xm) * (x[l] - xm);
                sxy += (x[l] - xm) * (s.ivs[l] - ym);
                xmax = std::max(xmax, std::abs(x[l]));
            }
            Outcome out;
            if (!(sxx > 1e-24 * n * std::max(1.0, xmax * xmax))) {
                std::ostringstream os;
                os << "stage 1: smile " << i << " (T0 " << s.T0 << ", T " << s.T
                   << ") has a degenerate strike grid; excluded";
                out.warning = os.str();
                return out;
            }
            SmileFit f;
            f.smile_index = i;
            f.T0 = s.T0;
            f.T = s.T;
            f.a_hat = sxy / sxx;
            f.b_hat = ym - f.a_hat * xm;
            double ss = 0.0;
            for (std::size_t l = 0; l < n; ++l) {
                const double r = s.ivs[l] - (f.a_hat * x[l] + f.b_hat);
                ss += r * r;
            }
            f.residual_rms = std::sqrt(ss / n);
            f.n_points = n;
            out.fit = f;
            return out;
        },
        workers);
    StageOneFit res;
    for (const auto& o : outcomes) {
        if (o.fit) res.fits.push_back(*o.fit);
        else res.warnings.push_back(o.warning);
    }
    return res;
}

// ---------------------------------------------------------------------------
// stage 2

namespace detail {

inline std::vector<double> fit_weights(const StageOneFit& fit, const std::vector<double>& w) {
    std::vector<double> out(fit.fits.size(), 1.0);
    if (w.empty()) return out;
    for (std::size_t k = 0; k < fit.fits.size(); ++k) {
        const std::size_t idx = fit.fits[k].smile_index;
        require(idx < w.size(), "calibration: smile weight vector too short");
        require(std::isfinite(w[idx]) && w[idx] >= 0.0, "calibration: weights must be >= 0");
        out[k] = w[idx];
    }
    return out;
}

struct InnerSolve {
    double a0 = 0.0;
    double a1 = 0.0;
    double objective = std::numeric_limits<double>::infinity();
    bool collinear = false;
};

inline InnerSolve stage2_inner(const StageOneFit& fit, const std::vector<double>& w, double kappa) {
    const std::size_t n = fit.fits.size();
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd rhs(n);
    for (std::size_t k = 0; k < n; ++k) {
        const SmileCoefficients c = smile_coefficients(fit.fits[k].T0, fit.fits[k].T, kappa);
        const double sw = std::sqrt(w[k]);
        A(k, 0) = sw * c.a_eps;
        A(k, 1) = sw * c.a_delta;
        rhs[k] = sw * fit.fits[k].a_hat;
    }
    InnerSolve out;
    const double nu = A.col(0).squaredNorm();
    const double nv = A.col(1).squaredNorm();
    const double uv = A.col(0).dot(A.col(1));
    if (!(nu > 0.0 && nv > 0.0) || nu * nv - uv * uv <= 1e-12 * nu * nv) {
        out.collinear = true;
        return out;
    }
    const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(rhs);
    out.a0 = sol[0];
    out.a1 = sol[1];
    out.objective = (rhs - A * sol).squaredNorm();
    return out;
}

// Golden-section minimum of f on [lo, hi].
template <class F>
std::pair<double, double> golden_section(F&& f, double lo, double hi, double tol, int max_iter = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - r * (hi - lo);
    double d = lo + r * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        if (fc <= fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

// Sorted grid with an optional extra point inserted.
inline std::vector<double> scan_grid(std::vector<double> grid, std::optional<double> extra) {
    if (extra) grid.push_back(*extra);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

}  // namespace detail

[[nodiscard]] inline StageTwoResult stage2_term_structure_fit(const StageOneFit& fit,
                                                              double init_kappa = 0.5,
                                                              const std::vector<double>& weights = {}) {
    detail::require(fit.fits.size() >= 3, "stage 2: need at least 3 smiles");
    std::vector<std::pair<double, double>> tenors;
    for (const auto& f : fit.fits) tenors.emplace_back(f.T0, f.T);
    std::sort(tenors.begin(), tenors.end());
    if (std::unique(tenors.begin(), tenors.end()) - tenors.begin() < 2) {
        throw CollinearityError(
            "stage 2: all smiles share one (T0, T) pair, so a^eps and a^delta are collinear");
    }
    const auto w = detail::fit_weights(fit, weights);

    constexpr int kGrid = 400;
    const double llo = std::log(kKappaLower);
    const double lhi = std::log(kKappaUpper);
    std::vector<double> grid(kGrid + 1);
    for (int i = 0; i <= kGrid; ++i) grid[i] = llo + (lhi - llo) * i / kGrid;
    std::optional<double> extra;
    if (std::isfinite(init_kappa) && init_kappa >= kKappaLower && init_kappa <= kKappaUpper) {
        extra = std::log(init_kappa);
    }
    grid = detail::scan_grid(std::move(grid), extra);

    auto objective = [&](double log_kappa) {
        return detail::stage2_inner(fit, w, std::exp(log_kappa)).objective;
    };
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = objective(grid[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    if (!std::isfinite(best_val)) {
        throw CollinearityError("stage 2: a^eps and a^delta columns are collinear for every kappa");
    }
    const double lo = grid[best == 0 ? 0 : best - 1];
    const double hi = grid[std::min(best + 1, grid.size() - 1)];
    auto [lk, val] = detail::golden_section(objective, lo, hi, 1e-13);
    if (val > best_val) {
        lk = grid[best];
        val = best_val;
    }
    StageTwoResult res;
    res.kappa = std::exp(lk);
    const auto inner = detail::stage2_inner(fit, w, res.kappa);
    res.a0 = inner.a0;
    res.a1 = inner.a1;
    res.objective = inner.objective;
    const double edge = 1e-6;
    if (lk <= llo + edge || lk >= lhi - edge) {
        std::ostringstream os;
        os << "stage 2: kappa " << res.kappa << " at the search bound [" << kKappaLower << ", "
           << kKappaUpper << "]; not converged";
        res.diagnostic = os.str();
        res.converged = false;
    } else {
        res.converged = true;
    }
    return res;
}

// ---------------------------------------------------------------------------
// stage 3

[[nodiscard]] inline StageThreeResult stage3_level_fit(const StageOneFit& fit,
                                                       const StageTwoResult& stage2,
                                                       std::optional<double> init_b0 = std::nullopt,
                                                       const std::vector<double>& weights = {}) {
    detail::require(!fit.fits.empty(), "stage 3: no smiles");
    detail::require(std::isfinite(stage2.kappa) && stage2.kappa > 0.0, "stage 3: invalid kappa");
    const auto w = detail::fit_weights(fit, weights);
    const std::size_t n = fit.fits.size();
    std::vector<double> bbar(n), quad(n), bh(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto c = smile_coefficients(fit.fits[k].T0, fit.fits[k].T, stage2.kappa);
        bbar[k] = c.b_bar;
        quad[k] = stage2.a0 * c.b_eps + stage2.a1 * c.b_delta;
        bh[k] = fit.fits[k].b_hat;
    }
    auto Q = [&](double b) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = bh[k] - b * bbar[k] - b * b * quad[k];
            s += w[k] * r * r;
        }
        return s;
    };
    auto dQ = [&](double b, double& d1, double& d2) {
        d1 = 0.0;
        d2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double r = bh[k] - b * bbar[k] - b * b * quad[k];
            const double dr = -(bbar[k] + 2.0 * b * quad[k]);
            d1 += 2.0 * w[k] * r * dr;
            d2 += 2.0 * w[k] * (dr * dr - 2.0 * r * quad[k]);
        }
    };

    constexpr int kGrid = 600;
    std::vector<double> grid(kGrid);
    for (int i = 0; i < kGrid; ++i) grid[i] = kB0Upper * (i + 1) / kGrid;
    std::optional<double> extra;
    if (!init_b0) {
        double s = 0.0;
        for (double b : bh) s += b;
        init_b0 = s / n;
    }
    if (std::isfinite(*init_b0) && *init_b0 > 0.0 && *init_b0 <= kB0Upper) extra = *init_b0;
    grid = detail::scan_grid(std::move(grid), extra);

    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double v = Q(grid[i]);
        if (v < best_val) {
            best_val = v;
            best = i;
        }
    }
    const double lo = best == 0 ? 0.0 : grid[best - 1];
    const double hi = grid[std::min(best + 1, grid.size() - 1)];
    auto [b, val] = detail::golden_section(Q, lo, hi, 1e-12 * kB0Upper);
    if (val > best_val) {
        b = grid[best];
        val = best_val;
    }
    // Newton polish on Q'(b) = 0
    for (int it = 0; it < 50; ++it) {
        double d1, d2;
        dQ(b, d1, d2);
        if (!(d2 > 0.0)) break;
        const double next = b - d1 / d2;
        if (!(next > lo && next < hi)) break;
        const double qn = Q(next);
        if (qn > val) break;
        const double step = std::abs(next - b);
        b = next;
        val = qn;
        if (step <= 1e-15 * b) break;
    }
    StageThreeResult res;
    res.b0 = b;
    res.objective = val;
    double d1, d2;
    dQ(b, d1, d2);
    const bool at_edge = b >= kB0Upper * (1.0 - 1e-9) || best == 0;
    if (at_edge || !(d2 >= 0.0)) {
        std::ostringstream os;
        os << "stage 3: no interior minimum of the level objective on (0, " << kB0Upper
           << "]; b0 = " << b;
        res.diagnostic = os.str();
        res.converged = false;
    } else {
        res.converged = true;
    }
    return res;
}

// ---------------------------------------------------------------------------
// assembly

[[nodiscard]] inline CalibrationResult extract_parameters(const StageTwoResult& stage2,
                                                          const StageThreeResult& stage3) {
    CalibrationResult r;
    r.kappa_hat = stage2.kappa;
    r.a0_hat = stage2.a0;
    r.a1_hat = stage2.a1;
    r.b0_hat = stage3.b0;
    r.eta_bar_hat = stage3.b0;
    const double b3 = stage3.b0 * stage3.b0 * stage3.b0;
    r.V3eps_hat = stage2.a0 * b3;
    r.V0delta_hat = stage2.a1 * b3;
    r.stage2_objective = stage2.objective;
    r.stage3_objective = stage3.objective;
    r.converged = stage2.converged && stage3.converged;
    if (!stage2.diagnostic.empty()) r.diagnostics.push_back(stage2.diagnostic);
    if (!stage3.diagnostic.empty()) r.diagnostics.push_back(stage3.diagnostic);
    return r;
}

/// Panel with smiles of option maturity below `min_t0` removed; weights follow.
[[nodiscard]] inline std::pair<QuotePanel, std::vector<double>> filter_min_t0(
    const QuotePanel& panel, double min_t0, const std::vector<double>& weights = {}) {
    QuotePanel out;
    std::vector<double> w;
    for (std::size_t i = 0; i < panel.smiles.size(); ++i) {
        if (panel.smiles[i].T0 + 1e-12 < min_t0) continue;
        out.smiles.push_back(panel.smiles[i]);
        if (!weights.empty()) {
            detail::require(i < weights.size(), "calibration: smile weight vector too short");
            w.push_back(weights[i]);
        }
    }
    return {out, w};
}

[[nodiscard]] inline CalibrationResult calibrate(const QuotePanel& input,
                                                 const CalibrationOptions& opts = {}) {
    QuotePanel panel = input;
    std::vector<double> weights = opts.smile_weights;
    if (!weights.empty()) {
        detail::require(weights.size() == input.smiles.size(),
                        "calibration: one weight per smile required");
    }
    if (opts.min_t0) std::tie(panel, weights) = filter_min_t0(input, *opts.min_t0, weights);
    detail::require(!panel.smiles.empty(), "calibration: no smiles left after filtering");
    StageOneFit s1 = stage1_smile_regression(panel, opts.allow_two_strikes, opts.workers);
    const StageTwoResult s2 = stage2_term_structure_fit(s1, opts.init_kappa, weights);
    const StageThreeResult s3 = stage3_level_fit(s1, s2, opts.init_b0, weights);
    CalibrationResult r = extract_parameters(s2, s3);
    r.diagnostics.insert(r.diagnostics.begin(), s1.warnings.begin(), s1.warnings.end());
    r.stage1 = std::move(s1);
    return r;
}

}  // namespace futvol
