#pragma once

// Monte-Carlo laboratory for the full multiscale model
//
//   dU = kappa (m - U) dt + eta(Y, Z) dW0,              V_t = exp(s(t) + U_t)
//   dY = (m_Y - Y) / eps dt + nu sqrt(2 / eps) dW1
//   dZ = delta kappa_z (m_z - Z) dt + sqrt(delta) nu_z dW2
//
// with correlated Brownian motions. It also computes the model-implied group
// parameters by quadrature and runs the accuracy ladder of the first-order
// price approximation.
//
// All three factors are advanced with their exact OU transitions over a step
// on which eta is frozen at its left-point value.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "futvol/black76.hpp"
#include "futvol/errors.hpp"
#include "futvol/futures_curve.hpp"
#include "futvol/parallel.hpp"
#include "futvol/pricing.hpp"
#include "futvol/quadrature.hpp"
#include "futvol/rng.hpp"

namespace futvol {

using VolMap = std::function<double(double y, double z)>;

/// Floor applied to the slow factor before it enters the default vol map.
inline constexpr double kSlowFactorFloor = 1e-6;

/// eta(y, z) = z e^y, the lab's default vol map.
[[nodiscard]] inline VolMap exponential_vol_map() {
    return [](double y, double z) { return std::max(z, kSlowFactorFloor) * std::exp(y); };
}

/// eta(y, z) = z; with nu_z = 0 this is a constant-volatility model.
[[nodiscard]] inline VolMap level_vol_map() {
    return [](double, double z) { return std::max(z, kSlowFactorFloor); };
}

struct ModelSpec {
    // spot
    double kappa = 1.0;
    double m = std::log(100.0);
    std::function<double(double)> seasonality;  ///< empty means s == 0
    double u0 = std::log(100.0);
    // fast factor (OU with beta = nu sqrt 2)
    double eps = 0.01;
    double m_y = -0.25;
    double nu = 0.5;
    double y0 = -0.25;
    bool y0_stationary = true;  ///< draw Y_0 from N(m_y, nu^2) per path instead of using y0
    // slow factor (OU)
    double delta = 0.01;
    double kappa_z = 1.0;
    double m_z = 0.3;
    double nu_z = 0.3;
    double z0 = 0.3;
    // volatility and correlation
    VolMap eta = exponential_vol_map();
    double eta_cap_multiple = 50.0;  ///< simulator caps eta at this multiple of eta_bar(z0)
    double rho1 = -0.5;
    double rho2 = -0.4;
    double rho12 = 0.2;
    double rate = 0.0;

    [[nodiscard]] double season(double t) const { return seasonality ? seasonality(t) : 0.0; }

    /// Initial fast factor for a path, given a standard normal draw.
    [[nodiscard]] double initial_y(double normal) const {
        return y0_stationary ? m_y + nu * normal : y0;
    }

    void validate() const {
        auto finite = [](std::initializer_list<double> xs) {
            return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
        };
        detail::require(finite({kappa, m, u0, eps, m_y, nu, y0, delta, kappa_z, m_z, nu_z, z0, rho1,
                                rho2, rho12, rate, eta_cap_multiple}),
                        "model: non-finite parameter");
        detail::require(kappa > 0.0, "model: kappa must be > 0");
        detail::require(eps > 0.0 && delta > 0.0, "model: eps and delta must be > 0");
        detail::require(nu > 0.0, "model: nu must be > 0");
        detail::require(kappa_z >= 0.0 && nu_z >= 0.0, "model: kappa_z, nu_z must be >= 0");
        detail::require(eta_cap_multiple > 1.0, "model: eta cap multiple must exceed 1");
        detail::require(static_cast<bool>(eta), "model: vol map missing");
        detail::require(std::abs(rho1) < 1.0 && std::abs(rho2) < 1.0 && std::abs(rho12) < 1.0,
                        "model: correlations must lie in (-1, 1)");
        const double det = 1.0 + 2.0 * rho1 * rho2 * rho12 - rho1 * rho1 - rho2 * rho2 -
                           rho12 * rho12;
        detail::require(det > 0.0, "model: correlation matrix is not positive definite");
    }
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;  ///< includes the inner-bias estimate for nested estimators
    long paths = 0;
    std::uint64_t seed = 0;
    double inner_bias = 0.0;
};

struct TerminalSamples {
    std::vector<double> U;
    std::vector<double> Y;
    std::vector<double> Z;
};

/// Correlated standard normal triple (xi0, xi1, xi2) driving (U, Y, Z).
struct Increment {
    double w0 = 0.0;
    double w1 = 0.0;
    double w2 = 0.0;
};

namespace detail {

// Cholesky factor in the order (W1, W2, W0).
struct Correlator {
    double rho12, s2, c1, c2, c3;

    explicit Correlator(const ModelSpec& spec)
        : rho12(spec.rho12), s2(std::sqrt(1.0 - spec.rho12 * spec.rho12)), c1(spec.rho1),
          c2((spec.rho2 - spec.rho1 * spec.rho12) / s2),
          c3(std::sqrt(std::max(0.0, 1.0 - c1 * c1 - c2 * c2))) {}

    [[nodiscard]] double xi2(double e1, double e2) const noexcept { return rho12 * e1 + s2 * e2; }
    [[nodiscard]] double xi0_visible(double e1, double e2) const noexcept { return c1 * e1 + c2 * e2; }
};

// Standard deviation of int_0^dt e^{-rate (dt - s)} vol dW.
inline double ou_std(double rate, double vol, double dt) {
    if (rate * dt < 1e-12) return vol * std::sqrt(dt);
    return vol * std::sqrt(-std::expm1(-2.0 * rate * dt) / (2.0 * rate));
}

// int_0^dt e^{-rate (dt - s)} ds.
inline double ou_gain(double rate, double dt) {
    if (rate * dt < 1e-12) return dt;
    return -std::expm1(-rate * dt) / rate;
}

// Per-step constants of the exact OU transitions.
struct StepKernel {
    double dt;
    double eY, sY, gY;  // Y decay, noise std, forcing gain
    double eZ, sZ, gZ;
    double eU, sU;

    StepKernel(const ModelSpec& spec, double dt_)
        : dt(dt_), eY(std::exp(-dt_ / spec.eps)),
          sY(spec.nu * std::sqrt(-std::expm1(-2.0 * dt_ / spec.eps))),
          gY(ou_gain(1.0 / spec.eps, dt_)),
          eZ(std::exp(-spec.delta * spec.kappa_z * dt_)),
          sZ(ou_std(spec.delta * spec.kappa_z, std::sqrt(spec.delta) * spec.nu_z, dt_)),
          gZ(ou_gain(spec.delta * spec.kappa_z, dt_)), eU(std::exp(-spec.kappa * dt_)),
          sU(ou_std(spec.kappa, 1.0, dt_)) {}
};

inline long required_steps(const ModelSpec& spec, double horizon, double steps_per_eps) {
    return std::max(1L, static_cast<long>(std::ceil(steps_per_eps * horizon / spec.eps - 1e-9)));
}

inline void check_resolution(const ModelSpec& spec, double horizon, long n_steps) {
    const long need = required_steps(spec, horizon, 50.0);
    if (n_steps < need) {
        std::ostringstream os;
        os << "simulate: " << n_steps << " steps do not resolve the fast scale over horizon "
           << horizon << " (eps " << spec.eps << "); need n_steps >= " << need;
        throw ResolutionError(os.str(), need);
    }
}

}  // namespace detail

/// Simulation budget shared by the Monte-Carlo estimators.
struct McBudget {
    long outer_paths = 200000;
    long inner_paths = 16;
    double steps_per_eps = 50.0;  ///< fast-scale resolution; at least 50
    unsigned workers = 0;         ///< 0 = hardware concurrency
};

// ---------------------------------------------------------------------------
// group parameters by quadrature

namespace detail {

inline constexpr double kQuadTol = 1e-8;

// GH expectation of f(Y), Y ~ N(m_y, nu^2), doubling nodes until the relative
// change is below kQuadTol; returns the next (finer) rule's value.
template <class F>
double converged_normal_expectation(double mean, double sd, F&& f, const char* what) {
    double prev = normal_expectation(gauss_hermite(8), mean, sd, f);
    for (int n = 16; n <= 1024; n *= 2) {
        const double cur = normal_expectation(gauss_hermite(n), mean, sd, f);
        if (std::abs(cur - prev) <= kQuadTol * std::abs(cur)) {
            return normal_expectation(gauss_hermite(2 * n), mean, sd, f);
        }
        prev = cur;
    }
    throw NumericError(std::string("quadrature did not converge: ") + what, prev);
}

inline double eta_bar_at(const ModelSpec& spec, double z) {
    const double mean_sq = converged_normal_expectation(
        spec.m_y, spec.nu, [&](double y) { const double e = spec.eta(y, z); return e * e; },
        "eta_bar^2");
    require(mean_sq > 0.0 && std::isfinite(mean_sq), "model: <eta^2> must be positive and finite");
    return std::sqrt(mean_sq);
}

// int eta(y) I(y) dy with I(y) = int_{-inf}^{y} (eta^2 - eta_bar^2) p du on
// `panels` equal panels of a 20-point Gauss-Legendre rule over m_y +- 12 nu.
// Left of the mean I is accumulated from the left, right of it from the right.
inline double phi_eta_integral(const ModelSpec& spec, double z, double eta_bar2, int panels,
                               const QuadratureRule& gl) {
    const double lo = spec.m_y - 12.0 * spec.nu;
    const double hi = spec.m_y + 12.0 * spec.nu;
    const double width = (hi - lo) / panels;
    const double norm = 1.0 / (spec.nu * std::sqrt(2.0 * std::numbers::pi));
    auto source = [&](double u) {
        const double e = spec.eta(u, z);
        const double d = (u - spec.m_y) / spec.nu;
        return (e * e - eta_bar2) * norm * std::exp(-0.5 * d * d);
    };
    std::vector<double> panel_int(panels);
    for (int p = 0; p < panels; ++p) {
        panel_int[p] = integrate(gl, lo + p * width, lo + (p + 1) * width, source);
    }
    std::vector<double> prefix(panels + 1, 0.0);  // int over [lo, start of panel p]
    for (int p = 0; p < panels; ++p) prefix[p + 1] = prefix[p] + panel_int[p];
    std::vector<double> suffix(panels + 1, 0.0);  // int over [start of panel p, hi]
    for (int p = panels - 1; p >= 0; --p) suffix[p] = suffix[p + 1] + panel_int[p];

    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = lo + p * width;
        const double b = a + width;
        auto weighted = [&](double y) {
            double I;
            if (y <= spec.m_y) {
                I = prefix[p] + integrate(gl, a, y, source);
            } else {
                I = -(suffix[p + 1] + integrate(gl, y, b, source));
            }
            return spec.eta(y, z) * I;
        };
        total += integrate(gl, a, b, weighted);
    }
    return total;
}

}  // namespace detail

/// Model-implied values at z0, with the curve-level scalars alongside.
struct ModelGroupParams {
    GroupMarketParams group;  ///< (kappa, eta_bar, V3^eps, V0^delta)
    double mean_eta = 0.0;    ///< <eta(., z0)>
    double eta_bar_prime = 0.0;
    double phi_eta_beta = 0.0;  ///< <phi' eta beta>

    /// Futures-curve parameters: V3 = V3^eps, V1 = 2 kappa V0^delta.
    [[nodiscard]] SpotDynamicsParams curve(const ModelSpec& spec) const {
        SpotDynamicsParams p;
        p.kappa = spec.kappa;
        p.m = spec.m;
        p.seasonality = spec.seasonality;
        p.eta_bar = group.eta_bar;
        p.V3 = group.V3eps;
        p.V1 = 2.0 * spec.kappa * group.V0delta;
        return p;
    }
};

[[nodiscard]] inline ModelGroupParams model_group_params(const ModelSpec& spec) {
    spec.validate();
    const double z = spec.z0;
    ModelGroupParams out;
    const double eb = detail::eta_bar_at(spec, z);
    out.group.kappa = spec.kappa;
    out.group.eta_bar = eb;
    out.mean_eta = detail::converged_normal_expectation(
        spec.m_y, spec.nu, [&](double y) { return spec.eta(y, z); }, "<eta>");

    const double h = 1e-5 * std::max(1.0, std::abs(z));
    out.eta_bar_prime = (detail::eta_bar_at(spec, z + h) - detail::eta_bar_at(spec, z - h)) / (2 * h);

    // <phi' eta beta> = (beta / nu^2) int eta I dy
    const QuadratureRule gl = gauss_legendre(20);
    const double beta = spec.nu * std::numbers::sqrt2;
    const double scale = beta / (spec.nu * spec.nu);
    const double floor_abs = detail::kQuadTol * eb * eb * eb;
    double prev = scale * detail::phi_eta_integral(spec, z, eb * eb, 8, gl);
    bool converged = false;
    for (int panels = 16; panels <= 4096; panels *= 2) {
        const double cur = scale * detail::phi_eta_integral(spec, z, eb * eb, panels, gl);
        if (std::abs(cur - prev) <= std::max(detail::kQuadTol * std::abs(cur), floor_abs)) {
            prev = cur;
            converged = true;
            break;
        }
        prev = cur;
    }
    if (!converged) throw NumericError("quadrature did not converge: <phi' eta beta>", prev);
    out.phi_eta_beta = prev;

    out.group.V3eps = -std::sqrt(spec.eps) * 0.5 * spec.rho1 * out.phi_eta_beta;
    out.group.V0delta = std::sqrt(spec.delta) / (2.0 * spec.kappa) * spec.rho2 * out.mean_eta *
                        spec.nu_z * eb * out.eta_bar_prime;
    return out;
}

[[nodiscard]] inline GroupMarketParams implied_group_params(const ModelSpec& spec) {
    return model_group_params(spec).group;
}

// ---------------------------------------------------------------------------
// path simulation

namespace detail {

enum StreamTag : std::uint64_t { kTagPaths = 1, kTagIncrements = 2, kTagFuture = 3, kTagOuter = 4, kTagInner = 5 };

struct CappedVol {
    const ModelSpec& spec;
    double cap;
    double operator()(double y, double z) const { return std::min(spec.eta(y, z), cap); }
};

inline CappedVol capped_vol(const ModelSpec& spec, double eta_bar) {
    return {spec, spec.eta_cap_multiple * eta_bar};
}

}  // namespace detail

/// Terminal (U, Y, Z) at `horizon` from the spec's initial state.
[[nodiscard]] inline TerminalSamples simulate_paths(const ModelSpec& spec, double horizon,
                                                    long n_paths, long n_steps, std::uint64_t seed,
                                                    unsigned workers = 0) {
    spec.validate();
    detail::require(std::isfinite(horizon) && horizon >= 0.0, "simulate: horizon must be >= 0");
    detail::require(n_paths >= 1, "simulate: n_paths >= 1");
    detail::check_resolution(spec, horizon, n_steps);
    const detail::Correlator corr(spec);
    const detail::StepKernel k(spec, horizon / static_cast<double>(n_steps));
    const auto vol = detail::capped_vol(spec, detail::eta_bar_at(spec, spec.z0));

    struct State { double u, y, z; };
    const auto states = parallel_map(
        static_cast<std::size_t>(n_paths),
        [&](std::size_t i) {
            RandomStream rng(seed, stream_id(i, 0, detail::kTagPaths));
            double u = spec.u0, y = spec.initial_y(rng.normal()), z = spec.z0;
            for (long n = 0; n < n_steps; ++n) {
                const double e1 = rng.normal();
                const double e2 = rng.normal();
                const double e0 = rng.normal();
                const double eta = vol(y, z);
                u = spec.m + (u - spec.m) * k.eU +
                    eta * k.sU * (corr.xi0_visible(e1, e2) + corr.c3 * e0);
                y = spec.m_y + (y - spec.m_y) * k.eY + k.sY * e1;
                z = spec.m_z + (z - spec.m_z) * k.eZ + k.sZ * corr.xi2(e1, e2);
            }
            return State{u, y, z};
        },
        workers);
    TerminalSamples out;
    out.U.reserve(states.size());
    out.Y.reserve(states.size());
    out.Z.reserve(states.size());
    for (const auto& s : states) {
        out.U.push_back(s.u);
        out.Y.push_back(s.y);
        out.Z.push_back(s.z);
    }
    return out;
}

/// n correlated standard normal triples, as used for one simulation step.
[[nodiscard]] inline std::vector<Increment> sample_increments(const ModelSpec& spec, long n,
                                                              std::uint64_t seed) {
    spec.validate();
    detail::require(n >= 1, "sample_increments: n >= 1");
    const detail::Correlator corr(spec);
    RandomStream rng(seed, stream_id(0, 0, detail::kTagIncrements));
    std::vector<Increment> out(static_cast<std::size_t>(n));
    for (auto& inc : out) {
        const double e1 = rng.normal();
        const double e2 = rng.normal();
        const double e0 = rng.normal();
        inc = {corr.xi0_visible(e1, e2) + corr.c3 * e0, e1, corr.xi2(e1, e2)};
    }
    return out;
}

// ---------------------------------------------------------------------------
// futures prices

enum class FutureEstimator {
    Tilted,  ///< change of measure removing W0; exact ratio to h0 when eta is constant
    Direct,  ///< plain sample mean of V_T, antithetic on W0
};

namespace detail {

struct SampleStats {
    double mean = 0.0;
    double std_error = 0.0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    SampleStats s;
    s.mean = pairwise_sum(xs.data(), n) / static_cast<double>(n);
    if (n < 2) return s;
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = (xs[i] - s.mean) * (xs[i] - s.mean);
    s.std_error = std::sqrt(pairwise_sum(sq.data(), n) / static_cast<double>(n - 1) /
                            static_cast<double>(n));
    return s;
}

// Log of the tilted inner weight over [start, T] from (y, z): vol drivers get
// the drift rho * a(s) eta(s), a(s) = e^{-kappa (T - s)}, and the weight is
// exp(1/2 sum (eta^2 - ref^2) int a^2). Returns log weight.
inline double tilted_log_weight(const ModelSpec& spec, const Correlator& corr,
                                const StepKernel& k, const CappedVol& vol, double ref2,
                                double tau, long n_steps, double y, double z, RandomStream& rng) {
    const double two_k = 2.0 * spec.kappa;
    const double a2_unit = ou_gain(two_k, k.dt);          // int_0^dt e^{-2 kappa (dt - s)} ds
    const double a_unit = ou_gain(spec.kappa, k.dt) / k.dt;  // mean of e^{-kappa (dt - s)}
    const double drift_y = spec.nu * std::numbers::sqrt2 / std::sqrt(spec.eps) * spec.rho1;
    const double drift_z = std::sqrt(spec.delta) * spec.nu_z * spec.rho2;
    double log_w = 0.0;
    for (long n = 0; n < n_steps; ++n) {
        const double to_end = tau - (n + 1) * k.dt;  // T - s_{n+1}
        const double decay = std::exp(-spec.kappa * std::max(0.0, to_end));
        const double a_mean = decay * a_unit;
        const double A = decay * decay * a2_unit;
        const double e1 = rng.normal();
        const double e2 = rng.normal();
        const double eta = vol(y, z);
        log_w += 0.5 * (eta * eta - ref2) * A;
        const double fy = drift_y * a_mean * eta;
        const double fz = drift_z * a_mean * eta;
        y = spec.m_y + (y - spec.m_y) * k.eY + fy * k.gY + k.sY * e1;
        z = spec.m_z + (z - spec.m_z) * k.eZ + fz * k.gZ + k.sZ * corr.xi2(e1, e2);
    }
    return log_w;
}

}  // namespace detail

/// F_{t,T} from the spec's initial state at time t.
[[nodiscard]] inline McEstimate mc_future_price(const ModelSpec& spec, double t, double T,
                                                long n_paths, std::uint64_t seed,
                                                FutureEstimator method = FutureEstimator::Tilted,
                                                const McBudget& budget = {}) {
    spec.validate();
    detail::require(std::isfinite(t) && std::isfinite(T) && T >= t,
                    "mc_future_price: require t <= T");
    detail::require(n_paths >= 2, "mc_future_price: n_paths >= 2");
    McEstimate est;
    est.paths = n_paths;
    est.seed = seed;
    const double tau = T - t;
    if (tau == 0.0) {
        est.value = std::exp(spec.season(T) + spec.u0);
        return est;
    }
    const long n_steps = detail::required_steps(spec, tau, budget.steps_per_eps);
    detail::check_resolution(spec, tau, n_steps);
    const detail::Correlator corr(spec);
    const detail::StepKernel k(spec, tau / static_cast<double>(n_steps));
    const double eb = detail::eta_bar_at(spec, spec.z0);
    const auto vol = detail::capped_vol(spec, eb);

    std::vector<double> samples;
    if (method == FutureEstimator::Tilted) {
        SpotDynamicsParams lead;
        lead.kappa = spec.kappa;
        lead.m = spec.m;
        lead.seasonality = spec.seasonality;
        lead.eta_bar = eb;
        const double base = h0(t, spec.u0, lead, T);
        samples = parallel_map(
            static_cast<std::size_t>(n_paths),
            [&](std::size_t i) {
                RandomStream rng(seed, stream_id(i, 0, detail::kTagFuture));
                const double y0 = spec.initial_y(rng.normal());
                return base * std::exp(detail::tilted_log_weight(spec, corr, k, vol, eb * eb, tau,
                                                                 n_steps, y0, spec.z0, rng));
            },
            budget.workers);
    } else {
        const long pairs = n_paths / 2;
        samples = parallel_map(
            static_cast<std::size_t>(pairs),
            [&](std::size_t i) {
                RandomStream rng(seed, stream_id(i, 0, detail::kTagFuture));
                double up = spec.u0, um = spec.u0, y = spec.initial_y(rng.normal()), z = spec.z0;
                for (long n = 0; n < n_steps; ++n) {
                    const double e1 = rng.normal();
                    const double e2 = rng.normal();
                    const double e0 = rng.normal();
                    const double eta = vol(y, z);
                    const double vis = corr.xi0_visible(e1, e2);
                    up = spec.m + (up - spec.m) * k.eU + eta * k.sU * (vis + corr.c3 * e0);
                    um = spec.m + (um - spec.m) * k.eU + eta * k.sU * (vis - corr.c3 * e0);
                    y = spec.m_y + (y - spec.m_y) * k.eY + k.sY * e1;
                    z = spec.m_z + (z - spec.m_z) * k.eZ + k.sZ * corr.xi2(e1, e2);
                }
                const double sT = spec.season(T);
                return 0.5 * (std::exp(sT + up) + std::exp(sT + um));
            },
            budget.workers);
        est.paths = 2 * pairs;
    }
    const auto stats = detail::sample_stats(samples);
    est.value = stats.mean;
    est.std_error = stats.std_error;
    return est;
}

// ---------------------------------------------------------------------------
// options

/// Nested estimator of E[e^{-r T0} payoff(F_{T0,T})].
///
/// Outer paths run the vol drivers to T0 with antithetic pairs on (W1, W2);
/// given those paths U_{T0} is Gaussian, so the payoff expectation over the
/// remaining part of W0 is a Black formula. The inner conditional future
/// price G(Y_T0, Z_T0) uses the tilted estimator with n_inner paths; the bias
/// from plugging a noisy G into the payoff is estimated by half-batch
/// splitting and folded into the reported standard error.
[[nodiscard]] inline McEstimate mc_option_price(const ModelSpec& spec, const VanillaSpec& vanilla,
                                                long n_outer, long n_inner, std::uint64_t seed,
                                                const McBudget& budget = {}) {
    spec.validate();
    detail::require(std::isfinite(vanilla.T0) && std::isfinite(vanilla.T) && vanilla.T0 > 0.0 &&
                        vanilla.T0 <= vanilla.T,
                    "mc_option_price: require 0 < T0 <= T");
    detail::require(std::isfinite(vanilla.strike) && vanilla.strike >= 0.0,
                    "mc_option_price: strike must be >= 0");
    detail::require(vanilla.strike > 0.0 || vanilla.style == OptionStyle::Call,
                    "mc_option_price: zero strike only for calls");
    detail::require(n_outer >= 2 && n_inner >= 2 && n_inner % 2 == 0,
                    "mc_option_price: need n_outer >= 2 and an even n_inner >= 2");

    const double T0 = vanilla.T0;
    const double tau = vanilla.T - vanilla.T0;
    const long outer_steps = detail::required_steps(spec, T0, budget.steps_per_eps);
    detail::check_resolution(spec, T0, outer_steps);
    const long inner_steps =
        tau > 0.0 ? detail::required_steps(spec, tau, budget.steps_per_eps) : 0;
    const detail::Correlator corr(spec);
    const detail::StepKernel ko(spec, T0 / static_cast<double>(outer_steps));
    const detail::StepKernel ki(spec, tau > 0.0 ? tau / static_cast<double>(inner_steps) : 1.0);
    const double eb = detail::eta_bar_at(spec, spec.z0);
    const auto vol = detail::capped_vol(spec, eb);
    const double ref2 = eb * eb;
    const double decay_tau = std::exp(-spec.kappa * tau);
    // log G = ref^2 / 4 kappa (1 - e^{-2 kappa tau}) + log mean(weights)
    const double log_g_ref = ref2 / (4.0 * spec.kappa) * (-std::expm1(-2.0 * spec.kappa * tau));
    const double df = std::exp(-vanilla.rate * T0);
    const double sT = spec.season(vanilla.T);

    // Conditional discounted payoff given log F ~ N(mu, v).
    auto payoff = [&](double mu, double v) {
        const double fwd = std::exp(mu + 0.5 * v);
        if (vanilla.strike == 0.0) return df * fwd;
        BlackInputs in;
        in.forward = fwd;
        in.strike = vanilla.strike;
        in.maturity = T0;
        in.rate = vanilla.rate;
        in.vol = std::sqrt(v / T0);
        return black_price(vanilla.style, in);
    };

    // Control variate: the same outer path with eta frozen at eta_bar(z0).
    // Its expectation is the Black price on the h0 forward at eta_bar lambda_sigma.
    double cv_var = 0.0;
    for (long n = 0; n < outer_steps; ++n) {
        cv_var = cv_var * ko.eU * ko.eU + corr.c3 * corr.c3 * ko.sU * ko.sU * ref2;
    }
    const double cv_v = decay_tau * decay_tau * cv_var;
    double cv_mean;
    {
        SpotDynamicsParams lead;
        lead.kappa = spec.kappa;
        lead.m = spec.m;
        lead.seasonality = spec.seasonality;
        lead.eta_bar = eb;
        const double fwd = h0(0.0, spec.u0, lead, vanilla.T);
        const double total_var =
            ref2 * decay_tau * decay_tau * (-std::expm1(-2.0 * spec.kappa * T0)) / (2.0 * spec.kappa);
        cv_mean = payoff(std::log(fwd) - 0.5 * total_var, total_var);
    }

    struct PairSample { double price, cv, bias; };
    const long pairs = n_outer / 2;
    const auto samples = parallel_map(
        static_cast<std::size_t>(pairs),
        [&](std::size_t i) {
            RandomStream rng(seed, stream_id(i, 0, detail::kTagOuter));
            double ubar[2] = {spec.u0, spec.u0};
            double ucv[2] = {spec.u0, spec.u0};
            double var[2] = {0.0, 0.0};
            const double ey = rng.normal();
            double y[2] = {spec.initial_y(ey), spec.initial_y(-ey)};
            double z[2] = {spec.z0, spec.z0};
            const double c3sq = corr.c3 * corr.c3 * ko.sU * ko.sU;
            const double eU2 = ko.eU * ko.eU;
            for (long n = 0; n < outer_steps; ++n) {
                const double e1 = rng.normal();
                const double e2 = rng.normal();
                const double vis = corr.xi0_visible(e1, e2);
                const double x2 = corr.xi2(e1, e2);
                for (int a = 0; a < 2; ++a) {
                    const double sgn = a == 0 ? 1.0 : -1.0;
                    const double eta = vol(y[a], z[a]);
                    ubar[a] = spec.m + (ubar[a] - spec.m) * ko.eU + eta * ko.sU * sgn * vis;
                    ucv[a] = spec.m + (ucv[a] - spec.m) * ko.eU + eb * ko.sU * sgn * vis;
                    var[a] = var[a] * eU2 + c3sq * eta * eta;
                    y[a] = spec.m_y + (y[a] - spec.m_y) * ko.eY + sgn * ko.sY * e1;
                    z[a] = spec.m_z + (z[a] - spec.m_z) * ko.eZ + sgn * ko.sZ * x2;
                }
            }
            PairSample out{0.0, 0.0, 0.0};
            for (int a = 0; a < 2; ++a) {
                double log_g_full = log_g_ref, log_g_a = log_g_ref, log_g_b = log_g_ref;
                if (tau > 0.0) {
                    // mean of weights via a shifted log-sum to stay in range
                    std::vector<double> lw(static_cast<std::size_t>(n_inner));
                    for (long j = 0; j < n_inner; ++j) {
                        RandomStream inner(seed, stream_id(i, 2 * static_cast<std::uint64_t>(j) + a,
                                                           detail::kTagInner));
                        lw[j] = detail::tilted_log_weight(spec, corr, ki, vol, ref2, tau,
                                                          inner_steps, y[a], z[a], inner);
                    }
                    const double shift = *std::max_element(lw.begin(), lw.end());
                    double sa = 0.0, sb = 0.0;
                    const long half = n_inner / 2;
                    for (long j = 0; j < n_inner; ++j) {
                        (j < half ? sa : sb) += std::exp(lw[j] - shift);
                    }
                    log_g_full += shift + std::log((sa + sb) / n_inner);
                    log_g_a += shift + std::log(sa / half);
                    log_g_b += shift + std::log(sb / half);
                }
                const double v = decay_tau * decay_tau * var[a];
                const double base = sT + spec.m + (ubar[a] - spec.m) * decay_tau;
                const double p_full = payoff(base + log_g_full, v);
                const double p_half = 0.5 * (payoff(base + log_g_a, v) + payoff(base + log_g_b, v));
                out.price += 0.5 * p_full;
                out.cv += 0.5 * payoff(sT + spec.m + (ucv[a] - spec.m) * decay_tau + log_g_ref, cv_v);
                out.bias += 0.5 * (p_half - p_full);
            }
            return out;
        },
        budget.workers);

    const std::size_t n = samples.size();
    std::vector<double> prices(n), cvs(n), biases(n);
    for (std::size_t i = 0; i < n; ++i) {
        prices[i] = samples[i].price;
        cvs[i] = samples[i].cv;
        biases[i] = samples[i].bias;
    }
    // regression coefficient of price on the control variate
    const double p_mean = pairwise_sum(prices.data(), n) / static_cast<double>(n);
    const double c_mean = pairwise_sum(cvs.data(), n) / static_cast<double>(n);
    std::vector<double> cross(n), cc(n);
    for (std::size_t i = 0; i < n; ++i) {
        cross[i] = (prices[i] - p_mean) * (cvs[i] - c_mean);
        cc[i] = (cvs[i] - c_mean) * (cvs[i] - c_mean);
    }
    const double c_var = pairwise_sum(cc.data(), n);
    const double beta = c_var > 0.0 ? pairwise_sum(cross.data(), n) / c_var : 0.0;
    std::vector<double> adjusted(n);
    for (std::size_t i = 0; i < n; ++i) adjusted[i] = prices[i] - beta * (cvs[i] - cv_mean);
    const auto stats = detail::sample_stats(adjusted);
    const double bias = pairwise_sum(biases.data(), biases.size()) / static_cast<double>(biases.size());
    McEstimate est;
    est.value = stats.mean;
    est.inner_bias = bias;
    est.std_error = std::sqrt(stats.std_error * stats.std_error + bias * bias);
    est.paths = 2 * pairs;
    est.seed = seed;
    return est;
}

// ---------------------------------------------------------------------------
// accuracy ladder

struct LadderRung {
    double eps = 0.0;
    double delta = 0.0;
};

struct SweepRow {
    double eps = 0.0;
    double delta = 0.0;
    double future_price = 0.0;  ///< MC F_{0,T}, the x fed to the approximation
    double mc_price = 0.0;
    double mc_se = 0.0;
    double inner_bias = 0.0;
    double approx_price = 0.0;
    double abs_error = 0.0;
    bool inconclusive = false;  ///< SE too large relative to the error to resolve it
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::optional<double> slope;  ///< log-log slope of abs_error vs eps + delta
    std::string slope_flag;       ///< "ok", "single-rung", "inconclusive", "inconclusive-by-construction"
};

/// A rung is inconclusive when its SE exceeds this fraction of the measured error.
inline constexpr double kMaxSeToErrorRatio = 0.3;

[[nodiscard]] inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    detail::require(x.size() == y.size() && x.size() >= 2, "slope: need two points");
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    detail::require(sxx > 0.0, "slope: abscissae must differ");
    return sxy / sxx;
}

[[nodiscard]] inline SweepResult accuracy_sweep(const ModelSpec& spec, const VanillaSpec& vanilla,
                                                const std::vector<LadderRung>& ladder,
                                                const McBudget& budget, std::uint64_t seed) {
    detail::require(!ladder.empty(), "accuracy_sweep: empty ladder");
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        detail::require(ladder[i].eps + ladder[i].delta < ladder[i - 1].eps + ladder[i - 1].delta,
                        "accuracy_sweep: ladder must be decreasing in eps + delta");
    }
    vanilla.validate();
    SweepResult res;
    bool trivial = true;
    for (std::size_t r = 0; r < ladder.size(); ++r) {
        ModelSpec s = spec;
        s.eps = ladder[r].eps;
        s.delta = ladder[r].delta;
        const GroupMarketParams gmp = implied_group_params(s);
        const double scale = gmp.eta_bar * gmp.eta_bar * gmp.eta_bar;
        if (std::abs(gmp.V3eps) > 1e-12 * scale || std::abs(gmp.V0delta) > 1e-12 * scale) {
            trivial = false;
        }
        const std::uint64_t rung_seed = seed + 0x9E3779B97F4A7C15ULL * (r + 1);
        const McEstimate fut = mc_future_price(s, 0.0, vanilla.T, budget.outer_paths / 4, rung_seed,
                                               FutureEstimator::Tilted, budget);
        const McEstimate opt =
            mc_option_price(s, vanilla, budget.outer_paths, budget.inner_paths, rung_seed, budget);
        SweepRow row;
        row.eps = s.eps;
        row.delta = s.delta;
        row.future_price = fut.value;
        row.mc_price = opt.value;
        row.mc_se = opt.std_error;
        row.inner_bias = opt.inner_bias;
        row.approx_price = price_total(fut.value, vanilla, gmp).total;
        row.abs_error = std::abs(row.mc_price - row.approx_price);
        row.inconclusive = !(row.mc_se <= kMaxSeToErrorRatio * row.abs_error);
        res.rows.push_back(row);
    }
    if (res.rows.size() < 2) {
        res.slope_flag = "single-rung";
        return res;
    }
    if (trivial) {
        res.slope_flag = "inconclusive-by-construction";
        return res;
    }
    std::vector<double> xs, ys;
    for (const auto& row : res.rows) {
        if (row.inconclusive || !(row.abs_error > 0.0)) continue;
        xs.push_back(row.eps + row.delta);
        ys.push_back(row.abs_error);
    }
    if (xs.size() < res.rows.size() || xs.size() < 2) {
        res.slope_flag = "inconclusive";
        if (xs.size() >= 2) res.slope = loglog_slope(xs, ys);
        return res;
    }
    res.slope = loglog_slope(xs, ys);
    res.slope_flag = "ok";
    return res;
}

}  // namespace futvol
