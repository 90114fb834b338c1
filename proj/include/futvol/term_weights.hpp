#pragma once

// Time-averaging weights of the exponential mean-reversion kernel over an
// option's life. Every weight is a mean over s in [T - T0, T - t] of some
// combination of e^{-k s}; they feed the leading-order volatility, both price
// corrections and the implied-volatility coefficients.

#include <cmath>

#include "futvol/errors.hpp"

namespace futvol {

/// Valuation time t, option maturity T0 and future maturity T, in years.
struct Tenor {
    double t = 0.0;
    double T0 = 0.0;
    double T = 0.0;

    void validate() const {
        detail::require(std::isfinite(t) && std::isfinite(T0) && std::isfinite(T),
                        "tenor: non-finite time");
        detail::require(t <= T0 && T0 <= T, "tenor: require t <= T0 <= T");
        detail::require(T0 > t, "tenor: zero averaging window (T0 == t)");
    }

    [[nodiscard]] double window() const noexcept { return T0 - t; }
    [[nodiscard]] double near_gap() const noexcept { return T - T0; }
    [[nodiscard]] double far_gap() const noexcept { return T - t; }
};

struct WeightSet {
    double lambda = 0.0;
    double lambda_sigma = 0.0;
    double lambda3 = 0.0;
    double lambda0 = 0.0;
    double lambda1 = 0.0;
};

/// Below this value of kappa * (T - t) lambda is evaluated by its Taylor series.
inline constexpr double kSmallKappaSwitch = 1e-6;

namespace detail {

inline void check_kappa(double kappa) {
    require(std::isfinite(kappa) && kappa > 0.0, "weights: kappa must be finite and > 0");
}

// (1 - e^{-x}) / x, the mean of e^{-u} over [0, x].
inline double unit_mean_exp(double x) noexcept {
    if (x < kSmallKappaSwitch) return 1.0 - x / 2.0 + x * x / 6.0;
    return -std::expm1(-x) / x;
}

// unit_mean_exp(x) - unit_mean_exp(3x) without cancellation for small x.
inline double unit_mean_exp_gap(double x) noexcept {
    if (x < 0.05) {
        double sum = 0.0;
        double xk = 1.0;     // x^k
        double fact = 1.0;   // (k+1)!
        double three_k = 1.0;
        for (int k = 1; k <= 12; ++k) {
            xk *= x;
            fact *= static_cast<double>(k + 1);
            three_k *= 3.0;
            const double sign = (k % 2 == 0) ? 1.0 : -1.0;
            sum += sign * xk * (1.0 - three_k) / fact;
        }
        return sum;
    }
    return unit_mean_exp(x) - unit_mean_exp(3.0 * x);
}

}  // namespace detail

/// Mean of e^{-kappa s} over s in [T - T0, T - t].
[[nodiscard]] inline double lambda(const Tenor& tenor, double kappa) {
    tenor.validate();
    detail::check_kappa(kappa);
    const double a = tenor.near_gap();
    const double b = tenor.far_gap();
    if (kappa * b < kSmallKappaSwitch) {
        const double m1 = (a + b) / 2.0;
        const double m2 = (a * a + a * b + b * b) / 3.0;
        return 1.0 - kappa * m1 + kappa * kappa * m2 / 2.0;
    }
    return std::exp(-kappa * a) * detail::unit_mean_exp(kappa * tenor.window());
}

[[nodiscard]] inline double lambda_sigma(const Tenor& tenor, double kappa) {
    return std::sqrt(lambda(tenor, 2.0 * kappa));
}

[[nodiscard]] inline double lambda3(const Tenor& tenor, double kappa) {
    return lambda(tenor, 3.0 * kappa);
}

/// e^{-2 kappa (T - T0)} lambda(kappa) - lambda(3 kappa), evaluated as
/// e^{-3 kappa (T - T0)} [q(kappa w) - q(3 kappa w)] so the result is never negative.
[[nodiscard]] inline double lambda1(const Tenor& tenor, double kappa) {
    tenor.validate();
    detail::check_kappa(kappa);
    const double a = tenor.near_gap();
    return std::exp(-3.0 * kappa * a) * detail::unit_mean_exp_gap(kappa * tenor.window());
}

/// lambda(kappa) - lambda(3 kappa) = lambda1 + e^{-kappa a}(1 - e^{-2 kappa a}) q(kappa w).
[[nodiscard]] inline double lambda0(const Tenor& tenor, double kappa) {
    const double l1 = lambda1(tenor, kappa);
    const double a = tenor.near_gap();
    const double w = tenor.window();
    return l1 + std::exp(-kappa * a) * (-std::expm1(-2.0 * kappa * a)) *
                    detail::unit_mean_exp(kappa * w);
}

[[nodiscard]] inline WeightSet weights(const Tenor& tenor, double kappa) {
    WeightSet w;
    w.lambda = lambda(tenor, kappa);
    w.lambda_sigma = lambda_sigma(tenor, kappa);
    w.lambda3 = lambda3(tenor, kappa);
    w.lambda0 = lambda0(tenor, kappa);
    w.lambda1 = lambda1(tenor, kappa);
    return w;
}

/// Time-averaged effective volatility over [t, T0] for a future maturing at T.
[[nodiscard]] inline double sigma_bar(const Tenor& tenor, double kappa, double eta_bar) {
    detail::require(std::isfinite(eta_bar) && eta_bar > 0.0, "sigma_bar: eta_bar must be > 0");
    return eta_bar * lambda_sigma(tenor, kappa);
}

}  // namespace futvol
