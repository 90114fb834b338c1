#pragma once

// First-order approximation of futures prices on an exp-OU spot with
// multiscale volatility, and its inverse in the log-state variable.
//
// The correction scalars V3 and V1 are stored already multiplied by
// sqrt(eps) and sqrt(delta) respectively, so h10 and h01 below are the full
// corrections added to h0.

#include <cmath>
#include <functional>
#include <utility>

#include "futvol/errors.hpp"

namespace futvol {

struct SpotDynamicsParams {
    double kappa = 1.0;
    double m = 0.0;
    std::function<double(double)> seasonality;  ///< s(t); empty means s == 0
    double eta_bar = 0.2;
    double V3 = 0.0;
    double V1 = 0.0;

    [[nodiscard]] double season(double t) const { return seasonality ? seasonality(t) : 0.0; }

    void validate() const {
        detail::require(std::isfinite(kappa) && kappa > 0.0, "spot dynamics: kappa must be > 0");
        detail::require(std::isfinite(m), "spot dynamics: m must be finite");
        detail::require(std::isfinite(eta_bar) && eta_bar > 0.0,
                        "spot dynamics: eta_bar must be > 0");
        detail::require(std::isfinite(V3) && std::isfinite(V1),
                        "spot dynamics: V3, V1 must be finite");
    }
};

struct FuturesPoint {
    double t = 0.0;
    double T = 0.0;
    double u = 0.0;
    double price = 0.0;
};

struct CurveCorrections {
    double first = 0.0;   ///< fast-scale term (h10 or H10)
    double second = 0.0;  ///< slow-scale term (h01 or H01)
};

namespace detail {

inline double horizon(double t, double T) {
    require(std::isfinite(t) && std::isfinite(T), "futures: non-finite time");
    require(t <= T, "futures: require t <= T");
    return T - t;
}

}  // namespace detail

/// g(t,T) e^{-3 kappa tau} = (1 - e^{-3 kappa tau}) / (3 kappa), tau = T - t,
/// for g(t,T) = (e^{3 kappa tau} - 1) / (3 kappa); the product is what enters h10.
[[nodiscard]] inline double futures_g_weight_damped(double tau, double kappa) {
    return -std::expm1(-3.0 * kappa * tau) / (3.0 * kappa);
}

/// The futures-level g(t,T) itself.
[[nodiscard]] inline double futures_g_weight(double tau, double kappa) {
    return std::expm1(3.0 * kappa * tau) / (3.0 * kappa);
}

/// f(t,T) e^{-3 kappa tau} for the futures-level f(t,T); the product is the
/// combination that enters h01 and stays bounded for long horizons.
[[nodiscard]] inline double futures_f_weight_damped(double tau, double kappa) {
    const double x = kappa * tau;
    if (x < 1e-2) {
        // sum_{k>=2} (-1)^{k+1} (3 - 3^k) kappa^{k-2} tau^k / (6 k!)
        double sum = 0.0;
        double xk = x;  // x^k after the first update
        double fact = 1.0;
        double three_k = 3.0;
        for (int k = 2; k <= 12; ++k) {
            xk *= x;
            fact *= static_cast<double>(k);
            three_k *= 3.0;
            const double sign = (k % 2 == 0) ? -1.0 : 1.0;
            sum += sign * (3.0 - three_k) * xk / fact;
        }
        return sum / (6.0 * kappa * kappa);
    }
    return (-3.0 * std::expm1(-x) + std::expm1(-3.0 * x)) / (6.0 * kappa * kappa);
}

/// The futures-level f(t,T) itself (grows like e^{3 kappa tau}).
[[nodiscard]] inline double futures_f_weight(double tau, double kappa) {
    return futures_f_weight_damped(tau, kappa) * std::exp(3.0 * kappa * tau);
}

/// Leading-order futures price.
[[nodiscard]] inline double h0(double t, double u, const SpotDynamicsParams& p, double T) {
    p.validate();
    const double tau = detail::horizon(t, T);
    const double k = p.kappa;
    const double expo = p.season(T) + p.m + (u - p.m) * std::exp(-k * tau) +
                        p.eta_bar * p.eta_bar / (4.0 * k) * (-std::expm1(-2.0 * k * tau));
    return std::exp(expo);
}

/// (h10, h01) at the scaled V3, V1 stored in `p`.
[[nodiscard]] inline CurveCorrections h_corrections(double t, double u, const SpotDynamicsParams& p,
                                                    double T) {
    const double lead = h0(t, u, p, T);
    const double tau = T - t;
    return {futures_g_weight_damped(tau, p.kappa) * p.V3 * lead,
            futures_f_weight_damped(tau, p.kappa) * p.V1 * lead};
}

/// Inverse of h0 in u.
[[nodiscard]] inline double H0(double t, double x, const SpotDynamicsParams& p, double T) {
    p.validate();
    detail::require(std::isfinite(x) && x > 0.0, "H0: price must be > 0");
    const double tau = detail::horizon(t, T);
    const double k = p.kappa;
    const double shift = p.season(T) + p.m + p.eta_bar * p.eta_bar / (4.0 * k) *
                                                 (-std::expm1(-2.0 * k * tau));
    return p.m + std::exp(k * tau) * (std::log(x) - shift);
}

/// (H10, H01); independent of x.
[[nodiscard]] inline CurveCorrections H_corrections(double t, double x, const SpotDynamicsParams& p,
                                                    double T) {
    p.validate();
    detail::require(std::isfinite(x) && x > 0.0, "H corrections: price must be > 0");
    const double tau = detail::horizon(t, T);
    const double k = p.kappa;
    const double grow = std::exp(k * tau);
    return {-futures_g_weight_damped(tau, k) * grow * p.V3,
            -futures_f_weight_damped(tau, k) * grow * p.V1};
}

/// h0 + h10 + h01.
[[nodiscard]] inline double first_order_future(double t, double u, const SpotDynamicsParams& p,
                                               double T) {
    const auto c = h_corrections(t, u, p, T);
    return h0(t, u, p, T) + c.first + c.second;
}

}  // namespace futvol
