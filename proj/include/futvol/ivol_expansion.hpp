#pragma once

// First-order implied volatility: affine in the log-moneyness-to-maturity
// ratio LMMR = log(K/F)/T0, with tenor-dependent coefficients built from the
// term weights (valuation time t = 0).

#include <cmath>
#include <sstream>

#include "futvol/errors.hpp"
#include "futvol/pricing.hpp"
#include "futvol/term_weights.hpp"

namespace futvol {

struct SmileCoefficients {
    double b_bar = 0.0;
    double b_eps = 0.0;
    double b_delta = 0.0;
    double a_eps = 0.0;
    double a_delta = 0.0;
};

struct LMMRPoint {
    double lmmr = 0.0;
    double iv = 0.0;
};

/// Any approximate implied volatility at or below this level is reported as a breakdown.
inline constexpr double kIvBreakdownLevel = 0.005;

[[nodiscard]] inline double lmmr(double strike, double future_price, double T0) {
    detail::require(strike > 0.0 && future_price > 0.0 && T0 > 0.0, "lmmr: invalid inputs");
    return std::log(strike / future_price) / T0;
}

[[nodiscard]] inline SmileCoefficients smile_coefficients(const Tenor& tenor, double kappa) {
    const WeightSet w = weights(tenor, kappa);
    const double ls = w.lambda_sigma;
    const double ls3 = ls * ls * ls;
    SmileCoefficients c;
    c.b_bar = ls;
    c.b_eps = 1.5 * w.lambda3 / ls;
    c.b_delta = w.lambda0 / ls + 0.5 * w.lambda1 / ls;
    c.a_eps = w.lambda3 / ls3;
    c.a_delta = w.lambda1 / ls3;
    return c;
}

[[nodiscard]] inline SmileCoefficients smile_coefficients(double T0, double T, double kappa) {
    detail::require(T0 > 0.0, "smile coefficients: require T0 > 0");
    return smile_coefficients(Tenor{0.0, T0, T}, kappa);
}

/// Affine level and slope of the approximate smile at one tenor.
struct AffineSmile {
    double level = 0.0;  ///< implied vol at LMMR = 0
    double slope = 0.0;  ///< d iv / d LMMR
};

[[nodiscard]] inline AffineSmile affine_smile(double T0, double T, const GroupMarketParams& gmp) {
    gmp.validate();
    const SmileCoefficients c = smile_coefficients(T0, T, gmp.kappa);
    const double eb = gmp.eta_bar;
    const double eb3 = eb * eb * eb;
    return {eb * c.b_bar + gmp.V3eps / eb * c.b_eps + gmp.V0delta / eb * c.b_delta,
            gmp.V3eps / eb3 * c.a_eps + gmp.V0delta / eb3 * c.a_delta};
}

[[nodiscard]] inline double iv_approx(double lmmr_value, double T0, double T,
                                      const GroupMarketParams& gmp) {
    const AffineSmile s = affine_smile(T0, T, gmp);
    const double iv = s.level + s.slope * lmmr_value;
    if (!(iv > kIvBreakdownLevel)) {
        std::ostringstream os;
        os << "iv_approx: level " << iv << " at LMMR " << lmmr_value << ", T0 " << T0
           << " is outside the asymptotic regime";
        throw ExpansionBreakdown(os.str());
    }
    return iv;
}

}  // namespace futvol
