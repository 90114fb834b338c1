#pragma once

// First-order price of a European call or put on a futures contract:
// leading Black price at the time-averaged volatility plus the fast-scale and
// slow-scale corrections, both written through the D_2 and D_1 D_2 operators
// of that Black price.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include "futvol/black76.hpp"
#include "futvol/errors.hpp"
#include "futvol/term_weights.hpp"

namespace futvol {

/// (kappa, eta_bar, V3^eps, V0^delta) at the current slow-factor level.
struct GroupMarketParams {
    double kappa = 1.0;
    double eta_bar = 0.2;
    double V3eps = 0.0;
    double V0delta = 0.0;

    void validate() const {
        detail::require(std::isfinite(kappa) && kappa > 0.0, "group params: kappa must be > 0");
        detail::require(std::isfinite(eta_bar) && eta_bar > 0.0,
                        "group params: eta_bar must be > 0");
        detail::require(std::isfinite(V3eps) && std::isfinite(V0delta),
                        "group params: V3eps, V0delta must be finite");
    }

    /// Non-empty when a correction scalar exceeds half of eta_bar^3, where the
    /// first-order expansion stops being credible.
    [[nodiscard]] std::optional<std::string> credibility_warning() const {
        const double bound = 0.5 * eta_bar * eta_bar * eta_bar;
        if (std::abs(V3eps) <= bound && std::abs(V0delta) <= bound) return std::nullopt;
        std::ostringstream os;
        os << "group params: |V3eps| or |V0delta| above 0.5*eta_bar^3 = " << bound
           << "; first-order expansion may be inaccurate";
        return os.str();
    }
};

struct VanillaSpec {
    OptionStyle style = OptionStyle::Call;
    double strike = 100.0;
    double T0 = 1.0;  ///< option maturity
    double T = 1.0;   ///< future maturity
    double rate = 0.0;

    void validate() const {
        detail::require(std::isfinite(strike) && strike > 0.0, "vanilla: strike must be > 0");
        detail::require(std::isfinite(T0) && std::isfinite(T) && T0 > 0.0 && T0 <= T,
                        "vanilla: require 0 < T0 <= T");
        detail::require(std::isfinite(rate), "vanilla: rate must be finite");
    }
};

struct PriceBreakdown {
    double p0 = 0.0;
    double p10_eps = 0.0;
    double p01_delta = 0.0;
    double total = 0.0;
};

namespace detail {

struct LeadingBlack {
    Tenor tenor;
    BlackInputs in;
};

inline LeadingBlack leading_black(double x, const VanillaSpec& spec, const GroupMarketParams& gmp,
                                  double t) {
    spec.validate();
    gmp.validate();
    require(std::isfinite(x) && x > 0.0, "pricing: future price must be > 0");
    require(std::isfinite(t) && t < spec.T0, "pricing: require t < T0");
    const Tenor tenor{t, spec.T0, spec.T};
    BlackInputs in;
    in.forward = x;
    in.strike = spec.strike;
    in.maturity = spec.T0 - t;
    in.rate = spec.rate;
    in.vol = sigma_bar(tenor, gmp.kappa, gmp.eta_bar);
    return {tenor, in};
}

}  // namespace detail

[[nodiscard]] inline double price_p0(double x, const VanillaSpec& spec, const GroupMarketParams& gmp,
                                     double t = 0.0) {
    const auto lead = detail::leading_black(x, spec, gmp, t);
    return black_price(spec.style, lead.in);
}

/// (T0 - t) lambda3 V3eps (D_2 + D_1 D_2) P_B.
[[nodiscard]] inline double price_correction_eps(double x, const VanillaSpec& spec,
                                                 const GroupMarketParams& gmp, double t = 0.0) {
    const auto lead = detail::leading_black(x, spec, gmp, t);
    const double d2 = d2_operator(lead.in);
    const double d1d2 = d1d2_operator(lead.in);
    return lead.in.maturity * lambda3(lead.tenor, gmp.kappa) * gmp.V3eps * (d2 + d1d2);
}

/// (T0 - t) V0delta (lambda0 D_2 + lambda1 D_1 D_2) P_B.
[[nodiscard]] inline double price_correction_delta(double x, const VanillaSpec& spec,
                                                   const GroupMarketParams& gmp, double t = 0.0) {
    const auto lead = detail::leading_black(x, spec, gmp, t);
    const double d2 = d2_operator(lead.in);
    const double d1d2 = d1d2_operator(lead.in);
    return lead.in.maturity * gmp.V0delta *
           (lambda0(lead.tenor, gmp.kappa) * d2 + lambda1(lead.tenor, gmp.kappa) * d1d2);
}

[[nodiscard]] inline PriceBreakdown price_total(double x, const VanillaSpec& spec,
                                                const GroupMarketParams& gmp, double t = 0.0) {
    PriceBreakdown b;
    b.p0 = price_p0(x, spec, gmp, t);
    b.p10_eps = price_correction_eps(x, spec, gmp, t);
    b.p01_delta = price_correction_delta(x, spec, gmp, t);
    b.total = b.p0 + b.p10_eps + b.p01_delta;
    return b;
}

}  // namespace futvol
