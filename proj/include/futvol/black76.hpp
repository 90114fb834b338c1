#pragma once

// Black model for European options on a futures price, the scale-invariant
// Greek operators D_2 = x^2 d^2/dx^2 and D_1 D_2, and implied-volatility
// inversion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "futvol/errors.hpp"

namespace futvol {

enum class OptionStyle { Call, Put };

struct BlackInputs {
    double forward = 0.0;
    double strike = 0.0;
    double vol = 0.0;
    double maturity = 0.0;
    double rate = 0.0;
};

struct GreekBundle {
    double price = 0.0;
    double vega = 0.0;
    double d2_op = 0.0;
    double d1d2_op = 0.0;
};

[[nodiscard]] inline double norm_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

[[nodiscard]] inline double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

inline void check_black(const BlackInputs& in) {
    require(std::isfinite(in.forward) && in.forward > 0.0, "black: forward must be > 0");
    require(std::isfinite(in.strike) && in.strike > 0.0, "black: strike must be > 0");
    require(std::isfinite(in.maturity) && in.maturity > 0.0, "black: maturity must be > 0");
    require(std::isfinite(in.vol) && in.vol >= 0.0, "black: vol must be >= 0");
    require(std::isfinite(in.rate), "black: rate must be finite");
}

inline void check_greek(const BlackInputs& in) {
    check_black(in);
    require(in.vol > 0.0, "black: Greeks need vol > 0");
}

inline double d1(const BlackInputs& in) {
    const double sd = in.vol * std::sqrt(in.maturity);
    return (std::log(in.forward / in.strike) + 0.5 * sd * sd) / sd;
}

}  // namespace detail

[[nodiscard]] inline double discount(const BlackInputs& in) {
    return std::exp(-in.rate * in.maturity);
}

[[nodiscard]] inline double black_call(const BlackInputs& in) {
    detail::check_black(in);
    const double df = discount(in);
    if (in.vol == 0.0) return df * std::max(in.forward - in.strike, 0.0);
    const double d1 = detail::d1(in);
    const double d2 = d1 - in.vol * std::sqrt(in.maturity);
    return df * (in.forward * norm_cdf(d1) - in.strike * norm_cdf(d2));
}

[[nodiscard]] inline double black_put(const BlackInputs& in) {
    detail::check_black(in);
    const double df = discount(in);
    if (in.vol == 0.0) return df * std::max(in.strike - in.forward, 0.0);
    const double d1 = detail::d1(in);
    const double d2 = d1 - in.vol * std::sqrt(in.maturity);
    return df * (in.strike * norm_cdf(-d2) - in.forward * norm_cdf(-d1));
}

[[nodiscard]] inline double black_price(OptionStyle style, const BlackInputs& in) {
    return style == OptionStyle::Call ? black_call(in) : black_put(in);
}

/// dC/dsigma; identical for calls and puts.
[[nodiscard]] inline double vega(const BlackInputs& in) {
    detail::check_greek(in);
    return discount(in) * in.forward * norm_pdf(detail::d1(in)) * std::sqrt(in.maturity);
}

/// x^2 d^2P/dx^2 = vega / (T0 sigma).
[[nodiscard]] inline double d2_operator(const BlackInputs& in) {
    return vega(in) / (in.maturity * in.vol);
}

/// x d/dx (x^2 d^2P/dx^2) = (1/2 + log(K/F)/(sigma^2 T0)) D_2 P.
[[nodiscard]] inline double d1d2_operator(const BlackInputs& in) {
    const double d2op = d2_operator(in);
    const double total_var = in.vol * in.vol * in.maturity;
    return (0.5 + std::log(in.strike / in.forward) / total_var) * d2op;
}

[[nodiscard]] inline GreekBundle greeks(OptionStyle style, const BlackInputs& in) {
    GreekBundle g;
    g.price = black_price(style, in);
    g.vega = vega(in);
    g.d2_op = g.vega / (in.maturity * in.vol);
    g.d1d2_op = (0.5 + std::log(in.strike / in.forward) / (in.vol * in.vol * in.maturity)) * g.d2_op;
    return g;
}

inline constexpr double kMaxImpliedVol = 5.0;

/// Black implied volatility of a call price. `in.vol` is ignored.
///
/// Safeguarded Newton: each Newton step is accepted only when it stays inside
/// the current bracket, otherwise the bracket is bisected. The bracket starts
/// at (0, kMaxImpliedVol] and is tightened on every evaluation.
[[nodiscard]] inline double implied_vol(double price, BlackInputs in, int max_iter = 200) {
    in.vol = 0.0;
    detail::check_black(in);
    const double df = discount(in);
    const double lower = df * std::max(in.forward - in.strike, 0.0);
    const double upper = df * in.forward;
    if (!(std::isfinite(price) && price > lower && price < upper)) {
        std::ostringstream os;
        os.precision(17);
        os << "implied_vol: price " << price << " outside no-arbitrage band (" << lower << ", "
           << upper << ")";
        throw DomainError(os.str());
    }

    auto f = [&](double s) {
        in.vol = s;
        return black_call(in) - price;
    };

    double lo = 0.0;
    double hi = kMaxImpliedVol;
    if (f(hi) < 0.0) throw DomainError("implied_vol: price requires vol above 5");

    double s = price * std::sqrt(2.0 * std::numbers::pi / in.maturity) / upper;
    if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);

    const double ftol = 1e-14 * std::max(1.0, upper);
    double best = s;
    double best_abs = INFINITY;
    for (int it = 0; it < max_iter; ++it) {
        const double fs = f(s);
        if (std::abs(fs) < best_abs) {
            best_abs = std::abs(fs);
            best = s;
        }
        if (fs == 0.0) return s;
        if (fs > 0.0) hi = s; else lo = s;
        if (std::abs(fs) <= ftol || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
            return s;
        }
        in.vol = s;
        const double v = vega(in);
        double next = (v > 0.0) ? s - fs / v : NAN;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        s = next;
    }
    throw NumericError("implied_vol: no convergence", best);
}

/// Implied volatility from either a call or a put price (puts are mapped by parity).
[[nodiscard]] inline double implied_vol(OptionStyle style, double price, const BlackInputs& in) {
    if (style == OptionStyle::Call) return implied_vol(price, in);
    BlackInputs chk = in;
    chk.vol = 0.0;
    detail::check_black(chk);
    const double df = discount(chk);
    const double lower = df * std::max(in.strike - in.forward, 0.0);
    const double upper = df * in.strike;
    if (!(std::isfinite(price) && price > lower && price < upper)) {
        throw DomainError("implied_vol: put price outside no-arbitrage band");
    }
    return implied_vol(price + df * (in.forward - in.strike), in);
}

}  // namespace futvol
