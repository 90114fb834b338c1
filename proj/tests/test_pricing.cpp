#include <cmath>

#include <gtest/gtest.h>

#include "futvol/pricing.hpp"
#include "oracles.hpp"

using namespace futvol;

namespace {

GroupMarketParams table1() {
    GroupMarketParams g;
    g.kappa = 0.1385;
    g.eta_bar = 0.21967;
    g.V3eps = -1.76e-4;
    g.V0delta = -1.27e-2;
    return g;
}

VanillaSpec vanilla(double K, double T0, double T, OptionStyle style = OptionStyle::Call,
                    double r = 0.0) {
    VanillaSpec v;
    v.style = style;
    v.strike = K;
    v.T0 = T0;
    v.T = T;
    v.rate = r;
    return v;
}

// Both corrections rebuilt from quadrature weights and finite differences of
// the textbook Black price.
PriceBreakdown oracle_breakdown(double x, const VanillaSpec& v, const GroupMarketParams& g) {
    const double k = g.kappa;
    const double l1 = oracle::lambda_simpson(0.0, v.T0, v.T, k);
    const double l2 = oracle::lambda_simpson(0.0, v.T0, v.T, 2 * k);
    const double l3 = oracle::lambda_simpson(0.0, v.T0, v.T, 3 * k);
    const double lam0 = l1 - l3;
    const double lam1 = std::exp(-2 * k * (v.T - v.T0)) * l1 - l3;
    const double sig = g.eta_bar * std::sqrt(l2);
    auto call = [&](long double y) {
        return oracle::black_call<long double>(std::exp(y), v.strike, sig, v.T0, v.rate);
    };
    const auto d = oracle::log_derivs(call, std::log(x), 0.01 * sig * std::sqrt(v.T0));
    const double D2 = d.d2 - d.d1;
    const double D1D2 = d.d3 - d.d2;
    PriceBreakdown b;
    b.p0 = static_cast<double>(call(std::log(x)));
    b.p10_eps = v.T0 * l3 * g.V3eps * (D2 + D1D2);
    b.p01_delta = v.T0 * g.V0delta * (lam0 * D2 + lam1 * D1D2);
    b.total = b.p0 + b.p10_eps + b.p01_delta;
    return b;
}

}  // namespace

TEST(Pricing, MatchesIndependentOracle) {
    const auto g = table1();
    for (double K : {70.0, 90.0, 100.0, 115.0, 140.0}) {
        for (double T0 : {0.25, 0.5, 1.0}) {
            const auto v = vanilla(K, T0, T0 + 30.0 / 365.0, OptionStyle::Call, 0.01);
            const auto got = price_total(100.0, v, g);
            const auto ref = oracle_breakdown(100.0, v, g);
            EXPECT_NEAR(got.p0, ref.p0, 1e-10);
            EXPECT_NEAR(got.p10_eps, ref.p10_eps, 1e-6 * std::abs(ref.p10_eps) + 1e-12) << K << ' ' << T0;
            EXPECT_NEAR(got.p01_delta, ref.p01_delta, 1e-6 * std::abs(ref.p01_delta) + 1e-12)
                << K << ' ' << T0;
        }
    }
}

TEST(Pricing, ZeroCorrectionsGiveBlack) {
    auto g = table1();
    g.V3eps = g.V0delta = 0.0;
    const auto v = vanilla(95, 0.5, 0.6);
    const auto b = price_total(100.0, v, g);
    EXPECT_EQ(b.p10_eps, 0.0);
    EXPECT_EQ(b.p01_delta, 0.0);
    const double sig = g.eta_bar * std::sqrt(oracle::lambda_simpson(0.0, 0.5, 0.6, 2 * g.kappa));
    EXPECT_NEAR(b.total, oracle::black_call(100.0, 95.0, sig, 0.5), 1e-10);
}

TEST(Pricing, CorrectionsAreLinear) {
    const auto g = table1();
    const auto v = vanilla(105, 0.5, 0.6);
    const auto base = price_total(100.0, v, g);
    auto g2 = g;
    g2.V3eps *= 2.0;
    const auto b2 = price_total(100.0, v, g2);
    EXPECT_EQ(b2.p10_eps, 2.0 * base.p10_eps);
    EXPECT_EQ(b2.p01_delta, base.p01_delta);
    auto g3 = g;
    g3.V0delta *= 2.0;
    const auto b3 = price_total(100.0, v, g3);
    EXPECT_EQ(b3.p01_delta, 2.0 * base.p01_delta);
    EXPECT_EQ(b3.p10_eps, base.p10_eps);
}

TEST(Pricing, PutCallParityOfTotals) {
    const auto g = table1();
    for (double K : {60.0, 95.0, 100.0, 130.0}) {
        for (double T0 : {0.1, 0.75, 2.0}) {
            const double r = 0.03;
            const auto c = price_total(100.0, vanilla(K, T0, T0 + 0.1, OptionStyle::Call, r), g);
            const auto p = price_total(100.0, vanilla(K, T0, T0 + 0.1, OptionStyle::Put, r), g);
            EXPECT_NEAR(c.total - p.total, std::exp(-r * T0) * (100.0 - K), 1e-10);
            EXPECT_NEAR(c.p10_eps, p.p10_eps, 1e-12);
            EXPECT_NEAR(c.p01_delta, p.p01_delta, 1e-12);
        }
    }
}

TEST(Pricing, TableOneAtTheMoneyIsFinite) {
    const auto b = price_total(100.0, vanilla(100, 0.25, 0.3333), table1());
    EXPECT_TRUE(std::isfinite(b.total));
    EXPECT_GT(b.p0, 0.0);
    EXPECT_LT(b.p01_delta, 0.0);  // V0delta < 0 and the D2 term dominates at the money
}

TEST(Pricing, CredibilityWarning) {
    auto g = table1();
    g.V0delta = -1e-3;
    EXPECT_FALSE(g.credibility_warning().has_value());
    g.V0delta = -0.01;
    EXPECT_TRUE(g.credibility_warning().has_value());
}

TEST(Pricing, DomainErrors) {
    const auto g = table1();
    EXPECT_THROW((void)price_total(100.0, vanilla(100, 0.6, 0.5), g), DomainError);
    EXPECT_THROW((void)price_total(0.0, vanilla(100, 0.5, 0.6), g), DomainError);
    EXPECT_THROW((void)price_total(100.0, vanilla(100, 0.5, 0.6), g, 0.5), DomainError);
    auto bad = g;
    bad.eta_bar = 0.0;
    EXPECT_THROW((void)price_total(100.0, vanilla(100, 0.5, 0.6), bad), DomainError);
}
