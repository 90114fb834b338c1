#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "futvol/calibration.hpp"
#include "futvol/marketdata.hpp"
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

QuotePanel panel(double noise = 0.0, std::uint64_t seed = 1) {
    SynthGrid grid;
    grid.tenors = default_synth_tenors();
    grid.noise_sd = noise;
    grid.seed = seed;
    return synth_panel(table1(), grid);
}

// Slope coefficients rebuilt from quadrature term weights.
std::pair<double, double> slope_coeffs(double T0, double T, double k) {
    const int n = 400;
    const double l1 = oracle::lambda_simpson(0, T0, T, k, n);
    const double ls = std::sqrt(oracle::lambda_simpson(0, T0, T, 2 * k, n));
    const double l3 = oracle::lambda_simpson(0, T0, T, 3 * k, n);
    const double lam1 = std::exp(-2 * k * (T - T0)) * l1 - l3;
    return {l3 / (ls * ls * ls), lam1 / (ls * ls * ls)};
}

// Profiled stage-2 objective with the 2x2 normal equations solved by hand.
double profiled_objective(const StageOneFit& fit, double k) {
    double suu = 0, suv = 0, svv = 0, suy = 0, svy = 0, syy = 0;
    for (const auto& f : fit.fits) {
        const auto [u, v] = slope_coeffs(f.T0, f.T, k);
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suy += u * f.a_hat;
        svy += v * f.a_hat;
        syy += f.a_hat * f.a_hat;
    }
    const double det = suu * svv - suv * suv;
    const double a0 = (svv * suy - suv * svy) / det;
    const double a1 = (suu * svy - suv * suy) / det;
    return syy - a0 * suy - a1 * svy;
}

}  // namespace

TEST(Calibration, NoiselessRoundTrip) {
    const auto r = calibrate(panel());
    const auto g = table1();
    ASSERT_TRUE(r.converged);
    EXPECT_NEAR(r.kappa_hat / g.kappa, 1.0, 1e-4);
    EXPECT_NEAR(r.eta_bar_hat / g.eta_bar, 1.0, 1e-6);
    EXPECT_NEAR(r.V3eps_hat, g.V3eps, 1e-8);
    EXPECT_NEAR(r.V0delta_hat, g.V0delta, 1e-8);
}

TEST(Calibration, StageOneIsOrdinaryLeastSquares) {
    const auto p = panel(0.002, 3);
    const auto s1 = stage1_smile_regression(p);
    ASSERT_EQ(s1.fits.size(), p.smiles.size());
    for (std::size_t i = 0; i < p.smiles.size(); ++i) {
        const auto& s = p.smiles[i];
        long double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const long double n = s.strikes.size();
        for (std::size_t l = 0; l < s.strikes.size(); ++l) {
            const long double x = std::log((long double)s.strikes[l] / s.F) / s.T0;
            sx += x;
            sy += s.ivs[l];
            sxx += x * x;
            sxy += x * s.ivs[l];
        }
        const long double a = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        const long double b = (sy - a * sx) / n;
        EXPECT_NEAR(s1.fits[i].a_hat, (double)a, 1e-10);
        EXPECT_NEAR(s1.fits[i].b_hat, (double)b, 1e-12);
    }
}

TEST(Calibration, StageTwoFindsGlobalMinimum) {
    const auto s1 = stage1_smile_regression(panel(0.0005, 11));
    const auto s2 = stage2_term_structure_fit(s1);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 1500; ++i) {
        const double k = std::exp(std::log(1e-3) + i * (std::log(10.0) - std::log(1e-3)) / 1500);
        best = std::min(best, profiled_objective(s1, k));
    }
    EXPECT_LE(profiled_objective(s1, s2.kappa), best * (1.0 + 1e-6) + 1e-18);
}

TEST(Calibration, StageThreeLevelUnderNoise) {
    const auto g = table1();
    const auto s1 = stage1_smile_regression(panel(0.002, 5));
    StageTwoResult truth;
    truth.kappa = g.kappa;
    const double b3 = g.eta_bar * g.eta_bar * g.eta_bar;
    truth.a0 = g.V3eps / b3;
    truth.a1 = g.V0delta / b3;
    const auto s3 = stage3_level_fit(s1, truth);
    EXPECT_TRUE(s3.converged);
    EXPECT_NEAR(s3.b0 / g.eta_bar, 1.0, 0.02);
}

TEST(Calibration, StageThreeClosedFormWithoutCorrections) {
    const auto s1 = stage1_smile_regression(panel(0.002, 8));
    StageTwoResult s2;
    s2.kappa = 0.3;
    const auto s3 = stage3_level_fit(s1, s2);
    double num = 0, den = 0;
    for (const auto& f : s1.fits) {
        const double bb = std::sqrt(oracle::lambda_simpson(0, f.T0, f.T, 0.6));
        num += f.b_hat * bb;
        den += bb * bb;
    }
    EXPECT_NEAR(s3.b0, num / den, 1e-9);
}

TEST(Calibration, RepeatedTenorIsCollinear) {
    QuotePanel p = panel();
    for (auto& s : p.smiles) {
        s.T0 = p.smiles[0].T0;
        s.T = p.smiles[0].T;
    }
    EXPECT_THROW((void)calibrate(p), CollinearityError);
}

TEST(Calibration, Deterministic) {
    const auto p = panel(0.002, 21);
    CalibrationOptions one, many;
    one.workers = 1;
    many.workers = 4;
    const auto a = calibrate(p, one);
    const auto b = calibrate(p, many);
    const auto c = calibrate(p, one);
    EXPECT_EQ(a.kappa_hat, b.kappa_hat);
    EXPECT_EQ(a.eta_bar_hat, b.eta_bar_hat);
    EXPECT_EQ(a.V3eps_hat, c.V3eps_hat);
    EXPECT_EQ(a.V0delta_hat, c.V0delta_hat);
}

TEST(Calibration, MinT0FilterAndWeights) {
    const auto p = panel();
    CalibrationOptions o;
    o.min_t0 = 90.0 / 365.0;
    const auto r = calibrate(p, o);
    EXPECT_EQ(r.stage1.fits.size(), 4u);
    EXPECT_NEAR(r.kappa_hat / table1().kappa, 1.0, 1e-4);

    o.min_t0 = 400.0 / 365.0;
    EXPECT_THROW((void)calibrate(p, o), DomainError);

    CalibrationOptions w;
    w.smile_weights = {1, 2, 3};
    EXPECT_THROW((void)calibrate(p, w), DomainError);
}

TEST(Calibration, TooFewSmiles) {
    QuotePanel p = panel();
    p.smiles.resize(2);
    EXPECT_THROW((void)calibrate(p), DomainError);
}

TEST(Calibration, DegenerateSmileExcluded) {
    QuotePanel p = panel();
    Smile s = p.smiles[0];
    for (auto& k : s.strikes) k = s.F;  // one strike repeated
    s.strikes[0] *= 1.0 + 1e-14;
    s.strikes[1] *= 1.0 - 1e-14;
    p.smiles.push_back(s);
    const auto r = calibrate(p);
    EXPECT_EQ(r.stage1.fits.size(), 6u);
    ASSERT_FALSE(r.diagnostics.empty());
    EXPECT_NE(r.diagnostics.front().find("degenerate"), std::string::npos);
}
