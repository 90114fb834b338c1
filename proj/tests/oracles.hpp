#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls the closed forms under test.

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

// Window mean of e^{-k (T - s)} over s in [t, T0], composite Simpson.
inline double lambda_simpson(double t, double T0, double T, double k, int n = 4000) {
    const double h = (T0 - t) / n;
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double s = t + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        sum += w * std::exp(-k * (T - s));
    }
    return sum * h / 3.0 / (T0 - t);
}

// Plain Black-76 call written out from the textbook formula. The long double
// instance feeds the finite-difference oracles, where roundoff matters.
template <class R = double>
R black_call(R F, R K, R sigma, R T, R r = 0) {
    using std::erfc, std::exp, std::log, std::sqrt;
    const R sd = sigma * sqrt(T);
    const R d1 = (log(F / K) + R(0.5) * sd * sd) / sd;
    const R d2 = d1 - sd;
    const R root2 = sqrt(R(2));
    auto N = [&](R x) { return R(0.5) * erfc(-x / root2); };
    return exp(-r * T) * (F * N(d1) - K * N(d2));
}

template <class R = double>
R black_put(R F, R K, R sigma, R T, R r = 0) {
    using std::erfc, std::exp, std::log, std::sqrt;
    const R sd = sigma * sqrt(T);
    const R d1 = (log(F / K) + R(0.5) * sd * sd) / sd;
    const R d2 = d1 - sd;
    const R root2 = sqrt(R(2));
    auto N = [&](R x) { return R(0.5) * erfc(-x / root2); };
    return exp(-r * T) * (K * N(-d2) - F * N(-d1));
}

// Derivatives in y = log x by central differences with one Richardson step.
// D2 = x^2 d^2/dx^2 = d_yy - d_y and D1 D2 = d_yyy - d_yy.
struct LogDerivs {
    double d1 = 0.0, d2 = 0.0, d3 = 0.0;
};

inline LogDerivs log_derivs(const std::function<long double(long double)>& f_of_y, long double y,
                            long double h) {
    auto once = [&](long double s) {
        const long double fm2 = f_of_y(y - 2 * s), fm = f_of_y(y - s), f0 = f_of_y(y), fp = f_of_y(y + s),
                     fp2 = f_of_y(y + 2 * s);
        struct { long double d1, d2, d3; } d;
        d.d1 = (fp - fm) / (2 * s);
        d.d2 = (fp - 2 * f0 + fm) / (s * s);
        d.d3 = (fp2 - 2 * fp + 2 * fm - fm2) / (2 * s * s * s);
        return d;
    };
    const auto a = once(h), b = once(h / 2);
    return {static_cast<double>((4 * b.d1 - a.d1) / 3), static_cast<double>((4 * b.d2 - a.d2) / 3),
            static_cast<double>((4 * b.d3 - a.d3) / 3)};
}

}  // namespace oracle
