#pragma once

// Gaussian quadrature rules. Nodes come from the Golub-Welsch eigenproblem;
// weights are Christoffel numbers 1 / sum_k p_k(x_i)^2 over the orthonormal
// polynomials, which keeps tiny tail weights accurate to full relative
// precision.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "futvol/errors.hpp"

namespace futvol {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

template <class Recurrence>
QuadratureRule golub_welsch(int n, const Eigen::VectorXd& offdiag, Recurrence&& orthonormal_sq_sum) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, offdiag, Eigen::EigenvaluesOnly);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        const double x = solver.eigenvalues()[i];
        rule.nodes[i] = x;
        rule.weights[i] = 1.0 / orthonormal_sq_sum(x);
    }
    return rule;
}

}  // namespace detail

/// n-point rule for the weight e^{-x^2} on the real line.
[[nodiscard]] inline QuadratureRule gauss_hermite(int n) {
    detail::require(n >= 1, "gauss_hermite: n >= 1");
    if (n == 1) return {{0.0}, {std::sqrt(std::numbers::pi)}};
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off[k - 1] = std::sqrt(k / 2.0);
    return detail::golub_welsch(n, off, [n](double x) {
        double p_prev = 0.0;
        double p = 1.0 / std::sqrt(std::sqrt(std::numbers::pi));
        double sum = p * p;
        for (int k = 0; k + 1 < n; ++k) {
            const double p_next =
                x * std::sqrt(2.0 / (k + 1)) * p - std::sqrt(static_cast<double>(k) / (k + 1)) * p_prev;
            p_prev = p;
            p = p_next;
            sum += p * p;
        }
        return sum;
    });
}

/// n-point Gauss-Legendre rule on [-1, 1].
[[nodiscard]] inline QuadratureRule gauss_legendre(int n) {
    detail::require(n >= 1, "gauss_legendre: n >= 1");
    if (n == 1) return {{0.0}, {2.0}};
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return detail::golub_welsch(n, off, [n](double x) {
        double p_prev = 1.0;  // P_0
        double p = x;         // P_1
        double sum = 0.5 + 1.5 * x * x;
        for (int k = 1; k + 1 < n; ++k) {
            const double p_next = ((2.0 * k + 1.0) * x * p - k * p_prev) / (k + 1.0);
            p_prev = p;
            p = p_next;
            sum += (2.0 * (k + 1) + 1.0) / 2.0 * p * p;
        }
        return sum;
    });
}

/// E[f(Y)] for Y ~ N(mean, sd^2) with an n-point Gauss-Hermite rule.
template <class F>
[[nodiscard]] double normal_expectation(const QuadratureRule& gh, double mean, double sd, F&& f) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        sum += gh.weights[i] * f(mean + std::numbers::sqrt2 * sd * gh.nodes[i]);
    }
    return sum / std::sqrt(std::numbers::pi);
}

/// Integral of f over [a, b] with a fixed Gauss-Legendre rule.
template <class F>
[[nodiscard]] double integrate(const QuadratureRule& gl, double a, double b, F&& f) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        sum += gl.weights[i] * f(mid + half * gl.nodes[i]);
    }
    return half * sum;
}

}  // namespace futvol
