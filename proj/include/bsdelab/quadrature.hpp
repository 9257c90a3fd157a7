#pragma once

// Gauss rules via Golub-Welsch: eigen-decompose the symmetric Jacobi matrix
// of the three-term recurrence; nodes are eigenvalues, weights are
// mu0 * (first eigenvector component)^2.

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace bsdelab {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

inline QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
    const int n = static_cast<int>(offdiag.size()) + 1;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        J(i, i + 1) = offdiag(i);
        J(i + 1, i) = offdiag(i);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        rule.nodes[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        rule.weights[i] = mu0 * v0 * v0;
    }
    return rule;
}

} // namespace detail

// Physicists' Gauss-Hermite: integrates f against exp(-x^2) on R.
// Recurrence offdiagonal sqrt(k/2), mu0 = sqrt(pi).
inline QuadratureRule gauss_hermite(int n) {
    if (n < 1) throw std::domain_error("gauss_hermite: n must be >= 1");
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(k / 2.0);
    return detail::golub_welsch(off, std::sqrt(std::numbers::pi));
}

// Gauss-Legendre on [-1,1]: offdiagonal k/sqrt(4k^2-1), mu0 = 2.
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::domain_error("gauss_legendre: n must be >= 1");
    Eigen::VectorXd off(n - 1);
    for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    return detail::golub_welsch(off, 2.0);
}

// Rules are immutable once built; cache them (the 200-node Hermite rule sits
// inside nested-evaluation loops).
inline const QuadratureRule& gauss_hermite_cached(int n) {
    static std::mutex mtx;
    static std::map<int, QuadratureRule> cache;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_hermite(n)).first;
    return it->second;
}

// E[f(m + s W)] with W standard normal, via n-node Gauss-Hermite.
template <class F>
double gauss_expectation(F&& f, double mean, double stddev, int n = 200) {
    static_assert(std::is_invocable_r_v<double, F, double>);
    const QuadratureRule& rule = gauss_hermite_cached(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += rule.weights[i] *
               f(mean + std::numbers::sqrt2 * stddev * rule.nodes[i]);
    return acc / std::sqrt(std::numbers::pi);
}

// int_a^b f via n-node Gauss-Legendre.
template <class F>
double gauss_integral(F&& f, double a, double b, int n = 8) {
    const QuadratureRule rule = gauss_legendre(n);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return acc * half;
}

} // namespace bsdelab
