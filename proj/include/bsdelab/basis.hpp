#pragma once

// Regression basis: tensor products of 1-d polynomials in per-node
// standardized coordinates z = (x - mean)/std, up to a total degree.
// Coordinates with vanishing sample spread contribute only their constant
// (the first solver node, where X_0 = x0 exactly, degenerates to a plain
// mean -- by construction, not by special-casing the caller).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace bsdelab {

struct BasisSpec {
    std::string family = "hermite"; // "hermite" | "monomial"
    int degree = 3;
    double ridge = 1e-10;
};

inline std::string basis_id(const BasisSpec& spec) {
    return spec.family + "-deg" + std::to_string(spec.degree);
}

namespace detail {

// Probabilists' Hermite He_j.
inline double hermite_1d(int j, double z) {
    double h0 = 1.0, h1 = z;
    if (j == 0) return h0;
    for (int i = 1; i < j; ++i) {
        const double h2 = z * h1 - i * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

inline double poly_1d(const std::string& family, int j, double z) {
    if (family == "hermite") return hermite_1d(j, z);
    if (family == "monomial") return std::pow(z, j);
    throw std::domain_error("basis family '" + family + "' unknown");
}

// All multi-indices over `dims` coordinates with total degree in [1, degree].
inline void enumerate_indices(int dims, int degree,
                              std::vector<std::vector<int>>& out,
                              std::vector<int>& cur, int pos, int left) {
    if (pos == dims) {
        if (left < degree) out.push_back(cur); // total degree >= 1
        return;
    }
    for (int e = 0; e <= left; ++e) {
        cur[pos] = e;
        enumerate_indices(dims, degree, out, cur, pos + 1, left - e);
    }
    cur[pos] = 0;
}

} // namespace detail

// Design matrix for one grid node: first column constant, then one column per
// multi-index over the non-degenerate coordinates.
inline Eigen::MatrixXd build_design(const Eigen::MatrixXd& Xk,
                                    const BasisSpec& spec) {
    const int n = static_cast<int>(Xk.rows());
    const int d = static_cast<int>(Xk.cols());

    std::vector<int> active;
    Eigen::VectorXd mean(d), sd(d);
    for (int c = 0; c < d; ++c) {
        mean(c) = Xk.col(c).mean();
        sd(c) = std::sqrt((Xk.col(c).array() - mean(c)).square().sum() /
                          std::max(1, n - 1));
        if (sd(c) > 1e-12) active.push_back(c);
    }

    std::vector<std::vector<int>> idx;
    if (!active.empty()) {
        std::vector<int> cur(active.size(), 0);
        detail::enumerate_indices(static_cast<int>(active.size()), spec.degree,
                                  idx, cur, 0, spec.degree);
    }

    Eigen::MatrixXd B(n, 1 + idx.size());
    B.col(0).setOnes();
    for (size_t f = 0; f < idx.size(); ++f)
        for (int i = 0; i < n; ++i) {
            double v = 1.0;
            for (size_t a = 0; a < active.size(); ++a) {
                const int c = active[a];
                if (idx[f][a])
                    v *= detail::poly_1d(spec.family, idx[f][a],
                                         (Xk(i, c) - mean(c)) / sd(c));
            }
            B(i, 1 + f) = v;
        }
    return B;
}

} // namespace bsdelab
