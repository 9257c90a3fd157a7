#pragma once

// Affine-driver backward solver and the truncation scheme for
// stochastic-Lipschitz linear BSDEs
//   -dY = (a Y + b.Z + inhom) dt - Z dW,  Y_T = xi,
// with per-path per-step coefficient processes dominated by K_t:
// a <= const K^{2 alpha}, |b| <= const K, K >= 1.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "bsde_solution.hpp"
#include "errors.hpp"
#include "forward_paths.hpp"
#include "regression.hpp"
#include "time_grid.hpp"

namespace bsdelab {

struct LinearCoeffs {
    Eigen::MatrixXd a;              // n x K
    std::vector<Eigen::MatrixXd> b; // K entries, n x m
    Eigen::MatrixXd inhom;          // n x K
    Eigen::VectorXd terminal;       // n
    Eigen::MatrixXd Kproc;          // n x K, >= 1 samplewise
    Eigen::MatrixXd f_mag;          // n x K, inhomogeneity magnitude
};

// Samplewise domination checks. `c` is the structural constant tying the
// coefficients to K; alpha the stochastic-Lipschitz exponent.
inline void validate_linear_coeffs(const LinearCoeffs& lin, double alpha,
                                   double c = 1.0) {
    const double slack = 1.0 + 1e-9;
    const int n = static_cast<int>(lin.a.rows());
    const int K = static_cast<int>(lin.a.cols());
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < n; ++i) {
            const double Ki = lin.Kproc(i, k);
            if (!(Ki >= 1.0))
                throw std::domain_error("LinearCoeffs: K process below 1");
            if (lin.a(i, k) > c * std::pow(Ki, 2.0 * alpha) * slack)
                throw std::domain_error(
                    "LinearCoeffs: a exceeds c K^{2 alpha} at step " +
                    std::to_string(k));
            if (lin.b[k].row(i).norm() > c * Ki * slack)
                throw std::domain_error("LinearCoeffs: |b| exceeds c K at step " +
                                        std::to_string(k));
        }
}

// Backward regression for the affine driver; the y-update is the exact
// per-path solve of y = cont + dt (a y + b.z + inhom), no Picard needed.
// `active` masks coefficients per path and step (truncation); pass empty for
// the plain solver.
inline BsdeSolution solve_linear_bsde(const Eigen::VectorXd& xi,
                                      const LinearCoeffs& lin,
                                      const PathBatch& batch,
                                      const TimeGrid& grid,
                                      const BasisSpec& basis,
                                      const Eigen::MatrixXi& active = {}) {
    const int n = batch.n_paths, K = grid.K, m = batch.dim_noise();
    if (xi.size() != n || lin.a.rows() != n || lin.a.cols() != K)
        throw shape_error("solve_linear_bsde: coefficient shape mismatch");
    const bool masked = active.size() > 0;

    BsdeSolution sol;
    sol.basis_id = basis_id(basis);
    sol.Y.resize(n, K + 1);
    sol.Z.assign(K, Eigen::MatrixXd(n, m));
    sol.Y.col(K) = xi;
    sol.picard_iters.assign(K, 1);

    for (int k = K - 1; k >= 0; --k) {
        const double dt = grid.dt(k);
        NodeRegression reg = make_node_regression(batch.X[k], basis);
        sol.max_condition = std::max(sol.max_condition, reg.condition());
        for (int c = 0; c < m; ++c)
            sol.Z[k].col(c) =
                reg.fit(sol.Y.col(k + 1).cwiseProduct(batch.dW[k].col(c))) / dt;
        const Eigen::VectorXd cont = reg.fit(sol.Y.col(k + 1));
        for (int i = 0; i < n; ++i) {
            const bool on = !masked || active(i, k) != 0;
            const double ai = on ? lin.a(i, k) : 0.0;
            const double drift =
                on ? lin.b[k].row(i).dot(sol.Z[k].row(i)) + lin.inhom(i, k)
                   : 0.0;
            if (std::abs(dt * ai) > 0.5)
                throw step_size_error(
                    "solve_linear_bsde: dt*a too large at step " +
                    std::to_string(k));
            sol.Y(i, k) = (cont(i) + dt * drift) / (1.0 - dt * ai);
        }
    }
    return sol;
}

// Discrete stopping index of the truncation scheme: first node where the
// running sum of (f + K^2) dt reaches the level.
inline Eigen::MatrixXi truncation_mask(const LinearCoeffs& lin,
                                       const TimeGrid& grid, double level,
                                       std::vector<int>* tau_index = nullptr) {
    const int n = static_cast<int>(lin.a.rows());
    const int K = grid.K;
    Eigen::MatrixXi active = Eigen::MatrixXi::Ones(n, K);
    if (tau_index) tau_index->assign(n, K);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < K; ++k) {
            s += (lin.f_mag(i, k) + lin.Kproc(i, k) * lin.Kproc(i, k)) *
                 grid.dt(k);
            if (s >= level) {
                for (int j = k; j < K; ++j) active(i, j) = 0;
                if (tau_index) (*tau_index)[i] = k;
                break;
            }
        }
    }
    return active;
}

// Level-`level` truncated problem: terminal datum cut at |xi| <= level,
// coefficients switched off from the discrete stopping index on.
inline BsdeSolution solve_linear_bsde_at_level(const Eigen::VectorXd& xi,
                                               const LinearCoeffs& lin,
                                               const PathBatch& batch,
                                               const TimeGrid& grid,
                                               const BasisSpec& basis,
                                               double level,
                                               std::vector<int>* tau_index = nullptr) {
    Eigen::VectorXd xin = xi;
    for (int i = 0; i < xin.size(); ++i)
        if (std::abs(xin(i)) > level) xin(i) = 0.0;
    const Eigen::MatrixXi active = truncation_mask(lin, grid, level, tau_index);
    return solve_linear_bsde(xin, lin, batch, grid, basis, active);
}

// E[ sup_k |Y_a - Y_b| ]: the sup-statistic used for Cauchy diagnostics.
inline double cauchy_gap(const Eigen::MatrixXd& Ya, const Eigen::MatrixXd& Yb) {
    if (Ya.rows() != Yb.rows() || Ya.cols() != Yb.cols())
        throw shape_error("cauchy_gap: shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < Ya.rows(); ++i)
        acc += (Ya.row(i) - Yb.row(i)).cwiseAbs().maxCoeff();
    return acc / static_cast<double>(Ya.rows());
}

struct TruncatedSolution {
    BsdeSolution sol;
    int level = 0;
    double cauchy_increment = 0.0; // E[sup_k |Y^{(n)} - Y^{(n-1)}|]
    std::vector<int> tau_index;    // per-path discrete stopping index
};

inline TruncatedSolution solve_linear_bsde_truncated(const Eigen::VectorXd& xi,
                                                     const LinearCoeffs& lin,
                                                     const PathBatch& batch,
                                                     const TimeGrid& grid,
                                                     const BasisSpec& basis,
                                                     int n_trunc) {
    if (n_trunc < 1)
        throw std::domain_error("solve_linear_bsde_truncated: n_trunc >= 1");
    TruncatedSolution out;
    out.level = n_trunc;
    out.sol = solve_linear_bsde_at_level(xi, lin, batch, grid, basis,
                                         static_cast<double>(n_trunc),
                                         &out.tau_index);
    if (n_trunc > 1) {
        const BsdeSolution prev = solve_linear_bsde_at_level(
            xi, lin, batch, grid, basis, static_cast<double>(n_trunc - 1));
        out.cauchy_increment = cauchy_gap(out.sol.Y, prev.Y);
    }
    return out;
}

} // namespace bsdelab
