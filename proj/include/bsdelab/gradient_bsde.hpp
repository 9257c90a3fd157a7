#pragma once

// The gradient (variational) BSDE: linearize the quadratic driver along a
// solved trajectory,
//   a = grad_y F,  b = grad_z F,  inhom = grad_x F . DX,  xi = grad Phi . DX_T,
// then solve for (G, H) = (grad_x Y h, grad_x Z h) two independent ways:
// backward regression with the affine driver, and the Girsanov closed form
//   e_t G_t = E*[ e_T xi + int_t^T e_s inhom_s ds | F_t ],
// where dP*/dP = stochastic exponential of int b dW.  The two must agree;
// that agreement is the uniqueness statement at estimator level.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "bmo_constants.hpp"
#include "bsde_solution.hpp"
#include "driver_spec.hpp"
#include "errors.hpp"
#include "forward_paths.hpp"
#include "linear_bsde.hpp"
#include "quad_bsde.hpp"
#include "regression.hpp"
#include "time_grid.hpp"

namespace bsdelab {

struct GradientSolution {
    Eigen::MatrixXd G;              // n x (K+1)
    std::vector<Eigen::MatrixXd> Hz; // K entries, n x m
    Eigen::MatrixXd weights;        // n x (K+1): exponential martingale E_k
    Eigen::MatrixXd e_factor;       // n x (K+1): e_k = exp(sum a dt)
    double ess = 0.0;               // effective sample size of E_T
    bool ess_failure = false;       // ESS below 1% of n_paths
};

inline LinearCoeffs assemble_linear_coeffs(const DriverSpec& drv,
                                           const PathBatch& batch,
                                           const BsdeSolution& sol,
                                           const VariationalBatch& var,
                                           const TimeGrid& grid) {
    const int n = batch.n_paths, K = grid.K, m = batch.dim_noise();
    if (sol.Y.rows() != n || var.DX.size() != static_cast<size_t>(K + 1))
        throw shape_error("assemble_linear_coeffs: input shape mismatch");

    LinearCoeffs lin;
    lin.a.resize(n, K);
    lin.b.assign(K, Eigen::MatrixXd(n, m));
    lin.inhom.resize(n, K);
    lin.terminal.resize(n);
    lin.Kproc.resize(n, K);
    lin.f_mag.resize(n, K);

    // Domination constant: |grad_z F| <= C(1+|z|) <= c K and
    // grad_y F <= C(1+|z|)^{2a} <= (c(1+|z|))^{2a} need c >= max(C, C^{1/2a}).
    const double c = std::max({1.0, drv.C_growth,
                               std::pow(drv.C_growth, 1.0 / (2.0 * drv.alpha))});

    for (int k = 0; k < K; ++k) {
        const double t = grid.nodes[k];
        for (int i = 0; i < n; ++i) {
            const Eigen::VectorXd x = batch.X[k].row(i).transpose();
            const Eigen::VectorXd z = sol.Z[k].row(i).transpose();
            const double y = sol.Y(i, k);
            lin.a(i, k) = drv.grad_y_F(t, x, y, z);
            lin.b[k].row(i) = drv.grad_z_F(t, x, y, z).transpose();
            lin.inhom(i, k) =
                drv.grad_x_F(t, x, y, z).dot(var.DX[k].row(i).transpose());
            lin.Kproc(i, k) = std::max(1.0, c * (1.0 + z.norm()));
            lin.f_mag(i, k) = std::abs(lin.inhom(i, k));
        }
    }
    for (int i = 0; i < batch.n_paths; ++i)
        lin.terminal(i) = drv.grad_Phi(batch.X[K].row(i).transpose())
                              .dot(var.DX[K].row(i).transpose());
    return lin;
}

inline GradientSolution solve_gradient_regression(const LinearCoeffs& lin,
                                                  const PathBatch& batch,
                                                  const TimeGrid& grid,
                                                  const BasisSpec& basis) {
    BsdeSolution s = solve_linear_bsde(lin.terminal, lin, batch, grid, basis);
    GradientSolution g;
    g.G = std::move(s.Y);
    g.Hz = std::move(s.Z);
    g.weights = Eigen::MatrixXd::Ones(batch.n_paths, grid.K + 1);
    g.e_factor = Eigen::MatrixXd::Ones(batch.n_paths, grid.K + 1);
    g.ess = batch.n_paths;
    return g;
}

// Girsanov weight paths for a given b process: E_k = exp(sum_{j<k} b_j.dW_j -
// |b_j|^2 dt_j / 2).  Shared by the gradient solver and the reverse-Holder
// check.
inline Eigen::MatrixXd girsanov_weights(const LinearCoeffs& lin,
                                        const PathBatch& batch,
                                        const TimeGrid& grid) {
    const int n = batch.n_paths, K = grid.K;
    Eigen::MatrixXd logw = Eigen::MatrixXd::Zero(n, K + 1);
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < n; ++i)
            logw(i, k + 1) = logw(i, k) + lin.b[k].row(i).dot(batch.dW[k].row(i)) -
                             0.5 * lin.b[k].row(i).squaredNorm() * grid.dt(k);
    return logw.array().exp();
}

inline GradientSolution solve_gradient_girsanov(const LinearCoeffs& lin,
                                                const PathBatch& batch,
                                                const TimeGrid& grid,
                                                const BasisSpec& basis = {}) {
    const int n = batch.n_paths, K = grid.K, m = batch.dim_noise();
    GradientSolution g;
    g.weights = girsanov_weights(lin, batch, grid);
    g.e_factor.resize(n, K + 1);
    g.e_factor.col(0).setOnes();
    for (int k = 0; k < K; ++k)
        g.e_factor.col(k + 1) =
            g.e_factor.col(k).array() * (lin.a.col(k).array() * grid.dt(k)).exp();

    const Eigen::VectorXd wT = g.weights.col(K);
    const double sw = wT.sum();
    g.ess = sw * sw / wT.squaredNorm();
    g.ess_failure = g.ess < 0.01 * n;

    // Discounted payload from node k on: V_k = e_T xi + sum_{j>=k} e_j f_j dt_j.
    Eigen::MatrixXd V(n, K + 1);
    V.col(K) = g.e_factor.col(K).cwiseProduct(lin.terminal);
    for (int k = K - 1; k >= 0; --k)
        V.col(k) = V.col(k + 1) +
                   g.e_factor.col(k).cwiseProduct(lin.inhom.col(k)) * grid.dt(k);

    g.G.resize(n, K + 1);
    g.G.col(K) = lin.terminal;
    // Node 0 is deterministic: plain importance-sampled mean (E[E_T] = 1).
    g.G.col(0).setConstant(wT.dot(V.col(0)) / n);
    for (int k = 1; k < K; ++k) {
        // E*[V_k | F_k] / e_k by weighted regression, weights E_T / E_k.
        const Eigen::VectorXd w = wT.cwiseQuotient(g.weights.col(k));
        WeightedNodeRegression reg(build_design(batch.X[k], basis), w,
                                   basis.ridge);
        g.G.col(k) = reg.fit(V.col(k)).cwiseQuotient(g.e_factor.col(k));
    }

    // H from the martingale-increment regression on the Girsanov G field.
    g.Hz.assign(K, Eigen::MatrixXd(n, m));
    for (int k = 0; k < K; ++k) {
        NodeRegression reg = make_node_regression(batch.X[k], basis);
        for (int c = 0; c < m; ++c)
            g.Hz[k].col(c) =
                reg.fit(g.G.col(k + 1).cwiseProduct(batch.dW[k].col(c))) /
                grid.dt(k);
    }
    return g;
}

// Central difference of the quadratic solver's Y_0 in direction h, common
// random numbers: the desk-scale difference quotient.
inline double finite_difference_gradient(const DriverSpec& drv,
                                         const StateModel& model,
                                         const TimeGrid& grid,
                                         const Eigen::VectorXd& x0,
                                         const Eigen::VectorXd& h, double eps,
                                         uint64_t seed, const BasisSpec& basis,
                                         int n_paths) {
    if (!(eps > 0.0))
        throw std::domain_error("finite_difference_gradient: eps must be > 0");
    auto y0 = [&](const Eigen::VectorXd& x) {
        const PathBatch batch = simulate_forward(model, grid, n_paths, x, seed);
        return solve_quadratic_bsde(drv, batch, grid, basis).Y.col(0).mean();
    };
    return (y0(x0 + eps * h) - y0(x0 - eps * h)) / (2.0 * eps);
}

// Empirical reverse-Holder diagnostics for the weight martingale: per node,
// the mean of (E_T/E_k)^q (matches the closed form when |b| is constant) and
// the max fitted conditional; overall pass versus K(q,N) with 25% MC slack.
struct ReverseHolderReport {
    double q = 0.0;
    double K_bound = 0.0;
    double ceiling = 0.0;              // K_bound * 1.25
    std::vector<double> node_mean;     // K+1 entries (node K trivially 1)
    std::vector<double> node_se;
    std::vector<double> node_max_fitted;
    double max_ratio = 0.0;            // max over nodes and paths
    bool pass = false;
};

inline ReverseHolderReport check_reverse_holder_empirical(
    const Eigen::MatrixXd& weights, double q, const BmoParams& params,
    const BasisSpec& basis = {}) {
    const int n = static_cast<int>(weights.rows());
    const int K1 = static_cast<int>(weights.cols());
    if (!(q > 1.0) || !(std::log(q - 1.0) < params.log_q_excess))
        throw std::domain_error(
            "check_reverse_holder_empirical: need 1 < q < q_star");

    ReverseHolderReport rep;
    rep.q = q;
    rep.K_bound = reverse_holder_constant(q, params);
    rep.ceiling = 1.25 * rep.K_bound;
    rep.node_mean.assign(K1, 1.0);
    rep.node_se.assign(K1, 0.0);
    rep.node_max_fitted.assign(K1, 1.0);

    const Eigen::VectorXd wT = weights.col(K1 - 1);
    for (int k = 0; k + 1 < K1; ++k) {
        const Eigen::ArrayXd ratio =
            (wT.cwiseQuotient(weights.col(k))).array().pow(q);
        const double mean = ratio.mean();
        const double sd = std::sqrt((ratio - mean).square().sum() /
                                    std::max(1, n - 1));
        rep.node_mean[k] = mean;
        rep.node_se[k] = sd / std::sqrt(static_cast<double>(n));

        // Conditional fit on the node weight (log scale): E_k is the
        // F_k-measurable covariate available to this check.
        Eigen::MatrixXd u = weights.col(k).array().log().matrix();
        NodeRegression reg(build_design(u, basis), basis.ridge);
        const Eigen::VectorXd fitted = reg.fit(ratio.matrix());
        rep.node_max_fitted[k] = std::max(0.0, fitted.maxCoeff());
        rep.max_ratio = std::max(rep.max_ratio, rep.node_max_fitted[k]);
    }
    rep.pass = rep.max_ratio <= rep.ceiling;
    return rep;
}

} // namespace bsdelab
