#pragma once

// Finite-dimensional truncation of the forward equation: state dimension d,
// noise dimension m, semigroup generator A, drift b, diffusion sigma, their
// x-Jacobians, and a declared Lipschitz/growth constant.  The semigroup
// singularity exponent of the continuous theory is 0 here: e^{sA} sigma has
// no singularity in finite dimension.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"
#include "rng.hpp"

namespace bsdelab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct StateModel {
    std::string id;
    int dim_state = 1;
    int dim_noise = 1;
    MatrixXd A; // d x d generator
    std::function<VectorXd(double, const VectorXd&)> b;
    std::function<MatrixXd(double, const VectorXd&)> sigma;       // d x m
    std::function<MatrixXd(double, const VectorXd&)> grad_b;      // d x d
    // grad_sigma[l] = d sigma / d x_l, each d x m.
    std::function<std::vector<MatrixXd>(double, const VectorXd&)> grad_sigma;
    double lipschitz_L = 1.0;
};

inline MatrixXd semigroup_step(const StateModel& model, double dt) {
    if (model.A.isZero(0.0))
        return MatrixXd::Identity(model.dim_state, model.dim_state);
    return (dt * model.A).exp();
}

// Sampled validation of the declared structure: Lipschitz and linear-growth
// bounds on probe pairs, Jacobians against central differences (rel 1e-4).
inline void validate_state_model(const StateModel& model, int n_probes = 64,
                                 uint64_t seed = 0xb5de1ab) {
    const int d = model.dim_state;
    auto probe_vec = [&](uint64_t path, uint32_t step) {
        VectorXd x(d);
        for (int i = 0; i < d; ++i)
            x(i) = 2.0 * gaussian_draw(seed, path, step, i);
        return x;
    };
    const double slack = 1.0 + 1e-9;
    for (int p = 0; p < n_probes; ++p) {
        const double t = 0.5 + 0.5 * std::tanh(gaussian_draw(seed, p, 1000, 0));
        const VectorXd x = probe_vec(p, 0), y = probe_vec(p, 1);
        const VectorXd bx = model.b(t, x);
        if ((bx - model.b(t, y)).norm() >
            model.lipschitz_L * (x - y).norm() * slack)
            throw std::domain_error("state model '" + model.id +
                                    "': drift violates declared Lipschitz bound");
        if (bx.norm() > model.lipschitz_L * (1.0 + x.norm()) * slack)
            throw std::domain_error("state model '" + model.id +
                                    "': drift violates declared growth bound");

        const MatrixXd gb = model.grad_b(t, x);
        const std::vector<MatrixXd> gs = model.grad_sigma(t, x);
        for (int l = 0; l < d; ++l) {
            const double eps = 1e-6 * (1.0 + std::abs(x(l)));
            VectorXd xp = x, xm = x;
            xp(l) += eps;
            xm(l) -= eps;
            const VectorXd db = (model.b(t, xp) - model.b(t, xm)) / (2.0 * eps);
            if ((db - gb.col(l)).norm() > 1e-4 * (1.0 + gb.col(l).norm()))
                throw std::domain_error("state model '" + model.id +
                                        "': grad_b mismatches finite differences");
            const MatrixXd ds =
                (model.sigma(t, xp) - model.sigma(t, xm)) / (2.0 * eps);
            if ((ds - gs[l]).norm() > 1e-4 * (1.0 + gs[l].norm()))
                throw std::domain_error("state model '" + model.id +
                                        "': grad_sigma mismatches finite differences");
        }
    }
}

} // namespace bsdelab
