#pragma once

// Model and driver presets addressable from configs.  Constants are desk-scale
// choices; every entry passes its own validation predicate on load.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "driver_spec.hpp"
#include "state_model.hpp"

namespace bsdelab {

inline StateModel make_state_model(const std::string& id) {
    auto zero_grad_sigma = [](int d, int m) {
        return [d, m](double, const VectorXd&) {
            return std::vector<MatrixXd>(d, MatrixXd::Zero(d, m));
        };
    };

    if (id == "brownian-1d") {
        StateModel mdl;
        mdl.id = id;
        mdl.dim_state = 1;
        mdl.dim_noise = 1;
        mdl.A = MatrixXd::Zero(1, 1);
        mdl.b = [](double, const VectorXd&) { return VectorXd::Zero(1); };
        mdl.sigma = [](double, const VectorXd&) { return MatrixXd::Identity(1, 1); };
        mdl.grad_b = [](double, const VectorXd&) { return MatrixXd::Zero(1, 1); };
        mdl.grad_sigma = zero_grad_sigma(1, 1);
        mdl.lipschitz_L = 1.0;
        return mdl;
    }
    if (id == "ou-1d") {
        // dX = -a X dt + s dW via the semigroup: A = -a, b = 0, sigma = s.
        const double a = 1.0, s = 0.5;
        StateModel mdl;
        mdl.id = id;
        mdl.dim_state = 1;
        mdl.dim_noise = 1;
        mdl.A = -a * MatrixXd::Identity(1, 1);
        mdl.b = [](double, const VectorXd&) { return VectorXd::Zero(1); };
        mdl.sigma = [s](double, const VectorXd&) {
            return s * MatrixXd::Identity(1, 1);
        };
        mdl.grad_b = [](double, const VectorXd&) { return MatrixXd::Zero(1, 1); };
        mdl.grad_sigma = zero_grad_sigma(1, 1);
        mdl.lipschitz_L = 1.0;
        return mdl;
    }
    if (id == "linear-multi-d") {
        StateModel mdl;
        mdl.id = id;
        mdl.dim_state = 2;
        mdl.dim_noise = 2;
        mdl.A = MatrixXd{{0.0, -0.5}, {0.25, 0.0}};
        const MatrixXd B{{-0.2, 0.1}, {0.05, -0.3}};
        const MatrixXd S{{0.3, 0.0}, {0.1, 0.2}};
        mdl.b = [B](double, const VectorXd& x) { return (B * x).eval(); };
        mdl.sigma = [S](double, const VectorXd&) { return S; };
        mdl.grad_b = [B](double, const VectorXd&) { return B; };
        mdl.grad_sigma = zero_grad_sigma(2, 2);
        mdl.lipschitz_L = 0.5;
        return mdl;
    }
    if (id == "bounded-nonlinear") {
        StateModel mdl;
        mdl.id = id;
        mdl.dim_state = 1;
        mdl.dim_noise = 1;
        mdl.A = MatrixXd::Zero(1, 1);
        mdl.b = [](double, const VectorXd& x) {
            VectorXd v(1);
            v(0) = 0.5 * std::tanh(x(0));
            return v;
        };
        mdl.sigma = [](double, const VectorXd& x) {
            MatrixXd s(1, 1);
            s(0, 0) = 0.6 + 0.2 * std::tanh(x(0));
            return s;
        };
        mdl.grad_b = [](double, const VectorXd& x) {
            MatrixXd g(1, 1);
            const double c = std::cosh(x(0));
            g(0, 0) = 0.5 / (c * c);
            return g;
        };
        mdl.grad_sigma = [](double, const VectorXd& x) {
            MatrixXd g(1, 1);
            const double c = std::cosh(x(0));
            g(0, 0) = 0.2 / (c * c);
            return std::vector<MatrixXd>{g};
        };
        mdl.lipschitz_L = 1.0;
        return mdl;
    }
    throw std::domain_error("unknown state model '" + id + "'");
}

inline DriverSpec make_driver(const std::string& id) {
    using Eigen::VectorXd;
    auto phi_tanh = [](const VectorXd& x) { return std::tanh(x(0)); };
    auto grad_phi_tanh = [](const VectorXd& x) {
        VectorXd g = VectorXd::Zero(x.size());
        const double c = std::cosh(x(0));
        g(0) = 1.0 / (c * c);
        return g;
    };

    if (id == "zero") {
        DriverSpec drv;
        drv.id = id;
        drv.F = [](double, const VectorXd&, double, const VectorXd&) { return 0.0; };
        drv.Phi = phi_tanh;
        drv.phi_bound = 1.0;
        drv.C_growth = 1.0;
        drv.alpha = 0.5;
        drv.n_poly = 0;
        drv.grad_x_F = [](double, const VectorXd& x, double, const VectorXd&) {
            return VectorXd::Zero(x.size()).eval();
        };
        drv.grad_y_F = [](double, const VectorXd&, double, const VectorXd&) {
            return 0.0;
        };
        drv.grad_z_F = [](double, const VectorXd&, double, const VectorXd& z) {
            return VectorXd::Zero(z.size()).eval();
        };
        drv.grad_Phi = grad_phi_tanh;
        return drv;
    }
    if (id == "pure-quadratic-gamma") {
        // F = (gamma/2)|z|^2 with gamma = 1: the Cole-Hopf model.
        const double gamma = 1.0;
        DriverSpec drv;
        drv.id = id;
        drv.F = [gamma](double, const VectorXd&, double, const VectorXd& z) {
            return 0.5 * gamma * z.squaredNorm();
        };
        drv.Phi = phi_tanh;
        drv.phi_bound = 1.0;
        drv.C_growth = std::max(1.0, 0.5 * gamma);
        drv.alpha = 0.5;
        drv.n_poly = 0;
        drv.grad_x_F = [](double, const VectorXd& x, double, const VectorXd&) {
            return VectorXd::Zero(x.size()).eval();
        };
        drv.grad_y_F = [](double, const VectorXd&, double, const VectorXd&) {
            return 0.0;
        };
        drv.grad_z_F = [gamma](double, const VectorXd&, double, const VectorXd& z) {
            return (gamma * z).eval();
        };
        drv.grad_Phi = grad_phi_tanh;
        return drv;
    }
    if (id == "bounded-smooth") {
        // F = c (sin x_0 + tanh y + |z|^2/2), smooth with bounded x/y parts.
        const double c = 0.3;
        DriverSpec drv;
        drv.id = id;
        drv.F = [c](double, const VectorXd& x, double y, const VectorXd& z) {
            return c * (std::sin(x(0)) + std::tanh(y) + 0.5 * z.squaredNorm());
        };
        drv.Phi = phi_tanh;
        drv.phi_bound = 1.0;
        drv.C_growth = 2.0 * c + 0.5;
        drv.alpha = 0.5;
        drv.n_poly = 0;
        drv.grad_x_F = [c](double, const VectorXd& x, double, const VectorXd&) {
            VectorXd g = VectorXd::Zero(x.size());
            g(0) = c * std::cos(x(0));
            return g;
        };
        drv.grad_y_F = [c](double, const VectorXd&, double y, const VectorXd&) {
            const double ch = std::cosh(y);
            return c / (ch * ch);
        };
        drv.grad_z_F = [c](double, const VectorXd&, double, const VectorXd& z) {
            return (c * z).eval();
        };
        drv.grad_Phi = grad_phi_tanh;
        return drv;
    }
    throw std::domain_error("unknown driver '" + id + "'");
}

inline std::vector<std::string> model_catalog() {
    return {"brownian-1d", "ou-1d", "linear-multi-d", "bounded-nonlinear"};
}

inline std::vector<std::string> driver_catalog() {
    return {"zero", "pure-quadratic-gamma", "bounded-smooth"};
}

} // namespace bsdelab
