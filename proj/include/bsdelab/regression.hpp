#pragma once

// Ridge-stabilized least squares on a per-node design matrix.  The normal
// equations G = B'B + ridge*n*I are factored once and reused across the
// responses of one backward step (continuation value + one per Z component).

#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "basis.hpp"
#include "errors.hpp"

namespace bsdelab {

class NodeRegression {
  public:
    NodeRegression(Eigen::MatrixXd B, double ridge) : B_(std::move(B)) {
        const int n = static_cast<int>(B_.rows());
        Eigen::MatrixXd G = B_.transpose() * B_;
        G.diagonal().array() += ridge * n;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        cond_ = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
        if (!(cond_ < 1e14))
            throw regression_error(
                "normal equations ill-conditioned, cond = " +
                std::to_string(cond_));
        fac_.compute(G);
    }

    Eigen::VectorXd coefficients(const Eigen::VectorXd& y) const {
        return fac_.solve(B_.transpose() * y);
    }

    Eigen::VectorXd fit(const Eigen::VectorXd& y) const {
        return B_ * coefficients(y);
    }

    double condition() const { return cond_; }
    const Eigen::MatrixXd& design() const { return B_; }

  private:
    Eigen::MatrixXd B_;
    Eigen::LDLT<Eigen::MatrixXd> fac_;
    double cond_ = 0.0;
};

inline NodeRegression make_node_regression(const Eigen::MatrixXd& Xk,
                                           const BasisSpec& spec) {
    return NodeRegression(build_design(Xk, spec), spec.ridge);
}

// Weighted variant for conditional expectations under a re-weighted measure
// (Girsanov interior nodes): minimizes sum_i w_i (y_i - (B c)_i)^2.
class WeightedNodeRegression {
  public:
    WeightedNodeRegression(Eigen::MatrixXd B, const Eigen::VectorXd& w,
                           double ridge)
        : B_(std::move(B)), w_(w) {
        const int n = static_cast<int>(B_.rows());
        Eigen::MatrixXd G = B_.transpose() * w_.asDiagonal() * B_;
        G.diagonal().array() += ridge * n * std::max(1e-300, w_.mean());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        cond_ = (lo > 0.0) ? hi / lo : std::numeric_limits<double>::infinity();
        if (!(cond_ < 1e14))
            throw regression_error(
                "weighted normal equations ill-conditioned, cond = " +
                std::to_string(cond_));
        fac_.compute(G);
    }

    Eigen::VectorXd fit(const Eigen::VectorXd& y) const {
        return B_ * fac_.solve(B_.transpose() * (w_.asDiagonal() * y));
    }

    double condition() const { return cond_; }

  private:
    Eigen::MatrixXd B_;
    Eigen::VectorXd w_;
    Eigen::LDLT<Eigen::MatrixXd> fac_;
    double cond_ = 0.0;
};

} // namespace bsdelab
