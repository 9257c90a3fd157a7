#pragma once

// Probabilistic verification of the mild-solution machinery: u(t,x) = Y_t^{t,x}
// from the solver, the transition semigroup P_{t,tau}[phi](x) = E[phi(X_tau)],
// the variation-of-constants identity
//   u(t,x) = P_{t,T}[Phi](x) + int_t^T P_{t,tau}[F(tau,.,u,sigma* grad u)] dtau,
// and the Markov identification Y_s = u(s, X_s), Z_s = sigma* grad_x u(s, X_s).
// The PDE operator itself is never discretized; the mild formula is the only
// contact point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "catalog.hpp"
#include "driver_spec.hpp"
#include "errors.hpp"
#include "forward_paths.hpp"
#include "gradient_bsde.hpp"
#include "quad_bsde.hpp"
#include "quadrature.hpp"
#include "time_grid.hpp"

namespace bsdelab {

struct SolverConfig {
    StateModel model;
    DriverSpec driver;
    double T = 1.0;
    double dt = 0.02;          // step-size target for every grid built here
    int n_paths = 10000;       // outer budget
    uint64_t seed = 12345;
    // the identification checks compare fitted fields POINTWISE, where the
    // solver-default cubic basis leaves visible misfit at wide-spread nodes
    // (tanh saturates, a cubic cannot); degree 5 is this module's default
    BasisSpec basis{"hermite", 5, 1e-10};
    int n_threads = 1;
    // nested-evaluation budgets (defaults sized for a minutes-scale laptop run)
    int n_quad = 8;            // Gauss-Legendre nodes on [t,T]
    int n_sub = 128;           // sampled states per quadrature node
    int n_inner = 1000;        // inner paths for u / grad u at a state
    int n_sub_ident = 64;      // Markov-restart states per check node
    int n_inner_ident = 24000; // inner paths per restart: restart u carries
                               // sd(Phi)/sqrt(n) ~ 3e-3 and grad u ~ 6e-3
                               // noise, which must clear the gap budgets
                               // with real margin
    double y_gap_budget = 1e-2;
    double z_gap_budget = 3e-2;
};

namespace detail {

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t v = seed ^ (salt + 0x9E3779B97f4A7C15ull + (seed << 6) + (seed >> 2));
    v ^= v >> 30;
    v *= 0xBF58476D1CE4E5B9ull;
    v ^= v >> 27;
    v *= 0x94D049BB133111EBull;
    v ^= v >> 31;
    return v;
}

inline TimeGrid subgrid(double t, double T, double dt_target) {
    const int K = std::max(2, static_cast<int>(std::llround((T - t) / dt_target)));
    return make_uniform_grid(t, T, K);
}

struct PointEval {
    double u = 0.0;
    Eigen::VectorXd g; // grad_x u (directional along unit coordinates)
};

// One nested evaluation of u (and optionally grad u) at (t, x) with its own
// seed and path budget.
inline PointEval eval_point(double t, const Eigen::VectorXd& x,
                            const SolverConfig& cfg, int n_paths, uint64_t seed,
                            bool want_grad) {
    PointEval out;
    const int d = cfg.model.dim_state;
    if (t >= cfg.T) {
        out.u = cfg.driver.Phi(x);
        out.g = want_grad ? cfg.driver.grad_Phi(x).eval()
                          : Eigen::VectorXd::Zero(d).eval();
        return out;
    }
    const TimeGrid grid = subgrid(t, cfg.T, cfg.dt);
    const PathBatch batch =
        simulate_forward(cfg.model, grid, n_paths, x, seed, cfg.n_threads);
    const BsdeSolution sol =
        solve_quadratic_bsde(cfg.driver, batch, grid, cfg.basis);
    out.u = sol.Y.col(0).mean();
    out.g = Eigen::VectorXd::Zero(d);
    if (want_grad) {
        for (int l = 0; l < d; ++l) {
            const VariationalBatch var = simulate_variational(
                cfg.model, grid, batch, Eigen::VectorXd::Unit(d, l),
                cfg.n_threads);
            const LinearCoeffs lin =
                assemble_linear_coeffs(cfg.driver, batch, sol, var, grid);
            out.g(l) =
                solve_gradient_regression(lin, batch, grid, cfg.basis).G.col(0).mean();
        }
    }
    return out;
}

// Memo key: (time, state) rounded to 1e-6, plus the seed variant.  A numeric
// device only -- results at equal keys are equal runs, not equal math.
struct MemoKey {
    int64_t t;
    std::vector<int64_t> x;
    uint64_t seed;
    bool operator<(const MemoKey& o) const {
        if (t != o.t) return t < o.t;
        if (x != o.x) return x < o.x;
        return seed < o.seed;
    }
};

inline MemoKey make_key(double t, const Eigen::VectorXd& x, uint64_t seed) {
    MemoKey k;
    k.t = static_cast<int64_t>(std::llround(t * 1e6));
    k.x.resize(x.size());
    for (int i = 0; i < x.size(); ++i)
        k.x[i] = static_cast<int64_t>(std::llround(x(i) * 1e6));
    k.seed = seed;
    return k;
}

using Memo = std::map<MemoKey, PointEval>;

inline const PointEval& eval_memo(Memo& memo, double t, const Eigen::VectorXd& x,
                                  const SolverConfig& cfg, int n_paths,
                                  uint64_t seed, bool want_grad) {
    const MemoKey key = make_key(t, x, seed);
    auto it = memo.find(key);
    if (it == memo.end())
        it = memo.emplace(key, eval_point(t, x, cfg, n_paths, seed, want_grad))
                 .first;
    return it->second;
}

} // namespace detail

// u(t, x) = Y_t^{t,x}: first-node solver value averaged over paths (Y_t is
// deterministic; the average collapses the regression representation).
inline double evaluate_u(double t, const Eigen::VectorXd& x,
                         const SolverConfig& cfg) {
    return detail::eval_point(t, x, cfg, cfg.n_paths, cfg.seed, false).u;
}

struct SemigroupEstimate {
    double value = 0.0;
    double se = 0.0;
};

// P_{t,tau}[phi](x) by plain Monte Carlo with a standard-error report.
template <class PhiFn>
SemigroupEstimate transition_semigroup(PhiFn&& phi, const StateModel& model,
                                       double t, double tau,
                                       const Eigen::VectorXd& x, int n_paths,
                                       uint64_t seed, double dt_target = 0.02) {
    if (!(t <= tau))
        throw std::domain_error("transition_semigroup: need t <= tau");
    SemigroupEstimate est;
    if (tau == t) {
        est.value = phi(x);
        return est;
    }
    const TimeGrid grid = detail::subgrid(t, tau, dt_target);
    const PathBatch batch = simulate_forward(model, grid, n_paths, x, seed);
    Eigen::VectorXd v(n_paths);
    for (int i = 0; i < n_paths; ++i)
        v(i) = phi(batch.X[grid.K].row(i).transpose());
    est.value = v.mean();
    est.se = std::sqrt((v.array() - est.value).square().sum() /
                       std::max(1, n_paths - 1)) /
             std::sqrt(static_cast<double>(n_paths));
    return est;
}

struct MildCheckReport {
    double t = 0.0;
    Eigen::VectorXd x;
    double lhs = 0.0;       // u(t,x)
    double rhs = 0.0;       // P_{t,T}[Phi](x) + integral term
    double terminal_term = 0.0;
    double integral_term = 0.0;
    double residual = 0.0;
    double budget = 0.0;    // 3 SE (outer) + inner-noise probe + quadrature probe
    double se_terminal = 0.0;
    double se_states = 0.0;     // state-sampling error of the integral
    double inner_noise = 0.0;   // dual-seed inner-evaluation spread
    double quad_gap = 0.0;      // |GL(n) - GL(n/2)|
    // nested budget exhaustion (an inner solve ran out of room) does not
    // abort the check: failed states are dropped and the partial report is
    // flagged, never passed
    bool incomplete = false;
    int n_failed_inner = 0;
    bool pass = false;
};

inline MildCheckReport check_mild_formula(double t, const Eigen::VectorXd& x,
                                          const SolverConfig& cfg) {
    MildCheckReport rep;
    rep.t = t;
    rep.x = x;

    // Outer run: lhs and the terminal semigroup term share one batch.
    const TimeGrid grid = detail::subgrid(t, cfg.T, cfg.dt);
    const PathBatch batch = simulate_forward(cfg.model, grid, cfg.n_paths, x,
                                             cfg.seed, cfg.n_threads);
    const BsdeSolution sol = solve_quadratic_bsde(cfg.driver, batch, grid,
                                                  cfg.basis);
    rep.lhs = sol.Y.col(0).mean();
    Eigen::VectorXd phiT(cfg.n_paths);
    for (int i = 0; i < cfg.n_paths; ++i)
        phiT(i) = cfg.driver.Phi(batch.X[grid.K].row(i).transpose());
    rep.terminal_term = phiT.mean();
    rep.se_terminal = std::sqrt((phiT.array() - rep.terminal_term).square().sum() /
                                std::max(1, cfg.n_paths - 1)) /
                      std::sqrt(static_cast<double>(cfg.n_paths));

    // Integral term: for each quadrature node tau_j, sample states of
    // X_{tau_j}^{t,x} and average F(tau, ., u, sigma* grad u) over them, with
    // each u / grad u nested-evaluated twice (independent seeds) so the inner
    // noise is measured rather than assumed.
    detail::Memo memo;
    auto integral_at = [&](int n_quad, double& se_states, double& inner_noise) {
        const QuadratureRule rule = gauss_legendre(n_quad);
        const double mid = 0.5 * (t + cfg.T), half = 0.5 * (cfg.T - t);
        double acc = 0.0, se2 = 0.0, noise = 0.0;
        for (int j = 0; j < n_quad; ++j) {
            const double tau = mid + half * rule.nodes[j];
            const double wj = rule.weights[j] * half;
            const TimeGrid gj = detail::subgrid(t, tau, cfg.dt);
            const PathBatch bj = simulate_forward(
                cfg.model, gj, cfg.n_sub, x,
                detail::mix_seed(cfg.seed, 1000 + j + 17 * n_quad),
                cfg.n_threads);
            std::vector<double> fvals;
            fvals.reserve(cfg.n_sub);
            double noise_acc = 0.0;
            for (int s = 0; s < cfg.n_sub; ++s) {
                const Eigen::VectorXd xs = bj.X[gj.K].row(s).transpose();
                const uint64_t s1 = detail::mix_seed(cfg.seed, 7777);
                const uint64_t s2 = detail::mix_seed(cfg.seed, 9999);
                try {
                    const detail::PointEval& eA = detail::eval_memo(
                        memo, tau, xs, cfg, cfg.n_inner, s1, true);
                    const detail::PointEval& eB = detail::eval_memo(
                        memo, tau, xs, cfg, cfg.n_inner, s2, true);
                    const Eigen::MatrixXd sig = cfg.model.sigma(tau, xs);
                    const double fA = cfg.driver.F(tau, xs, eA.u,
                                                   sig.transpose() * eA.g);
                    const double fB = cfg.driver.F(tau, xs, eB.u,
                                                   sig.transpose() * eB.g);
                    fvals.push_back(0.5 * (fA + fB));
                    noise_acc += 0.5 * (fA - fB) * (fA - fB);
                } catch (const step_size_error&) {
                    // inner budget exhausted at this state: drop it, flag the
                    // report incomplete (contract: partial, never passing)
                    rep.incomplete = true;
                    ++rep.n_failed_inner;
                } catch (const regression_error&) {
                    rep.incomplete = true;
                    ++rep.n_failed_inner;
                }
            }
            const int ns = static_cast<int>(fvals.size());
            if (ns == 0) continue; // node contributes nothing; already flagged
            double fm = 0.0;
            for (double v : fvals) fm += v;
            fm /= ns;
            double fvar = 0.0;
            for (double v : fvals) fvar += (v - fm) * (v - fm);
            const double fsd = std::sqrt(fvar / std::max(1, ns - 1));
            acc += wj * fm;
            se2 += wj * wj * fsd * fsd / ns;
            // per-state inner sd ~ |fA-fB|/sqrt(2); averaging halves over
            // ns states leaves sd/sqrt(2 ns)
            noise += wj * std::sqrt(noise_acc / ns) / std::sqrt(2.0 * ns);
        }
        se_states = std::sqrt(se2);
        inner_noise = noise;
        return acc;
    };

    double se_half = 0.0, noise_half = 0.0;
    rep.integral_term = integral_at(cfg.n_quad, rep.se_states, rep.inner_noise);
    const double integral_half =
        integral_at(std::max(2, cfg.n_quad / 2), se_half, noise_half);
    rep.quad_gap = std::abs(rep.integral_term - integral_half);

    rep.rhs = rep.terminal_term + rep.integral_term;
    rep.residual = std::abs(rep.lhs - rep.rhs);
    rep.budget = 3.0 * rep.se_terminal + 3.0 * rep.se_states +
                 3.0 * rep.inner_noise + rep.quad_gap;
    rep.pass = !rep.incomplete && rep.residual <= rep.budget;
    return rep;
}

struct IdentificationNodeStats {
    double s = 0.0;           // check time
    double y_gap_mean = 0.0;
    double y_gap_max = 0.0;
    double z_gap_mean = 0.0;
    double z_gap_max = 0.0;
};

struct IdentificationReport {
    std::vector<IdentificationNodeStats> nodes;
    double y_budget = 0.0;
    double z_budget = 0.0;
    bool incomplete = false;   // some restart evaluation exhausted its budget
    int n_failed_inner = 0;
    bool pass = false;
};

// Markov identification: one master run from (t,x); at interior check nodes,
// fresh sub-simulations restarted from sampled states give u(s, X_s) and
// sigma* grad u(s, X_s) to compare with the master Y and Z fields.
inline IdentificationReport check_identification(double t,
                                                 const Eigen::VectorXd& x,
                                                 const SolverConfig& cfg) {
    IdentificationReport rep;
    rep.y_budget = cfg.y_gap_budget;
    rep.z_budget = cfg.z_gap_budget;

    const TimeGrid grid = detail::subgrid(t, cfg.T, cfg.dt);
    const PathBatch batch = simulate_forward(cfg.model, grid, cfg.n_paths, x,
                                             cfg.seed, cfg.n_threads);
    const BsdeSolution sol = solve_quadratic_bsde(cfg.driver, batch, grid,
                                                  cfg.basis);

    detail::Memo memo;
    const std::vector<int> check_nodes = {grid.K / 4, grid.K / 2,
                                          (3 * grid.K) / 4};
    const int stride = std::max(1, cfg.n_paths / cfg.n_sub_ident);
    bool ok = true;
    for (int kc : check_nodes) {
        if (kc <= 0 || kc >= grid.K) continue;
        IdentificationNodeStats st;
        st.s = grid.nodes[kc];

        // restart states are kept inside the per-coordinate 5-95% empirical
        // box: at tail states the master regression carries no data, so a
        // pointwise gap there measures basis misfit, not the Markov identity
        const int d = cfg.model.dim_state;
        Eigen::VectorXd lo(d), hi(d);
        for (int c = 0; c < d; ++c) {
            std::vector<double> col(batch.X[kc].col(c).data(),
                                    batch.X[kc].col(c).data() + cfg.n_paths);
            const int ql = static_cast<int>(0.05 * cfg.n_paths);
            const int qh = static_cast<int>(0.95 * cfg.n_paths);
            std::nth_element(col.begin(), col.begin() + ql, col.end());
            lo(c) = col[ql];
            std::nth_element(col.begin(), col.begin() + qh, col.end());
            hi(c) = col[qh];
        }

        int count = 0;
        for (int i = 0; i < cfg.n_paths && count < cfg.n_sub_ident; i += stride) {
            const Eigen::VectorXd xs = batch.X[kc].row(i).transpose();
            bool in_box = true;
            for (int c = 0; c < d; ++c)
                in_box = in_box && lo(c) <= xs(c) && xs(c) <= hi(c);
            if (!in_box) continue;
            try {
                const detail::PointEval& ev = detail::eval_memo(
                    memo, st.s, xs, cfg, cfg.n_inner_ident,
                    detail::mix_seed(cfg.seed, 31337 + kc), true);
                const double ygap = std::abs(sol.Y(i, kc) - ev.u);
                const Eigen::MatrixXd sig = cfg.model.sigma(st.s, xs);
                const double zgap =
                    (sol.Z[kc].row(i).transpose() - sig.transpose() * ev.g)
                        .norm();
                st.y_gap_mean += ygap;
                st.z_gap_mean += zgap;
                st.y_gap_max = std::max(st.y_gap_max, ygap);
                st.z_gap_max = std::max(st.z_gap_max, zgap);
                ++count;
            } catch (const step_size_error&) {
                rep.incomplete = true; // partial report, flagged, never passed
                ++rep.n_failed_inner;
            } catch (const regression_error&) {
                rep.incomplete = true;
                ++rep.n_failed_inner;
            }
        }
        st.y_gap_mean /= std::max(1, count);
        st.z_gap_mean /= std::max(1, count);
        ok = ok && st.y_gap_mean <= rep.y_budget && st.z_gap_mean <= rep.z_budget;
        rep.nodes.push_back(st);
    }
    rep.pass = ok && !rep.incomplete;
    return rep;
}

} // namespace bsdelab
