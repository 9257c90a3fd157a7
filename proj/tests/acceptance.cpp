// Desk-scale acceptance battery.  Each criterion is an independent runner
// printing one [PASS]/[FAIL] summary line (plus indented evidence); the
// process exit code is the number of failed criteria.  `acceptance <k>` runs
// a single criterion, no argument runs all nine.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bsdelab/bmo_constants.hpp"
#include "bsdelab/catalog.hpp"
#include "bsdelab/forward_paths.hpp"
#include "bsdelab/gradient_bsde.hpp"
#include "bsdelab/kolmogorov.hpp"
#include "bsdelab/linear_bsde.hpp"
#include "bsdelab/quad_bsde.hpp"
#include "bsdelab/rng.hpp"
#include "bsdelab/time_grid.hpp"

namespace fs = std::filesystem;
using namespace bsdelab;
using Eigen::VectorXd;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

bool check(bool ok, const std::string& what) {
    if (!ok) std::printf("       violated: %s\n", what.c_str());
    return ok;
}

// ---------------------------------------------------------------- criterion 1
// Regression solver vs the exponential-transform oracle on F = |z|^2/2,
// Phi = tanh, X = x + W, T = 1, at x in {-1, 0, 1}.

bool criterion_1() {
    const auto model = make_state_model("brownian-1d");
    const auto drv = make_driver("pure-quadratic-gamma");
    const TimeGrid grid = make_uniform_grid(0.0, 1.0, 50);
    const int n = 100000;
    const double tol = 2e-2, time_cap = 60.0;
    bool ok = true;
    for (double x0 : {-1.0, 0.0, 1.0}) {
        const auto t0 = std::chrono::steady_clock::now();
        const PathBatch batch = simulate_forward(
            model, grid, n, VectorXd::Constant(1, x0), 41001);
        const BsdeSolution sol = solve_quadratic_bsde(drv, batch, grid, {});
        const double y0 = sol.Y.col(0).mean();
        const double ref = cole_hopf_oracle(
            [](double v) { return std::tanh(v); }, x0, 0.0, 1.0, 1.0);
        const double el = seconds_since(t0);
        std::printf("       x=%+.0f  Y0=%.6f  oracle=%.6f  |diff|=%.2e  %.1fs\n",
                    x0, y0, ref, std::abs(y0 - ref), el);
        ok &= check(std::abs(y0 - ref) <= tol, "|Y0 - oracle| <= 2e-2");
        ok &= check(el <= time_cap, "runtime <= 60 s per point");
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 2
// Linearized-gradient routes agree with each other and with the transform
// oracle at x = 0 (pairwise 3e-2, common noise for the quotient).

bool criterion_2() {
    const auto model = make_state_model("brownian-1d");
    const auto drv = make_driver("pure-quadratic-gamma");
    const TimeGrid grid = make_uniform_grid(0.0, 1.0, 32);
    const int n = 20000;
    const uint64_t seed = 42002;
    const VectorXd x0 = VectorXd::Zero(1);
    const VectorXd h = VectorXd::Ones(1);

    const PathBatch batch = simulate_forward(model, grid, n, x0, seed);
    const BsdeSolution sol = solve_quadratic_bsde(drv, batch, grid, {});
    const VariationalBatch var = simulate_variational(model, grid, batch, h);
    const LinearCoeffs lin = assemble_linear_coeffs(drv, batch, sol, var, grid);

    std::vector<std::pair<std::string, double>> vals;
    vals.emplace_back("regression",
                      solve_gradient_regression(lin, batch, grid, {}).G.col(0).mean());
    const GradientSolution gg = solve_gradient_girsanov(lin, batch, grid, {});
    vals.emplace_back("girsanov", gg.G.col(0).mean());
    vals.emplace_back("quotient",
                      finite_difference_gradient(drv, model, grid, x0, h, 1e-4,
                                                 seed, {}, n));
    vals.emplace_back(
        "oracle",
        cole_hopf_gradient_oracle(
            [](double v) { return std::tanh(v); },
            [](double v) {
                const double c = std::cosh(v);
                return 1.0 / (c * c);
            },
            0.0, 0.0, 1.0, 1.0));
    for (const auto& [name, v] : vals)
        std::printf("       %-10s G0=%.6f\n", name.c_str(), v);
    std::printf("       girsanov ESS = %.0f / %d\n", gg.ess, n);

    bool ok = check(!gg.ess_failure, "girsanov ESS above the 1% floor");
    for (size_t i = 0; i < vals.size(); ++i)
        for (size_t j = i + 1; j < vals.size(); ++j)
            ok &= check(std::abs(vals[i].second - vals[j].second) <= 3e-2,
                        vals[i].first + " vs " + vals[j].first + " <= 3e-2");
    return ok;
}

// ---------------------------------------------------------------- criterion 3
// Constants layer: excess-function monotonicity, critical-exponent inversion,
// the hand-evaluated K(2, 0) = 6, and the N = 0 moment bound collapsing to 1.

bool criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;

    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 100; ++i) {
        const double u = -6.0 + 9.0 * i / 99.0; // u = log(q - 1)
        const double v = phi_log_excess(u);
        ok &= check(v < prev, "excess function strictly decreasing on log grid");
        prev = v;
    }

    for (double N : {1e-3, 1e-2, 0.1, 1.0, 10.0}) {
        const double resid = std::abs(phi_log_excess(critical_log_excess(N)) - N);
        std::printf("       N=%-6g q*=%.12f  inversion residual %.2e\n", N,
                    critical_exponent(N), resid);
        ok &= check(resid <= 1e-10, "critical-exponent inversion <= 1e-10");
    }

    const double K20 = reverse_holder_constant(2.0, make_bmo_params(0.0, 1.0, 0.5));
    std::printf("       K(q=2, N=0) = %.17g\n", K20);
    ok &= check(K20 == 6.0, "K(2, 0) equals 6 exactly");

    const double eta0 = exp_moment_bound(2.0, make_bmo_params(0.0, 1.0, 0.5));
    std::printf("       eta-series(N=0) = %.17g\n", eta0);
    ok &= check(eta0 == 1.0, "moment series equals 1 at N = 0");

    const double el = seconds_since(t0);
    std::printf("       elapsed %.3fs\n", el);
    ok &= check(el <= 1.0, "constants suite runtime <= 1 s");
    return ok;
}

// ---------------------------------------------------------------- criterion 4
// Uniformity of the estimated BMO norm of the quadratic model over initial
// points and start times.  The estimator reports the max fitted conditional
// tail energy; its edge cells extrapolate the basis beyond the bulk of the
// state cloud, which inflates the spread far past 10% at these budgets.  The
// check is stated and evaluated as-is; see README for the measured behavior.

bool criterion_4() {
    const auto model = make_state_model("brownian-1d");
    const auto drv = make_driver("pure-quadratic-gamma");
    const int n = 20000;
    bool ok = true;
    std::vector<double> values;
    const auto spread_of = [](const std::vector<double>& v) {
        const double hi = *std::max_element(v.begin(), v.end());
        const double lo = *std::min_element(v.begin(), v.end());
        return (hi - lo) / (0.5 * (hi + lo));
    };
    for (double t : {0.0, 0.5}) {
        const int K = static_cast<int>(std::lround((1.0 - t) / 0.02));
        const TimeGrid grid = make_uniform_grid(t, 1.0, K);
        std::vector<double> row;
        for (double x : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const PathBatch batch = simulate_forward(
                model, grid, n, VectorXd::Constant(1, x), 44001);
            const BsdeSolution sol = solve_quadratic_bsde(drv, batch, grid, {});
            const BmoEstimate est = estimate_bmo_norm(sol, batch, grid, {});
            double min_node = 0.0;
            for (double e : est.per_node) min_node = std::min(min_node, e);
            ok &= check(min_node >= 0.0, "node tail energies nonnegative");
            row.push_back(est.value);
            values.push_back(est.value);
            std::printf("       t=%.1f x=%+.0f  bmo=%.4f\n", t, x, est.value);
        }
        std::printf("       x-spread at t=%.1f: %.3f\n", t, spread_of(row));
    }
    const double vmax = *std::max_element(values.begin(), values.end());
    const double vmin = *std::min_element(values.begin(), values.end());
    const double spread = spread_of(values);
    std::printf("       spread = %.3f (max %.4f, min %.4f), budget 0.10\n",
                spread, vmax, vmin);
    ok &= check(spread <= 0.10, "estimated BMO norm uniform to 10%");
    return ok;
}

// ---------------------------------------------------------------- criterion 5
// Weight-martingale moment check.  Constant-|b| case against the lognormal
// closed form at q = 1.1; quadratic-model weights against the 1.25 K(q, N-hat)
// ceiling at the largest grid exponent that keeps K finite.

bool criterion_5() {
    bool ok = true;
    const auto model = make_state_model("brownian-1d");
    const TimeGrid grid = make_uniform_grid(0.0, 1.0, 32);
    const int n = 20000;

    { // constant |b| = kappa: ratios are exactly lognormal
        const double kappa = 0.5, q = 1.1;
        const PathBatch batch =
            simulate_forward(model, grid, n, VectorXd::Zero(1), 45001);
        LinearCoeffs lin;
        lin.b.assign(grid.K, Eigen::MatrixXd::Constant(n, 1, kappa));
        const Eigen::MatrixXd w = girsanov_weights(lin, batch, grid);
        const BmoParams params = make_bmo_params(kappa, 1.0, 0.5);
        const ReverseHolderReport rep =
            check_reverse_holder_empirical(w, q, params);
        double worst_z = 0.0;
        for (int k = 0; k < grid.K; ++k) {
            const double closed =
                std::exp(0.5 * q * (q - 1.0) * kappa * kappa *
                         (1.0 - grid.nodes[k]));
            const double z =
                std::abs(rep.node_mean[k] - closed) / rep.node_se[k];
            worst_z = std::max(worst_z, z);
        }
        std::printf("       lognormal q=1.1: worst |z| = %.2f (cap 3)\n",
                    worst_z);
        ok &= check(worst_z <= 3.0, "lognormal node means within 3 SE");
        ok &= check(rep.pass, "lognormal ratios under the K-ceiling");
    }

    { // quadratic-model weights, N estimated from the solved Z field
        const auto drv = make_driver("pure-quadratic-gamma");
        const PathBatch batch =
            simulate_forward(model, grid, n, VectorXd::Zero(1), 45002);
        const BsdeSolution sol = solve_quadratic_bsde(drv, batch, grid, {});
        const VariationalBatch var =
            simulate_variational(model, grid, batch, VectorXd::Ones(1));
        const LinearCoeffs lin =
            assemble_linear_coeffs(drv, batch, sol, var, grid);
        const Eigen::MatrixXd w = girsanov_weights(lin, batch, grid);
        const double Nhat = estimate_bmo_norm(sol, batch, grid, {}).value;
        const BmoParams params = make_bmo_params(Nhat, 1.0, 0.5);
        std::printf("       N-hat = %.4f, q* = %.6f\n", Nhat, params.q_star);

        // largest listed q with a finite constant (q = 1.1 may exceed q*(N-hat))
        double q_use = 0.0, Kq = 0.0;
        for (double q : {1.1, 1.05, 1.02, 1.01, 1.005, 1.002, 1.001}) {
            if (!(std::log(q - 1.0) < params.log_q_excess)) continue;
            try {
                Kq = reverse_holder_constant(q, params);
            } catch (const constant_invalid_error&) {
                continue;
            }
            q_use = q;
            break;
        }
        if (!check(q_use > 0.0, "some grid exponent below q*(N-hat)")) return false;
        const ReverseHolderReport rep =
            check_reverse_holder_empirical(w, q_use, params);
        std::printf("       q=%.3f  K=%.4f  ceiling=%.4f  max ratio=%.4f\n",
                    q_use, Kq, rep.ceiling, rep.max_ratio);
        ok &= check(rep.pass, "quadratic-model weights under 1.25 K(q, N-hat)");
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 6
// Truncated linear solves are Cauchy in the level on the stochastic-K model:
// gaps between consecutive dyadic levels strictly decrease, on 5 seeds.

bool criterion_6() {
    const auto model = make_state_model("brownian-1d");
    const TimeGrid grid = make_uniform_grid(0.0, 1.0, 32);
    const int n = 4000;
    bool ok = true;
    for (uint64_t seed : {11u, 12u, 13u, 14u, 15u}) {
        const PathBatch batch =
            simulate_forward(model, grid, n, VectorXd::Zero(1), seed);
        // stochastic-K stress instance: K = sqrt(1 + 3 X^2), a = b = K/6,
        // f = 1/2, xi = X_T^2 (budget bulk below level 4, tail past 16)
        LinearCoeffs lin;
        lin.a.resize(n, grid.K);
        lin.inhom = Eigen::MatrixXd::Constant(n, grid.K, 0.5);
        lin.f_mag = lin.inhom;
        lin.Kproc.resize(n, grid.K);
        lin.b.assign(grid.K, Eigen::MatrixXd(n, 1));
        for (int k = 0; k < grid.K; ++k)
            for (int i = 0; i < n; ++i) {
                const double xx = batch.X[k](i, 0);
                const double Ks = std::sqrt(1.0 + 3.0 * xx * xx);
                lin.Kproc(i, k) = Ks;
                lin.a(i, k) = Ks / 6.0;
                lin.b[k](i, 0) = Ks / 6.0;
            }
        const VectorXd xi = batch.X[grid.K].col(0).array().square().matrix();
        validate_linear_coeffs(lin, 0.5);

        double prev_gap = std::numeric_limits<double>::infinity();
        std::printf("       seed %llu gaps:",
                    static_cast<unsigned long long>(seed));
        BsdeSolution lo = solve_linear_bsde_at_level(xi, lin, batch, grid, {}, 4.0);
        for (double level : {8.0, 16.0, 32.0}) {
            BsdeSolution hi =
                solve_linear_bsde_at_level(xi, lin, batch, grid, {}, level);
            const double gap = cauchy_gap(hi.Y, lo.Y);
            std::printf(" %.4e", gap);
            ok &= check(gap < prev_gap, "level gaps strictly decreasing");
            prev_gap = gap;
            lo = std::move(hi);
        }
        std::printf("\n");
    }
    return ok;
}

// ---------------------------------------------------------------- criterion 7
// Mild-formula and Markov-identification checks at (0, 0) with the default
// nested budgets, on the driverless and quadratic models.

bool criterion_7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    const VectorXd x0 = VectorXd::Zero(1);
    for (const char* drv_id : {"zero", "pure-quadratic-gamma"}) {
        SolverConfig cfg;
        cfg.model = make_state_model("brownian-1d");
        cfg.driver = make_driver(drv_id);

        const MildCheckReport mild = check_mild_formula(0.0, x0, cfg);
        std::printf("       %-21s mild: residual=%.2e budget=%.2e %s\n",
                    drv_id, mild.residual, mild.budget,
                    mild.pass ? "ok" : "VIOLATED");
        ok &= check(mild.pass, std::string(drv_id) + ": mild residual <= budget");

        const IdentificationReport ident = check_identification(0.0, x0, cfg);
        for (const auto& node : ident.nodes)
            std::printf(
                "       %-21s ident s=%.2f: y-gap=%.2e (cap %.0e) "
                "z-gap=%.2e (cap %.0e)\n",
                drv_id, node.s, node.y_gap_mean, ident.y_budget,
                node.z_gap_mean, ident.z_budget);
        ok &= check(ident.pass, std::string(drv_id) + ": identification gaps in budget");
    }
    const double el = seconds_since(t0);
    std::printf("       elapsed %.0fs\n", el);
    ok &= check(el <= 300.0, "verification runtime <= 5 min");
    return ok;
}

// ---------------------------------------------------------------- criterion 8
// Byte-identical CSV bodies across re-runs of every CLI task with the same
// config and seed.  The binary path arrives via BSDELAB_CLI.

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

bool criterion_8() {
    const char* cli = std::getenv("BSDELAB_CLI");
    if (!check(cli != nullptr, "BSDELAB_CLI points at the task binary"))
        return false;

    const fs::path root =
        fs::temp_directory_path() / "bsdelab-acceptance-determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg_path = root / "config.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
  "model": "brownian-1d",
  "driver": "pure-quadratic-gamma",
  "grid": {"t0": 0.0, "T": 1.0, "K": 10},
  "mc": {"n_paths": 2000, "seed": 48001}
})";
    }

    bool ok = true;
    const std::vector<std::string> tasks = {
        "simulate", "solve",       "gradient",
        "bmo",      "constants",   "verify-mild",
        "verify-identification"};
    for (const std::string& task : tasks) {
        std::vector<std::string> bodies[2];
        bool ran = true;
        for (int r = 0; r < 2; ++r) {
            const fs::path out = root / (task + "-" + std::to_string(r));
            fs::create_directories(out);
            const std::string cmd = std::string(cli) + " " + task +
                                    " --config " + cfg_path.string() +
                                    " --out " + out.string() + " > " +
                                    (out / "log.txt").string() + " 2>&1";
            const int rc = WEXITSTATUS(std::system(cmd.c_str()));
            // 2 = a check verdict failed, which must itself be reproducible
            if (rc != 0 && rc != 2) {
                ok &= check(false, task + " exits 0 or 2 (got " +
                                       std::to_string(rc) + ")");
                ran = false;
                break;
            }
            std::vector<fs::path> csvs;
            for (const auto& e : fs::directory_iterator(out))
                if (e.path().extension() == ".csv") csvs.push_back(e.path());
            std::sort(csvs.begin(), csvs.end());
            for (const auto& p : csvs) bodies[r].push_back(slurp(p));
        }
        if (!ran) continue;
        const bool same = !bodies[0].empty() && bodies[0] == bodies[1];
        std::printf("       %-24s %zu artifact(s) %s\n", task.c_str(),
                    bodies[0].size(), same ? "identical" : "DIFFER");
        ok &= check(same, task + " re-run bodies byte-identical");
    }
    fs::remove_all(root);
    return ok;
}

// ---------------------------------------------------------------- criterion 9
// Forward layer against closed forms: OU terminal mean/variance at 1e5 paths,
// and the linearized flow against common-noise difference quotients.

bool criterion_9() {
    bool ok = true;
    { // OU mean/var; 256 steps keeps the scheme's variance bias ~0.4% << 3 SE
        const auto model = make_state_model("ou-1d"); // a = 1, s = 0.5
        const TimeGrid grid = make_uniform_grid(0.0, 1.0, 256);
        const int n = 100000;
        const PathBatch batch = simulate_forward(
            model, grid, n, VectorXd::Constant(1, 1.0), 49001);
        const VectorXd xT = batch.X[grid.K].col(0);
        const double mean = xT.mean();
        const double var =
            (xT.array() - mean).square().sum() / (n - 1);
        const double mean_true = std::exp(-1.0);
        const double var_true = 0.25 * (1.0 - std::exp(-2.0)) / 2.0;
        const double se_mean = std::sqrt(var / n);
        const double se_var = var_true * std::sqrt(2.0 / (n - 1));
        std::printf("       OU mean %.6f vs %.6f (|z|=%.2f)\n", mean, mean_true,
                    std::abs(mean - mean_true) / se_mean);
        std::printf("       OU var  %.6f vs %.6f (|z|=%.2f)\n", var, var_true,
                    std::abs(var - var_true) / se_var);
        ok &= check(std::abs(mean - mean_true) <= 3.0 * se_mean,
                    "OU terminal mean within 3 SE");
        ok &= check(std::abs(var - var_true) <= 3.0 * se_var,
                    "OU terminal variance within 3 SE");
    }
    { // variational flow vs central quotient under common increments
        const auto model = make_state_model("bounded-nonlinear");
        const TimeGrid grid = make_uniform_grid(0.0, 1.0, 32);
        const int n = 2000;
        const double eps = 1e-6;
        const uint64_t seed = 49002;
        const VectorXd x0 = VectorXd::Constant(1, 0.3);
        const VectorXd h = VectorXd::Ones(1);
        const PathBatch base = simulate_forward(model, grid, n, x0, seed);
        const VariationalBatch var = simulate_variational(model, grid, base, h);
        const PathBatch up =
            simulate_forward(model, grid, n, x0 + eps * h, seed);
        const PathBatch dn =
            simulate_forward(model, grid, n, x0 - eps * h, seed);
        double worst = 0.0;
        for (int k = 0; k <= grid.K; ++k)
            worst = std::max(
                worst, (var.DX[k] - (up.X[k] - dn.X[k]) / (2.0 * eps))
                           .cwiseAbs()
                           .maxCoeff());
        std::printf("       variational vs quotient: worst |diff| = %.2e\n",
                    worst);
        ok &= check(worst <= 1e-3, "variational flow matches quotients to 1e-3");
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    using Runner = bool (*)();
    const std::vector<std::pair<std::string, Runner>> table = {
        {"transform-oracle agreement", criterion_1},
        {"gradient triple agreement", criterion_2},
        {"constants layer", criterion_3},
        {"bmo uniformity sweep", criterion_4},
        {"reverse-Holder moments", criterion_5},
        {"truncation Cauchy behavior", criterion_6},
        {"mild-solution verification", criterion_7},
        {"task determinism", criterion_8},
        {"forward-path oracles", criterion_9},
    };

    int lo = 1, hi = static_cast<int>(table.size());
    if (argc > 1) {
        lo = hi = std::atoi(argv[1]);
        if (lo < 1 || hi > static_cast<int>(table.size())) {
            std::fprintf(stderr, "usage: acceptance [1-%zu]\n", table.size());
            return 64;
        }
    }

    int failures = 0;
    for (int k = lo; k <= hi; ++k) {
        const auto& [name, run] = table[k - 1];
        std::printf("-- criterion %d: %s\n", k, name.c_str());
        bool ok = false;
        try {
            ok = run();
        } catch (const std::exception& e) {
            std::printf("       unexpected exception: %s\n", e.what());
        }
        std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", k,
                    name.c_str());
        if (!ok) ++failures;
    }
    return failures;
}
