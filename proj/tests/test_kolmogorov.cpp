#include <catch2/catch_amalgamated.hpp>

#include <bsdelab/kolmogorov.hpp>

#include <cmath>

using namespace bsdelab;

namespace {
SolverConfig small_config(const std::string& driver_id, double T = 1.0) {
    SolverConfig cfg;
    cfg.model = make_state_model("brownian-1d");
    cfg.driver = make_driver(driver_id);
    cfg.T = T;
    cfg.dt = 0.05;
    cfg.n_paths = 4000;
    cfg.seed = 2718;
    cfg.n_quad = 4;
    cfg.n_sub = 24;
    cfg.n_inner = 400;
    cfg.n_sub_ident = 8;
    cfg.n_inner_ident = 4000;
    return cfg;
}
} // namespace

TEST_CASE("u(T, x) is the terminal condition, exactly") {
    const SolverConfig cfg = small_config("pure-quadratic-gamma");
    for (double x : {-1.0, 0.0, 0.5})
        CHECK(evaluate_u(1.0, Eigen::VectorXd::Constant(1, x), cfg) ==
              std::tanh(x));
}

TEST_CASE("driverless u equals the transition semigroup of Phi") {
    SolverConfig cfg = small_config("zero");
    cfg.n_paths = 20000;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
    const double u = evaluate_u(0.0, x, cfg);
    const SemigroupEstimate p = transition_semigroup(
        [](const Eigen::VectorXd& v) { return std::tanh(v(0)); }, cfg.model,
        0.0, 1.0, x, 20000, 999);
    CHECK(p.se > 0.0);
    CHECK(std::abs(u - p.value) <= 3.0 * p.se + 3.0 * p.se); // both are MC
    // frozen closed form E[tanh(0.3 + W_1)]
    CHECK_THAT(u, Catch::Matchers::WithinAbs(0.18008925215265956, 2e-2));
}

TEST_CASE("u matches the Cole-Hopf oracle at mid scale") {
    SolverConfig cfg = small_config("pure-quadratic-gamma");
    cfg.n_paths = 10000;
    const double u = evaluate_u(0.0, Eigen::VectorXd::Zero(1), cfg);
    CHECK_THAT(u, Catch::Matchers::WithinAbs(0.1889260589705691, 2e-2));
}

TEST_CASE("transition semigroup degenerate cases") {
    const SolverConfig cfg = small_config("zero");
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.4);
    const SemigroupEstimate same = transition_semigroup(
        [](const Eigen::VectorXd& v) { return v(0) * 2.0; }, cfg.model, 0.3,
        0.3, x, 100, 1);
    CHECK(same.value == 0.8);
    CHECK(same.se == 0.0);

    const SemigroupEstimate mass = transition_semigroup(
        [](const Eigen::VectorXd&) { return 1.0; }, cfg.model, 0.0, 1.0, x,
        5000, 2);
    CHECK(mass.value == 1.0);
    CHECK(mass.se == 0.0);

    CHECK_THROWS_AS(transition_semigroup(
                        [](const Eigen::VectorXd&) { return 0.0; }, cfg.model,
                        0.5, 0.2, x, 100, 3),
                    std::domain_error);
}

TEST_CASE("semigroup composition on the OU model") {
    const StateModel ou = make_state_model("ou-1d");
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.0);
    auto phi = [](const Eigen::VectorXd& v) { return std::tanh(v(0)); };

    const SemigroupEstimate direct =
        transition_semigroup(phi, ou, 0.0, 1.0, x0, 40000, 10);

    // nested: sample X_{0.5}, average the inner semigroup at each state
    const TimeGrid half = make_uniform_grid(0.0, 0.5, 10);
    const PathBatch mid = simulate_forward(ou, half, 200, x0, 11);
    double acc = 0.0, var_states = 0.0;
    std::vector<double> vals;
    for (int i = 0; i < 200; ++i) {
        const SemigroupEstimate inner = transition_semigroup(
            phi, ou, 0.5, 1.0, mid.X[10].row(i).transpose(), 2000,
            1000 + static_cast<uint64_t>(i));
        vals.push_back(inner.value);
        acc += inner.value;
    }
    acc /= 200.0;
    for (double v : vals) var_states += (v - acc) * (v - acc);
    const double se_nested = std::sqrt(var_states / (199.0 * 200.0));
    CHECK(std::abs(acc - direct.value) <=
          4.0 * std::sqrt(se_nested * se_nested + direct.se * direct.se));
}

TEST_CASE("mild formula: driverless reduction passes with tight residual") {
    const SolverConfig cfg = small_config("zero");
    const MildCheckReport rep =
        check_mild_formula(0.0, Eigen::VectorXd::Zero(1), cfg);
    CHECK(rep.budget > 0.0);
    // F == 0: the integral term vanishes identically and lhs/terminal share
    // one batch, so the residual is pure regression-chain roundoff
    CHECK(rep.integral_term == 0.0);
    CHECK(rep.residual < 1e-6);
    CHECK(rep.pass);
}

TEST_CASE("mild formula: quadratic model structure at reduced budget") {
    const SolverConfig cfg = small_config("pure-quadratic-gamma");
    const MildCheckReport rep =
        check_mild_formula(0.0, Eigen::VectorXd::Zero(1), cfg);
    CHECK(std::isfinite(rep.lhs));
    CHECK(std::isfinite(rep.rhs));
    CHECK(rep.budget > 0.0);
    CHECK(rep.se_terminal > 0.0);
    CHECK(rep.quad_gap >= 0.0);
    CHECK(rep.integral_term > 0.0); // F = |z|^2/2 > 0
    // the full-budget verdict is the acceptance run; here only sanity
    CHECK(rep.residual < 0.15);
}

TEST_CASE("identification: driverless restart gaps sit inside budgets") {
    SolverConfig cfg = small_config("zero", 0.5);
    cfg.dt = 0.05;
    // reduced-budget run: the master fit alone carries ~1.2e-2 pointwise
    // noise at 4000 paths, so the default 1e-2 budget is below this
    // configuration's floor; the default budgets bind at default budgets
    // (the acceptance run), not here
    cfg.y_gap_budget = 2.5e-2;
    const IdentificationReport rep =
        check_identification(0.0, Eigen::VectorXd::Zero(1), cfg);
    REQUIRE(!rep.nodes.empty());
    for (const auto& st : rep.nodes) {
        CHECK(st.y_gap_mean >= 0.0);
        CHECK(st.z_gap_mean >= 0.0);
        CHECK(st.y_gap_max >= st.y_gap_mean);
        CHECK(st.z_gap_max >= st.z_gap_mean);
        CHECK(st.y_gap_mean <= rep.y_budget);
        CHECK(st.z_gap_mean <= rep.z_budget);
    }
    CHECK(rep.pass);
}

TEST_CASE("identification gaps shrink as the inner budget grows") {
    SolverConfig lo = small_config("zero", 0.5);
    lo.n_inner_ident = 500;
    SolverConfig hi = lo;
    hi.n_inner_ident = 8000; // 16x inner paths -> ~4x smaller restart noise
    const IdentificationReport rl =
        check_identification(0.0, Eigen::VectorXd::Zero(1), lo);
    const IdentificationReport rh =
        check_identification(0.0, Eigen::VectorXd::Zero(1), hi);
    double gl = 0.0, gh = 0.0;
    for (const auto& st : rl.nodes) gl += st.y_gap_mean;
    for (const auto& st : rh.nodes) gh += st.y_gap_mean;
    CHECK(gh < gl);
}

TEST_CASE("u is continuous in x (shrinking-delta smoke test)") {
    SolverConfig cfg = small_config("pure-quadratic-gamma");
    cfg.n_paths = 8000;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
    double prev = std::numeric_limits<double>::infinity();
    for (double delta : {0.4, 0.2, 0.1}) {
        const double gap =
            std::abs(evaluate_u(0.0, Eigen::VectorXd::Constant(1, delta), cfg) -
                     evaluate_u(0.0, x, cfg));
        CHECK(gap < prev); // common seeds: the difference is smooth in delta
        prev = gap;
    }
}
