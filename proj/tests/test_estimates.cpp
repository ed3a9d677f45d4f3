#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "logbsde/csv.hpp"
#include "logbsde/estimates.hpp"
#include "logbsde/examples.hpp"

using namespace logbsde;

namespace {

BsdeSolution constant_solution(Real y_value, Real z_value, std::size_t n_paths,
                               std::size_t n_steps) {
    BsdeSolution sol;
    sol.n_paths = n_paths;
    sol.dim_d = 1;
    sol.dim_r = 1;
    sol.n_steps = n_steps;
    sol.Y.assign(n_paths * (n_steps + 1), y_value);
    sol.Z.assign(n_paths * n_steps, z_value);
    return sol;
}

}  // namespace

TEST_CASE("weighted process along trivial paths") {
    const TimeGrid grid = make_time_grid(0.0, 1.0, 1000);
    const std::size_t n = grid.n_steps();
    const std::vector<Real> X(n + 1, 0.0);

    SECTION("zero data gives a zero process") {
        AssumptionEnvelope env;
        const std::vector<Real> Y(n + 1, 0.0);
        const auto wp = lambda_path(Y, env, X, grid, 1, 1);
        for (Real v : wp.Lambda) REQUIRE(v == 0.0);
        for (Real v : wp.e) REQUIRE(v == 1.0);
    }
    SECTION("unit Y with zero weight gives Lambda = 1") {
        AssumptionEnvelope env;
        const std::vector<Real> Y(n + 1, 1.0);
        const auto wp = lambda_path(Y, env, X, grid, 1, 1);
        for (Real v : wp.Lambda) REQUIRE(v == 1.0);
    }
    SECTION("unit Y with lambda = 1 gives Lambda_T = e") {
        AssumptionEnvelope env;
        env.M = constant_field(0.5);  // lambda = 2M = 1
        const std::vector<Real> Y(n + 1, 1.0);
        const auto wp = lambda_path(Y, env, X, grid, 1, 1);
        REQUIRE_THAT(wp.Lambda.back(), Catch::Matchers::WithinAbs(std::exp(1.0), 1e-6));
    }
}

TEST_CASE("Lambda is nonnegative with nondecreasing integral components") {
    const TimeGrid grid = make_time_grid(0.0, 1.0, 64);
    const std::size_t n = grid.n_steps();
    AssumptionEnvelope env;
    env.eta = [](Real t, std::span<const Real>) { return 0.3 + 0.2 * std::sin(5 * t); };
    env.f0 = [](Real t, std::span<const Real>) { return 0.1 + 0.1 * t; };
    env.M = constant_field(0.25);
    env.Kproc = constant_field(0.5);
    std::vector<Real> Y(n + 1), X(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) Y[i] = std::cos(3 * grid.points[i]);
    const auto wp = lambda_path(Y, env, X, grid, 1, 1);
    for (Real v : wp.Lambda) REQUIRE(v >= 0.0);
    // strip the |Y|^2 e part: the remaining two components must be nondecreasing
    Real prev = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const Real tail = wp.Lambda[i] - Y[i] * Y[i] * wp.e[i];
        REQUIRE(tail >= prev - 1e-12);
        prev = tail;
    }
}

TEST_CASE("theta_p of constant fields") {
    const TimeGrid grid = make_time_grid(0.0, 1.0, 16);
    const auto flat = constant_solution(-1.5, 0.0, 32, 16);
    REQUIRE(theta_p(flat, grid, 2.0, 0).value == std::pow(1.5, 2.0));

    const auto z_only = constant_solution(0.0, 1.0, 32, 16);
    REQUIRE_THAT(theta_p(z_only, grid, 2.0, 0).value,
                 Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("theta_p of the logarithmic oracle solution") {
    // sup_t |Y_t| runs over the whole horizon, so the terminal slice e
    // dominates and Theta_2 = e^2 (+ a vanishing Z term)
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    BsdeProblem problem;
    problem.generator = bundle.generator;
    problem.terminal = TerminalCondition::value({std::exp(1.0)});
    problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
    problem.grid = make_time_grid(0.0, 1.0, 512);
    problem.x0 = {0.0};
    SolverConfig cfg;
    cfg.n_paths = 16;
    cfg.seed = 4;
    cfg.basis = RegressionBasis::global_poly(1);
    const auto paths = simulate_paths(problem.diffusion, problem.grid, problem.x0, 16, 4);
    const auto sol = solve_backward(problem, paths, cfg);
    const auto est = theta_p(sol, problem.grid, 2.0, 100, 9);
    REQUIRE_THAT(est.value, Catch::Matchers::WithinRel(std::exp(2.0), 1e-2));
    REQUIRE(est.lo <= est.value);
    REQUIRE(est.hi >= est.value);
}

TEST_CASE("beta_hat formula and validation") {
    REQUIRE_THAT(beta_hat(2.0, 2.0, 1.5, 1.5), Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-15));
    REQUIRE_THAT(beta_hat(3.0, 10.0, 2.0, 1.2), Catch::Matchers::WithinAbs(1.5, 1e-15));
    // alpha, alpha' -> 1+ with large q approaches min(2, p)
    REQUIRE_THAT(beta_hat(1.5, 50.0, 1.0001, 1.0001),
                 Catch::Matchers::WithinAbs(std::min(2.0, 1.5), 1e-3));
    REQUIRE_THAT(beta_hat(4.0, 50.0, 1.0001, 1.0001),
                 Catch::Matchers::WithinAbs(2.0, 1e-3));
    try {
        beta_hat(2.0, 2.0, 2.5, 1.5);
        FAIL("expected invalid-exponents");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-exponents");
    }
}

TEST_CASE("beta_hat monotonicity on a sampled exponent grid") {
    for (Real p : {1.6, 2.0, 3.0}) {
        for (Real q : {1.5, 2.0, 4.0}) {
            Real prev = std::numeric_limits<Real>::infinity();
            for (Real alpha : {1.1, 1.2, 1.4}) {
                const Real b = beta_hat(p, q, alpha, 1.05);
                REQUIRE(b <= prev + 1e-15);  // nonincreasing in alpha
                prev = b;
            }
            REQUIRE(beta_hat(p + 0.5, q, 1.3, 1.2) >= beta_hat(p, q, 1.3, 1.2) - 1e-15);
            REQUIRE(beta_hat(p, q + 1.0, 1.3, 1.2) >= beta_hat(p, q, 1.3, 1.2) - 1e-15);
        }
    }
}

TEST_CASE("integrability bound") {
    const TimeGrid grid = make_time_grid(0.0, 1.0, 64);
    const DiffusionSpec frozen = diffusions::constant(1, 1, 0.0, 0.0);
    const std::vector<Real> x0 = {0.0};
    const auto paths = simulate_paths(frozen, grid, x0, 8, 1);

    SECTION("zero driver passes with zero left side") {
        AssumptionEnvelope env;
        env.eta_bar = constant_field(1.0);
        const auto sol = constant_solution(0.5, 0.0, 8, 64);
        const auto rep = integrability_check(sol, paths, zero_generator(1, 1), env);
        REQUIRE(rep.lhs == 0.0);
        REQUIRE(rep.verdict == "pass");
    }
    SECTION("constant driver gives lhs = T") {
        Generator one = zero_generator(1, 1);
        one.eval = [](Real, std::span<const Real>, std::span<const Real>,
                      std::span<const Real>, std::span<Real> out) { out[0] = 1.0; };
        AssumptionEnvelope env;
        env.eta_bar = constant_field(1.0);
        const auto sol = constant_solution(0.7, 0.0, 8, 64);
        const auto rep = integrability_check(sol, paths, one, env);
        REQUIRE_THAT(rep.lhs, Catch::Matchers::WithinAbs(1.0, 1e-12));
        REQUIRE(rep.verdict == "pass");
    }
    SECTION("logarithmic oracle instance holds with large slack") {
        const auto bundle = make_example(ExampleKind::LogDrift, {});
        BsdeProblem problem;
        problem.generator = bundle.generator;
        problem.terminal = TerminalCondition::value({std::exp(1.0)});
        problem.diffusion = frozen;
        problem.grid = grid;
        problem.x0 = x0;
        SolverConfig cfg;
        cfg.n_paths = 8;
        cfg.seed = 2;
        cfg.basis = RegressionBasis::global_poly(0);
        const auto sol = solve_backward(problem, paths, cfg);
        const auto rep = integrability_check(sol, paths, bundle.generator, bundle.envelope);
        REQUIRE(rep.verdict == "pass");
        REQUIRE(rep.lhs < 0.05 * rep.rhs);
    }
}

namespace {

AprioriInstance linear_instance(Real xi, Real rate, std::size_t n_steps) {
    AprioriInstance inst;
    inst.label = "xi=" + fmt_real(xi);
    Generator g = zero_generator(1, 1);
    g.eval = [rate](Real, std::span<const Real>, std::span<const Real> y,
                    std::span<const Real>, std::span<Real> out) { out[0] = -rate * y[0]; };
    inst.problem.generator = g;
    inst.problem.terminal = TerminalCondition::value({xi});
    inst.problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
    inst.problem.grid = make_time_grid(0.0, 1.0, n_steps);
    inst.problem.x0 = {0.0};
    AssumptionEnvelope env;  // <y, -ry> <= 0: all bound processes vanish
    inst.env = env;
    return inst;
}

}  // namespace

TEST_CASE("apriori estimate: vacuous zero instance passes") {
    AprioriInstance zero = linear_instance(0.0, 0.0, 16);
    SolverConfig cfg;
    cfg.n_paths = 8;
    cfg.seed = 1;
    cfg.basis = RegressionBasis::global_poly(0);
    const auto report = apriori_check(zero, {zero}, cfg);
    REQUIRE(report.verdict == "pass");
    REQUIRE(report.lhs == 0.0);
}

TEST_CASE("apriori estimate is homogeneous for the scaled linear family") {
    SolverConfig cfg;
    cfg.n_paths = 4;
    cfg.seed = 1;
    cfg.basis = RegressionBasis::global_poly(0);
    const auto cal = linear_instance(2.0, 0.5, 64);
    const auto scaled = linear_instance(4.0, 0.5, 64);
    const auto report = apriori_check(cal, {scaled}, cfg);
    REQUIRE(report.verdict == "pass");
    // both sides scale by 2^p = 4, so the sweep ratio matches the fitted C margin
    REQUIRE_THAT(report.rows[0].lhs / report.lhs, Catch::Matchers::WithinRel(4.0, 1e-9));
    REQUIRE_THAT(report.rows[0].rhs / report.rhs, Catch::Matchers::WithinRel(4.0, 1e-9));
}

TEST_CASE("divergent weights yield the distinct inconclusive verdict") {
    AprioriInstance
        heavy = linear_instance(1.0, 0.5, 16);
    heavy.env.M = constant_field(500.0);  // lambda = 1000: e_T overflows
    SolverConfig cfg;
    cfg.n_paths = 4;
    cfg.seed = 1;
    cfg.basis = RegressionBasis::global_poly(0);
    const auto report = apriori_check(heavy, {heavy}, cfg);
    REQUIRE(report.verdict == "inconclusive");
}

TEST_CASE("apriori sweep over the logarithmic family") {
    SolverConfig cfg;
    cfg.n_paths = 64;
    cfg.seed = 12;
    cfg.basis = RegressionBasis::global_poly(1);

    auto log_instance = [&](Real xi, Real K) {
        AprioriInstance inst;
        inst.label = "xi=" + fmt_real(xi) + ",K=" + fmt_real(K);
        ExampleParams prm;
        prm.K = K;
        const auto bundle = make_example(ExampleKind::LogDrift, prm);
        inst.problem.generator = bundle.generator;
        inst.env = bundle.envelope;
        inst.problem.terminal = TerminalCondition::value({xi});
        inst.problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
        inst.problem.grid = make_time_grid(0.0, 1.0, 128);
        inst.problem.x0 = {0.0};
        return inst;
    };

    std::vector<AprioriInstance> sweep;
    for (Real K : {0.5, 1.0})
        for (Real xi : {0.5, 1.0, 2.0}) sweep.push_back(log_instance(xi, K));
    const auto report = apriori_check(log_instance(std::exp(1.0), 1.0), sweep, cfg, 1.5);
    REQUIRE(report.verdict == "pass");
    REQUIRE(report.worst_ratio <= 1.0);
}

TEST_CASE("stability sweep is exactly zero when the data is untouched") {
    BsdeProblem problem;
    problem.generator = zero_generator(1, 1);
    problem.terminal = TerminalCondition::value({0.7});
    problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
    problem.grid = make_time_grid(0.0, 1.0, 32);
    problem.x0 = {0.0};
    AssumptionEnvelope env;
    const std::vector<Real> reference =
        ode_reduction_solve(problem.generator, problem.terminal.constant, problem.grid);
    SolverConfig cfg;
    cfg.n_paths = 8;
    cfg.seed = 3;
    cfg.basis = RegressionBasis::global_poly(0);
    const auto curve = stability_sweep(problem, env, {1, 2, 4}, constant_field(1.0), cfg,
                                       1.5, reference, 1.0, 51, 1e-9, 16);
    for (const auto& row : curve.rows) {
        REQUIRE(row.y_err == 0.0);
        REQUIRE(row.z_err == 0.0);
        REQUIRE(row.rho == 0.0);
    }
}

TEST_CASE("stability ladder of the logarithmic family shrinks to the oracle") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    BsdeProblem problem;
    problem.generator = bundle.generator;
    problem.terminal = TerminalCondition::value({std::exp(1.0)});
    problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
    problem.grid = make_time_grid(0.0, 1.0, 128);
    problem.x0 = {0.0};
    const std::vector<Real> reference =
        ode_reduction_solve(problem.generator, problem.terminal.constant, problem.grid);
    SolverConfig cfg;
    cfg.n_paths = 16;
    cfg.seed = 8;
    cfg.basis = RegressionBasis::global_poly(0);
    const ScalarField h = [](Real, std::span<const Real> x) { return std::exp(-norm2(x)); };
    const auto curve = stability_sweep(problem, bundle.envelope, {4, 8, 16, 32}, h, cfg, 1.5,
                                       reference, 1.0, 101, 1e-2, 24);
    REQUIRE(curve.rows.size() == 4);
    REQUIRE(curve.nonincreasing_after_peak);
    REQUIRE(curve.final_below_threshold);
    // the first level deactivates the driver entirely, later levels converge
    REQUIRE(curve.rows[0].y_err > curve.rows[1].y_err);
    REQUIRE(curve.rows[3].y_err < 1e-2);
}
