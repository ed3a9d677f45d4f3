#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>

#include "logbsde/checks.hpp"
#include "logbsde/config.hpp"
#include "logbsde/csv.hpp"
#include "logbsde/estimates.hpp"
#include "logbsde/examples.hpp"
#include "logbsde/mollify.hpp"
#include "logbsde/pde_link.hpp"

namespace logbsde {

namespace build {

inline ExampleBundle generator_from(const Json& g) {
    const std::string kind = g.at("kind").get<std::string>();
    ExampleParams prm;
    const Json& p = g.at("params");
    prm.d = p.value("d", 1);
    prm.k = p.value("k", 1);
    prm.r = p.value("r", 1);
    prm.p = p.value("p", 2.0);
    prm.gamma = p.value("gamma", 0.2);
    prm.K = p.value("K", 1.0);
    prm.eps0 = p.value("eps0", 0.5);
    prm.q_bar = p.value("q_bar", 1.0);
    prm.c = p.value("c", 0.5);
    prm.kappa = p.value("kappa", 0.5);
    prm.q_bar_p = p.value("q_bar_p", 0.4);
    prm.q_bar_pp = p.value("q_bar_pp", 0.5);
    if (kind == "zero") {
        ExampleBundle bundle;
        bundle.generator = zero_generator(prm.d, prm.r);
        bundle.envelope.p = prm.p;
        bundle.envelope.gamma = prm.gamma;
        bundle.envelope.eta_bar = constant_field(1.0);
        return bundle;
    }
    return make_example(kind, prm);
}

inline DiffusionSpec diffusion_from(const Json& d) {
    DiffusionSpec spec;
    spec.dim_k = d.value("k", 1);
    spec.dim_r = d.value("r", 1);
    const Real sigma = d.value("sigma", 1.0);
    const Real b_const = d.value("b_const", 0.0);
    const Real b_scale = d.value("b_scale", 0.0);
    const int k = spec.dim_k, r = spec.dim_r;
    spec.drift = [b_const, b_scale](std::span<const Real> x, std::span<Real> out) {
        for (std::size_t c = 0; c < out.size(); ++c) out[c] = b_const + b_scale * x[c];
    };
    spec.diffusion = [k, r, sigma](std::span<const Real>, std::span<Real> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (int i = 0; i < std::min(k, r); ++i) out[i * r + i] = sigma;
    };
    return spec;
}

inline TerminalCondition terminal_from(const Json& t, int d) {
    const std::string kind = t.at("kind").get<std::string>();
    if (kind == "constant") {
        std::vector<Real> value(d, t.value("value", 1.0));
        return TerminalCondition::value(value);
    }
    if (kind == "bump_plus_one") {
        return TerminalCondition::map([](std::span<const Real> x, std::span<Real> out) {
            const Real v = 1.0 + std::exp(-dot(x, x));
            std::fill(out.begin(), out.end(), v);
        });
    }
    fail("config-error", "unknown terminal kind: " + kind);
}

inline SolverConfig solver_from(const Json& s, std::uint64_t seed) {
    SolverConfig cfg;
    require(s.value("z_estimator", std::string("increment_regression")) ==
                "increment_regression",
            "config-error", "solver.z_estimator: only increment_regression is available");
    cfg.n_paths = s.value("n_paths", 4096);
    cfg.seed = seed;
    cfg.scheme = s.value("scheme", std::string("implicit")) == "explicit" ? Scheme::Explicit
                                                                          : Scheme::Implicit;
    cfg.picard_iters = s.value("picard_iters", 60);
    cfg.picard_tol = s.value("picard_tol", 1e-12);
    cfg.picard_damping = s.value("damping", 0.5);
    const Json& b = s.at("basis");
    if (b.at("kind").get<std::string>() == "local_partition")
        cfg.basis = RegressionBasis::local_partition(b.value("n_cells", 8), b.value("degree", 1));
    else
        cfg.basis = RegressionBasis::global_poly(b.value("degree", 3));
    cfg.y_clip = s.value("y_clip", 0.0);
    return cfg;
}

inline TimeGrid grid_from(const Json& g) {
    return make_time_grid(g.value("t0", 0.0), g.value("T", 1.0),
                          g.at("n_steps").get<std::size_t>());
}

/// Closed forms used as scenario oracles.
inline Real oracle_value(const Json& oracle, Real t) {
    const std::string kind = oracle.at("kind").get<std::string>();
    const Real T = oracle.value("T", 1.0);
    if (kind == "log_fixed") {
        const Real xi = oracle.value("xi", std::exp(1.0));
        const Real K = oracle.value("K", 1.0);
        return std::exp(std::exp(-K * (T - t)) * std::log(xi));
    }
    if (kind == "exp_linear") {
        const Real c0 = oracle.value("c0", 1.0);
        const Real a = oracle.value("a", 0.0);
        return c0 * std::exp(a * (T - t));
    }
    if (kind == "constant") return oracle.value("value", 0.0);
    fail("config-error", "unknown oracle kind: " + kind);
}

}  // namespace build

// ---------------------------------------------------------------------------
// pipelines

namespace pipelines {

inline std::filesystem::path out_dir_of(const Json& cfg) {
    const auto dir = std::filesystem::path(cfg.at("out_dir").get<std::string>());
    std::filesystem::create_directories(dir);
    return dir;
}

inline ResultRecord simulate_forward(const Json& cfg, unsigned jobs) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const DiffusionSpec spec = build::diffusion_from(cfg.at("diffusion"));
    const TimeGrid grid = build::grid_from(cfg.at("grid"));
    const std::vector<Real> x0(spec.dim_k, cfg.value("x0", 0.0));
    const std::size_t n_paths = cfg.at("n_paths").get<std::size_t>();

    const PathBatch batch = simulate_paths(spec, grid, x0, n_paths, seed, jobs);
    const Real kappa = cfg.value("kappa", 0.25);
    const auto moment = exp_moment_estimate(batch, kappa, x0);

    CsvWriter csv((dir / "forward_summary.csv").string());
    csv.header({"step", "t", "mean_x", "var_x", "mean_dw", "var_dw"});
    for (std::size_t i = 0; i <= grid.n_steps(); ++i) {
        Real mean = 0.0, var = 0.0, mdw = 0.0, vdw = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) mean += batch.state(p, i)[0];
        mean /= static_cast<Real>(n_paths);
        for (std::size_t p = 0; p < n_paths; ++p) var += sqr(batch.state(p, i)[0] - mean);
        var /= static_cast<Real>(n_paths);
        if (i < grid.n_steps()) {
            for (std::size_t p = 0; p < n_paths; ++p) mdw += batch.incr(p, i)[0];
            mdw /= static_cast<Real>(n_paths);
            for (std::size_t p = 0; p < n_paths; ++p) vdw += sqr(batch.incr(p, i)[0] - mdw);
            vdw /= static_cast<Real>(n_paths);
        }
        csv.row_values({static_cast<Real>(i), grid.points[i], mean, var, mdw, vdw});
    }
    rec.artifacts.push_back((dir / "forward_summary.csv").string());
    if (cfg.value("dump_binary", false)) {
        export_binary(batch, (dir / "paths.bin").string());
        rec.artifacts.push_back((dir / "paths.bin").string());
    }
    rec.metrics["exp_moment"] = moment.estimate;
    rec.metrics["exp_moment_tail_fraction"] = moment.tail_fraction;
    rec.verdicts["finite"] = moment.divergent ? "inconclusive" : "pass";
    return rec;
}

inline ResultRecord check_assumptions(const Json& cfg, unsigned) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const ExampleBundle bundle = build::generator_from(cfg.at("generator"));
    SampleBox box;
    box.dim_k = cfg.at("generator").at("params").value("k", 1);
    const std::size_t n_samples = cfg.at("checks").value("n_samples", 100000);
    std::vector<Real> N_list;
    for (const auto& n : cfg.at("checks").at("N_list")) N_list.push_back(n.get<Real>());

    const CheckReport h2 = check_h2(bundle.generator, bundle.envelope, box, n_samples);
    const CheckReport h3 = check_h3(bundle.generator, bundle.envelope, box, n_samples);
    const CheckReport h4 = check_h4(bundle.generator, bundle.envelope, box, n_samples, N_list);

    CsvWriter csv((dir / "assumption_checks.csv").string());
    csv.header({"assumption", "pass", "margin", "lhs", "rhs", "n_samples"});
    for (const CheckReport* r : {&h2, &h3, &h4}) {
        csv.row({r->assumption, r->pass ? "1" : "0", fmt_real(r->worst.margin),
                 fmt_real(r->worst.lhs), fmt_real(r->worst.rhs),
                 std::to_string(r->n_samples)});
        rec.verdicts[r->assumption] = r->pass ? "pass" : "fail";
        rec.metrics[r->assumption + "_margin"] = r->worst.margin;
    }
    rec.artifacts.push_back((dir / "assumption_checks.csv").string());
    return rec;
}

inline ResultRecord mollify_demo(const Json& cfg, unsigned) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const ExampleBundle bundle = build::generator_from(cfg.at("generator"));
    const Json& mc = cfg.at("mollify");
    const int quad_nodes = mc.value("quad_nodes", 32);
    const Real N = mc.value("N", 1.0);
    const std::size_t rho_density = mc.value("rho_density", 1000);
    const std::size_t bound_samples = mc.value("bound_samples", 10000);
    const Real threshold = mc.value("threshold", 1e-2);
    const ScalarField h = [](Real, std::span<const Real> x) { return std::exp(-norm2(x)); };

    SampleBox box;
    box.dim_k = cfg.at("generator").at("params").value("k", 1);

    CsvWriter csv((dir / "mollify_ladder.csv").string());
    csv.header({"n", "rho_N", "max_abs_fn", "violations_c"});

    const std::vector<Real> xref(box.dim_k, 0.0);
    const CounterRng rng(derive_stream(cfg.at("seed").get<std::uint64_t>(), "mollify_demo"));
    Real prev_rho = std::numeric_limits<Real>::infinity();
    bool monotone = true;
    Real final_rho = 0.0;
    std::size_t total_violations = 0;

    for (const auto& nj : mc.at("schedule")) {
        const int n = nj.get<int>();
        const ApproxGenerator fn =
            mollify_generator(bundle.generator, bundle.envelope, n, h, quad_nodes);
        const int d = bundle.generator.dim_d, dz = d * bundle.generator.dim_r;
        std::vector<Real> x(box.dim_k), y(d), z(dz), f(d);
        Real max_abs = 0.0;
        std::size_t violations = 0;
        const Real p = bundle.envelope.p;
        for (std::size_t i = 0; i < bound_samples; ++i) {
            const Real t = rng.uniform(i, 0, 0);
            for (int c = 0; c < box.dim_k; ++c)
                x[c] = box.x_half * (2 * rng.uniform(i, 1, c) - 1);
            for (int c = 0; c < d; ++c) y[c] = box.y_half * (2 * rng.uniform(i, 2, c) - 1);
            for (int c = 0; c < dz; ++c) z[c] = box.z_half * (2 * rng.uniform(i, 3, c) - 1);
            fn.eval(t, x, y, z, f);
            const Real af = norm2(f);
            max_abs = std::max(max_abs, af);
            if (af > 2.0 * p + 3.0 * std::pow(static_cast<Real>(n), p) + 1e-9) ++violations;
        }
        const Real rho = rho_N(fn.to_generator(), bundle.generator, N, 0.5, xref, rho_density);
        csv.row_values({static_cast<Real>(n), rho, max_abs, static_cast<Real>(violations)});
        if (rho >= prev_rho) monotone = false;
        prev_rho = rho;
        final_rho = rho;
        total_violations += violations;
    }
    rec.artifacts.push_back((dir / "mollify_ladder.csv").string());
    rec.metrics["final_rho"] = final_rho;
    rec.metrics["violations_c"] = total_violations;
    rec.verdicts["bound_c"] = total_violations == 0 ? "pass" : "fail";
    rec.verdicts["rho_strictly_decreasing"] = monotone ? "pass" : "fail";
    rec.verdicts["rho_final_below_threshold"] = final_rho < threshold ? "pass" : "fail";
    return rec;
}

inline ResultRecord solve_bsde(const Json& cfg, unsigned jobs) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const ExampleBundle bundle = build::generator_from(cfg.at("generator"));

    BsdeProblem problem;
    problem.generator = bundle.generator;
    problem.diffusion = build::diffusion_from(cfg.at("diffusion"));
    problem.grid = build::grid_from(cfg.at("grid"));
    problem.terminal = build::terminal_from(cfg.at("terminal"), bundle.generator.dim_d);
    problem.x0.assign(problem.diffusion.dim_k, cfg.value("x0", 0.0));

    const SolverConfig solver = build::solver_from(cfg.at("solver"), seed);
    const PathBatch paths = simulate_paths(problem.diffusion, problem.grid, problem.x0,
                                           solver.n_paths, seed, jobs);
    const BsdeSolution sol = solve_backward(problem, paths, solver);

    CsvWriter csv((dir / "bsde_steps.csv").string());
    csv.header({"t", "mean_abs_y", "mean_abs_z", "residual", "clip_count"});
    for (std::size_t i = 0; i < sol.n_steps; ++i) {
        Real my = 0.0, mz = 0.0;
        for (std::size_t p = 0; p < sol.n_paths; ++p) {
            my += norm2(sol.y(p, i));
            mz += norm2(sol.z(p, i));
        }
        my /= static_cast<Real>(sol.n_paths);
        mz /= static_cast<Real>(sol.n_paths);
        csv.row_values({problem.grid.points[i], my, mz, sol.diagnostics[i].regression_rms,
                        static_cast<Real>(sol.diagnostics[i].clip_count)});
    }
    rec.artifacts.push_back((dir / "bsde_steps.csv").string());

    const auto y0 = sol.y0_mean();
    Real spread = 0.0;
    for (std::size_t p = 0; p < sol.n_paths; ++p) {
        Real d2 = 0.0;
        auto yp = sol.y(p, 0);
        for (int c = 0; c < sol.dim_d; ++c) d2 += sqr(yp[c] - y0[c]);
        spread += d2;
    }
    const Real stderr_y0 =
        std::sqrt(spread / static_cast<Real>(sol.n_paths)) /
        std::sqrt(static_cast<Real>(sol.n_paths));
    rec.metrics["Y0"] = y0[0];
    rec.metrics["Y0_stderr"] = stderr_y0;
    rec.metrics["seed"] = seed;

    if (cfg.contains("oracle") && cfg.at("oracle").value("kind", "none") != "none") {
        Json oracle = cfg.at("oracle");
        oracle["T"] = problem.grid.T;
        const Real expected = build::oracle_value(oracle, problem.grid.t0);
        const Real tol = cfg.value("tolerance", 1e-3);
        const Real denom = std::abs(expected) > 1e-12 ? std::abs(expected) : 1.0;
        const Real rel = std::abs(y0[0] - expected) / denom;
        rec.metrics["oracle"] = expected;
        rec.metrics["rel_error"] = rel;
        rec.verdicts["oracle"] = rel <= tol ? "pass" : "fail";
    } else {
        rec.verdicts["finite"] = "pass";
    }
    return rec;
}

inline ResultRecord apriori_check_pipeline(const Json& cfg, unsigned) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const Json& ap = cfg.at("apriori");

    auto instance = [&](Real xi, Real K) {
        AprioriInstance inst;
        inst.label = "xi=" + fmt_real(xi) + ",K=" + fmt_real(K);
        ExampleParams prm;
        prm.K = K;
        prm.p = ap.value("p", 2.0);
        prm.gamma = ap.value("gamma", 0.2);
        ExampleBundle bundle = make_example(ExampleKind::LogDrift, prm);
        inst.problem.generator = bundle.generator;
        inst.env = bundle.envelope;
        inst.problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
        inst.problem.grid = build::grid_from(cfg.at("grid"));
        inst.problem.terminal = TerminalCondition::value({xi});
        inst.problem.x0 = {0.0};
        return inst;
    };

    const AprioriInstance cal = instance(ap.at("calibration").at("xi").get<Real>(),
                                         ap.at("calibration").at("K").get<Real>());
    std::vector<AprioriInstance> sweep;
    for (const auto& row : ap.at("sweep"))
        sweep.push_back(instance(row.at("xi").get<Real>(), row.at("K").get<Real>()));

    const SolverConfig solver = build::solver_from(cfg.at("solver"), seed);
    const EstimateReport report = apriori_check(cal, sweep, solver, ap.value("margin", 1.5));

    CsvWriter csv((dir / "apriori_sweep.csv").string());
    csv.header({"instance", "lhs", "rhs", "ratio_vs_C", "lambda_ratio_vs_C"});
    for (const auto& row : report.rows)
        csv.row({row.label, fmt_real(row.lhs), fmt_real(row.rhs), fmt_real(row.ratio),
                 fmt_real(row.lambda_ratio)});
    rec.artifacts.push_back((dir / "apriori_sweep.csv").string());

    rec.metrics["fitted_C"] = report.fitted_C;
    rec.metrics["fitted_C_lambda"] = report.fitted_C_lambda;
    rec.metrics["worst_ratio"] = report.worst_ratio;
    rec.verdicts["apriori"] = report.verdict;
    return rec;
}

inline ResultRecord stability_sweep_pipeline(const Json& cfg, unsigned) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const ExampleBundle bundle = build::generator_from(cfg.at("generator"));
    const Json& st = cfg.at("stability");

    BsdeProblem problem;
    problem.generator = bundle.generator;
    problem.diffusion = diffusions::constant(1, 1, 0.0, 0.0);
    problem.grid = build::grid_from(cfg.at("grid"));
    problem.terminal = build::terminal_from(cfg.at("terminal"), bundle.generator.dim_d);
    problem.x0 = {0.0};

    const std::vector<Real> reference =
        ode_reduction_solve(problem.generator, problem.terminal.constant, problem.grid);

    std::vector<int> schedule;
    for (const auto& n : st.at("schedule")) schedule.push_back(n.get<int>());
    const ScalarField h = [](Real, std::span<const Real> x) { return std::exp(-norm2(x)); };

    const SolverConfig solver = build::solver_from(cfg.at("solver"), seed);
    const StabilityCurve curve = stability_sweep(
        problem, bundle.envelope, schedule, h, solver, st.value("p_prime", 1.5), reference,
        st.value("N", 1.0), st.value("rho_density", 200), st.value("threshold", 1e-2),
        st.value("quad_nodes", 32));

    CsvWriter csv((dir / "stability_sweep.csv").string());
    csv.header({"n", "y_err", "z_err", "rho_N"});
    for (const auto& row : curve.rows)
        csv.row_values({static_cast<Real>(row.n), row.y_err, row.z_err, row.rho});
    rec.artifacts.push_back((dir / "stability_sweep.csv").string());

    rec.metrics["final_y_err"] = curve.rows.empty() ? 0.0 : curve.rows.back().y_err;
    rec.verdicts["nonincreasing"] = curve.nonincreasing_after_peak ? "pass" : "fail";
    rec.verdicts["final_below_threshold"] = curve.final_below_threshold ? "pass" : "fail";
    return rec;
}

inline ResultRecord pde_compare(const Json& cfg, unsigned jobs) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const Json& pd = cfg.at("pde");
    const ExampleBundle bundle = build::generator_from(cfg.at("generator"));

    PdeProblem problem;
    problem.diffusion = build::diffusion_from(cfg.at("diffusion"));
    problem.terminal_g = build::terminal_from(cfg.at("terminal"), bundle.generator.dim_d);
    problem.F = bundle.generator;
    problem.F.x_dependent = true;
    problem.T = cfg.at("grid").value("T", 1.0);
    problem.env.delta = pd.value("delta", 1.0);
    problem.env.p_bar = 2.0;
    problem.env.eta_p = constant_field(1.0);
    problem.env.eta_bar_p = bundle.envelope.eta_bar;
    problem.env.alpha = bundle.envelope.alpha;
    problem.env.alpha_prime = bundle.envelope.alpha_prime;

    std::vector<Real> t_nodes;
    for (const auto& t : pd.at("t_nodes")) t_nodes.push_back(t.get<Real>());
    const std::size_t n_x = pd.at("n_x").get<std::size_t>();
    const Real x_lo = pd.value("x_min", -2.0), x_hi = pd.value("x_max", 2.0);
    std::vector<std::vector<Real>> x_nodes(n_x, std::vector<Real>(1));
    for (std::size_t i = 0; i < n_x; ++i)
        x_nodes[i][0] =
            x_lo + (x_hi - x_lo) * static_cast<Real>(i) / static_cast<Real>(n_x - 1);

    SolverConfig solver = build::solver_from(cfg.at("solver"), seed);
    const PdeField mc = mc_field(problem, t_nodes, x_nodes, solver,
                                 pd.value("steps_per_unit_time", 64.0), jobs);

    const std::string mode = pd.at("mode").get<std::string>();
    PdeField ref;
    bool peclet = false;
    if (mode == "fd") {
        FdMesh mesh;
        mesh.nx = pd.at("fd").value("nx", 641);
        mesh.nt = pd.at("fd").value("nt", 400);
        mesh.x_min = pd.at("fd").value("x_min", -8.0);
        mesh.x_max = pd.at("fd").value("x_max", 8.0);
        ref = fd_reference_1d(problem, mesh, {}, &peclet);
    } else if (mode == "characteristics") {
        ref = characteristics_oracle(problem, t_nodes, x_nodes);
    } else {
        fail("config-error", "unknown pde mode: " + mode);
    }

    // field CSV: t, x, u, z, provenance
    CsvWriter csv((dir / "pde_field.csv").string());
    csv.header({"t", "x", "u_mc", "z_mc", "u_ref", "provenance"});
    auto ref_u = [&](Real t, Real x) {
        if (mode == "characteristics") return 0.0;  // filled from aligned nodes below
        std::size_t m = 0;
        while (m + 2 < ref.nt() && ref.t_nodes[m + 1] <= t) ++m;
        std::size_t i = 0;
        while (i + 2 < ref.nx() && ref.x_nodes[i + 1][0] <= x) ++i;
        const Real t0 = ref.t_nodes[m], t1 = ref.t_nodes[std::min(m + 1, ref.nt() - 1)];
        const Real x0 = ref.x_nodes[i][0], x1 = ref.x_nodes[std::min(i + 1, ref.nx() - 1)][0];
        const Real wt = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        const Real wx = x1 > x0 ? std::clamp((x - x0) / (x1 - x0), 0.0, 1.0) : 0.0;
        auto v = [&](std::size_t a, std::size_t b) { return ref.u_at(a, b)[0]; };
        const std::size_t i1 = std::min(i + 1, ref.nx() - 1), m1 = std::min(m + 1, ref.nt() - 1);
        return (1 - wt) * ((1 - wx) * v(m, i) + wx * v(m, i1)) +
               wt * ((1 - wx) * v(m1, i) + wx * v(m1, i1));
    };

    Real max_abs_diff = 0.0, werr2 = 0.0, wref2 = 0.0;
    std::vector<Real> axis(n_x);
    for (std::size_t i = 0; i < n_x; ++i) axis[i] = x_nodes[i][0];
    const std::vector<Real> w = trapezoid_weights(axis);
    const Real delta_p = delta_prime(problem.env.delta,
                                     problem.env.M_prime > 0
                                         ? kappa_prime(problem.working_p(), problem.env.p_bar,
                                                       problem.env.M_prime, problem.T)
                                         : 0.0,
                                     problem.env.M_prime);
    for (std::size_t a = 0; a < mc.nt(); ++a) {
        for (std::size_t i = 0; i < n_x; ++i) {
            if (!mc.node_ok(a, i)) {
                rec.verdicts["all_nodes_ok"] = "inconclusive";
                continue;
            }
            const Real u_mc = mc.u_at(a, i)[0];
            const Real u_ref =
                mode == "characteristics" ? ref.u_at(a, i)[0] : ref_u(t_nodes[a], axis[i]);
            csv.row({fmt_real(t_nodes[a]), fmt_real(axis[i]), fmt_real(u_mc),
                     fmt_real(mc.z_at(a, i)[0]), fmt_real(u_ref), "monte_carlo"});
            max_abs_diff = std::max(max_abs_diff, std::abs(u_mc - u_ref));
            const Real weight = w[i] * std::exp(-delta_p * std::abs(axis[i]));
            werr2 += weight * sqr(u_mc - u_ref);
            wref2 += weight * sqr(u_ref);
        }
    }
    rec.artifacts.push_back((dir / "pde_field.csv").string());
    if (pd.value("dump_reference", false)) {
        CsvWriter ref_csv((dir / "pde_reference_field.csv").string());
        ref_csv.header({"t", "x", "u", "z", "provenance"});
        const std::string prov =
            mode == "characteristics" ? "characteristics" : "finite_difference";
        for (std::size_t m = 0; m < ref.nt(); ++m)
            for (std::size_t i = 0; i < ref.nx(); ++i)
                ref_csv.row({fmt_real(ref.t_nodes[m]), fmt_real(ref.x_nodes[i][0]),
                             fmt_real(ref.u_at(m, i)[0]), fmt_real(ref.z_at(m, i)[0]), prov});
        rec.artifacts.push_back((dir / "pde_reference_field.csv").string());
    }

    const Real weighted_rel = wref2 > 0 ? std::sqrt(werr2 / wref2) : 0.0;
    rec.metrics["max_abs_diff"] = max_abs_diff;
    rec.metrics["weighted_rel_error"] = weighted_rel;
    rec.metrics["delta_prime"] = delta_p;
    rec.metrics["budget_n_paths"] = solver.n_paths;
    rec.metrics["budget_steps_per_unit_time"] = pd.value("steps_per_unit_time", 64.0);
    if (peclet) rec.metrics["peclet_warning"] = 1.0;

    const std::string metric = pd.value("verdict_metric", std::string("weighted"));
    const Real tol = pd.value("tolerance", 0.05);
    const Real observed = metric == "max_abs" ? max_abs_diff : weighted_rel;
    rec.verdicts["agreement"] = observed <= tol ? "pass" : "fail";

    if (cfg.contains("oracle") && cfg.at("oracle").value("kind", "none") != "none") {
        Json oracle = cfg.at("oracle");
        oracle["T"] = problem.T;
        Real worst = 0.0;
        for (std::size_t a = 0; a < mc.nt(); ++a) {
            const Real expected = build::oracle_value(oracle, t_nodes[a]);
            for (std::size_t i = 0; i < n_x; ++i)
                if (mc.node_ok(a, i))
                    worst = std::max(worst, std::abs(mc.u_at(a, i)[0] - expected));
        }
        rec.metrics["max_err_vs_closed_form"] = worst;
        rec.verdicts["closed_form"] =
            worst <= cfg.value("oracle_tolerance", 0.02) ? "pass" : "fail";
    }
    return rec;
}

inline ResultRecord linearlog(const Json& cfg, unsigned jobs) {
    ResultRecord rec;
    const auto dir = out_dir_of(cfg);
    const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
    const Json& ll = cfg.at("linearlog");
    const Real a = ll.value("a", 0.4);
    const Real c0 = ll.value("c0", 2.0);
    const Real K = ll.value("K", 0.5);

    const MatrixField A = [a](Real, std::span<const Real>, std::span<Real> out) {
        out[0] = a;
    };
    const MatrixField B = [](Real, std::span<const Real>, std::span<Real> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    const MatrixField C = [](Real, std::span<const Real>, std::span<Real> out) {
        std::fill(out.begin(), out.end(), 0.0);
    };
    PdeProblem problem = make_linear_log_pde(A, B, C, TerminalCondition::value({c0}),
                                             build::diffusion_from(cfg.at("diffusion")),
                                             cfg.at("grid").value("T", 1.0), K, 1);

    std::vector<Real> t_nodes = {0.0};
    std::vector<std::vector<Real>> x_nodes = {{-1.0}, {0.0}, {1.0}};
    SolverConfig solver = build::solver_from(cfg.at("solver"), seed);
    const PdeField mc = mc_field(problem, t_nodes, x_nodes, solver,
                                 cfg.at("grid").at("n_steps").get<Real>(), jobs);

    const Real expected = c0 * std::exp(a * problem.T);
    Real worst = 0.0;
    CsvWriter csv((dir / "linearlog_field.csv").string());
    csv.header({"t", "x", "u_mc", "u_oracle"});
    for (std::size_t i = 0; i < x_nodes.size(); ++i) {
        csv.row_values({0.0, x_nodes[i][0], mc.u_at(0, i)[0], expected});
        worst = std::max(worst, std::abs(mc.u_at(0, i)[0] - expected) / expected);
    }
    rec.artifacts.push_back((dir / "linearlog_field.csv").string());
    rec.metrics["rel_err"] = worst;
    rec.verdicts["oracle"] = worst <= ll.value("tolerance", 1e-3) ? "pass" : "fail";

    // local log-Lipschitz claim with K'' = 1 + 4Kd + K^2
    SampleBox box;
    box.dim_k = 1;
    const AssumptionEnvelope env = to_bsde_envelope(problem);
    const CheckReport h4 = check_h4(problem.F, env, box, 20000, {20.0, 50.0});
    rec.metrics["h4_margin"] = h4.worst.margin;
    rec.verdicts["h4"] = h4.pass ? "pass" : "fail";
    return rec;
}

}  // namespace pipelines

// ---------------------------------------------------------------------------
// scenario registry

inline Json pipeline_default_config(const std::string& pipeline) {
    Json cfg;
    cfg["schema_version"] = kSchemaVersion;
    cfg["scenario"] = pipeline;
    cfg["pipeline"] = pipeline;
    cfg["seed"] = 20240901;
    cfg["out_dir"] = "out/" + pipeline;
    cfg["generator"] = {{"kind", "log_drift"},
                        {"params",
                         {{"d", 1}, {"k", 1}, {"r", 1}, {"p", 2.0}, {"gamma", 0.2},
                          {"K", 1.0}, {"eps0", 0.5}, {"q_bar", 1.0}, {"c", 0.5},
                          {"kappa", 0.5}, {"q_bar_p", 0.4}, {"q_bar_pp", 0.5}}}};
    cfg["diffusion"] = {{"k", 1}, {"r", 1}, {"sigma", 0.0}, {"b_const", 0.0}, {"b_scale", 0.0}};
    cfg["terminal"] = {{"kind", "constant"}, {"value", std::exp(1.0)}};
    cfg["grid"] = {{"t0", 0.0}, {"T", 1.0}, {"n_steps", 256}};
    cfg["x0"] = 0.0;
    cfg["solver"] = {{"n_paths", 256},   {"scheme", "implicit"},
                     {"picard_iters", 60}, {"picard_tol", 1e-12},
                     {"damping", 0.5},     {"y_clip", 0.0},
                     {"z_estimator", "increment_regression"},
                     {"basis", {{"kind", "global_poly"}, {"degree", 1}, {"n_cells", 8}}}};
    cfg["tolerance"] = 1e-3;
    cfg["n_paths"] = 100000;
    cfg["kappa"] = 0.25;
    cfg["dump_binary"] = false;
    cfg["checks"] = {{"n_samples", 100000}, {"N_list", {10.0, 100.0}}};
    cfg["mollify"] = {{"schedule", {4, 8, 16, 32}}, {"quad_nodes", 32},  {"N", 1.0},
                      {"rho_density", 1000},        {"bound_samples", 10000},
                      {"threshold", 1e-2}};
    cfg["stability"] = {{"schedule", {4, 8, 16, 32}}, {"p_prime", 1.5}, {"threshold", 1e-2},
                        {"N", 1.0},                   {"rho_density", 200},
                        {"quad_nodes", 32}};
    cfg["apriori"] = {{"p", 2.0},
                      {"gamma", 0.2},
                      {"margin", 1.5},
                      {"calibration", {{"xi", std::exp(1.0)}, {"K", 1.0}}},
                      {"sweep", Json::array()}};
    cfg["pde"] = {{"mode", "fd"},
                  {"dump_reference", false},
                  {"t_nodes", {0.0}},
                  {"n_x", 21},
                  {"x_min", -2.0},
                  {"x_max", 2.0},
                  {"delta", 1.0},
                  {"steps_per_unit_time", 64.0},
                  {"tolerance", 0.05},
                  {"verdict_metric", "weighted"},
                  {"fd", {{"nx", 641}, {"nt", 400}, {"x_min", -8.0}, {"x_max", 8.0}}}};
    cfg["oracle"] = {{"kind", "none"}, {"xi", std::exp(1.0)}, {"K", 1.0}, {"T", 1.0},
                     {"a", 0.0}, {"c0", 1.0}, {"value", 0.0}};
    cfg["oracle_tolerance"] = 0.02;
    cfg["linearlog"] = {{"a", 0.4}, {"c0", 2.0}, {"K", 0.5}, {"tolerance", 1e-3}};
    return cfg;
}

inline std::vector<std::string> list_scenarios() {
    return {"example1-oracle",  "example2-product",   "example3-state",
            "example4-monotone", "example5-composite", "neveu-pde",
            "mollify-ladder",    "stability-ladder",   "apriori-sweep",
            "pde-heat-crosscheck", "pde-degenerate",   "linearlog-pde",
            "zero"};
}

/// Registered default config of one scenario (a full pipeline config).
inline Json scenario_config(const std::string& name) {
    auto base = [&](const std::string& pipeline) {
        Json cfg = pipeline_default_config(pipeline);
        cfg["scenario"] = name;
        cfg["out_dir"] = "out/" + name;
        return cfg;
    };
    if (name == "example1-oracle") {
        Json cfg = base("solve-bsde");
        cfg["grid"]["n_steps"] = 1000;
        cfg["oracle"] = {{"kind", "log_fixed"}, {"xi", std::exp(1.0)}, {"K", 1.0}};
        return cfg;
    }
    if (name == "zero") {
        Json cfg = base("solve-bsde");
        cfg["generator"]["kind"] = "zero";
        cfg["terminal"]["value"] = 0.0;
        cfg["grid"]["n_steps"] = 32;
        cfg["oracle"] = {{"kind", "constant"}, {"value", 0.0}};
        cfg["tolerance"] = 1e-12;
        return cfg;
    }
    if (name == "example2-product") {
        Json cfg = base("check-assumptions");
        cfg["generator"]["kind"] = "gh_product";
        return cfg;
    }
    if (name == "example3-state") {
        Json cfg = base("check-assumptions");
        cfg["generator"]["kind"] = "state_coupled";
        return cfg;
    }
    if (name == "example4-monotone") {
        Json cfg = base("check-assumptions");
        cfg["generator"]["kind"] = "stochastic_monotone";
        return cfg;
    }
    if (name == "example5-composite") {
        Json cfg = base("check-assumptions");
        cfg["generator"]["kind"] = "composite5";
        return cfg;
    }
    if (name == "neveu-pde") {
        Json cfg = base("pde-compare");
        cfg["generator"]["kind"] = "neveu";
        cfg["diffusion"]["sigma"] = std::sqrt(2.0);
        cfg["pde"]["n_x"] = 5;
        cfg["pde"]["steps_per_unit_time"] = 128.0;
        cfg["solver"]["n_paths"] = 2000;
        cfg["solver"]["basis"]["degree"] = 3;
        cfg["pde"]["tolerance"] = 0.02;
        cfg["oracle"] = {{"kind", "log_fixed"}, {"xi", std::exp(1.0)}, {"K", 1.0}};
        cfg["oracle_tolerance"] = 0.03;
        return cfg;
    }
    if (name == "mollify-ladder") {
        Json cfg = base("mollify-demo");
        return cfg;
    }
    if (name == "stability-ladder") {
        Json cfg = base("stability-sweep");
        cfg["solver"]["n_paths"] = 128;
        return cfg;
    }
    if (name == "apriori-sweep") {
        Json cfg = base("apriori-check");
        cfg["grid"]["n_steps"] = 128;
        cfg["solver"]["n_paths"] = 10000;
        // six instances covering xi in {1/2, 1, 2, e} and K in {1/2, 1};
        // (xi = e, K = 1) is the calibration instance
        Json sweep = Json::array();
        for (Real xi : {0.5, 1.0, 2.0, std::exp(1.0)})
            sweep.push_back({{"xi", xi}, {"K", 0.5}});
        for (Real xi : {0.5, 2.0}) sweep.push_back({{"xi", xi}, {"K", 1.0}});
        cfg["apriori"]["sweep"] = sweep;
        return cfg;
    }
    if (name == "pde-heat-crosscheck") {
        Json cfg = base("pde-compare");
        cfg["generator"]["kind"] = "neveu";
        cfg["diffusion"]["sigma"] = std::sqrt(2.0);
        cfg["terminal"] = {{"kind", "bump_plus_one"}, {"value", 0.0}};
        cfg["solver"]["n_paths"] = 10000;
        cfg["solver"]["basis"]["degree"] = 4;
        cfg["pde"]["steps_per_unit_time"] = 64.0;
        return cfg;
    }
    if (name == "pde-degenerate") {
        Json cfg = base("pde-compare");
        cfg["generator"]["kind"] = "neveu";
        cfg["diffusion"]["sigma"] = 0.0;
        cfg["diffusion"]["b_scale"] = -1.0;
        cfg["pde"]["mode"] = "characteristics";
        cfg["pde"]["n_x"] = 5;
        cfg["pde"]["steps_per_unit_time"] = 2000000.0;
        cfg["pde"]["tolerance"] = 1e-6;
        cfg["pde"]["verdict_metric"] = "max_abs";
        cfg["solver"]["n_paths"] = 2;
        cfg["solver"]["basis"]["degree"] = 0;
        // fixed-point truncation accumulates over ~2e6 steps; keep it far
        // below the dt bias
        cfg["solver"]["picard_tol"] = 1e-15;
        cfg["solver"]["picard_iters"] = 120;
        cfg["oracle"] = {{"kind", "log_fixed"}, {"xi", std::exp(1.0)}, {"K", 1.0}};
        cfg["oracle_tolerance"] = 1e-5;
        return cfg;
    }
    if (name == "linearlog-pde") {
        Json cfg = base("linearlog");
        cfg["diffusion"]["sigma"] = 1.0;
        cfg["grid"]["n_steps"] = 512;
        cfg["solver"]["n_paths"] = 512;
        cfg["solver"]["basis"]["degree"] = 2;
        return cfg;
    }
    fail("config-error", "unknown scenario: " + name);
}

/// Validates, resolves, stamps and runs a pipeline config; writes the result
/// record and the resolved config next to the artifacts.
inline ResultRecord run_scenario(const Json& config, unsigned jobs = 0) {
    require(config.contains("schema_version"), "config-error",
            "config is missing schema_version");
    require(config.at("schema_version").get<int>() == kSchemaVersion, "config-error",
            "unsupported schema_version");
    const std::string pipeline = config.value("pipeline", std::string());
    require(!pipeline.empty(), "config-error", "config is missing pipeline");
    validate_against(pipeline_default_config(pipeline), config, "");
    const Json resolved = merge_config(pipeline_default_config(pipeline), config);

    const auto start = std::chrono::steady_clock::now();
    ResultRecord rec;
    if (pipeline == "simulate-forward")
        rec = pipelines::simulate_forward(resolved, jobs);
    else if (pipeline == "check-assumptions")
        rec = pipelines::check_assumptions(resolved, jobs);
    else if (pipeline == "mollify-demo")
        rec = pipelines::mollify_demo(resolved, jobs);
    else if (pipeline == "solve-bsde")
        rec = pipelines::solve_bsde(resolved, jobs);
    else if (pipeline == "apriori-check")
        rec = pipelines::apriori_check_pipeline(resolved, jobs);
    else if (pipeline == "stability-sweep")
        rec = pipelines::stability_sweep_pipeline(resolved, jobs);
    else if (pipeline == "pde-compare")
        rec = pipelines::pde_compare(resolved, jobs);
    else if (pipeline == "linearlog")
        rec = pipelines::linearlog(resolved, jobs);
    else
        fail("config-error", "unknown pipeline: " + pipeline);

    rec.scenario = resolved.value("scenario", pipeline);
    rec.config_hash = config_hash(resolved);
    rec.wall_time_s =
        std::chrono::duration<Real>(std::chrono::steady_clock::now() - start).count();

    const auto dir = pipelines::out_dir_of(resolved);
    {
        std::ofstream f(dir / "config.json");
        f << resolved.dump(2) << '\n';
    }
    {
        std::ofstream f(dir / "result.json");
        f << rec.to_json().dump(2) << '\n';
    }
    return rec;
}

}  // namespace logbsde
