#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "logbsde/bsde_solver.hpp"
#include "logbsde/mollify.hpp"
#include "logbsde/quadrature.hpp"

namespace logbsde {

/// Discount weight e_t = exp(int_0^t lambda) and the estimate functional
///   Lambda_t = |Y_t|^2 e_t + 2 int_0^t e eta + (int_0^t sqrt(e) f0)^2
/// along one path, by trapezoid quadrature on the grid.
struct WeightedProcesses {
    std::vector<Real> e;
    std::vector<Real> Lambda;
};

inline WeightedProcesses lambda_path(std::span<const Real> Y, const AssumptionEnvelope& env,
                                     std::span<const Real> X, const TimeGrid& grid, int d,
                                     int k) {
    const std::size_t n = grid.n_steps();
    require(Y.size() == (n + 1) * static_cast<std::size_t>(d), "invalid-parameters",
            "lambda_path: Y length mismatch");
    require(X.size() == (n + 1) * static_cast<std::size_t>(k), "invalid-parameters",
            "lambda_path: X length mismatch");

    std::vector<Real> lam(n + 1), eta(n + 1), f0(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        const Real t = grid.points[i];
        std::span<const Real> x{X.data() + i * k, static_cast<std::size_t>(k)};
        lam[i] = lambda_weight(env, t, x);
        eta[i] = env.eta(t, x);
        f0[i] = env.f0(t, x);
    }
    const std::vector<Real> lam_int = cumulative_trapezoid(grid.points, lam);

    WeightedProcesses out;
    out.e.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out.e[i] = std::exp(lam_int[i]);

    std::vector<Real> e_eta(n + 1), se_f0(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        e_eta[i] = out.e[i] * eta[i];
        se_f0[i] = std::sqrt(out.e[i]) * f0[i];
    }
    const std::vector<Real> int_eta = cumulative_trapezoid(grid.points, e_eta);
    const std::vector<Real> int_f0 = cumulative_trapezoid(grid.points, se_f0);

    out.Lambda.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        Real y2 = 0.0;
        for (int c = 0; c < d; ++c) y2 += sqr(Y[i * d + c]);
        out.Lambda[i] = y2 * out.e[i] + 2.0 * int_eta[i] + sqr(int_f0[i]);
    }
    return out;
}

struct BootstrapEstimate {
    Real value = 0.0;
    Real lo = 0.0;
    Real hi = 0.0;
};

namespace detail {

inline BootstrapEstimate bootstrap_mean(const std::vector<Real>& per_path, std::size_t n_boot,
                                        std::uint64_t seed) {
    BootstrapEstimate est;
    const std::size_t P = per_path.size();
    Real mean = 0.0;
    for (Real v : per_path) mean += v;
    mean /= static_cast<Real>(P);
    est.value = mean;
    if (n_boot == 0) {
        est.lo = est.hi = mean;
        return est;
    }
    const CounterRng rng(derive_stream(seed, "bootstrap"));
    std::vector<Real> stats(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
        Real s = 0.0;
        for (std::size_t i = 0; i < P; ++i) {
            const auto idx = static_cast<std::size_t>(rng.uniform(b, i, 0) * P);
            s += per_path[std::min(idx, P - 1)];
        }
        stats[b] = s / static_cast<Real>(P);
    }
    std::sort(stats.begin(), stats.end());
    est.lo = stats[static_cast<std::size_t>(0.025 * (n_boot - 1))];
    est.hi = stats[static_cast<std::size_t>(0.975 * (n_boot - 1))];
    return est;
}

}  // namespace detail

/// Solution-size functional E sup_t |Y_t|^p + E (int |Z|^2 ds)^{p/2} with a
/// percentile bootstrap interval over paths.
inline BootstrapEstimate theta_p(const BsdeSolution& sol, const TimeGrid& grid, Real p,
                                 std::size_t n_boot = 200, std::uint64_t seed = 4242) {
    require(p > 1.0, "invalid-exponents", "theta_p: p must exceed 1");
    std::vector<Real> per_path(sol.n_paths);
    for (std::size_t q = 0; q < sol.n_paths; ++q) {
        Real sup = 0.0;
        for (std::size_t i = 0; i <= sol.n_steps; ++i) sup = std::max(sup, norm2(sol.y(q, i)));
        Real zint = 0.0;
        for (std::size_t i = 0; i < sol.n_steps; ++i) {
            auto z = sol.z(q, i);
            zint += dot(z, z) * grid.dt(i);
        }
        per_path[q] = std::pow(sup, p) + std::pow(zint, 0.5 * p);
    }
    return detail::bootstrap_mean(per_path, n_boot, seed);
}

/// (2/alpha') ^ (p/alpha) ^ (p/alpha') ^ q (pointwise minimum).
inline Real beta_hat(Real p, Real q, Real alpha, Real alpha_prime) {
    require(p > 1.0, "invalid-exponents", "beta_hat: p must exceed 1");
    require(q > 1.0, "invalid-exponents", "beta_hat: q must exceed 1");
    require(alpha > 1.0 && alpha < p, "invalid-exponents",
            "beta_hat: alpha must lie in ]1, p[");
    require(alpha_prime > 1.0 && alpha_prime < std::min(p, Real(2)), "invalid-exponents",
            "beta_hat: alpha' must lie in ]1, p and 2[");
    return std::min(std::min(2.0 / alpha_prime, p / alpha), std::min(p / alpha_prime, q));
}

struct SweepRow {
    std::string label;
    Real lhs = 0.0;
    Real rhs = 0.0;
    Real ratio = 0.0;
    Real lambda_ratio = 0.0;  // Lambda-process form of the same estimate
    bool finite = true;
};

struct EstimateReport {
    Real lhs = 0.0;
    Real rhs = 0.0;
    Real fitted_C = 1.0;
    Real fitted_C_lambda = 1.0;
    Real worst_ratio = 0.0;
    std::string verdict = "pass";  // pass | fail | inconclusive
    std::vector<SweepRow> rows;
};

/// Absolute integrability bound: E int |f(s,Y,Z)|^beta_hat ds against
/// 9^{p+q}(1+T)[1 + E int eta_bar^q + E sup|Y|^p + E (int |Z|^2)^{p/2}].
inline EstimateReport integrability_check(const BsdeSolution& sol, const PathBatch& paths,
                                          const Generator& g, const AssumptionEnvelope& env) {
    const Real bhat = beta_hat(env.p, env.q, env.alpha, env.alpha_prime);
    const std::size_t n = sol.n_steps, P = sol.n_paths;
    const Real T = paths.grid.T - paths.grid.t0;
    std::vector<Real> fval(sol.dim_d);

    Real lhs = 0.0, eta_term = 0.0, sup_term = 0.0, z_term = 0.0;
    for (std::size_t q = 0; q < P; ++q) {
        Real acc = 0.0, acc_eta = 0.0, zint = 0.0, sup = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Real t = paths.grid.points[i];
            const Real dt = paths.grid.dt(i);
            g.eval(t, paths.state(q, i), sol.y(q, i), sol.z(q, i), fval);
            acc += std::pow(norm2(fval), bhat) * dt;
            acc_eta += std::pow(env.eta_bar(t, paths.state(q, i)), env.q) * dt;
            auto z = sol.z(q, i);
            zint += dot(z, z) * dt;
        }
        for (std::size_t i = 0; i <= n; ++i) sup = std::max(sup, norm2(sol.y(q, i)));
        lhs += acc;
        eta_term += acc_eta;
        sup_term += std::pow(sup, env.p);
        z_term += std::pow(zint, 0.5 * env.p);
    }
    lhs /= static_cast<Real>(P);
    eta_term /= static_cast<Real>(P);
    sup_term /= static_cast<Real>(P);
    z_term /= static_cast<Real>(P);

    EstimateReport report;
    report.lhs = lhs;
    report.rhs = std::pow(9.0, env.p + env.q) * (1.0 + T) *
                 (1.0 + eta_term + sup_term + z_term);
    report.fitted_C = 1.0;  // the bound is absolute
    report.worst_ratio = report.rhs > 0 ? lhs / report.rhs : 0.0;
    if (!std::isfinite(lhs) || !std::isfinite(report.rhs))
        report.verdict = "inconclusive";
    else
        report.verdict = lhs <= report.rhs + 1e-12 ? "pass" : "fail";
    return report;
}

struct AprioriInstance {
    std::string label;
    BsdeProblem problem;
    AssumptionEnvelope env;
};

namespace detail {

struct WeightedSides {
    Real lhs = 0.0;
    Real rhs = 0.0;
    Real lambda_lhs = 0.0;  // E sup Lambda^{p/2} + E (int e |Z|^2)^{p/2}
    Real lambda_rhs = 0.0;  // E Lambda_T^{p/2}
    bool finite = true;
};

inline WeightedSides weighted_sides(const AprioriInstance& inst, const SolverConfig& config) {
    const PathBatch paths = simulate_paths(inst.problem.diffusion, inst.problem.grid,
                                           inst.problem.x0, config.n_paths, config.seed);
    const BsdeSolution sol = solve_backward(inst.problem, paths, config);
    const std::size_t n = sol.n_steps, P = sol.n_paths;
    const int d = sol.dim_d, k = paths.dim_k;
    const Real p = inst.env.p;

    Real sup_term = 0.0, z_term = 0.0, xi_term = 0.0, eta_term = 0.0, f0_term = 0.0;
    Real lam_sup_term = 0.0, lam_T_term = 0.0;
    for (std::size_t q = 0; q < P; ++q) {
        std::span<const Real> Yq{sol.Y.data() + q * (n + 1) * d, (n + 1) * static_cast<std::size_t>(d)};
        std::span<const Real> Xq{paths.states.data() + q * (n + 1) * k,
                                 (n + 1) * static_cast<std::size_t>(k)};
        const WeightedProcesses wp = lambda_path(Yq, inst.env, Xq, inst.problem.grid, d, k);
        Real sup = 0.0, lam_sup = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            sup = std::max(sup, std::pow(norm2(sol.y(q, i)), p) * std::pow(wp.e[i], 0.5 * p));
            lam_sup = std::max(lam_sup, std::pow(wp.Lambda[i], 0.5 * p));
        }
        Real zint = 0.0, eta_int = 0.0, f0_int = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Real dt = inst.problem.grid.dt(i);
            auto z = sol.z(q, i);
            zint += wp.e[i] * dot(z, z) * dt;
            const Real t = inst.problem.grid.points[i];
            // trapezoid on the envelope fields
            const Real t1 = inst.problem.grid.points[i + 1];
            std::span<const Real> x0s{Xq.data() + i * k, static_cast<std::size_t>(k)};
            std::span<const Real> x1s{Xq.data() + (i + 1) * k, static_cast<std::size_t>(k)};
            eta_int += 0.5 * dt * (wp.e[i] * inst.env.eta(t, x0s) +
                                   wp.e[i + 1] * inst.env.eta(t1, x1s));
            f0_int += 0.5 * dt * (std::sqrt(wp.e[i]) * inst.env.f0(t, x0s) +
                                  std::sqrt(wp.e[i + 1]) * inst.env.f0(t1, x1s));
        }
        sup_term += sup;
        z_term += std::pow(zint, 0.5 * p);
        xi_term += std::pow(norm2(sol.y(q, n)), p) * std::pow(wp.e[n], 0.5 * p);
        eta_term += std::pow(eta_int, 0.5 * p);
        f0_term += std::pow(f0_int, p);
        lam_sup_term += lam_sup;
        lam_T_term += std::pow(wp.Lambda[n], 0.5 * p);
    }
    WeightedSides sides;
    sides.lhs = (sup_term + z_term) / static_cast<Real>(P);
    sides.rhs = (xi_term + eta_term + f0_term) / static_cast<Real>(P);
    sides.lambda_lhs = (lam_sup_term + z_term) / static_cast<Real>(P);
    sides.lambda_rhs = lam_T_term / static_cast<Real>(P);
    sides.finite = std::isfinite(sides.lhs) && std::isfinite(sides.rhs) &&
                   std::isfinite(sides.lambda_lhs) && std::isfinite(sides.lambda_rhs);
    return sides;
}

}  // namespace detail

/// Fits the estimate constant on a calibration instance (times a declared
/// margin) and requires LHS <= C RHS across the sweep: a falsifiable proxy
/// for the uniform-in-data constant of the weighted a-priori estimate.
/// Non-finite sides yield the distinct verdict "inconclusive".
inline EstimateReport apriori_check(const AprioriInstance& calibration,
                                    const std::vector<AprioriInstance>& sweep,
                                    const SolverConfig& config, Real margin = 1.5) {
    EstimateReport report;
    const auto cal = detail::weighted_sides(calibration, config);
    if (!cal.finite) {
        report.verdict = "inconclusive";
        return report;
    }
    report.lhs = cal.lhs;
    report.rhs = cal.rhs;
    report.fitted_C = cal.rhs > 1e-12 ? margin * cal.lhs / cal.rhs : margin;
    report.fitted_C_lambda =
        cal.lambda_rhs > 1e-12 ? margin * cal.lambda_lhs / cal.lambda_rhs : margin;

    bool any_inconclusive = false, any_fail = false;
    for (const auto& inst : sweep) {
        const auto sides = detail::weighted_sides(inst, config);
        SweepRow row;
        row.label = inst.label;
        row.lhs = sides.lhs;
        row.rhs = sides.rhs;
        row.finite = sides.finite;
        if (!sides.finite) {
            any_inconclusive = true;
        } else {
            row.ratio = sides.lhs / (report.fitted_C * sides.rhs + 1e-300);
            row.lambda_ratio =
                sides.lambda_lhs / (report.fitted_C_lambda * sides.lambda_rhs + 1e-300);
            report.worst_ratio = std::max(report.worst_ratio, row.ratio);
            if (sides.lhs > report.fitted_C * sides.rhs + 1e-12) any_fail = true;
            if (sides.lambda_lhs > report.fitted_C_lambda * sides.lambda_rhs + 1e-12)
                any_fail = true;
        }
        report.rows.push_back(row);
    }
    report.verdict = any_fail ? "fail" : (any_inconclusive ? "inconclusive" : "pass");
    return report;
}

struct StabilityRow {
    int n = 0;
    Real y_err = 0.0;  // E sup_t |Y^n - Y|^{p'}
    Real z_err = 0.0;  // E (int |Z^n - Z|^2)^{p'/2}
    Real rho = 0.0;    // rho_N(f_n - f) at the reference point
};

struct StabilityCurve {
    std::vector<StabilityRow> rows;
    bool nonincreasing_after_peak = true;
    bool final_below_threshold = true;
    Real threshold = 0.0;
};

/// Convergence experiment: solve with truncated terminal data and mollified
/// drivers along the schedule and chart the L^{p'} errors against a
/// reference path (deterministic oracle, or the solution itself when the
/// data is untouched).
inline StabilityCurve stability_sweep(const BsdeProblem& problem,
                                      const AssumptionEnvelope& env,
                                      const std::vector<int>& schedule, const ScalarField& h,
                                      const SolverConfig& config, Real p_prime,
                                      const std::vector<Real>& reference_path, Real rho_ball,
                                      std::size_t rho_density, Real threshold,
                                      int quad_nodes = 32) {
    require(std::is_sorted(schedule.begin(), schedule.end()), "invalid-parameters",
            "stability_sweep: schedule must be increasing");
    const std::size_t n = problem.grid.n_steps();
    const int d = problem.generator.dim_d;
    require(reference_path.size() == (n + 1) * static_cast<std::size_t>(d),
            "invalid-parameters", "stability_sweep: reference path length mismatch");

    const PathBatch paths = simulate_paths(problem.diffusion, problem.grid, problem.x0,
                                           config.n_paths, config.seed);
    StabilityCurve curve;
    curve.threshold = threshold;
    const std::vector<Real> xref(problem.diffusion.dim_k, 0.0);

    for (int level : schedule) {
        BsdeProblem approx = problem;
        const ApproxGenerator fn = mollify_generator(problem.generator, env, level, h,
                                                     quad_nodes);
        approx.generator = fn.to_generator();
        const TerminalCondition base_terminal = problem.terminal;
        approx.terminal = TerminalCondition::map(
            [base_terminal, level, d](std::span<const Real> x, std::span<Real> out) {
                base_terminal(x, out);
                const auto truncated = truncate_terminal({out.data(), out.size()}, level);
                std::copy(truncated.begin(), truncated.end(), out.begin());
            });
        const BsdeSolution sol = solve_backward(approx, paths, config);

        StabilityRow row;
        row.n = level;
        Real y_acc = 0.0, z_acc = 0.0;
        for (std::size_t q = 0; q < sol.n_paths; ++q) {
            Real sup = 0.0, zint = 0.0;
            for (std::size_t i = 0; i <= n; ++i) {
                Real diff2 = 0.0;
                auto y = sol.y(q, i);
                for (int c = 0; c < d; ++c) diff2 += sqr(y[c] - reference_path[i * d + c]);
                sup = std::max(sup, std::sqrt(diff2));
            }
            for (std::size_t i = 0; i < n; ++i) {
                auto z = sol.z(q, i);
                zint += dot(z, z) * problem.grid.dt(i);  // reference Z is 0 for the oracle
            }
            y_acc += std::pow(sup, p_prime);
            z_acc += std::pow(zint, 0.5 * p_prime);
        }
        row.y_err = y_acc / static_cast<Real>(sol.n_paths);
        row.z_err = z_acc / static_cast<Real>(sol.n_paths);
        row.rho = rho_N(approx.generator, problem.generator, rho_ball,
                        0.5 * (problem.grid.t0 + problem.grid.T), xref, rho_density);
        curve.rows.push_back(row);
    }

    std::size_t peak = 0;
    for (std::size_t i = 1; i < curve.rows.size(); ++i)
        if (curve.rows[i].y_err > curve.rows[peak].y_err) peak = i;
    for (std::size_t i = peak + 1; i < curve.rows.size(); ++i)
        if (curve.rows[i].y_err > curve.rows[i - 1].y_err * (1.0 + 1e-9))
            curve.nonincreasing_after_peak = false;
    if (!curve.rows.empty())
        curve.final_below_threshold = curve.rows.back().y_err < threshold;
    return curve;
}

}  // namespace logbsde
