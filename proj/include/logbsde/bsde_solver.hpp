#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "logbsde/checks.hpp"
#include "logbsde/forward_sde.hpp"
#include "logbsde/generator.hpp"
#include "logbsde/ode.hpp"
#include "logbsde/regression.hpp"

namespace logbsde {

/// Terminal data: either a function of X_T or a constant vector.
struct TerminalCondition {
    std::function<void(std::span<const Real> x, std::span<Real> out)> fn;
    std::vector<Real> constant;

    static TerminalCondition value(std::vector<Real> xi) {
        TerminalCondition t;
        t.constant = std::move(xi);
        return t;
    }
    static TerminalCondition map(std::function<void(std::span<const Real>, std::span<Real>)> g) {
        TerminalCondition t;
        t.fn = std::move(g);
        return t;
    }
    void operator()(std::span<const Real> x, std::span<Real> out) const {
        if (fn) {
            fn(x, out);
        } else {
            std::copy(constant.begin(), constant.end(), out.begin());
        }
    }
};

struct BsdeProblem {
    Generator generator;
    TerminalCondition terminal;
    DiffusionSpec diffusion;
    TimeGrid grid;
    std::vector<Real> x0;

    void validate() const {
        require(generator.dim_r == diffusion.dim_r, "invalid-parameters",
                "BsdeProblem: generator and diffusion Brownian dimensions differ");
        require(static_cast<int>(x0.size()) == diffusion.dim_k, "invalid-parameters",
                "BsdeProblem: x0 dimension mismatch");
        require(grid.n_steps() >= 1, "invalid-resolution",
                "BsdeProblem: time grid needs at least one step");
    }
};

enum class Scheme { Explicit, Implicit };

struct SolverConfig {
    std::size_t n_paths = 4096;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::Implicit;
    int picard_iters = 60;
    Real picard_tol = 1e-12;
    Real picard_damping = 0.5;
    RegressionBasis basis = RegressionBasis::global_poly(3);
    Real y_clip = 0.0;  // 0 => 10 (1 + max |xi|) from the simulated terminal
};

struct StepDiagnostics {
    Real regression_rms = 0.0;
    int rank = 0;
    bool rank_deficient = false;
    bool constant_target = false;
    std::size_t clip_count = 0;
    int picard_iterations = 0;
};

struct BsdeSolution {
    std::size_t n_paths = 0;
    int dim_d = 1;
    int dim_r = 1;
    std::size_t n_steps = 0;
    Scheme scheme = Scheme::Implicit;
    SolverConfig config;
    std::vector<Real> Y;             // n_paths x (n_steps+1) x d
    std::vector<Real> Z;             // n_paths x n_steps x (d*r)
    std::vector<Real> continuation;  // explicit scheme only: n_paths x n_steps x d
    std::vector<StepDiagnostics> diagnostics;
    Real y_clip_used = 0.0;

    std::span<const Real> y(std::size_t p, std::size_t i) const {
        return {Y.data() + (p * (n_steps + 1) + i) * dim_d, static_cast<std::size_t>(dim_d)};
    }
    std::span<Real> y(std::size_t p, std::size_t i) {
        return {Y.data() + (p * (n_steps + 1) + i) * dim_d, static_cast<std::size_t>(dim_d)};
    }
    std::span<const Real> z(std::size_t p, std::size_t i) const {
        return {Z.data() + (p * n_steps + i) * dim_d * dim_r,
                static_cast<std::size_t>(dim_d * dim_r)};
    }
    std::span<Real> z(std::size_t p, std::size_t i) {
        return {Z.data() + (p * n_steps + i) * dim_d * dim_r,
                static_cast<std::size_t>(dim_d * dim_r)};
    }

    /// Cross-path mean of Y at the initial time.
    std::vector<Real> y0_mean() const {
        std::vector<Real> m(dim_d, 0.0);
        for (std::size_t p = 0; p < n_paths; ++p) {
            auto yp = y(p, 0);
            for (int c = 0; c < dim_d; ++c) m[c] += yp[c];
        }
        for (Real& v : m) v /= static_cast<Real>(n_paths);
        return m;
    }
};

/// Backward least-squares Monte Carlo induction. Per step the target
/// Y_{t_{i+1}} is jointly regressed on [phi(X_i), phi(X_i) dW/sqrt(dt)]; the
/// phi block is the continuation value, the increment block the Z estimate.
/// Explicit step: Y_i = cont + f(t_i, X_i, cont, Z_i) dt.
/// Implicit step: Y_i solves y = cont + f(t_i, X_i, y, Z_i) dt by damped
/// fixed point started from the continuation value. Regression outputs are
/// clipped to |y| <= y_clip and the terminal slice is set exactly.
inline BsdeSolution solve_backward(const BsdeProblem& problem, const PathBatch& paths,
                                   const SolverConfig& config) {
    problem.validate();
    require(paths.dim_k == problem.diffusion.dim_k && paths.dim_r == problem.diffusion.dim_r,
            "invalid-parameters", "solve_backward: paths do not match the diffusion");
    require(paths.grid.points == problem.grid.points, "invalid-parameters",
            "solve_backward: paths were simulated on a different grid");
    require(config.picard_iters >= 1, "invalid-parameters",
            "solve_backward: picard_iters must be >= 1");
    require(config.y_clip >= 0.0, "invalid-parameters",
            "solve_backward: y_clip must be positive (or 0 for automatic)");

    const std::size_t n = problem.grid.n_steps();
    const std::size_t P = paths.n_paths;
    const int d = problem.generator.dim_d;
    const int r = problem.generator.dim_r;
    const int k = problem.diffusion.dim_k;

    BsdeSolution sol;
    sol.n_paths = P;
    sol.dim_d = d;
    sol.dim_r = r;
    sol.n_steps = n;
    sol.scheme = config.scheme;
    sol.config = config;
    sol.Y.resize(P * (n + 1) * d);
    sol.Z.assign(P * n * d * r, 0.0);
    if (config.scheme == Scheme::Explicit) sol.continuation.resize(P * n * d);
    sol.diagnostics.resize(n);

    // terminal slice, set exactly
    Real xi_max = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        auto out = sol.y(p, n);
        problem.terminal(paths.state(p, n), out);
        require(all_finite(out), "numeric-fault", "terminal data non-finite");
        xi_max = std::max(xi_max, norm2(out));
    }
    sol.y_clip_used = config.y_clip > 0.0 ? config.y_clip : 10.0 * (1.0 + xi_max);

    const std::size_t ystride = (n + 1) * static_cast<std::size_t>(d);
    std::vector<Real> fval(d), yit(d), ynew(d);

    for (std::size_t i = n; i-- > 0;) {
        const Real t = problem.grid.points[i];
        const Real dt = problem.grid.dt(i);
        const BasisFrame frame(config.basis, paths.states.data() + i * k,
                               P, (n + 1) * static_cast<std::size_t>(k), k);
        const JointFit fit = joint_regression(
            frame, paths.states.data() + i * k, (n + 1) * static_cast<std::size_t>(k),
            paths.increments.data() + i * r, n * static_cast<std::size_t>(r),
            sol.Y.data() + (i + 1) * static_cast<std::size_t>(d), ystride, P, k, d, r, dt);

        StepDiagnostics& diag = sol.diagnostics[i];
        diag.regression_rms = fit.residual_rms;
        diag.rank = fit.rank;
        diag.rank_deficient = fit.rank_deficient;
        diag.constant_target = fit.constant_target;

        Real worst_gap = 0.0;
        std::size_t worst_path = 0;
        bool converged_all = true;

        for (std::size_t p = 0; p < P; ++p) {
            auto zspan = sol.z(p, i);
            for (int c = 0; c < d * r; ++c) zspan[c] = fit.zmat(p, c);
            auto x = paths.state(p, i);
            auto yout = sol.y(p, i);

            if (config.scheme == Scheme::Explicit) {
                for (int c = 0; c < d; ++c) yit[c] = fit.continuation(p, c);
                problem.generator.eval(t, x, yit, zspan, fval);
                require(all_finite(fval), "numeric-fault",
                        "generator returned non-finite value");
                for (int c = 0; c < d; ++c) yout[c] = fit.continuation(p, c) + fval[c] * dt;
                for (int c = 0; c < d; ++c)
                    sol.continuation[(p * n + i) * d + c] = fit.continuation(p, c);
            } else {
                for (int c = 0; c < d; ++c) yit[c] = fit.continuation(p, c);
                bool converged = false;
                int it = 0;
                for (; it < config.picard_iters; ++it) {
                    problem.generator.eval(t, x, yit, zspan, fval);
                    require(all_finite(fval), "numeric-fault",
                            "generator returned non-finite value");
                    Real gap = 0.0, scale = 1.0;
                    for (int c = 0; c < d; ++c) {
                        ynew[c] = yit[c] + config.picard_damping *
                                               (fit.continuation(p, c) + fval[c] * dt - yit[c]);
                        gap += sqr(ynew[c] - yit[c]);
                        scale += sqr(ynew[c]);
                        yit[c] = ynew[c];
                    }
                    if (std::sqrt(gap) <= config.picard_tol * std::sqrt(scale)) {
                        converged = true;
                        break;
                    }
                }
                diag.picard_iterations = std::max(diag.picard_iterations, it + 1);
                if (!converged) {
                    converged_all = false;
                    Real gap = 0.0;
                    for (int c = 0; c < d; ++c)
                        gap += sqr(fit.continuation(p, c) + fval[c] * dt - yit[c]);
                    if (gap > worst_gap) {
                        worst_gap = gap;
                        worst_path = p;
                    }
                }
                std::copy(yit.begin(), yit.end(), yout.begin());
            }
            const Real ay = norm2(yout);
            if (ay > sol.y_clip_used) {
                for (int c = 0; c < d; ++c) yout[c] *= sol.y_clip_used / ay;
                ++diag.clip_count;
            }
        }
        if (!converged_all)
            fail("non-convergence",
                 "implicit fixed point did not converge at step " + std::to_string(i) +
                     ", worst path " + std::to_string(worst_path) + " (gap " +
                     std::to_string(std::sqrt(worst_gap)) + ")");
    }
    require(all_finite(sol.Y) && all_finite(sol.Z), "numeric-fault",
            "solution contains non-finite entries");
    return sol;
}

/// Deterministic reduction: for z-free, x-free drivers and constant terminal
/// data, the BSDE collapses to the backward ODE Y'(t) = -f(Y), Y(T) = xi.
/// Integrated with the adaptive Cash-Karp scheme; diverging flows throw.
inline std::vector<Real> ode_reduction_solve(const Generator& f_y, std::span<const Real> xi,
                                             const TimeGrid& grid, Real tol = 1e-10) {
    require(!f_y.z_dependent && !f_y.x_dependent, "invalid-parameters",
            "ode_reduction_solve: driver must be z-free and x-free");
    const int d = f_y.dim_d;
    std::vector<Real> zdummy(static_cast<std::size_t>(d) * f_y.dim_r, 0.0);
    const OdeRhs rhs = [&f_y, &zdummy, d](Real t, std::span<const Real> y, std::span<Real> dy) {
        f_y.eval(t, {}, y, zdummy, dy);
        for (int c = 0; c < d; ++c) dy[c] = -dy[c];
    };
    std::vector<Real> times(grid.points.rbegin(), grid.points.rend());
    auto states = ode_integrate_at(rhs, times, std::vector<Real>(xi.begin(), xi.end()), tol);
    std::vector<Real> path((grid.n_steps() + 1) * d);
    for (std::size_t i = 0; i <= grid.n_steps(); ++i)
        for (int c = 0; c < d; ++c)
            path[i * d + c] = states[grid.n_steps() - i][c];
    return path;
}

struct ResidualRow {
    Real t = 0.0;
    Real mean_norm = 0.0;       // |sample mean of the residual|
    Real projected_rms = 0.0;   // basis projection of the residual
    Real raw_rms = 0.0;
};

/// Per-step residual of the discrete dynamic-programming equation
///   R = Y_i - Y_{i+1} - f(t_i, .) dt + Z_i dW_i.
/// For the implicit scheme at convergence the projection onto the basis is
/// zero up to round-off (least-squares fixed point).
inline std::vector<ResidualRow> martingale_residual(const BsdeSolution& sol,
                                                    const BsdeProblem& problem,
                                                    const PathBatch& paths) {
    const std::size_t n = sol.n_steps, P = sol.n_paths;
    const int d = sol.dim_d, r = sol.dim_r, k = paths.dim_k;
    std::vector<ResidualRow> rows(n);
    std::vector<Real> fval(d), yarg(d);
    Eigen::MatrixXd R(P, d);
    for (std::size_t i = 0; i < n; ++i) {
        const Real t = problem.grid.points[i];
        const Real dt = problem.grid.dt(i);
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
        for (std::size_t p = 0; p < P; ++p) {
            auto yi = sol.y(p, i);
            auto yn = sol.y(p, i + 1);
            auto zi = sol.z(p, i);
            auto dw = paths.incr(p, i);
            if (sol.scheme == Scheme::Explicit) {
                for (int c = 0; c < d; ++c) yarg[c] = sol.continuation[(p * n + i) * d + c];
            } else {
                for (int c = 0; c < d; ++c) yarg[c] = yi[c];
            }
            problem.generator.eval(t, paths.state(p, i), yarg, zi, fval);
            for (int c = 0; c < d; ++c) {
                Real zdw = 0.0;
                for (int j = 0; j < r; ++j) zdw += zi[c * r + j] * dw[j];
                R(p, c) = yi[c] - yn[c] - fval[c] * dt + zdw;
                mean(c) += R(p, c);
            }
        }
        mean /= static_cast<Real>(P);
        const BasisFrame frame(sol.config.basis, paths.states.data() + i * k, P,
                               (n + 1) * static_cast<std::size_t>(k), k);
        rows[i].t = t;
        rows[i].mean_norm = mean.norm();
        rows[i].raw_rms = std::sqrt(R.squaredNorm() / static_cast<Real>(P));
        rows[i].projected_rms = projected_residual_rms(
            frame, paths.states.data() + i * k, (n + 1) * static_cast<std::size_t>(k),
            paths.increments.data() + i * r, n * static_cast<std::size_t>(r), R, k, r, dt);
    }
    return rows;
}

struct SchemeCompareRow {
    Real dt = 0.0;
    Real gap = 0.0;  // |Y0_explicit - Y0_implicit|
};

struct SchemeCompareReport {
    std::vector<SchemeCompareRow> rows;
    Real order = 0.0;
    Real lipschitz_estimate = 0.0;
    bool pass = false;
};

/// Cross-validation in the classical globally Lipschitz regime: explicit and
/// implicit solutions must agree to O(dt) on Y_0 under grid refinement.
inline SchemeCompareReport lipschitz_baseline_compare(const BsdeProblem& problem,
                                                      const SolverConfig& config,
                                                      int refinements = 3) {
    SchemeCompareReport report;
    SampleBox box;
    box.dim_k = problem.diffusion.dim_k;
    report.lipschitz_estimate = estimate_lipschitz(problem.generator, box, 20000);

    std::size_t steps = problem.grid.n_steps();
    for (int lvl = 0; lvl < refinements; ++lvl, steps *= 2) {
        const TimeGrid grid = make_time_grid(problem.grid.t0, problem.grid.T, steps);
        BsdeProblem sub = problem;
        sub.grid = grid;
        const PathBatch paths = simulate_paths(sub.diffusion, grid, sub.x0, config.n_paths,
                                               config.seed);
        SolverConfig ce = config;
        ce.scheme = Scheme::Explicit;
        SolverConfig ci = config;
        ci.scheme = Scheme::Implicit;
        const auto ye = solve_backward(sub, paths, ce).y0_mean();
        const auto yi = solve_backward(sub, paths, ci).y0_mean();
        Real gap = 0.0;
        for (std::size_t c = 0; c < ye.size(); ++c) gap += sqr(ye[c] - yi[c]);
        report.rows.push_back({grid.dt(0), std::sqrt(gap)});
    }
    Real slope_sum = 0.0;
    int slopes = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        const Real a = report.rows[i - 1].gap, b = report.rows[i].gap;
        if (a > 0 && b > 0) {
            slope_sum += std::log2(a / b);
            ++slopes;
        }
    }
    report.order = slopes > 0 ? slope_sum / slopes : std::numeric_limits<Real>::infinity();
    bool shrinking = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        shrinking = shrinking && report.rows[i].gap <= report.rows[i - 1].gap + 1e-12;
    report.pass = shrinking;
    return report;
}

}  // namespace logbsde
