#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "logbsde/bsde_solver.hpp"
#include "logbsde/estimates.hpp"

namespace logbsde {

/// Structural data of the semilinear system: weight delta and exponent
/// p_bar for the terminal data, the inner-product bound fields, growth
/// fields, and the local log-Lipschitz constants.
struct PdeEnvelope {
    Real delta = 0.0;
    Real p_bar = 2.0;
    ScalarField eta_p = constant_field(0.0);   // eta'
    ScalarField f0_p = constant_field(0.0);    // f^{0'}
    Real M = 0.0;
    Real M_prime = 0.0;
    ScalarField eta_bar_p = constant_field(1.0);
    Real q = 2.0;
    Real alpha = 1.5;
    Real alpha_prime = 1.5;
    Real K_log = 1.0;  // A.4 constant
    Real r_exp = 1.0;  // v = exp(r |x|)
};

/// Backward problem u_t + L u + F(t, x, u, sigma^T grad u) = 0, u(T, .) = g.
struct PdeProblem {
    DiffusionSpec diffusion;
    TerminalCondition terminal_g;
    Generator F;  // x_dependent driver
    Real T = 1.0;
    PdeEnvelope env;

    /// p for the node BSDEs: p_bar when M' = 0, else strictly inside
    /// ]alpha v alpha', p_bar[.
    Real working_p() const {
        if (env.M_prime == 0.0) return env.p_bar;
        const Real lo = std::max(env.alpha, env.alpha_prime);
        return 0.5 * (lo + env.p_bar);
    }
};

/// Envelope of the node BSDE (xi^{t,x}, f^{t,x}) induced by the structural
/// data: M_s = M + M'|X_s|, K_s = sqrt(M + M'|X_s|), gamma = (1/4) ^ (p-1)/4,
/// v = exp(r|x|), A_N = N.
inline AssumptionEnvelope to_bsde_envelope(const PdeProblem& problem) {
    const Real p = problem.working_p();
    AssumptionEnvelope env;
    env.p = p;
    env.gamma = 0.99 * std::min(Real(0.25), 0.25 * (p - 1.0));
    env.eta = problem.env.eta_p;
    env.f0 = problem.env.f0_p;
    const Real M = problem.env.M, Mp = problem.env.M_prime;
    env.M = [M, Mp](Real, std::span<const Real> x) { return M + Mp * norm2(x); };
    env.Kproc = [M, Mp](Real, std::span<const Real> x) {
        return std::sqrt(M + Mp * norm2(x));
    };
    env.eta_bar = problem.env.eta_bar_p;
    env.q = problem.env.q;
    env.alpha = problem.env.alpha;
    env.alpha_prime = problem.env.alpha_prime;
    const Real r = problem.env.r_exp;
    env.v = [r](Real, std::span<const Real> x) { return std::exp(r * norm2(x)); };
    env.q_prime = 1.0;
    env.Kprime = problem.env.K_log;
    return env;
}

/// kappa' = p pbar M' T / (pbar - p) * sup(4, 2p/(p-1)).
inline Real kappa_prime(Real p, Real p_bar, Real M_prime, Real T) {
    require(p_bar > p && p > 1.0, "invalid-exponents",
            "kappa_prime requires 1 < p < p_bar");
    return p * p_bar * M_prime * T / (p_bar - p) * std::max(Real(4), 2.0 * p / (p - 1.0));
}

/// delta' = delta + kappa' + 1_{M' != 0}.
inline Real delta_prime(Real delta, Real kappa_p, Real M_prime) {
    return delta + kappa_p + (M_prime != 0.0 ? 1.0 : 0.0);
}

enum class FieldProvenance { MonteCarlo, FiniteDifference, Characteristics };

/// u (and the gradient pairing sigma^T grad u) tabulated on a time-space
/// product grid. Nodes that diverged are flagged, never fabricated.
struct PdeField {
    std::vector<Real> t_nodes;
    std::vector<std::vector<Real>> x_nodes;  // each entry is a k-vector
    int dim_d = 1;
    int dim_r = 1;
    std::vector<Real> u;       // nt x nx x d
    std::vector<Real> z;       // nt x nx x (d*r)
    std::vector<char> ok;      // nt x nx
    FieldProvenance provenance = FieldProvenance::MonteCarlo;

    std::size_t nt() const { return t_nodes.size(); }
    std::size_t nx() const { return x_nodes.size(); }
    std::span<const Real> u_at(std::size_t a, std::size_t j) const {
        return {u.data() + (a * nx() + j) * dim_d, static_cast<std::size_t>(dim_d)};
    }
    std::span<Real> u_at(std::size_t a, std::size_t j) {
        return {u.data() + (a * nx() + j) * dim_d, static_cast<std::size_t>(dim_d)};
    }
    std::span<const Real> z_at(std::size_t a, std::size_t j) const {
        return {z.data() + (a * nx() + j) * dim_d * dim_r,
                static_cast<std::size_t>(dim_d * dim_r)};
    }
    std::span<Real> z_at(std::size_t a, std::size_t j) {
        return {z.data() + (a * nx() + j) * dim_d * dim_r,
                static_cast<std::size_t>(dim_d * dim_r)};
    }
    bool node_ok(std::size_t a, std::size_t j) const { return ok[a * nx() + j] != 0; }
};

namespace detail {

inline PdeField make_field(std::vector<Real> t_nodes, std::vector<std::vector<Real>> x_nodes,
                           int d, int r, FieldProvenance prov) {
    PdeField f;
    f.t_nodes = std::move(t_nodes);
    f.x_nodes = std::move(x_nodes);
    f.dim_d = d;
    f.dim_r = r;
    f.u.assign(f.nt() * f.nx() * d, 0.0);
    f.z.assign(f.nt() * f.nx() * d * r, 0.0);
    f.ok.assign(f.nt() * f.nx(), 1);
    f.provenance = prov;
    return f;
}

}  // namespace detail

/// Solves the z-free characteristics system from one launch point:
/// forward flow of b to T, then the coupled (X, Y) system backward,
/// returning Y at the launch time.
inline std::vector<Real> characteristics_node(const PdeProblem& problem, Real t,
                                              std::span<const Real> x, Real tol = 1e-10) {
    const int k = problem.diffusion.dim_k;
    const int d = problem.F.dim_d;
    std::vector<Real> state(x.begin(), x.end());
    const OdeRhs flow = [&](Real, std::span<const Real> s, std::span<Real> ds) {
        problem.diffusion.drift(s, ds);
    };
    ode_integrate(flow, t, problem.T, state, tol);

    std::vector<Real> coupled(k + d);
    std::copy(state.begin(), state.end(), coupled.begin());
    problem.terminal_g(state, {coupled.data() + k, static_cast<std::size_t>(d)});

    std::vector<Real> zzero(static_cast<std::size_t>(d) * problem.F.dim_r, 0.0);
    const OdeRhs backward = [&](Real s, std::span<const Real> v, std::span<Real> dv) {
        problem.diffusion.drift({v.data(), static_cast<std::size_t>(k)},
                                {dv.data(), static_cast<std::size_t>(k)});
        problem.F.eval(s, {v.data(), static_cast<std::size_t>(k)},
                       {v.data() + k, static_cast<std::size_t>(d)}, zzero,
                       {dv.data() + k, static_cast<std::size_t>(d)});
        for (int c = 0; c < d; ++c) dv[k + c] = -dv[k + c];
    };
    ode_integrate(backward, problem.T, t, coupled, tol);
    return {coupled.begin() + k, coupled.end()};
}

/// First-order oracle for degenerate problems (sigma == 0): per node the PDE
/// reduces to an ODE along the flow of b. Flow blow-up flags the node.
inline PdeField characteristics_oracle(const PdeProblem& problem,
                                       const std::vector<Real>& t_nodes,
                                       const std::vector<std::vector<Real>>& x_nodes,
                                       Real tol = 1e-10) {
    PdeField field = detail::make_field(t_nodes, x_nodes, problem.F.dim_d,
                                        problem.F.dim_r, FieldProvenance::Characteristics);
    for (std::size_t a = 0; a < field.nt(); ++a) {
        for (std::size_t j = 0; j < field.nx(); ++j) {
            if (t_nodes[a] == problem.T) {
                problem.terminal_g(x_nodes[j], field.u_at(a, j));
                continue;
            }
            try {
                const auto y = characteristics_node(problem, t_nodes[a], x_nodes[j], tol);
                std::copy(y.begin(), y.end(), field.u_at(a, j).begin());
            } catch (const Error&) {
                field.ok[a * field.nx() + j] = 0;
            }
        }
    }
    return field;
}

/// Monte Carlo representation field: u(t, x) := Y_t^{t,x} from a per-node
/// backward solve; the gradient slot carries Z_t^{t,x} (= sigma^T grad u).
/// Divergent nodes are marked missing.
inline PdeField mc_field(const PdeProblem& problem,
                         const std::vector<Real>& t_nodes,
                         const std::vector<std::vector<Real>>& x_nodes,
                         const SolverConfig& base_config, Real steps_per_unit_time,
                         unsigned jobs = 0) {
    PdeField field = detail::make_field(t_nodes, x_nodes, problem.F.dim_d, problem.F.dim_r,
                                        FieldProvenance::MonteCarlo);
    const std::size_t nx = field.nx();
    std::vector<std::size_t> flat(field.nt() * nx);
    for (std::size_t i = 0; i < flat.size(); ++i) flat[i] = i;

    parallel_for(
        flat.size(),
        [&](std::size_t lo, std::size_t hi) {
            for (std::size_t w = lo; w < hi; ++w) {
                const std::size_t a = flat[w] / nx, j = flat[w] % nx;
                const Real t = t_nodes[a];
                if (t == problem.T) {
                    problem.terminal_g(x_nodes[j], field.u_at(a, j));
                    continue;
                }
                const std::size_t steps = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::ceil((problem.T - t) * steps_per_unit_time)));
                BsdeProblem node;
                node.generator = problem.F;
                node.terminal = problem.terminal_g;
                node.diffusion = problem.diffusion;
                node.grid = make_time_grid(t, problem.T, steps);
                node.x0 = x_nodes[j];
                SolverConfig cfg = base_config;
                cfg.seed = derive_stream(base_config.seed, "pde_node") + flat[w];
                try {
                    const PathBatch paths = simulate_paths(node.diffusion, node.grid, node.x0,
                                                           cfg.n_paths, cfg.seed, 1);
                    const BsdeSolution sol = solve_backward(node, paths, cfg);
                    const auto y0 = sol.y0_mean();
                    std::copy(y0.begin(), y0.end(), field.u_at(a, j).begin());
                    auto zslot = field.z_at(a, j);
                    std::fill(zslot.begin(), zslot.end(), 0.0);
                    for (std::size_t p = 0; p < sol.n_paths; ++p) {
                        auto zp = sol.z(p, 0);
                        for (std::size_t c = 0; c < zslot.size(); ++c) zslot[c] += zp[c];
                    }
                    for (Real& v : zslot) v /= static_cast<Real>(sol.n_paths);
                } catch (const Error&) {
                    field.ok[a * nx + j] = 0;
                }
            }
        },
        jobs);
    return field;
}

struct FdMesh {
    std::size_t nx = 401;
    std::size_t nt = 400;
    Real x_min = -8.0;
    Real x_max = 8.0;
};

struct FdOptions {
    Real newton_tol = 1e-11;
    int newton_iters = 40;
    Real t0 = 0.0;
};

/// Implicit (backward Euler in reverse time) finite differences for k = d = 1
/// with Newton iteration on the nonlinear term. Edge values follow the
/// z-free characteristics of b from the boundary (absorbing approximation).
/// The terminal slice equals g bit-exactly. Sets a Peclet warning when
/// |b| dx / sigma^2 > 2 anywhere.
inline PdeField fd_reference_1d(const PdeProblem& problem, const FdMesh& mesh,
                                const FdOptions& opt = {}, bool* peclet_warning = nullptr) {
    require(problem.diffusion.dim_k == 1 && problem.F.dim_d == 1 &&
                problem.diffusion.dim_r == 1,
            "unsupported-dimension", "fd_reference_1d requires k = d = r = 1");
    require(mesh.nx >= 3 && mesh.nt >= 1, "invalid-resolution",
            "fd_reference_1d: mesh too coarse");

    const std::size_t nx = mesh.nx, nt = mesh.nt;
    const Real dx = (mesh.x_max - mesh.x_min) / static_cast<Real>(nx - 1);
    const Real dt = (problem.T - opt.t0) / static_cast<Real>(nt);

    std::vector<std::vector<Real>> x_nodes(nx, std::vector<Real>(1));
    std::vector<Real> t_nodes(nt + 1);
    for (std::size_t i = 0; i < nx; ++i) x_nodes[i][0] = mesh.x_min + dx * i;
    for (std::size_t m = 0; m <= nt; ++m) t_nodes[m] = opt.t0 + dt * m;
    t_nodes.back() = problem.T;

    std::vector<Real> sigma(nx), bvec(nx), adiff(nx);
    bool peclet = false;
    for (std::size_t i = 0; i < nx; ++i) {
        Real s, b;
        problem.diffusion.diffusion(x_nodes[i], {&s, 1});
        problem.diffusion.drift(x_nodes[i], {&b, 1});
        sigma[i] = s;
        bvec[i] = b;
        adiff[i] = 0.5 * s * s;
        if (std::abs(b) * dx > 2.0 * s * s && b != 0.0) peclet = true;
    }
    if (peclet_warning != nullptr) *peclet_warning = peclet;

    PdeField field = detail::make_field(t_nodes, x_nodes, 1, 1,
                                        FieldProvenance::FiniteDifference);
    for (std::size_t i = 0; i < nx; ++i)
        problem.terminal_g(x_nodes[i], field.u_at(nt, i));

    auto F1 = [&](Real t, Real x, Real y, Real z) {
        Real out;
        problem.F.eval(t, {&x, 1}, {&y, 1}, {&z, 1}, {&out, 1});
        return out;
    };

    std::vector<Real> u(nx), unext(nx), res(nx), du(nx);
    std::vector<Real> dl(nx), dm(nx), dh(nx);
    for (std::size_t i = 0; i < nx; ++i) unext[i] = field.u_at(nt, i)[0];

    for (std::size_t m = nt; m-- > 0;) {
        const Real t = t_nodes[m];
        const Real bc_lo = characteristics_node(problem, t, x_nodes.front(), 1e-10)[0];
        const Real bc_hi = characteristics_node(problem, t, x_nodes.back(), 1e-10)[0];
        u = unext;  // warm start
        u.front() = bc_lo;
        u.back() = bc_hi;

        bool converged = false;
        for (int it = 0; it < opt.newton_iters; ++it) {
            // marching towards t = 0: u^m = u^{m+1} + dt (L u^m + F(t_m, u^m))
            Real scale = 1.0;
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const Real zx = sigma[i] * (u[i + 1] - u[i - 1]) / (2.0 * dx);
                res[i] = (u[i] - unext[i]) / dt -
                         adiff[i] * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx) -
                         bvec[i] * (u[i + 1] - u[i - 1]) / (2.0 * dx) -
                         F1(t, x_nodes[i][0], u[i], zx);
                scale = std::max(scale, std::abs(u[i]));
            }
            res.front() = u.front() - bc_lo;
            res.back() = u.back() - bc_hi;
            Real rmax = 0.0;
            for (Real v : res) rmax = std::max(rmax, std::abs(v));
            if (rmax <= opt.newton_tol * scale) {
                converged = true;
                break;
            }
            // tridiagonal Jacobian with numerical F derivatives
            dm.front() = 1.0;
            dh.front() = 0.0;
            dm.back() = 1.0;
            dl.back() = 0.0;
            for (std::size_t i = 1; i + 1 < nx; ++i) {
                const Real zx = sigma[i] * (u[i + 1] - u[i - 1]) / (2.0 * dx);
                const Real hy = 1e-7 * (1.0 + std::abs(u[i]));
                const Real hz = 1e-7 * (1.0 + std::abs(zx));
                const Real Fy =
                    (F1(t, x_nodes[i][0], u[i] + hy, zx) - F1(t, x_nodes[i][0], u[i] - hy, zx)) /
                    (2.0 * hy);
                const Real Fz =
                    (F1(t, x_nodes[i][0], u[i], zx + hz) - F1(t, x_nodes[i][0], u[i], zx - hz)) /
                    (2.0 * hz);
                dm[i] = 1.0 / dt + 2.0 * adiff[i] / (dx * dx) - Fy;
                dl[i] = -adiff[i] / (dx * dx) + bvec[i] / (2.0 * dx) +
                        Fz * sigma[i] / (2.0 * dx);
                dh[i] = -adiff[i] / (dx * dx) - bvec[i] / (2.0 * dx) -
                        Fz * sigma[i] / (2.0 * dx);
            }
            // Thomas solve J du = -res
            std::vector<Real>& cp = du;
            std::vector<Real> cprime(nx), dprime(nx);
            cprime[0] = dh[0] / dm[0];
            dprime[0] = -res[0] / dm[0];
            for (std::size_t i = 1; i < nx; ++i) {
                const Real denom = dm[i] - dl[i] * cprime[i - 1];
                require(denom != 0.0, "non-convergence",
                        "fd_reference_1d: singular tridiagonal at t=" + std::to_string(t));
                cprime[i] = (i + 1 < nx ? dh[i] : 0.0) / denom;
                dprime[i] = (-res[i] - dl[i] * dprime[i - 1]) / denom;
            }
            cp[nx - 1] = dprime[nx - 1];
            for (std::size_t i = nx - 1; i-- > 0;) cp[i] = dprime[i] - cprime[i] * cp[i + 1];
            for (std::size_t i = 0; i < nx; ++i) u[i] += cp[i];
        }
        if (!converged) {
            std::size_t worst = 0;
            for (std::size_t i = 0; i < nx; ++i)
                if (std::abs(res[i]) > std::abs(res[worst])) worst = i;
            fail("non-convergence", "fd_reference_1d: Newton stalled at t=" +
                                        std::to_string(t) + ", x=" +
                                        std::to_string(x_nodes[worst][0]));
        }
        for (std::size_t i = 0; i < nx; ++i) field.u_at(m, i)[0] = u[i];
        unext = u;
    }

    // sigma^T du/dx by central differences (one-sided at edges)
    for (std::size_t m = 0; m <= nt; ++m) {
        for (std::size_t i = 0; i < nx; ++i) {
            Real dudx;
            if (i == 0)
                dudx = (field.u_at(m, 1)[0] - field.u_at(m, 0)[0]) / dx;
            else if (i + 1 == nx)
                dudx = (field.u_at(m, i)[0] - field.u_at(m, i - 1)[0]) / dx;
            else
                dudx = (field.u_at(m, i + 1)[0] - field.u_at(m, i - 1)[0]) / (2.0 * dx);
            field.z_at(m, i)[0] = sigma[i] * dudx;
        }
    }
    return field;
}

struct WeightedNorms {
    Real sup_spatial = 0.0;  // sup_t int |u|^p e^{-delta'|x|} dx
    Real grad = 0.0;         // int int |sigma^T grad u|^{min(p,2)} e^{-delta'|x|} dt dx
    bool tail_warning = false;
};

/// Quadrature of the two weighted functionals on a 1-d field. Warns when the
/// weight mass outside the grid hull could carry more than 1% of the value.
inline WeightedNorms weighted_lp_norm(const PdeField& field, Real delta_p, Real p) {
    require(!field.x_nodes.empty() && field.x_nodes.front().size() == 1,
            "unsupported-dimension", "weighted_lp_norm requires a 1-d spatial grid");
    const std::size_t nx = field.nx(), nt = field.nt();
    std::vector<Real> axis(nx);
    for (std::size_t i = 0; i < nx; ++i) axis[i] = field.x_nodes[i][0];
    const std::vector<Real> w = trapezoid_weights(axis);

    WeightedNorms out;
    Real max_abs_u = 0.0;
    std::vector<Real> slice(nt, 0.0);
    for (std::size_t m = 0; m < nt; ++m) {
        Real s = 0.0;
        for (std::size_t i = 0; i < nx; ++i) {
            if (!field.node_ok(m, i)) continue;
            const Real au = norm2(field.u_at(m, i));
            max_abs_u = std::max(max_abs_u, au);
            s += w[i] * std::pow(au, p) * std::exp(-delta_p * std::abs(axis[i]));
        }
        slice[m] = s;
        out.sup_spatial = std::max(out.sup_spatial, s);
    }
    const Real pg = std::min(p, Real(2));
    if (nt >= 2) {
        const std::vector<Real> wt = trapezoid_weights(field.t_nodes);
        for (std::size_t m = 0; m < nt; ++m) {
            Real s = 0.0;
            for (std::size_t i = 0; i < nx; ++i) {
                if (!field.node_ok(m, i)) continue;
                s += w[i] * std::pow(norm2(field.z_at(m, i)), pg) *
                     std::exp(-delta_p * std::abs(axis[i]));
            }
            out.grad += wt[m] * s;
        }
    }
    if (delta_p > 0.0) {
        const Real H = std::min(std::abs(axis.front()), std::abs(axis.back()));
        const Real tail = 2.0 * std::exp(-delta_p * H) / delta_p * std::pow(max_abs_u, p);
        if (tail > 0.01 * std::max(out.sup_spatial, Real(1e-300))) out.tail_warning = true;
    }
    return out;
}

struct ZConsistencyReport {
    Real abs_l2 = 0.0;   // weighted L2 of (Z_mc - sigma^T grad u_ref) on interior nodes
    Real ref_l2 = 0.0;
    Real relative = 0.0;
};

/// Compares Monte Carlo Z against sigma^T (central-difference grad) of a
/// deterministic reference on the shared interior nodes, in weighted L2.
inline ZConsistencyReport z_consistency(const PdeField& mc, const PdeField& ref,
                                        Real delta_p) {
    require(mc.x_nodes.size() >= 3 && mc.x_nodes.front().size() == 1,
            "unsupported-dimension", "z_consistency requires a 1-d grid");
    ZConsistencyReport report;
    std::vector<Real> axis(mc.nx());
    for (std::size_t i = 0; i < mc.nx(); ++i) axis[i] = mc.x_nodes[i][0];
    const std::vector<Real> w = trapezoid_weights(axis);

    // locate mc time rows inside the reference grid (linear interpolation)
    auto ref_z = [&](Real t, Real x) {
        std::size_t m = 0;
        while (m + 2 < ref.nt() && ref.t_nodes[m + 1] <= t) ++m;
        const Real t0 = ref.t_nodes[m], t1 = ref.t_nodes[std::min(m + 1, ref.nt() - 1)];
        const Real wt = t1 > t0 ? std::clamp((t - t0) / (t1 - t0), 0.0, 1.0) : 0.0;
        std::size_t i = 0;
        while (i + 2 < ref.nx() && ref.x_nodes[i + 1][0] <= x) ++i;
        const Real x0 = ref.x_nodes[i][0], x1 = ref.x_nodes[std::min(i + 1, ref.nx() - 1)][0];
        const Real wx = x1 > x0 ? std::clamp((x - x0) / (x1 - x0), 0.0, 1.0) : 0.0;
        auto v = [&](std::size_t a, std::size_t b) { return ref.z_at(a, b)[0]; };
        const std::size_t i1 = std::min(i + 1, ref.nx() - 1), m1 = std::min(m + 1, ref.nt() - 1);
        return (1 - wt) * ((1 - wx) * v(m, i) + wx * v(m, i1)) +
               wt * ((1 - wx) * v(m1, i) + wx * v(m1, i1));
    };

    for (std::size_t a = 0; a < mc.nt(); ++a) {
        for (std::size_t i = 1; i + 1 < mc.nx(); ++i) {
            if (!mc.node_ok(a, i)) continue;
            const Real weight = w[i] * std::exp(-delta_p * std::abs(axis[i]));
            const Real zr = ref_z(mc.t_nodes[a], axis[i]);
            const Real zm = mc.z_at(a, i)[0];
            report.abs_l2 += weight * sqr(zm - zr);
            report.ref_l2 += weight * sqr(zr);
        }
    }
    report.abs_l2 = std::sqrt(report.abs_l2);
    report.ref_l2 = std::sqrt(report.ref_l2);
    report.relative = report.ref_l2 > 0 ? report.abs_l2 / report.ref_l2 : 0.0;
    return report;
}

/// Coefficient fields of the linear-log system: A, C are d x d (row-major),
/// B maps each z entry (i,j) to a d-vector, laid out (i*r+j)*d + c.
using MatrixField = std::function<void(Real t, std::span<const Real> x, std::span<Real> out)>;

/// Wraps F(t,x,y,z) = A y + <<B; z>> - C y log|y| with the envelope of the
/// linear-log system (K'' = 1 + 4Kd + K^2). Coefficient bounds
/// |A| + |B|^2 <= K(1+|x|), 0 <= C <= K are verified on sampled points.
inline PdeProblem make_linear_log_pde(const MatrixField& A, const MatrixField& B,
                                      const MatrixField& C, TerminalCondition g,
                                      DiffusionSpec diffusion, Real T, Real K, int d,
                                      Real sample_half_width = 4.0,
                                      std::size_t n_samples = 4096) {
    const int r = diffusion.dim_r;
    const int k = diffusion.dim_k;
    require(K > 0.0, "invalid-parameters", "make_linear_log_pde: K must be positive");

    // sampled verification of the coefficient bounds
    const CounterRng rng(derive_stream(11, "linlog_coeff"));
    std::vector<Real> x(k), Am(d * d), Bm(d * r * d), Cm(d * d), probe(d);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const Real t = T * rng.uniform(s, 0, 0);
        for (int c = 0; c < k; ++c)
            x[c] = sample_half_width * (2.0 * rng.uniform(s, 1, c) - 1.0);
        A(t, x, Am);
        B(t, x, Bm);
        C(t, x, Cm);
        const Real na = norm2(Am), nb = norm2(Bm), nc = norm2(Cm);
        const Real cap = K * (1.0 + norm2(x)) * (1.0 + 1e-9);
        if (na + nb * nb > cap)
            fail("invalid-coefficients",
                 "make_linear_log_pde: |A| + |B|^2 > K(1+|x|) at a sampled point");
        if (nc > K * std::sqrt(static_cast<Real>(d)) * (1.0 + 1e-9))
            fail("invalid-coefficients", "make_linear_log_pde: |C| > K at a sampled point");
        for (int c = 0; c < d; ++c) probe[c] = 2.0 * rng.uniform(s, 2, c) - 1.0;
        Real quad = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) quad += probe[i] * Cm[i * d + j] * probe[j];
        if (quad < -1e-9)
            fail("invalid-coefficients",
                 "make_linear_log_pde: C is not nonnegative at a sampled point");
    }

    PdeProblem problem;
    problem.diffusion = std::move(diffusion);
    problem.terminal_g = std::move(g);
    problem.T = T;
    problem.F.dim_d = d;
    problem.F.dim_r = r;
    problem.F.z_dependent = true;
    problem.F.x_dependent = true;
    problem.F.label = "linear_log";
    problem.F.eval = [A, B, C, d, r](Real t, std::span<const Real> x, std::span<const Real> y,
                                     std::span<const Real> z, std::span<Real> out) {
        std::vector<Real> Am(d * d), Bm(d * r * d), Cm(d * d);
        A(t, x, Am);
        B(t, x, Bm);
        C(t, x, Cm);
        const Real ay = norm2(y);
        const Real lg = ay == 0.0 ? 0.0 : std::log(ay);
        for (int c = 0; c < d; ++c) {
            Real v = 0.0;
            for (int a2 = 0; a2 < d; ++a2) v += Am[c * d + a2] * y[a2];
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < r; ++j) v += Bm[(i * r + j) * d + c] * z[i * r + j];
            Real cy = 0.0;
            for (int a2 = 0; a2 < d; ++a2) cy += Cm[c * d + a2] * y[a2];
            out[c] = v - cy * lg;
        }
    };

    PdeEnvelope env;
    env.delta = 1.0;
    env.p_bar = 3.0;
    env.eta_p = constant_field(K);
    env.M = K;
    env.M_prime = K;
    env.eta_bar_p = [K](Real, std::span<const Real> xx) {
        return 1.0 + K * sqr(1.0 + norm2(xx));
    };
    env.q = 2.0;
    env.alpha = 1.75;
    env.alpha_prime = 1.75;
    env.K_log = 1.0 + 4.0 * K * d + K * K;
    env.r_exp = 1.0;
    problem.env = env;
    return problem;
}

}  // namespace logbsde
