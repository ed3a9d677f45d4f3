#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "logbsde/checks.hpp"
#include "logbsde/generator.hpp"
#include "logbsde/quadrature.hpp"

namespace logbsde {

/// Normalized bump kernel: psi(x) = c1^{-1} exp(-1/(1-x^2)) on |x|<1, 0
/// outside, with c1 the normalizing integral.
struct MollifierKernel {
    Real c1;

    static const MollifierKernel& instance() {
        static const MollifierKernel kernel{compute_c1()};
        return kernel;
    }

    Real operator()(Real x) const {
        if (std::abs(x) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - x * x)) / c1;
    }

private:
    static Real compute_c1() {
        // the integrand is flat to all orders at the endpoints, so composite
        // Gauss-Legendre converges extremely fast
        return integrate_gl([](Real x) { return std::exp(-1.0 / (1.0 - x * x)); }, -1.0, 1.0,
                            48, 8);
    }
};

inline Real psi(Real x) { return MollifierKernel::instance()(x); }

/// xi 1_{|xi| <= n}.
inline std::vector<Real> truncate_terminal(std::span<const Real> xi, int n) {
    require(n >= 1, "invalid-parameters", "truncate_terminal: n must be >= 1");
    std::vector<Real> out(xi.begin(), xi.end());
    if (norm2(xi) > static_cast<Real>(n)) std::fill(out.begin(), out.end(), 0.0);
    return out;
}

/// Smooth truncated approximation of a driver:
///   f_n(t,x,y,z) = (c1 e)^2 1_{Lambda_bar(t,x) <= n}
///                  psi(|y|^2/n^2) psi(|z|^2/n^2)
///                  m^{d+dr} \int f(t, y-u, z-v) prod psi(m u_i) prod psi(m v_ij)
/// with m = n^{2p}/h(t,x) and Lambda_bar = eta + eta_bar + f0 + M + K + 1/h.
/// The convolution runs on a tensor Gauss-Legendre rule over the kernel cube;
/// for z-free drivers the v-axes reduce to a scalar kernel-mass factor.
class ApproxGenerator {
public:
    ApproxGenerator(Generator base, AssumptionEnvelope env, int n, ScalarField h,
                    int quad_nodes)
        : impl_(std::make_shared<Impl>()) {
        require(n >= 1, "invalid-parameters", "mollify_generator: n must be >= 1");
        require(quad_nodes >= 8, "invalid-parameters",
                "mollify_generator: quad_nodes must be >= 8");
        const int conv_dims =
            base.dim_d + (base.z_dependent ? base.dim_d * base.dim_r : 0);
        require(conv_dims <= 6, "unsupported-dimension",
                "mollify_generator: d + d*r exceeds the tensor quadrature cap of 6");
        impl_->base = std::move(base);
        impl_->env = std::move(env);
        impl_->n = n;
        impl_->p = impl_->env.p;
        impl_->h = std::move(h);
        impl_->quad_nodes = quad_nodes;

        const GaussLegendre rule = gauss_legendre(quad_nodes);
        impl_->nodes = rule.nodes;
        impl_->weights.resize(quad_nodes);
        Real mass = 0.0;
        for (int j = 0; j < quad_nodes; ++j) {
            impl_->weights[j] = rule.weights[j] * psi(rule.nodes[j]);
            mass += impl_->weights[j];
        }
        impl_->kernel_mass = mass;
    }

    int n() const { return impl_->n; }
    int dim_d() const { return impl_->base.dim_d; }
    int dim_r() const { return impl_->base.dim_r; }
    const AssumptionEnvelope& envelope() const { return impl_->env; }

    Real lambda_bar(Real t, std::span<const Real> x) const {
        const Impl& im = *impl_;
        return im.env.eta(t, x) + im.env.eta_bar(t, x) + im.env.f0(t, x) + im.env.M(t, x) +
               im.env.Kproc(t, x) + 1.0 / im.h(t, x);
    }

    void eval(Real t, std::span<const Real> x, std::span<const Real> y,
              std::span<const Real> z, std::span<Real> out) const {
        const Impl& im = *impl_;
        const int d = im.base.dim_d;
        const int dz = im.base.dim_d * im.base.dim_r;
        std::fill(out.begin(), out.end(), 0.0);

        const Real n2 = sqr(static_cast<Real>(im.n));
        const Real outer_y = psi(dot(y, y) / n2);
        if (outer_y == 0.0) return;
        const Real outer_z = psi(dot(z, z) / n2);
        if (outer_z == 0.0) return;
        if (lambda_bar(t, x) > static_cast<Real>(im.n)) return;

        const Real hv = im.h(t, x);
        require(hv > 0.0 && hv <= 1.0, "invalid-parameters",
                "mollify: weight h must take values in ]0,1]");
        const Real inv_m = hv / std::pow(static_cast<Real>(im.n), 2.0 * im.p);
        const Real c1e = MollifierKernel::instance().c1 * std::exp(1.0);
        const Real outer = c1e * c1e * outer_y * outer_z;

        const int conv_dims = d + (im.base.z_dependent ? dz : 0);
        const int G = im.quad_nodes;
        std::vector<Real> ys(d), zs(z.begin(), z.end()), f(d);
        std::vector<int> idx(conv_dims, 0);
        Real tail_factor = 1.0;
        if (!im.base.z_dependent)
            tail_factor = std::pow(im.kernel_mass, static_cast<Real>(dz));

        for (;;) {
            Real w = tail_factor;
            for (int a = 0; a < conv_dims; ++a) w *= im.weights[idx[a]];
            for (int c = 0; c < d; ++c) ys[c] = y[c] - im.nodes[idx[c]] * inv_m;
            if (im.base.z_dependent)
                for (int c = 0; c < dz; ++c) zs[c] = z[c] - im.nodes[idx[d + c]] * inv_m;
            im.base.eval(t, x, ys, zs, f);
            if (!all_finite(f))
                fail("numeric-fault", "mollify: base driver returned non-finite values "
                                      "inside the kernel cube");
            for (int c = 0; c < d; ++c) out[c] += w * f[c];
            int axis = conv_dims - 1;
            while (axis >= 0 && ++idx[axis] == G) idx[axis--] = 0;
            if (axis < 0) break;
        }
        for (int c = 0; c < d; ++c) out[c] *= outer;
    }

    /// View as a plain Generator (shares this object's state).
    Generator to_generator() const {
        Generator g;
        g.dim_d = impl_->base.dim_d;
        g.dim_r = impl_->base.dim_r;
        g.z_dependent = true;  // the outer cutoff depends on z even for z-free bases
        g.x_dependent = true;  // through h and the envelope indicator
        g.label = impl_->base.label + "_n" + std::to_string(impl_->n);
        auto impl = impl_;
        g.eval = [impl](Real t, std::span<const Real> x, std::span<const Real> y,
                        std::span<const Real> z, std::span<Real> out) {
            ApproxGenerator view(impl);
            view.eval(t, x, y, z, out);
        };
        return g;
    }

private:
    struct Impl {
        Generator base;
        AssumptionEnvelope env;
        int n = 1;
        Real p = 2.0;
        ScalarField h;
        int quad_nodes = 32;
        std::vector<Real> nodes;
        std::vector<Real> weights;
        Real kernel_mass = 1.0;
    };

    explicit ApproxGenerator(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

    std::shared_ptr<Impl> impl_;
};

inline ApproxGenerator mollify_generator(const Generator& g, const AssumptionEnvelope& env,
                                         int n, ScalarField h, int quad_nodes = 32) {
    return ApproxGenerator(g, env, n, std::move(h), quad_nodes);
}

struct ApproxPropertyRow {
    int n = 0;
    std::size_t violations_c = 0;  // growth bound (c), both forms
    std::size_t violations_d = 0;  // inner-product bound (d)
    std::size_t violations_f = 0;  // rho bound (f)
    Real rho = 0.0;                // rho_N(f_n - f) at the reference point
    Real max_abs = 0.0;
    Real lipschitz = 0.0;
    bool support_ok = true;
};

struct ApproxPropertiesReport {
    std::vector<ApproxPropertyRow> rows;
    bool rho_nonincreasing = true;
    bool rho_final_ok = true;
    Real rho_threshold = 0.0;
};

/// Certifies the schedule numerically: growth and inner-product bounds on
/// sampled points, the rho envelope, pointwise shrinkage of rho along the
/// schedule, and a finite Lipschitz estimate per n.
inline ApproxPropertiesReport verify_approx_properties(
    const Generator& g, const AssumptionEnvelope& env, const std::vector<int>& schedule,
    const ScalarField& h, const SampleBox& box, std::size_t n_samples, Real N,
    std::size_t rho_density, Real rho_threshold, int quad_nodes = 32,
    std::uint64_t seed = 777) {
    require(std::is_sorted(schedule.begin(), schedule.end()), "invalid-parameters",
            "verify_approx_properties: schedule must be increasing");
    ApproxPropertiesReport report;
    report.rho_threshold = rho_threshold;

    const int d = g.dim_d, dz = g.dim_d * g.dim_r, k = box.dim_k;
    const CounterRng rng(derive_stream(seed, "approx_props"));
    const std::vector<Real> xref(k, 0.0);

    Real prev_rho = std::numeric_limits<Real>::infinity();
    for (int n : schedule) {
        const ApproxGenerator fn = mollify_generator(g, env, n, h, quad_nodes);
        ApproxPropertyRow row;
        row.n = n;

        std::vector<Real> x(k), y(d), z(dz), f(d);
        for (std::size_t i = 0; i < n_samples; ++i) {
            const Real t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform(i, 0, 0);
            for (int c = 0; c < k; ++c) x[c] = box.x_half * (2 * rng.uniform(i, 1, c) - 1);
            for (int c = 0; c < d; ++c) y[c] = box.y_half * (2 * rng.uniform(i, 2, c) - 1);
            for (int c = 0; c < dz; ++c) z[c] = box.z_half * (2 * rng.uniform(i, 3, c) - 1);
            fn.eval(t, x, y, z, f);
            const Real af = norm2(f);
            row.max_abs = std::max(row.max_abs, af);

            const Real pp = fn.envelope().p;
            const Real abs_bound = 2.0 * pp + 3.0 * std::pow(static_cast<Real>(n), pp);
            const bool inside = fn.lambda_bar(t, x) <= n && norm2(y) <= n && norm2(z) <= n;
            const Real grow_bound =
                inside ? env.eta_bar(t, x) + std::pow(norm2(y), env.alpha) +
                             std::pow(norm2(z), env.alpha_prime) + 2.0 * env.p * h(t, x)
                       : 0.0;
            if (af > abs_bound + detail::check_slack(af, abs_bound)) ++row.violations_c;
            if (af > grow_bound + detail::check_slack(af, grow_bound)) ++row.violations_c;

            const Real lhs_d = dot(y, f);
            const Real ay = norm2(y);
            const Real bound_d =
                fn.lambda_bar(t, x) <= n
                    ? env.eta(t, x) + env.f0(t, x) * ay + env.M(t, x) * ay * ay +
                          env.Kproc(t, x) * ay * norm2(z) + 10.0 * h(t, x)
                    : 0.0;
            if (lhs_d > bound_d + detail::check_slack(lhs_d, bound_d)) ++row.violations_d;

            const Real rho_bound = 2.0 * (env.eta_bar(t, x) + std::pow(N, env.alpha) +
                                          std::pow(N, env.alpha_prime) + 2.0 * env.p * h(t, x));
            // pointwise |f_n - f| inside the N-ball is a lower bound of rho there
            if (ay <= N && norm2(z) <= N) {
                std::vector<Real> fb(d);
                g.eval(t, x, y, z, fb);
                Real diff2 = 0.0;
                for (int c = 0; c < d; ++c) diff2 += sqr(f[c] - fb[c]);
                const Real diff = std::sqrt(diff2);
                if (diff > rho_bound + detail::check_slack(diff, rho_bound))
                    ++row.violations_f;
            }
        }

        // support: the outer cutoff kills |y| >= n and |z| >= n exactly
        {
            std::vector<Real> yb(d, 0.0), zb(dz, 0.0), fb(d);
            yb[0] = static_cast<Real>(n);
            fn.eval(0.5 * (box.t_lo + box.t_hi), xref, yb, zb, fb);
            row.support_ok = norm2(fb) == 0.0;
            if (dz > 0) {
                yb[0] = 0.0;
                zb[0] = static_cast<Real>(n);
                fn.eval(0.5 * (box.t_lo + box.t_hi), xref, yb, zb, fb);
                row.support_ok = row.support_ok && norm2(fb) == 0.0;
            }
        }

        row.rho = rho_N(fn.to_generator(), g, N, 0.5 * (box.t_lo + box.t_hi), xref,
                        rho_density);
        row.lipschitz = estimate_lipschitz(fn.to_generator(), box, 2000, seed + n);
        if (row.rho > prev_rho * (1.0 + 1e-12)) report.rho_nonincreasing = false;
        prev_rho = row.rho;
        report.rows.push_back(row);
    }
    if (!report.rows.empty())
        report.rho_final_ok = report.rows.back().rho < rho_threshold;
    return report;
}

}  // namespace logbsde
