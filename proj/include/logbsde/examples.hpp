#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "logbsde/generator.hpp"

namespace logbsde {

enum class ExampleKind {
    LogDrift,            // f(y) = -K y log|y|
    GhProduct,           // f(y,z) = g(y) h(z), g monotone bounded, h log-modulus
    StateCoupled,        // f(t,x,y) = |x|^qbar y - y log|y|
    StochasticMonotone,  // f(t,x,y,z) = C(t,x) y - y log|y| + kappa h(z) e1
    Composite5,          // f = |x|^qbar'' F(t, x, |x|^qbar y, |x|^qbar' z)
    Neveu,               // log drift as the branching-mechanism PDE driver
};

inline ExampleKind example_kind_from_string(const std::string& s) {
    if (s == "log_drift") return ExampleKind::LogDrift;
    if (s == "gh_product") return ExampleKind::GhProduct;
    if (s == "state_coupled") return ExampleKind::StateCoupled;
    if (s == "stochastic_monotone") return ExampleKind::StochasticMonotone;
    if (s == "composite5") return ExampleKind::Composite5;
    if (s == "neveu") return ExampleKind::Neveu;
    fail("invalid-parameters", "unknown generator kind: " + s);
}

struct ExampleParams {
    int d = 1;
    int k = 1;
    int r = 1;
    Real p = 2.0;
    Real gamma = 0.2;
    Real K = 1.0;         // log-drift strength
    Real eps0 = 0.5;      // gh_product annulus half-width
    Real q_bar = 1.0;     // state coupling exponent, in ]0, 2[
    Real c = 0.5;         // stochastic-monotone coefficient scale
    Real kappa = 0.5;     // stochastic-monotone z-coupling strength
    Real q_bar_p = 0.4;   // composite5 z scaling
    Real q_bar_pp = 0.5;  // composite5 outer scaling
};

struct ExampleBundle {
    Generator generator;
    AssumptionEnvelope envelope;
};

namespace detail {

inline Real pow_abs(Real x, Real a) { return a == 0.0 ? 1.0 : std::pow(std::abs(x), a); }

/// Radial profile of the z-factor: s sqrt(-log s) below the annulus,
/// s sqrt(log s) above it, C^1 cubic Hermite across [1-eps0, 1+eps0].
class LogModulusProfile {
public:
    explicit LogModulusProfile(Real eps0) : s0_(1.0 - eps0), s1_(1.0 + eps0) {
        require(eps0 > 0.0 && eps0 < 1.0, "invalid-parameters",
                "gh_product: eps0 must lie in ]0,1[");
        v0_ = s0_ * std::sqrt(-std::log(s0_));
        v1_ = s1_ * std::sqrt(std::log(s1_));
        d0_ = std::sqrt(-std::log(s0_)) - 0.5 / std::sqrt(-std::log(s0_));
        d1_ = std::sqrt(std::log(s1_)) + 0.5 / std::sqrt(std::log(s1_));
        Real lo = std::min(v0_, v1_);
        Real hi = std::max(v0_, v1_);
        for (int i = 0; i <= 256; ++i) {
            const Real v = hermite(s0_ + (s1_ - s0_) * i / 256.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        require(lo >= 0.0, "invalid-parameters",
                "gh_product: annulus interpolant dips below zero for this eps0");
        sup_below_ = hi;
        for (int i = 0; i <= 256; ++i) {
            const Real s = s0_ * i / 256.0;
            sup_below_ = std::max(sup_below_, s == 0.0 ? 0.0 : s * std::sqrt(-std::log(s)));
        }
    }

    Real operator()(Real s) const {
        if (s <= 0.0) return 0.0;
        if (s < s0_) return s * std::sqrt(-std::log(s));
        if (s > s1_) return s * std::sqrt(std::log(s));
        return hermite(s);
    }

    /// sup over [0, 1+eps0]; together with s^{3/2} beyond, bounds the profile.
    Real sup_on_core() const { return sup_below_; }

private:
    Real hermite(Real s) const {
        const Real w = s1_ - s0_;
        const Real u = (s - s0_) / w;
        const Real h00 = (1 + 2 * u) * sqr(1 - u);
        const Real h10 = u * sqr(1 - u);
        const Real h01 = u * u * (3 - 2 * u);
        const Real h11 = u * u * (u - 1);
        return h00 * v0_ + h10 * w * d0_ + h01 * v1_ + h11 * w * d1_;
    }

    Real s0_, s1_, v0_, v1_, d0_, d1_;
    Real sup_below_ = 0.0;
};

}  // namespace detail

/// Builds one of the catalogued drivers together with the envelope it has
/// been certified against. Envelope constants are validated on the standard
/// sampling box by the assumption checker tests.
inline ExampleBundle make_example(ExampleKind kind, const ExampleParams& prm = {}) {
    require(prm.d >= 1 && prm.r >= 1 && prm.k >= 1, "invalid-parameters",
            "make_example: dimensions must be positive");
    ExampleBundle out;
    AssumptionEnvelope& env = out.envelope;
    env.p = prm.p;
    env.gamma = prm.gamma;
    Generator& gen = out.generator;
    gen.dim_d = prm.d;
    gen.dim_r = prm.r;

    switch (kind) {
        case ExampleKind::LogDrift:
        case ExampleKind::Neveu: {
            require(prm.K >= 0.0, "invalid-parameters", "log_drift: K must be >= 0");
            const Real K = prm.K;
            gen.label = kind == ExampleKind::Neveu ? "neveu" : "log_drift";
            gen.z_dependent = false;
            gen.x_dependent = false;
            gen.eval = [K](Real, std::span<const Real>, std::span<const Real> y,
                           std::span<const Real>, std::span<Real> out) {
                const Real ay = norm2(y);
                const Real lg = ay == 0.0 ? 0.0 : std::log(ay);
                for (std::size_t i = 0; i < y.size(); ++i) out[i] = -K * y[i] * lg;
            };
            env.eta = constant_field(std::max(K, Real(1e-12)));
            env.eta_bar = constant_field(3.0 * std::max(K, Real(1)));  // K(1 + 1/eps), eps = 1/2
            env.alpha = 1.5;
            env.alpha_prime = 1.5;
            env.q = 2.0;
            env.Kprime = std::max(2.0 * K, Real(1));
            break;
        }
        case ExampleKind::GhProduct: {
            const detail::LogModulusProfile h(prm.eps0);
            gen.label = "gh_product";
            gen.z_dependent = true;
            gen.x_dependent = false;
            gen.eval = [h](Real, std::span<const Real>, std::span<const Real> y,
                           std::span<const Real> z, std::span<Real> out) {
                const Real ay = norm2(y);
                const Real gscale = ay == 0.0 ? 0.0 : std::log(ay / (1.0 + ay));
                const Real hz = h(norm2(z));
                for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * gscale * hz;
            };
            env.eta_bar = constant_field(h.sup_on_core() + 1.0);
            env.alpha = 1.5;
            env.alpha_prime = 1.5;  // |z| sqrt(log|z|) <= |z|^{3/2} above 1
            env.q = 2.0;
            env.Kprime = 6.0;
            break;
        }
        case ExampleKind::StateCoupled: {
            require(prm.q_bar > 0.0 && prm.q_bar < 2.0, "invalid-parameters",
                    "state_coupled: q_bar must lie in ]0,2[");
            const Real qb = prm.q_bar;
            gen.label = "state_coupled";
            gen.z_dependent = false;
            gen.x_dependent = true;
            gen.eval = [qb](Real, std::span<const Real> x, std::span<const Real> y,
                            std::span<const Real>, std::span<Real> out) {
                const Real xs = std::pow(norm2(x), qb);
                const Real ay = norm2(y);
                const Real lg = ay == 0.0 ? 0.0 : std::log(ay);
                for (std::size_t i = 0; i < y.size(); ++i) out[i] = xs * y[i] - y[i] * lg;
            };
            env.eta = constant_field(1.0);
            env.M = [qb](Real, std::span<const Real> x) { return std::pow(norm2(x), qb); };
            env.eta_bar = [qb](Real, std::span<const Real> x) {
                return 2.0 + 2.0 * std::pow(norm2(x), 2.0 * qb);
            };
            env.alpha = 1.75;
            env.alpha_prime = 1.5;
            env.q = 2.0;
            env.v = [qb](Real, std::span<const Real> x) {
                return std::exp(std::pow(norm2(x), qb));
            };
            env.q_prime = 1.0;
            env.Kprime = 4.0;
            break;
        }
        case ExampleKind::StochasticMonotone: {
            require(prm.c >= 0.0 && prm.kappa >= 0.0, "invalid-parameters",
                    "stochastic_monotone: c and kappa must be >= 0");
            const detail::LogModulusProfile h(prm.eps0);
            const Real c = prm.c, kap = prm.kappa;
            gen.label = "stochastic_monotone";
            gen.z_dependent = kap > 0.0;
            gen.x_dependent = true;
            gen.eval = [c, kap, h](Real, std::span<const Real> x, std::span<const Real> y,
                                   std::span<const Real> z, std::span<Real> out) {
                const Real C = c * norm2(x);
                const Real ay = norm2(y);
                const Real lg = ay == 0.0 ? 0.0 : std::log(ay);
                const Real hz = kap == 0.0 ? 0.0 : kap * h(norm2(z));
                for (std::size_t i = 0; i < y.size(); ++i)
                    out[i] = C * y[i] - y[i] * lg + (i == 0 ? hz : 0.0);
            };
            const Real mh = h.sup_on_core();
            env.eta = constant_field(0.5 * std::exp(-1.0));
            env.f0 = constant_field(kap * mh);
            env.M = [c](Real, std::span<const Real> x) { return c * norm2(x); };
            env.Kproc = constant_field(2.5 * kap);  // |z|^{1/2} <= sqrt(5) on the sampling box
            env.eta_bar = [c, kap, mh](Real, std::span<const Real> x) {
                return 2.0 + 2.0 * sqr(c * norm2(x)) + kap * mh;
            };
            env.alpha = 1.75;
            env.alpha_prime = 1.5;
            env.q = 2.0;
            env.v = [c](Real, std::span<const Real> x) { return std::exp(c * norm2(x)); };
            env.q_prime = 1.0;
            env.Kprime = 6.0;
            break;
        }
        case ExampleKind::Composite5: {
            require(prm.q_bar >= 0.0 && prm.q_bar_p >= 0.0 && prm.q_bar_pp >= 0.0,
                    "invalid-parameters", "composite5: exponents must be >= 0");
            require(prm.q_bar + prm.q_bar_pp < 2.0, "invalid-parameters",
                    "composite5 requires q_bar + q_bar'' < 2");
            require(prm.q_bar_p + prm.q_bar_pp < 1.0, "invalid-parameters",
                    "composite5 requires q_bar' + q_bar'' < 1");
            const Real a = prm.q_bar, b = prm.q_bar_p, cc = prm.q_bar_pp;
            gen.label = "composite5";
            gen.z_dependent = true;
            gen.x_dependent = true;
            gen.eval = [a, b, cc](Real, std::span<const Real> x, std::span<const Real> y,
                                  std::span<const Real> z, std::span<Real> out) {
                const Real ax = norm2(x);
                const Real outer = detail::pow_abs(ax, cc);
                const Real ys = detail::pow_abs(ax, a);
                const Real zs = detail::pow_abs(ax, b);
                // F(t, x, y, z) = -y + sin(z_{11}) e1
                for (std::size_t i = 0; i < y.size(); ++i) {
                    Real v = -ys * y[i];
                    if (i == 0) v += std::sin(zs * z[0]);
                    out[i] = outer * v;
                }
            };
            env.f0 = [cc](Real, std::span<const Real> x) {
                return detail::pow_abs(norm2(x), cc);
            };
            env.eta_bar = [a, cc](Real, std::span<const Real> x) {
                const Real ax = norm2(x);
                return 1.0 + detail::pow_abs(ax, cc) + detail::pow_abs(ax, 2.0 * (a + cc));
            };
            env.alpha = 1.75;
            env.alpha_prime = 1.5;
            env.q = 2.0;
            env.v = [](Real, std::span<const Real> x) { return std::exp(sqr(norm2(x))); };
            env.q_prime = 0.1;
            env.Kprime = 2.0;
            break;
        }
    }
    env.validate();
    return out;
}

inline ExampleBundle make_example(const std::string& kind, const ExampleParams& prm = {}) {
    return make_example(example_kind_from_string(kind), prm);
}

}  // namespace logbsde
