#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "logbsde/generator.hpp"
#include "logbsde/rng.hpp"

namespace logbsde {

/// Sampling region for the assumption checks. The standard box is
/// t in [0,1], x in [-2,2]^k, y in [-5,5]^d, z in [-5,5]^{dr}.
struct SampleBox {
    Real t_lo = 0.0, t_hi = 1.0;
    Real x_half = 2.0;
    Real y_half = 5.0;
    Real z_half = 5.0;
    int dim_k = 1;
};

struct CheckWitness {
    Real t = 0.0;
    std::vector<Real> x, y, z, y2, z2;
    Real lhs = 0.0;
    Real rhs = 0.0;
    Real margin = 0.0;  // lhs - rhs; positive means the inequality failed
};

/// Result of a sampled inequality check. A pass is evidence on the reported
/// box and sample count, not a proof.
struct CheckReport {
    std::string assumption;
    bool pass = true;
    CheckWitness worst;
    std::size_t n_samples = 0;
    std::string note;
};

namespace detail {

inline Real check_slack(Real lhs, Real rhs) {
    return 1e-9 * (1.0 + std::max(std::abs(lhs), std::abs(rhs)));
}

/// Additive-recurrence low-discrepancy point set: coordinate i advances by
/// frac(sqrt(prime_i)).
class KroneckerSampler {
public:
    explicit KroneckerSampler(std::size_t dims) : alpha_(dims), state_(dims, 0.5) {
        static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                         37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};
        require(dims <= std::size(primes), "unsupported-dimension",
                "sampler supports at most 22 axes");
        for (std::size_t i = 0; i < dims; ++i) {
            const Real s = std::sqrt(static_cast<Real>(primes[i]));
            alpha_[i] = s - std::floor(s);
        }
    }

    const std::vector<Real>& next() {
        for (std::size_t i = 0; i < state_.size(); ++i) {
            state_[i] += alpha_[i];
            if (state_[i] >= 1.0) state_[i] -= 1.0;
        }
        return state_;
    }

private:
    std::vector<Real> alpha_;
    std::vector<Real> state_;
};

inline void scale_to_box(std::span<const Real> unit, Real half, std::span<Real> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = half * (2.0 * unit[i] - 1.0);
}

/// Clamp a point into the Euclidean ball of radius N.
inline void clamp_ball(std::span<Real> v, Real N) {
    const Real n = norm2(v);
    if (n > N)
        for (Real& c : v) c *= N / n;
}

}  // namespace detail

/// Inner-product growth check: <y, f(t,x,y,z)> <= eta + f0|y| + M|y|^2 + K|y||z|
/// at n_samples quasi-random points, sharpened by hill climbing from the
/// worst sample. Failure is reported, never thrown.
inline CheckReport check_h2(const Generator& g, const AssumptionEnvelope& env,
                            const SampleBox& box, std::size_t n_samples,
                            std::uint64_t seed = 9001) {
    const int d = g.dim_d, dz = g.dim_d * g.dim_r, k = box.dim_k;
    CheckReport report;
    report.assumption = "H.2";
    report.n_samples = n_samples;
    report.worst.margin = -std::numeric_limits<Real>::infinity();

    std::vector<Real> x(k), y(d), z(dz), f(d);
    auto evaluate = [&](Real t) {
        g.eval(t, x, y, z, f);
        const Real lhs = dot(y, f);
        const Real ay = norm2(y), az = norm2(z);
        const Real rhs = env.eta(t, x) + env.f0(t, x) * ay + env.M(t, x) * ay * ay +
                         env.Kproc(t, x) * ay * az;
        if (lhs - rhs > report.worst.margin) {
            report.worst = {t, x, y, z, {}, {}, lhs, rhs, lhs - rhs};
        }
        return lhs - rhs;
    };

    detail::KroneckerSampler sampler(1 + k + d + dz);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const auto& u = sampler.next();
        const Real t = box.t_lo + (box.t_hi - box.t_lo) * u[0];
        detail::scale_to_box({u.data() + 1, static_cast<std::size_t>(k)}, box.x_half, x);
        detail::scale_to_box({u.data() + 1 + k, static_cast<std::size_t>(d)}, box.y_half, y);
        detail::scale_to_box({u.data() + 1 + k + d, static_cast<std::size_t>(dz)}, box.z_half, z);
        evaluate(t);
    }

    // local refinement around the worst sample
    const CounterRng rng(derive_stream(seed, "check_h2_climb"));
    CheckWitness base = report.worst;
    Real radius = 0.25;
    for (std::uint64_t it = 0; it < 400; ++it) {
        Real t = base.t + radius * (box.t_hi - box.t_lo) * (rng.uniform(it, 0, 0) - 0.5);
        t = std::clamp(t, box.t_lo, box.t_hi);
        for (int c = 0; c < k; ++c)
            x[c] = std::clamp(base.x[c] + radius * box.x_half * (rng.uniform(it, 1, c) - 0.5),
                              -box.x_half, box.x_half);
        for (int c = 0; c < d; ++c)
            y[c] = std::clamp(base.y[c] + radius * box.y_half * (rng.uniform(it, 2, c) - 0.5),
                              -box.y_half, box.y_half);
        for (int c = 0; c < dz; ++c)
            z[c] = std::clamp(base.z[c] + radius * box.z_half * (rng.uniform(it, 3, c) - 0.5),
                              -box.z_half, box.z_half);
        if (evaluate(t) > base.margin) base = report.worst;
        radius *= 0.99;
    }

    report.pass = report.worst.margin <= detail::check_slack(report.worst.lhs, report.worst.rhs);
    report.note = "sampled box check, quasi-random + hill climb";
    return report;
}

/// Growth check: |f(t,x,y,z)| <= eta_bar + |y|^alpha + |z|^alpha'.
inline CheckReport check_h3(const Generator& g, const AssumptionEnvelope& env,
                            const SampleBox& box, std::size_t n_samples,
                            std::uint64_t seed = 9002) {
    const int d = g.dim_d, dz = g.dim_d * g.dim_r, k = box.dim_k;
    CheckReport report;
    report.assumption = "H.3";
    report.n_samples = n_samples;
    report.worst.margin = -std::numeric_limits<Real>::infinity();

    std::vector<Real> x(k), y(d), z(dz), f(d);
    auto evaluate = [&](Real t) {
        g.eval(t, x, y, z, f);
        const Real lhs = norm2(f);
        const Real rhs = env.eta_bar(t, x) + std::pow(norm2(y), env.alpha) +
                         std::pow(norm2(z), env.alpha_prime);
        if (lhs - rhs > report.worst.margin) {
            report.worst = {t, x, y, z, {}, {}, lhs, rhs, lhs - rhs};
        }
        return lhs - rhs;
    };

    detail::KroneckerSampler sampler(1 + k + d + dz);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const auto& u = sampler.next();
        const Real t = box.t_lo + (box.t_hi - box.t_lo) * u[0];
        detail::scale_to_box({u.data() + 1, static_cast<std::size_t>(k)}, box.x_half, x);
        detail::scale_to_box({u.data() + 1 + k, static_cast<std::size_t>(d)}, box.y_half, y);
        detail::scale_to_box({u.data() + 1 + k + d, static_cast<std::size_t>(dz)}, box.z_half, z);
        evaluate(t);
    }
    const CounterRng rng(derive_stream(seed, "check_h3_climb"));
    CheckWitness base = report.worst;
    Real radius = 0.25;
    for (std::uint64_t it = 0; it < 400; ++it) {
        Real t = base.t + radius * (box.t_hi - box.t_lo) * (rng.uniform(it, 0, 0) - 0.5);
        t = std::clamp(t, box.t_lo, box.t_hi);
        for (int c = 0; c < k; ++c)
            x[c] = std::clamp(base.x[c] + radius * box.x_half * (rng.uniform(it, 1, c) - 0.5),
                              -box.x_half, box.x_half);
        for (int c = 0; c < d; ++c)
            y[c] = std::clamp(base.y[c] + radius * box.y_half * (rng.uniform(it, 2, c) - 0.5),
                              -box.y_half, box.y_half);
        for (int c = 0; c < dz; ++c)
            z[c] = std::clamp(base.z[c] + radius * box.z_half * (rng.uniform(it, 3, c) - 0.5),
                              -box.z_half, box.z_half);
        if (evaluate(t) > base.margin) base = report.worst;
        radius *= 0.99;
    }

    report.pass = report.worst.margin <= detail::check_slack(report.worst.lhs, report.worst.rhs);
    report.note = "sampled box check, quasi-random + hill climb";
    return report;
}

/// Local log-Lipschitz check on pairs inside the N-ball, restricted to
/// samples with v(t,x) <= N:
///   <y-y', f(t,x,y,z)-f(t,x,y',z')>
///     <= K'|y-y'|^2 log A_N + sqrt(K' log A_N)|y-y'||z-z'| + K' log A_N / A_N.
/// Half the samples are uniform in the ball, half use log-uniform radii and
/// offsets so kinks near the origin are exercised.
inline CheckReport check_h4(const Generator& g, const AssumptionEnvelope& env,
                            const SampleBox& box, std::size_t n_samples,
                            const std::vector<Real>& N_list, std::uint64_t seed = 9003) {
    const int d = g.dim_d, dz = g.dim_d * g.dim_r, k = box.dim_k;
    CheckReport report;
    report.assumption = "H.4";
    report.n_samples = n_samples;
    report.worst.margin = -std::numeric_limits<Real>::infinity();

    std::vector<Real> x(k), y(d), z(dz), y2(d), z2(dz), f1(d), f2(d), dy(d), dzv(dz);
    Real active_N = 0.0;

    auto evaluate = [&](Real t, Real N) {
        if (env.v(t, x) > N) return -std::numeric_limits<Real>::infinity();
        const Real A = env.A(N);
        const Real logA = std::log(A);
        g.eval(t, x, y, z, f1);
        g.eval(t, x, y2, z2, f2);
        Real lhs = 0.0;
        for (int c = 0; c < d; ++c) lhs += (y[c] - y2[c]) * (f1[c] - f2[c]);
        for (int c = 0; c < d; ++c) dy[c] = y[c] - y2[c];
        for (int c = 0; c < dz; ++c) dzv[c] = z[c] - z2[c];
        const Real ndy = norm2(dy), ndz = norm2(dzv);
        const Real rhs = env.Kprime * ndy * ndy * logA +
                         std::sqrt(env.Kprime * logA) * ndy * ndz + env.Kprime * logA / A;
        if (lhs - rhs > report.worst.margin) {
            report.worst = {t, x, y, z, y2, z2, lhs, rhs, lhs - rhs};
            active_N = N;
        }
        return lhs - rhs;
    };

    detail::KroneckerSampler sampler(1 + k + 2 * (d + dz) + 2);
    for (Real N : N_list) {
        require(N > 1.0, "invalid-parameters", "check_h4: each N must exceed 1");
        require(env.A(N) > 1.0, "invalid-envelope", "check_h4: A_N must exceed 1");
        for (std::size_t i = 0; i < n_samples; ++i) {
            const auto& u = sampler.next();
            const Real t = box.t_lo + (box.t_hi - box.t_lo) * u[0];
            detail::scale_to_box({u.data() + 1, static_cast<std::size_t>(k)}, box.x_half, x);
            std::size_t off = 1 + k;
            if (i % 2 == 0) {
                detail::scale_to_box({u.data() + off, static_cast<std::size_t>(d)}, N, y);
                detail::scale_to_box({u.data() + off + d, static_cast<std::size_t>(dz)}, N, z);
                detail::scale_to_box({u.data() + off + d + dz, static_cast<std::size_t>(d)}, N,
                                     y2);
                detail::scale_to_box({u.data() + off + 2 * d + dz, static_cast<std::size_t>(dz)},
                                     N, z2);
            } else {
                // log-uniform radius for the base point, log-uniform offset for the pair
                const Real ry = N * std::pow(10.0, -14.0 * u[off + 2 * (d + dz)]);
                const Real dr = 2.0 * N * std::pow(10.0, -14.0 * u[off + 2 * (d + dz) + 1]);
                detail::scale_to_box({u.data() + off, static_cast<std::size_t>(d)}, 1.0, y);
                const Real ny = norm2(y);
                for (int c = 0; c < d; ++c) y[c] *= ny > 0 ? ry / ny : 0.0;
                detail::scale_to_box({u.data() + off + d, static_cast<std::size_t>(dz)}, 1.0, z);
                const Real nz = norm2(z);
                for (int c = 0; c < dz; ++c) z[c] *= nz > 0 ? ry / nz : 0.0;
                detail::scale_to_box({u.data() + off + d + dz, static_cast<std::size_t>(d)}, 1.0,
                                     y2);
                const Real ny2 = norm2(y2);
                for (int c = 0; c < d; ++c) y2[c] = y[c] + (ny2 > 0 ? dr * y2[c] / ny2 : 0.0);
                detail::scale_to_box({u.data() + off + 2 * d + dz, static_cast<std::size_t>(dz)},
                                     1.0, z2);
                const Real nz2 = norm2(z2);
                for (int c = 0; c < dz; ++c) z2[c] = z[c] + (nz2 > 0 ? dr * z2[c] / nz2 : 0.0);
            }
            detail::clamp_ball(y, N);
            detail::clamp_ball(z, N);
            detail::clamp_ball(y2, N);
            detail::clamp_ball(z2, N);
            evaluate(t, N);
        }
    }

    if (std::isfinite(report.worst.margin)) {
        const CounterRng rng(derive_stream(seed, "check_h4_climb"));
        CheckWitness base = report.worst;
        const Real N = active_N;
        Real radius = 0.1;
        for (std::uint64_t it = 0; it < 600; ++it) {
            Real t = base.t + radius * (box.t_hi - box.t_lo) * (rng.uniform(it, 0, 0) - 0.5);
            t = std::clamp(t, box.t_lo, box.t_hi);
            const Real scale = norm2(base.y) + norm2(base.y2) + 1e-6;
            for (int c = 0; c < k; ++c)
                x[c] = std::clamp(base.x[c] + radius * box.x_half * (rng.uniform(it, 1, c) - 0.5),
                                  -box.x_half, box.x_half);
            for (int c = 0; c < d; ++c) {
                y[c] = base.y[c] + radius * scale * (rng.uniform(it, 2, c) - 0.5);
                y2[c] = base.y2[c] + radius * scale * (rng.uniform(it, 3, c) - 0.5);
            }
            for (int c = 0; c < dz; ++c) {
                z[c] = base.z[c] + radius * scale * (rng.uniform(it, 4, c) - 0.5);
                z2[c] = base.z2[c] + radius * scale * (rng.uniform(it, 5, c) - 0.5);
            }
            detail::clamp_ball(y, N);
            detail::clamp_ball(z, N);
            detail::clamp_ball(y2, N);
            detail::clamp_ball(z2, N);
            if (evaluate(t, N) > base.margin) base = report.worst;
            radius *= 0.995;
        }
    }

    report.pass = report.worst.margin <= detail::check_slack(report.worst.lhs, report.worst.rhs);
    report.note = "sampled N-ball pair check, uniform + log-radius strata";
    return report;
}

/// Sampled Lipschitz estimate by difference quotients; used to certify
/// generators before scheme cross-validation.
inline Real estimate_lipschitz(const Generator& g, const SampleBox& box,
                               std::size_t n_samples, std::uint64_t seed = 9004) {
    const int d = g.dim_d, dz = g.dim_d * g.dim_r, k = box.dim_k;
    std::vector<Real> x(k), y(d), z(dz), y2(d), z2(dz), f1(d), f2(d);
    const CounterRng rng(derive_stream(seed, "lipschitz"));
    Real worst = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Real t = box.t_lo + (box.t_hi - box.t_lo) * rng.uniform(i, 0, 0);
        for (int c = 0; c < k; ++c) x[c] = box.x_half * (2 * rng.uniform(i, 1, c) - 1);
        for (int c = 0; c < d; ++c) {
            y[c] = box.y_half * (2 * rng.uniform(i, 2, c) - 1);
            y2[c] = y[c] + 0.01 * (2 * rng.uniform(i, 3, c) - 1);
        }
        for (int c = 0; c < dz; ++c) {
            z[c] = box.z_half * (2 * rng.uniform(i, 4, c) - 1);
            z2[c] = z[c] + 0.01 * (2 * rng.uniform(i, 5, c) - 1);
        }
        g.eval(t, x, y, z, f1);
        g.eval(t, x, y2, z2, f2);
        Real dist2 = 0.0, diff2 = 0.0;
        for (int c = 0; c < d; ++c) {
            dist2 += sqr(y[c] - y2[c]);
            diff2 += sqr(f1[c] - f2[c]);
        }
        for (int c = 0; c < dz; ++c) dist2 += sqr(z[c] - z2[c]);
        if (dist2 > 0) worst = std::max(worst, std::sqrt(diff2 / dist2));
    }
    return worst;
}

}  // namespace logbsde
