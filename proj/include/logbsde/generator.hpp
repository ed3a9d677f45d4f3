#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// Driver f(t, x, y, z) in R^d with Markovian state dependence through x.
/// z is d x r row-major. eval must be pure, total (singular points carry
/// their continuous extension) and safe to call concurrently.
struct Generator {
    int dim_d = 1;
    int dim_r = 1;
    bool z_dependent = true;
    bool x_dependent = false;
    std::string label;
    std::function<void(Real t, std::span<const Real> x, std::span<const Real> y,
                       std::span<const Real> z, std::span<Real> out)>
        eval;

    void operator()(Real t, std::span<const Real> x, std::span<const Real> y,
                    std::span<const Real> z, std::span<Real> out) const {
        eval(t, x, y, z, out);
    }
};

inline Generator zero_generator(int d, int r) {
    Generator g;
    g.dim_d = d;
    g.dim_r = r;
    g.z_dependent = false;
    g.label = "zero";
    g.eval = [](Real, std::span<const Real>, std::span<const Real>, std::span<const Real>,
                std::span<Real> out) { std::fill(out.begin(), out.end(), 0.0); };
    return g;
}

/// Scalar process field (t, x) -> R, Markovian stand-in for the paper-side
/// predictable processes.
using ScalarField = std::function<Real(Real t, std::span<const Real> x)>;

inline ScalarField constant_field(Real c) {
    return [c](Real, std::span<const Real>) { return c; };
}

/// Certificate data for the structural growth/monotonicity assumptions:
/// integrability exponent p, margin gamma, the bound processes of the inner
/// product and growth inequalities, and the truncation ladder (v, A_N, K').
struct AssumptionEnvelope {
    Real p = 2.0;
    Real gamma = 0.2;
    ScalarField eta = constant_field(0.0);
    ScalarField f0 = constant_field(0.0);
    ScalarField M = constant_field(0.0);
    ScalarField Kproc = constant_field(0.0);
    ScalarField eta_bar = constant_field(0.0);
    Real q = 2.0;
    Real alpha = 1.5;
    Real alpha_prime = 1.5;
    ScalarField v = constant_field(0.0);
    Real q_prime = 1.0;
    Real Kprime = 1.0;
    std::function<Real(Real N)> A = [](Real N) { return N; };
    Real mu = 1.0;

    void validate() const {
        require(p > 1.0, "invalid-envelope", "p must exceed 1");
        require(gamma > 0.0 && gamma < 0.5 * std::min(Real(1), p - 1.0), "invalid-envelope",
                "gamma must lie in ]0, (1 and p-1)/2[");
        require(alpha > 1.0 && alpha < p, "invalid-envelope", "alpha must lie in ]1, p[");
        require(alpha_prime > 1.0 && alpha_prime < std::min(p, Real(2)), "invalid-envelope",
                "alpha' must lie in ]1, p and 2[");
        require(q > 1.0, "invalid-envelope", "q must exceed 1");
        require(q_prime > 0.0, "invalid-envelope", "q' must be positive");
        require(Kprime >= 0.0, "invalid-envelope", "K' must be nonnegative");
        require(mu > 0.0, "invalid-envelope", "mu must be positive");
        Real prev = 1.0;
        for (Real N : {2.0, 4.0, 16.0, 256.0, 65536.0}) {
            const Real a = A(N);
            require(a > 1.0 && a >= prev, "invalid-envelope",
                    "A_N must be > 1 and nondecreasing");
            require(a <= std::pow(N, mu) * (1.0 + 1e-12), "invalid-envelope",
                    "A_N must satisfy A_N <= N^mu");
            prev = a;
        }
    }
};

/// Discount-rate weight 2 M(t,x) + K(t,x)^2 / (2 gamma).
inline Real lambda_weight(const AssumptionEnvelope& env, Real t, std::span<const Real> x) {
    require(env.gamma > 0.0, "invalid-envelope", "lambda_weight: gamma must be positive");
    const Real k = env.Kproc(t, x);
    return 2.0 * env.M(t, x) + k * k / (2.0 * env.gamma);
}

/// Sup distance between two drivers over the ball |y| <= N, |z| <= N,
/// scanned on a tensor grid with grid_density points per axis. A lower bound
/// of the true sup by construction.
inline Real rho_N(const Generator& g1, const Generator& g2, Real N, Real t,
                  std::span<const Real> x, std::size_t grid_density) {
    require(N > 0.0, "invalid-parameters", "rho_N: N must be positive");
    require(grid_density >= 2, "invalid-parameters", "rho_N: grid_density must be >= 2");
    require(g1.dim_d == g2.dim_d && g1.dim_r == g2.dim_r, "incompatible-generators",
            "rho_N: generator dimensions differ");
    const int d = g1.dim_d;
    const int dz = g1.dim_d * g1.dim_r;
    const bool scan_z = g1.z_dependent || g2.z_dependent;
    const int dims = d + (scan_z ? dz : 0);
    double points = 1.0;
    for (int i = 0; i < dims; ++i) points *= static_cast<double>(grid_density);
    require(points <= 5e8, "unsupported-dimension",
            "rho_N: tensor grid too large for d + d*r axes at this density");

    std::vector<Real> y(d), z(dz, 0.0), f1(d), f2(d);
    auto axis_value = [&](std::size_t idx) {
        return -N + 2.0 * N * static_cast<Real>(idx) / static_cast<Real>(grid_density - 1);
    };

    Real sup = 0.0;
    std::vector<std::size_t> idx(dims, 0);
    for (;;) {
        for (int c = 0; c < d; ++c) y[c] = axis_value(idx[c]);
        if (scan_z)
            for (int c = 0; c < dz; ++c) z[c] = axis_value(idx[d + c]);
        if (norm2(y) <= N && (!scan_z || norm2(z) <= N)) {
            g1.eval(t, x, y, z, f1);
            g2.eval(t, x, y, z, f2);
            Real diff2 = 0.0;
            for (int c = 0; c < d; ++c) diff2 += sqr(f1[c] - f2[c]);
            sup = std::max(sup, diff2);
        }
        int axis = dims - 1;
        while (axis >= 0 && ++idx[axis] == grid_density) idx[axis--] = 0;
        if (axis < 0) break;
    }
    return std::sqrt(sup);
}

}  // namespace logbsde
