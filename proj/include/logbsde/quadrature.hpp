#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// One-dimensional Gauss-Legendre rule on [-1, 1].
struct GaussLegendre {
    std::vector<Real> nodes;
    std::vector<Real> weights;
};

/// Nodes by Newton iteration on the Legendre recurrence, seeded with the
/// Chebyshev-angle estimate. Accurate to ~1 ulp for n up to a few hundred.
inline GaussLegendre gauss_legendre(int n) {
    require(n >= 1, "invalid-parameters", "gauss_legendre needs n >= 1");
    GaussLegendre rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        Real x = std::cos(std::numbers::pi_v<Real> * (i + 0.75) / (n + 0.5));
        Real dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            Real p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const Real p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const Real dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const Real w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[i] = -x;
        rule.weights[i] = w;
        rule.nodes[n - 1 - i] = x;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

/// Composite Gauss-Legendre of f over [a, b] split into `panels` panels.
inline Real integrate_gl(const std::function<Real(Real)>& f, Real a, Real b,
                         int nodes_per_panel = 32, int panels = 8) {
    const GaussLegendre rule = gauss_legendre(nodes_per_panel);
    const Real h = (b - a) / panels;
    Real total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const Real lo = a + p * h;
        const Real mid = lo + 0.5 * h;
        Real s = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j)
            s += rule.weights[j] * f(mid + 0.5 * h * rule.nodes[j]);
        total += 0.5 * h * s;
    }
    return total;
}

/// Trapezoid weights for an arbitrary sorted grid.
inline std::vector<Real> trapezoid_weights(const std::vector<Real>& grid) {
    const std::size_t n = grid.size();
    std::vector<Real> w(n, 0.0);
    if (n < 2) return w;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const Real h = grid[i + 1] - grid[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

/// Cumulative trapezoid of samples f(t_i): out[i] = integral up to t_i.
inline std::vector<Real> cumulative_trapezoid(const std::vector<Real>& t,
                                              const std::vector<Real>& f) {
    require(t.size() == f.size(), "invalid-parameters",
            "cumulative_trapezoid: length mismatch");
    std::vector<Real> out(t.size(), 0.0);
    for (std::size_t i = 1; i < t.size(); ++i)
        out[i] = out[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
    return out;
}

}  // namespace logbsde
