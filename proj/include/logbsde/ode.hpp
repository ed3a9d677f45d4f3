#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// Right-hand side y' = f(t, y) written into dy.
using OdeRhs = std::function<void(Real t, std::span<const Real> y, std::span<Real> dy)>;

namespace detail {

// Cash-Karp 5(4) tableau.
inline constexpr Real ck_a[6] = {0.0, 1.0 / 5, 3.0 / 10, 3.0 / 5, 1.0, 7.0 / 8};
inline constexpr Real ck_b[6][5] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {3.0 / 10, -9.0 / 10, 6.0 / 5},
    {-11.0 / 54, 5.0 / 2, -70.0 / 27, 35.0 / 27},
    {1631.0 / 55296, 175.0 / 512, 575.0 / 13824, 44275.0 / 110592, 253.0 / 4096}};
inline constexpr Real ck_c5[6] = {37.0 / 378, 0.0, 250.0 / 621, 125.0 / 594, 0.0, 512.0 / 1771};
inline constexpr Real ck_c4[6] = {2825.0 / 27648, 0.0,           18575.0 / 48384,
                                  13525.0 / 55296, 277.0 / 14336, 1.0 / 4};

}  // namespace detail

/// Integrates y' = f(t, y) from t0 to t1 (either direction) in place with
/// adaptive Cash-Karp steps. Throws "divergence" when the state passes
/// blowup_norm.
inline void ode_integrate(const OdeRhs& f, Real t0, Real t1, std::vector<Real>& y,
                          Real tol = 1e-10, Real blowup_norm = 1e10) {
    if (t0 == t1) return;
    const std::size_t n = y.size();
    const Real dir = t1 > t0 ? 1.0 : -1.0;
    Real t = t0;
    Real h = dir * std::max(std::abs(t1 - t0) * 1e-3, 1e-12);
    std::vector<Real> k[6];
    for (auto& ki : k) ki.resize(n);
    std::vector<Real> ytmp(n), y5(n), y4(n);

    int guard = 0;
    while (dir * (t1 - t) > 0.0) {
        if (std::abs(t1 - t) <= 1e-14 * (1.0 + std::abs(t1))) break;  // sub-eps tail
        if (++guard > 2000000) fail("divergence", "ode_integrate: step count exceeded");
        if (dir * (t + h - t1) > 0.0) h = t1 - t;
        f(t, y, k[0]);
        for (int s = 1; s < 6; ++s) {
            for (std::size_t i = 0; i < n; ++i) {
                Real acc = y[i];
                for (int j = 0; j < s; ++j) acc += h * detail::ck_b[s][j] * k[j][i];
                ytmp[i] = acc;
            }
            f(t + detail::ck_a[s] * h, ytmp, k[s]);
        }
        Real err = 0.0, scale = 1e-30;
        for (std::size_t i = 0; i < n; ++i) {
            Real s5 = y[i], s4 = y[i];
            for (int s = 0; s < 6; ++s) {
                s5 += h * detail::ck_c5[s] * k[s][i];
                s4 += h * detail::ck_c4[s] * k[s][i];
            }
            y5[i] = s5;
            y4[i] = s4;
            err = std::max(err, std::abs(s5 - s4));
            scale = std::max(scale, std::abs(s5));
        }
        const Real rel = err / (tol * (1.0 + scale));
        if (rel <= 1.0) {
            t += h;
            y = y5;
            if (norm2(y) > blowup_norm)
                fail("divergence", "ode_integrate: |y| exceeded blow-up bound at t=" +
                                       std::to_string(t));
            h *= std::min(5.0, 0.9 * std::pow(std::max(rel, 1e-16), -0.2));
        } else {
            h *= std::max(0.1, 0.9 * std::pow(rel, -0.25));
        }
        if (std::abs(h) < 1e-15 * std::max(Real(1), std::abs(t)))
            fail("divergence", "ode_integrate: step size underflow");
    }
}

/// Integrates and records the state at each requested time (times must be
/// monotone in the direction of integration, starting at t0).
inline std::vector<std::vector<Real>> ode_integrate_at(
    const OdeRhs& f, const std::vector<Real>& times, std::vector<Real> y0,
    Real tol = 1e-10) {
    std::vector<std::vector<Real>> out;
    out.reserve(times.size());
    out.push_back(y0);
    for (std::size_t i = 1; i < times.size(); ++i) {
        ode_integrate(f, times[i - 1], times[i], y0, tol);
        out.push_back(y0);
    }
    return out;
}

}  // namespace logbsde
