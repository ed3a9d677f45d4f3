#pragma once

#include <cstddef>
#include <vector>

#include "logbsde/common.hpp"

namespace logbsde {

/// Strictly increasing discretization of [t0, T] shared by every process in
/// a run. points.front() == t0, points.back() == T.
struct TimeGrid {
    Real t0 = 0.0;
    Real T = 0.0;
    std::vector<Real> points;

    std::size_t n_steps() const { return points.empty() ? 0 : points.size() - 1; }
    Real dt(std::size_t i) const { return points[i + 1] - points[i]; }
};

/// Uniform grid with n_steps intervals. T == t0 yields the degenerate
/// single-point grid {t0}.
inline TimeGrid make_time_grid(Real t0, Real T, std::size_t n_steps) {
    require(std::isfinite(t0) && std::isfinite(T), "invalid-interval",
            "time grid endpoints must be finite");
    if (T < t0) fail("invalid-interval", "make_time_grid: T < t0");
    TimeGrid g;
    g.t0 = t0;
    g.T = T;
    if (T == t0) {
        g.points = {t0};
        return g;
    }
    if (n_steps == 0) fail("invalid-resolution", "make_time_grid: n_steps = 0 with T > t0");
    g.points.resize(n_steps + 1);
    const Real h = (T - t0) / static_cast<Real>(n_steps);
    for (std::size_t i = 0; i <= n_steps; ++i) g.points[i] = t0 + h * static_cast<Real>(i);
    g.points.back() = T;
    return g;
}

}  // namespace logbsde
