#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "logbsde/forward_sde.hpp"
#include "logbsde/quadrature.hpp"

using namespace logbsde;

namespace {

Real normal_cdf(Real x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(sup_{s<=T} |W_s| <= m) by the reflection (theta-series) expansion.
Real two_sided_sup_cdf(Real m, Real T) {
    if (m <= 0.0) return 0.0;
    const Real a = m / std::sqrt(T);
    Real s = 0.0;
    for (int j = -40; j <= 40; ++j) {
        const Real sign = (j % 2 == 0) ? 1.0 : -1.0;
        s += sign * (normal_cdf((2 * j + 1) * a) - normal_cdf((2 * j - 1) * a));
    }
    return s;
}

// E exp(kappa sup^2) = 1 + int_0^inf 2 kappa m e^{kappa m^2} P(sup > m) dm.
Real exp_sup_moment_oracle(Real kappa, Real T) {
    return 1.0 + integrate_gl(
                     [&](Real m) {
                         return 2.0 * kappa * m * std::exp(kappa * m * m) *
                                (1.0 - two_sided_sup_cdf(m, T));
                     },
                     0.0, 10.0 * std::sqrt(T), 48, 16);
}

}  // namespace

TEST_CASE("reflection-principle oracle reproduces its frozen value") {
    // adaptive quadrature of the theta-series tail, frozen before the build
    REQUIRE_THAT(exp_sup_moment_oracle(0.5, 0.25),
                 Catch::Matchers::WithinAbs(1.28786061262, 1e-6));
}

TEST_CASE("exponential sup moment matches the reflection oracle within 5%") {
    const DiffusionSpec spec = diffusions::constant(1, 1, 0.0, 1.0);
    const std::vector<Real> x0 = {0.0};
    const TimeGrid grid = make_time_grid(0.0, 0.25, 512);
    const PathBatch batch = simulate_paths(spec, grid, x0, 100000, 31415);
    const auto rep = exp_moment_estimate(batch, 0.5, x0);
    REQUIRE_FALSE(rep.divergent);
    const Real oracle = exp_sup_moment_oracle(0.5, 0.25);
    REQUIRE(std::abs(rep.estimate - oracle) / oracle < 0.05);
}

TEST_CASE("norm equivalence against the Gaussian-convolution oracle") {
    const DiffusionSpec spec = diffusions::constant(1, 1, 0.0, 1.0);
    const auto phi = [](std::span<const Real> x) {
        return std::abs(x[0]) <= 1.0 ? 1.0 : 0.0;
    };
    const SpaceGrid grid = uniform_space_grid(1, 6.0, 121);
    const auto report =
        norm_equivalence_check(spec, phi, 1.0, 0.0, 1.0, grid, 2000, 2718, 8.0, 64);

    // E int phi(X_1^{0,x}) e^{-|x|} dx = int e^{-|x|} [Phi(1-x) - Phi(-1-x)] dx
    const Real numer = integrate_gl(
        [&](Real x) {
            return std::exp(-std::abs(x)) * (normal_cdf(1.0 - x) - normal_cdf(-1.0 - x));
        },
        -6.0, 6.0, 48, 24);
    const Real denom = 2.0 * (1.0 - std::exp(-1.0));
    const Real expected = numer / denom;

    REQUIRE_THAT(expected, Catch::Matchers::WithinAbs(0.76153697781, 1e-6));
    REQUIRE(std::abs(report.ratio - expected) < 0.05 * expected);
    REQUIRE(report.pass);  // inside the configured sandwich [1/C, C]
}
