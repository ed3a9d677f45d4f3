#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "logbsde/examples.hpp"
#include "logbsde/mollify.hpp"

using namespace logbsde;

TEST_CASE("bump kernel: support, golden center value, unit mass") {
    REQUIRE(psi(1.0) == 0.0);
    REQUIRE(psi(-1.0) == 0.0);
    REQUIRE(psi(2.5) == 0.0);
    // c1 = 0.443993816168079 from adaptive quadrature, frozen before the build
    REQUIRE_THAT(MollifierKernel::instance().c1,
                 Catch::Matchers::WithinAbs(0.443993816168079, 1e-10));
    REQUIRE_THAT(psi(0.0), Catch::Matchers::WithinAbs(0.828568839869105, 1e-8));

    // unit mass against an independent fine trapezoid
    const int n = 200001;
    Real mass = 0.0;
    for (int i = 0; i < n; ++i) {
        const Real x = -1.0 + 2.0 * i / (n - 1.0);
        const Real w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        mass += w * psi(x) * 2.0 / (n - 1.0);
    }
    REQUIRE_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-10));
}

TEST_CASE("terminal truncation") {
    const std::vector<Real> small = {0.5};
    REQUIRE(truncate_terminal(small, 1) == small);
    const std::vector<Real> big = {3.0};
    REQUIRE(truncate_terminal(big, 1) == std::vector<Real>{0.0});

    const CounterRng rng(derive_stream(3, "trunc"));
    for (std::size_t i = 0; i < 2000; ++i) {
        std::vector<Real> xi = {20.0 * (2 * rng.uniform(i, 0, 0) - 1),
                                20.0 * (2 * rng.uniform(i, 1, 0) - 1)};
        const auto out = truncate_terminal(xi, 1 + static_cast<int>(8 * rng.uniform(i, 2, 0)));
        REQUIRE(norm2(out) <= norm2(xi) + 1e-15);
    }
}

TEST_CASE("mollifying the zero generator yields zero") {
    AssumptionEnvelope env;
    env.eta_bar = constant_field(1.0);
    const ApproxGenerator fn = mollify_generator(zero_generator(1, 1), env, 8,
                                                 constant_field(1.0), 16);
    const CounterRng rng(derive_stream(4, "zero_moll"));
    std::vector<Real> x = {0.0}, y(1), z(1), out(1);
    for (std::size_t i = 0; i < 500; ++i) {
        y[0] = 10.0 * (2 * rng.uniform(i, 0, 0) - 1);
        z[0] = 10.0 * (2 * rng.uniform(i, 1, 0) - 1);
        fn.eval(0.5, x, y, z, out);
        REQUIRE(out[0] == 0.0);
    }
}

TEST_CASE("mollified log drift converges to the driver at y = 0.5") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const ApproxGenerator fn = mollify_generator(bundle.generator, bundle.envelope, 16,
                                                 constant_field(1.0), 32);
    std::vector<Real> x = {0.0}, y = {0.5}, z = {0.0}, out(1);
    fn.eval(0.0, x, y, z, out);
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(-xlogx(0.5), 1e-3));
    REQUIRE_THAT(out[0], Catch::Matchers::WithinAbs(0.3466, 2e-3));
}

TEST_CASE("support of the approximation is exactly {|y| < n, |z| < n}") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const ApproxGenerator fn = mollify_generator(bundle.generator, bundle.envelope, 8,
                                                 constant_field(1.0), 16);
    std::vector<Real> x = {0.0}, out(1);
    for (Real s : {8.0, 8.5, 20.0}) {
        std::vector<Real> y = {s}, z = {0.0};
        fn.eval(0.0, x, y, z, out);
        REQUIRE(out[0] == 0.0);
        y[0] = 0.5;
        z[0] = s;
        fn.eval(0.0, x, y, z, out);
        REQUIRE(out[0] == 0.0);
    }
}

TEST_CASE("growth bound |f_n| <= 2p + 3n^p at sampled points") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const Real p = bundle.envelope.p;
    const CounterRng rng(derive_stream(6, "bound_c"));
    for (int n : {4, 8, 16}) {
        const ApproxGenerator fn = mollify_generator(bundle.generator, bundle.envelope, n,
                                                     constant_field(1.0), 16);
        const Real bound = 2.0 * p + 3.0 * std::pow(Real(n), p);
        std::vector<Real> x = {0.0}, y(1), z(1), out(1);
        for (std::size_t i = 0; i < 10000; ++i) {
            y[0] = 2.0 * n * (2 * rng.uniform(i, 0, 0) - 1);
            z[0] = 2.0 * n * (2 * rng.uniform(i, 1, 0) - 1);
            fn.eval(rng.uniform(i, 2, 0), x, y, z, out);
            REQUIRE(std::abs(out[0]) <= bound);
        }
    }
}

TEST_CASE("doubling the quadrature changes smooth-region values below 1e-6") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const ApproxGenerator coarse = mollify_generator(bundle.generator, bundle.envelope, 16,
                                                     constant_field(1.0), 32);
    const ApproxGenerator fine = mollify_generator(bundle.generator, bundle.envelope, 16,
                                                   constant_field(1.0), 64);
    const CounterRng rng(derive_stream(7, "richardson"));
    std::vector<Real> x = {0.0}, y(1), z(1), a(1), b(1);
    Real worst = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        y[0] = 5.0 * (2 * rng.uniform(i, 0, 0) - 1);
        if (std::abs(y[0]) < 1e-2) y[0] = 1e-2;  // keep clear of the kernel-width kink
        z[0] = 5.0 * (2 * rng.uniform(i, 1, 0) - 1);
        coarse.eval(0.3, x, y, z, a);
        fine.eval(0.3, x, y, z, b);
        worst = std::max(worst, std::abs(a[0] - b[0]));
    }
    REQUIRE(worst < 1e-6);
}

TEST_CASE("pointwise convergence beyond burn-in at fixed arguments") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    std::vector<Real> x = {0.0}, z = {0.3}, out(1), base(1);
    for (Real yv : {0.5, 1.5, -2.0}) {
        std::vector<Real> y = {yv};
        bundle.generator.eval(0.0, x, y, z, base);
        Real prev = std::numeric_limits<Real>::infinity();
        for (int n : {8, 16, 32}) {  // n = 4 is the burn-in level (indicator off)
            const ApproxGenerator fn = mollify_generator(bundle.generator, bundle.envelope,
                                                         n, constant_field(1.0), 32);
            fn.eval(0.0, x, y, z, out);
            const Real err = std::abs(out[0] - base[0]);
            REQUIRE(err < prev);
            prev = err;
        }
        REQUIRE(prev < 1e-4);
    }
}

TEST_CASE("schedule certification on the log drift") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    SampleBox box;
    const ScalarField h = [](Real, std::span<const Real> xx) { return std::exp(-norm2(xx)); };
    const auto report = verify_approx_properties(bundle.generator, bundle.envelope,
                                                 {4, 8, 16, 32}, h, box, 2000, 1.0, 201,
                                                 1e-2, 24);
    REQUIRE(report.rows.size() == 4);
    for (const auto& row : report.rows) {
        INFO("n = " << row.n);
        CHECK(row.violations_c == 0);
        CHECK(row.violations_d == 0);
        CHECK(row.violations_f == 0);
        CHECK(row.support_ok);
        CHECK(std::isfinite(row.lipschitz));
    }
    CHECK(report.rho_nonincreasing);
    CHECK(report.rho_final_ok);

    // smoothing bound: |grad f_n| <= C n^{2p+2} with the constant fitted on the
    // first level where the indicator is active, stable for the rest
    const Real p = bundle.envelope.p;
    Real fitted_C = 0.0;
    for (const auto& row : report.rows) {
        if (row.lipschitz > 0.1) {
            fitted_C = 4.0 * row.lipschitz / std::pow(Real(row.n), 2.0 * p + 2.0);
            break;
        }
    }
    REQUIRE(fitted_C > 0.0);
    for (const auto& row : report.rows)
        CHECK(row.lipschitz <= fitted_C * std::pow(Real(row.n), 2.0 * p + 2.0));
}

TEST_CASE("schedule rho ladder agrees with a 10x dense grid oracle") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const std::vector<Real> x = {0.0};
    for (int n : {8, 32}) {
        const ApproxGenerator fn = mollify_generator(bundle.generator, bundle.envelope, n,
                                                     constant_field(1.0), 32);
        const Real coarse = rho_N(fn.to_generator(), bundle.generator, 1.0, 0.5, x, 100);
        const Real dense = rho_N(fn.to_generator(), bundle.generator, 1.0, 0.5, x, 1000);
        REQUIRE(coarse <= dense * (1.0 + 1e-9));  // grid sup is a lower bound
        REQUIRE(dense - coarse <= 0.05 * dense + 1e-9);
    }
}

TEST_CASE("zero generator passes all schedule properties with slack") {
    AssumptionEnvelope env;
    env.eta_bar = constant_field(1.0);
    SampleBox box;
    const auto report = verify_approx_properties(zero_generator(1, 1), env, {4, 8},
                                                 constant_field(1.0), box, 500, 1.0, 51,
                                                 1e-9, 16);
    for (const auto& row : report.rows) {
        CHECK(row.violations_c == 0);
        CHECK(row.violations_d == 0);
        CHECK(row.violations_f == 0);
        CHECK(row.rho == 0.0);
    }
}

TEST_CASE("dimension cap and node floor are enforced") {
    AssumptionEnvelope env;
    Generator wide = zero_generator(2, 3);
    wide.z_dependent = true;  // convolution volume is d + d*r = 8 axes
    try {
        mollify_generator(wide, env, 4, constant_field(1.0), 16);
        FAIL("expected unsupported-dimension");
    } catch (const Error& e) {
        REQUIRE(e.code() == "unsupported-dimension");
    }
    try {
        mollify_generator(zero_generator(1, 1), env, 4, constant_field(1.0), 4);
        FAIL("expected invalid-parameters");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-parameters");
    }
}
