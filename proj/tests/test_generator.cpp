#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "logbsde/examples.hpp"
#include "logbsde/generator.hpp"
#include "logbsde/rng.hpp"

using namespace logbsde;

namespace {

Real eval1(const Generator& g, Real t, Real x, Real y, Real z) {
    Real out;
    g.eval(t, {&x, 1}, {&y, 1}, {&z, 1}, {&out, 1});
    return out;
}

}  // namespace

TEST_CASE("lambda weight formula") {
    AssumptionEnvelope env;
    env.gamma = 0.25;
    const std::vector<Real> x = {0.0};

    env.M = constant_field(0.0);
    env.Kproc = constant_field(0.0);
    REQUIRE(lambda_weight(env, 0.0, x) == 0.0);

    env.M = constant_field(1.0);
    REQUIRE(lambda_weight(env, 0.0, x) == 2.0);

    env.Kproc = constant_field(2.0);
    REQUIRE(lambda_weight(env, 0.0, x) == 10.0);  // 2 + 4 / 0.5
}

TEST_CASE("lambda weight rejects nonpositive gamma") {
    AssumptionEnvelope env;
    env.gamma = 0.0;
    const std::vector<Real> x = {0.0};
    try {
        lambda_weight(env, 0.0, x);
        FAIL("expected invalid-envelope");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-envelope");
    }
}

TEST_CASE("log drift evaluations") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    REQUIRE(eval1(bundle.generator, 0.0, 0.0, 1.0, 0.0) == 0.0);
    REQUIRE_THAT(eval1(bundle.generator, 0.0, 0.0, std::exp(1.0), 0.0),
                 Catch::Matchers::WithinAbs(-std::exp(1.0), 1e-14));
}

TEST_CASE("continuous extension at the origin along geometric rays") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    REQUIRE(eval1(bundle.generator, 0.0, 0.0, 0.0, 0.0) == 0.0);
    Real prev = std::abs(eval1(bundle.generator, 0.0, 0.0, 1e-2, 0.0));
    for (Real radius = 1e-3; radius > 1e-12; radius *= 0.1) {
        const Real cur = std::abs(eval1(bundle.generator, 0.0, 0.0, radius, 0.0));
        REQUIRE(cur < prev);  // |y log y| decreases to 0 along the ray
        prev = cur;
    }
}

TEST_CASE("gh product vanishes at y = 0 and at z = 0") {
    const auto bundle = make_example(ExampleKind::GhProduct, {});
    REQUIRE(eval1(bundle.generator, 0.0, 0.0, 0.0, 0.5) == 0.0);
    REQUIRE(eval1(bundle.generator, 0.0, 0.0, 2.0, 0.0) == 0.0);
}

TEST_CASE("gh product monotonicity of the y factor on sampled pairs") {
    const auto bundle = make_example(ExampleKind::GhProduct, {});
    const CounterRng rng(derive_stream(5, "gh_mono"));
    for (std::size_t i = 0; i < 5000; ++i) {
        const Real y1 = 10.0 * (2 * rng.uniform(i, 0, 0) - 1);
        const Real y2 = 10.0 * (2 * rng.uniform(i, 1, 0) - 1);
        const Real z = 3.0 * (2 * rng.uniform(i, 2, 0) - 1);
        const Real f1 = eval1(bundle.generator, 0.0, 0.0, y1, z);
        const Real f2 = eval1(bundle.generator, 0.0, 0.0, y2, z);
        // h >= 0, so the sign is carried by <y-y', g(y)-g(y')> <= 0
        REQUIRE((y1 - y2) * (f1 - f2) <= 1e-12);
    }
}

TEST_CASE("example parameter validation") {
    ExampleParams bad;
    bad.eps0 = 1.5;
    try {
        make_example(ExampleKind::GhProduct, bad);
        FAIL("expected invalid-parameters");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-parameters");
    }
    ExampleParams bad_q;
    bad_q.q_bar = 2.5;
    try {
        make_example(ExampleKind::StateCoupled, bad_q);
        FAIL("expected invalid-parameters");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-parameters");
    }
    ExampleParams bad_c5;
    bad_c5.q_bar = 1.8;
    bad_c5.q_bar_pp = 0.5;
    try {
        make_example(ExampleKind::Composite5, bad_c5);
        FAIL("expected invalid-parameters");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-parameters");
    }
}

TEST_CASE("rho_N of identical generators is zero") {
    const auto bundle = make_example(ExampleKind::LogDrift, {});
    const std::vector<Real> x = {0.0};
    REQUIRE(rho_N(bundle.generator, bundle.generator, 2.0, 0.0, x, 41) == 0.0);
}

TEST_CASE("rho_N of a componentwise constant shift is |c| sqrt(d)") {
    for (int d : {1, 3}) {
        Generator g1 = zero_generator(d, 1);
        Generator g2 = zero_generator(d, 1);
        const Real c = 0.7;
        g2.eval = [c](Real, std::span<const Real>, std::span<const Real>,
                      std::span<const Real>, std::span<Real> out) {
            std::fill(out.begin(), out.end(), c);
        };
        const std::vector<Real> x = {0.0};
        REQUIRE_THAT(rho_N(g1, g2, 1.0, 0.0, x, 9),
                     Catch::Matchers::WithinAbs(c * std::sqrt(Real(d)), 1e-12));
    }
}

TEST_CASE("rho_N is symmetric, nonnegative and nondecreasing in N") {
    const auto log_drift = make_example(ExampleKind::LogDrift, {});
    ExampleParams prm2;
    prm2.K = 2.0;
    const auto log_drift2 = make_example(ExampleKind::LogDrift, prm2);
    const std::vector<Real> x = {0.0};
    Real prev = -1.0;
    for (Real N : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const Real a = rho_N(log_drift.generator, log_drift2.generator, N, 0.0, x, 101);
        const Real b = rho_N(log_drift2.generator, log_drift.generator, N, 0.0, x, 101);
        REQUIRE(a == b);
        REQUIRE(a >= 0.0);
        // the grid scan is a lower bound; allow its resolution wobble
        REQUIRE(a >= prev - 1e-3 * (1.0 + prev));
        prev = a;
    }
}

TEST_CASE("rho_N rejects incompatible generators") {
    const std::vector<Real> x = {0.0};
    try {
        rho_N(zero_generator(1, 1), zero_generator(2, 1), 1.0, 0.0, x, 5);
        FAIL("expected incompatible-generators");
    } catch (const Error& e) {
        REQUIRE(e.code() == "incompatible-generators");
    }
}

TEST_CASE("envelope validation enforces the exponent ranges") {
    AssumptionEnvelope env;
    env.gamma = 0.6;  // must be < 1/2 for p = 2
    try {
        env.validate();
        FAIL("expected invalid-envelope");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-envelope");
    }
}
