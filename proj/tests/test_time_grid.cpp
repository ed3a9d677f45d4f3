#include <catch2/catch_amalgamated.hpp>

#include "logbsde/time_grid.hpp"

using namespace logbsde;

TEST_CASE("uniform partition of [0,1] into 4 steps") {
    const TimeGrid g = make_time_grid(0.0, 1.0, 4);
    REQUIRE(g.points == std::vector<Real>{0.0, 0.25, 0.5, 0.75, 1.0});
    REQUIRE(g.n_steps() == 4);
}

TEST_CASE("uniform partition of [0.5,1] into 2 steps") {
    const TimeGrid g = make_time_grid(0.5, 1.0, 2);
    REQUIRE(g.points == std::vector<Real>{0.5, 0.75, 1.0});
}

TEST_CASE("reversed interval is rejected") {
    try {
        make_time_grid(1.0, 0.0, 4);
        FAIL("expected invalid-interval");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-interval");
    }
}

TEST_CASE("zero steps on a nondegenerate interval is rejected") {
    try {
        make_time_grid(0.0, 1.0, 0);
        FAIL("expected invalid-resolution");
    } catch (const Error& e) {
        REQUIRE(e.code() == "invalid-resolution");
    }
}

TEST_CASE("degenerate single-point grid") {
    const TimeGrid g = make_time_grid(0.5, 0.5, 0);
    REQUIRE(g.points == std::vector<Real>{0.5});
    REQUIRE(g.n_steps() == 0);
}

TEST_CASE("endpoints are exact and spacing strictly increasing") {
    const TimeGrid g = make_time_grid(0.1, 0.9, 7);
    REQUIRE(g.points.front() == 0.1);
    REQUIRE(g.points.back() == 0.9);
    for (std::size_t i = 0; i + 1 < g.points.size(); ++i)
        REQUIRE(g.points[i] < g.points[i + 1]);
}
