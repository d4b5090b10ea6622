#include <doctest.h>

#include <cmath>
#include <vector>

#include "rasc/errors.hpp"
#include "rasc/poll_planner.hpp"

using namespace rasc;

namespace {

EmpiricalDistribution uniform_dist(double hi, int bins = 10) {
    std::vector<double> edges, mass;
    for (int i = 0; i <= bins; ++i) edges.push_back(hi * i / bins);
    mass.assign(bins, 1.0 / bins);
    return EmpiricalDistribution::from_bins(edges, mass, 100);
}

EmpiricalDistribution exp_dist(double rate, double hi, int bins = 64) {
    std::vector<double> edges, mass;
    for (int i = 0; i <= bins; ++i) edges.push_back(hi * i / bins);
    for (int i = 0; i < bins; ++i)
        mass.push_back(std::exp(-rate * edges[i]) - std::exp(-rate * edges[i + 1]));
    return EmpiricalDistribution::from_bins(edges, mass, 500);
}

PollPlanRequest req_for(double U, double qw, double slo) {
    PollPlanRequest r;
    r.key = {"dev", "act", Transition::StartToComplete};
    r.U = U;
    r.qw = qw;
    r.slo = slo;
    return r;
}

}  // namespace

TEST_CASE("flat density places k polls at equal spacing") {
    // For constant p the stationarity recurrence collapses to L_i = i*U/k.
    auto d = uniform_dist(10.0);
    auto plan = solve_recurrence(d, 5, 10.0);
    REQUIRE(plan.polls.size() == 5);
    for (int i = 0; i < 5; ++i)
        CHECK(plan.polls[i] == doctest::Approx(2.0 * (i + 1)).epsilon(1e-3));
    CHECK(plan.valid_minimum);
    REQUIRE(plan.expected_detection.has_value());
    // mean lag of equal spacing on a flat density: half a gap
    CHECK(*plan.expected_detection == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("a single poll lands on the horizon") {
    auto d = uniform_dist(10.0);
    auto plan = solve_recurrence(d, 1, 10.0);
    REQUIRE(plan.polls.size() == 1);
    CHECK(plan.polls[0] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("recurrence solutions satisfy their own stationarity condition") {
    auto d = exp_dist(0.5, 14.0);
    double U = d.upper_bound();
    auto plan = solve_recurrence(d, 6, U);
    REQUIRE(plan.polls.size() == 6);
    CHECK(plan.polls.back() == doctest::Approx(U).epsilon(1e-4));
    for (size_t i = 0; i + 1 < plan.polls.size(); ++i) {
        double prev = i == 0 ? 0.0 : plan.polls[i - 1];
        double gap = plan.polls[i + 1] - plan.polls[i];
        double want = d.mass_between(prev, plan.polls[i]) / d.pdf(plan.polls[i]);
        CHECK(gap == doctest::Approx(want).epsilon(1e-4));
    }
    // density falls, so optimal gaps must widen
    for (size_t i = 0; i + 2 < plan.polls.size(); ++i)
        CHECK(plan.polls[i + 2] - plan.polls[i + 1] > plan.polls[i + 1] - plan.polls[i]);
}

TEST_CASE("more polls always detect sooner") {
    auto d = exp_dist(0.4, 16.0);
    double U = d.upper_bound();
    double prev = 1e18;
    for (int k = 2; k <= 8; ++k) {
        auto plan = solve_recurrence(d, k, U);
        REQUIRE(plan.expected_detection.has_value());
        CHECK(*plan.expected_detection < prev);
        prev = *plan.expected_detection;
    }
}

TEST_CASE("hard responsiveness target forces gap-bounded polling") {
    auto d = uniform_dist(10.0);
    auto plan = find_polls(d, req_for(10.0, 2.0, 1.0));
    CHECK(plan.k == 5);
    double prev = 0.0;
    for (double L : plan.polls) {
        CHECK(L - prev <= 2.0 + 1e-6);
        prev = L;
    }
}

TEST_CASE("fractional target takes the smallest budget that covers it") {
    auto d = uniform_dist(10.0);
    auto plan = find_polls(d, req_for(10.0, 3.0, 0.85));
    CHECK(plan.k == 3);
    REQUIRE(plan.coverage.has_value());
    CHECK(*plan.coverage >= 0.85);
    CHECK(*plan.coverage == doctest::Approx(0.9).epsilon(1e-6));
    // one poll fewer must not reach the target (minimality)
    auto two = solve_recurrence(d, 2, 10.0);
    CHECK(coverage(d, two.polls, 3.0) < 0.85);
}

TEST_CASE("coverage measures the union of detection windows") {
    auto d = uniform_dist(10.0);
    CHECK(coverage(d, {2, 4, 6, 8, 10}, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(coverage(d, {2, 4, 6, 8, 10}, 2.0) == doctest::Approx(1.0).epsilon(1e-9));
    // overlapping windows must not double count: (0,1.5] and (8,10]
    CHECK(coverage(d, {1.0, 1.5, 10.0}, 2.0) == doctest::Approx(0.35).epsilon(1e-9));
}

TEST_CASE("device poll rate limits are enforced") {
    auto d = uniform_dist(10.0);
    auto r = req_for(10.0, 0.05, 1.0);  // qw finer than the 0.1s device limit
    CHECK_THROWS_AS(find_polls(d, r), UnsupportableError);
}

TEST_CASE("fixed cadence baseline polls every qw") {
    auto plan = periodic_plan(10.0, 3.0);
    REQUIRE(plan.polls.size() == 4);
    CHECK(plan.polls == std::vector<double>{3.0, 6.0, 9.0, 12.0});
    auto exact = periodic_plan(9.0, 3.0);
    CHECK(exact.polls == std::vector<double>{3.0, 6.0, 9.0});
}

TEST_CASE("bucket-partition baseline splits a flat histogram evenly") {
    auto d = uniform_dist(10.0);
    auto plan = vopt_plan(d, 5, 10.0);
    REQUIRE(plan.polls.size() == 5);
    for (int i = 0; i < 5; ++i)
        CHECK(plan.polls[i] == doctest::Approx(2.0 * (i + 1)).epsilon(1e-9));
    CHECK(plan.compute_seconds >= 0.0);
}

TEST_CASE("second derivative check certifies the flat-density optimum") {
    auto d = uniform_dist(10.0);
    auto chk = second_derivative_check(d, {2, 4, 6, 8, 10});
    REQUIRE(chk.values.size() == 5);
    CHECK(chk.all_nonnegative);
    for (double v : chk.values) CHECK(v == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("past the horizon, silence backs off and then gives up") {
    // gap doubles from the base, capped at qw
    auto d0 = post_u_plan(0.0, 5.0, std::nullopt, 10.0, 10.0, 1.0);
    CHECK(!d0.failure);
    CHECK(d0.next_poll_offset == doctest::Approx(1.0));
    auto d1 = post_u_plan(1.0, 5.0, std::nullopt, 11.0, 10.0, 1.0);
    CHECK(d1.next_poll_offset == doctest::Approx(2.0));
    auto d2 = post_u_plan(4.0, 5.0, std::nullopt, 13.0, 10.0, 1.0);
    CHECK(d2.next_poll_offset == doctest::Approx(2.0));  // truncated to land at U + qw
    auto d3 = post_u_plan(2.0, 5.0, std::nullopt, 15.0, 10.0, 1.0);
    CHECK(d3.failure);
}

TEST_CASE("past the horizon, progress buys proportional patience") {
    auto d = post_u_plan(2.0, 5.0, 0.8, 12.0, 10.0, 1.0);
    CHECK(!d.failure);
    CHECK(d.next_poll_offset == doctest::Approx(3.0));   // 12 * 0.2 / 0.8
    CHECK(d.deadline_extension == doctest::Approx(3.0));
    auto far = post_u_plan(2.0, 5.0, 0.5, 12.0, 10.0, 1.0);
    CHECK(far.next_poll_offset == doctest::Approx(5.0));  // estimate capped at qw
    CHECK(far.deadline_extension == doctest::Approx(12.0));
}
