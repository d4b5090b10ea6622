#pragma once

#include <optional>
#include <vector>

#include "rasc/empirical_distribution.hpp"

namespace rasc {

struct PollPlanRequest {
    TransitionKey key;
    double U = 0.0;                  // detection horizon; <=0 means "use dist.upper_bound()"
    double qw = 0.0;                 // responsiveness target (max acceptable detection lag)
    double slo = 0.9;                // fraction of events that must be detected within qw
    double min_poll_interval = 0.1;  // finest polling the device API allows
    double epsilon = 1e-5;           // horizon tolerance for the recurrence solve
};

struct PollSchedule {
    std::vector<double> polls;  // strictly increasing offsets from the transition start
    int k = 0;
    std::optional<double> expected_detection;
    std::optional<double> coverage;  // fraction of events detected within qw, given event <= U
    bool valid_minimum = false;      // second-derivative test outcome (recurrence plans only)
    bool used_density_floor = false;
    double compute_seconds = 0.0;
};

struct SecondDerivativeCheck {
    std::vector<double> values;  // one per poll, order matching the schedule
    bool all_nonnegative = true;
};

// Decision for polling past the planned horizon.
struct PostUDecision {
    bool failure = false;
    double next_poll_offset = 0.0;     // relative to now; meaningful when !failure
    double deadline_extension = 0.0;   // new evidence-based estimate of remaining time
};

// Mean detection delay of the given poll placement under the fitted density,
// counting only events that occur before the final poll.
double expected_detection(const EmpiricalDistribution& dist, const std::vector<double>& polls);

// Optimal placement of exactly k polls over (0, U]: the final poll is pinned to
// the horizon and interior polls satisfy the first-order stationarity
// recurrence; the free first poll is found by bisection.
PollSchedule solve_recurrence(const EmpiricalDistribution& dist, int k, double U,
                              double epsilon = 1e-5);

// Smallest poll budget whose placement meets the responsiveness SLO, then that
// placement. slo == 1 demands every inter-poll gap (including the leading one)
// be at most qw; slo < 1 demands covered probability mass of at least slo.
PollSchedule find_polls(const EmpiricalDistribution& dist, const PollPlanRequest& req);

// Probability mass (conditional on the event landing in (0, U]) of the union
// of detection windows (L_i - qw, L_i].
double coverage(const EmpiricalDistribution& dist, const std::vector<double>& polls, double qw);

// Fixed-cadence baseline: polls at qw, 2*qw, ... up to the first multiple >= U.
PollSchedule periodic_plan(double U, double qw);

// Variance-optimal histogram partition baseline: k buckets minimizing the
// mass-weighted within-bucket variance of bin positions, a poll at each bucket
// boundary, the final poll at U. Records its own computation time.
PollSchedule vopt_plan(const EmpiricalDistribution& dist, int k, double U);

SecondDerivativeCheck second_derivative_check(const EmpiricalDistribution& dist,
                                              const std::vector<double>& polls);

// Polling decision after the horizon U has passed without the milestone.
// With a usable progress fraction the next poll lands at min{linear-extrapolation
// remainder, qw} and the failure deadline extends by that remainder; without
// progress the gap doubles from base_gap up to qw, the last poll is truncated to
// land exactly at U + qw, and FailureDeclared is reached once elapsed >= U + qw.
// elapsed is measured from the transition start.
PostUDecision post_u_plan(double last_gap, double qw, std::optional<double> progress,
                          double elapsed, double U, double base_gap);

}  // namespace rasc
