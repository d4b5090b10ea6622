#include "rasc/poll_planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace rasc {

namespace {

constexpr double kDensityFloorScale = 1e-9;  // floor is this divided by U
constexpr int kMaxBisectIters = 200;
constexpr int kMaxBudgetDoublings = 64;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_polls_ordered(const std::vector<double>& polls) {
    if (polls.empty()) throw ValidationError("poll list is empty");
    double prev = 0.0;
    for (double p : polls) {
        if (!(p > prev)) throw ValidationError("polls must be strictly increasing and positive");
        prev = p;
    }
}

struct RecurrenceRun {
    std::vector<double> polls;
    bool overshoot = false;
    bool floored = false;
};

// Forward-generate L_2..L_k from a candidate first poll. Each step satisfies
// the stationarity condition  (L_{i+1} - L_i) * p(L_i) = mass(L_{i-1}, L_i).
RecurrenceRun run_recurrence(const EmpiricalDistribution& dist, int k, double U, double l1,
                             double floor) {
    RecurrenceRun r;
    r.polls.reserve(k);
    r.polls.push_back(l1);
    double prev = 0.0;
    for (int i = 1; i < k; ++i) {
        double cur = r.polls.back();
        double p = dist.pdf(cur);
        if (p < floor) {
            p = floor;
            r.floored = true;
        }
        double next = cur + dist.mass_between(prev, cur) / p;
        prev = cur;
        r.polls.push_back(next);
        if (next > U && i < k - 1) {
            r.overshoot = true;
            break;
        }
    }
    return r;
}

double coverage_over(const EmpiricalDistribution& dist, const std::vector<double>& polls,
                     double qw, double U) {
    if (polls.empty()) return 0.0;
    // merge the windows (L - qw, L], clipped to (0, U]
    std::vector<std::pair<double, double>> win;
    for (double L : polls) {
        double lo = std::max(L - qw, 0.0);
        double hi = std::min(L, U);
        if (hi > lo) win.emplace_back(lo, hi);
    }
    if (win.empty()) return 0.0;
    std::sort(win.begin(), win.end());
    double mass = 0.0, lo = win[0].first, hi = win[0].second;
    for (std::size_t i = 1; i < win.size(); ++i) {
        if (win[i].first <= hi) {
            hi = std::max(hi, win[i].second);
        } else {
            mass += dist.mass_between(lo, hi);
            lo = win[i].first;
            hi = win[i].second;
        }
    }
    mass += dist.mass_between(lo, hi);
    double denom = std::max(dist.cdf(U), 1e-12);
    return std::min(1.0, mass / denom);
}

bool gaps_within(const std::vector<double>& polls, double qw) {
    double prev = 0.0;
    for (double p : polls) {
        if (p - prev > qw + 1e-9) return false;
        prev = p;
    }
    return true;
}

}  // namespace

double expected_detection(const EmpiricalDistribution& dist, const std::vector<double>& polls) {
    check_polls_ordered(polls);
    double q = 0.0, prev = 0.0;
    for (double L : polls) {
        q += L * dist.mass_between(prev, L);
        prev = L;
    }
    return q - dist.partial_mean(polls.back());
}

SecondDerivativeCheck second_derivative_check(const EmpiricalDistribution& dist,
                                              const std::vector<double>& polls) {
    check_polls_ordered(polls);
    SecondDerivativeCheck out;
    std::size_t k = polls.size();
    out.values.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        double v;
        if (i + 1 < k)
            v = 2.0 * dist.pdf(polls[i]) - (polls[i + 1] - polls[i]) * dist.pdf_slope(polls[i]);
        else
            v = 2.0 * dist.pdf(polls[i]) + polls[i] * dist.pdf_slope(polls[i]);
        out.values.push_back(v);
        if (v < -1e-12) out.all_nonnegative = false;
    }
    return out;
}

PollSchedule solve_recurrence(const EmpiricalDistribution& dist, int k, double U,
                              double epsilon) {
    auto t0 = std::chrono::steady_clock::now();
    if (k < 1) throw ValidationError("poll budget must be at least 1");
    if (!(U > 0.0)) throw ValidationError("horizon must be positive");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");

    PollSchedule out;
    if (k == 1) {
        out.polls = {U};
    } else {
        double floor = kDensityFloorScale / U;
        double lo = 0.0, hi = U;
        bool solved = false;
        for (int it = 0; it < kMaxBisectIters && !solved; ++it) {
            double mid = 0.5 * (lo + hi);
            RecurrenceRun r = run_recurrence(dist, k, U, mid, floor);
            double lk = r.overshoot ? U + 1.0 : r.polls.back();
            if (std::fabs(lk - U) <= epsilon) {
                out.polls = std::move(r.polls);
                out.used_density_floor = r.floored;
                solved = true;
            } else if (lk > U) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        if (!solved)
            throw InfeasibleBudgetError("no first-poll value reaches the horizon with k=" +
                                        std::to_string(k));
    }
    out.k = k;
    out.expected_detection = expected_detection(dist, out.polls);
    out.valid_minimum = second_derivative_check(dist, out.polls).all_nonnegative;
    out.compute_seconds = seconds_since(t0);
    return out;
}

PollSchedule find_polls(const EmpiricalDistribution& dist, const PollPlanRequest& req) {
    auto t0 = std::chrono::steady_clock::now();
    double U = req.U > 0.0 ? req.U : dist.upper_bound();
    if (!(req.qw > 0.0)) throw ValidationError("qw must be positive");
    if (!(req.slo > 0.0) || req.slo > 1.0) throw ValidationError("slo must be in (0, 1]");
    if (!(req.min_poll_interval > 0.0))
        throw ValidationError("min_poll_interval must be positive");
    if (req.qw < req.min_poll_interval)
        throw UnsupportableError("responsiveness target " + std::to_string(req.qw) +
                                 "s is finer than the device's minimum polling interval " +
                                 std::to_string(req.min_poll_interval) + "s");

    bool exact = req.slo >= 1.0 - 1e-12;
    auto attempt = [&](int k) -> std::optional<PollSchedule> {
        PollSchedule s;
        try {
            s = solve_recurrence(dist, k, U, req.epsilon);
        } catch (const InfeasibleBudgetError&) {
            return std::nullopt;
        }
        double cov = coverage_over(dist, s.polls, req.qw, U);
        bool ok = exact ? gaps_within(s.polls, req.qw) : cov >= req.slo - 1e-12;
        if (!ok) return std::nullopt;
        s.coverage = cov;
        return s;
    };

    int right = std::max(1, static_cast<int>(std::ceil(U / req.qw)));
    std::optional<PollSchedule> best = attempt(right);
    for (int d = 0; !best && d < kMaxBudgetDoublings; ++d) {
        right *= 2;
        best = attempt(right);
    }
    if (!best)
        throw UnsupportableError("no poll budget meets the SLO for this distribution");

    int lo = 1, hi = right;
    while (lo < hi) {
        int mid = lo + (hi - lo) / 2;
        if (auto s = attempt(mid)) {
            best = std::move(s);
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    // coverage under recurrence placements is monotone in practice but not by
    // construction; sweep down so the returned budget is genuinely minimal
    while (best->k > 1) {
        auto s = attempt(best->k - 1);
        if (!s) break;
        best = std::move(s);
    }

    double min_gap = best->polls[0];
    for (std::size_t i = 1; i < best->polls.size(); ++i)
        min_gap = std::min(min_gap, best->polls[i] - best->polls[i - 1]);
    if (min_gap < req.min_poll_interval - 1e-12)
        throw UnsupportableError("meeting the SLO needs polls closer together than the device "
                                 "minimum interval allows");

    best->compute_seconds = seconds_since(t0);
    return *best;
}

double coverage(const EmpiricalDistribution& dist, const std::vector<double>& polls, double qw) {
    if (polls.empty()) return 0.0;
    check_polls_ordered(polls);
    if (!(qw > 0.0)) throw ValidationError("qw must be positive");
    // the final poll pins the plan's horizon, so condition on events before it
    return coverage_over(dist, polls, qw, polls.back());
}

PollSchedule periodic_plan(double U, double qw) {
    if (!(U > 0.0) || !(qw > 0.0)) throw ValidationError("U and qw must be positive");
    PollSchedule s;
    int k = static_cast<int>(std::ceil(U / qw - 1e-12));
    k = std::max(k, 1);
    for (int i = 1; i <= k; ++i) s.polls.push_back(i * qw);
    s.k = k;
    s.coverage = 1.0;
    return s;
}

PollSchedule vopt_plan(const EmpiricalDistribution& dist, int k, double U) {
    auto t0 = std::chrono::steady_clock::now();
    if (!(U > 0.0)) throw ValidationError("horizon must be positive");
    const auto& edges = dist.bin_edges();
    const auto& mass = dist.bin_mass();

    // buckets partition the bins up to (and including) the one holding U
    int nb = 0;
    while (nb < static_cast<int>(mass.size()) && edges[nb] < U) ++nb;
    if (k < 1 || k > nb)
        throw ValidationError("bucket count must be in [1, bins-up-to-horizon] = [1, " +
                              std::to_string(nb) + "]");

    std::vector<double> s0(nb + 1, 0.0), s1(nb + 1, 0.0), s2(nb + 1, 0.0);
    for (int i = 0; i < nb; ++i) {
        double c = 0.5 * (edges[i] + edges[i + 1]);
        s0[i + 1] = s0[i] + mass[i];
        s1[i + 1] = s1[i] + mass[i] * c;
        s2[i + 1] = s2[i] + mass[i] * c * c;
    }
    auto cost = [&](int a, int b) {  // bins [a, b)
        double w = s0[b] - s0[a];
        if (w <= 0.0) return 0.0;
        double m = s1[b] - s1[a];
        return (s2[b] - s2[a]) - m * m / w;
    };

    constexpr double kInf = 1e300;
    std::vector<std::vector<double>> dp(k + 1, std::vector<double>(nb + 1, kInf));
    std::vector<std::vector<int>> cut(k + 1, std::vector<int>(nb + 1, -1));
    dp[0][0] = 0.0;
    for (int j = 1; j <= k; ++j) {
        for (int b = j; b <= nb; ++b) {
            for (int a = j - 1; a < b; ++a) {
                if (dp[j - 1][a] >= kInf) continue;
                double v = dp[j - 1][a] + cost(a, b);
                if (v < dp[j][b] - 1e-15) {  // strict improvement keeps the leftmost split
                    dp[j][b] = v;
                    cut[j][b] = a;
                }
            }
        }
    }

    std::vector<int> bounds(k + 1);
    bounds[k] = nb;
    for (int j = k; j >= 1; --j) bounds[j - 1] = cut[j][bounds[j]];

    PollSchedule s;
    for (int j = 1; j < k; ++j) s.polls.push_back(edges[bounds[j]]);
    s.polls.push_back(U);
    // interior boundaries at or past the horizon would collide with the final poll
    s.polls.erase(std::remove_if(s.polls.begin(), s.polls.end() - 1,
                                 [&](double p) { return p >= U; }),
                  s.polls.end() - 1);
    s.k = static_cast<int>(s.polls.size());
    s.expected_detection = expected_detection(dist, s.polls);
    s.compute_seconds = seconds_since(t0);
    return s;
}

PostUDecision post_u_plan(double last_gap, double qw, std::optional<double> progress,
                          double elapsed, double U, double base_gap) {
    if (!(qw > 0.0) || !(base_gap > 0.0)) throw ValidationError("qw and base_gap must be positive");
    if (elapsed < U - 1e-9)
        throw ValidationError("post-horizon planning starts once elapsed >= U");
    PostUDecision d;
    if (progress && *progress > 0.0) {
        if (*progress >= 1.0)
            throw ValidationError("progress at or past 1 means the milestone already happened");
        double est = elapsed * (1.0 - *progress) / *progress;
        d.next_poll_offset = std::max(std::min(est, qw), 1e-9);
        d.deadline_extension = est;
        return d;
    }
    if (elapsed >= U + qw - 1e-12) {
        d.failure = true;
        return d;
    }
    double next = last_gap <= 0.0 ? base_gap : std::min(2.0 * last_gap, qw);
    if (elapsed + next > U + qw) next = U + qw - elapsed;
    d.next_poll_offset = next;
    return d;
}

}  // namespace rasc
