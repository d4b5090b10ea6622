#include "rasc/action_lifecycle.hpp"

#include <algorithm>
#include <cmath>

namespace rasc {

namespace {
constexpr double kTimeEps = 1e-9;
constexpr double kMinBackoffGap = 1e-3;

// Backoff starts from the cadence the plan ended with, never wider than qw.
double base_backoff(const PhasePlan& plan) {
    double gap;
    size_t n = plan.offsets.size();
    if (n >= 2)
        gap = plan.offsets[n - 1] - plan.offsets[n - 2];
    else if (n == 1)
        gap = plan.offsets[0];
    else
        gap = plan.qw;
    return std::clamp(gap, kMinBackoffGap, plan.qw);
}
}  // namespace

const char* to_string(LifecyclePhase p) {
    switch (p) {
        case LifecyclePhase::Idle: return "idle";
        case LifecyclePhase::AckWait: return "ack_wait";
        case LifecyclePhase::StartDetection: return "start_detection";
        case LifecyclePhase::CompleteDetection: return "complete_detection";
        case LifecyclePhase::Completed: return "completed";
        case LifecyclePhase::Failed: return "failed";
    }
    return "?";
}

ActionTracker::ActionTracker(std::optional<PhasePlan> start_plan, PhasePlan complete_plan)
    : start_plan_(std::move(start_plan)), complete_plan_(std::move(complete_plan)) {}

const PhasePlan& ActionTracker::active_plan() const {
    if (phase_ == LifecyclePhase::StartDetection && start_plan_) return *start_plan_;
    return complete_plan_;
}

void ActionTracker::enter_phase(LifecyclePhase p, double t) {
    phase_ = p;
    phase_start_ = t;
    plan_idx_ = 0;
    last_progress_ = -1.0;
    const PhasePlan& plan = active_plan();
    backoff_gap_ = base_backoff(plan);
    fail_at_ = t + plan.upper + plan.qw;
}

ActionTracker::Result ActionTracker::on_request_sent(double t) {
    phase_ = LifecyclePhase::AckWait;
    request_time_ = t;
    ack_deadline_ = t + complete_plan_.qw;
    return {};
}

ActionTracker::Result ActionTracker::on_ack(double t) {
    if (phase_ != LifecyclePhase::AckWait) return {};
    ack_time_ = t;
    Result r;
    r.fired.push_back(EdgeKind::Ack);
    enter_phase(start_plan_ ? LifecyclePhase::StartDetection : LifecyclePhase::CompleteDetection, t);
    arm_next_poll(t, r, -1.0, false);
    return r;
}

ActionTracker::Result ActionTracker::on_ack_deadline(double t) {
    if (phase_ != LifecyclePhase::AckWait) return {};
    return fail(t, "no_ack");
}

ActionTracker::Result ActionTracker::on_rejected(double t) {
    if (phase_ != LifecyclePhase::AckWait) return {};
    return fail(t, "rejected_busy");
}

ActionTracker::Result ActionTracker::on_push(double t, EdgeKind event) {
    if (terminal()) return {};
    Result r;
    switch (event) {
        case EdgeKind::Ack:
            return on_ack(t);
        case EdgeKind::Start:
            if (phase_ == LifecyclePhase::StartDetection || phase_ == LifecyclePhase::AckWait) {
                start_time_ = t;
                r.fired.push_back(EdgeKind::Start);
                enter_phase(LifecyclePhase::CompleteDetection, t);
                pending_poll_.reset();   // push devices report on their own
            } else if (phase_ == LifecyclePhase::CompleteDetection && !start_time_) {
                start_time_ = t;        // no start phase of its own, still worth announcing
                r.fired.push_back(EdgeKind::Start);
            }
            return r;
        case EdgeKind::Complete:
            return complete(t, std::move(r));
        case EdgeKind::Failure:
            return fail(t, "device_reported");
    }
    return r;
}

ActionTracker::Result ActionTracker::on_poll_result(double t, const Observation& obs) {
    if (terminal() || phase_ == LifecyclePhase::AckWait || phase_ == LifecyclePhase::Idle)
        return {};
    ++polls_;
    pending_poll_.reset();
    Result r;

    if (obs.completed) return complete(t, std::move(r));

    if (phase_ == LifecyclePhase::StartDetection && obs.started) {
        start_time_ = t;
        r.fired.push_back(EdgeKind::Start);
        enter_phase(LifecyclePhase::CompleteDetection, t);
        if (obs.progress >= 0) last_progress_ = obs.progress;
        arm_next_poll(t, r, -1.0, false);
        return r;
    }

    // With no separate start phase, the first sighting of a running action
    // still announces Start so co-actions keyed on it are not held back until
    // completion. The completion plan stays anchored where it was.
    if (phase_ == LifecyclePhase::CompleteDetection && !start_time_ && obs.started) {
        start_time_ = t;
        r.fired.push_back(EdgeKind::Start);
    }

    double p = -1.0;
    bool grew = false;
    if (phase_ == LifecyclePhase::CompleteDetection && obs.progress >= 0) {
        p = obs.progress;
        grew = p > 0 && p > last_progress_ + 1e-12;
        last_progress_ = std::max(last_progress_, p);
    }

    const PhasePlan& plan = active_plan();
    double elapsed = t - phase_start_;
    if (phase_ == LifecyclePhase::CompleteDetection && !late_signalled_ &&
        elapsed >= 0.95 * plan.upper) {
        late_signalled_ = true;
        r.late_signal = true;
    }

    if (t >= fail_at_ - kTimeEps && !grew)
        return fail(t, phase_ == LifecyclePhase::StartDetection ? "no_start" : "no_complete");

    arm_next_poll(t, r, p, grew);
    return r;
}

void ActionTracker::arm_next_poll(double t, Result& r, double progress_now, bool progress_grew) {
    const PhasePlan& plan = active_plan();
    double next;
    while (plan_idx_ < plan.offsets.size() &&
           phase_start_ + plan.offsets[plan_idx_] <= t + kTimeEps)
        ++plan_idx_;   // a late phase entry can make early offsets already stale
    if (plan_idx_ < plan.offsets.size()) {
        next = phase_start_ + plan.offsets[plan_idx_++];
    } else if (progress_grew && progress_now > 0) {
        // Remaining time scales with the unfinished fraction; cover it but
        // never let one estimate be the last word on the deadline.
        double est = (t - phase_start_) * (1.0 - progress_now) / progress_now;
        est = std::max(est, kMinBackoffGap);
        fail_at_ = std::max(fail_at_, t + est);
        backoff_gap_ = base_backoff(plan);
        next = std::min(t + std::min(est, plan.qw), fail_at_);
    } else {
        double gap = std::max(backoff_gap_, kMinBackoffGap);
        backoff_gap_ = std::min(backoff_gap_ * 2.0, plan.qw);
        next = std::min(t + gap, fail_at_);
    }
    if (next <= t + kTimeEps) next = fail_at_;
    pending_poll_ = next;
    r.next_poll = next;
}

ActionTracker::Result ActionTracker::complete(double t, Result r) {
    if (!start_time_) {   // start was never separately observed
        start_time_ = t;
        r.fired.push_back(EdgeKind::Start);
    }
    complete_time_ = t;
    r.fired.push_back(EdgeKind::Complete);
    phase_ = LifecyclePhase::Completed;
    pending_poll_.reset();
    return r;
}

ActionTracker::Result ActionTracker::fail(double t, const std::string& reason) {
    fail_time_ = t;
    failure_reason_ = reason;
    phase_ = LifecyclePhase::Failed;
    pending_poll_.reset();
    Result r;
    r.fired.push_back(EdgeKind::Failure);
    return r;
}

std::optional<double> ActionTracker::detection_time(EdgeKind event) const {
    switch (event) {
        case EdgeKind::Ack: return ack_time_;
        case EdgeKind::Start: return start_time_;
        case EdgeKind::Complete: return complete_time_;
        case EdgeKind::Failure: return fail_time_;
    }
    return std::nullopt;
}

}  // namespace rasc
