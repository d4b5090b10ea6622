#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rasc/routine_dag.hpp"

namespace rasc {

enum class LifecyclePhase {
    Idle,               // created, request not sent yet
    AckWait,
    StartDetection,
    CompleteDetection,
    Completed,
    Failed,
};

const char* to_string(LifecyclePhase p);

// What a status poll of the device returned.
struct Observation {
    bool started = false;
    bool completed = false;
    double progress = -1.0;   // fraction done, negative when the device has no gauge
};

// Poll offsets for one detection phase, relative to the phase anchor.
struct PhasePlan {
    std::vector<double> offsets;  // strictly increasing, last lands at `upper`
    double upper = 0.0;           // end of the in-plan window
    double qw = 0.0;              // acceptable-wait bound for this action
};

// Drives one action through request, ack, start detection and complete
// detection. The tracker is a pure state machine over absolute timestamps: the
// host sends it RPC replies, poll results and deadline wakeups, and it answers
// with which milestones fired and when it wants the next poll. It never talks
// to a clock or a device itself, which keeps replays exact.
//
// Start and complete phases each follow their PhasePlan. When a phase outlives
// its plan the tracker keeps polling on a doubling backoff (capped at qw) and
// declares failure once the deadline passes. A reported progress increase
// re-estimates the remaining time, pushes the deadline out to cover it, and
// resets the backoff; frozen progress never extends the deadline, so a stalled
// device is still declared failed at most qw past the window.
class ActionTracker {
public:
    struct Result {
        std::vector<EdgeKind> fired;        // milestones that fired during this call
        std::optional<double> next_poll;    // absolute time of the next wanted poll
        bool late_signal = false;           // completion now at risk of running late
    };

    // `start_plan` may be empty for actions whose start is not separately
    // observable; those jump from ack straight to complete detection and fire
    // Start together with Complete.
    ActionTracker(std::optional<PhasePlan> start_plan, PhasePlan complete_plan);

    Result on_request_sent(double t);           // enters AckWait
    Result on_ack(double t);
    Result on_ack_deadline(double t);           // fires only if still waiting
    Result on_poll_result(double t, const Observation& obs);
    Result on_push(double t, EdgeKind event);   // self-reporting devices
    Result on_rejected(double t);               // device refused the request

    LifecyclePhase phase() const { return phase_; }
    bool terminal() const { return phase_ == LifecyclePhase::Completed || phase_ == LifecyclePhase::Failed; }
    const std::string& failure_reason() const { return failure_reason_; }

    int polls_issued() const { return polls_; }
    double ack_deadline() const { return ack_deadline_; }
    std::optional<double> pending_poll() const { return pending_poll_; }

    std::optional<double> detection_time(EdgeKind event) const;
    std::optional<double> request_time() const { return request_time_; }

private:
    std::optional<PhasePlan> start_plan_;
    PhasePlan complete_plan_;

    LifecyclePhase phase_ = LifecyclePhase::Idle;
    std::string failure_reason_;
    int polls_ = 0;

    std::optional<double> request_time_;
    std::optional<double> ack_time_, start_time_, complete_time_, fail_time_;
    double ack_deadline_ = 0.0;
    std::optional<double> pending_poll_;

    // per detection phase bookkeeping
    double phase_start_ = 0.0;
    size_t plan_idx_ = 0;
    double fail_at_ = 0.0;
    double backoff_gap_ = 0.0;
    double last_progress_ = -1.0;
    bool late_signalled_ = false;

    const PhasePlan& active_plan() const;
    void enter_phase(LifecyclePhase p, double t);
    Result fail(double t, const std::string& reason);
    Result complete(double t, Result r);
    void arm_next_poll(double t, Result& r, double progress_now, bool progress_grew);
};

}  // namespace rasc
