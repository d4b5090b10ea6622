#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rasc/timeline_scheduler.hpp"

namespace rasc {

// One established timing deviation on a scheduled action. dt > 0 means the
// action will run that much longer than its slot; dt < 0 means it completed
// early, at detected_at. Proactive deviations come from the late-risk signal
// before any failure verdict; reactive ones from a measured completion.
struct Deviation {
    std::string routine_id;
    std::string action_id;
    double dt = 0.0;
    double detected_at = 0.0;
    bool proactive = false;
};

// Pessimistic lateness once an action blows past its detection window: assume
// completion will only be detected at the failure deadline, upper + qw past
// the phase start, rather than at the slot length the plan assumed.
inline double pessimistic_late_dt(double upper, double qw, double scheduled_len) {
    return upper + qw - scheduled_len;
}

// Everything a deviation can move. Impact spreads by routine: the deviating
// routine's downstream actions seed the affected device set, any routine with
// a movable slot on an affected device joins, and its other devices become
// affected in turn, to a fixpoint. Slots already dispatched never move.
struct ImpactedSet {
    std::set<std::string> keys;           // "routine/action" of movable impacted slots
    std::set<std::string> devices;        // affected devices (the fixpoint D*)
    std::vector<std::string> frozen_order;  // serial order impacted routines must keep
};

ImpactedSet impacted_set(const Timetable& table, const std::map<std::string, RoutineDag>& dags,
                         const Deviation& dev, const std::set<std::string>& dispatched,
                         double now);

struct SlotMove {
    std::string routine_id;
    std::string action_id;
    std::string device;
    double old_start = 0.0;
    double new_start = 0.0;
};

struct RescheduleOutcome {
    std::vector<SlotMove> moves;    // slots whose start actually changed
    int touched = 0;                // slots considered (the impacted set size)
    double makespan_before = 0.0;
    double makespan_after = 0.0;
    double compute_seconds = 0.0;
    bool serializable_after = true;
};

// Re-places the impacted slots from scratch, repeatedly committing the ready
// action with the earliest feasible start (shorter slot on ties). Routines
// that already ran something keep their committed serial positions; the rest
// re-serialize in placement order, which is where reordering wins come from.
// Placements append per device, never jumping ahead of slots committed in
// this pass. Handles both late (dt > 0) and early (dt < 0) deviations; the
// deviating slot itself only has its end moved. `dispatched` lists
// "routine/action" keys that already left the scheduler's hands.
RescheduleOutcome reschedule_stf(Timetable& table, const std::map<std::string, RoutineDag>& dags,
                                 const Deviation& dev, const std::set<std::string>& dispatched,
                                 double now);

// Rigid variant: impacted slots keep their relative order. Late deviations
// push each slot only as far as feasibility demands and reclaim slack on the
// way, but never pull a slot earlier than it was before the push. Early
// completions reclaim freed time, bounded only by dependencies and devices.
RescheduleOutcome reschedule_rv(Timetable& table, const std::map<std::string, RoutineDag>& dags,
                                const Deviation& dev, const std::set<std::string>& dispatched,
                                double now);

}  // namespace rasc
