#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rasc/routine_dag.hpp"

namespace rasc {

// One reserved interval on a device. `lead` is the expected delay from the
// request going out (slot start) to the device physically starting, so the
// three milestones a dependent can wait on sit at known offsets: Ack at
// `start`, Start at `start + lead`, Complete at `end`.
struct ScheduledAction {
    std::string routine_id;
    std::string action_id;
    std::string device;
    double start = 0.0;
    double lead = 0.0;
    double end = 0.0;

    double milestone(EdgeKind on) const;

    friend bool operator==(const ScheduledAction&, const ScheduledAction&) = default;
};

// Expected timing for one action: lead (request to physical start) and run
// (physical start to completion). Slot length is their sum.
struct ActionEstimate {
    double lead = 0.0;
    double run = 0.0;
};
using EstimateFn = std::function<ActionEstimate(const ActionSpec&)>;

// Non-overlapping reservations on one device, kept sorted by start.
class DeviceTimeline {
public:
    // Earliest t >= ready such that [t, t+len) fits between reservations.
    double earliest_gap(double ready, double len) const;

    void reserve(const ScheduledAction& slot);
    bool release(const std::string& routine_id, const std::string& action_id);
    const std::vector<ScheduledAction>& slots() const { return slots_; }
    double last_end() const;

private:
    std::vector<ScheduledAction> slots_;
};

// The whole home's reservations plus routine arrival bookkeeping.
class Timetable {
public:
    DeviceTimeline& device(const std::string& name) { return devices_[name]; }
    const std::map<std::string, DeviceTimeline>& devices() const { return devices_; }

    void add(const ScheduledAction& slot);
    bool remove_action(const std::string& routine_id, const std::string& action_id);
    void remove_routine(const std::string& routine_id);

    std::vector<ScheduledAction> actions_of(const std::string& routine_id) const;
    const ScheduledAction* find(const std::string& routine_id, const std::string& action_id) const;
    std::vector<ScheduledAction> all() const;  // sorted by (start, routine, action)
    double makespan() const;

    void note_arrival(const std::string& routine_id, double t);
    const std::map<std::string, double>& arrivals() const { return arrivals_; }

private:
    std::map<std::string, DeviceTimeline> devices_;
    std::map<std::string, double> arrivals_;
};

// Every observed device-sharing order between two routines, plus whether those
// orders admit a single serial story. `order` is a witness serial order when
// they do (arrival time breaks ties).
struct SerializationBook {
    bool serializable = false;
    std::vector<std::string> order;
    std::vector<std::pair<std::string, std::string>> conflicts;  // first runs before second
};

SerializationBook verify_serial_equivalence(const Timetable& table);

// No device holds two slots at once. Returns false and fills `why` on the
// first collision found.
bool verify_device_exclusivity(const Timetable& table, std::string* why = nullptr);

// Device exclusivity and dependency feasibility of everything in the table.
// The full check suits freshly planned tables; a live table mixes recorded
// dispatch times with estimates, so mid-run only exclusivity is meaningful.
bool verify_safety(const Timetable& table, const std::map<std::string, RoutineDag>& dags,
                   std::string* why = nullptr);

struct PlacementOptions {
    // On a serializability conflict, shift the whole new routine past every
    // slot of the routines it collided with. The alternative retries one
    // offending action at a time, which can interleave tighter but needs more
    // rounds; it is kept selectable for comparison.
    bool whole_dag_backtrack = true;
    int max_rounds = 64;
};

struct PlacementReport {
    std::vector<ScheduledAction> placed;   // the new routine's slots, placement order
    int backtracks = 0;
    double makespan = 0.0;
};

// Places a routine's primary actions into the earliest dependency-feasible
// gaps, then repairs until the table stays conflict-serializable.
PlacementReport schedule_routine(Timetable& table, const RoutineDag& dag, double arrival,
                                 const EstimateFn& est, const PlacementOptions& opts = {});

// Places a subset of a routine's actions (typically a fallback branch that
// just became live) at the earliest gaps past `floors`. Dependency times come
// from slots already in the table, same-batch placements, or the caller's
// floors (actual event times). No serializability repair: the surrounding
// rescheduler owns ordering for reactive additions.
std::vector<ScheduledAction> place_actions(Timetable& table, const RoutineDag& dag,
                                           const std::vector<std::string>& action_ids,
                                           const std::map<std::string, double>& floors,
                                           const EstimateFn& est, double global_floor);

// Total order over routines from predecessor sets: repeatedly emit the routine
// whose remaining predecessor set is empty, earliest arrival first on ties.
std::vector<std::string> freeze_order(const std::map<std::string, std::set<std::string>>& predecessors,
                                      const std::map<std::string, double>& arrivals);

}  // namespace rasc
