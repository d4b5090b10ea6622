#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rasc/empirical_distribution.hpp"
#include "rasc/metrics.hpp"
#include "rasc/workload.hpp"

namespace rasc {

// How the controller decides when an action may be sent to its device.
//
// The planned policies reserve timeline slots per device at routine arrival
// and dispatch when a slot opens; they differ in how they repair the plan
// after a timing deviation (shortest-first resequencing vs keeping the
// committed relative order). The other three are baselines: strict serial
// execution in arrival order, a per-device arrival barrier, and a greedy
// dispatcher that sends every ready action immediately unless a routine it
// already follows on some device still has work pending there.
enum class SchedulerPolicy { PlannedStf, PlannedRigid, Fcfs, FcfsDevice, Greedy };

// How the controller learns that a dispatched action started or finished on a
// device that must be asked (pull mode). Adaptive places polls where the
// learned duration density says completions are likely; Periodic asks on a
// fixed cadence of one acceptable-wait interval; None never asks and simply
// assumes the learned mean elapsed. Self-reporting (push) devices notify on
// their own and ignore this setting.
enum class PollingPolicy { Adaptive, Periodic, None };

const char* to_string(SchedulerPolicy p);
const char* to_string(PollingPolicy p);
SchedulerPolicy scheduler_policy_from_string(const std::string& s);
PollingPolicy polling_policy_from_string(const std::string& s);

// Mid-run fault injection: the target action's physical progress freezes once
// it reaches `at_fraction` of the duration and resumes after `duration`
// seconds, pushing its real completion out by exactly that much. A fraction
// of 1 or more can never be reached before the action finishes, so it is a
// no-op that leaves a warning in the trace; a zero duration changes nothing.
struct Interruption {
    std::string routine_id;
    std::string action_id;
    double at_fraction = 0.5;
    double duration = 0.0;
};

struct PolicyConfig {
    SchedulerPolicy scheduler = SchedulerPolicy::PlannedStf;
    PollingPolicy polling = PollingPolicy::Adaptive;
    double slo = 0.9;                        // detection coverage target for poll plans
    std::map<std::string, double> qw_by_class;  // acceptable wait overrides per device class
    double network_delay = 0.0;              // one-way controller/device latency, seconds
    double reactive_threshold = 1.0;         // completion offset that triggers replanning
    double perturbation = 0.0;               // relative ground-truth duration noise, 0..1
};

struct SimConfig {
    PolicyConfig policy;
    std::vector<Interruption> interruptions;

    // Controller knowledge: one fitted duration model per (device class,
    // action) pair, keyed with the class name in the device field. Must cover
    // every pair the workload uses; poll plans, slot length estimates and
    // assumed completions all read from it.
    std::map<TransitionKey, EmpiricalDistribution> learned;

    // Ground truth overrides, same nesting as builtin_laws(). Pairs absent
    // here fall back to the builtin catalog.
    std::map<std::string, std::map<std::string, DurationLaw>> truth_laws;

    std::uint64_t seed = 1;
};

struct SimOutcome {
    std::vector<TraceEvent> trace;
    MetricsReport metrics;
    std::uint64_t hash = 0;           // FNV over the serialized trace lines

    // No two actions ever physically overlapped on one device, and for the
    // planned policies the timetable stayed consistent through every mutation.
    bool safety_ok = true;

    // The observed per-device execution orders admit a single serial story
    // over routines; `witness` is that story (earliest arrival breaks ties)
    // and is empty when they conflict.
    bool serial_ok = true;
    std::vector<std::string> witness;

    // Device id -> "routine/action" keys in physical start order.
    std::map<std::string, std::vector<std::string>> device_sequences;
};

// Train controller models by drawing `samples_per_key` durations from each
// law and fitting the usual histogram model to them. The laws map uses the
// builtin_laws() shape; keys come out as (class, action, start_to_complete).
std::map<TransitionKey, EmpiricalDistribution> train_from_laws(
    const std::map<std::string, std::map<std::string, DurationLaw>>& laws, int samples_per_key,
    std::uint64_t seed);

// Run the workload to completion under the given policies. Single-threaded
// discrete-event loop ordered by (time, insertion); the same inputs and seed
// give a byte-identical trace. Throws ValidationError for workloads that
// reference unknown devices, duration laws or learned models.
SimOutcome run_simulation(const WorkloadSpec& workload, const std::vector<DeviceSpec>& devices,
                          const SimConfig& cfg);

}  // namespace rasc
