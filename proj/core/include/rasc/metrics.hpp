#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rasc {

// One line of a simulation trace. Serialized as JSON lines so runs can be
// diffed, hashed and replayed without touching the simulator.
struct TraceEvent {
    double t = 0.0;
    std::string type;
    nlohmann::json data;  // object payload, type-specific

    std::string to_line() const;
    static TraceEvent from_line(const std::string& line);
};

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);
std::vector<TraceEvent> trace_from_jsonl(const std::string& text);

// Stable content fingerprint (FNV-1a over the serialized lines), used by the
// determinism checks: equal traces, equal hashes, byte for byte.
std::uint64_t trace_hash(const std::vector<TraceEvent>& trace);

struct MetricSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

MetricSummary summarize(std::vector<double> samples);

// Everything a run reports. `metrics` carries distributional rows
// (detection_lag, polls_per_action, wait_time, idle_time, latency, and the
// single-sample schedule_length and parallelism); `counters` carries plain
// totals; `absent` lists rows a policy cannot produce (a run without polling
// has no detection story), so readers can tell "not measured" from zero.
struct MetricsReport {
    std::map<std::string, MetricSummary> metrics;
    std::map<std::string, double> counters;
    std::set<std::string> absent;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    std::string to_csv() const;
};

// Derives the report from a trace alone.
//
// Definitions: schedule length = last completion milestone minus first
// arrival; an action's wait = dispatch minus the moment its dependencies were
// ready; a device's idle = unused time between its first and last physical
// activity; a routine's latency = last milestone minus arrival; parallelism =
// time-averaged number of concurrently executing actions, averaged only over
// moments with at least one action running.
MetricsReport compute_metrics(const std::vector<TraceEvent>& trace);

}  // namespace rasc
