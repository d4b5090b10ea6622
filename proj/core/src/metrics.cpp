#include "rasc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rasc/errors.hpp"

namespace rasc {

namespace {

std::string dump_double(double v) { return nlohmann::json(v).dump(); }

std::string key_of(const nlohmann::json& d) {
    return d.at("routine").get<std::string>() + "/" + d.at("action").get<std::string>();
}

}  // namespace

std::string TraceEvent::to_line() const {
    nlohmann::json j;
    j["t"] = t;
    j["type"] = type;
    j["data"] = data.is_null() ? nlohmann::json::object() : data;
    return j.dump();
}

TraceEvent TraceEvent::from_line(const std::string& line) {
    try {
        nlohmann::json j = nlohmann::json::parse(line);
        return {j.at("t").get<double>(), j.at("type").get<std::string>(),
                j.value("data", nlohmann::json::object())};
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad trace line: ") + e.what());
    }
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
    std::string out;
    for (const auto& e : trace) {
        out += e.to_line();
        out += '\n';
    }
    return out;
}

std::vector<TraceEvent> trace_from_jsonl(const std::string& text) {
    std::vector<TraceEvent> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(TraceEvent::from_line(line));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::uint64_t trace_hash(const std::vector<TraceEvent>& trace) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : trace)
        for (unsigned char c : e.to_line()) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    return h;
}

MetricSummary summarize(std::vector<double> samples) {
    MetricSummary s;
    s.count = samples.size();
    if (samples.empty()) return s;
    double sum = 0;
    for (double v : samples) sum += v;
    s.mean = sum / samples.size();
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double p) {
        double pos = p * (samples.size() - 1);
        std::size_t lo = static_cast<std::size_t>(pos);
        double frac = pos - lo;
        if (lo + 1 >= samples.size()) return samples.back();
        return samples[lo] * (1 - frac) + samples[lo + 1] * frac;
    };
    s.q50 = quantile(0.5);
    s.q95 = quantile(0.95);
    return s;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["metrics"] = nlohmann::json::object();
    for (const auto& [name, m] : metrics)
        j["metrics"][name] = {{"count", m.count}, {"mean", m.mean}, {"q50", m.q50}, {"q95", m.q95}};
    j["counters"] = counters;
    j["absent"] = absent;
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    MetricsReport r;
    try {
        nlohmann::json j = nlohmann::json::parse(text);
        for (auto it = j.at("metrics").begin(); it != j.at("metrics").end(); ++it) {
            MetricSummary m;
            m.count = it.value().at("count").get<std::size_t>();
            m.mean = it.value().at("mean").get<double>();
            m.q50 = it.value().at("q50").get<double>();
            m.q95 = it.value().at("q95").get<double>();
            r.metrics[it.key()] = m;
        }
        for (auto it = j.at("counters").begin(); it != j.at("counters").end(); ++it)
            r.counters[it.key()] = it.value().get<double>();
        for (const auto& a : j.value("absent", nlohmann::json::array()))
            r.absent.insert(a.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad metrics JSON: ") + e.what());
    }
    return r;
}

std::string MetricsReport::to_csv() const {
    std::string out = "metric,count,mean,q50,q95\n";
    for (const auto& [name, m] : metrics) {
        if (absent.count(name)) {
            out += name + ",0,n/a,n/a,n/a\n";
            continue;
        }
        out += name + "," + std::to_string(m.count) + "," + dump_double(m.mean) + "," +
               dump_double(m.q50) + "," + dump_double(m.q95) + "\n";
    }
    out += "\ncounter,value\n";
    for (const auto& [name, v] : counters) out += name + "," + dump_double(v) + "\n";
    return out;
}

MetricsReport compute_metrics(const std::vector<TraceEvent>& trace) {
    MetricsReport rep;

    std::map<std::string, double> arrivals;             // routine -> t
    std::map<std::string, double> routine_done;         // routine -> last milestone t
    std::map<std::string, int> polls_by_action;         // key -> count
    std::set<std::string> dispatched, completed, failed;
    std::vector<double> wait, lags;
    std::map<std::string, double> phys_start;           // key -> t
    std::map<std::string, std::vector<std::pair<double, double>>> busy;  // device -> spans
    double first_arrival = 0, last_completion = 0;
    bool any_arrival = false, any_completion = false;
    double fp = 0, reschedules = 0, moves = 0, late = 0, rejected = 0;

    for (const auto& e : trace) {
        if (e.type == "arrival") {
            std::string r = e.data.at("routine").get<std::string>();
            arrivals[r] = e.t;
            if (!any_arrival || e.t < first_arrival) first_arrival = e.t;
            any_arrival = true;
        } else if (e.type == "dispatch") {
            dispatched.insert(key_of(e.data));
            wait.push_back(e.t - e.data.at("eligible").get<double>());
        } else if (e.type == "poll") {
            polls_by_action[key_of(e.data)]++;
        } else if (e.type == "phys_start") {
            phys_start[key_of(e.data)] = e.t;
        } else if (e.type == "phys_complete") {
            auto it = phys_start.find(key_of(e.data));
            if (it != phys_start.end())
                busy[e.data.at("device").get<std::string>()].push_back({it->second, e.t});
        } else if (e.type == "detect" || e.type == "assume") {
            std::string kind = e.data.at("kind").get<std::string>();
            std::string r = e.data.at("routine").get<std::string>();
            routine_done[r] = std::max(routine_done[r], e.t);
            if (kind == "complete") {
                completed.insert(key_of(e.data));
                if (!any_completion || e.t > last_completion) last_completion = e.t;
                any_completion = true;
                if (e.data.contains("lag")) lags.push_back(e.data.at("lag").get<double>());
            }
        } else if (e.type == "failure") {
            std::string r = e.data.at("routine").get<std::string>();
            routine_done[r] = std::max(routine_done[r], e.t);
            failed.insert(key_of(e.data));
            if (e.data.value("fp", false)) fp += 1;
        } else if (e.type == "reject") {
            rejected += 1;
        } else if (e.type == "late_risk") {
            late += 1;
        } else if (e.type == "reschedule") {
            reschedules += 1;
            moves += e.data.value("moved", 0.0);
        }
    }

    std::vector<double> polls;
    for (const auto& k : dispatched) {
        auto it = polls_by_action.find(k);
        polls.push_back(it == polls_by_action.end() ? 0.0 : it->second);
    }

    std::vector<double> latency;
    for (const auto& [r, done] : routine_done) {
        auto it = arrivals.find(r);
        if (it != arrivals.end()) latency.push_back(done - it->second);
    }

    std::vector<double> idle;
    for (auto& [dev, spans] : busy) {
        std::sort(spans.begin(), spans.end());
        double total = 0;
        for (const auto& [a, b] : spans) total += b - a;
        idle.push_back(std::max(0.0, (spans.back().second - spans.front().first) - total));
    }

    // time-average concurrency over the moments when anything runs at all
    std::vector<std::pair<double, int>> edges;
    for (const auto& [dev, spans] : busy)
        for (const auto& [a, b] : spans) {
            edges.push_back({a, +1});
            edges.push_back({b, -1});
        }
    std::sort(edges.begin(), edges.end());
    double busy_time = 0, busy_area = 0;
    int depth = 0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (i > 0 && depth > 0) {
            double dt = edges[i].first - edges[i - 1].first;
            busy_time += dt;
            busy_area += dt * depth;
        }
        depth += edges[i].second;
    }

    rep.metrics["detection_lag"] = summarize(lags);
    rep.metrics["polls_per_action"] = summarize(polls);
    rep.metrics["wait_time"] = summarize(wait);
    rep.metrics["idle_time"] = summarize(idle);
    rep.metrics["latency"] = summarize(latency);
    rep.metrics["schedule_length"] =
        summarize(any_completion ? std::vector<double>{last_completion - first_arrival}
                                 : std::vector<double>{});
    rep.metrics["parallelism"] =
        summarize(busy_time > 0 ? std::vector<double>{busy_area / busy_time}
                                : std::vector<double>{});

    rep.counters["actions_dispatched"] = dispatched.size();
    rep.counters["actions_completed"] = completed.size();
    rep.counters["actions_failed"] = failed.size();
    rep.counters["false_positives"] = fp;
    rep.counters["rejects"] = rejected;
    rep.counters["late_signals"] = late;
    rep.counters["reschedules"] = reschedules;
    rep.counters["slot_moves"] = moves;
    double total_polls = 0;
    for (const auto& [k, n] : polls_by_action) total_polls += n;
    rep.counters["polls_total"] = total_polls;

    // a run that dispatched work but never measured a detection had no way to
    // observe one (assumed-state operation), which is different from zero lag
    if (!dispatched.empty() && rep.metrics["detection_lag"].count == 0)
        rep.absent.insert("detection_lag");

    return rep;
}

}  // namespace rasc
