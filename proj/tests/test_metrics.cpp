#include <doctest.h>

#include "rasc/errors.hpp"
#include "rasc/metrics.hpp"

using namespace rasc;

namespace {

TraceEvent ev(double t, const std::string& type, nlohmann::json data) {
    return {t, type, std::move(data)};
}

nlohmann::json act(const std::string& r, const std::string& a) {
    return {{"routine", r}, {"action", a}};
}

nlohmann::json act(const std::string& r, const std::string& a, const std::string& dev) {
    return {{"routine", r}, {"action", a}, {"device", dev}};
}

// One routine, two back-to-back actions on one device, lengths 2 and 3.
std::vector<TraceEvent> serial_trace() {
    std::vector<TraceEvent> t;
    auto d = [&](double at, nlohmann::json data, double eligible) {
        data["eligible"] = eligible;
        data["device"] = "lamp";
        t.push_back(ev(at, "dispatch", data));
    };
    t.push_back(ev(0.0, "arrival", {{"routine", "r1"}}));
    d(0.0, act("r1", "a1"), 0.0);
    t.push_back(ev(0.0, "phys_start", act("r1", "a1", "lamp")));
    t.push_back(ev(2.0, "phys_complete", act("r1", "a1", "lamp")));
    auto detect1 = act("r1", "a1");
    detect1["kind"] = "complete";
    detect1["lag"] = 0.0;
    t.push_back(ev(2.0, "detect", detect1));
    d(2.0, act("r1", "a2"), 2.0);
    t.push_back(ev(2.0, "phys_start", act("r1", "a2", "lamp")));
    t.push_back(ev(5.0, "phys_complete", act("r1", "a2", "lamp")));
    auto detect2 = act("r1", "a2");
    detect2["kind"] = "complete";
    detect2["lag"] = 0.0;
    t.push_back(ev(5.0, "detect", detect2));
    return t;
}

}  // namespace

TEST_CASE("an empty trace yields an empty report") {
    auto rep = compute_metrics({});
    CHECK(rep.metrics.at("schedule_length").count == 0);
    CHECK(rep.metrics.at("latency").count == 0);
    CHECK(rep.counters.at("actions_dispatched") == 0);
    CHECK(rep.absent.empty());
}

TEST_CASE("serial two-action run: length five, no idle, parallelism one") {
    auto rep = compute_metrics(serial_trace());
    CHECK(rep.metrics.at("schedule_length").mean == doctest::Approx(5.0));
    CHECK(rep.metrics.at("idle_time").mean == doctest::Approx(0.0));
    CHECK(rep.metrics.at("parallelism").mean == doctest::Approx(1.0));
    CHECK(rep.metrics.at("latency").mean == doctest::Approx(5.0));
    CHECK(rep.metrics.at("wait_time").mean == doctest::Approx(0.0));
    CHECK(rep.counters.at("actions_completed") == 2);
}

TEST_CASE("two concurrent equal actions on two devices count as parallelism two") {
    std::vector<TraceEvent> t;
    t.push_back(ev(0.0, "arrival", {{"routine", "r1"}}));
    t.push_back(ev(0.0, "arrival", {{"routine", "r2"}}));
    for (const std::string r : {"r1", "r2"}) {
        std::string dev = r == "r1" ? "lamp" : "heater";
        auto d = act(r, "a1", dev);
        d["eligible"] = 0.0;
        t.push_back(ev(0.0, "dispatch", d));
        t.push_back(ev(0.0, "phys_start", act(r, "a1", dev)));
        t.push_back(ev(4.0, "phys_complete", act(r, "a1", dev)));
        auto det = act(r, "a1");
        det["kind"] = "complete";
        det["lag"] = 0.5;
        t.push_back(ev(4.5, "detect", det));
    }
    auto rep = compute_metrics(t);
    CHECK(rep.metrics.at("parallelism").mean == doctest::Approx(2.0));
    CHECK(rep.metrics.at("schedule_length").mean == doctest::Approx(4.5));
    CHECK(rep.metrics.at("detection_lag").mean == doctest::Approx(0.5));
    CHECK(rep.metrics.at("idle_time").count == 2);
    CHECK(rep.metrics.at("idle_time").mean == doctest::Approx(0.0));
}

TEST_CASE("idle time measures the gap inside a device's active span") {
    std::vector<TraceEvent> t;
    t.push_back(ev(0.0, "arrival", {{"routine", "r1"}}));
    t.push_back(ev(0.0, "phys_start", act("r1", "a1", "lamp")));
    t.push_back(ev(2.0, "phys_complete", act("r1", "a1", "lamp")));
    t.push_back(ev(7.0, "phys_start", act("r1", "a2", "lamp")));
    t.push_back(ev(9.0, "phys_complete", act("r1", "a2", "lamp")));
    auto det = act("r1", "a2");
    det["kind"] = "complete";
    t.push_back(ev(9.0, "detect", det));
    auto rep = compute_metrics(t);
    CHECK(rep.metrics.at("idle_time").mean == doctest::Approx(5.0));
}

TEST_CASE("poll counts group per action, zero for unpolled ones") {
    auto t = serial_trace();
    t.push_back(ev(0.5, "poll", act("r1", "a1")));
    t.push_back(ev(1.0, "poll", act("r1", "a1")));
    t.push_back(ev(1.5, "poll", act("r1", "a1")));
    auto rep = compute_metrics(t);
    CHECK(rep.metrics.at("polls_per_action").count == 2);
    CHECK(rep.metrics.at("polls_per_action").mean == doctest::Approx(1.5));  // 3 and 0
    CHECK(rep.counters.at("polls_total") == 3);
    CHECK(rep.absent.empty());
}

TEST_CASE("a trace with no detections marks the lag row absent") {
    std::vector<TraceEvent> t;
    t.push_back(ev(0.0, "arrival", {{"routine", "r1"}}));
    auto d = act("r1", "a1", "lamp");
    d["eligible"] = 0.0;
    t.push_back(ev(0.0, "dispatch", d));
    t.push_back(ev(0.0, "phys_start", act("r1", "a1", "lamp")));
    t.push_back(ev(2.0, "phys_complete", act("r1", "a1", "lamp")));
    auto a = act("r1", "a1");
    a["kind"] = "complete";
    t.push_back(ev(2.0, "assume", a));
    auto rep = compute_metrics(t);
    CHECK(rep.absent.count("detection_lag") == 1);
    CHECK(rep.metrics.at("latency").mean == doctest::Approx(2.0));
    CHECK(rep.counters.at("actions_completed") == 1);

    auto csv = rep.to_csv();
    CHECK(csv.find("detection_lag,0,n/a,n/a,n/a") != std::string::npos);
}

TEST_CASE("failures, false positives and reschedules land in counters") {
    auto t = serial_trace();
    auto f = act("r1", "a3");
    f["reason"] = "no_complete";
    f["fp"] = true;
    t.push_back(ev(6.0, "failure", f));
    t.push_back(ev(6.0, "reschedule", {{"moved", 3.0}, {"touched", 4}}));
    t.push_back(ev(7.0, "late_risk", act("r1", "a2")));
    auto rep = compute_metrics(t);
    CHECK(rep.counters.at("actions_failed") == 1);
    CHECK(rep.counters.at("false_positives") == 1);
    CHECK(rep.counters.at("reschedules") == 1);
    CHECK(rep.counters.at("slot_moves") == 3);
    CHECK(rep.counters.at("late_signals") == 1);
    // the failure pushes the routine's finish time
    CHECK(rep.metrics.at("latency").mean == doctest::Approx(6.0));
}

TEST_CASE("summaries report interpolated quantiles") {
    auto s = summarize({4, 1, 3, 2, 5});
    CHECK(s.count == 5);
    CHECK(s.mean == doctest::Approx(3.0));
    CHECK(s.q50 == doctest::Approx(3.0));
    CHECK(s.q95 == doctest::Approx(4.8));

    auto one = summarize({7});
    CHECK(one.q50 == 7.0);
    CHECK(one.q95 == 7.0);

    CHECK(summarize({}).count == 0);
}

TEST_CASE("trace serialization round trips and hashes stably") {
    auto t = serial_trace();
    auto text = trace_to_jsonl(t);
    auto back = trace_from_jsonl(text);
    REQUIRE(back.size() == t.size());
    CHECK(trace_to_jsonl(back) == text);
    CHECK(trace_hash(back) == trace_hash(t));

    auto t2 = serial_trace();
    t2[0].t = 0.25;
    CHECK(trace_hash(t2) != trace_hash(t));

    CHECK_THROWS_AS(trace_from_jsonl("{broken\n"), ValidationError);
}

TEST_CASE("report serialization round trips") {
    auto rep = compute_metrics(serial_trace());
    auto back = MetricsReport::from_json(rep.to_json());
    CHECK(back.to_json() == rep.to_json());
    CHECK(back.metrics.at("schedule_length").mean == doctest::Approx(5.0));
    CHECK_THROWS_AS(MetricsReport::from_json("[]"), ValidationError);
}
