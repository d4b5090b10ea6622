#include <doctest.h>

#include <algorithm>

#include "rasc/errors.hpp"
#include "rasc/simulator.hpp"

using namespace rasc;

namespace {

using LawMap = std::map<std::string, std::map<std::string, DurationLaw>>;

DeviceSpec dev(const std::string& id, const std::string& cls, DeviceMode m = DeviceMode::Pull,
               BusyPolicy bp = BusyPolicy::Queue) {
    DeviceSpec d;
    d.id = id;
    d.device_class = cls;
    d.mode = m;
    d.busy_policy = bp;
    return d;
}

ActionSpec act(const std::string& id, const std::string& device, const std::string& kind,
               std::vector<DependencyEdge> after = {}) {
    return ActionSpec{id, device, kind, "", std::move(after)};
}

int count_type(const std::vector<TraceEvent>& trace, const std::string& type) {
    int n = 0;
    for (const auto& e : trace)
        if (e.type == type) ++n;
    return n;
}

std::vector<double> times_of(const std::vector<TraceEvent>& trace, const std::string& type) {
    std::vector<double> out;
    for (const auto& e : trace)
        if (e.type == type) out.push_back(e.t);
    return out;
}

// one push-mode device class with exact (zero variance) durations
struct GateRig {
    std::vector<DeviceSpec> devices{dev("gate1", "gate", DeviceMode::Push)};
    WorkloadSpec w;
    SimConfig cfg;

    GateRig() {
        LawMap laws{{"gate", {{"open", {2.0, 0.0}}, {"shut", {3.0, 0.0}}}}};
        w.routines.push_back(RoutineDag{
            "r1", "", {act("a1", "gate1", "open"), act("a2", "gate1", "shut", {{"a1", EdgeKind::Complete}})}});
        w.arrivals = {0.0};
        cfg.learned = train_from_laws(laws, 100, 9);
        cfg.truth_laws = laws;
    }
};

// one pull-mode door with the catalog duration law
struct DoorRig {
    std::vector<DeviceSpec> devices{dev("door1", "door")};
    WorkloadSpec w;
    SimConfig cfg;

    explicit DoorRig(int actions = 1) {
        std::vector<ActionSpec> as{act("a1", "door1", "close")};
        if (actions > 1) as.push_back(act("a2", "door1", "close", {{"a1", EdgeKind::Complete}}));
        w.routines.push_back(RoutineDag{"r1", "", as});
        w.arrivals = {0.0};
        LawMap laws{{"door", {{"close", {3.19, 0.30}}}}};
        cfg.learned = train_from_laws(laws, 500, 11);
        cfg.seed = 3;
    }
};

}  // namespace

TEST_CASE("an empty workload produces an empty run") {
    auto out = run_simulation(WorkloadSpec{}, {}, SimConfig{});
    CHECK(out.trace.empty());
    CHECK(out.metrics.counters.at("actions_dispatched") == 0);
    CHECK(out.metrics.metrics.at("latency").count == 0);
    CHECK(out.safety_ok);
    CHECK(out.serial_ok);
    CHECK(out.witness.empty());
}

TEST_CASE("a noise-free chain finishes in exactly the sum of its durations") {
    GateRig rig;
    auto out = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(out.metrics.metrics.at("latency").mean == doctest::Approx(5.0));
    CHECK(out.metrics.metrics.at("schedule_length").mean == doctest::Approx(5.0));
    CHECK(out.metrics.metrics.at("wait_time").mean == doctest::Approx(0.0));
    CHECK(out.metrics.metrics.at("detection_lag").mean == doctest::Approx(0.0));
    CHECK(out.metrics.counters.at("actions_completed") == 2);
    CHECK(out.metrics.counters.at("polls_total") == 0);
    CHECK(out.safety_ok);
    CHECK(out.serial_ok);
    CHECK(out.witness == std::vector<std::string>{"r1"});
}

TEST_CASE("identical inputs replay to the byte, a new seed gives a new world") {
    DoorRig rig;
    auto a = run_simulation(rig.w, rig.devices, rig.cfg);
    auto b = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(a.hash == b.hash);
    CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));

    SimConfig other = rig.cfg;
    other.seed = 4;
    auto c = run_simulation(rig.w, rig.devices, other);
    CHECK(c.hash != a.hash);
}

TEST_CASE("a busy device queues requests and serves them in order") {
    // the controller is open loop with an optimistic model (believes 2 s,
    // reality is 5 s), so it releases the next routine while the device is
    // still working and the device queue absorbs the difference
    LawMap believed{{"plug", {{"on", {2.0, 0.0}}}}};
    LawMap actual{{"plug", {{"on", {5.0, 0.0}}}}};
    std::vector<DeviceSpec> devices{dev("plug1", "plug")};
    WorkloadSpec w;
    for (int i = 1; i <= 3; ++i)
        w.routines.push_back(RoutineDag{"r" + std::to_string(i), "", {act("a1", "plug1", "on")}});
    w.arrivals = {0.0, 0.5, 1.0};
    SimConfig cfg;
    cfg.learned = train_from_laws(believed, 100, 2);
    cfg.truth_laws = actual;
    cfg.policy.scheduler = SchedulerPolicy::Fcfs;
    cfg.policy.polling = PollingPolicy::None;

    auto out = run_simulation(w, devices, cfg);
    auto starts = times_of(out.trace, "phys_start");
    REQUIRE(starts.size() == 3);
    CHECK(starts[0] == doctest::Approx(0.0));
    CHECK(starts[1] == doctest::Approx(5.0));
    CHECK(starts[2] == doctest::Approx(10.0));
    CHECK(out.device_sequences.at("plug1") ==
          std::vector<std::string>{"r1/a1", "r2/a1", "r3/a1"});
    CHECK(out.metrics.counters.at("actions_completed") == 3);
    CHECK(out.safety_ok);
    CHECK(out.witness == std::vector<std::string>{"r1", "r2", "r3"});
}

TEST_CASE("open-loop runs mark detection lag absent instead of zero") {
    DoorRig rig;
    rig.cfg.policy.polling = PollingPolicy::None;
    auto out = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(out.metrics.absent.count("detection_lag") == 1);
    CHECK(out.metrics.counters.at("polls_total") == 0);
    CHECK(count_type(out.trace, "assume") == 2);  // start and complete
    CHECK(out.metrics.counters.at("actions_completed") == 1);
}

TEST_CASE("a zero-length interruption changes nothing") {
    DoorRig rig;
    auto base = run_simulation(rig.w, rig.devices, rig.cfg);
    SimConfig faulted = rig.cfg;
    faulted.interruptions.push_back({"r1", "a1", 0.5, 0.0});
    auto out = run_simulation(rig.w, rig.devices, faulted);
    CHECK(out.hash == base.hash);
}

TEST_CASE("an interruption point past completion only leaves a warning") {
    DoorRig rig;
    auto base = run_simulation(rig.w, rig.devices, rig.cfg);
    SimConfig faulted = rig.cfg;
    faulted.interruptions.push_back({"r1", "a1", 1.5, 2.0});
    auto out = run_simulation(rig.w, rig.devices, faulted);
    CHECK(count_type(out.trace, "warn") == 1);
    CHECK(times_of(out.trace, "phys_complete") == times_of(base.trace, "phys_complete"));
    CHECK(out.metrics.metrics.at("latency").mean ==
          doctest::Approx(base.metrics.metrics.at("latency").mean));
}

TEST_CASE("a mid-flight stall is flagged as late and replanned") {
    DoorRig rig(2);
    rig.cfg.truth_laws = LawMap{{"door", {{"close", {3.2, 0.0}}}}};
    rig.cfg.interruptions.push_back({"r1", "a1", 0.5, 1.2});
    auto out = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(out.metrics.counters.at("late_signals") >= 1);
    CHECK(out.metrics.counters.at("reschedules") >= 1);
    CHECK(out.metrics.counters.at("slot_moves") >= 1);
    CHECK(out.metrics.counters.at("actions_completed") == 2);
    CHECK(out.metrics.counters.at("false_positives") == 0);
    CHECK(out.safety_ok);
}

TEST_CASE("a long freeze past the window draws a false failure verdict") {
    DoorRig rig(2);
    rig.cfg.truth_laws = LawMap{{"door", {{"close", {3.0, 0.0}}}}};
    rig.cfg.interruptions.push_back({"r1", "a1", 0.9, 10.0});
    auto out = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(out.metrics.counters.at("actions_failed") == 1);
    CHECK(out.metrics.counters.at("false_positives") == 1);
    CHECK(out.metrics.counters.at("actions_completed") == 0);
    CHECK(out.metrics.counters.at("actions_dispatched") == 1);  // a2 never runs
    CHECK(count_type(out.trace, "cancel") == 1);
    // the verdict lands one acceptable-wait past the detection window
    CHECK(out.metrics.metrics.at("latency").mean > 5.0);
    CHECK(out.metrics.metrics.at("latency").mean < 7.0);
    // the device still physically finishes much later
    CHECK(times_of(out.trace, "phys_complete").at(0) == doctest::Approx(13.0));
    CHECK(out.safety_ok);
}

TEST_CASE("planned polls beat the fixed cadence on the same run") {
    DoorRig rig;
    auto adaptive = run_simulation(rig.w, rig.devices, rig.cfg);
    SimConfig per = rig.cfg;
    per.policy.polling = PollingPolicy::Periodic;
    auto periodic = run_simulation(rig.w, rig.devices, per);
    CHECK(adaptive.metrics.counters.at("polls_total") <
          periodic.metrics.counters.at("polls_total"));
    CHECK(adaptive.metrics.counters.at("actions_completed") == 1);
    CHECK(periodic.metrics.counters.at("actions_completed") == 1);
}

TEST_CASE("self-reporting devices detect with exactly the network delay") {
    GateRig rig;
    rig.w.routines[0].actions.resize(1);  // just the 2 s open
    rig.cfg.policy.network_delay = 0.25;
    auto out = run_simulation(rig.w, rig.devices, rig.cfg);
    CHECK(out.metrics.metrics.at("detection_lag").mean == doctest::Approx(0.25));
    CHECK(out.metrics.metrics.at("latency").mean == doctest::Approx(2.5));
}

TEST_CASE("replaying the witness order serially reproduces the device stories") {
    std::vector<DeviceSpec> devices{dev("door1", "door"), dev("light1", "light")};
    WorkloadSpec w;
    w.routines.push_back(RoutineDag{
        "r1", "",
        {act("a1", "door1", "close"), act("a2", "light1", "on", {{"a1", EdgeKind::Complete}})}});
    w.routines.push_back(RoutineDag{
        "r2", "",
        {act("b1", "light1", "on"), act("b2", "door1", "close", {{"b1", EdgeKind::Complete}})}});
    w.arrivals = {0.0, 0.2};
    LawMap laws{{"door", {{"close", {3.19, 0.30}}}}, {"light", {{"on", {1.20, 0.15}}}}};
    SimConfig cfg;
    cfg.learned = train_from_laws(laws, 500, 7);
    cfg.seed = 5;

    auto out = run_simulation(w, devices, cfg);
    REQUIRE(out.serial_ok);
    REQUIRE(out.witness.size() == 2);
    CHECK(out.metrics.counters.at("actions_completed") == 4);

    WorkloadSpec serial = w;
    for (std::size_t i = 0; i < serial.routines.size(); ++i) {
        auto it = std::find(out.witness.begin(), out.witness.end(), serial.routines[i].id);
        serial.arrivals[i] = 0.001 * static_cast<double>(it - out.witness.begin());
    }
    SimConfig scfg = cfg;
    scfg.policy.scheduler = SchedulerPolicy::Fcfs;
    auto sout = run_simulation(serial, devices, scfg);
    CHECK(sout.device_sequences == out.device_sequences);
    CHECK(sout.metrics.counters.at("actions_completed") == 4);
}

TEST_CASE("misconfigured runs are rejected up front") {
    DoorRig rig;

    SUBCASE("unknown device") {
        rig.w.routines[0].actions[0].device = "ghost";
        CHECK_THROWS_AS(run_simulation(rig.w, rig.devices, rig.cfg), ValidationError);
    }
    SUBCASE("no learned model for the pair") {
        rig.cfg.learned.clear();
        CHECK_THROWS_AS(run_simulation(rig.w, rig.devices, rig.cfg), ValidationError);
    }
    SUBCASE("interruption aimed at nothing") {
        rig.cfg.interruptions.push_back({"r1", "nope", 0.5, 1.0});
        CHECK_THROWS_AS(run_simulation(rig.w, rig.devices, rig.cfg), ValidationError);
    }
    SUBCASE("two interruptions on one action") {
        rig.cfg.interruptions.push_back({"r1", "a1", 0.5, 1.0});
        rig.cfg.interruptions.push_back({"r1", "a1", 0.8, 1.0});
        CHECK_THROWS_AS(run_simulation(rig.w, rig.devices, rig.cfg), ValidationError);
    }
    SUBCASE("arrival count mismatch") {
        rig.w.arrivals.push_back(9.0);
        CHECK_THROWS_AS(run_simulation(rig.w, rig.devices, rig.cfg), ValidationError);
    }
}
