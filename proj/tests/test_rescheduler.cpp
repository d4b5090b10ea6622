#include <doctest.h>

#include "rasc/errors.hpp"
#include "rasc/rescheduler.hpp"
#include "rasc/timeline_scheduler.hpp"

using namespace rasc;

namespace {

// Chain of actions (each after the previous one's completion), one per listed
// device. Slot geometry comes from the estimate passed to schedule_routine.
RoutineDag chain(const std::string& id, const std::vector<std::string>& devices) {
    RoutineDag dag;
    dag.id = id;
    std::string prev;
    for (size_t i = 0; i < devices.size(); ++i) {
        ActionSpec a;
        a.id = "a" + std::to_string(i + 1);
        a.device = devices[i];
        a.action = "act";
        if (!prev.empty()) a.after.push_back({prev, EdgeKind::Complete});
        prev = a.id;
        dag.actions.push_back(std::move(a));
    }
    return dag;
}

ActionEstimate ten_second(const ActionSpec&) { return {2.0, 8.0}; }

const ScheduledAction& slot(const Timetable& t, const std::string& r, const std::string& a) {
    const ScheduledAction* s = t.find(r, a);
    REQUIRE(s != nullptr);
    return *s;
}

// Two routines sharing d1: r1 runs d1 then d2, r2 wants d1 right after.
// Layout: r1/a1 d1 [0,10], r1/a2 d2 [10,20], r2/a1 d1 [10,20].
struct SharedPair {
    Timetable table;
    std::map<std::string, RoutineDag> dags;
    SharedPair() {
        dags["r1"] = chain("r1", {"d1", "d2"});
        dags["r2"] = chain("r2", {"d1"});
        schedule_routine(table, dags["r1"], 0.0, ten_second);
        schedule_routine(table, dags["r2"], 0.0, ten_second);
    }
};

}  // namespace

TEST_CASE("pessimistic lateness covers the whole detection window") {
    CHECK(pessimistic_late_dt(10.0, 2.0, 8.0) == doctest::Approx(4.0));
    CHECK(pessimistic_late_dt(30.0, 5.0, 20.0) == doctest::Approx(15.0));
}

TEST_CASE("a late action pushes dependents and queued work, never pulls them earlier") {
    SharedPair w;
    CHECK(w.table.makespan() == doctest::Approx(20.0));

    Deviation dev{"r1", "a1", 5.0, 9.0, false};
    auto out = reschedule_rv(w.table, w.dags, dev, {"r1/a1"}, 9.0);

    CHECK(slot(w.table, "r1", "a1").end == doctest::Approx(15.0));  // stretched in place
    CHECK(slot(w.table, "r1", "a2").start == doctest::Approx(15.0));
    CHECK(slot(w.table, "r2", "a1").start == doctest::Approx(15.0));
    CHECK(out.touched == 2);
    CHECK(out.moves.size() == 2);
    for (const auto& m : out.moves) CHECK(m.new_start >= m.old_start);  // late never reclaims past
    CHECK(out.makespan_before == doctest::Approx(20.0));
    CHECK(out.makespan_after == doctest::Approx(25.0));
    CHECK(out.serializable_after);
    CHECK(verify_safety(w.table, w.dags));
}

TEST_CASE("an early completion hands freed time to everyone waiting") {
    SharedPair w;
    Deviation dev{"r1", "a1", -3.0, 7.0, false};
    auto out = reschedule_rv(w.table, w.dags, dev, {"r1/a1"}, 7.0);

    CHECK(slot(w.table, "r1", "a1").end == doctest::Approx(7.0));
    CHECK(slot(w.table, "r1", "a2").start == doctest::Approx(7.0));
    CHECK(slot(w.table, "r2", "a1").start == doctest::Approx(7.0));  // different device, reclaims too
    CHECK(out.makespan_after == doctest::Approx(17.0));
    CHECK(out.serializable_after);
    CHECK(verify_safety(w.table, w.dags));
}

TEST_CASE("impact stops at dispatched and already-running slots") {
    SharedPair w;
    Deviation dev{"r1", "a1", 5.0, 9.0, false};

    SUBCASE("downstream slot is movable") {
        auto imp = impacted_set(w.table, w.dags, dev, {"r1/a1"}, 9.0);
        CHECK(imp.keys.count("r1/a2") == 1);
        CHECK(imp.keys.count("r2/a1") == 1);
        CHECK(imp.devices == std::set<std::string>{"d1", "d2"});
        CHECK(imp.frozen_order == std::vector<std::string>{"r1", "r2"});
    }
    SUBCASE("a dispatched downstream slot pins itself and its device") {
        auto imp = impacted_set(w.table, w.dags, dev, {"r1/a1", "r1/a2", "r2/a1"}, 9.0);
        CHECK(imp.keys.empty());
        CHECK(imp.devices == std::set<std::string>{"d1"});
    }
}

TEST_CASE("impact spreads device by device to a fixpoint") {
    Timetable table;
    std::map<std::string, RoutineDag> dags;
    dags["r1"] = chain("r1", {"d1", "d2"});   // a1 [0,10] d1, a2 [10,20] d2
    dags["r2"] = chain("r2", {"d2", "d3"});   // a1 [20,30] d2, a2 [30,40] d3
    dags["r3"] = chain("r3", {"d3"});         // a1 [9.5,19.5] d3
    schedule_routine(table, dags["r1"], 0.0, ten_second);
    schedule_routine(table, dags["r2"], 11.0, ten_second);
    schedule_routine(table, dags["r3"], 9.5, ten_second);

    Deviation dev{"r1", "a1", 5.0, 9.0, false};
    auto imp = impacted_set(table, dags, dev, {"r1/a1"}, 9.0);

    // r1/a2 seeds d2, r2 sits on d2 so its d3 slot drags d3 in, and r3 rides d3
    CHECK(imp.keys == std::set<std::string>{"r1/a2", "r2/a1", "r2/a2", "r3/a1"});
    CHECK(imp.devices == std::set<std::string>{"d1", "d2", "d3"});
    CHECK(imp.frozen_order == std::vector<std::string>{"r1", "r3", "r2"});

    auto out = reschedule_rv(table, dags, dev, {"r1/a1"}, 9.0);
    CHECK(out.serializable_after);
    CHECK(verify_safety(table, dags));
    // r3 was already at its earliest feasible start and should not move
    for (const auto& m : out.moves) CHECK(m.routine_id != "r3");
    CHECK(slot(table, "r3", "a1").start == doctest::Approx(9.5));
    CHECK(slot(table, "r1", "a2").start == doctest::Approx(15.0));
    CHECK(slot(table, "r2", "a1").start == doctest::Approx(25.0));
    CHECK(slot(table, "r2", "a2").start == doctest::Approx(35.0));
}

TEST_CASE("shortest-first lets quick work jump a long queue, the rigid variant does not") {
    auto build = [](Timetable& table, std::map<std::string, RoutineDag>& dags) {
        dags["r0"] = chain("r0", {"d1"});
        dags["rlong"] = chain("rlong", {"d1"});
        dags["rshort"] = chain("rshort", {"d1"});
        schedule_routine(table, dags["r0"], 0.0, ten_second);                       // [0,10]
        schedule_routine(table, dags["rlong"], 0.0, ten_second);                    // [10,20]
        schedule_routine(table, dags["rshort"], 1.0,
                         [](const ActionSpec&) { return ActionEstimate{1.0, 1.0}; });  // [20,22]
    };
    Deviation dev{"r0", "a1", 5.0, 9.0, false};

    Timetable stf;
    std::map<std::string, RoutineDag> dags;
    build(stf, dags);
    auto out_stf = reschedule_stf(stf, dags, dev, {"r0/a1"}, 9.0);
    CHECK(out_stf.serializable_after);
    CHECK(slot(stf, "rshort", "a1").start == doctest::Approx(15.0));  // jumps ahead
    CHECK(slot(stf, "rlong", "a1").start == doctest::Approx(17.0));

    Timetable rv;
    std::map<std::string, RoutineDag> dags2;
    build(rv, dags2);
    auto out_rv = reschedule_rv(rv, dags2, dev, {"r0/a1"}, 9.0);
    CHECK(out_rv.serializable_after);
    CHECK(slot(rv, "rlong", "a1").start == doctest::Approx(15.0));  // keeps its place
    CHECK(slot(rv, "rshort", "a1").start == doctest::Approx(25.0));
}

TEST_CASE("nothing jumps a routine that already has history on record") {
    // r1 already ran on d2 and waits for d1; r2 is unstarted with a shorter d1
    // slot. Short work may only overtake routines that have not started yet.
    Timetable table;
    std::map<std::string, RoutineDag> dags;
    dags["r0"] = chain("r0", {"d1"});
    dags["r1"] = chain("r1", {"d2", "d1"});
    dags["r2"] = chain("r2", {"d1"});
    schedule_routine(table, dags["r0"], 0.0, ten_second);  // d1 [0,10]
    schedule_routine(table, dags["r1"], 0.0, ten_second);  // d2 [0,10], d1 [10,20]
    schedule_routine(table, dags["r2"], 2.0,
                     [](const ActionSpec&) { return ActionEstimate{1.0, 1.0}; });  // d1 [20,22]

    Deviation dev{"r0", "a1", 5.0, 9.0, false};
    auto out = reschedule_stf(table, dags, dev, {"r0/a1", "r1/a1"}, 9.0);
    CHECK(out.serializable_after);
    CHECK(slot(table, "r1", "a2").start == doctest::Approx(15.0));
    CHECK(slot(table, "r2", "a1").start == doctest::Approx(25.0));
    CHECK(verify_safety(table, dags));
}

TEST_CASE("the outcome reports its own cost and scope") {
    SharedPair w;
    Deviation dev{"r1", "a1", 5.0, 9.0, false};
    auto out = reschedule_stf(w.table, w.dags, dev, {"r1/a1"}, 9.0);
    CHECK(out.touched == 2);
    CHECK(out.compute_seconds >= 0.0);
    CHECK(out.compute_seconds < 1.0);  // desk scale, should be microseconds
    CHECK(out.makespan_after >= out.makespan_before);
}

TEST_CASE("a deviation on an unscheduled action is rejected") {
    SharedPair w;
    Deviation dev{"r9", "a1", 5.0, 9.0, false};
    CHECK_THROWS_AS(reschedule_rv(w.table, w.dags, dev, {}, 9.0), ValidationError);
}
