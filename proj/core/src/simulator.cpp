#include "rasc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <queue>
#include <set>

#include "rasc/action_lifecycle.hpp"
#include "rasc/errors.hpp"
#include "rasc/poll_planner.hpp"
#include "rasc/rescheduler.hpp"
#include "rasc/timeline_scheduler.hpp"

namespace rasc {

const char* to_string(SchedulerPolicy p) {
    switch (p) {
        case SchedulerPolicy::PlannedStf: return "planned_stf";
        case SchedulerPolicy::PlannedRigid: return "planned_rigid";
        case SchedulerPolicy::Fcfs: return "fcfs";
        case SchedulerPolicy::FcfsDevice: return "fcfs_device";
        case SchedulerPolicy::Greedy: return "greedy";
    }
    return "?";
}

const char* to_string(PollingPolicy p) {
    switch (p) {
        case PollingPolicy::Adaptive: return "adaptive";
        case PollingPolicy::Periodic: return "periodic";
        case PollingPolicy::None: return "none";
    }
    return "?";
}

SchedulerPolicy scheduler_policy_from_string(const std::string& s) {
    if (s == "planned_stf") return SchedulerPolicy::PlannedStf;
    if (s == "planned_rigid") return SchedulerPolicy::PlannedRigid;
    if (s == "fcfs") return SchedulerPolicy::Fcfs;
    if (s == "fcfs_device") return SchedulerPolicy::FcfsDevice;
    if (s == "greedy") return SchedulerPolicy::Greedy;
    throw ValidationError("unknown scheduler policy '" + s + "'");
}

PollingPolicy polling_policy_from_string(const std::string& s) {
    if (s == "adaptive") return PollingPolicy::Adaptive;
    if (s == "periodic") return PollingPolicy::Periodic;
    if (s == "none") return PollingPolicy::None;
    throw ValidationError("unknown polling policy '" + s + "'");
}

std::map<TransitionKey, EmpiricalDistribution> train_from_laws(
    const std::map<std::string, std::map<std::string, DurationLaw>>& laws, int samples_per_key,
    std::uint64_t seed) {
    if (samples_per_key < 3)
        throw ValidationError("training needs at least 3 samples per key");
    std::map<TransitionKey, EmpiricalDistribution> out;
    for (const auto& [cls, actions] : laws)
        for (const auto& [act, law] : actions) {
            TransitionKey key{cls, act, Transition::StartToComplete};
            // sub-seed from the key text, so adding a key never shifts the
            // draws of the others
            std::uint64_t h = 0xcbf29ce484222325ULL;
            for (unsigned char c : key.str()) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
            Rng rng(seed ^ h);
            std::vector<double> samples(static_cast<std::size_t>(samples_per_key));
            for (auto& v : samples) v = law.sample(rng);
            out.emplace(key, EmpiricalDistribution::fit(samples));
        }
    return out;
}

namespace {

constexpr double kTick = 1e-9;

enum class EvKind {
    Arrival,
    Request,      // command reaches the device
    Ack,          // acceptance reaches the controller
    Reject,
    Poll,
    AckDeadline,
    PhysDone,     // the device physically finishes
    PushStart,    // self-report reaches the controller
    PushDone,
    Assume,       // open-loop completion belief comes due
    Timer,        // wake-up at a planned slot start, no payload
};

struct Ev {
    double t = 0.0;
    std::uint64_t seq = 0;
    EvKind kind = EvKind::Timer;
    int ri = -1;
    int ai = -1;
    std::uint64_t gen = 0;
};

struct EvAfter {
    bool operator()(const Ev& a, const Ev& b) const {
        return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
};

struct ActionRt {
    const ActionSpec* spec = nullptr;
    const DeviceSpec* dev = nullptr;
    TransitionKey tkey;
    std::string key;          // routine/action
    double qw = 5.0;
    double truth = 0.0;       // sampled physical duration

    bool has_intr = false;
    double intr_fraction = 0.0;
    double intr_duration = 0.0;

    // physical side
    bool accepted = false;
    bool phys_started = false;
    bool phys_done = false;
    double ps = 0.0, pe = 0.0;
    double freeze_at = 0.0, freeze_len = 0.0;

    // controller side
    std::unique_ptr<ActionTracker> tracker;   // pull devices under a polling policy
    bool dispatched = false;
    bool terminal = false;
    double eligible = -1.0;
    std::uint64_t poll_gen = 0;
    double plan_upper = 0.0;
};

struct RoutineRt {
    const RoutineDag* dag = nullptr;
    double arrival = 0.0;
    std::unique_ptr<FiringState> fs;
    bool arrived = false;
    int inflight = 0;   // dispatched and not yet believed terminal
};

// Single-threaded discrete-event run of one workload under one policy pair.
// All containers are ordered and every event carries an insertion sequence
// number, so identical inputs replay to the byte.
class Sim {
public:
    Sim(const WorkloadSpec& w, const std::vector<DeviceSpec>& devices, const SimConfig& cfg)
        : w_(w), cfg_(cfg) {
        planned_ = cfg.policy.scheduler == SchedulerPolicy::PlannedStf ||
                   cfg.policy.scheduler == SchedulerPolicy::PlannedRigid;
        nd_ = cfg.policy.network_delay;
        if (nd_ < 0) throw ValidationError("network delay must be nonnegative");
        if (cfg.policy.perturbation < 0 || cfg.policy.perturbation >= 1)
            throw ValidationError("perturbation must lie in [0, 1)");
        if (w.arrivals.size() != w.routines.size())
            throw ValidationError("workload has " + std::to_string(w.arrivals.size()) +
                                  " arrivals for " + std::to_string(w.routines.size()) +
                                  " routines");

        for (const auto& d : devices) {
            if (!devs_.emplace(d.id, d).second)
                throw ValidationError("duplicate device id '" + d.id + "'");
            running_[d.id] = {-1, -1};
            belief_[d.id] = {-1, -1};
        }

        laws_ = builtin_laws();
        for (const auto& [cls, m] : cfg.truth_laws)
            for (const auto& [act, law] : m) laws_[cls][act] = law;

        const int n = static_cast<int>(w.routines.size());
        for (const auto& dag : w.routines)
            if (!dags_.emplace(dag.id, dag).second)
                throw ValidationError("duplicate routine id '" + dag.id + "'");

        routines_.resize(n);
        acts_.resize(n);
        for (int i = 0; i < n; ++i) {
            const RoutineDag& dag = dags_.at(w.routines[i].id);
            auto& rt = routines_[i];
            rt.dag = &dag;
            rt.arrival = w.arrivals[i];
            rt.fs = std::make_unique<FiringState>(dag);
            acts_[i].resize(dag.actions.size());
            for (int j = 0; j < static_cast<int>(dag.actions.size()); ++j)
                init_action(i, j);
        }

        for (const auto& intr : cfg.interruptions) attach(intr);

        est_ = [this](const ActionSpec& spec) {
            const DeviceSpec& d = devs_.at(spec.device);
            TransitionKey k{d.device_class, spec.action, Transition::StartToComplete};
            return ActionEstimate{0.0, cfg_.learned.at(k).mean()};
        };
    }

    SimOutcome run() {
        for (int i = 0; i < static_cast<int>(routines_.size()); ++i)
            push(w_.arrivals[i], EvKind::Arrival, i, -1);

        while (!pq_.empty()) {
            Ev e = pq_.top();
            pq_.pop();
            switch (e.kind) {
                case EvKind::Arrival: on_arrival(e); break;
                case EvKind::Request: on_request(e); break;
                case EvKind::Ack: on_ack_reply(e); break;
                case EvKind::Reject: on_reject_reply(e); break;
                case EvKind::Poll: on_poll(e); break;
                case EvKind::AckDeadline: on_ack_deadline(e); break;
                case EvKind::PhysDone: on_phys_done(e); break;
                case EvKind::PushStart: on_push_event(e, EdgeKind::Start); break;
                case EvKind::PushDone: on_push_event(e, EdgeKind::Complete); break;
                case EvKind::Assume: on_assume(e); break;
                case EvKind::Timer: break;
            }
            pump(e.t);
        }

        SimOutcome out;
        out.safety_ok = safety_ok_ && physical_exclusive();
        build_witness(out);
        out.device_sequences = dev_keys_;
        out.metrics = compute_metrics(trace_);
        out.hash = trace_hash(trace_);
        out.trace = std::move(trace_);
        return out;
    }

private:
    const WorkloadSpec& w_;
    const SimConfig& cfg_;
    bool planned_ = false;
    double nd_ = 0.0;

    std::map<std::string, DeviceSpec> devs_;
    std::map<std::string, std::map<std::string, DurationLaw>> laws_;
    std::map<std::string, RoutineDag> dags_;
    std::vector<RoutineRt> routines_;
    std::vector<std::vector<ActionRt>> acts_;

    std::map<std::string, std::pair<int, int>> running_;   // device -> physical occupant
    std::map<std::string, std::deque<std::pair<int, int>>> queue_;
    std::map<std::string, std::pair<int, int>> belief_;    // device -> in-flight dispatch

    Timetable table_;
    EstimateFn est_;
    std::set<std::string> dispatched_keys_;
    std::map<std::string, PhasePlan> plan_cache_;

    std::map<int, int> jit_rank_;                          // greedy: first-contact order
    int jit_next_rank_ = 0;

    std::priority_queue<Ev, std::vector<Ev>, EvAfter> pq_;
    std::uint64_t seq_ = 0;
    std::vector<TraceEvent> trace_;
    bool safety_ok_ = true;

    std::map<std::string, std::vector<int>> dev_order_;    // device -> routine per phys start
    std::map<std::string, std::vector<std::string>> dev_keys_;
    std::map<std::string, std::vector<std::pair<double, double>>> spans_;

    void init_action(int i, int j) {
        const RoutineDag& dag = *routines_[i].dag;
        auto& a = acts_[i][j];
        a.spec = &dag.actions[j];
        auto di = devs_.find(a.spec->device);
        if (di == devs_.end())
            throw ValidationError("routine '" + dag.id + "' action '" + a.spec->id +
                                  "' targets unknown device '" + a.spec->device + "'");
        a.dev = &di->second;
        a.tkey = TransitionKey{a.dev->device_class, a.spec->action, Transition::StartToComplete};
        a.key = dag.id + "/" + a.spec->id;
        auto qi = cfg_.policy.qw_by_class.find(a.dev->device_class);
        a.qw = qi != cfg_.policy.qw_by_class.end() ? qi->second : default_qw(a.dev->device_class);
        if (!cfg_.learned.count(a.tkey))
            throw ValidationError("no learned duration model for " + a.tkey.str());

        const DurationLaw* law = nullptr;
        if (auto li = laws_.find(a.dev->device_class); li != laws_.end())
            if (auto lj = li->second.find(a.spec->action); lj != li->second.end())
                law = &lj->second;
        if (!law)
            throw ValidationError("no duration law for class '" + a.dev->device_class +
                                  "' action '" + a.spec->action + "'");

        // ground truth keyed by identity alone, so the same seed hands every
        // run of this workload the same physical world
        Rng rng = Rng::for_action(cfg_.seed, i, j);
        double d = law->sample(rng);
        if (cfg_.policy.perturbation > 0)
            d *= 1.0 + cfg_.policy.perturbation * (2.0 * rng.uniform() - 1.0);
        a.truth = std::max(d, 0.05);
    }

    void attach(const Interruption& intr) {
        for (auto& row : acts_)
            for (auto& a : row)
                if (a.key == intr.routine_id + "/" + intr.action_id) {
                    if (a.has_intr)
                        throw ValidationError("duplicate interruption for '" + a.key + "'");
                    if (intr.at_fraction <= 0 || intr.duration < 0)
                        throw ValidationError(
                            "interruption needs a positive fraction and nonnegative duration");
                    a.has_intr = true;
                    a.intr_fraction = intr.at_fraction;
                    a.intr_duration = intr.duration;
                    return;
                }
        throw ValidationError("interruption targets unknown action '" + intr.routine_id + "/" +
                              intr.action_id + "'");
    }

    void push(double t, EvKind k, int ri, int ai, std::uint64_t gen = 0) {
        pq_.push(Ev{t, seq_++, k, ri, ai, gen});
    }

    void emit(double t, const char* type, nlohmann::json data) {
        trace_.push_back(TraceEvent{t, type, std::move(data)});
    }

    nlohmann::json who(int ri, int ai) const {
        return {{"routine", routines_[ri].dag->id}, {"action", acts_[ri][ai].spec->id}};
    }

    // dbg temporary

    void check_table() {
        safety_ok_ = safety_ok_ && verify_device_exclusivity(table_);
    }

    void retime_slot(const std::string& rid, const std::string& aid, double ns, double ne) {
        const ScheduledAction* s = table_.find(rid, aid);
        if (!s) return;
        ScheduledAction u = *s;
        u.start = ns;
        u.end = std::max(ne, ns + kTick);
        table_.remove_action(rid, aid);
        table_.add(u);
    }

    // Slots that have not been handed to a device yet must make way for the
    // records of slots that have; walk the timeline once and push them out
    // of any occupied span, keeping the order they already had.
    void tidy_device(const std::string& device) {
        std::vector<ScheduledAction> recs, pend;
        for (const auto& s : table_.device(device).slots()) {
            if (dispatched_keys_.count(s.routine_id + "/" + s.action_id))
                recs.push_back(s);
            else
                pend.push_back(s);
        }
        std::vector<ScheduledAction> moved;
        double cursor = 0.0;
        for (ScheduledAction s : pend) {
            double len = s.end - s.start;
            double cand = std::max(s.start, cursor);
            // a record of another routine always runs first; a pending slot
            // sitting ahead of one in start order would put the table's
            // story at odds with what the device already did (slots of the
            // same routine order themselves, so those may stay put)
            for (const auto& r : recs)
                if (r.routine_id != s.routine_id)
                    cand = std::max(cand, r.start + kTick);
            bool collided = true;
            while (collided) {
                collided = false;
                for (const auto& r : recs)
                    if (cand < r.end - kTick && cand + len > r.start + kTick) {
                        cand = r.end;
                        collided = true;
                    }
            }
            if (std::abs(cand - s.start) > kTick) {
                s.start = cand;
                s.end = cand + len;
                moved.push_back(s);
            }
            cursor = cand + len;
        }
        for (const auto& u : moved) {
            table_.remove_action(u.routine_id, u.action_id);
            table_.add(u);
        }
    }

    // Once an action is handed to its device the slot stops being a forecast
    // and becomes a record; pin it to the clock.
    void record_dispatch_time(const ActionRt& a, const std::string& rid, double t) {
        const ScheduledAction* slot = table_.find(rid, a.spec->id);
        if (!slot) return;
        double len = std::max(slot->end - slot->start, kTick);
        if (std::abs(slot->start - t) > kTick)
            retime_slot(rid, a.spec->id, t, t + len);
        tidy_device(a.spec->device);
    }

    void arm_timer(double at, double now) {
        if (at > now + kTick) push(at, EvKind::Timer, -1, -1);
    }

    // ---- event handlers ------------------------------------------------

    void on_arrival(const Ev& e) {
        auto& rt = routines_[e.ri];
        rt.arrived = true;
        emit(e.t, "arrival", {{"routine", rt.dag->id}});
        if (planned_) {
            PlacementReport rep = schedule_routine(table_, *rt.dag, e.t, est_);
            check_table();
            for (const auto& s : rep.placed) arm_timer(s.start, e.t);
        }
    }

    void on_request(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        const std::string& d = a.spec->device;
        if (running_.at(d).first < 0 && queue_[d].empty()) {
            a.accepted = true;
            push(e.t + nd_, EvKind::Ack, e.ri, e.ai);
            start_phys(e.ri, e.ai, e.t);
        } else if (a.dev->busy_policy == BusyPolicy::Queue) {
            a.accepted = true;
            push(e.t + nd_, EvKind::Ack, e.ri, e.ai);
            queue_[d].push_back({e.ri, e.ai});
        } else {
            push(e.t + nd_, EvKind::Reject, e.ri, e.ai);
        }
    }

    void start_phys(int ri, int ai, double t) {
        auto& a = acts_[ri][ai];
        a.phys_started = true;
        a.ps = t;
        a.pe = t + a.truth;
        if (a.has_intr && a.intr_duration > 0) {
            if (a.intr_fraction < 1.0) {
                a.freeze_at = t + a.intr_fraction * a.truth;
                a.freeze_len = a.intr_duration;
                a.pe += a.intr_duration;
            } else {
                auto j = who(ri, ai);
                j["note"] = "interruption point lies past the action's completion";
                emit(t, "warn", j);
            }
        }
        const std::string& d = a.spec->device;
        running_[d] = {ri, ai};
        dev_order_[d].push_back(ri);
        dev_keys_[d].push_back(a.key);
        spans_[d].push_back({a.ps, a.pe});
        auto j = who(ri, ai);
        j["device"] = d;
        emit(t, "phys_start", j);
        push(a.pe, EvKind::PhysDone, ri, ai);
        if (a.dev->mode == DeviceMode::Push) push(t + nd_, EvKind::PushStart, ri, ai);
    }

    void on_phys_done(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        a.phys_done = true;
        auto j = who(e.ri, e.ai);
        j["device"] = a.spec->device;
        emit(e.t, "phys_complete", j);
        running_[a.spec->device] = {-1, -1};
        if (a.dev->mode == DeviceMode::Push) push(e.t + nd_, EvKind::PushDone, e.ri, e.ai);
        auto& q = queue_[a.spec->device];
        if (!q.empty()) {
            auto [rj, aj] = q.front();
            q.pop_front();
            start_phys(rj, aj, e.t);
        }
    }

    void on_ack_reply(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal) return;
        if (a.tracker) {
            handle_result(e.ri, e.ai, e.t, a.tracker->on_ack(e.t));
            return;
        }
        routines_[e.ri].fs->record(a.spec->id, EdgeKind::Ack);
        if (a.dev->mode == DeviceMode::Pull) {
            // open loop: take the start on faith now and the completion once
            // the learned mean has elapsed
            auto j = who(e.ri, e.ai);
            j["kind"] = "start";
            emit(e.t, "assume", j);
            routines_[e.ri].fs->record(a.spec->id, EdgeKind::Start);
            push(e.t + cfg_.learned.at(a.tkey).mean(), EvKind::Assume, e.ri, e.ai);
        }
    }

    void on_reject_reply(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal) return;
        emit(e.t, "reject", who(e.ri, e.ai));
        if (a.tracker) {
            handle_result(e.ri, e.ai, e.t, a.tracker->on_rejected(e.t));
            return;
        }
        milestone(e.ri, e.ai, EdgeKind::Failure, e.t, "rejected");
        finish_action(e.ri, e.ai);
    }

    void on_poll(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal || !a.tracker || e.gen != a.poll_gen) return;
        emit(e.t, "poll", who(e.ri, e.ai));
        handle_result(e.ri, e.ai, e.t, a.tracker->on_poll_result(e.t, observe(a, e.t)));
    }

    void on_ack_deadline(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal || !a.tracker) return;
        handle_result(e.ri, e.ai, e.t, a.tracker->on_ack_deadline(e.t));
    }

    void on_push_event(const Ev& e, EdgeKind kind) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal) return;
        milestone(e.ri, e.ai, kind, e.t);
        if (kind == EdgeKind::Complete) finish_action(e.ri, e.ai);
    }

    void on_assume(const Ev& e) {
        auto& a = acts_[e.ri][e.ai];
        if (a.terminal) return;
        auto j = who(e.ri, e.ai);
        j["kind"] = "complete";
        emit(e.t, "assume", j);
        routines_[e.ri].fs->record(a.spec->id, EdgeKind::Complete);
        finish_action(e.ri, e.ai);
    }

    // ---- controller reactions -------------------------------------------

    Observation observe(const ActionRt& a, double t) const {
        Observation o;
        if (!a.phys_started) return o;
        o.started = true;
        o.progress = progress_at(a, t);
        o.completed = t >= a.pe - kTick;
        return o;
    }

    double progress_at(const ActionRt& a, double t) const {
        if (t >= a.pe) return 1.0;
        double elapsed = t - a.ps;
        if (a.freeze_len > 0) {
            if (t >= a.freeze_at + a.freeze_len)
                elapsed -= a.freeze_len;
            else if (t >= a.freeze_at)
                elapsed = a.freeze_at - a.ps;
        }
        return std::clamp(elapsed / a.truth, 0.0, 1.0);
    }

    void handle_result(int ri, int ai, double t, const ActionTracker::Result& r) {
        auto& a = acts_[ri][ai];
        for (EdgeKind k : r.fired)
            milestone(ri, ai, k, t, k == EdgeKind::Failure ? a.tracker->failure_reason() : "");
        if (r.late_signal) {
            emit(t, "late_risk", who(ri, ai));
            if (planned_) {
                if (const ScheduledAction* slot = table_.find(routines_[ri].dag->id, a.spec->id)) {
                    double dt = pessimistic_late_dt(a.plan_upper, a.qw, slot->end - slot->start);
                    if (dt > cfg_.policy.reactive_threshold)
                        do_reschedule({routines_[ri].dag->id, a.spec->id, dt, t, true}, t);
                }
            }
        }
        if (r.next_poll) push(*r.next_poll, EvKind::Poll, ri, ai, ++a.poll_gen);
        if (a.tracker->terminal()) finish_action(ri, ai);
    }

    void milestone(int ri, int ai, EdgeKind k, double t, const std::string& reason = "") {
        auto& a = acts_[ri][ai];
        auto& rt = routines_[ri];
        switch (k) {
            case EdgeKind::Ack:
                rt.fs->record(a.spec->id, EdgeKind::Ack);
                break;
            case EdgeKind::Start: {
                rt.fs->record(a.spec->id, EdgeKind::Start);
                auto j = who(ri, ai);
                j["kind"] = "start";
                j["lag"] = t - a.ps;
                emit(t, "detect", j);
                break;
            }
            case EdgeKind::Complete: {
                rt.fs->record(a.spec->id, EdgeKind::Complete);
                auto j = who(ri, ai);
                j["kind"] = "complete";
                j["lag"] = t - a.pe;
                emit(t, "detect", j);
                if (planned_) maybe_reactive(ri, ai, t);
                break;
            }
            case EdgeKind::Failure: {
                rt.fs->record(a.spec->id, EdgeKind::Failure);
                auto j = who(ri, ai);
                j["reason"] = reason;
                // the verdict is false when the device really does finish the
                // work later; a refused request is a genuine failure
                j["fp"] = a.accepted;
                emit(t, "failure", j);
                if (planned_) {
                    if (!a.accepted) {
                        table_.remove_action(rt.dag->id, a.spec->id);
                    } else if (const ScheduledAction* s =
                                   table_.find(rt.dag->id, a.spec->id)) {
                        // the controller walks away at the verdict; as far
                        // as the plan is concerned the device is free now
                        if (std::abs(s->end - t) > kTick)
                            retime_slot(rt.dag->id, a.spec->id, s->start, t);
                    }
                    cancel_blocked(ri, t);
                }
                break;
            }
        }
    }

    void maybe_reactive(int ri, int ai, double t) {
        auto& a = acts_[ri][ai];
        const ScheduledAction* slot = table_.find(routines_[ri].dag->id, a.spec->id);
        if (!slot) return;
        double dt = t - slot->end;
        if (std::abs(dt) <= cfg_.policy.reactive_threshold) {
            // close enough not to replan, but the record still gets the
            // actual finish time
            if (std::abs(dt) > kTick) {
                retime_slot(routines_[ri].dag->id, a.spec->id, slot->start, t);
                if (dt > 0) tidy_device(a.spec->device);
            }
            return;
        }
        do_reschedule({routines_[ri].dag->id, a.spec->id, dt, t, false}, t);
    }

    void do_reschedule(const Deviation& dev, double t) {
        RescheduleOutcome out = cfg_.policy.scheduler == SchedulerPolicy::PlannedStf
                                    ? reschedule_stf(table_, dags_, dev, dispatched_keys_, t)
                                    : reschedule_rv(table_, dags_, dev, dispatched_keys_, t);
        emit(t, "reschedule",
             {{"moved", static_cast<double>(out.moves.size())}, {"touched", out.touched}});
        check_table();
        for (const auto& mv : out.moves) arm_timer(mv.new_start, t);
    }

    void cancel_blocked(int ri, double t) {
        auto& rt = routines_[ri];
        for (const auto& id : rt.fs->permanently_blocked()) {
            int ai = rt.dag->index_of(id);
            if (ai >= 0 && acts_[ri][ai].dispatched) continue;
            if (table_.remove_action(rt.dag->id, id))
                emit(t, "cancel", {{"routine", rt.dag->id}, {"action", id}});
        }
        check_table();
    }

    void finish_action(int ri, int ai) {
        auto& a = acts_[ri][ai];
        if (a.terminal) return;
        a.terminal = true;
        routines_[ri].inflight--;
        auto& b = belief_[a.spec->device];
        if (b.first == ri && b.second == ai) b = {-1, -1};
    }

    // ---- dispatching -----------------------------------------------------

    void pump(double t) {
        for (int ri = 0; ri < static_cast<int>(routines_.size()); ++ri) {
            auto& rt = routines_[ri];
            if (!rt.arrived) continue;
            if (rt.inflight == 0 && rt.fs->settled()) continue;
            for (const auto& id : rt.fs->ready_children()) {
                int ai = rt.dag->index_of(id);
                auto& a = acts_[ri][ai];
                if (a.eligible < 0) a.eligible = t;
                if (!clears_gates(ri, a, t)) continue;
                dispatch(ri, ai, t);
            }
        }
    }

    bool clears_gates(int ri, ActionRt& a, double t) {
        if (planned_) {
            const ScheduledAction* slot = table_.find(routines_[ri].dag->id, a.spec->id);
            if (!slot) {
                // a fallback branch just went live; give it slots before
                // letting it run
                place_fallback(ri, a, t);
                slot = table_.find(routines_[ri].dag->id, a.spec->id);
            }
            // the table binds the ORDER, not the clock: an action may run as
            // soon as it is ready, but jumping ahead of a still-undispatched
            // earlier slot would flip the device order the plan committed to
            // and can wedge serial equivalence across devices. If the plan
            // is stale, a reschedule reorders it first.
            for (const auto& s : table_.device(a.spec->device).slots()) {
                if (s.start >= slot->start - kTick) break;
                // sibling slots of the same routine order themselves; the
                // serial story only cares about cross-routine order
                if (s.routine_id == routines_[ri].dag->id) continue;
                if (!dispatched_keys_.count(s.routine_id + "/" + s.action_id)) return false;
            }
        }
        if (belief_.at(a.spec->device).first >= 0) return false;

        const int n = static_cast<int>(routines_.size());
        switch (cfg_.policy.scheduler) {
            case SchedulerPolicy::Fcfs:
                for (int rj = 0; rj < n; ++rj)
                    if (rj != ri && before(rj, ri) && !routine_finished(rj)) return false;
                break;
            case SchedulerPolicy::FcfsDevice:
                for (int rj = 0; rj < n; ++rj)
                    if (rj != ri && before(rj, ri) && pending_on(rj, a.spec->device)) return false;
                break;
            case SchedulerPolicy::Greedy: {
                // just-in-time with device locks: a routine takes its place
                // in the serialization order the first time it touches any
                // device, and from then on later arrivals to the order must
                // let it drain its remaining work on a device first
                auto it = jit_rank_.find(ri);
                for (const auto& [rj, rank] : jit_rank_) {
                    if (rj == ri) continue;
                    if (it != jit_rank_.end() && rank > it->second) continue;
                    if (pending_on(rj, a.spec->device)) return false;
                }
                break;
            }
            default:
                break;
        }
        return true;
    }

    bool before(int rj, int ri) const {
        const auto& x = routines_[rj];
        const auto& y = routines_[ri];
        return x.arrival != y.arrival ? x.arrival < y.arrival : rj < ri;
    }

    bool routine_finished(int rj) const {
        const auto& rt = routines_[rj];
        return rt.arrived && rt.inflight == 0 && rt.fs->settled();
    }

    // unfinished work of rj on a device, counting actions it has not even
    // dispatched yet; baselines use this lookahead to hold a device for a
    // routine that is still on its way there
    bool pending_on(int rj, const std::string& device) const {
        const auto& rt = routines_[rj];
        if (!rt.arrived) return false;
        auto blocked = rt.fs->permanently_blocked();
        for (const auto& b : acts_[rj]) {
            if (b.spec->device != device) continue;
            if (b.terminal || blocked.count(b.spec->id)) continue;
            return true;
        }
        return false;
    }

    void place_fallback(int ri, ActionRt& a, double t) {
        auto placed = place_actions(table_, *routines_[ri].dag, {a.spec->id},
                                    std::map<std::string, double>{}, est_, t);
        check_table();
        for (const auto& s : placed) arm_timer(s.start, t);
    }

    void dispatch(int ri, int ai, double t) {
        auto& rt = routines_[ri];
        auto& a = acts_[ri][ai];
        a.dispatched = true;
        rt.fs->mark_dispatched(a.spec->id);
        rt.inflight++;
        dispatched_keys_.insert(a.key);
        belief_[a.spec->device] = {ri, ai};
        if (planned_) record_dispatch_time(a, rt.dag->id, t);
        if (cfg_.policy.scheduler == SchedulerPolicy::Greedy && !jit_rank_.count(ri))
            jit_rank_[ri] = jit_next_rank_++;
        auto j = who(ri, ai);
        j["device"] = a.spec->device;
        j["eligible"] = a.eligible;
        emit(t, "dispatch", j);

        if (a.dev->mode == DeviceMode::Pull && cfg_.policy.polling != PollingPolicy::None) {
            a.tracker = std::make_unique<ActionTracker>(std::nullopt, phase_plan(a));
            a.tracker->on_request_sent(t);
            push(a.tracker->ack_deadline(), EvKind::AckDeadline, ri, ai);
        }
        push(t + nd_, EvKind::Request, ri, ai);
    }

    PhasePlan phase_plan(ActionRt& a) {
        std::string ck = a.tkey.str() + "@" + std::to_string(a.dev->min_poll_interval);
        auto it = plan_cache_.find(ck);
        if (it == plan_cache_.end()) {
            const EmpiricalDistribution& dist = cfg_.learned.at(a.tkey);
            PollSchedule s;
            if (cfg_.policy.polling == PollingPolicy::Adaptive) {
                PollPlanRequest req;
                req.key = a.tkey;
                req.qw = a.qw;
                req.slo = cfg_.policy.slo;
                req.min_poll_interval = a.dev->min_poll_interval;
                s = find_polls(dist, req);
            } else {
                s = periodic_plan(dist.upper_bound(), a.qw);
            }
            it = plan_cache_.emplace(ck, PhasePlan{s.polls, s.polls.back(), a.qw}).first;
        }
        a.plan_upper = it->second.upper;
        return it->second;
    }

    // ---- outcome assembly ------------------------------------------------

    bool physical_exclusive() const {
        for (const auto& [d, sp] : spans_) {
            auto v = sp;
            std::sort(v.begin(), v.end());
            for (std::size_t i = 1; i < v.size(); ++i)
                if (v[i].first < v[i - 1].second - kTick) return false;
        }
        return true;
    }

    void build_witness(SimOutcome& out) const {
        std::map<std::string, std::set<std::string>> preds;
        std::map<std::string, double> arr;
        for (const auto& rt : routines_) {
            preds[rt.dag->id];
            arr[rt.dag->id] = rt.arrival;
        }
        for (const auto& [d, order] : dev_order_)
            for (std::size_t i = 0; i < order.size(); ++i)
                for (std::size_t j = i + 1; j < order.size(); ++j)
                    if (order[i] != order[j])
                        preds[routines_[order[j]].dag->id].insert(routines_[order[i]].dag->id);
        try {
            out.witness = freeze_order(preds, arr);
            out.serial_ok = true;
        } catch (const ValidationError&) {
            out.serial_ok = false;
            out.witness.clear();
        }
    }
};

}  // namespace

SimOutcome run_simulation(const WorkloadSpec& workload, const std::vector<DeviceSpec>& devices,
                          const SimConfig& cfg) {
    Sim sim(workload, devices, cfg);
    return sim.run();
}

}  // namespace rasc
