#include "rasc/rescheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

#include "rasc/errors.hpp"

namespace rasc {

namespace {

constexpr double kTimeEps = 1e-9;

std::string key_of(const std::string& r, const std::string& a) { return r + "/" + a; }
std::string key_of(const ScheduledAction& s) { return key_of(s.routine_id, s.action_id); }

// Transitive non-failure descendants of one action within its routine.
std::set<std::string> descendants(const RoutineDag& dag, const std::string& root) {
    std::set<std::string> out;
    std::deque<std::string> q{root};
    while (!q.empty()) {
        std::string p = q.front();
        q.pop_front();
        for (const auto& a : dag.actions) {
            if (out.count(a.id)) continue;
            for (const auto& e : a.after)
                if (e.parent == p && e.on != EdgeKind::Failure) {
                    out.insert(a.id);
                    q.push_back(a.id);
                    break;
                }
        }
    }
    return out;
}

// Applies the deviation to its own slot: a late action holds its device for dt
// longer, an early one releases it at the detected completion.
void stretch_deviating_slot(Timetable& table, const Deviation& dev) {
    const ScheduledAction* cur = table.find(dev.routine_id, dev.action_id);
    if (!cur) throw ValidationError("deviation references an unscheduled action");
    ScheduledAction updated = *cur;
    if (dev.dt >= 0.0)
        updated.end += dev.dt;
    else
        updated.end = std::max(dev.detected_at, updated.start + kTimeEps);
    table.remove_action(dev.routine_id, dev.action_id);
    table.add(updated);
}

struct PlacementProblem {
    std::vector<ScheduledAction> slots;            // impacted, original geometry
    std::map<std::string, std::size_t> index;      // key -> slots index
    std::vector<std::set<std::size_t>> succ;       // precedence edges
    std::vector<int> indeg;
    std::vector<double> floor;                     // EST from fixed parents and now
    std::vector<std::map<std::size_t, EdgeKind>> dep_edge;  // parent idx -> milestone kind
};

// Precedence skeleton: dependency edges between impacted slots and EST floors
// from parents that stay put. In rigid mode, per-device serial-order edges pin
// every impacted routine to the frozen order; the reordering mode instead
// enforces order dynamically while placing (started routines keep their
// committed positions, everything else re-ranks as it lands).
PlacementProblem build_problem(const Timetable& table,
                               const std::map<std::string, RoutineDag>& dags,
                               const ImpactedSet& impacted, double now, bool pin_full_order) {
    PlacementProblem p;
    for (const auto& s : table.all())
        if (impacted.keys.count(key_of(s))) {
            p.index[key_of(s)] = p.slots.size();
            p.slots.push_back(s);
        }
    p.succ.resize(p.slots.size());
    p.indeg.assign(p.slots.size(), 0);
    p.floor.assign(p.slots.size(), now);
    p.dep_edge.resize(p.slots.size());

    for (std::size_t i = 0; i < p.slots.size(); ++i) {
        const auto& s = p.slots[i];
        auto dit = dags.find(s.routine_id);
        if (dit == dags.end()) continue;
        for (const auto& e : dit->second.at(s.action_id).after) {
            if (e.on == EdgeKind::Failure) continue;
            auto pit = p.index.find(key_of(s.routine_id, e.parent));
            if (pit != p.index.end()) {
                if (p.succ[pit->second].insert(i).second) p.indeg[i]++;
                auto rank = [](EdgeKind k) { return k == EdgeKind::Complete ? 2 : k == EdgeKind::Start ? 1 : 0; };
                auto [it, fresh] = p.dep_edge[i].emplace(pit->second, e.on);
                if (!fresh && rank(e.on) > rank(it->second)) it->second = e.on;
            } else if (const ScheduledAction* fixed = table.find(s.routine_id, e.parent)) {
                p.floor[i] = std::max(p.floor[i], fixed->milestone(e.on));
            }
        }
    }

    if (pin_full_order) {
        std::map<std::string, std::size_t> rank;
        for (std::size_t r = 0; r < impacted.frozen_order.size(); ++r)
            rank[impacted.frozen_order[r]] = r;
        for (std::size_t i = 0; i < p.slots.size(); ++i)
            for (std::size_t j = 0; j < p.slots.size(); ++j) {
                if (i == j || p.slots[i].device != p.slots[j].device) continue;
                auto ri = rank.find(p.slots[i].routine_id), rj = rank.find(p.slots[j].routine_id);
                if (ri == rank.end() || rj == rank.end() || ri->second >= rj->second) continue;
                if (p.succ[i].insert(j).second) p.indeg[j]++;
            }
    }
    return p;
}

RescheduleOutcome run_replacement(Timetable& table, const std::map<std::string, RoutineDag>& dags,
                                  const Deviation& dev, const std::set<std::string>& dispatched,
                                  double now, bool shortest_first) {
    auto t0 = std::chrono::steady_clock::now();
    RescheduleOutcome out;
    out.makespan_before = table.makespan();

    stretch_deviating_slot(table, dev);
    ImpactedSet impacted = impacted_set(table, dags, dev, dispatched, now);
    PlacementProblem p = build_problem(table, dags, impacted, now, !shortest_first);
    out.touched = static_cast<int>(p.slots.size());

    // A routine is committed once anything of it ran: its serial position is
    // evidence on record and must survive the reshuffle. Everything else gets
    // its position back when it is first placed.
    std::set<std::string> started{dev.routine_id};
    for (const auto& s : table.all())
        if (dispatched.count(key_of(s))) started.insert(s.routine_id);
    std::map<std::string, std::size_t> rank;
    for (const auto& r : impacted.frozen_order)
        if (started.count(r)) rank.emplace(r, rank.size());
    std::size_t next_rank = rank.size();
    const std::size_t kUnranked = std::size_t(-1);
    auto rank_of = [&](const std::string& r) {
        auto it = rank.find(r);
        return it == rank.end() ? kUnranked : it->second;
    };

    for (const auto& s : p.slots) table.remove_action(s.routine_id, s.action_id);

    std::vector<std::size_t> rigid_order(p.slots.size());
    for (std::size_t i = 0; i < rigid_order.size(); ++i) rigid_order[i] = i;
    std::sort(rigid_order.begin(), rigid_order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(p.slots[a].start, p.slots[a].routine_id, p.slots[a].action_id) <
               std::tie(p.slots[b].start, p.slots[b].routine_id, p.slots[b].action_id);
    });

    // Shortest-first judges a routine by the believed work it still has to
    // place, not by the slot in hand: ranking on slot length alone lets a
    // quick first action drag a heavy routine to the front of every queue
    // it later touches.
    std::map<std::string, double> backlog;
    for (const auto& s : p.slots) backlog[s.routine_id] += s.end - s.start;

    std::map<std::string, double> cursor;  // per-device append point for this pass
    std::vector<bool> placed(p.slots.size(), false);
    std::vector<double> new_start(p.slots.size(), 0.0);
    std::size_t remaining = p.slots.size();

    // No slot may land on a device while a lower-ranked routine still has an
    // unplaced slot there; with per-device appending this keeps every device
    // order consistent with one global story.
    auto rank_blocked = [&](std::size_t i) {
        std::size_t mine = rank_of(p.slots[i].routine_id);
        for (std::size_t j = 0; j < p.slots.size(); ++j) {
            if (placed[j] || j == i || p.slots[j].device != p.slots[i].device) continue;
            if (p.slots[j].routine_id == p.slots[i].routine_id) continue;
            if (rank_of(p.slots[j].routine_id) < mine) return true;
        }
        return false;
    };

    while (remaining > 0) {
        std::size_t pick = p.slots.size();
        double pick_start = 0.0;
        if (shortest_first) {
            for (std::size_t i = 0; i < p.slots.size(); ++i) {
                if (placed[i] || p.indeg[i] != 0 || rank_blocked(i)) continue;
                double len = p.slots[i].end - p.slots[i].start;
                double ready = std::max(p.floor[i], cursor[p.slots[i].device]);
                double cand = table.device(p.slots[i].device).earliest_gap(ready, len);
                bool better = false;
                if (pick == p.slots.size() || cand < pick_start - kTimeEps) {
                    better = true;
                } else if (std::abs(cand - pick_start) <= kTimeEps) {
                    double bi = backlog[p.slots[i].routine_id];
                    double bp = backlog[p.slots[pick].routine_id];
                    if (bi < bp - kTimeEps) better = true;
                    else if (std::abs(bi - bp) <= kTimeEps &&
                             len < p.slots[pick].end - p.slots[pick].start - kTimeEps)
                        better = true;
                }
                if (better) {
                    pick = i;
                    pick_start = cand;
                }
            }
        } else {
            // earliest unplaced-and-ready slot in the original order; ties in
            // original starts can list a child a hair before its parent, so
            // scan past blocked entries rather than insisting on strict order
            for (std::size_t at = 0; at < rigid_order.size(); ++at) {
                std::size_t i = rigid_order[at];
                if (placed[i] || p.indeg[i] != 0) continue;
                pick = i;
                double len = p.slots[pick].end - p.slots[pick].start;
                double ready = std::max(p.floor[pick], cursor[p.slots[pick].device]);
                if (dev.dt >= 0.0) ready = std::max(ready, p.slots[pick].start);
                pick_start = table.device(p.slots[pick].device).earliest_gap(ready, len);
                break;
            }
        }
        if (pick == p.slots.size())
            throw SchedulingError("rescheduling deadlocked on its precedence edges");

        ScheduledAction moved = p.slots[pick];
        double len = moved.end - moved.start;
        moved.start = pick_start;
        moved.end = pick_start + len;
        table.add(moved);
        placed[pick] = true;
        new_start[pick] = pick_start;
        cursor[moved.device] = std::max(cursor[moved.device], moved.end);
        backlog[moved.routine_id] -= len;
        if (shortest_first && rank_of(moved.routine_id) == kUnranked)
            rank.emplace(moved.routine_id, next_rank++);
        --remaining;

        for (std::size_t nxt : p.succ[pick]) {
            p.indeg[nxt]--;
            auto it = p.dep_edge[nxt].find(pick);
            if (it != p.dep_edge[nxt].end())
                p.floor[nxt] = std::max(p.floor[nxt], moved.milestone(it->second));
        }
    }

    for (std::size_t i = 0; i < p.slots.size(); ++i)
        if (std::abs(new_start[i] - p.slots[i].start) > kTimeEps)
            out.moves.push_back({p.slots[i].routine_id, p.slots[i].action_id, p.slots[i].device,
                                 p.slots[i].start, new_start[i]});
    std::sort(out.moves.begin(), out.moves.end(), [](const SlotMove& a, const SlotMove& b) {
        return std::tie(a.new_start, a.routine_id, a.action_id) <
               std::tie(b.new_start, b.routine_id, b.action_id);
    });

    out.makespan_after = table.makespan();
    out.serializable_after = verify_serial_equivalence(table).serializable;
    out.compute_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace

ImpactedSet impacted_set(const Timetable& table, const std::map<std::string, RoutineDag>& dags,
                         const Deviation& dev, const std::set<std::string>& dispatched,
                         [[maybe_unused]] double now) {
    ImpactedSet out;
    const ScheduledAction* origin = table.find(dev.routine_id, dev.action_id);
    if (!origin) throw ValidationError("deviation references an unscheduled action");

    // the dispatched set is the sole authority on what may move: a slot whose
    // planned start has already slipped into the past but never left the
    // scheduler's hands is late, not running, and needs moving most of all
    auto movable = [&](const ScheduledAction& s) {
        if (s.routine_id == dev.routine_id && s.action_id == dev.action_id) return false;
        return !dispatched.count(key_of(s));
    };

    out.devices.insert(origin->device);
    auto dit = dags.find(dev.routine_id);
    if (dit != dags.end())
        for (const auto& child : descendants(dit->second, dev.action_id))
            if (const ScheduledAction* s = table.find(dev.routine_id, child)) {
                if (!movable(*s)) continue;
                out.keys.insert(key_of(*s));
                out.devices.insert(s->device);
            }

    // routine-level fixpoint: a movable slot on an affected device drags its
    // whole routine's movable slots (and their devices) into the set
    std::set<std::string> routines;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& [devname, tl] : table.devices()) {
            if (!out.devices.count(devname)) continue;
            for (const auto& s : tl.slots())
                if (movable(s) && routines.insert(s.routine_id).second) grew = true;
        }
        for (const auto& r : routines)
            for (const auto& s : table.actions_of(r))
                if (movable(s)) {
                    if (out.keys.insert(key_of(s)).second) grew = true;
                    if (out.devices.insert(s.device).second) grew = true;
                }
    }

    routines.insert(dev.routine_id);
    SerializationBook book = verify_serial_equivalence(table);
    if (book.serializable) {
        for (const auto& r : book.order)
            if (routines.count(r)) out.frozen_order.push_back(r);
    } else {
        // should not happen on a maintained table; fall back to arrival order
        std::map<std::string, std::set<std::string>> none;
        for (const auto& r : routines) none[r] = {};
        out.frozen_order = freeze_order(none, table.arrivals());
    }
    return out;
}

RescheduleOutcome reschedule_stf(Timetable& table, const std::map<std::string, RoutineDag>& dags,
                                 const Deviation& dev, const std::set<std::string>& dispatched,
                                 double now) {
    return run_replacement(table, dags, dev, dispatched, now, true);
}

RescheduleOutcome reschedule_rv(Timetable& table, const std::map<std::string, RoutineDag>& dags,
                                const Deviation& dev, const std::set<std::string>& dispatched,
                                double now) {
    return run_replacement(table, dags, dev, dispatched, now, false);
}

}  // namespace rasc
