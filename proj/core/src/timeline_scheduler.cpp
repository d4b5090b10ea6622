#include "rasc/timeline_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "rasc/errors.hpp"

namespace rasc {

namespace {
constexpr double kTimeEps = 1e-9;
constexpr double kMinSlotLen = 1e-3;

// Topological order over the given action subset using non-failure edges whose
// parent is also in the subset, document order on ties.
std::vector<std::string> topo_subset(const RoutineDag& dag, const std::vector<std::string>& ids) {
    std::set<std::string> in(ids.begin(), ids.end());
    std::map<std::string, int> indeg;
    for (const auto& id : ids) indeg[id] = 0;
    for (const auto& id : ids)
        for (const auto& e : dag.at(id).after)
            if (e.on != EdgeKind::Failure && in.count(e.parent)) indeg[id]++;

    std::vector<std::string> order;
    std::set<std::string> emitted;
    while (order.size() < ids.size()) {
        bool advanced = false;
        for (const auto& a : dag.actions) {   // document order scan
            if (!in.count(a.id) || emitted.count(a.id) || indeg[a.id] != 0) continue;
            order.push_back(a.id);
            emitted.insert(a.id);
            advanced = true;
            for (const auto& id : ids)
                for (const auto& e : dag.at(id).after)
                    if (e.parent == a.id && e.on != EdgeKind::Failure && !emitted.count(id))
                        indeg[id]--;
        }
        if (!advanced) throw ValidationError("routine " + dag.id + " has a dependency cycle");
    }
    return order;
}

struct ConflictGraph {
    std::set<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;  // first before second
};

ConflictGraph conflict_graph(const Timetable& table) {
    ConflictGraph g;
    for (const auto& [dev, tl] : table.devices()) {
        (void)dev;
        const auto& s = tl.slots();
        for (std::size_t i = 0; i < s.size(); ++i) {
            g.nodes.insert(s[i].routine_id);
            for (std::size_t j = i + 1; j < s.size(); ++j)
                if (s[i].routine_id != s[j].routine_id)
                    g.edges.insert({s[i].routine_id, s[j].routine_id});
        }
    }
    return g;
}

// Kahn's algorithm; returns the emitted order, which is complete iff acyclic.
std::vector<std::string> kahn_order(const ConflictGraph& g,
                                    const std::map<std::string, double>& arrivals) {
    std::map<std::string, int> indeg;
    for (const auto& n : g.nodes) indeg[n] = 0;
    for (const auto& [a, b] : g.edges) {
        (void)a;
        indeg[b]++;
    }
    auto arrival_of = [&](const std::string& r) {
        auto it = arrivals.find(r);
        return it == arrivals.end() ? 0.0 : it->second;
    };
    std::vector<std::string> order;
    std::set<std::string> done;
    while (order.size() < g.nodes.size()) {
        std::string pick;
        for (const auto& n : g.nodes) {
            if (done.count(n) || indeg[n] != 0) continue;
            if (pick.empty() || arrival_of(n) < arrival_of(pick) ||
                (arrival_of(n) == arrival_of(pick) && n < pick))
                pick = n;
        }
        if (pick.empty()) break;  // only cycle members remain
        order.push_back(pick);
        done.insert(pick);
        for (const auto& [a, b] : g.edges)
            if (a == pick && !done.count(b)) indeg[b]--;
    }
    return order;
}

}  // namespace

double ScheduledAction::milestone(EdgeKind on) const {
    switch (on) {
        case EdgeKind::Ack: return start;
        case EdgeKind::Start: return start + lead;
        case EdgeKind::Complete:
        case EdgeKind::Failure: return end;
    }
    return end;
}

double DeviceTimeline::earliest_gap(double ready, double len) const {
    double t = ready;
    for (const auto& s : slots_) {
        if (s.end <= t + kTimeEps) continue;      // entirely before the candidate
        if (s.start >= t + len - kTimeEps) break;  // candidate fits before this slot
        t = s.end;
    }
    return t;
}

void DeviceTimeline::reserve(const ScheduledAction& slot) {
    auto pos = std::upper_bound(slots_.begin(), slots_.end(), slot,
                                [](const ScheduledAction& a, const ScheduledAction& b) {
                                    return a.start < b.start;
                                });
    slots_.insert(pos, slot);
}

bool DeviceTimeline::release(const std::string& routine_id, const std::string& action_id) {
    for (auto it = slots_.begin(); it != slots_.end(); ++it) {
        if (it->routine_id == routine_id && it->action_id == action_id) {
            slots_.erase(it);
            return true;
        }
    }
    return false;
}

double DeviceTimeline::last_end() const {
    double t = 0.0;
    for (const auto& s : slots_) t = std::max(t, s.end);
    return t;
}

void Timetable::add(const ScheduledAction& slot) { devices_[slot.device].reserve(slot); }

bool Timetable::remove_action(const std::string& routine_id, const std::string& action_id) {
    for (auto& [dev, tl] : devices_) {
        (void)dev;
        if (tl.release(routine_id, action_id)) return true;
    }
    return false;
}

void Timetable::remove_routine(const std::string& routine_id) {
    for (const auto& s : actions_of(routine_id)) remove_action(routine_id, s.action_id);
}

std::vector<ScheduledAction> Timetable::actions_of(const std::string& routine_id) const {
    std::vector<ScheduledAction> out;
    for (const auto& [dev, tl] : devices_) {
        (void)dev;
        for (const auto& s : tl.slots())
            if (s.routine_id == routine_id) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const ScheduledAction& a, const ScheduledAction& b) {
        return std::tie(a.start, a.action_id) < std::tie(b.start, b.action_id);
    });
    return out;
}

const ScheduledAction* Timetable::find(const std::string& routine_id,
                                       const std::string& action_id) const {
    for (const auto& [dev, tl] : devices_) {
        (void)dev;
        for (const auto& s : tl.slots())
            if (s.routine_id == routine_id && s.action_id == action_id) return &s;
    }
    return nullptr;
}

std::vector<ScheduledAction> Timetable::all() const {
    std::vector<ScheduledAction> out;
    for (const auto& [dev, tl] : devices_) {
        (void)dev;
        out.insert(out.end(), tl.slots().begin(), tl.slots().end());
    }
    std::sort(out.begin(), out.end(), [](const ScheduledAction& a, const ScheduledAction& b) {
        return std::tie(a.start, a.routine_id, a.action_id) <
               std::tie(b.start, b.routine_id, b.action_id);
    });
    return out;
}

double Timetable::makespan() const {
    double t = 0.0;
    for (const auto& [dev, tl] : devices_) {
        (void)dev;
        t = std::max(t, tl.last_end());
    }
    return t;
}

void Timetable::note_arrival(const std::string& routine_id, double t) {
    arrivals_.emplace(routine_id, t);
}

SerializationBook verify_serial_equivalence(const Timetable& table) {
    ConflictGraph g = conflict_graph(table);
    SerializationBook book;
    for (const auto& e : g.edges) book.conflicts.push_back(e);
    book.order = kahn_order(g, table.arrivals());
    book.serializable = book.order.size() == g.nodes.size();
    if (!book.serializable) book.order.clear();
    return book;
}

bool verify_device_exclusivity(const Timetable& table, std::string* why) {
    for (const auto& [dev, tl] : table.devices()) {
        const auto& s = tl.slots();
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
            if (s[i + 1].start < s[i].end - kTimeEps) {
                if (why)
                    *why = "device " + dev + ": " + s[i].routine_id + "/" + s[i].action_id +
                           " overlaps " + s[i + 1].routine_id + "/" + s[i + 1].action_id;
                return false;
            }
    }
    return true;
}

bool verify_safety(const Timetable& table, const std::map<std::string, RoutineDag>& dags,
                   std::string* why) {
    auto complain = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (!verify_device_exclusivity(table, why)) return false;
    for (const auto& [rid, dag] : dags) {
        for (const auto& slot : table.actions_of(rid)) {
            for (const auto& e : dag.at(slot.action_id).after) {
                if (e.on == EdgeKind::Failure) continue;
                const ScheduledAction* parent = table.find(rid, e.parent);
                if (!parent) continue;  // fallback parent not placed on the hopeful path
                if (slot.start < parent->milestone(e.on) - kTimeEps)
                    return complain("routine " + rid + ": " + slot.action_id + " starts before " +
                                    e.parent + " reaches its " + to_string(e.on) + " milestone");
            }
        }
    }
    return true;
}

namespace {

// One placement pass: earliest dependency-feasible gap per action, honoring
// per-action floors. Returns the slots in placement order without touching
// serializability.
std::vector<ScheduledAction> place_pass(Timetable& table, const RoutineDag& dag,
                                        const std::vector<std::string>& order,
                                        const std::map<std::string, double>& floors,
                                        const EstimateFn& est, double global_floor) {
    std::vector<ScheduledAction> placed;
    for (const auto& id : order) {
        const ActionSpec& spec = dag.at(id);
        double ready = global_floor;
        if (auto it = floors.find(id); it != floors.end()) ready = std::max(ready, it->second);
        for (const auto& e : spec.after) {
            if (e.on == EdgeKind::Failure) continue;
            if (const ScheduledAction* p = table.find(dag.id, e.parent))
                ready = std::max(ready, p->milestone(e.on));
        }
        ActionEstimate a = est(spec);
        double len = std::max(a.lead + a.run, kMinSlotLen);
        double start = table.device(spec.device).earliest_gap(ready, len);
        ScheduledAction slot{dag.id, id, spec.device, start, a.lead, start + len};
        table.add(slot);
        placed.push_back(slot);
    }
    return placed;
}

}  // namespace

PlacementReport schedule_routine(Timetable& table, const RoutineDag& dag, double arrival,
                                 const EstimateFn& est, const PlacementOptions& opts) {
    table.note_arrival(dag.id, arrival);
    std::vector<std::string> order = topo_subset(dag, dag.primary_actions());

    PlacementReport report;
    double global_floor = arrival;
    std::map<std::string, double> floors;

    for (int round = 0; round <= opts.max_rounds; ++round) {
        report.placed = place_pass(table, dag, order, floors, est, global_floor);
        ConflictGraph g = conflict_graph(table);
        if (kahn_order(g, table.arrivals()).size() == g.nodes.size()) {
            report.makespan = table.makespan();
            return report;
        }

        // Routines in a cycle with this one: reachable from us and reaching us.
        auto closure = [&](bool forward) {
            std::set<std::string> seen{dag.id};
            std::deque<std::string> q{dag.id};
            while (!q.empty()) {
                std::string n = q.front();
                q.pop_front();
                for (const auto& [a, b] : g.edges) {
                    const std::string& from = forward ? a : b;
                    const std::string& to = forward ? b : a;
                    if (from == n && seen.insert(to).second) q.push_back(to);
                }
            }
            return seen;
        };
        std::set<std::string> ahead = closure(true), behind = closure(false);
        std::set<std::string> entangled;
        for (const auto& r : ahead)
            if (r != dag.id && behind.count(r)) entangled.insert(r);

        // Pick the repair before undoing, while our slots are still in view.
        std::map<std::string, double> bump;
        if (!opts.whole_dag_backtrack) {
            for (const auto& s : report.placed) {
                for (const auto& other : table.device(s.device).slots()) {
                    if (other.routine_id == dag.id || !entangled.count(other.routine_id)) continue;
                    if (other.start >= s.end - kTimeEps) {
                        bump[s.action_id] = other.end;
                        break;
                    }
                }
                if (!bump.empty()) break;
            }
        }

        for (const auto& s : report.placed) table.remove_action(dag.id, s.action_id);
        report.backtracks++;

        if (entangled.empty()) break;  // cycle predates this routine
        if (opts.whole_dag_backtrack) {
            // Jump the whole DAG past the latest slot of any routine tangled
            // in the cycle on a device we touch: every edge between us and
            // them then points at us. Non-entangled neighbours keep their
            // gaps, and anything new we trip over is handled next round.
            double shift = global_floor;
            for (const auto& id : order) {
                for (const auto& s : table.device(dag.at(id).device).slots())
                    if (entangled.count(s.routine_id)) shift = std::max(shift, s.end);
            }
            if (shift <= global_floor + kTimeEps) break;
            global_floor = shift;
        } else {
            if (bump.empty()) break;
            for (const auto& [id, f] : bump) {
                double& cur = floors[id];
                cur = std::max(cur, f);
            }
        }
    }
    throw SchedulingError("could not serialize routine " + dag.id + " within the round budget");
}

std::vector<ScheduledAction> place_actions(Timetable& table, const RoutineDag& dag,
                                           const std::vector<std::string>& action_ids,
                                           const std::map<std::string, double>& floors,
                                           const EstimateFn& est, double global_floor) {
    return place_pass(table, dag, topo_subset(dag, action_ids), floors, est, global_floor);
}

std::vector<std::string> freeze_order(
    const std::map<std::string, std::set<std::string>>& predecessors,
    const std::map<std::string, double>& arrivals) {
    std::map<std::string, std::set<std::string>> remaining;
    for (const auto& [r, preds] : predecessors) {
        auto& set = remaining[r];
        for (const auto& p : preds)
            if (predecessors.count(p) && p != r) set.insert(p);
    }
    auto arrival_of = [&](const std::string& r) {
        auto it = arrivals.find(r);
        return it == arrivals.end() ? 0.0 : it->second;
    };
    std::vector<std::string> order;
    while (!remaining.empty()) {
        std::string pick;
        for (const auto& [r, preds] : remaining) {
            if (!preds.empty()) continue;
            if (pick.empty() || arrival_of(r) < arrival_of(pick) ||
                (arrival_of(r) == arrival_of(pick) && r < pick))
                pick = r;
        }
        if (pick.empty())
            throw ValidationError("serialization constraints contain a cycle");
        order.push_back(pick);
        remaining.erase(pick);
        for (auto& [r, preds] : remaining) {
            (void)r;
            preds.erase(pick);
        }
    }
    return order;
}

}  // namespace rasc
