#include "rasc/routine_dag.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rasc {

using nlohmann::json;

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Ack: return "ack";
        case EdgeKind::Start: return "start";
        case EdgeKind::Complete: return "complete";
        case EdgeKind::Failure: return "failure";
    }
    return "?";
}

EdgeKind edge_kind_from_string(const std::string& s) {
    if (s == "ack") return EdgeKind::Ack;
    if (s == "start") return EdgeKind::Start;
    if (s == "complete") return EdgeKind::Complete;
    if (s == "failure") return EdgeKind::Failure;
    throw ValidationError("unknown dependency event '" + s + "'");
}

int RoutineDag::index_of(const std::string& action_id) const {
    for (size_t i = 0; i < actions.size(); ++i)
        if (actions[i].id == action_id) return static_cast<int>(i);
    return -1;
}

const ActionSpec& RoutineDag::at(const std::string& action_id) const {
    int i = index_of(action_id);
    if (i < 0) throw ValidationError("no action '" + action_id + "' in routine " + id);
    return actions[static_cast<size_t>(i)];
}

std::vector<std::string> RoutineDag::roots() const {
    std::vector<std::string> out;
    for (const auto& a : actions)
        if (a.after.empty()) out.push_back(a.id);
    return out;
}

std::vector<std::string> RoutineDag::primary_actions() const {
    std::set<std::string> reach;
    std::deque<std::string> frontier;
    for (const auto& r : roots()) {
        reach.insert(r);
        frontier.push_back(r);
    }
    while (!frontier.empty()) {
        std::string p = frontier.front();
        frontier.pop_front();
        for (const auto& a : actions) {
            if (reach.count(a.id)) continue;
            bool via_live_edge = false;
            for (const auto& e : a.after)
                if (e.parent == p && e.on != EdgeKind::Failure) via_live_edge = true;
            if (via_live_edge) {
                reach.insert(a.id);
                frontier.push_back(a.id);
            }
        }
    }
    std::vector<std::string> out;
    for (const auto& a : actions)
        if (reach.count(a.id)) out.push_back(a.id);
    return out;
}

namespace {

void check_acyclic(const RoutineDag& dag) {
    // Kahn's algorithm over all edges, Failure included: the document must be
    // structurally acyclic regardless of which branches a run takes.
    std::map<std::string, int> indeg;
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& a : dag.actions) indeg[a.id] = 0;
    for (const auto& a : dag.actions)
        for (const auto& e : a.after) {
            indeg[a.id]++;
            children[e.parent].push_back(a.id);
        }
    std::deque<std::string> q;
    for (const auto& [id, d] : indeg)
        if (d == 0) q.push_back(id);
    size_t seen = 0;
    while (!q.empty()) {
        std::string p = q.front();
        q.pop_front();
        ++seen;
        for (const auto& c : children[p])
            if (--indeg[c] == 0) q.push_back(c);
    }
    if (seen != dag.actions.size())
        throw ValidationError("routine " + dag.id + " has a dependency cycle");
}

}  // namespace

RoutineDag parse_routine(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("routine is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("id") || !doc.contains("actions"))
        throw ValidationError("routine needs 'id' and 'actions' fields");

    RoutineDag dag;
    dag.id = doc.at("id").get<std::string>();
    dag.alias = doc.value("alias", std::string{});
    if (!doc.at("actions").is_array() || doc.at("actions").empty())
        throw ValidationError("routine " + dag.id + " has no actions");

    std::set<std::string> ids;
    std::string prev_id;
    for (const auto& item : doc.at("actions")) {
        ActionSpec a;
        a.id = item.at("id").get<std::string>();
        a.device = item.at("device").get<std::string>();
        a.action = item.at("action").get<std::string>();
        if (item.contains("params") && !item.at("params").is_null())
            a.params = item.at("params").dump();
        if (!ids.insert(a.id).second)
            throw ValidationError("duplicate action id '" + a.id + "' in routine " + dag.id);

        if (item.contains("after")) {
            for (const auto& edge : item.at("after")) {
                DependencyEdge e;
                e.parent = edge.at("action_id").get<std::string>();
                e.on = edge.contains("on") ? edge_kind_from_string(edge.at("on").get<std::string>())
                                           : EdgeKind::Complete;
                if (e.parent == a.id)
                    throw ValidationError("action '" + a.id + "' depends on itself");
                a.after.push_back(e);
            }
        } else if (!prev_id.empty()) {
            a.after.push_back({prev_id, EdgeKind::Complete});
        }
        prev_id = a.id;
        dag.actions.push_back(std::move(a));
    }

    for (const auto& a : dag.actions)
        for (const auto& e : a.after)
            if (!ids.count(e.parent))
                throw ValidationError("action '" + a.id + "' references unknown action '" +
                                      e.parent + "'");

    check_acyclic(dag);
    return dag;
}

std::string serialize_routine(const RoutineDag& dag) {
    json doc;
    doc["id"] = dag.id;
    if (!dag.alias.empty()) doc["alias"] = dag.alias;
    doc["actions"] = json::array();
    for (const auto& a : dag.actions) {
        json item;
        item["id"] = a.id;
        item["device"] = a.device;
        item["action"] = a.action;
        if (!a.params.empty()) item["params"] = json::parse(a.params);
        json after = json::array();
        for (const auto& e : a.after)
            after.push_back({{"action_id", e.parent}, {"on", to_string(e.on)}});
        item["after"] = std::move(after);
        doc["actions"].push_back(std::move(item));
    }
    return doc.dump(2);
}

FiringState::FiringState(const RoutineDag& dag) : dag_(&dag) {}

void FiringState::record(const std::string& action_id, EdgeKind event) {
    if (dag_->index_of(action_id) < 0)
        throw ValidationError("no action '" + action_id + "' in routine " + dag_->id);
    events_[action_id].insert(event);
}

void FiringState::mark_dispatched(const std::string& action_id) {
    dispatched_.insert(action_id);
}

bool FiringState::fired(const std::string& action_id, EdgeKind event) const {
    auto it = events_.find(action_id);
    return it != events_.end() && it->second.count(event) > 0;
}

bool FiringState::dispatched(const std::string& action_id) const {
    return dispatched_.count(action_id) > 0;
}

bool FiringState::edge_satisfied(const DependencyEdge& e) const {
    return fired(e.parent, e.on);
}

bool FiringState::edge_dead(const DependencyEdge& e, const std::set<std::string>& blocked) const {
    if (blocked.count(e.parent)) return true;
    // A parent that reached a terminal milestone can no longer emit the other
    // terminal, nor any milestone it skipped on the way to Failure.
    if (fired(e.parent, EdgeKind::Failure)) return !fired(e.parent, e.on);
    if (fired(e.parent, EdgeKind::Complete)) return e.on == EdgeKind::Failure;
    return false;
}

std::set<std::string> FiringState::permanently_blocked() const {
    std::set<std::string> blocked;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& a : dag_->actions) {
            if (a.after.empty() || blocked.count(a.id) || dispatched_.count(a.id)) continue;
            bool all_dead = true;
            for (const auto& e : a.after)
                if (!edge_dead(e, blocked)) { all_dead = false; break; }
            if (all_dead) {
                blocked.insert(a.id);
                grew = true;
            }
        }
    }
    return blocked;
}

std::vector<std::string> FiringState::ready_children() const {
    std::set<std::string> blocked = permanently_blocked();
    std::vector<std::string> out;
    for (const auto& a : dag_->actions) {
        if (dispatched_.count(a.id) || blocked.count(a.id)) continue;
        if (a.after.empty()) {
            out.push_back(a.id);
            continue;
        }
        bool any_satisfied = false;
        bool all_resolved = true;
        for (const auto& e : a.after) {
            if (edge_satisfied(e)) { any_satisfied = true; continue; }
            if (!edge_dead(e, blocked)) { all_resolved = false; break; }
        }
        if (all_resolved && any_satisfied) out.push_back(a.id);
    }
    return out;
}

bool FiringState::settled() const {
    std::set<std::string> blocked = permanently_blocked();
    for (const auto& a : dag_->actions)
        if (!dispatched_.count(a.id) && !blocked.count(a.id)) return false;
    return true;
}

}  // namespace rasc
