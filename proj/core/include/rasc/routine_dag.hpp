#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rasc/errors.hpp"

namespace rasc {

// Lifecycle milestones an action can emit, and equally the event a dependency
// edge can wait on.
enum class EdgeKind { Ack, Start, Complete, Failure };

const char* to_string(EdgeKind k);
EdgeKind edge_kind_from_string(const std::string& s);

struct DependencyEdge {
    std::string parent;                   // action id within the same routine
    EdgeKind on = EdgeKind::Complete;

    friend bool operator==(const DependencyEdge&, const DependencyEdge&) = default;
};

struct ActionSpec {
    std::string id;
    std::string device;
    std::string action;                   // action kind, e.g. "close"
    std::string params;                   // opaque JSON text, may be empty
    std::vector<DependencyEdge> after;

    friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

// One routine parsed into a DAG. Actions listed without an explicit `after`
// clause chain off the previous listed action's Complete; `after: []` makes an
// action an independent root (a sibling branch).
struct RoutineDag {
    std::string id;
    std::string alias;
    std::vector<ActionSpec> actions;      // document order

    int index_of(const std::string& action_id) const;  // -1 if absent
    const ActionSpec& at(const std::string& action_id) const;
    std::vector<std::string> roots() const;

    // Actions that can run when nothing fails: every node reachable from a
    // root without traversing a Failure edge. This is what gets timeline slots
    // up front; fallback branches are placed only if their trigger fires.
    std::vector<std::string> primary_actions() const;

    friend bool operator==(const RoutineDag&, const RoutineDag&) = default;
};

RoutineDag parse_routine(const std::string& json_text);
std::string serialize_routine(const RoutineDag& dag);

// Tracks fired milestones for one run of a routine and answers which actions
// may start next.
//
// An incoming edge is satisfied once its parent emitted the awaited event, and
// dead once the parent can never emit it (the parent failed first, completed
// when Failure was awaited, or is itself permanently blocked). An action is
// ready when every incoming edge is satisfied or dead and at least one is
// satisfied; an action whose edges are all dead is permanently blocked. This
// makes a parent's Failure-children and its Complete-descendants mutually
// exclusive on any single run while plain multi-parent joins stay conjunctive.
class FiringState {
public:
    explicit FiringState(const RoutineDag& dag);

    void record(const std::string& action_id, EdgeKind event);
    void mark_dispatched(const std::string& action_id);

    bool fired(const std::string& action_id, EdgeKind event) const;
    bool dispatched(const std::string& action_id) const;

    std::vector<std::string> ready_children() const;   // document order
    std::set<std::string> permanently_blocked() const;
    bool settled() const;  // every action dispatched or permanently blocked

private:
    const RoutineDag* dag_;
    std::map<std::string, std::set<EdgeKind>> events_;
    std::set<std::string> dispatched_;

    bool edge_satisfied(const DependencyEdge& e) const;
    bool edge_dead(const DependencyEdge& e, const std::set<std::string>& blocked) const;
};

}  // namespace rasc
