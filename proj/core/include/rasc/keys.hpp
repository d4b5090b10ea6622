#pragma once

#include <string>
#include <tuple>

#include "rasc/errors.hpp"

namespace rasc {

// The two timed legs of an action's lifecycle. Request->Ack is treated as
// instantaneous RPC turnaround and is not modeled as a distribution.
enum class Transition { AckToStart, StartToComplete };

inline const char* to_string(Transition t) {
    return t == Transition::AckToStart ? "ack_to_start" : "start_to_complete";
}

inline Transition transition_from_string(const std::string& s) {
    if (s == "ack_to_start") return Transition::AckToStart;
    if (s == "start_to_complete") return Transition::StartToComplete;
    throw ValidationError("unknown transition '" + s + "'");
}

// Identifies one learned duration population: a device, an action kind on it,
// and which lifecycle leg is being timed.
struct TransitionKey {
    std::string device;
    std::string action;
    Transition transition = Transition::StartToComplete;

    std::string str() const {
        return device + "|" + action + "|" + to_string(transition);
    }

    static TransitionKey parse(const std::string& s) {
        auto a = s.find('|');
        auto b = s.rfind('|');
        if (a == std::string::npos || b == a)
            throw ValidationError("bad transition key '" + s + "' (want device|action|transition)");
        return TransitionKey{s.substr(0, a), s.substr(a + 1, b - a - 1),
                             transition_from_string(s.substr(b + 1))};
    }

    friend bool operator==(const TransitionKey& x, const TransitionKey& y) {
        return x.device == y.device && x.action == y.action && x.transition == y.transition;
    }
    friend bool operator<(const TransitionKey& x, const TransitionKey& y) {
        return std::tie(x.device, x.action, x.transition) <
               std::tie(y.device, y.action, y.transition);
    }
};

}  // namespace rasc
