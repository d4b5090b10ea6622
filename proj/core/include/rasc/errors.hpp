#pragma once

#include <stdexcept>
#include <string>

namespace rasc {

// Bad input: malformed files, out-of-range parameters, inconsistent documents.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// The requested responsiveness target cannot be met by any poll placement
// (e.g. the target is finer than the device's minimum polling interval).
class UnsupportableError : public std::runtime_error {
public:
    explicit UnsupportableError(const std::string& what) : std::runtime_error(what) {}
};

// No poll placement with the given budget reaches the horizon within tolerance.
class InfeasibleBudgetError : public std::runtime_error {
public:
    explicit InfeasibleBudgetError(const std::string& what) : std::runtime_error(what) {}
};

// Placement could not restore a conflict-serializable timetable.
class SchedulingError : public std::runtime_error {
public:
    explicit SchedulingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rasc
