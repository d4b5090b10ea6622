#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rasc/routine_dag.hpp"

namespace rasc {

// Deterministic random source. The mt19937_64 engine's output sequence is
// pinned by the standard, and every value transform here is hand-written, so
// the same seed gives bit-identical draws on any toolchain. Never swap these
// for std::normal_distribution and friends: their algorithms are
// implementation-defined and would break trace reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    double uniform();                         // [0, 1)
    double uniform(double lo, double hi);
    double normal(double mu, double sigma);   // Box-Muller, spare cached
    double exponential(double rate);
    std::uint64_t below(std::uint64_t n);     // unbiased integer in [0, n)

    // Independent stream for one action's ground truth, so a duration draw
    // depends only on identity, never on the order the event loop reaches it.
    static Rng for_action(std::uint64_t seed, int routine_idx, int action_idx);

private:
    std::mt19937_64 eng_;
    std::optional<double> spare_;
};

enum class DeviceMode { Pull, Push };
enum class BusyPolicy { Reject, Queue };

struct DeviceSpec {
    std::string id;
    std::string device_class;   // "door", "shade", "thermostat", "light", "plug"
    DeviceMode mode = DeviceMode::Pull;
    BusyPolicy busy_policy = BusyPolicy::Queue;
    double min_poll_interval = 0.1;
};

// Ground truth for how long one action class physically takes: a Gaussian
// resampled until positive (all catalog means sit far from zero).
struct DurationLaw {
    double mean = 5.0;
    double sigma = 0.5;

    double sample(Rng& rng) const;
};

// Detection tolerance for a device class. Doors are expected to react within
// 2 s, shades within 3 s, thermostats within 30 s; anything else gets 5 s.
double default_qw(const std::string& device_class);

// device_class -> action -> physical duration law, means matching the
// training corpus in data/traces.csv.
const std::map<std::string, std::map<std::string, DurationLaw>>& builtin_laws();

enum class ArrivalProcess { Random, RandomPlusBursty };

const char* to_string(ArrivalProcess p);
ArrivalProcess arrival_process_from_string(const std::string& s);

struct WorkloadSpec {
    std::vector<RoutineDag> routines;
    std::vector<double> arrivals;   // one per routine, same order
    ArrivalProcess process = ArrivalProcess::Random;
    double horizon = 3600.0;
    std::uint64_t seed = 1;
};

struct GeneratorConfig {
    int routines = 20;
    std::vector<DeviceSpec> devices;
    ArrivalProcess process = ArrivalProcess::Random;
    double horizon = 3600.0;
    std::uint64_t seed = 1;
    int min_actions = 1;
    int max_actions = 4;
    double start_edge_fraction = 0.15;  // chance a dependency rides Start instead of Complete
    double join_fraction = 0.15;        // chance a later action takes a second parent
};

// Mixed-class device fleet: mostly lights, doors, shades and plugs, with one
// thermostat for every full group of ten.
std::vector<DeviceSpec> default_devices(int count);

// n arrival offsets in [0, horizon), ascending. Random spreads them uniformly;
// the bursty variant keeps half uniform and gathers the rest into three
// Gaussian peaks at quarter points of the horizon.
std::vector<double> draw_arrivals(int n, ArrivalProcess process, double horizon, Rng& rng);

WorkloadSpec make_workload(const GeneratorConfig& cfg);

std::string workload_to_json(const WorkloadSpec& w);
WorkloadSpec workload_from_json(const std::string& text);
std::string devices_to_json(const std::vector<DeviceSpec>& devs);
std::vector<DeviceSpec> devices_from_json(const std::string& text);

}  // namespace rasc
