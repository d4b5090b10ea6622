#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rasc/empirical_distribution.hpp"
#include "rasc/simulator.hpp"
#include "rasc/workload.hpp"

// Command implementations for the rasc binary, kept out of main() so tests
// can call them with string streams instead of spawning processes.
namespace rasc::cli {

// process exit contract: flag/file/config problems are the caller's fault,
// everything else that goes wrong mid-run is ours
inline constexpr int kOk = 0;
inline constexpr int kBadInput = 1;
inline constexpr int kRuntime = 2;

struct PolicyChoice {
    SchedulerPolicy scheduler = SchedulerPolicy::PlannedStf;
    PollingPolicy polling = PollingPolicy::Adaptive;

    std::string str() const;  // "planned_stf+adaptive", used in filenames and tables
};

// One named experiment: a workload and device fleet, a training trace to fit
// duration models from, and the (policy, seed) grid to sweep. Relative paths
// are resolved against the directory containing the config file.
struct ExperimentConfig {
    std::string name;
    std::string workload_path;
    std::string devices_path;
    std::string traces_path;
    std::vector<PolicyChoice> policies;
    std::map<std::string, double> qw_by_class;  // per device class, seconds
    double slo = 0.9;
    std::vector<std::uint64_t> seeds;
    double network_delay = 0.0;
    double perturbation = 0.0;
    double reactive_threshold = 1.0;
};

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir);

// Command-line overrides applied on top of the config file.
struct RunOverrides {
    std::optional<std::uint64_t> seed;  // replaces the whole seed list
    std::optional<double> slo;
    std::map<std::string, double> qw;
};

// Reads the training CSV (header device,action,transition,duration_s).
// Malformed rows are skipped and described in `problems`, one entry per row,
// with their 1-based line numbers.
std::map<TransitionKey, std::vector<double>> parse_trace_csv(std::istream& in,
                                                             std::vector<std::string>& problems);

// Batch-fits every key. Throws ValidationError naming the key if any
// population has fewer than 3 samples, or if there are no keys at all.
std::map<TransitionKey, EmpiricalDistribution> fit_all(
    const std::map<TransitionKey, std::vector<double>>& samples);

std::string distributions_to_json(const std::map<TransitionKey, EmpiricalDistribution>& dists);
std::map<TransitionKey, EmpiricalDistribution> distributions_from_json(const std::string& text);

int cmd_fit(const std::string& traces_path, const std::string& out_path, std::ostream& out,
            std::ostream& err);

int cmd_run(const std::string& config_path, const std::string& out_dir, const RunOverrides& ov,
            std::ostream& out, std::ostream& err);

int cmd_compare(const std::vector<std::string>& report_paths, std::ostream& out,
                std::ostream& err);

// Writes a generated workload and its device fleet as JSON, for building
// experiment inputs that are then checked in and shared.
int cmd_gen(const GeneratorConfig& cfg, const std::string& workload_path,
            const std::string& devices_path, std::ostream& out, std::ostream& err);

}  // namespace rasc::cli
