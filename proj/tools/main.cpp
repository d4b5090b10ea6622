#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli_lib.hpp"
#include "rasc/errors.hpp"
#include "rasc/workload.hpp"

namespace {

// "class=seconds" pairs from repeated --qw flags
bool parse_qw_overrides(const std::vector<std::string>& raw, std::map<std::string, double>& out) {
    for (const auto& s : raw) {
        auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            std::cerr << "error: --qw expects class=seconds, got '" << s << "'\n";
            return false;
        }
        char* end = nullptr;
        double val = std::strtod(s.c_str() + eq + 1, &end);
        if (end == s.c_str() + eq + 1 || *end != '\0' || val <= 0.0) {
            std::cerr << "error: --qw expects a positive duration, got '" << s << "'\n";
            return false;
        }
        out[s.substr(0, eq)] = val;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rasc: fit duration models, run lifecycle experiments, compare reports"};
    app.require_subcommand(1);

    std::string traces_path, fit_out;
    auto* fit = app.add_subcommand("fit", "fit per-key duration distributions from a trace CSV");
    fit->add_option("--traces", traces_path, "training CSV (device,action,transition,duration_s)")
        ->required();
    fit->add_option("--out", fit_out, "output distributions JSON")->required();

    std::string config_path, run_out;
    std::uint64_t seed_override = 0;
    double slo_override = 0.0;
    std::vector<std::string> qw_raw;
    auto* run = app.add_subcommand("run", "run one experiment config across its policy/seed grid");
    run->add_option("--config", config_path, "experiment config JSON")->required();
    run->add_option("--out", run_out, "report output directory")->required();
    auto* seed_opt = run->add_option("--seed", seed_override, "run only this seed");
    auto* slo_opt = run->add_option("--slo", slo_override, "override the config's detection SLO");
    run->add_option("--qw", qw_raw, "override one class tolerance, class=seconds (repeatable)");

    std::vector<std::string> report_paths;
    auto* compare = app.add_subcommand("compare", "tabulate reports against the first one");
    compare->add_option("reports", report_paths, "MetricsReport JSON files (first is baseline)")
        ->expected(-1);

    int gen_routines = 20, gen_devices = 8;
    double gen_horizon = 600.0;
    std::uint64_t gen_seed = 1;
    std::string gen_process = "random", gen_workload_out, gen_devices_out;
    auto* gen = app.add_subcommand("gen", "generate a workload and device fleet as JSON inputs");
    gen->add_option("--routines", gen_routines, "number of routines");
    gen->add_option("--devices", gen_devices, "fleet size");
    gen->add_option("--process", gen_process, "arrival process: random or random+bursty");
    gen->add_option("--horizon", gen_horizon, "arrival window in seconds");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out-workload", gen_workload_out, "workload JSON path")->required();
    gen->add_option("--out-devices", gen_devices_out, "device fleet JSON path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? rasc::cli::kOk : rasc::cli::kBadInput;
    }

    if (fit->parsed()) return rasc::cli::cmd_fit(traces_path, fit_out, std::cout, std::cerr);

    if (run->parsed()) {
        rasc::cli::RunOverrides ov;
        if (*seed_opt) ov.seed = seed_override;
        if (*slo_opt) ov.slo = slo_override;
        if (!parse_qw_overrides(qw_raw, ov.qw)) return rasc::cli::kBadInput;
        return rasc::cli::cmd_run(config_path, run_out, ov, std::cout, std::cerr);
    }

    if (compare->parsed())
        return rasc::cli::cmd_compare(report_paths, std::cout, std::cerr);

    // gen
    if (gen_routines < 1 || gen_devices < 1) {
        std::cerr << "error: gen needs at least one routine and one device\n";
        return rasc::cli::kBadInput;
    }
    rasc::GeneratorConfig cfg;
    cfg.routines = gen_routines;
    cfg.devices = rasc::default_devices(gen_devices);
    cfg.horizon = gen_horizon;
    cfg.seed = gen_seed;
    try {
        cfg.process = rasc::arrival_process_from_string(gen_process);
    } catch (const rasc::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rasc::cli::kBadInput;
    }
    return rasc::cli::cmd_gen(cfg, gen_workload_out, gen_devices_out, std::cout, std::cerr);
}
