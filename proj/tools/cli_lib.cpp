#include "cli_lib.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rasc/errors.hpp"
#include "rasc/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rasc::cli {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

// fixed short form so repeated runs produce identical bytes
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_absolute() || base_dir.empty()) return path.lexically_normal().string();
    return (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

std::string PolicyChoice::str() const {
    return std::string(to_string(scheduler)) + "+" + to_string(polling);
}

std::map<TransitionKey, std::vector<double>> parse_trace_csv(std::istream& in,
                                                             std::vector<std::string>& problems) {
    std::map<TransitionKey, std::vector<double>> out;
    std::string line;
    std::size_t lineno = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "device,action,transition,duration_s")
                throw ValidationError("line 1: expected header device,action,transition,duration_s");
            saw_header = true;
            continue;
        }
        std::vector<std::string> f;
        std::size_t pos = 0;
        while (true) {
            auto comma = line.find(',', pos);
            f.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        auto bad = [&](const std::string& why) {
            problems.push_back("line " + std::to_string(lineno) + ": " + why);
        };
        if (f.size() != 4) {
            bad("expected 4 fields, got " + std::to_string(f.size()));
            continue;
        }
        if (f[0].empty() || f[1].empty()) {
            bad("empty device or action field");
            continue;
        }
        TransitionKey key;
        try {
            key = TransitionKey{f[0], f[1], transition_from_string(f[2])};
        } catch (const ValidationError& e) {
            bad(e.what());
            continue;
        }
        errno = 0;
        char* end = nullptr;
        double dur = std::strtod(f[3].c_str(), &end);
        if (errno != 0 || end == f[3].c_str() || *end != '\0' || !std::isfinite(dur)) {
            bad("unparseable duration '" + f[3] + "'");
            continue;
        }
        if (dur <= 0.0) {
            bad("non-positive duration " + f[3]);
            continue;
        }
        out[key].push_back(dur);
    }
    if (!saw_header && lineno == 0) throw ValidationError("trace file is empty");
    return out;
}

std::map<TransitionKey, EmpiricalDistribution> fit_all(
    const std::map<TransitionKey, std::vector<double>>& samples) {
    if (samples.empty()) throw ValidationError("no usable trace rows to fit");
    std::map<TransitionKey, EmpiricalDistribution> out;
    for (const auto& [key, xs] : samples) {
        if (xs.size() < 3)
            throw ValidationError("key " + key.str() + " has only " + std::to_string(xs.size()) +
                                  " samples, need at least 3");
        out.emplace(key, EmpiricalDistribution::fit(xs));
    }
    return out;
}

std::string distributions_to_json(const std::map<TransitionKey, EmpiricalDistribution>& dists) {
    json arr = json::array();
    for (const auto& [key, d] : dists) arr.push_back(json::parse(d.to_json(key)));
    return arr.dump(2);
}

std::map<TransitionKey, EmpiricalDistribution> distributions_from_json(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad distributions JSON: ") + e.what());
    }
    if (!arr.is_array()) throw ValidationError("bad distributions JSON: expected an array");
    std::map<TransitionKey, EmpiricalDistribution> out;
    for (const auto& item : arr) out.insert(EmpiricalDistribution::from_json(item.dump()));
    return out;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad experiment config: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg.name = j.at("name").get<std::string>();
        cfg.workload_path = resolve(base_dir, j.at("workload").get<std::string>());
        cfg.devices_path = resolve(base_dir, j.at("devices").get<std::string>());
        cfg.traces_path = resolve(base_dir, j.at("traces").get<std::string>());
        for (const auto& p : j.at("policies"))
            cfg.policies.push_back(
                {scheduler_policy_from_string(p.at("scheduler").get<std::string>()),
                 polling_policy_from_string(p.at("polling").get<std::string>())});
        for (const auto& s : j.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
        if (j.count("qw"))
            for (const auto& [cls, val] : j.at("qw").items())
                cfg.qw_by_class[cls] = val.get<double>();
        if (j.count("slo")) cfg.slo = j.at("slo").get<double>();
        if (j.count("network_delay")) cfg.network_delay = j.at("network_delay").get<double>();
        if (j.count("perturbation")) cfg.perturbation = j.at("perturbation").get<double>();
        if (j.count("reactive_threshold"))
            cfg.reactive_threshold = j.at("reactive_threshold").get<double>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad experiment config: ") + e.what());
    }
    if (cfg.seeds.empty()) throw ValidationError("experiment config needs at least one seed");
    if (cfg.policies.empty()) throw ValidationError("experiment config needs at least one policy");
    for (const auto& p : {cfg.workload_path, cfg.devices_path, cfg.traces_path})
        if (!fs::exists(p)) throw ValidationError("referenced file '" + p + "' does not exist");
    return cfg;
}

int cmd_fit(const std::string& traces_path, const std::string& out_path, std::ostream& out,
            std::ostream& err) {
    try {
        std::ifstream in(traces_path, std::ios::binary);
        if (!in) {
            err << "error: cannot read '" << traces_path << "'\n";
            return kBadInput;
        }
        std::vector<std::string> problems;
        auto samples = parse_trace_csv(in, problems);
        for (const auto& p : problems) err << "warning: " << traces_path << ": " << p << "\n";
        auto dists = fit_all(samples);
        write_file(out_path, distributions_to_json(dists));
        for (const auto& [key, d] : dists)
            out << key.str() << "  n=" << d.sample_count() << "  mean=" << fmt(d.mean())
                << "  U=" << fmt(d.upper_bound()) << "\n";
        out << "wrote " << dists.size() << " distributions to " << out_path << "\n";
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir, const RunOverrides& ov,
            std::ostream& out, std::ostream& err) {
    try {
        ExperimentConfig cfg = parse_experiment_config(
            read_file(config_path), fs::path(config_path).parent_path().string());
        if (ov.seed) cfg.seeds = {*ov.seed};
        if (ov.slo) cfg.slo = *ov.slo;
        for (const auto& [cls, val] : ov.qw) cfg.qw_by_class[cls] = val;

        WorkloadSpec workload = workload_from_json(read_file(cfg.workload_path));
        auto devices = devices_from_json(read_file(cfg.devices_path));
        std::ifstream tin(cfg.traces_path, std::ios::binary);
        if (!tin) throw ValidationError("cannot read '" + cfg.traces_path + "'");
        std::vector<std::string> problems;
        auto learned = fit_all(parse_trace_csv(tin, problems));
        for (const auto& p : problems) err << "warning: " << cfg.traces_path << ": " << p << "\n";

        fs::create_directories(out_dir);
        // per (policy, metric): the per-seed means, pooled for the aggregate
        std::map<std::string, std::map<std::string, std::vector<double>>> pooled;
        int reports = 0;
        for (const auto& pol : cfg.policies) {
            for (auto seed : cfg.seeds) {
                SimConfig sc;
                sc.policy.scheduler = pol.scheduler;
                sc.policy.polling = pol.polling;
                sc.policy.slo = cfg.slo;
                sc.policy.qw_by_class = cfg.qw_by_class;
                sc.policy.network_delay = cfg.network_delay;
                sc.policy.perturbation = cfg.perturbation;
                sc.policy.reactive_threshold = cfg.reactive_threshold;
                sc.learned = learned;
                sc.seed = seed;
                SimOutcome run = run_simulation(workload, devices, sc);
                // every policy here keeps devices exclusive and admits a
                // serial witness, so a violation means a scheduler bug, not
                // an unlucky workload
                if (!run.safety_ok || !run.serial_ok)
                    throw std::runtime_error("run " + pol.str() + " seed " + std::to_string(seed) +
                                             " violated its execution guarantees");
                std::string fname = "report_" + pol.str() + "_seed" + std::to_string(seed) + ".json";
                write_file((fs::path(out_dir) / fname).string(), run.metrics.to_json());
                ++reports;
                auto& rows = pooled[pol.str()];
                for (const auto& [m, s] : run.metrics.metrics)
                    if (s.count > 0) rows[m].push_back(s.mean);
                for (const auto& [c, v] : run.metrics.counters) rows[c].push_back(v);
            }
        }

        std::ostringstream agg;
        agg << "policy,metric,mean,q50,q95\n";
        for (const auto& [pol, rows] : pooled)
            for (const auto& [m, xs] : rows) {
                MetricSummary s = summarize(xs);
                agg << pol << "," << m << ",";
                if (s.count == 0)
                    agg << "n/a,n/a,n/a\n";
                else
                    agg << fmt(s.mean) << "," << fmt(s.q50) << "," << fmt(s.q95) << "\n";
            }
        write_file((fs::path(out_dir) / "aggregate.csv").string(), agg.str());
        out << "wrote " << reports << " reports and aggregate.csv to " << out_dir << "\n";
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

int cmd_compare(const std::vector<std::string>& report_paths, std::ostream& out,
                std::ostream& err) {
    try {
        if (report_paths.size() < 2) throw ValidationError("compare needs at least two reports");
        std::vector<MetricsReport> reps;
        std::vector<std::string> names;
        for (const auto& p : report_paths) {
            reps.push_back(MetricsReport::from_json(read_file(p)));
            names.push_back(fs::path(p).stem().string());
        }
        auto schema = [](const MetricsReport& r) {
            std::vector<std::string> keys;
            for (const auto& [k, v] : r.metrics) keys.push_back(k);
            for (const auto& [k, v] : r.counters) keys.push_back("#" + k);
            return keys;
        };
        for (std::size_t i = 1; i < reps.size(); ++i)
            if (schema(reps[i]) != schema(reps[0]))
                throw ValidationError("report '" + names[i] + "' does not match the schema of '" +
                                      names[0] + "'");

        // one row per metric: the baseline's absolute mean, then each other
        // report as a relative delta against it
        const int name_w = 18, col_w = 14;
        out << std::left << std::setw(22) << "metric" << std::right << std::setw(col_w)
            << (names[0] + " (base)");
        for (std::size_t i = 1; i < names.size(); ++i) out << std::setw(col_w) << names[i];
        out << "\n";

        auto cell = [&](double base, bool base_ok, double val, bool val_ok) -> std::string {
            if (!base_ok || !val_ok) return "n/a";
            if (base == 0.0) return val == 0.0 ? "+0.0%" : "n/a";
            char buf[32];
            std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * (val - base) / base);
            return buf;
        };
        (void)name_w;

        for (const auto& [m, s0] : reps[0].metrics) {
            out << std::left << std::setw(22) << m << std::right << std::setw(col_w)
                << (s0.count ? fmt(s0.mean) : "n/a");
            for (std::size_t i = 1; i < reps.size(); ++i) {
                const auto& si = reps[i].metrics.at(m);
                out << std::setw(col_w) << cell(s0.mean, s0.count > 0, si.mean, si.count > 0);
            }
            out << "\n";
        }
        for (const auto& [c, v0] : reps[0].counters) {
            out << std::left << std::setw(22) << c << std::right << std::setw(col_w) << fmt(v0);
            for (std::size_t i = 1; i < reps.size(); ++i)
                out << std::setw(col_w) << cell(v0, true, reps[i].counters.at(c), true);
            out << "\n";
        }
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

int cmd_gen(const GeneratorConfig& cfg, const std::string& workload_path,
            const std::string& devices_path, std::ostream& out, std::ostream& err) {
    try {
        WorkloadSpec w = make_workload(cfg);
        write_file(workload_path, workload_to_json(w));
        write_file(devices_path, devices_to_json(cfg.devices));
        out << "wrote " << w.routines.size() << " routines over " << cfg.devices.size()
            << " devices to " << workload_path << " and " << devices_path << "\n";
        return kOk;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
}

}  // namespace rasc::cli
