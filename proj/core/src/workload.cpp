#include "rasc/workload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "rasc/errors.hpp"

namespace rasc {

namespace {

// splitmix64: scrambles correlated seeds (consecutive integers, xor mixes)
// into well-separated engine states.
std::uint64_t splitmix(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::mt19937_64 seeded_engine(std::uint64_t seed) {
    std::uint64_t s = seed;
    std::seed_seq seq{splitmix(s), splitmix(s), splitmix(s), splitmix(s)};
    return std::mt19937_64(seq);
}

constexpr double kTwoPi = 6.283185307179586;

}  // namespace

Rng::Rng(std::uint64_t seed) : eng_(seeded_engine(seed)) {}

double Rng::uniform() {
    // 53 random bits over [0,1), the usual double-precision ladder
    return (eng_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal(double mu, double sigma) {
    if (spare_) {
        double z = *spare_;
        spare_.reset();
        return mu + sigma * z;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    return mu + sigma * r * std::cos(kTwoPi * u2);
}

double Rng::exponential(double rate) {
    double u = uniform();
    while (u <= 1e-300) u = uniform();
    return -std::log(u) / rate;
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ValidationError("below(0) has no valid range");
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                          std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = eng_();
    while (v >= limit) v = eng_();
    return v % n;
}

Rng Rng::for_action(std::uint64_t seed, int routine_idx, int action_idx) {
    std::uint64_t s = seed;
    std::uint64_t a = splitmix(s);
    s = a ^ (static_cast<std::uint64_t>(routine_idx) * 0x9e3779b97f4a7c15ULL + 0x1234);
    std::uint64_t b = splitmix(s);
    s = b ^ (static_cast<std::uint64_t>(action_idx) * 0xbf58476d1ce4e5b9ULL + 0x5678);
    return Rng(splitmix(s));
}

double DurationLaw::sample(Rng& rng) const {
    double v = rng.normal(mean, sigma);
    while (v < 0.05) v = rng.normal(mean, sigma);
    return v;
}

double default_qw(const std::string& device_class) {
    if (device_class == "door") return 2.0;
    if (device_class == "shade") return 3.0;
    if (device_class == "thermostat") return 30.0;
    return 5.0;
}

const std::map<std::string, std::map<std::string, DurationLaw>>& builtin_laws() {
    static const std::map<std::string, std::map<std::string, DurationLaw>> laws = {
        {"door", {{"open", {3.06, 0.30}}, {"close", {3.19, 0.30}}}},
        {"shade", {{"up", {29.64, 2.00}}, {"down", {27.45, 2.00}}}},
        {"thermostat", {{"set", {432.17, 30.0}}}},
        {"light", {{"on", {1.20, 0.15}}, {"off", {1.10, 0.15}}}},
        {"plug", {{"on", {2.50, 0.30}}, {"off", {2.30, 0.30}}}},
    };
    return laws;
}

const char* to_string(ArrivalProcess p) {
    return p == ArrivalProcess::Random ? "random" : "random+bursty";
}

ArrivalProcess arrival_process_from_string(const std::string& s) {
    if (s == "random") return ArrivalProcess::Random;
    if (s == "random+bursty") return ArrivalProcess::RandomPlusBursty;
    throw ValidationError("unknown arrival process '" + s + "'");
}

std::vector<DeviceSpec> default_devices(int count) {
    static const char* pattern[] = {"light", "door",  "shade", "plug",      "light",
                                    "door",  "shade", "plug",  "light", "thermostat"};
    std::vector<DeviceSpec> out;
    std::map<std::string, int> counts;
    for (int i = 0; i < count; ++i) {
        DeviceSpec d;
        d.device_class = pattern[i % 10];
        d.id = d.device_class + std::to_string(++counts[d.device_class]);
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<double> draw_arrivals(int n, ArrivalProcess process, double horizon, Rng& rng) {
    std::vector<double> out;
    out.reserve(n);
    int uniform_n = process == ArrivalProcess::Random ? n : n - 3 * (n / 6);
    for (int i = 0; i < uniform_n; ++i) out.push_back(rng.uniform(0.0, horizon));
    if (process == ArrivalProcess::RandomPlusBursty) {
        double centers[] = {0.25 * horizon, 0.50 * horizon, 0.75 * horizon};
        double sigma = horizon / 40.0;
        for (double c : centers)
            for (int i = 0; i < n / 6; ++i) {
                double t = rng.normal(c, sigma);
                out.push_back(std::clamp(t, 0.0, std::nextafter(horizon, 0.0)));
            }
    }
    std::sort(out.begin(), out.end());
    return out;
}

WorkloadSpec make_workload(const GeneratorConfig& cfg) {
    if (cfg.devices.empty()) throw ValidationError("workload generator needs at least one device");
    if (cfg.min_actions < 1 || cfg.max_actions < cfg.min_actions)
        throw ValidationError("bad action count range");

    const auto& laws = builtin_laws();
    for (const auto& d : cfg.devices)
        if (!laws.count(d.device_class))
            throw ValidationError("no duration law for device class '" + d.device_class + "'");

    WorkloadSpec w;
    w.process = cfg.process;
    w.horizon = cfg.horizon;
    w.seed = cfg.seed;

    Rng rng(cfg.seed ^ 0x9d2c5680ULL);
    for (int r = 0; r < cfg.routines; ++r) {
        RoutineDag dag;
        dag.id = "r" + std::to_string(r + 1);

        int span = cfg.max_actions - cfg.min_actions + 1;
        int n = cfg.min_actions + static_cast<int>(rng.below(span));
        n = std::min<int>(n, cfg.devices.size());

        // distinct devices per routine, drawn without replacement
        std::vector<int> pool(cfg.devices.size());
        for (size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
        for (int j = 0; j < n; ++j)
            std::swap(pool[j], pool[j + rng.below(pool.size() - j)]);

        for (int j = 0; j < n; ++j) {
            const DeviceSpec& dev = cfg.devices[pool[j]];
            const auto& actions = laws.at(dev.device_class);
            auto pick = actions.begin();
            std::advance(pick, rng.below(actions.size()));

            ActionSpec a;
            a.id = "a" + std::to_string(j + 1);
            a.device = dev.id;
            a.action = pick->first;
            if (j > 0) {
                int parent = j == 1 ? 0 : static_cast<int>(rng.below(j));
                EdgeKind kind =
                    rng.uniform() < cfg.start_edge_fraction ? EdgeKind::Start : EdgeKind::Complete;
                a.after.push_back({dag.actions[parent].id, kind});
                if (j >= 2 && rng.uniform() < cfg.join_fraction) {
                    int second = static_cast<int>(rng.below(j));
                    if (second != parent)
                        a.after.push_back({dag.actions[second].id, EdgeKind::Complete});
                }
            }
            dag.actions.push_back(std::move(a));
        }
        // round-trip through the parser to rebuild indexes, roots and the
        // primary skeleton, and to catch any structural slip immediately
        w.routines.push_back(parse_routine(serialize_routine(dag)));
    }

    w.arrivals = draw_arrivals(cfg.routines, cfg.process, cfg.horizon, rng);
    return w;
}

namespace {

nlohmann::json device_to_json(const DeviceSpec& d) {
    return {{"id", d.id},
            {"class", d.device_class},
            {"mode", d.mode == DeviceMode::Pull ? "pull" : "push"},
            {"busy_policy", d.busy_policy == BusyPolicy::Reject ? "reject" : "queue"},
            {"min_poll_interval", d.min_poll_interval}};
}

DeviceSpec device_from_json(const nlohmann::json& j) {
    DeviceSpec d;
    d.id = j.at("id").get<std::string>();
    d.device_class = j.at("class").get<std::string>();
    std::string mode = j.value("mode", "pull");
    if (mode == "pull")
        d.mode = DeviceMode::Pull;
    else if (mode == "push")
        d.mode = DeviceMode::Push;
    else
        throw ValidationError("unknown device mode '" + mode + "'");
    std::string busy = j.value("busy_policy", "queue");
    if (busy == "reject")
        d.busy_policy = BusyPolicy::Reject;
    else if (busy == "queue")
        d.busy_policy = BusyPolicy::Queue;
    else
        throw ValidationError("unknown busy policy '" + busy + "'");
    d.min_poll_interval = j.value("min_poll_interval", 0.1);
    return d;
}

}  // namespace

std::string workload_to_json(const WorkloadSpec& w) {
    nlohmann::json j;
    j["process"] = to_string(w.process);
    j["horizon"] = w.horizon;
    j["seed"] = w.seed;
    j["routines"] = nlohmann::json::array();
    for (const auto& r : w.routines) j["routines"].push_back(nlohmann::json::parse(serialize_routine(r)));
    j["arrivals"] = w.arrivals;
    return j.dump(2);
}

WorkloadSpec workload_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad workload JSON: ") + e.what());
    }
    WorkloadSpec w;
    try {
        w.process = arrival_process_from_string(j.value("process", "random"));
        w.horizon = j.value("horizon", 3600.0);
        w.seed = j.value("seed", std::uint64_t{1});
        for (const auto& r : j.at("routines")) w.routines.push_back(parse_routine(r.dump()));
        if (j.contains("arrivals")) w.arrivals = j.at("arrivals").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad workload JSON: ") + e.what());
    }
    if (!w.arrivals.empty() && w.arrivals.size() != w.routines.size())
        throw ValidationError("arrivals and routines disagree in length");
    return w;
}

std::string devices_to_json(const std::vector<DeviceSpec>& devs) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& d : devs) j.push_back(device_to_json(d));
    return j.dump(2);
}

std::vector<DeviceSpec> devices_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad device JSON: ") + e.what());
    }
    std::vector<DeviceSpec> out;
    try {
        for (const auto& item : j) out.push_back(device_from_json(item));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad device JSON: ") + e.what());
    }
    return out;
}

}  // namespace rasc
