#include "rasc/empirical_distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace rasc {

namespace {

// integral of |a*t^2 + b*t + c| over [t0, t1]
double integrate_abs_quadratic(double a, double b, double c, double t0, double t1) {
    auto F = [&](double t) { return a * t * t * t / 3.0 + b * t * t / 2.0 + c * t; };
    double roots[2];
    int nroots = 0;
    const double tiny = 1e-300;
    if (std::fabs(a) > tiny) {
        double disc = b * b - 4.0 * a * c;
        if (disc > 0.0) {
            double sq = std::sqrt(disc);
            // numerically stable pair
            double q = -0.5 * (b + (b >= 0 ? sq : -sq));
            double r1 = q / a;
            double r2 = (std::fabs(q) > tiny) ? c / q : r1;
            if (r1 > r2) std::swap(r1, r2);
            if (r1 > t0 && r1 < t1) roots[nroots++] = r1;
            if (r2 > t0 && r2 < t1 && r2 != r1) roots[nroots++] = r2;
        }
    } else if (std::fabs(b) > tiny) {
        double r = -c / b;
        if (r > t0 && r < t1) roots[nroots++] = r;
    }
    double acc = 0.0, lo = t0;
    for (int i = 0; i <= nroots; ++i) {
        double hi = (i < nroots) ? roots[i] : t1;
        acc += std::fabs(F(hi) - F(lo));
        lo = hi;
    }
    return acc;
}

}  // namespace

void EmpiricalDistribution::require_trained() const {
    if (!trained())
        throw ValidationError("distribution is untrained (needs at least 3 observed samples)");
}

double EmpiricalDistribution::weight_of(std::size_t idx) const {
    std::size_t recency = n_ - 1 - idx;
    if (recency < kWindow) return 1.0;
    return std::pow(kDecay, static_cast<double>(recency - kWindow + 1));
}

EmpiricalDistribution EmpiricalDistribution::fit(const std::vector<double>& samples, int bins) {
    if (samples.size() < 3)
        throw ValidationError("need at least 3 samples to fit, got " +
                              std::to_string(samples.size()));
    if (bins < 1) throw ValidationError("bin count must be positive");
    EmpiricalDistribution d;
    d.bins_ = bins;
    d.samples_ = samples;
    d.n_ = samples.size();
    for (double s : samples)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw ValidationError("durations must be finite and nonnegative");
    d.refit();
    return d;
}

EmpiricalDistribution EmpiricalDistribution::from_bins(std::vector<double> edges,
                                                       std::vector<double> mass, std::size_t n) {
    if (edges.size() != mass.size() + 1 || mass.empty())
        throw ValidationError("from_bins: edges must be one longer than mass");
    if (edges.front() != 0.0) throw ValidationError("from_bins: edges must start at 0");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw ValidationError("from_bins: edges must be strictly ascending");
    double total = 0.0;
    for (double m : mass) {
        if (m < 0.0) throw ValidationError("from_bins: negative mass");
        total += m;
    }
    if (total <= 0.0) throw ValidationError("from_bins: zero total mass");
    for (double& m : mass) m /= total;

    EmpiricalDistribution d;
    d.bins_ = static_cast<int>(mass.size());
    d.edges_ = std::move(edges);
    d.mass_ = std::move(mass);
    d.n_ = n;
    d.rebuild_nodes();
    return d;
}

EmpiricalDistribution EmpiricalDistribution::observe(double sample) const {
    if (!sample_backed() && trained())
        throw ValidationError("cannot observe() on a histogram-only distribution");
    if (!(sample >= 0.0) || !std::isfinite(sample))
        throw ValidationError("durations must be finite and nonnegative");

    EmpiricalDistribution d = *this;
    d.samples_.push_back(sample);
    d.n_ = d.samples_.size();
    if (d.n_ >= 3) d.refit();

    // Convergence bookkeeping: the stream is called stable once the weighted
    // mean and variance have both moved by less than kStableTol on
    // kStableStreak consecutive samples. The flag latches; per-step noise at
    // larger n must not flip an already-converged stream back.
    if (d.n_ >= 2) {
        double w = 0.0, m = 0.0;
        for (std::size_t i = 0; i < d.n_; ++i) {
            double wi = d.weight_of(i);
            w += wi;
            m += wi * d.samples_[i];
        }
        m /= w;
        double ss = 0.0, w2 = 0.0;
        for (std::size_t i = 0; i < d.n_; ++i) {
            double wi = d.weight_of(i);
            ss += wi * (d.samples_[i] - m) * (d.samples_[i] - m);
            w2 += wi * wi;
        }
        double denom = w - w2 / w;
        double v = denom > 0.0 ? ss / denom : 0.0;
        if (d.have_prev_) {
            double mref = std::max(std::fabs(d.prev_mean_), 1e-12);
            double vref = std::max(std::fabs(d.prev_var_), 1e-12);
            bool small = std::fabs(m - d.prev_mean_) < kStableTol * mref &&
                         std::fabs(v - d.prev_var_) < kStableTol * vref;
            d.streak_ = small ? d.streak_ + 1 : 0;
            if (d.streak_ >= kStableStreak && d.stable_at_ == 0) d.stable_at_ = d.n_;
        }
        d.prev_mean_ = m;
        d.prev_var_ = v;
        d.have_prev_ = true;
    }
    return d;
}

void EmpiricalDistribution::refit() {
    double mx = 0.0;
    for (double s : samples_) mx = std::max(mx, s);
    if (mx <= 0.0) mx = 1.0;  // all-zero degenerate stream
    double end = kEdgeHeadroom * mx;
    edges_.assign(bins_ + 1, 0.0);
    for (int i = 0; i <= bins_; ++i) edges_[i] = end * i / bins_;

    mass_.assign(bins_, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double w = weight_of(i);
        int b = std::min(bins_ - 1, static_cast<int>(samples_[i] / end * bins_));
        mass_[b] += w;
        total += w;
    }
    for (double& m : mass_) m /= total;
    rebuild_nodes();
}

void EmpiricalDistribution::rebuild_nodes() {
    int B = bins_;
    double width = edges_[1] - edges_[0];
    node_t_.clear();
    node_d_.clear();
    node_t_.reserve(B + 2);
    node_d_.reserve(B + 2);
    node_t_.push_back(0.0);
    node_d_.push_back(mass_[0] / (edges_[1] - edges_[0]));
    for (int i = 0; i < B; ++i) {
        node_t_.push_back(0.5 * (edges_[i] + edges_[i + 1]));
        node_d_.push_back(mass_[i] / (edges_[i + 1] - edges_[i]));
    }
    node_t_.push_back(edges_.back());
    node_d_.push_back(mass_.back() / (edges_[B] - edges_[B - 1]));
    (void)width;

    // prefix integrals so cdf lookups stay O(log n)
    node_cum_.assign(node_t_.size(), 0.0);
    for (std::size_t i = 1; i < node_t_.size(); ++i) {
        double dt = node_t_[i] - node_t_[i - 1];
        node_cum_[i] = node_cum_[i - 1] + 0.5 * (node_d_[i] + node_d_[i - 1]) * dt;
    }
    // the trapezoid construction integrates to the exact total mass; renormalize
    // away the accumulated float error so cdf(support_end) is exactly 1
    double z = node_cum_.back();
    if (z > 0.0) {
        for (double& c : node_cum_) c /= z;
        for (double& d : node_d_) d /= z;
    }
}

double EmpiricalDistribution::pdf(double t) const {
    require_trained();
    if (t < 0.0 || t > node_t_.back()) return 0.0;
    auto it = std::upper_bound(node_t_.begin(), node_t_.end(), t);
    std::size_t hi = std::min<std::size_t>(it - node_t_.begin(), node_t_.size() - 1);
    if (hi == 0) return node_d_[0];
    std::size_t lo = hi - 1;
    double span = node_t_[hi] - node_t_[lo];
    if (span <= 0.0) return node_d_[hi];
    double f = (t - node_t_[lo]) / span;
    return node_d_[lo] + f * (node_d_[hi] - node_d_[lo]);
}

double EmpiricalDistribution::pdf_slope(double t) const {
    require_trained();
    if (t < 0.0 || t >= node_t_.back()) return 0.0;
    auto it = std::upper_bound(node_t_.begin(), node_t_.end(), t);
    std::size_t hi = std::min<std::size_t>(it - node_t_.begin(), node_t_.size() - 1);
    if (hi == 0) hi = 1;
    std::size_t lo = hi - 1;
    double span = node_t_[hi] - node_t_[lo];
    return span > 0.0 ? (node_d_[hi] - node_d_[lo]) / span : 0.0;
}

double EmpiricalDistribution::cdf(double t) const {
    require_trained();
    if (t <= 0.0) return 0.0;
    if (t >= node_t_.back()) return 1.0;
    auto it = std::upper_bound(node_t_.begin(), node_t_.end(), t);
    std::size_t hi = it - node_t_.begin();
    std::size_t lo = hi - 1;
    double span = node_t_[hi] - node_t_[lo];
    double x = t - node_t_[lo];
    double slope = span > 0.0 ? (node_d_[hi] - node_d_[lo]) / span : 0.0;
    return node_cum_[lo] + node_d_[lo] * x + 0.5 * slope * x * x;
}

double EmpiricalDistribution::ppf(double q) const {
    require_trained();
    if (!(q > 0.0) || q > 1.0) throw ValidationError("quantile must be in (0, 1]");
    auto it = std::lower_bound(node_cum_.begin(), node_cum_.end(), q);
    if (it == node_cum_.end()) return node_t_.back();
    std::size_t hi = it - node_cum_.begin();
    if (hi == 0) return node_t_.front();
    double lo_t = node_t_[hi - 1], hi_t = node_t_[hi];
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo_t + hi_t);
        if (cdf(mid) >= q)
            hi_t = mid;
        else
            lo_t = mid;
    }
    return hi_t;
}

double EmpiricalDistribution::mass_between(double a, double b) const {
    return cdf(b) - cdf(a);
}

double EmpiricalDistribution::partial_mean(double x) const {
    require_trained();
    if (x <= 0.0) return 0.0;
    x = std::min(x, node_t_.back());
    double acc = 0.0;
    for (std::size_t i = 1; i < node_t_.size(); ++i) {
        double t0 = node_t_[i - 1];
        if (t0 >= x) break;
        double t1 = std::min(node_t_[i], x);
        double span = node_t_[i] - t0;
        double slope = span > 0.0 ? (node_d_[i] - node_d_[i - 1]) / span : 0.0;
        double d0 = node_d_[i - 1];
        // integral of t * (d0 + slope*(t - t0)) over [t0, t1]
        double a2 = (t1 * t1 - t0 * t0) / 2.0;
        double a3 = (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
        acc += d0 * a2 + slope * (a3 - t0 * a2);
    }
    return acc;
}

double EmpiricalDistribution::mean() const {
    if (sample_backed()) {
        double w = 0.0, m = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double wi = weight_of(i);
            w += wi;
            m += wi * samples_[i];
        }
        return m / w;
    }
    require_trained();
    return partial_mean(node_t_.back());
}

double EmpiricalDistribution::variance() const {
    if (sample_backed()) {
        double w = 0.0, m = mean(), ss = 0.0, w2 = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            double wi = weight_of(i);
            w += wi;
            w2 += wi * wi;
            ss += wi * (samples_[i] - m) * (samples_[i] - m);
        }
        double denom = w - w2 / w;
        return denom > 0.0 ? ss / denom : 0.0;
    }
    require_trained();
    // second moment of the piecewise-linear density
    double acc = 0.0;
    for (std::size_t i = 1; i < node_t_.size(); ++i) {
        double t0 = node_t_[i - 1], t1 = node_t_[i];
        double span = t1 - t0;
        double slope = span > 0.0 ? (node_d_[i] - node_d_[i - 1]) / span : 0.0;
        double d0 = node_d_[i - 1];
        double a3 = (t1 * t1 * t1 - t0 * t0 * t0) / 3.0;
        double a4 = (t1 * t1 * t1 * t1 - t0 * t0 * t0 * t0) / 4.0;
        acc += d0 * a3 + slope * (a4 - t0 * a3);
    }
    double m = mean();
    return acc - m * m;
}

double EmpiricalDistribution::support_end() const {
    require_trained();
    return node_t_.back();
}

double EmpiricalDistribution::bin_width() const {
    require_trained();
    return edges_[1] - edges_[0];
}

DriftReport EmpiricalDistribution::drift_check(std::size_t window) const {
    if (!sample_backed())
        throw ValidationError("drift_check needs a sample-backed distribution");
    if (n_ < window + 3)
        throw ValidationError("drift_check window leaves fewer than 3 samples");
    std::vector<double> prefix(samples_.begin(), samples_.end() - window);
    EmpiricalDistribution reduced = fit(prefix, bins_);
    DriftReport r;
    r.wasserstein = wasserstein(*this, reduced);
    r.samples_to_stability = stable_at_;
    r.stable = stable_at_ > 0 && n_ >= stable_at_;
    return r;
}

double EmpiricalDistribution::wasserstein(const EmpiricalDistribution& a,
                                          const EmpiricalDistribution& b) {
    a.require_trained();
    b.require_trained();
    std::vector<double> knots;
    knots.reserve(a.node_t_.size() + b.node_t_.size());
    knots.insert(knots.end(), a.node_t_.begin(), a.node_t_.end());
    knots.insert(knots.end(), b.node_t_.begin(), b.node_t_.end());
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

    // On each segment both cdfs are quadratics in t, so their difference is
    // too; recover its coefficients from three samples and integrate |.| exactly.
    double acc = 0.0;
    for (std::size_t i = 1; i < knots.size(); ++i) {
        double t0 = knots[i - 1], t1 = knots[i];
        if (t1 <= t0) continue;
        double tm = 0.5 * (t0 + t1);
        double f0 = a.cdf(t0) - b.cdf(t0);
        double fm = a.cdf(tm) - b.cdf(tm);
        double f1 = a.cdf(t1) - b.cdf(t1);
        double h = t1 - t0;
        double A = 2.0 * (f0 - 2.0 * fm + f1) / (h * h);
        double B = (f1 - f0) / h - A * (t0 + t1);
        double C = f0 - A * t0 * t0 - B * t0;
        acc += integrate_abs_quadratic(A, B, C, t0, t1);
    }
    return acc;
}

std::string EmpiricalDistribution::to_json(const TransitionKey& key) const {
    require_trained();
    nlohmann::json j;
    j["key"] = key.str();
    j["bin_edges"] = edges_;
    j["bin_mass"] = mass_;
    j["n"] = n_;
    return j.dump();
}

std::pair<TransitionKey, EmpiricalDistribution> EmpiricalDistribution::from_json(
    const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad distribution JSON: ") + e.what());
    }
    if (!j.contains("key") || !j.contains("bin_edges") || !j.contains("bin_mass"))
        throw ValidationError("distribution JSON missing key/bin_edges/bin_mass");
    TransitionKey key = TransitionKey::parse(j["key"].get<std::string>());
    auto edges = j["bin_edges"].get<std::vector<double>>();
    auto mass = j["bin_mass"].get<std::vector<double>>();
    std::size_t n = j.value("n", std::size_t{0});
    return {key, from_bins(std::move(edges), std::move(mass), n)};
}

}  // namespace rasc
