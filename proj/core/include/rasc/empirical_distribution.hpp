#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rasc/keys.hpp"

namespace rasc {

struct DriftReport {
    double wasserstein = 0.0;
    bool stable = false;
    std::size_t samples_to_stability = 0;  // 0 while the stream has never stabilized
};

// Histogram-backed duration model for one transition population.
//
// The density is the histogram smoothed by linear interpolation between bin
// centers (flat extension from the outermost centers to the support edges), so
// pdf is continuous, integrates to exactly the total mass, and has a slope
// almost everywhere. All mass/quantile queries are exact integrals of that
// piecewise-linear density, not of the raw step histogram.
//
// Snapshots are immutable: observe() returns a new version. Recent samples
// dominate the fit; samples older than the sliding window decay geometrically
// so that the model re-converges after a distribution change.
class EmpiricalDistribution {
public:
    static constexpr int kDefaultBins = 64;
    static constexpr double kEdgeHeadroom = 1.05;
    static constexpr std::size_t kWindow = 200;
    static constexpr double kDecay = 0.9;        // weight ratio per sample beyond the window
    static constexpr int kStableStreak = 2;      // consecutive small-change steps to latch stable
    static constexpr double kStableTol = 0.05;   // relative mean/variance change threshold

    EmpiricalDistribution() = default;

    // Batch fit. Requires at least 3 samples, all positive.
    static EmpiricalDistribution fit(const std::vector<double>& samples, int bins = kDefaultBins);

    // Construct directly from a histogram (edges.size() == mass.size()+1, edges
    // ascending from 0, mass nonnegative). Mass is normalized. The result has
    // no sample backing: observe() is not available on it.
    static EmpiricalDistribution from_bins(std::vector<double> edges, std::vector<double> mass,
                                           std::size_t n = 0);

    // New snapshot with one more sample appended (and the fit rebuilt).
    EmpiricalDistribution observe(double sample) const;

    bool trained() const { return !mass_.empty(); }
    bool sample_backed() const { return !samples_.empty(); }
    std::size_t sample_count() const { return n_; }

    double pdf(double t) const;
    double pdf_slope(double t) const;  // derivative of pdf, right-continuous at kinks
    double cdf(double t) const;
    double ppf(double q) const;        // generalized inverse: smallest t with cdf(t) >= q
    double upper_bound() const { return ppf(0.99); }
    double mass_between(double a, double b) const;
    double partial_mean(double x) const;  // integral of t*pdf(t) over [0, x]

    double mean() const;      // weighted sample mean (histogram moment if bin-built)
    double variance() const;
    double support_end() const;
    double bin_width() const;

    DriftReport drift_check(std::size_t window) const;

    // Stream convergence: set once mean and variance have changed by less than
    // kStableTol on kStableStreak consecutive observations, then latched.
    bool stable() const { return stable_at_ > 0 && n_ >= stable_at_; }
    std::size_t samples_to_stability() const { return stable_at_; }  // 0 if never reached

    // Exact 1-Wasserstein (earthmover) distance between the two fitted densities.
    static double wasserstein(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

    std::string to_json(const TransitionKey& key) const;
    static std::pair<TransitionKey, EmpiricalDistribution> from_json(const std::string& text);

    const std::vector<double>& bin_edges() const { return edges_; }
    const std::vector<double>& bin_mass() const { return mass_; }

private:
    std::vector<double> samples_;  // oldest first
    std::vector<double> edges_;    // bins+1 ascending, edges_[0] == 0
    std::vector<double> mass_;     // normalized to 1
    int bins_ = kDefaultBins;
    std::size_t n_ = 0;

    // stability bookkeeping, carried across observe() snapshots
    int streak_ = 0;
    std::size_t stable_at_ = 0;
    double prev_mean_ = 0.0, prev_var_ = 0.0;
    bool have_prev_ = false;

    // derived piecewise-linear density: nodes (t, d) with linear interpolation
    std::vector<double> node_t_, node_d_, node_cum_;  // node_cum_[i] = cdf(node_t_[i])

    void refit();
    void rebuild_nodes();
    double weight_of(std::size_t idx) const;  // idx into samples_, oldest first
    void require_trained() const;
};

}  // namespace rasc
