#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rasc/empirical_distribution.hpp"
#include "rasc/errors.hpp"

using rasc::EmpiricalDistribution;
using rasc::TransitionKey;
using rasc::Transition;

namespace {

// Exact flat density on [0, hi]: equal mass per bin interpolates to a constant.
EmpiricalDistribution uniform_dist(double hi, int bins = 10) {
    std::vector<double> edges, mass;
    for (int i = 0; i <= bins; ++i) edges.push_back(hi * i / bins);
    mass.assign(bins, 1.0 / bins);
    return EmpiricalDistribution::from_bins(edges, mass, 100);
}

// Histogram of Exp(rate) truncated to [0, hi]; linear interpolation makes this
// only approximately exponential, which is all the tests below need.
EmpiricalDistribution exp_dist(double rate, double hi, int bins = 64) {
    std::vector<double> edges, mass;
    for (int i = 0; i <= bins; ++i) edges.push_back(hi * i / bins);
    for (int i = 0; i < bins; ++i)
        mass.push_back(std::exp(-rate * edges[i]) - std::exp(-rate * edges[i + 1]));
    return EmpiricalDistribution::from_bins(edges, mass, 500);
}

std::vector<double> stratified_normal(double mu, double sigma, int n) {
    // deterministic "samples": inverse-cdf at midpoints of n equal strata,
    // shuffled so the fit's recency weighting sees a stationary stream
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        double q = (i + 0.5) / n;
        // Acklam-style rational approximation is overkill; bisect the erf.
        double lo = mu - 8 * sigma, hi = mu + 8 * sigma;
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            double c = 0.5 * (1 + std::erf((mid - mu) / (sigma * std::sqrt(2.0))));
            (c < q ? lo : hi) = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    std::mt19937 gen(12345);
    std::shuffle(out.begin(), out.end(), gen);
    return out;
}

}  // namespace

TEST_CASE("flat histogram gives an exactly flat density") {
    auto d = uniform_dist(10.0);
    CHECK(d.pdf(0.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.pdf(3.7) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.pdf(10.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d.cdf(5.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.ppf(0.99) == doctest::Approx(9.9).epsilon(1e-9));
    CHECK(d.mass_between(2.0, 4.0) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("density integrates to one and cdf/ppf round-trip") {
    auto samples = stratified_normal(30.0, 2.0, 400);
    auto d = EmpiricalDistribution::fit(samples);
    CHECK(d.mass_between(0.0, d.support_end()) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.cdf(d.support_end()) == doctest::Approx(1.0).epsilon(1e-9));
    for (double q : {0.01, 0.25, 0.5, 0.9, 0.99})
        CHECK(d.cdf(d.ppf(q)) == doctest::Approx(q).epsilon(1e-7));
    // quantiles should sit near the generating normal's
    CHECK(d.ppf(0.5) == doctest::Approx(30.0).epsilon(0.02));
    CHECK(d.upper_bound() == doctest::Approx(30.0 + 2.3263 * 2.0).epsilon(0.03));
}

TEST_CASE("partial_mean matches numeric integration") {
    auto d = exp_dist(0.5, 14.0);
    for (double x : {1.0, 3.0, 7.5, 13.0}) {
        double acc = 0.0;
        int steps = 20000;
        for (int i = 0; i < steps; ++i) {
            double t0 = x * i / steps, t1 = x * (i + 1) / steps;
            double tm = 0.5 * (t0 + t1);
            acc += tm * d.pdf(tm) * (t1 - t0);
        }
        CHECK(d.partial_mean(x) == doctest::Approx(acc).epsilon(1e-5));
    }
}

TEST_CASE("mean and variance track the sample moments") {
    // exactly one window of samples, so every sample carries full weight and
    // the fitted moments should match the plain sample moments up to binning
    std::vector<double> s;
    std::mt19937 gen(7);
    std::gamma_distribution<double> g(4.0, 2.0);
    for (size_t i = 0; i < EmpiricalDistribution::kWindow; ++i) s.push_back(g(gen));
    double m = 0.0;
    for (double x : s) m += x;
    m /= s.size();
    double v = 0.0;
    for (double x : s) v += (x - m) * (x - m);
    v /= (s.size() - 1);

    auto d = EmpiricalDistribution::fit(s);
    CHECK(d.mean() == doctest::Approx(m).epsilon(0.03));
    CHECK(d.variance() == doctest::Approx(v).epsilon(0.08));
}

TEST_CASE("wasserstein distance between shifted flats is the shift") {
    // flat on [0,10] versus flat on [10,20]; the second is built over [0,20]
    // with an empty lower half, which smooths one bin edge, hence the slack
    std::vector<double> e1, e2, m1, m2;
    for (int i = 0; i <= 10; ++i) e1.push_back(i);
    for (int i = 0; i <= 20; ++i) e2.push_back(i);
    m1.assign(10, 0.1);
    m2.assign(10, 0.0);
    m2.insert(m2.end(), 10, 0.1);
    auto a = EmpiricalDistribution::from_bins(e1, m1, 50);
    auto b = EmpiricalDistribution::from_bins(e2, m2, 50);
    CHECK(EmpiricalDistribution::wasserstein(a, b) == doctest::Approx(10.0).epsilon(0.005));
    CHECK(EmpiricalDistribution::wasserstein(a, a) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("observe keeps the window and decays the past") {
    // 300 samples near 10, then 220 near 20: the 200-sample window plus decay
    // should leave the fit centered close to 20.
    EmpiricalDistribution d = EmpiricalDistribution::fit({10.0, 10.1, 9.9});
    for (int i = 0; i < 297; ++i) d = d.observe(10.0 + 0.01 * (i % 7));
    for (int i = 0; i < 220; ++i) d = d.observe(20.0 + 0.01 * (i % 5));
    CHECK(d.sample_count() == 520);
    CHECK(d.mean() > 19.0);
    CHECK(d.ppf(0.5) > 19.0);
}

TEST_CASE("a stationary stream stabilizes and records when") {
    EmpiricalDistribution d = EmpiricalDistribution::fit({4.8, 5.0, 5.2});
    for (int i = 0; i < 47; ++i) d = d.observe(4.5 + 0.1 * (i % 11));
    CHECK(d.stable());
    CHECK(d.samples_to_stability() > 0);
    CHECK(d.samples_to_stability() <= 40);
}

TEST_CASE("a moved distribution reports a large drift distance") {
    EmpiricalDistribution d = EmpiricalDistribution::fit({5.0, 5.1, 4.9});
    for (int i = 0; i < 240; ++i) d = d.observe(5.0 + 0.05 * (i % 5));
    // shift the stream to ~15 for a window's worth of samples
    for (int i = 0; i < 210; ++i) d = d.observe(15.0 + 0.05 * (i % 5));
    auto rep = d.drift_check(200);
    CHECK(rep.wasserstein > 5.0);
}

TEST_CASE("json round trip preserves the fit") {
    auto d = exp_dist(0.4, 16.0);
    TransitionKey key{"shade", "raise", Transition::StartToComplete};
    auto text = d.to_json(key);
    auto [k2, d2] = EmpiricalDistribution::from_json(text);
    CHECK(k2 == key);
    for (double t : {0.5, 2.0, 7.0, 15.0}) {
        CHECK(d2.pdf(t) == doctest::Approx(d.pdf(t)).epsilon(1e-9));
        CHECK(d2.cdf(t) == doctest::Approx(d.cdf(t)).epsilon(1e-9));
    }
}

TEST_CASE("fit rejects degenerate input") {
    CHECK_THROWS_AS(EmpiricalDistribution::fit({1.0, 2.0}), rasc::ValidationError);
    CHECK_THROWS_AS(EmpiricalDistribution::fit({1.0, -2.0, 3.0}), rasc::ValidationError);
}
