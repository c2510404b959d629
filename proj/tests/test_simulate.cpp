#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "cdur/hazard.hpp"
#include "cdur/io.hpp"
#include "cdur/simulate.hpp"

using namespace cdur;

namespace {

// empirical distribution over a vector of draws
std::map<int, double> empirical(const std::vector<int>& draws) {
    std::map<int, double> p;
    for (int v : draws) p[v] += 1.0;
    for (auto& [k, v] : p) v /= static_cast<double>(draws.size());
    return p;
}

double tv_distance(const std::map<int, double>& a, const std::map<int, double>& b) {
    double d = 0.0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        d += std::abs(v - (it == b.end() ? 0.0 : it->second));
    }
    for (const auto& [k, v] : b)
        if (!a.count(k)) d += v;
    return 0.5 * d;
}

std::map<int, double> geometric_cd_pmf(double theta, double beta1, int x, int y_max) {
    const double lam = -std::expm1(-theta * std::exp(beta1 * x));
    std::map<int, double> p;
    for (int y = 0; y <= y_max; ++y) p[y] = lam * std::pow(1.0 - lam, y);
    return p;
}

}  // namespace

TEST_CASE("dgp_hazard_increment: the three settings") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    for (int t : {1, 5, 100}) CHECK(dgp_hazard_increment(geo, t) == 0.2);

    DgpSpec dw;
    dw.hazard = DiscreteWeibullDgp{0.25, 0.8};
    CHECK(dgp_hazard_increment(dw, 1) == doctest::Approx(0.25).epsilon(1e-15));

    DgpSpec pw;
    pw.hazard = PiecewiseGeometricDgp{0.375, 0.8, {1, 2, 4, 5, 7, 10, 18}};
    // t = 3 lies in (2, 4], level theta*alpha0*4^(alpha0-1)
    CHECK(dgp_hazard_increment(pw, 3) == doctest::Approx(0.2273574849765597).epsilon(1e-12));
    // the last level continues beyond the final knot
    CHECK(dgp_hazard_increment(pw, 19) == dgp_hazard_increment(pw, 18));
    CHECK(dgp_hazard_increment(pw, 1000) == dgp_hazard_increment(pw, 18));
}

TEST_CASE("sample_total_duration: geometric mean and first-step probabilities") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SplitMix64 rng(1);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int t = sample_total_duration(geo, 0, rng);
        CHECK(t >= 1);
        sum += t;
        sum2 += static_cast<double>(t) * t;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(mean - 5.516655566126993) <= 3.0 * sd / std::sqrt(static_cast<double>(n)));

    DgpSpec dw;
    dw.hazard = DiscreteWeibullDgp{0.25, 0.8};
    long ones = 0;
    for (int i = 0; i < n; ++i) ones += sample_total_duration(dw, 0, rng) == 1;
    const double p1 = static_cast<double>(ones) / n;
    CHECK(std::abs(p1 - 0.22119921692859512) <= 3.0 * std::sqrt(0.2212 * 0.7788 / n));

    // stochastic ordering: x = 1 raises the first-step hazard for beta1 > 0
    long ones1 = 0;
    for (int i = 0; i < n; ++i) ones1 += sample_total_duration(dw, 1, rng) == 1;
    CHECK(static_cast<double>(ones1) / n > p1);
}

TEST_CASE("sample_total_duration: runaway hazard raises an error") {
    DgpSpec dead;
    dead.hazard = GeometricDgp{1e-12};
    SplitMix64 rng(9);
    CHECK_THROWS_AS(sample_total_duration(dead, 0, rng), std::runtime_error);
}

TEST_CASE("length-biased oracle: deterministic durations give a uniform current duration") {
    const int c = 7;
    DurationModel model([c](int t) { return t < c ? 0.0 : 1e30; }, 1.0);
    CHECK(model.mean_duration() == doctest::Approx(static_cast<double>(c)).epsilon(1e-12));
    const auto& pmf = model.current_duration_pmf();
    REQUIRE(pmf.size() == static_cast<std::size_t>(c));
    for (double p : pmf) CHECK(p == doctest::Approx(1.0 / c).epsilon(1e-12));

    SplitMix64 rng(4);
    std::vector<long> counts(c, 0);
    for (int i = 0; i < 70000; ++i) ++counts[static_cast<std::size_t>(model.sample_current_duration(rng))];
    for (long v : counts) CHECK(std::abs(v / 70000.0 - 1.0 / c) < 0.01);
}

TEST_CASE("length-biased oracle: g(0) = 1/mu and the geometric closed form") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    const DurationModel model(geo, 0);
    CHECK(model.current_duration_pmf()[0] ==
          doctest::Approx(1.0 / model.mean_duration()).epsilon(1e-12));

    SplitMix64 rng(12);
    std::vector<int> draws(100000);
    for (auto& d : draws) d = model.sample_current_duration(rng);
    CHECK(tv_distance(empirical(draws), geometric_cd_pmf(0.2, 0.5, 0, 200)) < 0.02);
}

TEST_CASE("renewal sampler: matches the geometric closed form and the oracle") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    const DurationModel model0(geo, 0);
    SplitMix64 r1(31), r2(32);
    const int n = 100000, horizon = 10000;
    std::vector<int> renewal(n), oracle(n);
    for (int i = 0; i < n; ++i) {
        renewal[static_cast<std::size_t>(i)] =
            sample_current_duration_renewal(geo, 0, horizon, r1);
        oracle[static_cast<std::size_t>(i)] = model0.sample_current_duration(r2);
    }
    CHECK(tv_distance(empirical(renewal), geometric_cd_pmf(0.2, 0.5, 0, 200)) < 0.02);
    CHECK(tv_distance(empirical(renewal), empirical(oracle)) < 0.02);

    for (int v : renewal) CHECK(v >= 0);
}

TEST_CASE("renewal sampler: equilibrium is insensitive to doubling the horizon") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SplitMix64 r1(7), r2(8);
    const int n = 100000;
    std::vector<int> at_m(n), at_2m(n);
    for (int i = 0; i < n; ++i) {
        at_m[static_cast<std::size_t>(i)] = sample_current_duration_renewal(geo, 1, 10000, r1);
        at_2m[static_cast<std::size_t>(i)] = sample_current_duration_renewal(geo, 1, 20000, r2);
    }
    CHECK(tv_distance(empirical(at_m), empirical(at_2m)) < 0.01);
}

TEST_CASE("apply_type1_censoring: record-level behavior") {
    Dataset d;
    d.covariate_names = {"x"};
    d.observations.push_back({4, true, {0.0}});
    d.observations.push_back({9, true, {1.0}});
    const Dataset c = apply_type1_censoring(d, 6);
    CHECK(c.observations[0].y == 4);
    CHECK(c.observations[0].delta);
    CHECK(c.observations[1].y == 6);
    CHECK_FALSE(c.observations[1].delta);
    CHECK(c.censored_proportion() == doctest::Approx(0.5));
}

TEST_CASE("generate_dataset: determinism and stream independence") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SimConfig cfg;
    cfg.n = 500;
    cfg.tau = 3;
    cfg.seed = 20240101;
    const Dataset a = generate_dataset(geo, cfg);
    const Dataset b = generate_dataset(geo, cfg);
    CHECK(dataset_to_csv(a) == dataset_to_csv(b));

    cfg.seed = 20240102;
    const Dataset c = generate_dataset(geo, cfg);
    CHECK(dataset_to_csv(a) != dataset_to_csv(c));

    CHECK(a.pre_censoring_max.has_value());
    CHECK(*a.pre_censoring_max >= a.max_recorded_y());
}

TEST_CASE("generate_dataset: covariate mean near one half") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SimConfig cfg;
    cfg.n = 10000;
    cfg.seed = 5;
    const Dataset d = generate_dataset(geo, cfg);
    double mean = 0.0;
    for (const auto& o : d.observations) mean += o.z[0];
    mean /= static_cast<double>(d.observations.size());
    CHECK(std::abs(mean - 0.5) <= 3.0 * 0.5 / std::sqrt(10000.0));
}

TEST_CASE("generate_dataset: censoring proportions in the right range") {
    // quick-scale versions of two summary-table cells; the acceptance suite
    // checks all of them at n = 1e5
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SimConfig cfg;
    cfg.n = 20000;
    cfg.tau = 3;
    cfg.seed = 99;
    CHECK(std::abs(generate_dataset(geo, cfg).censored_proportion() - 0.3584) < 0.02);

    DgpSpec dw;
    dw.hazard = DiscreteWeibullDgp{0.125, 0.8};
    SimConfig cfg2 = cfg;
    cfg2.n = 20000;
    CHECK(generate_dataset(dw, cfg2).censored_proportion() > 0.6);
}

TEST_CASE("generate_dataset: forward recurrence support starts at one") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SimConfig cfg;
    cfg.n = 2000;
    cfg.seed = 17;
    cfg.forward_recurrence = true;
    const Dataset d = generate_dataset(geo, cfg);
    int min_y = 1 << 30;
    for (const auto& o : d.observations) min_y = std::min(min_y, o.y);
    CHECK(min_y >= 1);
}

TEST_CASE("generate_dataset: rejects invalid parameters") {
    SimConfig cfg;
    cfg.n = 10;
    cfg.seed = 1;
    DgpSpec bad;
    bad.hazard = GeometricDgp{-0.1};
    CHECK_THROWS_AS(generate_dataset(bad, cfg), std::invalid_argument);
    bad.hazard = PiecewiseGeometricDgp{0.375, 0.8, {1, 5, 5}};
    CHECK_THROWS_AS(generate_dataset(bad, cfg), std::invalid_argument);
    bad.hazard = GeometricDgp{0.2};
    bad.covariate_p = 1.5;
    CHECK_THROWS_AS(generate_dataset(bad, cfg), std::invalid_argument);
}

TEST_CASE("generate_dataset: rejects a horizon too short for equilibrium") {
    DgpSpec geo;
    geo.hazard = GeometricDgp{0.2};
    SimConfig cfg;
    cfg.n = 10;
    cfg.seed = 1;
    cfg.horizon = 100;  // needs at least 100/theta = 500
    CHECK_THROWS_AS(generate_dataset(geo, cfg), std::invalid_argument);
}

TEST_CASE("hazard consistency: dgp increments reproduce the closed-form survivor") {
    DgpSpec dw;
    dw.hazard = DiscreteWeibullDgp{0.25, 0.8};
    HazardSpec spec;
    for (int t = 1; t <= 60; ++t) {
        spec.support.push_back(t);
        spec.alphas.push_back(dgp_hazard_increment(dw, t));
    }
    spec.tail = GeometricTail{spec.alphas.back()};
    std::vector<double> beta{0.5};
    for (int x : {0, 1}) {
        std::vector<double> z{static_cast<double>(x)};
        for (int t : {1, 5, 20, 60}) {
            const double closed =
                std::exp(-0.25 * std::pow(t, 0.8) * std::exp(0.5 * x));
            CHECK(survival_T(spec, beta, z, t) == doctest::Approx(closed).epsilon(1e-12));
        }
    }
}
