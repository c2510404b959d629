#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "cdur/dataset.hpp"
#include "cdur/rng.hpp"

namespace cdur {

// ---------------------------------------------------------------------------
// Data-generating hazards. Increments alpha_t for t >= 1:
//   Geometric:          alpha_t = theta
//   PiecewiseGeometric: alpha_t = theta * alpha0 * t_k^(alpha0-1) for
//                       t in (t_{k-1}, t_k], t_0 = 0; the last level continues
//                       beyond the final grid point
//   DiscreteWeibull:    alpha_t = theta * (t^alpha0 - (t-1)^alpha0)
// ---------------------------------------------------------------------------

struct GeometricDgp {
    double theta = 0.2;
};

struct PiecewiseGeometricDgp {
    double theta = 0.375;
    double alpha0 = 0.8;
    std::vector<int> knot_grid = {1, 2, 4, 5, 7, 10, 18};
};

struct DiscreteWeibullDgp {
    double theta = 0.25;
    double alpha0 = 0.8;
};

using DgpHazard = std::variant<GeometricDgp, PiecewiseGeometricDgp, DiscreteWeibullDgp>;

struct DgpSpec {
    DgpHazard hazard = GeometricDgp{};
    double beta1 = 0.5;        // log hazard ratio of the binary covariate
    double covariate_p = 0.5;  // Bernoulli success probability of x
};

enum class SamplerKind { kRenewal, kLengthBiasedOracle };

struct SimConfig {
    int n = 1000;
    std::optional<int> tau;
    int horizon = 10000;  // renewal burn-in length M
    std::uint64_t seed = 0;
    SamplerKind sampler = SamplerKind::kRenewal;
    // return the forward recurrence time S_K - M (support {1,2,...}) instead
    // of the backward recurrence time M - S_{K-1}; sensitivity checks only
    bool forward_recurrence = false;
};

double dgp_hazard_increment(const DgpSpec& spec, int t);

// T from sequential Bernoulli hazard draws: the first t >= 1 whose draw
// succeeds with probability lambda(t|x) = 1 - exp{-alpha_t exp(beta1 x)}
int sample_total_duration(const DgpSpec& spec, int x, SplitMix64& rng);

// backward recurrence time of the renewal process at horizon M
int sample_current_duration_renewal(const DgpSpec& spec, int x, int horizon,
                                    SplitMix64& rng);

// inverse-CDF draw from g(y) = Fbar_T(y|x) / mu_T(x); the independent oracle
int sample_current_duration_lengthbiased(const DgpSpec& spec, int x, SplitMix64& rng);

// records with y > tau become (tau, censored); others are untouched
Dataset apply_type1_censoring(const Dataset& data, int tau);

// n subjects with x ~ Bernoulli(covariate_p), current durations from the
// chosen sampler, optional Type I censoring; deterministic in config.seed
// and independent of subject evaluation order
Dataset generate_dataset(const DgpSpec& spec, const SimConfig& config);

// Precomputed hazard/survivor tables for one (dgp, x) pair. The samplers
// above build this lazily; loops should build it once and reuse.
class DurationModel {
public:
    DurationModel(const DgpSpec& spec, int x);
    // custom hazard increments alpha_t (t >= 1) under multiplier eta
    DurationModel(std::function<double(int)> increment, double eta);

    double lambda(int t) const;       // discrete hazard of T at t
    int sample_duration(SplitMix64& rng) const;   // sequential Bernoulli draws
    int sample_current_duration(SplitMix64& rng) const;  // inverse CDF of g

    const std::vector<double>& current_duration_pmf() const { return pmf_; }
    double mean_duration() const { return mu_; }

private:
    std::function<double(int)> increment_;
    double eta_ = 1.0;
    std::vector<double> lambda_;  // table for t = 1..table_max
    std::vector<double> cdf_;     // CDF of the current duration
    std::vector<double> pmf_;
    double mu_ = 0.0;

    void build_tables();
};

}  // namespace cdur
