#include "cdur/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdur {

namespace {

constexpr long kRunawayLimit = 10'000'000;

double increment(const DgpHazard& hz, int t) {
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GeometricDgp>) {
                return d.theta;
            } else if constexpr (std::is_same_v<T, PiecewiseGeometricDgp>) {
                auto it = std::lower_bound(d.knot_grid.begin(), d.knot_grid.end(), t);
                const int tk = (it == d.knot_grid.end()) ? d.knot_grid.back() : *it;
                return d.theta * d.alpha0 * std::pow(static_cast<double>(tk), d.alpha0 - 1.0);
            } else {
                return d.theta * (std::pow(static_cast<double>(t), d.alpha0) -
                                  std::pow(static_cast<double>(t - 1), d.alpha0));
            }
        },
        hz);
}

}  // namespace

namespace {

void validate_dgp(const DgpSpec& spec) {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if (!(d.theta > 0.0)) throw std::invalid_argument("dgp: theta must be > 0");
            if constexpr (!std::is_same_v<T, GeometricDgp>) {
                if (!(d.alpha0 > 0.0)) throw std::invalid_argument("dgp: alpha0 must be > 0");
            }
            if constexpr (std::is_same_v<T, PiecewiseGeometricDgp>) {
                if (d.knot_grid.empty() || d.knot_grid.front() < 1)
                    throw std::invalid_argument("dgp: knot grid must start above t_0 = 0");
                for (std::size_t i = 1; i < d.knot_grid.size(); ++i)
                    if (d.knot_grid[i] <= d.knot_grid[i - 1])
                        throw std::invalid_argument("dgp: knot grid must be strictly increasing");
            }
        },
        spec.hazard);
    if (!(spec.covariate_p >= 0.0 && spec.covariate_p <= 1.0))
        throw std::invalid_argument("dgp: covariate probability must lie in [0, 1]");
    if (!std::isfinite(spec.beta1)) throw std::invalid_argument("dgp: beta1 must be finite");
}

}  // namespace

double dgp_hazard_increment(const DgpSpec& spec, int t) {
    if (t < 1) throw std::invalid_argument("dgp_hazard_increment: t must be >= 1");
    validate_dgp(spec);
    return increment(spec.hazard, t);
}

DurationModel::DurationModel(const DgpSpec& spec, int x)
    : increment_([hz = spec.hazard](int t) { return increment(hz, t); }),
      eta_(std::exp(spec.beta1 * static_cast<double>(x))) {
    build_tables();
}

DurationModel::DurationModel(std::function<double(int)> increment, double eta)
    : increment_(std::move(increment)), eta_(eta) {
    build_tables();
}

void DurationModel::build_tables() {
    // hazard table; beyond it lambda is recomputed on demand (never reached
    // for the parameter ranges of interest)
    constexpr int kTableMax = 16384;
    lambda_.resize(kTableMax + 1, 0.0);
    for (int t = 1; t <= kTableMax; ++t)
        lambda_[static_cast<std::size_t>(t)] = -std::expm1(-increment_(t) * eta_);

    // current-duration distribution: g(y) = Fbar(y) / mu with
    // Fbar(y) = prod_{j<=y} (1 - lambda_j), accumulated until negligible
    double fbar = 1.0;
    std::vector<double> fbars{1.0};
    for (int t = 1;; ++t) {
        const double lam = t <= kTableMax ? lambda_[static_cast<std::size_t>(t)]
                                          : -std::expm1(-increment_(t) * eta_);
        fbar *= 1.0 - lam;
        if (fbar < 1e-12) break;
        fbars.push_back(fbar);
        if (t >= kRunawayLimit)
            throw std::runtime_error("current-duration distribution failed to converge");
    }
    mu_ = 0.0;
    for (double v : fbars) mu_ += v;
    pmf_.resize(fbars.size());
    cdf_.resize(fbars.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < fbars.size(); ++i) {
        pmf_[i] = fbars[i] / mu_;
        acc += pmf_[i];
        cdf_[i] = acc;
    }
    cdf_.back() = 1.0;
}

double DurationModel::lambda(int t) const {
    if (t < static_cast<int>(lambda_.size())) return lambda_[static_cast<std::size_t>(t)];
    return -std::expm1(-increment_(t) * eta_);
}

int DurationModel::sample_duration(SplitMix64& rng) const {
    for (long t = 1; t <= kRunawayLimit; ++t) {
        if (rng.next_double() < lambda(static_cast<int>(t))) return static_cast<int>(t);
    }
    throw std::runtime_error("runaway duration: hazard is effectively zero");
}

int DurationModel::sample_current_duration(SplitMix64& rng) const {
    const double u = rng.next_double();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(it - cdf_.begin());
}

int sample_total_duration(const DgpSpec& spec, int x, SplitMix64& rng) {
    const double eta = std::exp(spec.beta1 * static_cast<double>(x));
    for (long t = 1; t <= kRunawayLimit; ++t) {
        const double lam = -std::expm1(-increment(spec.hazard, static_cast<int>(t)) * eta);
        if (rng.next_double() < lam) return static_cast<int>(t);
    }
    throw std::runtime_error("runaway duration: hazard is effectively zero");
}

namespace {

int renewal_draw(const DurationModel& model, int horizon, SplitMix64& rng,
                 bool forward) {
    long s = 0;
    while (true) {
        const int t = model.sample_duration(rng);
        if (s + t > horizon) return forward ? static_cast<int>(s + t - horizon)
                                            : static_cast<int>(horizon - s);
        s += t;
    }
}

}  // namespace

int sample_current_duration_renewal(const DgpSpec& spec, int x, int horizon,
                                    SplitMix64& rng) {
    DurationModel model(spec, x);
    return renewal_draw(model, horizon, rng, false);
}

int sample_current_duration_lengthbiased(const DgpSpec& spec, int x, SplitMix64& rng) {
    DurationModel model(spec, x);
    return model.sample_current_duration(rng);
}

Dataset apply_type1_censoring(const Dataset& data, int tau) {
    if (tau < 1) throw std::invalid_argument("tau must be >= 1");
    Dataset out = data;
    for (auto& o : out.observations) {
        if (o.y > tau) {
            o.y = tau;
            o.delta = false;
        }
    }
    return out;
}

Dataset generate_dataset(const DgpSpec& spec, const SimConfig& config) {
    validate_dgp(spec);
    if (config.n < 1) throw std::invalid_argument("n must be >= 1");
    if (config.tau && *config.tau < 1) throw std::invalid_argument("tau must be >= 1");
    const double theta = std::visit([](const auto& d) { return d.theta; }, spec.hazard);
    if (config.sampler == SamplerKind::kRenewal &&
        static_cast<double>(config.horizon) < 100.0 / theta)
        throw std::invalid_argument("horizon too short for equilibrium: need M >= 100/theta");

    const DurationModel model0(spec, 0);
    const DurationModel model1(spec, 1);
    const SplitMix64 base(config.seed);

    Dataset data;
    data.covariate_names = {"x"};
    data.observations.resize(static_cast<std::size_t>(config.n));
    int pre_max = 0;
    for (int i = 0; i < config.n; ++i) {
        SplitMix64 rng = base.split(static_cast<std::uint64_t>(i));
        const int x = rng.next_bernoulli(spec.covariate_p) ? 1 : 0;
        const DurationModel& model = x ? model1 : model0;
        int y;
        if (config.sampler == SamplerKind::kRenewal) {
            y = renewal_draw(model, config.horizon, rng, config.forward_recurrence);
        } else {
            y = model.sample_current_duration(rng);
        }
        pre_max = std::max(pre_max, y);
        auto& o = data.observations[static_cast<std::size_t>(i)];
        o.y = y;
        o.delta = true;
        o.z = {static_cast<double>(x)};
    }
    data.pre_censoring_max = pre_max;
    if (config.tau) {
        Dataset censored = apply_type1_censoring(data, *config.tau);
        censored.pre_censoring_max = pre_max;
        return censored;
    }
    return data;
}

}  // namespace cdur
