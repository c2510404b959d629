#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cdur/likelihood.hpp"
#include "cdur/rng.hpp"
#include "cdur/simulate.hpp"

using namespace cdur;

namespace {

Dataset tiny_dataset(bool with_censored) {
    Dataset d;
    d.covariate_names = {"x"};
    for (int y : {0, 1, 1, 3}) d.observations.push_back({y, true, {static_cast<double>(y % 2)}});
    if (with_censored) d.observations.push_back({6, false, {1.0}});
    return d;
}

Dataset simulated(std::uint64_t seed, int n, std::optional<int> tau,
                  DgpSpec spec = DgpSpec{}) {
    SimConfig cfg;
    cfg.n = n;
    cfg.tau = tau;
    cfg.seed = seed;
    return generate_dataset(spec, cfg);
}

// independent long-double evaluation of the censored log-likelihood for a
// semiparametric layout with a constant tail level
long double brute_force_loglik(const Dataset& data, const std::vector<int>& support,
                               const std::vector<double>& alphas, double tail_alpha,
                               double beta, int tau, int y_plus) {
    auto alpha_of = [&](int j) -> long double {
        if (j == 0) return 0.0L;
        if (!support.empty() && j > support.back()) return tail_alpha;
        for (std::size_t k = 0; k < support.size(); ++k)
            if (support[k] == j) return alphas[k];
        return 0.0L;
    };
    long double ll = 0.0L;
    for (const auto& o : data.observations) {
        const long double eta = std::exp(static_cast<long double>(beta) * o.z[0]);
        long double a = 0.0L, denom = 0.0L, surv = 0.0L, a_at_y = 0.0L;
        for (int j = 0; j <= y_plus; ++j) {
            a += alpha_of(j);
            const long double w = std::exp(-eta * a);
            denom += w;
            if (j > tau) surv += w;
            if (j == o.y) a_at_y = a;
        }
        if (o.delta)
            ll += -eta * a_at_y - std::log(denom);
        else
            ll += std::log(surv) - std::log(denom);
    }
    return ll;
}

}  // namespace

TEST_CASE("build_parametrization: distinct uncensored values and the tail parameter") {
    FitConfig cfg;
    const ParamLayout no_cens = build_parametrization(tiny_dataset(false), cfg);
    CHECK(no_cens.support == std::vector<int>{1, 3});
    CHECK(no_cens.n_alpha() == 2);
    CHECK(std::holds_alternative<InfiniteTail>(no_cens.tail));

    cfg.tau = 6;
    const ParamLayout cens = build_parametrization(tiny_dataset(true), cfg);
    CHECK(cens.n_alpha() == 3);  // alpha_1, alpha_3, alpha_tau
    CHECK(cens.tail_alpha_free);

    FitConfig pw;
    pw.model = ModelKind::kPiecewiseConstant;
    pw.knots = {1, 2, 4, 5, 7, 10, 18};
    pw.tau = 6;
    // censored data reach y = 3 only: intervals beyond the data collapse into
    // the tail, leaving levels on (0,1], (1,2], (2,3] plus the tail level
    const ParamLayout pl = build_parametrization(tiny_dataset(true), pw);
    CHECK(pl.n_alpha() == 4);
    CHECK(pl.knots == std::vector<int>{1, 2, 3});
}

TEST_CASE("build_parametrization: piecewise keeps all intervals when data span the knots") {
    Dataset d;
    d.covariate_names = {};
    for (int y : {0, 2, 5, 9, 14, 21, 30}) d.observations.push_back({y, true, {}});
    FitConfig pw;
    pw.model = ModelKind::kPiecewiseConstant;
    pw.knots = {1, 2, 4, 5, 7, 10, 18};
    const ParamLayout pl = build_parametrization(d, pw);
    CHECK(pl.n_alpha() == 8);  // 7 interval levels + the beyond-18 level

    FitConfig cens = pw;
    cens.tau = 24;
    Dataset dc;
    dc.covariate_names = {};
    for (int y : {0, 2, 5, 9, 14, 21}) dc.observations.push_back({y, true, {}});
    dc.observations.push_back({24, false, {}});
    const ParamLayout plc = build_parametrization(dc, cens);
    CHECK(plc.n_alpha() == 8);
}

TEST_CASE("build_parametrization: unfittable data") {
    Dataset d;
    d.covariate_names = {};
    d.observations.push_back({4, false, {}});
    FitConfig cfg;
    cfg.tau = 4;
    CHECK_THROWS_AS(build_parametrization(d, cfg), std::invalid_argument);
}

TEST_CASE("build_parametrization: censored rows must sit at tau") {
    Dataset d = tiny_dataset(true);
    FitConfig cfg;
    cfg.tau = 7;  // censored row carries y = 6
    CHECK_THROWS_AS(build_parametrization(d, cfg), std::invalid_argument);
}

TEST_CASE("default_y_plus: the twice-the-maximum rule") {
    Dataset d = tiny_dataset(false);
    d.pre_censoring_max = 40;
    CHECK(default_y_plus(d) == 80);
    d.pre_censoring_max = 18;
    CHECK(default_y_plus(d) == 36);
    d.pre_censoring_max.reset();
    CHECK(default_y_plus(d) == 6);  // falls back to the recorded maximum
}

TEST_CASE("fit warns when the default truncation point is very large") {
    Dataset d = tiny_dataset(false);
    d.observations.push_back({500, true, {0.0}});
    d.pre_censoring_max = 500;
    FitConfig cfg;
    const FitResult res = fit(d, cfg);
    bool warned = false;
    for (const auto& w : res.warnings) warned |= w.find("y_plus") != std::string::npos;
    CHECK(warned);
}

TEST_CASE("log_likelihood: a single y=0 observation contributes -log denominator") {
    Dataset d;
    d.covariate_names = {"x"};
    d.observations.push_back({0, true, {1.0}});
    FitConfig cfg;
    // no support points, infinite tail: denominator = 1, so ll = 0 for any beta
    for (double b : {-2.0, 0.0, 1.5}) {
        std::vector<double> params{b};
        CHECK(log_likelihood(params, d, cfg) == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("log_likelihood: additivity over duplicated observations") {
    Dataset one;
    one.covariate_names = {"x"};
    one.observations.push_back({2, true, {1.0}});
    Dataset two = one;
    two.observations.push_back(one.observations[0]);

    FitConfig cfg;
    std::vector<double> params{0.4, std::log(0.3)};
    CHECK(log_likelihood(params, two, cfg) ==
          doctest::Approx(2.0 * log_likelihood(params, one, cfg)).epsilon(1e-14));
}

TEST_CASE("log_likelihood: matches the brute-force oracle on a 5-point dataset") {
    const Dataset d = tiny_dataset(true);
    FitConfig cfg;
    cfg.tau = 6;
    cfg.y_plus = 10000;

    const std::vector<double> alphas{0.35, 0.22};
    const double tail = 0.15, beta = 0.3;
    std::vector<double> params{beta, std::log(alphas[0]), std::log(alphas[1]), std::log(tail)};
    const long double oracle =
        brute_force_loglik(d, {1, 3}, alphas, tail, beta, 6, 10000);
    CHECK(log_likelihood(params, d, cfg) ==
          doctest::Approx(static_cast<double>(oracle)).epsilon(1e-9));
}

TEST_CASE("property: analytic gradient matches central differences") {
    const Dataset data = simulated(404, 300, 6);
    FitConfig cfg;
    cfg.tau = 6;
    const ParamLayout lay = build_parametrization(data, cfg);
    const int np = lay.n_params();

    SplitMix64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> params(static_cast<std::size_t>(np));
        params[0] = rng.next_double() - 0.5;
        for (int k = 1; k < np; ++k) params[static_cast<std::size_t>(k)] = -2.5 + 2.0 * rng.next_double();

        std::vector<double> grad(static_cast<std::size_t>(np));
        log_likelihood_grad(params, data, cfg, grad);
        for (int i = 0; i < np; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(params[static_cast<std::size_t>(i)]));
            std::vector<double> p = params;
            p[static_cast<std::size_t>(i)] += h;
            const double up = log_likelihood(p, data, cfg);
            p[static_cast<std::size_t>(i)] -= 2.0 * h;
            const double dn = log_likelihood(p, data, cfg);
            const double fd = (up - dn) / (2.0 * h);
            CHECK(std::abs(grad[static_cast<std::size_t>(i)] - fd) <=
                  1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("property: exact-tail gradient matches central differences") {
    const Dataset data = simulated(405, 300, 6);
    FitConfig cfg;
    cfg.tau = 6;
    cfg.exact_tail = true;
    const ParamLayout lay = build_parametrization(data, cfg);
    const int np = lay.n_params();

    std::vector<double> params(static_cast<std::size_t>(np), std::log(0.2));
    params[0] = 0.3;
    std::vector<double> grad(static_cast<std::size_t>(np));
    log_likelihood_grad(params, data, cfg, grad);
    for (int i = 0; i < np; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(params[static_cast<std::size_t>(i)]));
        std::vector<double> p = params;
        p[static_cast<std::size_t>(i)] += h;
        const double up = log_likelihood(p, data, cfg);
        p[static_cast<std::size_t>(i)] -= 2.0 * h;
        const double dn = log_likelihood(p, data, cfg);
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(grad[static_cast<std::size_t>(i)] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("property: piecewise gradient matches central differences") {
    const Dataset data = simulated(406, 300, 12);
    FitConfig cfg;
    cfg.model = ModelKind::kPiecewiseConstant;
    cfg.knots = {1, 2, 4, 5, 7, 10, 18};
    cfg.tau = 12;
    const int np = build_parametrization(data, cfg).n_params();

    std::vector<double> params(static_cast<std::size_t>(np), std::log(0.25));
    params[0] = -0.2;
    std::vector<double> grad(static_cast<std::size_t>(np));
    log_likelihood_grad(params, data, cfg, grad);
    for (int i = 0; i < np; ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(params[static_cast<std::size_t>(i)]));
        std::vector<double> p = params;
        p[static_cast<std::size_t>(i)] += h;
        const double up = log_likelihood(p, data, cfg);
        p[static_cast<std::size_t>(i)] -= 2.0 * h;
        const double dn = log_likelihood(p, data, cfg);
        const double fd = (up - dn) / (2.0 * h);
        CHECK(std::abs(grad[static_cast<std::size_t>(i)] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("property: likelihood invariance under simultaneous shift and rescale") {
    const Dataset data = simulated(2718, 250, 6);
    FitConfig cfg;
    cfg.tau = 6;
    const ParamLayout lay = build_parametrization(data, cfg);
    const int np = lay.n_params();

    std::vector<double> params(static_cast<std::size_t>(np), std::log(0.3));
    params[0] = 0.45;
    const double ll = log_likelihood(params, data, cfg);

    const double c = 1.0;
    Dataset shifted = data;
    for (auto& o : shifted.observations) o.z[0] -= c;
    std::vector<double> adjusted = params;
    for (int k = 1; k < np; ++k) adjusted[static_cast<std::size_t>(k)] += params[0] * c;
    CHECK(log_likelihood(adjusted, shifted, cfg) == doctest::Approx(ll).epsilon(1e-10));
}

TEST_CASE("fit: censoring no-op when tau exceeds every value") {
    const Dataset data = simulated(909, 400, std::nullopt);
    FitConfig with_tau;
    with_tau.tau = data.max_recorded_y() + 50;
    FitConfig without_tau;
    const FitResult a = fit(data, with_tau);
    const FitResult b = fit(data, without_tau);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(std::abs(a.beta_hat[0] - b.beta_hat[0]) < 1e-8);
    CHECK(std::holds_alternative<InfiniteTail>(a.alpha_hat.tail));
}

TEST_CASE("fit: permutation invariance is bit exact") {
    Dataset data = simulated(515, 300, 6);
    FitConfig cfg;
    cfg.tau = 6;
    const FitResult base = fit(data, cfg);

    SplitMix64 rng(1);
    for (std::size_t i = data.observations.size(); i > 1; --i)
        std::swap(data.observations[i - 1],
                  data.observations[static_cast<std::size_t>(rng.next_double() * i)]);
    const FitResult shuffled = fit(data, cfg);
    CHECK(base.beta_hat[0] == shuffled.beta_hat[0]);
    CHECK(base.log_likelihood == shuffled.log_likelihood);
    CHECK(base.beta_se[0] == shuffled.beta_se[0]);
}

TEST_CASE("fit: maximized likelihood dominates the truth on a seeded dataset") {
    const Dataset data = simulated(200, 200, 6);
    FitConfig cfg;
    cfg.tau = 6;
    const FitResult res = fit(data, cfg);
    REQUIRE(res.converged);

    // evaluate at the generating parameters: beta = 0.5, alpha_j = theta = 0.2
    const ParamLayout lay = build_parametrization(data, cfg);
    std::vector<double> truth(static_cast<std::size_t>(lay.n_params()), std::log(0.2));
    truth[0] = 0.5;
    CHECK(res.log_likelihood >= log_likelihood(truth, data, cfg));
}

TEST_CASE("fit: recovers beta on a large geometric sample") {
    const Dataset data = simulated(1119, 4000, 12);
    FitConfig cfg;
    cfg.tau = 12;
    const FitResult res = fit(data, cfg);
    REQUIRE(res.converged);
    REQUIRE(res.se_available);
    CHECK(std::abs(res.beta_hat[0] - 0.5) < 3.5 * res.beta_se[0]);
    CHECK(res.beta_se[0] < 0.08);
    CHECK(res.beta_ci[0].first < res.beta_ci[0].second);
}

TEST_CASE("fit: exact tail and a wide finite truncation agree") {
    const Dataset data = simulated(33, 400, 6);
    FitConfig fin;
    fin.tau = 6;
    fin.y_plus = 10000;
    FitConfig exact = fin;
    exact.y_plus.reset();
    exact.exact_tail = true;
    const FitResult a = fit(data, fin);
    const FitResult b = fit(data, exact);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    CHECK(a.beta_hat[0] == doctest::Approx(b.beta_hat[0]).epsilon(1e-6));
    CHECK(a.log_likelihood == doctest::Approx(b.log_likelihood).epsilon(1e-9));
}

TEST_CASE("fit: censored data with an infinite tail is rejected") {
    Dataset d = tiny_dataset(true);
    FitConfig cfg;
    cfg.tau = 6;
    cfg.tail = InfiniteTail{};
    CHECK_THROWS_AS(fit(d, cfg), std::invalid_argument);
}

TEST_CASE("fit: polynomial tail family is fittable") {
    const Dataset data = simulated(64, 500, 6);
    FitConfig cfg;
    cfg.tau = 6;
    cfg.tail = PolynomialTail{0.0};
    const FitResult res = fit(data, cfg);
    CHECK(res.converged);
    CHECK(std::holds_alternative<PolynomialTail>(res.alpha_hat.tail));
    CHECK(std::abs(res.beta_hat[0] - 0.5) < 0.35);
}

TEST_CASE("fit: evaluation-only tail families are rejected by fit") {
    Dataset d = tiny_dataset(true);
    FitConfig cfg;
    cfg.tau = 6;
    cfg.tail = WeibullTail{0.25, 0.8};
    // the likelihood is evaluable with the fixed family
    const ParamLayout lay = build_parametrization(d, cfg);
    CHECK(lay.n_alpha() == 2);  // alpha_1, alpha_3; no free tail parameter
    std::vector<double> params(static_cast<std::size_t>(lay.n_params()), std::log(0.3));
    params[0] = 0.1;
    CHECK(std::isfinite(log_likelihood(params, d, cfg)));
}

TEST_CASE("covariate_shift_check: identity and unit shifts") {
    const Dataset data = simulated(77, 500, 6);
    FitConfig cfg;
    cfg.tau = 6;
    std::vector<double> zero{0.0}, one{1.0};
    CHECK(covariate_shift_check(data, cfg, zero));
    CHECK(covariate_shift_check(data, cfg, one));
}
