#include "cdur/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cdur {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

bool strictly_increasing(const std::vector<int>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] <= v[i - 1]) return false;
    return true;
}

// tail increment at offset k = y - boundary >= 1
double tail_alpha(const TailSpec& tail, int boundary, int k) {
    return std::visit(
        [&](const auto& t) -> double {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, GeometricTail>) {
                return t.alpha_tau;
            } else if constexpr (std::is_same_v<T, PowerDecayTail>) {
                return std::pow(t.alpha_tau,
                                t.gamma * static_cast<double>(k - 1 + t.first_offset));
            } else if constexpr (std::is_same_v<T, WeibullTail>) {
                const double y = static_cast<double>(boundary + k);
                return t.theta * (std::pow(y, t.alpha0) - std::pow(y - 1.0, t.alpha0));
            } else if constexpr (std::is_same_v<T, PolynomialTail>) {
                return std::pow(static_cast<double>(k), t.gamma);
            } else {
                return kInf;
            }
        },
        tail);
}

// log sum of exp(terms) with the usual max shift; -inf terms are skipped
double log_sum_exp(std::span<const double> terms) {
    double m = -kInf;
    for (double t : terms) m = std::max(m, t);
    if (m == -kInf) return -kInf;
    double s = 0.0;
    for (double t : terms) {
        if (t != -kInf) s += std::exp(t - m);
    }
    return m + std::log(s);
}

// log of the geometric tail series sum_{k>=m} r^k with r = exp(-x), x > 0:
// log(r^m / (1-r)) = -m*x - log(1 - exp(-x))
double log_geom_tail(double x, int m) {
    if (!(x > 0.0)) throw std::domain_error("geometric tail series diverges: alpha_tau * eta must be > 0");
    return -static_cast<double>(m) * x - std::log(-std::expm1(-x));
}

const GeometricTail* geometric_tail(const HazardSpec& spec) {
    return std::get_if<GeometricTail>(&spec.tail);
}

}  // namespace

int HazardSpec::tail_boundary() const {
    if (piecewise()) return knots.back();
    return support.empty() ? 0 : support.back();
}

void HazardSpec::validate() const {
    require(support.empty() || knots.empty(),
            "HazardSpec: support and knots are mutually exclusive");
    if (piecewise()) {
        require(strictly_increasing(knots) && knots.front() >= 1,
                "HazardSpec: knots must be strictly increasing positive integers");
        require(alphas.size() == knots.size(),
                "HazardSpec: need one alpha level per knot interval");
    } else {
        require(strictly_increasing(support) && (support.empty() || support.front() >= 1),
                "HazardSpec: support must be strictly increasing with entries >= 1 (alpha_0 is fixed at 0)");
        require(alphas.size() == support.size(),
                "HazardSpec: need one alpha per support point");
    }
    for (double a : alphas)
        require(std::isfinite(a) && a >= 0.0, "HazardSpec: alphas must be finite and >= 0");
    if (const auto* g = std::get_if<GeometricTail>(&tail))
        require(g->alpha_tau >= 0.0, "HazardSpec: GeometricTail alpha_tau must be >= 0");
}

double linear_predictor(std::span<const double> beta, std::span<const double> z) {
    if (beta.size() != z.size())
        throw std::invalid_argument("covariate dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) s += beta[i] * z[i];
    return s;
}

double alpha_at(const HazardSpec& spec, int y) {
    if (y < 0) throw std::invalid_argument("alpha_at: y must be >= 0");
    if (y == 0) return 0.0;
    const int b = spec.tail_boundary();
    if (y > b) return tail_alpha(spec.tail, b, y - b);
    if (spec.piecewise()) {
        // first knot >= y identifies the interval (t_{k-1}, t_k] containing y
        auto it = std::lower_bound(spec.knots.begin(), spec.knots.end(), y);
        return spec.alphas[static_cast<std::size_t>(it - spec.knots.begin())];
    }
    auto it = std::lower_bound(spec.support.begin(), spec.support.end(), y);
    if (it != spec.support.end() && *it == y)
        return spec.alphas[static_cast<std::size_t>(it - spec.support.begin())];
    return 0.0;
}

double cumulative_hazard(const HazardSpec& spec, int y) {
    if (y < 0) throw std::invalid_argument("cumulative_hazard: y must be >= 0");
    const int b = spec.tail_boundary();
    double body = 0.0;
    if (spec.piecewise()) {
        int lo = 0;
        for (std::size_t k = 0; k < spec.knots.size(); ++k) {
            const int hi = std::min(y, spec.knots[k]);
            if (hi > lo) body += spec.alphas[k] * static_cast<double>(hi - lo);
            lo = spec.knots[k];
            if (lo >= y) break;
        }
    } else {
        for (std::size_t k = 0; k < spec.support.size() && spec.support[k] <= y; ++k)
            body += spec.alphas[k];
    }
    if (y <= b) return body;

    return std::visit(
        [&](const auto& t) -> double {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, GeometricTail>) {
                return body + t.alpha_tau * static_cast<double>(y - b);
            } else if constexpr (std::is_same_v<T, WeibullTail>) {
                // increments telescope
                return body + t.theta * (std::pow(static_cast<double>(y), t.alpha0) -
                                         std::pow(static_cast<double>(b), t.alpha0));
            } else if constexpr (std::is_same_v<T, InfiniteTail>) {
                return kInf;
            } else {
                double s = body;
                for (int k = 1; k <= y - b; ++k) s += tail_alpha(spec.tail, b, k);
                return s;
            }
        },
        spec.tail);
}

std::vector<double> cumulative_hazard_grid(const HazardSpec& spec, int y_max) {
    std::vector<double> a(static_cast<std::size_t>(y_max) + 1, 0.0);
    for (int y = 1; y <= y_max; ++y)
        a[static_cast<std::size_t>(y)] = a[static_cast<std::size_t>(y) - 1] + alpha_at(spec, y);
    return a;
}

double survival_T(const HazardSpec& spec, std::span<const double> beta,
                  std::span<const double> z, int y) {
    const double eta = std::exp(linear_predictor(beta, z));
    const double a = cumulative_hazard(spec, y);
    return std::isinf(a) ? 0.0 : std::exp(-eta * a);
}

double hazard_prob(const HazardSpec& spec, std::span<const double> beta,
                   std::span<const double> z, int y) {
    const double eta = std::exp(linear_predictor(beta, z));
    const double a = alpha_at(spec, y);
    if (std::isinf(a)) return 1.0;
    return -std::expm1(-a * eta);
}

double log_denominator(const HazardSpec& spec, std::span<const double> beta,
                       std::span<const double> z, const TruncationPolicy& policy) {
    spec.validate();
    const double eta = std::exp(linear_predictor(beta, z));
    const int b = spec.tail_boundary();

    if (const auto* fin = std::get_if<FiniteUpperLimit>(&policy)) {
        if (fin->y_plus < b && !std::holds_alternative<InfiniteTail>(spec.tail))
            throw std::invalid_argument("FiniteUpperLimit: y_plus must not be below the tail boundary");
        const int y_top = std::holds_alternative<InfiniteTail>(spec.tail)
                              ? std::min(fin->y_plus, b)
                              : fin->y_plus;
        const auto a = cumulative_hazard_grid(spec, y_top);
        std::vector<double> terms(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) terms[i] = -eta * a[i];
        return log_sum_exp(terms);
    }

    const auto* g = geometric_tail(spec);
    if (!g) throw std::invalid_argument("ExactGeometricTail requires a GeometricTail spec");
    if (!(g->alpha_tau > 0.0))
        throw std::domain_error("ExactGeometricTail: series diverges for alpha_tau = 0");

    const auto a = cumulative_hazard_grid(spec, b);
    std::vector<double> terms(a.size() + 1);
    for (std::size_t i = 0; i < a.size(); ++i) terms[i] = -eta * a[i];
    terms[a.size()] = -eta * a.back() + log_geom_tail(eta * g->alpha_tau, 1);
    return log_sum_exp(terms);
}

double cd_pmf(const HazardSpec& spec, std::span<const double> beta,
              std::span<const double> z, int y, const TruncationPolicy& policy) {
    if (y < 0) throw std::invalid_argument("cd_pmf: y must be >= 0");
    if (const auto* fin = std::get_if<FiniteUpperLimit>(&policy)) {
        if (y > fin->y_plus)
            throw std::invalid_argument("cd_pmf: y beyond the truncation limit");
    }
    const double eta = std::exp(linear_predictor(beta, z));
    const double a = cumulative_hazard(spec, y);
    if (std::isinf(a)) return 0.0;
    return std::exp(-eta * a - log_denominator(spec, beta, z, policy));
}

double cd_survivor(const HazardSpec& spec, std::span<const double> beta,
                   std::span<const double> z, int y, const TruncationPolicy& policy) {
    if (y < 0) throw std::invalid_argument("cd_survivor: y must be >= 0");
    const double eta = std::exp(linear_predictor(beta, z));
    const double log_den = log_denominator(spec, beta, z, policy);
    const int b = spec.tail_boundary();

    // log sum_{j=y+1}^{top} exp(-eta A_j) for the body part, plus any closed-form tail
    std::vector<double> terms;
    if (const auto* fin = std::get_if<FiniteUpperLimit>(&policy)) {
        if (y >= fin->y_plus) return 0.0;
        const int y_top = std::holds_alternative<InfiniteTail>(spec.tail)
                              ? std::min(fin->y_plus, b)
                              : fin->y_plus;
        const auto a = cumulative_hazard_grid(spec, y_top);
        for (int j = y + 1; j <= y_top; ++j)
            terms.push_back(-eta * a[static_cast<std::size_t>(j)]);
    } else {
        const auto* g = geometric_tail(spec);
        if (!g) throw std::invalid_argument("ExactGeometricTail requires a GeometricTail spec");
        if (!(g->alpha_tau > 0.0))
            throw std::domain_error("ExactGeometricTail: series diverges for alpha_tau = 0");
        const auto a = cumulative_hazard_grid(spec, b);
        for (int j = y + 1; j <= b; ++j)
            terms.push_back(-eta * a[static_cast<std::size_t>(j)]);
        terms.push_back(-eta * a.back() +
                        log_geom_tail(eta * g->alpha_tau, std::max(1, y + 1 - b)));
    }
    const double log_tail = log_sum_exp(terms);
    if (log_tail == -kInf) return 0.0;
    return std::exp(log_tail - log_den);
}

}  // namespace cdur
