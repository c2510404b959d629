#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace cdur {

// ---------------------------------------------------------------------------
// Tail families for the discrete hazard increments alpha_y beyond the tail
// boundary b (the largest support point, or the largest knot for piecewise
// specs). Offsets are k = y - b, k >= 1.
// ---------------------------------------------------------------------------

// alpha_y = alpha_tau for all y > b (constant hazard: geometric tail).
struct GeometricTail {
    double alpha_tau = 0.0;
};

// alpha_y = alpha_tau ^ (gamma * (k - 1 + first_offset)). The exponent origin
// is ambiguous in the literature, so the caller picks it; first_offset = 0
// makes the first tail increment alpha_tau^0 = 1.
struct PowerDecayTail {
    double alpha_tau = 0.5;
    double gamma = 1.0;
    int first_offset = 0;
};

// alpha_y = theta * (y^alpha0 - (y-1)^alpha0), evaluated at the absolute
// position y (not the offset).
struct WeibullTail {
    double theta = 1.0;
    double alpha0 = 1.0;
};

// alpha_y = k^gamma.
struct PolynomialTail {
    double gamma = 0.0;
};

// alpha_y = +infinity beyond the boundary: all mass of Y lies in [0, b].
// This is the no-censoring convention.
struct InfiniteTail {};

using TailSpec = std::variant<GeometricTail, PowerDecayTail, WeibullTail,
                              PolynomialTail, InfiniteTail>;

// ---------------------------------------------------------------------------
// HazardSpec: the nonparametric part of the model. Either a semiparametric
// spec (alpha may be positive at the listed support points only) or a
// piecewise-constant spec (one level per knot interval (t_{k-1}, t_k]).
// alpha_0 == 0 always and is never stored.
// ---------------------------------------------------------------------------
struct HazardSpec {
    std::vector<int> support;    // strictly increasing, entries >= 1; empty for piecewise
    std::vector<double> alphas;  // one per support point, or one level per knot interval
    std::vector<int> knots;      // strictly increasing right endpoints; empty for semiparametric
    TailSpec tail = GeometricTail{};

    bool piecewise() const { return !knots.empty(); }

    // largest support point or largest knot; 0 when there is neither
    int tail_boundary() const;

    // throws std::invalid_argument on violated invariants
    void validate() const;
};

// ---------------------------------------------------------------------------
// Truncation of the infinite denominator sum of the current-duration PMF.
// ---------------------------------------------------------------------------
struct FiniteUpperLimit {
    int y_plus = 0;  // sum runs over y = 0..y_plus
};

// Replace the sum beyond the boundary with the closed-form geometric series;
// valid only when the tail is GeometricTail with alpha_tau > 0.
struct ExactGeometricTail {};

using TruncationPolicy = std::variant<FiniteUpperLimit, ExactGeometricTail>;

// ---------------------------------------------------------------------------
// Operations. All are pure and safe for concurrent use.
// ---------------------------------------------------------------------------

double linear_predictor(std::span<const double> beta, std::span<const double> z);

// alpha_y; 0 for y = 0, the stored value on the support / interval level,
// the tail family's value beyond the boundary (may be +infinity).
double alpha_at(const HazardSpec& spec, int y);

// A_y = sum_{j=0}^{y} alpha_j
double cumulative_hazard(const HazardSpec& spec, int y);

// A_0..A_ymax in one pass
std::vector<double> cumulative_hazard_grid(const HazardSpec& spec, int y_max);

// survivor of the total duration: Fbar_T(y|z) = exp{-exp(beta'z) A_y}
double survival_T(const HazardSpec& spec, std::span<const double> beta,
                  std::span<const double> z, int y);

// discrete hazard probability lambda(y|z) = 1 - exp{-alpha_y exp(beta'z)}
double hazard_prob(const HazardSpec& spec, std::span<const double> beta,
                   std::span<const double> z, int y);

// log sum_{y>=0} exp{-exp(beta'z) A_y} under the given truncation policy
double log_denominator(const HazardSpec& spec, std::span<const double> beta,
                       std::span<const double> z, const TruncationPolicy& policy);

// current-duration PMF g(y|z) and survivor Gbar(y|z) = 1 - sum_{j<=y} g(j|z)
double cd_pmf(const HazardSpec& spec, std::span<const double> beta,
              std::span<const double> z, int y, const TruncationPolicy& policy);
double cd_survivor(const HazardSpec& spec, std::span<const double> beta,
                   std::span<const double> z, int y, const TruncationPolicy& policy);

}  // namespace cdur
