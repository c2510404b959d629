#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cdur/dataset.hpp"
#include "cdur/hazard.hpp"
#include "cdur/optimize.hpp"

namespace cdur {

enum class ModelKind { kSemiparametric, kPiecewiseConstant };

struct FitConfig {
    ModelKind model = ModelKind::kSemiparametric;
    std::vector<int> knots;  // required for the piecewise model

    std::optional<int> tau;     // Type I censoring value
    std::optional<int> y_plus;  // denominator truncation; default: 2x rule
    // Tail family used beyond the boundary when censoring is present.
    // Fittable families: GeometricTail (default) and PolynomialTail.
    TailSpec tail = GeometricTail{};
    // use the closed-form geometric tail series instead of truncating at y_plus
    bool exact_tail = false;

    OptimOptions optim;
    // relative step scale for the central-difference Hessian,
    // h_i = hessian_step * max(1, |theta_i|)
    double hessian_step = 6.055454452393343e-06;  // cbrt(machine epsilon)
};

// Packed parameter vector layout: [beta_0..beta_{p-1}, log alpha parameters...,
// (log tail level | tail exponent)].
struct ParamLayout {
    int n_beta = 0;
    std::vector<int> support;  // semiparametric support positions
    std::vector<int> knots;    // piecewise knot right endpoints
    int boundary = 0;          // tail boundary
    TailSpec tail;             // family skeleton; parameter values are placeholders
    bool tail_alpha_free = false;  // geometric tail level is a parameter
    bool tail_gamma_free = false;  // polynomial tail exponent is a parameter

    int n_alpha() const {
        return static_cast<int>(support.size() + knots.size()) + (tail_alpha_free ? 1 : 0);
    }
    int n_params() const { return n_beta + n_alpha() + (tail_gamma_free ? 1 : 0); }

    // spec with the packed alpha values filled in (for reporting)
    HazardSpec to_hazard_spec(std::span<const double> packed) const;
};

struct FitResult {
    ModelKind model = ModelKind::kSemiparametric;
    std::optional<int> tau;
    int y_plus = 0;

    std::vector<double> beta_hat;
    std::vector<double> beta_se;
    std::vector<std::pair<double, double>> beta_ci;  // 95% Wald
    bool se_available = false;

    HazardSpec alpha_hat;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> warnings;
};

// One alpha parameter per distinct uncensored y >= 1 (semiparametric) or per
// knot interval plus a tail level (piecewise). A free geometric tail level is
// added iff censoring is present; otherwise the semiparametric tail is
// infinite. Throws on unfittable data (no uncensored observations).
ParamLayout build_parametrization(const Dataset& data, const FitConfig& config);

// Twice the largest pre-censoring value (falls back to the largest recorded
// value when the dataset does not carry it).
int default_y_plus(const Dataset& data);

// Censored current-duration log-likelihood at a packed parameter vector.
double log_likelihood(std::span<const double> params, const Dataset& data,
                      const FitConfig& config);
// Same, also filling the analytic gradient.
double log_likelihood_grad(std::span<const double> params, const Dataset& data,
                           const FitConfig& config, std::span<double> grad);

FitResult fit(const Dataset& data, const FitConfig& config);

// Exact reparametrization identity of the model: shifting covariates by c
// leaves beta_hat and the maximized log-likelihood unchanged and rescales the
// alphas by exp(beta_hat' c).
bool covariate_shift_check(const Dataset& data, const FitConfig& config,
                           std::span<const double> c,
                           double beta_tol = 1e-4, double loglik_tol = 1e-6);

}  // namespace cdur
