#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cdur {

// Objective callback: returns the value at x and, when grad is non-empty,
// fills it with the gradient (same length as x).
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct OptimOptions {
    int max_iterations = 500;
    double rel_tol = 1e-9;   // relative change of the objective
    double grad_tol = 1e-6;  // max-norm of the gradient
};

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_max_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

// Dense BFGS ascent with Armijo backtracking. Accepted iterates never
// decrease the objective; convergence requires both the relative-change and
// gradient tests to hold.
OptimResult maximize_bfgs(const Objective& f, std::vector<double> x0,
                          const OptimOptions& opts = {});

// Symmetric positive definite solve helpers used for Wald standard errors.
// Both return false when the Cholesky factorization fails.
bool cholesky_factor(std::vector<double>& a, int n);                 // in-place lower factor
bool spd_inverse(const std::vector<double>& a, int n, std::vector<double>& inv);

}  // namespace cdur
