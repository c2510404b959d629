#include "cdur/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdur {

namespace {

double max_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

OptimResult maximize_bfgs(const Objective& f, std::vector<double> x0,
                          const OptimOptions& opts) {
    const int n = static_cast<int>(x0.size());
    OptimResult res;
    res.x = std::move(x0);

    std::vector<double> g(n), g_new(n), d(n), x_new(n), s(n), y(n), hy(n);
    // inverse Hessian approximation, row-major dense
    std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i) * n + i] = 1.0;

    double fx = f(res.x, g);
    if (!std::isfinite(fx)) {
        res.value = fx;
        res.message = "objective not finite at the starting point";
        return res;
    }
    if (n == 0 || max_norm(g) <= opts.grad_tol) {
        res.value = fx;
        res.grad_max_norm = max_norm(g);
        res.converged = true;
        return res;
    }

    auto reset_h = [&]() {
        std::fill(h.begin(), h.end(), 0.0);
        for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i) * n + i] = 1.0;
    };

    int it = 0;
    bool retried = false;
    for (; it < opts.max_iterations && !res.converged; ++it) {
        // ascent direction d = H g
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            const double* row = h.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) acc += row[j] * g[j];
            d[i] = acc;
        }
        double dg = 0.0;
        for (int i = 0; i < n; ++i) dg += d[i] * g[i];
        if (!(dg > 0.0)) {
            // H lost positive definiteness; restart from steepest ascent
            reset_h();
            d = g;
            dg = 0.0;
            for (int i = 0; i < n; ++i) dg += g[i] * g[i];
            if (!(dg > 0.0)) break;  // zero gradient
        }

        // Armijo backtracking; accepted iterates never decrease f
        constexpr double kArmijo = 1e-4;
        double step = 1.0;
        double f_new = -std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (int i = 0; i < n; ++i) x_new[i] = res.x[i] + step * d[i];
            f_new = f(x_new, {});
            if (std::isfinite(f_new) && f_new >= fx + kArmijo * step * dg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!retried) {
                // a stale curvature approximation can produce hopeless
                // directions; restart once from steepest ascent
                retried = true;
                reset_h();
                continue;
            }
            res.message = "line search failed to find an improving step";
            break;
        }
        retried = false;

        f(x_new, g_new);  // gradient at the accepted point

        for (int i = 0; i < n; ++i) {
            s[i] = x_new[i] - res.x[i];
            y[i] = g_new[i] - g[i];
        }
        double sy = 0.0, yy = 0.0;
        for (int i = 0; i < n; ++i) {
            sy += s[i] * y[i];
            yy += y[i] * y[i];
        }
        // BFGS update of H; for ascent the curvature condition is s'y < 0
        const double curv = -sy;
        if (curv > 1e-12 * std::sqrt(yy) * max_norm(s)) {
            if (it == 0 && yy > 0.0) {
                // initial scaling (Nocedal & Wright eq. 6.20)
                const double scale = curv / yy;
                std::fill(h.begin(), h.end(), 0.0);
                for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i) * n + i] = scale;
            }
            const double rho = 1.0 / curv;
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                const double* row = h.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) acc += row[j] * y[j];
                hy[i] = acc;  // H y (H symmetric)
            }
            double yhy = 0.0;
            for (int i = 0; i < n; ++i) yhy += y[i] * hy[i];
            const double c = rho * rho * yhy + rho;
            for (int i = 0; i < n; ++i) {
                double* row = h.data() + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j)
                    row[j] += c * s[i] * s[j] + rho * (hy[i] * s[j] + s[i] * hy[j]);
            }
        }

        const double rel_change = std::abs(f_new - fx) / (std::abs(fx) + 1.0);
        res.x = x_new;
        fx = f_new;
        g = g_new;
        res.converged = rel_change < opts.rel_tol && max_norm(g) <= opts.grad_tol;
    }

    res.value = fx;
    res.grad_max_norm = max_norm(g);
    res.iterations = it;
    if (!res.converged && res.message.empty())
        res.message = "iteration limit reached";
    return res;
}

bool cholesky_factor(std::vector<double>& a, int n) {
    for (int j = 0; j < n; ++j) {
        double diag = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            const double v = a[static_cast<std::size_t>(j) * n + k];
            diag -= v * v;
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double l_jj = std::sqrt(diag);
        a[static_cast<std::size_t>(j) * n + j] = l_jj;
        for (int i = j + 1; i < n; ++i) {
            double v = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k)
                v -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            a[static_cast<std::size_t>(i) * n + j] = v / l_jj;
        }
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = 0.0;
    return true;
}

bool spd_inverse(const std::vector<double>& a, int n, std::vector<double>& inv) {
    std::vector<double> l = a;
    if (!cholesky_factor(l, n)) return false;
    inv.assign(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> col(n);
    for (int e = 0; e < n; ++e) {
        for (int i = 0; i < n; ++i) {
            double v = (i == e) ? 1.0 : 0.0;
            for (int k = 0; k < i; ++k) v -= l[static_cast<std::size_t>(i) * n + k] * col[k];
            col[i] = v / l[static_cast<std::size_t>(i) * n + i];
        }
        for (int i = n - 1; i >= 0; --i) {
            double v = col[i];
            for (int k = i + 1; k < n; ++k) v -= l[static_cast<std::size_t>(k) * n + i] * col[k];
            col[i] = v / l[static_cast<std::size_t>(i) * n + i];
        }
        for (int i = 0; i < n; ++i) inv[static_cast<std::size_t>(i) * n + e] = col[i];
    }
    return true;
}

}  // namespace cdur
