#include "cdur/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace cdur {

namespace {

constexpr double kGammaLo = -20.0;  // log-alpha boundary
constexpr double kGammaHi = 30.0;
constexpr double kWaldZ = 1.959963984540054;  // 97.5% normal quantile

struct Group {
    std::vector<double> z;
    std::vector<std::pair<int, int>> uncens;  // (y, count), ascending in y
    long n_cens = 0;
    long n_uncens = 0;
    // U_k = sum over uncensored observations of C_k(y) = #k-positions <= y;
    // depends on the layout only, so it is precomputed
    std::vector<double> u_cnt;
};

// Fixed description of one likelihood problem: parameter layout, covariate
// groups and the evaluation grid. Built once per fit.
struct Prepared {
    ParamLayout layout;
    std::vector<Group> groups;  // canonical covariate order
    int p = 0;
    int tau = -1;  // -1: no censoring
    int y_plus = 0;
    int y_top = 0;  // grid top: y_plus, or the boundary for infinite/exact tails
    bool exact_tail = false;
    bool infinite_tail = false;

    // position j=1..y_top -> alpha parameter index; -1: alpha_j = 0,
    // -2: value comes from the tail family (fixed or exponent-parametrized)
    std::vector<int> pos_param;
    std::vector<double> pos_leq_boundary;  // #k-positions at or below the boundary
    std::vector<double> pos_leq_tau;       // #k-positions at or below tau

    std::vector<std::string> warnings;
};

struct Workspace {
    std::vector<double> alpha, a, w, sufw, sufv, poly_d;
    std::vector<double> alpha_val, sum_wc, sum_sc;
};

int spec_default_y_plus(const Dataset& data) {
    const int m = data.pre_censoring_max.value_or(data.max_recorded_y());
    return 2 * m;
}

Prepared prepare(const Dataset& data, const FitConfig& config) {
    data.validate();
    Prepared prep;
    prep.p = static_cast<int>(data.covariate_dim());

    bool any_censored = false;
    int max_uncensored = -1;
    std::map<int, bool> distinct_uncens;
    for (const auto& o : data.observations) {
        if (o.delta) {
            max_uncensored = std::max(max_uncensored, o.y);
            if (o.y >= 1) distinct_uncens[o.y] = true;
        } else {
            any_censored = true;
        }
    }
    if (max_uncensored < 0)
        throw std::invalid_argument("unfittable data: no uncensored observations");
    if (any_censored) {
        if (!config.tau)
            throw std::invalid_argument("censored observations present but tau is not set");
        for (const auto& o : data.observations) {
            if (!o.delta && o.y != *config.tau)
                throw std::invalid_argument(
                    "only Type I censoring at a single tau is supported: censored y != tau");
            if (o.delta && o.y > *config.tau)
                throw std::invalid_argument("uncensored observation exceeds tau");
        }
        prep.tau = *config.tau;
    }

    ParamLayout& lay = prep.layout;
    lay.n_beta = prep.p;
    if (config.model == ModelKind::kPiecewiseConstant) {
        if (config.knots.empty())
            throw std::invalid_argument("piecewise model requires knots");
        for (std::size_t i = 0; i < config.knots.size(); ++i) {
            if (config.knots[i] < 1 || (i > 0 && config.knots[i] <= config.knots[i - 1]))
                throw std::invalid_argument("knots must be strictly increasing positive integers");
        }
        if (!std::holds_alternative<GeometricTail>(config.tail))
            throw std::invalid_argument("the piecewise model uses a constant tail level");
        // Under censoring the constant tail starts at the last observed
        // uncensored duration, exactly as in the semiparametric model; knot
        // intervals beyond the data collapse into the tail parameter. Without
        // that collapse the levels past the data are not identified and the
        // likelihood is maximized at degenerate hazard shapes.
        int kb = config.knots.back();
        if (any_censored) kb = std::min(kb, max_uncensored);
        for (int k : config.knots)
            if (k < kb) lay.knots.push_back(k);
        if (kb >= 1) lay.knots.push_back(kb);
        lay.boundary = kb;
        lay.tail = GeometricTail{};
        lay.tail_alpha_free = true;  // level beyond the boundary
    } else {
        for (const auto& [y, unused] : distinct_uncens) lay.support.push_back(y);
        lay.boundary = lay.support.empty() ? 0 : lay.support.back();
        if (!any_censored) {
            lay.tail = InfiniteTail{};
        } else if (std::holds_alternative<GeometricTail>(config.tail)) {
            lay.tail = GeometricTail{};
            lay.tail_alpha_free = true;
        } else if (std::holds_alternative<PolynomialTail>(config.tail)) {
            lay.tail = config.tail;
            lay.tail_gamma_free = true;
        } else if (std::holds_alternative<InfiniteTail>(config.tail)) {
            throw std::invalid_argument(
                "an infinite tail gives zero survivor mass at tau; censored data need a tail family");
        } else {
            lay.tail = config.tail;  // evaluation-only family, fully fixed
        }
    }
    prep.infinite_tail = std::holds_alternative<InfiniteTail>(lay.tail);

    prep.exact_tail = config.exact_tail && !prep.infinite_tail;
    if (prep.exact_tail && !std::holds_alternative<GeometricTail>(lay.tail))
        throw std::invalid_argument("exact_tail requires a geometric tail family");
    int y_plus = config.y_plus.value_or(spec_default_y_plus(data));
    if (y_plus >= 1000)
        prep.warnings.push_back("y_plus = " + std::to_string(y_plus) +
                                " is large; oversized truncation points can destabilize estimates");
    const int min_yp = std::max(lay.boundary, data.max_recorded_y()) + 1;
    if (y_plus < min_yp && !prep.infinite_tail) {
        prep.warnings.push_back("y_plus raised to " + std::to_string(min_yp) +
                                " to cover all support positions");
        y_plus = min_yp;
    }
    prep.y_plus = y_plus;
    prep.y_top = (prep.infinite_tail || prep.exact_tail) ? lay.boundary : y_plus;

    const int n_alpha = lay.n_alpha();
    prep.pos_param.assign(static_cast<std::size_t>(prep.y_top) + 1, -1);
    if (!lay.knots.empty()) {
        int lo = 0;
        for (std::size_t k = 0; k < lay.knots.size(); ++k) {
            for (int j = lo + 1; j <= std::min(lay.knots[k], prep.y_top); ++j)
                prep.pos_param[static_cast<std::size_t>(j)] = static_cast<int>(k);
            lo = lay.knots[k];
        }
    } else {
        for (std::size_t k = 0; k < lay.support.size(); ++k)
            if (lay.support[k] <= prep.y_top)
                prep.pos_param[static_cast<std::size_t>(lay.support[k])] = static_cast<int>(k);
    }
    for (int j = lay.boundary + 1; j <= prep.y_top; ++j)
        prep.pos_param[static_cast<std::size_t>(j)] = lay.tail_alpha_free ? n_alpha - 1 : -2;

    prep.pos_leq_boundary.assign(static_cast<std::size_t>(std::max(n_alpha, 1)), 0.0);
    prep.pos_leq_tau.assign(static_cast<std::size_t>(std::max(n_alpha, 1)), 0.0);
    for (int j = 1; j <= prep.y_top; ++j) {
        const int k = prep.pos_param[static_cast<std::size_t>(j)];
        if (k < 0) continue;
        if (j <= lay.boundary) prep.pos_leq_boundary[static_cast<std::size_t>(k)] += 1.0;
        if (prep.tau >= 0 && j <= prep.tau) prep.pos_leq_tau[static_cast<std::size_t>(k)] += 1.0;
    }

    std::map<std::vector<double>, Group> by_z;
    for (const auto& o : data.observations) {
        Group& grp = by_z[o.z];
        if (o.delta) {
            ++grp.n_uncens;
            grp.uncens.emplace_back(o.y, 1);
        } else {
            ++grp.n_cens;
        }
    }
    for (auto& [z, grp] : by_z) {
        grp.z = z;
        std::sort(grp.uncens.begin(), grp.uncens.end());
        std::vector<std::pair<int, int>> merged;
        for (const auto& [y, c] : grp.uncens) {
            if (!merged.empty() && merged.back().first == y)
                merged.back().second += c;
            else
                merged.emplace_back(y, c);
        }
        grp.uncens = std::move(merged);

        grp.u_cnt.assign(static_cast<std::size_t>(std::max(n_alpha, 1)), 0.0);
        long acc = 0;
        std::size_t idx = grp.uncens.size();
        for (int j = prep.y_top; j >= 1; --j) {
            while (idx > 0 && grp.uncens[idx - 1].first >= j) {
                acc += grp.uncens[idx - 1].second;
                --idx;
            }
            const int k = prep.pos_param[static_cast<std::size_t>(j)];
            if (k >= 0) grp.u_cnt[static_cast<std::size_t>(k)] += static_cast<double>(acc);
        }
        prep.groups.push_back(std::move(grp));
    }
    return prep;
}

// Log-likelihood and (optionally) its analytic gradient in the packed
// parametrization. Sums are arranged so the value stays finite for any
// finite parameter vector (survivor masses are evaluated max-shifted).
double evaluate(const Prepared& prep, std::span<const double> params,
                std::span<double> grad, Workspace& ws) {
    const ParamLayout& lay = prep.layout;
    const int p = lay.n_beta;
    const int n_alpha = lay.n_alpha();
    const int n_par = lay.n_params();
    const int y_top = prep.y_top;
    const int b = lay.boundary;
    const int tau = prep.tau;
    if (static_cast<int>(params.size()) != n_par)
        throw std::invalid_argument("packed parameter vector has wrong length");
    const bool want_grad = !grad.empty();
    if (want_grad && static_cast<int>(grad.size()) != n_par)
        throw std::invalid_argument("gradient buffer has wrong length");

    // cap far above the working range so exp and the cumulative sums stay finite
    constexpr double kGammaCap = 350.0;
    ws.alpha_val.assign(static_cast<std::size_t>(std::max(n_alpha, 1)), 0.0);
    for (int k = 0; k < n_alpha; ++k)
        ws.alpha_val[static_cast<std::size_t>(k)] =
            std::exp(std::min(params[static_cast<std::size_t>(p + k)], kGammaCap));
    const double poly_gamma =
        lay.tail_gamma_free ? params[static_cast<std::size_t>(n_par - 1)] : 0.0;

    // hazard increments on the grid and their cumulative sums
    ws.alpha.assign(static_cast<std::size_t>(y_top) + 1, 0.0);
    ws.poly_d.assign(static_cast<std::size_t>(y_top) + 1, 0.0);
    const bool fixed_tail_family = !lay.tail_alpha_free && !lay.tail_gamma_free &&
                                   !prep.infinite_tail && y_top > b;
    HazardSpec fixed_spec;
    if (fixed_tail_family) fixed_spec = lay.to_hazard_spec(params);
    for (int j = 1; j <= y_top; ++j) {
        const int k = prep.pos_param[static_cast<std::size_t>(j)];
        if (k >= 0) {
            ws.alpha[static_cast<std::size_t>(j)] = ws.alpha_val[static_cast<std::size_t>(k)];
        } else if (k == -2) {
            if (lay.tail_gamma_free) {
                const double off = static_cast<double>(j - b);
                const double aj = std::pow(off, poly_gamma);
                ws.alpha[static_cast<std::size_t>(j)] = aj;
                ws.poly_d[static_cast<std::size_t>(j)] = aj * std::log(off);
            } else {
                ws.alpha[static_cast<std::size_t>(j)] = alpha_at(fixed_spec, j);
            }
        }
    }
    ws.a.assign(static_cast<std::size_t>(y_top) + 1, 0.0);
    for (int j = 1; j <= y_top; ++j)
        ws.a[static_cast<std::size_t>(j)] =
            ws.a[static_cast<std::size_t>(j) - 1] + ws.alpha[static_cast<std::size_t>(j)];

    const int tail_k = lay.tail_alpha_free ? n_alpha - 1 : -1;
    const double tail_alpha_v = tail_k >= 0 ? ws.alpha_val[static_cast<std::size_t>(tail_k)] : 0.0;

    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    double ll = 0.0;

    for (const Group& grp : prep.groups) {
        double lp = 0.0;
        for (int r = 0; r < p; ++r)
            lp += params[static_cast<std::size_t>(r)] * grp.z[static_cast<std::size_t>(r)];
        const double eta = std::exp(std::min(std::max(lp, -700.0), 700.0));
        const double n_all = static_cast<double>(grp.n_uncens + grp.n_cens);

        ws.w.assign(static_cast<std::size_t>(y_top) + 1, 0.0);
        for (int j = 0; j <= y_top; ++j)
            ws.w[static_cast<std::size_t>(j)] = std::exp(-eta * ws.a[static_cast<std::size_t>(j)]);
        ws.sufw.assign(static_cast<std::size_t>(y_top) + 2, 0.0);
        for (int j = y_top; j >= 0; --j)
            ws.sufw[static_cast<std::size_t>(j)] =
                ws.sufw[static_cast<std::size_t>(j) + 1] + ws.w[static_cast<std::size_t>(j)];

        // denominator: body (the y=0 term is 1, so denom >= 1) plus closed-form tail
        double denom = ws.sufw[0];
        double tail_sum = 0.0, tail_sum_off = 0.0, r_over_1mr = 0.0;
        if (prep.exact_tail) {
            const double x = eta * tail_alpha_v;
            if (!(x > 0.0))
                throw std::domain_error("exact geometric tail diverges: alpha_tau * eta must be > 0");
            const double r = std::exp(-x);
            const double omr = -std::expm1(-x);
            const double wb = ws.w[static_cast<std::size_t>(b)];
            r_over_1mr = r / omr;
            tail_sum = wb * r_over_1mr;                 // sum_{y>b} w_y
            tail_sum_off = wb * r / (omr * omr);        // sum_{y>b} w_y (y - b)
            denom += tail_sum;
        }
        const double log_denom = std::log(denom);

        double sum_wa = 0.0;  // sum_y w_y A_y
        if (want_grad) {
            for (int j = 1; j <= y_top; ++j) {
                const double wj = ws.w[static_cast<std::size_t>(j)];
                if (wj > 0.0) sum_wa += wj * ws.a[static_cast<std::size_t>(j)];
            }
            if (prep.exact_tail)
                sum_wa += tail_sum * ws.a[static_cast<std::size_t>(b)] + tail_alpha_v * tail_sum_off;
        }

        double sum_cnt_a = 0.0;
        for (const auto& [y, cnt] : grp.uncens) {
            ll -= static_cast<double>(cnt) * eta * ws.a[static_cast<std::size_t>(y)];
            if (want_grad) sum_cnt_a += static_cast<double>(cnt) * ws.a[static_cast<std::size_t>(y)];
        }
        ll -= n_all * log_denom;

        // censored block: survivor mass S = sum_{y > tau} w_y and tail expectations
        double log_s = 0.0, es_a = 0.0, sv_total = 0.0, shift = 0.0;
        if (grp.n_cens > 0) {
            // one slot per alpha parameter plus one for a free tail exponent
            ws.sum_sc.assign(static_cast<std::size_t>(n_alpha) + 1, 0.0);
            if (prep.exact_tail && tau >= b) {
                const double x = eta * tail_alpha_v;
                const double omr = -std::expm1(-x);
                const int m = tau - b + 1;
                log_s = -eta * ws.a[static_cast<std::size_t>(b)] - static_cast<double>(m) * x -
                        std::log(omr);
                if (want_grad) {
                    es_a = ws.a[static_cast<std::size_t>(b)] +
                           tail_alpha_v * (static_cast<double>(m) + r_over_1mr);
                    for (int k = 0; k < n_alpha; ++k)
                        ws.sum_sc[static_cast<std::size_t>(k)] =
                            prep.pos_leq_boundary[static_cast<std::size_t>(k)];
                    if (tail_k >= 0)
                        ws.sum_sc[static_cast<std::size_t>(tail_k)] =
                            static_cast<double>(m) + r_over_1mr;
                }
            } else if (prep.exact_tail) {
                // piecewise spec whose boundary exceeds tau: body part in (tau, b]
                ws.sufv.assign(static_cast<std::size_t>(b) + 2, 0.0);
                ws.sufv[static_cast<std::size_t>(b) + 1] = tail_sum;
                for (int j = b; j >= tau + 1; --j)
                    ws.sufv[static_cast<std::size_t>(j)] =
                        ws.sufv[static_cast<std::size_t>(j) + 1] + ws.w[static_cast<std::size_t>(j)];
                const double s_lin = ws.sufv[static_cast<std::size_t>(tau) + 1];
                log_s = std::log(s_lin);
                if (want_grad) {
                    double body_a = 0.0;
                    for (int j = tau + 1; j <= b; ++j)
                        body_a += ws.w[static_cast<std::size_t>(j)] * ws.a[static_cast<std::size_t>(j)];
                    es_a = (body_a + tail_sum * ws.a[static_cast<std::size_t>(b)] +
                            tail_alpha_v * tail_sum_off) / s_lin;
                    for (int k = 0; k < n_alpha; ++k)
                        ws.sum_sc[static_cast<std::size_t>(k)] =
                            prep.pos_leq_tau[static_cast<std::size_t>(k)];
                    for (int j = tau + 1; j <= b; ++j) {
                        const int k = prep.pos_param[static_cast<std::size_t>(j)];
                        if (k >= 0)
                            ws.sum_sc[static_cast<std::size_t>(k)] +=
                                ws.sufv[static_cast<std::size_t>(j)] / s_lin;
                    }
                    if (tail_k >= 0)
                        ws.sum_sc[static_cast<std::size_t>(tail_k)] += tail_sum_off / s_lin;
                }
            } else {
                // truncated sum, shifted by its leading term to stay finite
                shift = -eta * ws.a[static_cast<std::size_t>(tau) + 1];
                ws.sufv.assign(static_cast<std::size_t>(y_top) + 2, 0.0);
                for (int j = y_top; j >= tau + 1; --j)
                    ws.sufv[static_cast<std::size_t>(j)] =
                        ws.sufv[static_cast<std::size_t>(j) + 1] +
                        std::exp(-eta * ws.a[static_cast<std::size_t>(j)] - shift);
                sv_total = ws.sufv[static_cast<std::size_t>(tau) + 1];
                log_s = shift + std::log(sv_total);
                if (want_grad) {
                    double num = 0.0;
                    for (int j = tau + 1; j <= y_top; ++j) {
                        const double vj = ws.sufv[static_cast<std::size_t>(j)] -
                                          ws.sufv[static_cast<std::size_t>(j) + 1];
                        if (vj > 0.0) num += vj * ws.a[static_cast<std::size_t>(j)];
                    }
                    es_a = num / sv_total;
                    for (int k = 0; k < n_alpha; ++k)
                        ws.sum_sc[static_cast<std::size_t>(k)] =
                            prep.pos_leq_tau[static_cast<std::size_t>(k)];
                    for (int j = tau + 1; j <= y_top; ++j) {
                        const int k = prep.pos_param[static_cast<std::size_t>(j)];
                        if (k >= 0) {
                            ws.sum_sc[static_cast<std::size_t>(k)] +=
                                ws.sufv[static_cast<std::size_t>(j)] / sv_total;
                        } else if (k == -2 && lay.tail_gamma_free &&
                                   ws.sufv[static_cast<std::size_t>(j)] > 0.0) {
                            ws.sum_sc[static_cast<std::size_t>(n_alpha)] +=
                                ws.poly_d[static_cast<std::size_t>(j)] *
                                ws.sufv[static_cast<std::size_t>(j)] / sv_total;
                        }
                    }
                }
            }
            // the -log_denom share of censored observations is already in the
            // n_all term above
            ll += static_cast<double>(grp.n_cens) * log_s;
        }

        if (!want_grad) continue;

        const double ed_a = sum_wa / denom;
        for (int r = 0; r < p; ++r) {
            double gb = eta * (ed_a * n_all - sum_cnt_a);
            if (grp.n_cens > 0) gb -= eta * static_cast<double>(grp.n_cens) * es_a;
            grad[static_cast<std::size_t>(r)] += grp.z[static_cast<std::size_t>(r)] * gb;
        }

        // sum_y w_y C_k(y) accumulated over k-positions via the suffix sums
        ws.sum_wc.assign(static_cast<std::size_t>(std::max(n_alpha, 1)), 0.0);
        double sum_wc_poly = 0.0;
        for (int j = 1; j <= y_top; ++j) {
            const int k = prep.pos_param[static_cast<std::size_t>(j)];
            if (k >= 0) {
                ws.sum_wc[static_cast<std::size_t>(k)] += ws.sufw[static_cast<std::size_t>(j)];
            } else if (k == -2 && lay.tail_gamma_free &&
                       ws.sufw[static_cast<std::size_t>(j)] > 0.0) {
                sum_wc_poly += ws.poly_d[static_cast<std::size_t>(j)] * ws.sufw[static_cast<std::size_t>(j)];
            }
        }
        if (prep.exact_tail) {
            for (int k = 0; k < n_alpha; ++k)
                ws.sum_wc[static_cast<std::size_t>(k)] +=
                    prep.pos_leq_boundary[static_cast<std::size_t>(k)] * tail_sum;
            if (tail_k >= 0) ws.sum_wc[static_cast<std::size_t>(tail_k)] += tail_sum_off;
        }

        for (int k = 0; k < n_alpha; ++k) {
            double da = -eta * grp.u_cnt[static_cast<std::size_t>(k)] +
                        eta * n_all * ws.sum_wc[static_cast<std::size_t>(k)] / denom;
            if (grp.n_cens > 0)
                da -= eta * static_cast<double>(grp.n_cens) * ws.sum_sc[static_cast<std::size_t>(k)];
            grad[static_cast<std::size_t>(p + k)] +=
                ws.alpha_val[static_cast<std::size_t>(k)] * da;
        }
        if (lay.tail_gamma_free) {
            double dg = eta * n_all * sum_wc_poly / denom;
            if (grp.n_cens > 0)
                dg -= eta * static_cast<double>(grp.n_cens) * ws.sum_sc[static_cast<std::size_t>(n_alpha)];
            grad[static_cast<std::size_t>(n_par - 1)] += dg;
        }
    }
    return ll;
}

}  // namespace

HazardSpec ParamLayout::to_hazard_spec(std::span<const double> packed) const {
    HazardSpec spec;
    spec.support = support;
    spec.knots = knots;
    const int n_level = static_cast<int>(support.size() + knots.size());
    for (int k = 0; k < n_level; ++k)
        spec.alphas.push_back(std::exp(packed[static_cast<std::size_t>(n_beta + k)]));
    spec.tail = tail;
    if (tail_alpha_free)
        spec.tail = GeometricTail{std::exp(packed[static_cast<std::size_t>(n_beta + n_level)])};
    else if (tail_gamma_free)
        spec.tail = PolynomialTail{packed[packed.size() - 1]};
    return spec;
}

ParamLayout build_parametrization(const Dataset& data, const FitConfig& config) {
    return prepare(data, config).layout;
}

int default_y_plus(const Dataset& data) { return spec_default_y_plus(data); }

double log_likelihood(std::span<const double> params, const Dataset& data,
                      const FitConfig& config) {
    Prepared prep = prepare(data, config);
    Workspace ws;
    return evaluate(prep, params, {}, ws);
}

double log_likelihood_grad(std::span<const double> params, const Dataset& data,
                           const FitConfig& config, std::span<double> grad) {
    Prepared prep = prepare(data, config);
    Workspace ws;
    return evaluate(prep, params, grad, ws);
}

FitResult fit(const Dataset& data, const FitConfig& config) {
    Prepared prep = prepare(data, config);
    const ParamLayout& lay = prep.layout;
    const int p = lay.n_beta;
    const int n_par = lay.n_params();

    FitResult out;
    out.model = config.model;
    out.tau = prep.tau >= 0 ? std::optional<int>(prep.tau) : std::nullopt;
    out.y_plus = prep.y_plus;
    out.warnings = prep.warnings;

    // beta = 0; alphas start at a crude geometric moment match
    double mean_y = 0.0;
    for (const auto& o : data.observations) mean_y += o.y;
    mean_y /= static_cast<double>(data.observations.size());
    const double gamma0 = std::log(1.0 / (1.0 + mean_y));
    std::vector<double> x0(static_cast<std::size_t>(n_par), 0.0);
    for (int k = 0; k < lay.n_alpha(); ++k) x0[static_cast<std::size_t>(p + k)] = gamma0;

    // Zero hazard increments are boundary MLEs; a smooth quadratic barrier
    // keeps the log-alphas in [-20, 30] without the gradient discontinuity a
    // hard clamp would introduce.
    Workspace ws;
    const Objective obj = [&](std::span<const double> x, std::span<double> g) {
        double v = evaluate(prep, x, g, ws);
        for (int k = 0; k < lay.n_alpha(); ++k) {
            const double gm = x[static_cast<std::size_t>(p + k)];
            const double over = gm > kGammaHi ? gm - kGammaHi : 0.0;
            const double under = gm < kGammaLo ? gm - kGammaLo : 0.0;
            v -= 0.5 * (over * over + under * under);
            if (!g.empty()) g[static_cast<std::size_t>(p + k)] -= over + under;
        }
        return v;
    };
    OptimResult opt = maximize_bfgs(obj, std::move(x0), config.optim);

    auto find_boundary = [&](const std::vector<double>& x) {
        std::vector<bool> b(static_cast<std::size_t>(n_par), false);
        for (int k = 0; k < lay.n_alpha(); ++k)
            if (x[static_cast<std::size_t>(p + k)] <= kGammaLo + 1e-6)
                b[static_cast<std::size_t>(p + k)] = true;
        return b;
    };

    // observed information from central differences of the analytic gradient.
    // Hazard increments estimated at (numerically) zero leave no curvature in
    // their log coordinates and are profiled out; coefficients never are.
    struct Information {
        std::vector<int> keep;
        std::vector<double> cov;  // inverse over the kept block
        bool ok = false;
        bool dropped = false;
    };
    auto make_information = [&](const std::vector<double>& x,
                                const std::vector<bool>& at_boundary) {
        Information info;
        std::vector<double> neg_h(static_cast<std::size_t>(n_par) * n_par, 0.0);
        std::vector<double> xp = x;
        std::vector<double> gp(static_cast<std::size_t>(n_par)), gm(static_cast<std::size_t>(n_par));
        for (int c = 0; c < n_par; ++c) {
            const double h =
                config.hessian_step * std::max(1.0, std::abs(x[static_cast<std::size_t>(c)]));
            xp[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] + h;
            evaluate(prep, xp, gp, ws);
            xp[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)] - h;
            evaluate(prep, xp, gm, ws);
            xp[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c)];
            for (int r = 0; r < n_par; ++r)
                neg_h[static_cast<std::size_t>(r) * n_par + c] -=
                    (gp[static_cast<std::size_t>(r)] - gm[static_cast<std::size_t>(r)]) / (2.0 * h);
        }
        for (int r = 0; r < n_par; ++r)
            for (int c = r + 1; c < n_par; ++c) {
                const double v = 0.5 * (neg_h[static_cast<std::size_t>(r) * n_par + c] +
                                        neg_h[static_cast<std::size_t>(c) * n_par + r]);
                neg_h[static_cast<std::size_t>(r) * n_par + c] = v;
                neg_h[static_cast<std::size_t>(c) * n_par + r] = v;
            }

        double max_diag = 0.0;
        for (int i = 0; i < n_par; ++i)
            max_diag = std::max(max_diag, neg_h[static_cast<std::size_t>(i) * n_par + i]);
        for (int i = 0; i < n_par; ++i) {
            const double d = neg_h[static_cast<std::size_t>(i) * n_par + i];
            if (i < p || (d > 1e-6 * max_diag && !at_boundary[static_cast<std::size_t>(i)]))
                info.keep.push_back(i);
            else
                info.dropped = true;
        }
        const int nf = static_cast<int>(info.keep.size());
        std::vector<double> sub(static_cast<std::size_t>(nf) * nf);
        for (int r = 0; r < nf; ++r)
            for (int c = 0; c < nf; ++c)
                sub[static_cast<std::size_t>(r) * nf + c] =
                    neg_h[static_cast<std::size_t>(info.keep[static_cast<std::size_t>(r)]) * n_par +
                          info.keep[static_cast<std::size_t>(c)]];
        info.ok = nf > 0 && spd_inverse(sub, nf, info.cov);
        return info;
    };

    std::vector<bool> at_boundary = find_boundary(opt.x);
    Information info = make_information(opt.x, at_boundary);

    // Near the optimum the line search cannot resolve objective improvements
    // below one ulp of the log-likelihood, which can leave the gradient just
    // above its tolerance. Newton steps with the observed information do not
    // compare objective values, so they finish the job.
    if (!opt.converged && info.ok) {
        std::vector<double> g(static_cast<std::size_t>(n_par));
        double ll_cur = evaluate(prep, opt.x, g, ws);
        auto gmax = [&](const std::vector<double>& v) {
            double m = 0.0;
            for (int i : info.keep) m = std::max(m, std::abs(v[static_cast<std::size_t>(i)]));
            return m;
        };
        const int nf = static_cast<int>(info.keep.size());
        for (int step = 0; step < 3 && gmax(g) > config.optim.grad_tol; ++step) {
            std::vector<double> x_new = opt.x;
            for (int r = 0; r < nf; ++r) {
                double delta = 0.0;
                for (int c = 0; c < nf; ++c)
                    delta += info.cov[static_cast<std::size_t>(r) * nf + c] *
                             g[static_cast<std::size_t>(info.keep[static_cast<std::size_t>(c)])];
                x_new[static_cast<std::size_t>(info.keep[static_cast<std::size_t>(r)])] += delta;
            }
            std::vector<double> g_new(static_cast<std::size_t>(n_par));
            const double ll_new = evaluate(prep, x_new, g_new, ws);
            if (!std::isfinite(ll_new) || gmax(g_new) >= gmax(g) ||
                ll_new < ll_cur - 1e-8 * (std::abs(ll_cur) + 1.0))
                break;
            opt.x = std::move(x_new);
            g = std::move(g_new);
            ll_cur = ll_new;
        }
        if (gmax(g) <= config.optim.grad_tol) {
            opt.converged = true;
            at_boundary = find_boundary(opt.x);
            info = make_information(opt.x, at_boundary);
        }
    }

    out.converged = opt.converged;
    out.iterations = opt.iterations;
    out.log_likelihood = evaluate(prep, opt.x, {}, ws);  // without the barrier
    if (!opt.converged)
        out.warnings.push_back("optimizer did not converge: " + opt.message);
    for (int k = 0; k < lay.n_alpha(); ++k)
        if (at_boundary[static_cast<std::size_t>(p + k)])
            out.warnings.push_back("alpha parameter " + std::to_string(k) +
                                   " at the zero boundary (log-alpha -20)");
    if (info.dropped)
        out.warnings.push_back("zero-boundary hazard increments profiled out of the information matrix");

    out.beta_hat.assign(opt.x.begin(), opt.x.begin() + p);
    out.alpha_hat = lay.to_hazard_spec(opt.x);

    const int nf = static_cast<int>(info.keep.size());
    const std::vector<double>& cov = info.cov;
    out.se_available = info.ok;
    if (!out.se_available)
        out.warnings.push_back("observed information is singular; standard errors unavailable");

    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.beta_se.assign(static_cast<std::size_t>(p), nan);
    out.beta_ci.assign(static_cast<std::size_t>(p), {nan, nan});
    if (out.se_available) {
        for (int r = 0; r < p; ++r) {
            // beta parameters come first among the kept ones
            const double v = cov[static_cast<std::size_t>(r) * nf + r];
            const double se = v > 0.0 ? std::sqrt(v) : nan;
            out.beta_se[static_cast<std::size_t>(r)] = se;
            out.beta_ci[static_cast<std::size_t>(r)] = {
                out.beta_hat[static_cast<std::size_t>(r)] - kWaldZ * se,
                out.beta_hat[static_cast<std::size_t>(r)] + kWaldZ * se};
            if (!(se > 0.0)) out.se_available = false;
        }
        if (!out.se_available)
            out.warnings.push_back("non-positive variance estimate; standard errors unavailable");
    }
    return out;
}

bool covariate_shift_check(const Dataset& data, const FitConfig& config,
                           std::span<const double> c,
                           double beta_tol, double loglik_tol) {
    if (c.size() != data.covariate_dim())
        throw std::invalid_argument("shift vector dimension mismatch");
    FitResult base = fit(data, config);

    Dataset shifted = data;
    for (auto& o : shifted.observations)
        for (std::size_t i = 0; i < o.z.size(); ++i) o.z[i] -= c[i];
    FitResult alt = fit(shifted, config);

    if (!base.converged || !alt.converged) return false;
    if (std::abs(base.log_likelihood - alt.log_likelihood) > loglik_tol) return false;
    for (std::size_t i = 0; i < c.size(); ++i)
        if (std::abs(base.beta_hat[i] - alt.beta_hat[i]) > beta_tol) return false;
    double scale = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) scale += base.beta_hat[i] * c[i];
    scale = std::exp(scale);
    for (std::size_t k = 0; k < base.alpha_hat.alphas.size(); ++k) {
        const double a0 = base.alpha_hat.alphas[k];
        const double a1 = alt.alpha_hat.alphas[k];
        if (a0 < 1e-8 && a1 < 1e-8) continue;  // both at the zero boundary
        if (std::abs(a1 / a0 - scale) > beta_tol * std::max(1.0, scale)) return false;
    }
    return true;
}

}  // namespace cdur
