#include "cdur/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace cdur {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

int parse_int(const std::string& s, const std::string& where) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument(where + ": '" + s + "' is not an integer");
    return v;
}

double parse_double(const std::string& s, const std::string& where) {
    if (s.empty()) throw std::invalid_argument(where + ": empty numeric field");
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || !std::isfinite(v))
        throw std::invalid_argument(where + ": '" + s + "' is not a finite number");
    return v;
}

// --- JSON schema helpers; errors carry the JSON path ---

const json& member(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key))
        throw std::invalid_argument(path + "." + key + ": missing");
    return j.at(key);
}

double num_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_number()) throw std::invalid_argument(path + "." + key + ": expected number");
    return v.get<double>();
}

int int_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_number_integer())
        throw std::invalid_argument(path + "." + key + ": expected integer");
    return v.get<int>();
}

std::string str_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_string()) throw std::invalid_argument(path + "." + key + ": expected string");
    return v.get<std::string>();
}

std::vector<int> int_array_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = member(j, key, path);
    if (!v.is_array()) throw std::invalid_argument(path + "." + key + ": expected array");
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer())
            throw std::invalid_argument(path + "." + key + ": expected integer entries");
        out.push_back(e.get<int>());
    }
    return out;
}

json tail_to_json(const TailSpec& tail) {
    json t;
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, GeometricTail>) {
                t["family"] = "geometric";
                t["alpha_tau"] = v.alpha_tau;
            } else if constexpr (std::is_same_v<T, PowerDecayTail>) {
                t["family"] = "power-decay";
                t["alpha_tau"] = v.alpha_tau;
                t["gamma"] = v.gamma;
                t["first_offset"] = v.first_offset;
            } else if constexpr (std::is_same_v<T, WeibullTail>) {
                t["family"] = "weibull";
                t["theta"] = v.theta;
                t["alpha0"] = v.alpha0;
            } else if constexpr (std::is_same_v<T, PolynomialTail>) {
                t["family"] = "polynomial";
                t["gamma"] = v.gamma;
            } else {
                t["family"] = "infinite";
            }
        },
        tail);
    return t;
}

TailSpec tail_from_json(const json& t, const std::string& path) {
    const std::string family = str_at(t, "family", path);
    if (family == "geometric") return GeometricTail{num_at(t, "alpha_tau", path)};
    if (family == "power-decay")
        return PowerDecayTail{num_at(t, "alpha_tau", path), num_at(t, "gamma", path),
                              t.contains("first_offset") ? int_at(t, "first_offset", path) : 0};
    if (family == "weibull")
        return WeibullTail{num_at(t, "theta", path), num_at(t, "alpha0", path)};
    if (family == "polynomial") return PolynomialTail{num_at(t, "gamma", path)};
    if (family == "infinite") return InfiniteTail{};
    throw std::invalid_argument(path + ".family: unknown tail family '" + family + "'");
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

Dataset dataset_from_csv(const std::string& text, const std::string& origin) {
    Dataset data;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument(origin + ": empty file, header expected");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "y" || header[1] != "delta")
        throw std::invalid_argument(origin + ": header must start with 'y,delta'");
    data.covariate_names.assign(header.begin() + 2, header.end());

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        const std::string where = origin + ":" + std::to_string(lineno);
        if (cells.size() != header.size())
            throw std::invalid_argument(where + ": expected " + std::to_string(header.size()) +
                                        " fields, got " + std::to_string(cells.size()));
        Observation o;
        o.y = parse_int(cells[0], where);
        if (o.y < 0) throw std::invalid_argument(where + ": y must be >= 0");
        const int d = parse_int(cells[1], where);
        if (d != 0 && d != 1) throw std::invalid_argument(where + ": delta must be 0 or 1");
        o.delta = d == 1;
        for (std::size_t i = 2; i < cells.size(); ++i)
            o.z.push_back(parse_double(cells[i], where));
        data.observations.push_back(std::move(o));
    }
    return data;
}

Dataset read_dataset_csv(const std::string& path) {
    return dataset_from_csv(read_text_file(path), path);
}

std::string dataset_to_csv(const Dataset& data) {
    std::ostringstream out;
    out << "y,delta";
    for (const auto& name : data.covariate_names) out << ',' << name;
    out << '\n';
    for (const auto& o : data.observations) {
        out << o.y << ',' << (o.delta ? 1 : 0);
        for (double v : o.z) out << ',' << fmt(v);
        out << '\n';
    }
    return out.str();
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    write_text_file(path, dataset_to_csv(data));
}

std::string fit_result_to_json(const FitResult& res,
                               const std::vector<std::string>& covariate_names) {
    json j;
    j["model"] = res.model == ModelKind::kSemiparametric ? "semiparametric" : "piecewise";
    if (res.tau)
        j["tau"] = *res.tau;
    else
        j["tau"] = nullptr;
    j["y_plus"] = res.y_plus;

    json beta = json::array();
    for (std::size_t i = 0; i < res.beta_hat.size(); ++i) {
        json b;
        b["name"] = i < covariate_names.size() ? covariate_names[i] : ("z" + std::to_string(i));
        b["estimate"] = res.beta_hat[i];
        if (res.se_available) {
            b["se"] = res.beta_se[i];
            b["ci_lo"] = res.beta_ci[i].first;
            b["ci_hi"] = res.beta_ci[i].second;
        } else {
            b["se"] = nullptr;
            b["ci_lo"] = nullptr;
            b["ci_hi"] = nullptr;
        }
        beta.push_back(b);
    }
    j["beta"] = beta;

    // alpha entries keyed by support point / knot right endpoint, plus the
    // fitted tail level when there is one
    json alpha = json::object();
    const auto& spec = res.alpha_hat;
    const auto& pos = spec.piecewise() ? spec.knots : spec.support;
    for (std::size_t k = 0; k < pos.size(); ++k)
        alpha[std::to_string(pos[k])] = spec.alphas[k];
    if (const auto* g = std::get_if<GeometricTail>(&spec.tail)) alpha["tail"] = g->alpha_tau;
    j["alpha"] = alpha;
    j["support"] = spec.support;
    j["knots"] = spec.knots;
    j["alpha_estimates"] = spec.alphas;
    j["tail"] = tail_to_json(spec.tail);

    j["log_likelihood"] = res.log_likelihood;
    j["converged"] = res.converged;
    j["iterations"] = res.iterations;
    j["se_available"] = res.se_available;
    j["warnings"] = res.warnings;
    return j.dump(2) + "\n";
}

FittedModel fitted_model_from_json(const std::string& text) {
    const json j = json::parse(text);
    FittedModel m;
    const json& beta = member(j, "beta", "$");
    if (!beta.is_array()) throw std::invalid_argument("$.beta: expected array");
    for (std::size_t i = 0; i < beta.size(); ++i) {
        const std::string path = "$.beta[" + std::to_string(i) + "]";
        m.covariate_names.push_back(str_at(beta[i], "name", path));
        m.beta.push_back(num_at(beta[i], "estimate", path));
    }
    for (int s : int_array_at(j, "support", "$")) m.spec.support.push_back(s);
    for (int k : int_array_at(j, "knots", "$")) m.spec.knots.push_back(k);
    const json& est = member(j, "alpha_estimates", "$");
    if (!est.is_array()) throw std::invalid_argument("$.alpha_estimates: expected array");
    for (const auto& e : est) m.spec.alphas.push_back(e.get<double>());
    m.spec.tail = tail_from_json(member(j, "tail", "$"), "$.tail");
    m.y_plus = int_at(j, "y_plus", "$");
    const json& tau = member(j, "tau", "$");
    if (!tau.is_null()) m.tau = tau.get<int>();
    m.spec.validate();
    return m;
}

std::string sim_sidecar_json(const DgpSpec& spec, const SimConfig& config,
                             int pre_censoring_max) {
    json j;
    std::visit(
        [&](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, GeometricDgp>) {
                j["dgp"] = "geometric";
                j["theta"] = d.theta;
            } else if constexpr (std::is_same_v<T, PiecewiseGeometricDgp>) {
                j["dgp"] = "piecewise-geometric";
                j["theta"] = d.theta;
                j["alpha0"] = d.alpha0;
                j["knot_grid"] = d.knot_grid;
            } else {
                j["dgp"] = "discrete-weibull";
                j["theta"] = d.theta;
                j["alpha0"] = d.alpha0;
            }
        },
        spec.hazard);
    j["beta1"] = spec.beta1;
    j["covariate_p"] = spec.covariate_p;
    j["n"] = config.n;
    if (config.tau)
        j["tau"] = *config.tau;
    else
        j["tau"] = nullptr;
    j["horizon"] = config.horizon;
    j["seed"] = config.seed;
    j["sampler"] = config.sampler == SamplerKind::kRenewal ? "renewal" : "length-biased";
    j["forward_recurrence"] = config.forward_recurrence;
    j["pre_censoring_max"] = pre_censoring_max;
    return j.dump(2) + "\n";
}

StudyConfig study_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("study config: ") + e.what());
    }
    StudyConfig cfg;
    cfg.replications = int_at(j, "replications", "$");
    if (cfg.replications < 2)
        throw std::invalid_argument("$.replications: must be >= 2");
    cfg.n = int_at(j, "n", "$");
    const json& seed = member(j, "base_seed", "$");
    if (!seed.is_number()) throw std::invalid_argument("$.base_seed: expected number");
    cfg.base_seed = seed.get<std::uint64_t>();
    if (j.contains("parallelism")) cfg.parallelism = int_at(j, "parallelism", "$");

    const json& cells = member(j, "cells", "$");
    if (!cells.is_array()) throw std::invalid_argument("$.cells: expected array");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string path = "$.cells[" + std::to_string(i) + "]";
        const json& c = cells[i];
        StudyCell cell;
        cell.scenario = str_at(c, "scenario", path);

        const json& dgp = member(c, "dgp", path);
        const std::string variant = str_at(dgp, "variant", path + ".dgp");
        if (variant == "geometric") {
            cell.dgp.hazard = GeometricDgp{num_at(dgp, "theta", path + ".dgp")};
        } else if (variant == "piecewise-geometric") {
            PiecewiseGeometricDgp d;
            d.theta = num_at(dgp, "theta", path + ".dgp");
            d.alpha0 = num_at(dgp, "alpha0", path + ".dgp");
            if (dgp.contains("knot_grid"))
                d.knot_grid = int_array_at(dgp, "knot_grid", path + ".dgp");
            cell.dgp.hazard = d;
        } else if (variant == "discrete-weibull") {
            cell.dgp.hazard = DiscreteWeibullDgp{num_at(dgp, "theta", path + ".dgp"),
                                                 num_at(dgp, "alpha0", path + ".dgp")};
        } else {
            throw std::invalid_argument(path + ".dgp.variant: unknown variant '" + variant + "'");
        }
        if (dgp.contains("beta1")) cell.dgp.beta1 = num_at(dgp, "beta1", path + ".dgp");
        if (dgp.contains("covariate_p"))
            cell.dgp.covariate_p = num_at(dgp, "covariate_p", path + ".dgp");

        if (c.contains("tau") && !c.at("tau").is_null())
            cell.tau = int_at(c, "tau", path);

        const json& model = member(c, "model", path);
        const std::string type = str_at(model, "type", path + ".model");
        if (type == "semiparametric") {
            cell.model.model = ModelKind::kSemiparametric;
        } else if (type == "piecewise") {
            cell.model.model = ModelKind::kPiecewiseConstant;
            cell.model.knots = int_array_at(model, "knots", path + ".model");
        } else {
            throw std::invalid_argument(path + ".model.type: unknown type '" + type + "'");
        }
        cfg.cells.push_back(std::move(cell));
    }
    return cfg;
}

std::string summaries_to_csv(const std::vector<CellSummary>& summaries) {
    std::ostringstream out;
    out << "scenario,theta,tau,model,true,mean,bias,sd,ecp,prop_cen,n_converged,n_failed\n";
    for (const auto& s : summaries) {
        out << s.scenario << ',' << fmt(s.theta) << ','
            << (s.tau ? std::to_string(*s.tau) : "none") << ',' << s.model << ','
            << fmt(s.true_beta) << ',' << fmt(s.mean) << ',' << fmt(s.bias) << ','
            << fmt(s.sd) << ',' << fmt(s.ecp) << ',' << fmt(s.prop_cen) << ','
            << s.n_converged << ',' << s.n_failed << '\n';
    }
    return out.str();
}

std::string records_to_csv(const StudyConfig& config,
                           const std::vector<std::vector<ReplicationRecord>>& records) {
    std::ostringstream out;
    out << "scenario,tau,model,rep,seed,beta_hat,se,ci_lo,ci_hi,censored_fraction,"
           "converged,se_ok,iterations,error\n";
    for (std::size_t c = 0; c < records.size(); ++c) {
        const StudyCell& cell = config.cells[c];
        const std::string model =
            cell.model.model == ModelKind::kSemiparametric ? "semiparametric" : "piecewise";
        for (const auto& r : records[c]) {
            out << cell.scenario << ',' << (cell.tau ? std::to_string(*cell.tau) : "none")
                << ',' << model << ',' << r.rep_index << ',' << r.seed << ','
                << fmt(r.beta_hat) << ',' << fmt(r.se) << ',' << fmt(r.ci_lo) << ','
                << fmt(r.ci_hi) << ',' << fmt(r.censored_fraction) << ','
                << (r.converged ? 1 : 0) << ',' << (r.se_ok ? 1 : 0) << ','
                << r.iterations << ',' << r.error << '\n';
        }
    }
    return out.str();
}

}  // namespace cdur
