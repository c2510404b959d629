#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cdur/hazard.hpp"
#include "cdur/io.hpp"
#include "cdur/likelihood.hpp"
#include "cdur/simulate.hpp"
#include "cdur/study.hpp"

namespace {

using namespace cdur;

std::uint64_t env_or_default_seed() {
    if (const char* s = std::getenv("CDUR_SEED")) return std::strtoull(s, nullptr, 10);
    return 20260811ULL;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int cmd_fit(const std::string& data_path, const std::string& model_name,
            const std::vector<int>& knots, std::optional<int> tau,
            std::optional<int> y_plus, bool exact_tail, const std::string& tail_name,
            double tail_gamma, int max_iterations, const std::string& out_path) {
    Dataset data = read_dataset_csv(data_path);
    // a simulation sidecar restores the pre-censoring maximum for the
    // default truncation rule
    const std::string sidecar = data_path + ".json";
    if (std::filesystem::exists(sidecar)) {
        try {
            const auto doc = nlohmann::json::parse(read_text_file(sidecar));
            if (doc.contains("pre_censoring_max"))
                data.pre_censoring_max = doc.at("pre_censoring_max").get<int>();
        } catch (const std::exception&) {
            // not a sidecar; ignore
        }
    }
    FitConfig config;
    config.model = model_name == "piecewise" ? ModelKind::kPiecewiseConstant
                                             : ModelKind::kSemiparametric;
    config.knots = knots;
    config.tau = tau;
    config.y_plus = y_plus;
    config.exact_tail = exact_tail;
    if (tail_name == "polynomial") config.tail = PolynomialTail{tail_gamma};
    config.optim.max_iterations = max_iterations;

    const FitResult res = fit(data, config);
    const std::string doc = fit_result_to_json(res, data.covariate_names);
    if (out_path.empty())
        std::cout << doc;
    else
        write_text_file(out_path, doc);
    return res.converged ? 0 : 2;
}

int cmd_simulate(const std::string& dgp_name, double theta, double alpha0, double beta1,
                 double covariate_p, const std::vector<int>& knot_grid, int n,
                 std::optional<int> tau, int horizon, std::uint64_t seed,
                 const std::string& sampler_name, bool forward, const std::string& out_path) {
    DgpSpec spec;
    if (dgp_name == "geometric") {
        spec.hazard = GeometricDgp{theta};
    } else if (dgp_name == "piecewise-geometric") {
        PiecewiseGeometricDgp d;
        d.theta = theta;
        d.alpha0 = alpha0;
        if (!knot_grid.empty()) d.knot_grid = knot_grid;
        spec.hazard = d;
    } else if (dgp_name == "discrete-weibull") {
        spec.hazard = DiscreteWeibullDgp{theta, alpha0};
    } else {
        throw CLI::ValidationError("--dgp", "unknown dgp '" + dgp_name + "'");
    }
    spec.beta1 = beta1;
    spec.covariate_p = covariate_p;

    SimConfig config;
    config.n = n;
    config.tau = tau;
    config.horizon = horizon;
    config.seed = seed;
    config.sampler = sampler_name == "length-biased" ? SamplerKind::kLengthBiasedOracle
                                                     : SamplerKind::kRenewal;
    config.forward_recurrence = forward;

    const Dataset data = generate_dataset(spec, config);
    write_dataset_csv(data, out_path);
    write_text_file(out_path + ".json",
                    sim_sidecar_json(spec, config, data.pre_censoring_max.value_or(0)));
    std::cerr << "wrote " << data.observations.size() << " rows to " << out_path
              << " (censored " << fmt17(data.censored_proportion()) << ")\n";
    return 0;
}

int cmd_study(const std::string& config_path, const std::string& out_dir,
              std::optional<int> replications, std::optional<int> parallelism) {
    StudyConfig config = study_config_from_json(read_text_file(config_path));
    if (replications) config.replications = *replications;
    if (parallelism) config.parallelism = *parallelism;

    const StudyResult result = run_study(config);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/summary.csv", summaries_to_csv(result.summaries));
    write_text_file(out_dir + "/replications.csv", records_to_csv(config, result.records));
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "wrote " << result.summaries.size() << " summary rows to " << out_dir << "\n";
    return 0;
}

int cmd_pmf(const std::string& result_path, const std::vector<double>& z, int y_max,
            bool exact_tail, const std::string& out_path) {
    const FittedModel m = fitted_model_from_json(read_text_file(result_path));
    if (z.size() != m.beta.size())
        throw std::invalid_argument("expected " + std::to_string(m.beta.size()) +
                                    " covariate values, got " + std::to_string(z.size()));
    TruncationPolicy policy;
    if (exact_tail)
        policy = ExactGeometricTail{};
    else
        policy = FiniteUpperLimit{std::max(m.y_plus, y_max)};

    std::ostringstream out;
    out << "y,g,gbar,lambda\n";
    for (int y = 0; y <= y_max; ++y) {
        out << y << ',' << fmt17(cd_pmf(m.spec, m.beta, z, y, policy)) << ','
            << fmt17(cd_survivor(m.spec, m.beta, z, y, policy)) << ','
            << fmt17(hazard_prob(m.spec, m.beta, z, y)) << '\n';
    }
    if (out_path.empty())
        std::cout << out.str();
    else
        write_text_file(out_path, out.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"grouped current-duration survival models: fit, simulate, study, pmf"};
    app.require_subcommand(1);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit a model to a dataset CSV");
    std::string fit_data, fit_model = "semiparametric", fit_out, fit_tail = "geometric";
    std::vector<int> fit_knots;
    std::optional<int> fit_tau, fit_yplus;
    bool fit_exact = false;
    double fit_tail_gamma = 0.0;
    int fit_max_iterations = 500;
    fit_cmd->add_option("data", fit_data, "dataset CSV path")->required();
    fit_cmd->add_option("--model", fit_model, "semiparametric|piecewise")
        ->check(CLI::IsMember({"semiparametric", "piecewise"}));
    fit_cmd->add_option("--knots", fit_knots, "piecewise knots")->delimiter(',');
    fit_cmd->add_option("--tau", fit_tau, "Type I censoring value");
    fit_cmd->add_option("--y-plus", fit_yplus, "denominator truncation point");
    fit_cmd->add_flag("--exact-tail", fit_exact, "closed-form geometric tail denominator");
    fit_cmd->add_option("--tail", fit_tail, "tail family: geometric|polynomial")
        ->check(CLI::IsMember({"geometric", "polynomial"}));
    fit_cmd->add_option("--tail-gamma", fit_tail_gamma, "initial polynomial tail exponent");
    fit_cmd->add_option("--max-iterations", fit_max_iterations, "optimizer iteration cap");
    fit_cmd->add_option("--out", fit_out, "result JSON path (default: stdout)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate a current-duration dataset");
    std::string sim_dgp = "geometric", sim_sampler = "renewal", sim_out = "dataset.csv";
    double sim_theta = 0.2, sim_alpha0 = 0.8, sim_beta1 = 0.5, sim_p = 0.5;
    std::vector<int> sim_grid;
    int sim_n = 1000, sim_horizon = 10000;
    std::optional<int> sim_tau;
    std::optional<std::uint64_t> sim_seed;
    bool sim_forward = false;
    sim_cmd->add_option("--dgp", sim_dgp, "geometric|piecewise-geometric|discrete-weibull")
        ->check(CLI::IsMember({"geometric", "piecewise-geometric", "discrete-weibull"}));
    sim_cmd->add_option("--theta", sim_theta, "hazard scale");
    sim_cmd->add_option("--alpha0", sim_alpha0, "hazard shape (dgp b and c)");
    sim_cmd->add_option("--beta1", sim_beta1, "covariate log hazard ratio");
    sim_cmd->add_option("--covariate-p", sim_p, "Bernoulli success probability");
    sim_cmd->add_option("--knots", sim_grid, "knot grid for the piecewise-geometric dgp")
        ->delimiter(',');
    sim_cmd->add_option("--n", sim_n, "sample size");
    sim_cmd->add_option("--tau", sim_tau, "Type I censoring value");
    sim_cmd->add_option("--horizon", sim_horizon, "renewal burn-in length M");
    sim_cmd->add_option("--seed", sim_seed, "RNG seed (fallback: CDUR_SEED)");
    sim_cmd->add_option("--sampler", sim_sampler, "renewal|length-biased")
        ->check(CLI::IsMember({"renewal", "length-biased"}));
    sim_cmd->add_flag("--forward-recurrence", sim_forward,
                      "emit forward recurrence times (sensitivity checks)");
    sim_cmd->add_option("--out", sim_out, "output CSV path");

    // study
    auto* study_cmd = app.add_subcommand("study", "run a replicated simulation study");
    std::string study_config, study_out = "study-out";
    std::optional<int> study_reps, study_par;
    study_cmd->add_option("config", study_config, "study config JSON")->required();
    study_cmd->add_option("--out", study_out, "output directory");
    study_cmd->add_option("--replications", study_reps, "override config replications");
    study_cmd->add_option("--parallelism", study_par, "worker thread count");

    // pmf
    auto* pmf_cmd = app.add_subcommand("pmf", "tabulate fitted curves from a result JSON");
    std::string pmf_result, pmf_out;
    std::vector<double> pmf_z;
    int pmf_ymax = 50;
    bool pmf_exact = false;
    pmf_cmd->add_option("result", pmf_result, "fit result JSON")->required();
    pmf_cmd->add_option("--z", pmf_z, "covariate values")->delimiter(',');
    pmf_cmd->add_option("--y-max", pmf_ymax, "largest y to tabulate");
    pmf_cmd->add_flag("--exact-tail", pmf_exact, "closed-form geometric tail denominator");
    pmf_cmd->add_option("--out", pmf_out, "output CSV path (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(fit_cmd))
            return cmd_fit(fit_data, fit_model, fit_knots, fit_tau, fit_yplus, fit_exact,
                           fit_tail, fit_tail_gamma, fit_max_iterations, fit_out);
        if (app.got_subcommand(sim_cmd))
            return cmd_simulate(sim_dgp, sim_theta, sim_alpha0, sim_beta1, sim_p, sim_grid,
                                sim_n, sim_tau, sim_horizon,
                                sim_seed.value_or(env_or_default_seed()), sim_sampler,
                                sim_forward, sim_out);
        if (app.got_subcommand(study_cmd))
            return cmd_study(study_config, study_out, study_reps, study_par);
        if (app.got_subcommand(pmf_cmd))
            return cmd_pmf(pmf_result, pmf_z, pmf_ymax, pmf_exact, pmf_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
