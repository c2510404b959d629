#pragma once

#include <string>

#include "cdur/dataset.hpp"
#include "cdur/likelihood.hpp"
#include "cdur/simulate.hpp"
#include "cdur/study.hpp"

namespace cdur {

// Dataset CSV: header "y,delta,<covariate...>"; y nonnegative integer,
// delta in {0,1} (1 = uncensored), covariates finite reals.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& data, const std::string& path);

std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(const std::string& text, const std::string& origin = "<string>");

// Fit result JSON; numeric fields round-trip at full precision.
std::string fit_result_to_json(const FitResult& res,
                               const std::vector<std::string>& covariate_names);

// What cmd_pmf needs back from a result file.
struct FittedModel {
    std::vector<std::string> covariate_names;
    std::vector<double> beta;
    HazardSpec spec;
    int y_plus = 0;
    std::optional<int> tau;
};
FittedModel fitted_model_from_json(const std::string& text);

// Simulation sidecar: generation parameters, seed, pre-censoring maximum.
std::string sim_sidecar_json(const DgpSpec& spec, const SimConfig& config,
                             int pre_censoring_max);

// Study configuration JSON; schema violations are reported with their path.
StudyConfig study_config_from_json(const std::string& text);

std::string summaries_to_csv(const std::vector<CellSummary>& summaries);
std::string records_to_csv(const StudyConfig& config,
                           const std::vector<std::vector<ReplicationRecord>>& records);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cdur
