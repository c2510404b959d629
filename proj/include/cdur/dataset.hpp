#pragma once

#include <optional>
#include <string>
#include <vector>

namespace cdur {

// One record: recorded (grouped) current duration, censoring indicator and
// covariates. delta = true means uncensored; censored records carry y = tau.
struct Observation {
    int y = 0;
    bool delta = true;
    std::vector<double> z;
};

struct Dataset {
    std::vector<Observation> observations;
    std::vector<std::string> covariate_names;
    // largest simulated value before administrative censoring; known for
    // simulated data and used by the default truncation rule
    std::optional<int> pre_censoring_max;

    std::size_t covariate_dim() const { return covariate_names.size(); }

    int max_recorded_y() const;
    bool any_censored() const;
    double censored_proportion() const;

    // throws std::invalid_argument on dimension mismatches, non-finite
    // covariates, negative y, or when no uncensored observation exists
    void validate() const;
};

}  // namespace cdur
