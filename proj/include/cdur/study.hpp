#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdur/likelihood.hpp"
#include "cdur/simulate.hpp"

namespace cdur {

struct ModelConfig {
    ModelKind model = ModelKind::kSemiparametric;
    std::vector<int> knots;
};

struct StudyCell {
    std::string scenario;  // label used in output and for seed derivation
    DgpSpec dgp;
    std::optional<int> tau;
    ModelConfig model;

    // canonical identifier; replication seeds derive from it
    std::string id() const;
};

struct StudyConfig {
    std::vector<StudyCell> cells;
    int replications = 200;
    int n = 1000;
    std::uint64_t base_seed = 20260811;
    int parallelism = 0;  // 0: hardware concurrency
};

struct ReplicationRecord {
    int rep_index = 0;
    std::uint64_t seed = 0;
    double beta_hat = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double censored_fraction = 0.0;
    bool converged = false;
    bool se_ok = false;
    int iterations = 0;
    std::string error;  // non-empty when the fit threw
};

struct CellSummary {
    std::string scenario;
    double theta = 0.0;
    std::optional<int> tau;
    std::string model;
    double true_beta = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double sd = 0.0;
    double ecp = 0.0;
    double prop_cen = 0.0;
    int n_converged = 0;
    int n_failed = 0;
};

struct StudyResult {
    std::vector<CellSummary> summaries;
    std::vector<std::vector<ReplicationRecord>> records;  // per cell, by rep index
    std::vector<std::string> warnings;
};

// seed for one replication as a pure function of (base_seed, cell id, rep)
std::uint64_t replication_seed(std::uint64_t base_seed, const StudyCell& cell, int rep_index);

ReplicationRecord run_replication(const StudyCell& cell, int n, int rep_index,
                                  std::uint64_t base_seed);

// mean/sd/ecp over replications that converged with usable standard errors;
// prop_cen over all replications. Throws when fewer than two usable
// replications exist.
CellSummary summarize(const StudyCell& cell, const std::vector<ReplicationRecord>& reps);

// all cells x replications; execution may be parallel but output is
// byte-identical for a fixed base_seed regardless of the parallelism level
StudyResult run_study(const StudyConfig& config);

}  // namespace cdur
