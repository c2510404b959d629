#include "cdur/study.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace cdur {

namespace {

std::string model_name(const ModelConfig& m) {
    return m.model == ModelKind::kSemiparametric ? "semiparametric" : "piecewise";
}

double dgp_theta(const DgpSpec& spec) {
    return std::visit([](const auto& d) { return d.theta; }, spec.hazard);
}

}  // namespace

std::string StudyCell::id() const {
    std::ostringstream os;
    os << scenario << "|tau=" << (tau ? std::to_string(*tau) : "none")
       << "|model=" << model_name(model);
    return os.str();
}

std::uint64_t replication_seed(std::uint64_t base_seed, const StudyCell& cell, int rep_index) {
    return SplitMix64(base_seed)
        .split(fnv1a64(cell.id()))
        .split(static_cast<std::uint64_t>(rep_index))
        .key();
}

ReplicationRecord run_replication(const StudyCell& cell, int n, int rep_index,
                                  std::uint64_t base_seed) {
    ReplicationRecord rec;
    rec.rep_index = rep_index;
    rec.seed = replication_seed(base_seed, cell, rep_index);
    try {
        SimConfig sim;
        sim.n = n;
        sim.tau = cell.tau;
        sim.seed = rec.seed;
        const Dataset data = generate_dataset(cell.dgp, sim);
        rec.censored_fraction = data.censored_proportion();

        FitConfig fc;
        fc.model = cell.model.model;
        fc.knots = cell.model.knots;
        fc.tau = data.any_censored() ? cell.tau : std::nullopt;
        // y_plus defaults to twice the recorded pre-censoring maximum
        const FitResult res = fit(data, fc);
        rec.beta_hat = res.beta_hat.at(0);
        rec.converged = res.converged;
        rec.se_ok = res.se_available;
        rec.iterations = res.iterations;
        if (res.se_available) {
            rec.se = res.beta_se.at(0);
            rec.ci_lo = res.beta_ci.at(0).first;
            rec.ci_hi = res.beta_ci.at(0).second;
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
        rec.converged = false;
        rec.se_ok = false;
    }
    return rec;
}

CellSummary summarize(const StudyCell& cell, const std::vector<ReplicationRecord>& reps) {
    CellSummary s;
    s.scenario = cell.scenario;
    s.theta = dgp_theta(cell.dgp);
    s.tau = cell.tau;
    s.model = model_name(cell.model);
    s.true_beta = cell.dgp.beta1;

    double prop = 0.0;
    long usable = 0, covered = 0;
    double sum = 0.0;
    for (const auto& r : reps) {
        prop += r.censored_fraction;
        if (r.converged && r.se_ok) {
            ++usable;
            sum += r.beta_hat;
            if (r.ci_lo <= s.true_beta && s.true_beta <= r.ci_hi) ++covered;
        }
    }
    if (usable < 2)
        throw std::runtime_error("cell '" + cell.id() + "': fewer than 2 usable replications");
    s.n_converged = static_cast<int>(usable);
    s.n_failed = static_cast<int>(reps.size()) - s.n_converged;
    s.mean = sum / static_cast<double>(usable);
    s.bias = s.mean - s.true_beta;
    double ss = 0.0;
    for (const auto& r : reps)
        if (r.converged && r.se_ok) ss += (r.beta_hat - s.mean) * (r.beta_hat - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(usable - 1));
    s.ecp = static_cast<double>(covered) / static_cast<double>(usable);
    s.prop_cen = prop / static_cast<double>(reps.size());
    return s;
}

StudyResult run_study(const StudyConfig& config) {
    StudyResult out;
    const std::size_t n_cells = config.cells.size();
    out.records.assign(n_cells, {});
    for (auto& v : out.records)
        v.resize(static_cast<std::size_t>(config.replications));

    // flatten (cell, rep) work items; results land in preassigned slots so
    // aggregation does not depend on scheduling
    struct Item {
        std::size_t cell;
        int rep;
    };
    std::vector<Item> items;
    items.reserve(n_cells * static_cast<std::size_t>(config.replications));
    for (std::size_t c = 0; c < n_cells; ++c)
        for (int r = 0; r < config.replications; ++r) items.push_back({c, r});

    unsigned n_threads = config.parallelism > 0
                             ? static_cast<unsigned>(config.parallelism)
                             : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, std::max<std::size_t>(items.size(), 1));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) break;
            const Item it = items[i];
            out.records[it.cell][static_cast<std::size_t>(it.rep)] =
                run_replication(config.cells[it.cell], config.n, it.rep, config.base_seed);
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t c = 0; c < n_cells; ++c) {
        try {
            out.summaries.push_back(summarize(config.cells[c], out.records[c]));
        } catch (const std::exception& e) {
            CellSummary s;
            s.scenario = config.cells[c].scenario;
            s.theta = dgp_theta(config.cells[c].dgp);
            s.tau = config.cells[c].tau;
            s.model = model_name(config.cells[c].model);
            s.true_beta = config.cells[c].dgp.beta1;
            s.mean = s.bias = s.sd = s.ecp = std::nan("");
            double prop = 0.0;
            for (const auto& r : out.records[c]) prop += r.censored_fraction;
            s.prop_cen = prop / static_cast<double>(config.replications);
            s.n_failed = config.replications;
            out.summaries.push_back(s);
            out.warnings.push_back(e.what());
        }
    }
    return out;
}

}  // namespace cdur
