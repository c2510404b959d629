#include "cdur/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cdur {

int Dataset::max_recorded_y() const {
    int m = 0;
    for (const auto& o : observations) m = std::max(m, o.y);
    return m;
}

bool Dataset::any_censored() const {
    return std::any_of(observations.begin(), observations.end(),
                       [](const Observation& o) { return !o.delta; });
}

double Dataset::censored_proportion() const {
    if (observations.empty()) return 0.0;
    std::size_t c = 0;
    for (const auto& o : observations) c += !o.delta;
    return static_cast<double>(c) / static_cast<double>(observations.size());
}

void Dataset::validate() const {
    const std::size_t p = covariate_dim();
    bool any_uncensored = false;
    for (const auto& o : observations) {
        if (o.y < 0) throw std::invalid_argument("Dataset: y must be >= 0");
        if (o.z.size() != p)
            throw std::invalid_argument("Dataset: covariate dimension mismatch");
        for (double v : o.z)
            if (!std::isfinite(v))
                throw std::invalid_argument("Dataset: covariates must be finite");
        any_uncensored |= o.delta;
    }
    if (!observations.empty() && !any_uncensored)
        throw std::invalid_argument("Dataset: needs at least one uncensored observation");
}

}  // namespace cdur
