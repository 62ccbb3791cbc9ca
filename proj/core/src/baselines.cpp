#include "flowcast/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "flowcast/errors.hpp"

namespace flowcast {

EmpiricalDist::EmpiricalDist(std::vector<double> values) : sorted_(std::move(values)) {
    if (sorted_.empty()) throw DataError("EmpiricalDist: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalDist::quantile(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        std::ostringstream os;
        os << "climatology quantile: level " << alpha << " outside (0, 1)";
        throw DomainError(os.str());
    }
    const double h = static_cast<double>(sorted_.size() - 1) * alpha;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted_.size() - 1);
    return sorted_[lo] + (h - static_cast<double>(lo)) * (sorted_[hi] - sorted_[lo]);
}

double EmpiricalDist::cdf(double y) const {
    const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), y);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double EmpiricalDist::crps(double y_obs) const { return crps_empirical_sorted(sorted_, y_obs); }

double climatology_quantile(const EmpiricalDist& dist, double alpha) { return dist.quantile(alpha); }

ScenarioSet mupen_sample(const Matrix& history, std::size_t count, Rng& rng) {
    if (count == 0 || count > history.rows) {
        throw DomainError("mupen_sample: requested " + std::to_string(count) + " scenarios from " +
                          std::to_string(history.rows) + " historical rows");
    }
    // Partial Fisher-Yates: the first `count` slots end up a uniform draw without replacement.
    std::vector<std::size_t> idx(history.rows);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(history.rows - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return {history.gather_rows(idx)};
}

}  // namespace flowcast
