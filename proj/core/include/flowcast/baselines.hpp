#pragma once

// Naive references: climatology (unconditional empirical law of the training
// targets) and MuPEn (historical scenarios drawn without replacement).

#include <cstddef>
#include <span>
#include <vector>

#include "flowcast/matrix.hpp"
#include "flowcast/metrics.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

class EmpiricalDist {
public:
    /// Throws DataError on an empty sample.
    explicit EmpiricalDist(std::vector<double> values);

    std::span<const double> sorted() const { return sorted_; }
    std::size_t size() const { return sorted_.size(); }

    /// Type-7 quantile: linear interpolation at h = (n - 1) alpha.
    double quantile(double alpha) const;
    /// Fraction of sample values <= y.
    double cdf(double y) const;
    /// Exact CRPS of the empirical law against one observation.
    double crps(double y_obs) const;

private:
    std::vector<double> sorted_;
};

double climatology_quantile(const EmpiricalDist& dist, double alpha);

/// S distinct rows of `history`, uniformly without replacement; throws DomainError when S > N.
ScenarioSet mupen_sample(const Matrix& history, std::size_t count, Rng& rng);

}  // namespace flowcast
