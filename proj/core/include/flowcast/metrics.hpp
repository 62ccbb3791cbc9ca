#pragma once

// Proper scores and calibration diagnostics: CRPS (quadrature and sample
// forms), energy score, variogram score, reliability curve, interval width.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowcast/flow.hpp"
#include "flowcast/matrix.hpp"

namespace flowcast {

/// S joint draws of a d-dimensional target, one draw per row.
struct ScenarioSet {
    Matrix draws;

    std::size_t count() const { return draws.rows; }
    std::size_t dim() const { return draws.cols; }
};

using CdfFn = std::function<std::vector<double>(std::span<const double>)>;

/// Trapezoid rule for the integral of (F(y) - 1{y >= obs})^2 over [lo, hi], split at obs.
/// The caller's range should cover the forecast's effective support.
double crps_quadrature(const CdfFn& cdf, double lo, double hi, double y_obs, std::size_t points = 2001);
/// Univariate flow forecast; the range spans the 1e-5 and 1-1e-5 quantiles and the observation.
double crps_quadrature(const ForecastDensity& density, double y_obs);

/// (1/S) sum |x_i - y| - (1/2S^2) sum_ij |x_i - x_j|; throws DomainError when S < 2.
double crps_samples(std::span<const double> draws, double y_obs);
/// Exact CRPS of the empirical distribution of `sorted` (ascending) in O(n).
double crps_empirical_sorted(std::span<const double> sorted, double y_obs);
/// 2 * mean pinball loss over the supplied levels; an approximation from a quantile grid.
double crps_from_quantiles(std::span<const double> levels, std::span<const double> values, double y_obs);

/// Throws ShapeError on a dimension mismatch.
double energy_score(const ScenarioSet& scenarios, std::span<const double> y_obs);
/// Unit weights, full double sum over (i, j).
double variogram_score(const ScenarioSet& scenarios, std::span<const double> y_obs, double p = 0.5);

struct ReliabilityCurve {
    std::vector<double> nominal;
    std::vector<double> observed;
};

/// 0.05, 0.10, ..., 0.95
std::vector<double> default_reliability_levels();

/// quantiles: (T x L), column l holding the forecast at levels[l]. observed[l] = mean(y_t <= q_t[l]).
ReliabilityCurve reliability(const Matrix& quantiles, std::span<const double> observations,
                             std::span<const double> levels);

/// Mean of upper - lower; throws DomainError on a crossing pair.
double pi_width(std::span<const double> lower, std::span<const double> upper);

struct ScoreRow {
    std::string model;
    std::string case_id;
    std::string metric;
    double value = 0.0;
};

/// model,case,metric,value
void write_score_report(std::ostream& os, const std::vector<ScoreRow>& rows);

}  // namespace flowcast
