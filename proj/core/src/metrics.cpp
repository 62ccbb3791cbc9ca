#include "flowcast/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <string_view>
#include <cmath>
#include <ostream>

#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

// Trapezoid of g(F(y)) over [a, b] with `points` nodes.
double trapezoid(const CdfFn& cdf, double a, double b, std::size_t points, bool above) {
    if (!(b > a)) return 0.0;
    std::vector<double> y(points);
    const double h = (b - a) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) y[i] = a + h * static_cast<double>(i);
    y.back() = b;
    const std::vector<double> f = cdf(y);
    double total = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double e = above ? 1.0 - f[i] : f[i];
        total += (i == 0 || i + 1 == points ? 0.5 : 1.0) * e * e;
    }
    return total * h;
}

// Mean pairwise-distance kernel shared by the CRPS and energy score.
double energy_kernel(const Matrix& draws, std::span<const double> y) {
    const std::size_t s = draws.rows, d = draws.cols;
    auto dist = [d](std::span<const double> a, std::span<const double> b) {
        if (d == 1) return std::abs(a[0] - b[0]);
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(sq);
    };
    double to_obs = 0.0;
    for (std::size_t i = 0; i < s; ++i) to_obs += dist(draws.row(i), y);
    double pair = 0.0;
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) pair += dist(draws.row(i), draws.row(j));
    const double sd = static_cast<double>(s);
    return to_obs / sd - pair / (2.0 * sd * sd);
}

}  // namespace

double crps_quadrature(const CdfFn& cdf, double lo, double hi, double y_obs, std::size_t points) {
    if (points < 3) throw DomainError("crps_quadrature: need at least 3 points");
    lo = std::min(lo, y_obs);
    hi = std::max(hi, y_obs);
    const std::size_t half = points / 2 + 1;
    return trapezoid(cdf, lo, y_obs, half, false) + trapezoid(cdf, y_obs, hi, half, true);
}

double crps_quadrature(const ForecastDensity& density, double y_obs) {
    if (density.dim() != 1) throw DomainError("crps_quadrature: forecast must be univariate");
    const double levels[] = {1e-5, 1.0 - 1e-5};
    const auto q = density.quantiles(levels);
    return crps_quadrature([&density](std::span<const double> y) { return density.cdf(y); }, q[0], q[1], y_obs);
}

double crps_samples(std::span<const double> draws, double y_obs) {
    if (draws.size() < 2) throw DomainError("crps_samples: need at least 2 draws");
    const Matrix m(draws.size(), 1, std::vector<double>(draws.begin(), draws.end()));
    const double y[] = {y_obs};
    return energy_kernel(m, y);
}

double crps_empirical_sorted(std::span<const double> sorted, double y_obs) {
    if (sorted.empty()) throw DomainError("crps_empirical_sorted: empty sample");
    const double n = static_cast<double>(sorted.size());
    double to_obs = 0.0;
    double pair = 0.0;  // sum_i (2i - n + 1) x_(i), half the double sum of |x_i - x_j|
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        to_obs += std::abs(sorted[i] - y_obs);
        pair += (2.0 * static_cast<double>(i) - n + 1.0) * sorted[i];
    }
    return to_obs / n - pair / (n * n);
}

double crps_from_quantiles(std::span<const double> levels, std::span<const double> values, double y_obs) {
    if (levels.empty() || levels.size() != values.size()) {
        throw ShapeError("crps_from_quantiles: levels and values must be nonempty and aligned");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double u = y_obs - values[i];
        total += u >= 0.0 ? levels[i] * u : (levels[i] - 1.0) * u;
    }
    return 2.0 * total / static_cast<double>(levels.size());
}

double energy_score(const ScenarioSet& scenarios, std::span<const double> y_obs) {
    if (scenarios.count() == 0) throw DomainError("energy_score: empty scenario set");
    if (scenarios.dim() != y_obs.size()) {
        throw ShapeError("energy_score: scenarios have dim " + std::to_string(scenarios.dim()) + ", observation " +
                         std::to_string(y_obs.size()));
    }
    return energy_kernel(scenarios.draws, y_obs);
}

double variogram_score(const ScenarioSet& scenarios, std::span<const double> y_obs, double p) {
    const std::size_t d = y_obs.size();
    if (scenarios.count() == 0) throw DomainError("variogram_score: empty scenario set");
    if (scenarios.dim() != d) throw ShapeError("variogram_score: dimension mismatch");
    const double s = static_cast<double>(scenarios.count());
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            double expected = 0.0;
            for (std::size_t k = 0; k < scenarios.count(); ++k) {
                expected += std::pow(std::abs(scenarios.draws(k, i) - scenarios.draws(k, j)), p);
            }
            const double diff = std::pow(std::abs(y_obs[i] - y_obs[j]), p) - expected / s;
            total += diff * diff;
        }
    }
    return total;
}

std::vector<double> default_reliability_levels() {
    std::vector<double> levels;
    for (int i = 1; i <= 19; ++i) levels.push_back(0.05 * i);
    return levels;
}

ReliabilityCurve reliability(const Matrix& quantiles, std::span<const double> observations,
                             std::span<const double> levels) {
    if (quantiles.rows != observations.size()) throw ShapeError("reliability: forecast and observation counts differ");
    if (quantiles.cols != levels.size()) throw ShapeError("reliability: quantile columns do not match levels");
    if (observations.empty()) throw DomainError("reliability: no observations");
    ReliabilityCurve curve;
    curve.nominal.assign(levels.begin(), levels.end());
    curve.observed.assign(levels.size(), 0.0);
    for (std::size_t t = 0; t < observations.size(); ++t)
        for (std::size_t l = 0; l < levels.size(); ++l)
            if (observations[t] <= quantiles(t, l)) curve.observed[l] += 1.0;
    for (double& o : curve.observed) o /= static_cast<double>(observations.size());
    return curve;
}

double pi_width(std::span<const double> lower, std::span<const double> upper) {
    if (lower.size() != upper.size() || lower.empty()) throw ShapeError("pi_width: bounds must be nonempty and aligned");
    double total = 0.0;
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (upper[i] < lower[i]) throw DomainError("pi_width: interval " + std::to_string(i) + " crosses");
        total += upper[i] - lower[i];
    }
    return total / static_cast<double>(lower.size());
}

void write_score_report(std::ostream& os, const std::vector<ScoreRow>& rows) {
    os << "model,case,metric,value\n";
    char buf[32];
    for (const ScoreRow& r : rows) {
        const auto end = std::to_chars(buf, buf + sizeof buf, r.value).ptr;
        os << r.model << ',' << r.case_id << ',' << r.metric << ',' << std::string_view(buf, end - buf) << '\n';
    }
}

}  // namespace flowcast
