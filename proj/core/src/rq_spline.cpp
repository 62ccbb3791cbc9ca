#include "flowcast/rq_spline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "flowcast/errors.hpp"

namespace flowcast {

namespace {

// softplus(kDerivShift) == 1 - kMinDerivative
const double kDerivShift = std::log(std::expm1(1.0 - kMinDerivative));

double softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

void check_raw(std::size_t got, std::size_t bins) {
    if (bins == 0) throw ShapeError("spline: bin count must be positive");
    if (got != spline_raw_size(bins)) {
        throw ShapeError("spline: expected " + std::to_string(spline_raw_size(bins)) + " raw parameters for " +
                         std::to_string(bins) + " bins, got " + std::to_string(got));
    }
}

std::vector<double> bin_edges(std::span<const double> raw, double bound) {
    const std::size_t m = raw.size();
    const double mx = *std::max_element(raw.begin(), raw.end());
    std::vector<double> soft(m);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += soft[i] = std::exp(raw[i] - mx);
    const double scale = 2.0 * bound - static_cast<double>(m) * kMinBinSize;
    std::vector<double> knots(m + 1);
    knots[0] = -bound;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
        acc += kMinBinSize + scale * (soft[i] / total);
        knots[i + 1] = -bound + acc;
    }
    knots[m] = bound;
    return knots;
}

// Bin b has edges knots[b], knots[b+1]; callers guarantee knots[0] <= v < knots[M].
std::size_t locate(const std::vector<double>& knots, double v) {
    const auto it = std::upper_bound(knots.begin(), knots.end(), v);
    const std::size_t idx = static_cast<std::size_t>(it - knots.begin());
    return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, knots.size() - 2);
}

double log_deriv(double xi, double s, double d0, double d1) {
    const double omx = 1.0 - xi;
    const double num = s * s * (d1 * xi * xi + 2.0 * s * xi * omx + d0 * omx * omx);
    const double den = s + (d1 + d0 - 2.0 * s) * xi * omx;
    return std::log(num) - 2.0 * std::log(den);
}

}  // namespace

SplineParams normalize_params(std::span<const double> raw, std::size_t bins, double bound) {
    check_raw(raw.size(), bins);
    if (!(bound > 0.0) || 2.0 * bound <= static_cast<double>(bins) * kMinBinSize) {
        throw DomainError("spline: bound too small for the bin count");
    }
    SplineParams p;
    p.bound = bound;
    p.knots_x = bin_edges(raw.subspan(0, bins), bound);
    p.knots_y = bin_edges(raw.subspan(bins, bins), bound);
    p.derivs.assign(bins + 1, 1.0);
    for (std::size_t i = 0; i + 1 < bins; ++i) p.derivs[i + 1] = kMinDerivative + softplus(raw[2 * bins + i] + kDerivShift);
    return p;
}

SplineValue spline_forward(double z, const SplineParams& p) {
    if (std::isnan(z)) throw DomainError("spline_forward: NaN input");
    if (z < p.knots_x.front() || z >= p.knots_x.back()) return {z, 0.0};
    const std::size_t b = locate(p.knots_x, z);
    const double xk = p.knots_x[b], wk = p.knots_x[b + 1] - xk;
    const double yk = p.knots_y[b], hk = p.knots_y[b + 1] - yk;
    const double s = hk / wk;
    const double d0 = p.derivs[b], d1 = p.derivs[b + 1];
    const double xi = (z - xk) / wk;
    const double omx = 1.0 - xi;
    const double num = hk * (s * xi * xi + d0 * xi * omx);
    const double den = s + (d1 + d0 - 2.0 * s) * xi * omx;
    return {yk + num / den, log_deriv(xi, s, d0, d1)};
}

SplineValue spline_inverse(double y, const SplineParams& p) {
    if (std::isnan(y)) throw DomainError("spline_inverse: NaN input");
    if (y < p.knots_y.front() || y >= p.knots_y.back()) return {y, 0.0};
    const std::size_t b = locate(p.knots_y, y);
    const double xk = p.knots_x[b], wk = p.knots_x[b + 1] - xk;
    const double yk = p.knots_y[b], hk = p.knots_y[b + 1] - yk;
    const double s = hk / wk;
    const double d0 = p.derivs[b], d1 = p.derivs[b + 1];
    const double dy = y - yk;
    const double t = d1 + d0 - 2.0 * s;
    const double a = hk * (s - d0) + dy * t;
    const double bq = hk * d0 - dy * t;
    const double c = -s * dy;
    const double disc = bq * bq - 4.0 * a * c;
    if (disc < 0.0) {
        std::ostringstream os;
        os << "spline_inverse: negative discriminant " << disc << " at y=" << y;
        throw NumericError(os.str());
    }
    const double xi = 2.0 * c / (-bq - std::sqrt(disc));
    return {xk + xi * wk, -log_deriv(xi, s, d0, d1)};
}

SplineTensors spline_inverse(const ad::Tensor& y, const ad::Tensor& raw, std::size_t bins, double bound) {
    check_raw(raw.cols(), bins);
    const std::size_t r = raw.rows();
    if (y.numel() != r || y.cols() != 1) {
        throw ShapeError("spline_inverse: values " + ad::shape_str(y.shape()) + " do not match parameters " +
                         ad::shape_str(raw.shape()));
    }
    using namespace ad;
    const double scale = 2.0 * bound - static_cast<double>(bins) * kMinBinSize;
    const Tensor lo = Tensor::full({r, 1}, -bound);
    const Tensor hi = Tensor::full({r, 1}, bound);

    auto edges = [&](const Tensor& logits) {
        const Tensor widths = softmax(logits) * scale + kMinBinSize;
        const Tensor interior = slice_last(cumsum(widths), 0, bins - 1) - bound;
        return concat_last({lo, interior, hi});
    };
    const Tensor kx = edges(slice_last(raw, 0, bins));
    const Tensor ky = edges(slice_last(raw, bins, 2 * bins));
    const Tensor ones = Tensor::full({r, 1}, 1.0);
    const Tensor inner = softplus(slice_last(raw, 2 * bins, 3 * bins - 1) + kDerivShift) + kMinDerivative;
    const Tensor dv = concat_last({ones, inner, ones});

    std::vector<std::uint8_t> inside(r);
    std::vector<std::size_t> lower(r), upper(r);
    const auto yv = y.data();
    const auto kyv = ky.data();
    for (std::size_t i = 0; i < r; ++i) {
        if (std::isnan(yv[i])) throw DomainError("spline_inverse: NaN input");
        inside[i] = yv[i] >= -bound && yv[i] < bound;
        const std::vector<double> row(kyv.begin() + i * (bins + 1), kyv.begin() + (i + 1) * (bins + 1));
        lower[i] = inside[i] ? locate(row, yv[i]) : 0;
        upper[i] = lower[i] + 1;
    }

    // Outside rows evaluate bin 0 at its lower edge and are discarded by the masks.
    const Tensor yc = where(inside, reshape(y, {r, 1}), Tensor::full({r, 1}, -bound));
    const Tensor xk = gather_last(kx, lower);
    const Tensor wk = gather_last(kx, upper) - xk;
    const Tensor yk = gather_last(ky, lower);
    const Tensor hk = gather_last(ky, upper) - yk;
    const Tensor s = hk / wk;
    const Tensor d0 = gather_last(dv, lower);
    const Tensor d1 = gather_last(dv, upper);

    const Tensor dy = yc - yk;
    const Tensor t = d1 + d0 - 2.0 * s;
    const Tensor a = hk * (s - d0) + dy * t;
    const Tensor bq = hk * d0 - dy * t;
    const Tensor c = -(s * dy);
    const Tensor disc = square(bq) - 4.0 * a * c;
    for (std::size_t i = 0; i < r; ++i) {
        if (disc[i] < 0.0) {
            std::ostringstream os;
            os << "spline_inverse: negative discriminant " << disc[i] << " at y=" << yv[i];
            throw NumericError(os.str());
        }
    }
    const Tensor xi = 2.0 * c / (-bq - sqrt(disc));
    const Tensor z = xk + xi * wk;

    const Tensor omx = 1.0 - xi;
    const Tensor num = square(s) * (d1 * square(xi) + 2.0 * s * xi * omx + d0 * square(omx));
    const Tensor den = s + t * xi * omx;
    const Tensor ld = 2.0 * log(den) - log(num);

    const Tensor y_col = reshape(y, {r, 1});
    return {where(inside, z, y_col), where(inside, ld, Tensor::zeros({r, 1}))};
}

}  // namespace flowcast
