#pragma once

// Monotonic rational-quadratic spline transformer on [-B, B] with identity
// tails. The scalar routines serve sampling and inspection; the tensor
// inverse is the differentiable path used by the training objective.

#include <cstddef>
#include <span>
#include <vector>

#include "flowcast/autodiff.hpp"

namespace flowcast {

inline constexpr double kMinBinSize = 1e-3;
inline constexpr double kMinDerivative = 1e-3;

/// Raw conditioner outputs per element: M widths, M heights, M-1 internal derivatives.
constexpr std::size_t spline_raw_size(std::size_t bins) { return 3 * bins - 1; }

struct SplineParams {
    std::vector<double> knots_x;  // M+1, from -B to +B
    std::vector<double> knots_y;  // M+1, from -B to +B
    std::vector<double> derivs;   // M+1; derivs.front() == derivs.back() == 1
    double bound = 0.0;

    std::size_t bins() const { return knots_x.size() - 1; }
};

struct SplineValue {
    double value = 0.0;
    double log_abs_deriv = 0.0;
};

/// Widths/heights: kMinBinSize + (2B - M kMinBinSize) softmax(raw), accumulated from -B.
/// Internal derivatives: kMinDerivative + softplus(raw + c), with c chosen so raw 0 maps to 1.
/// Throws ShapeError on a raw length other than 3M-1.
SplineParams normalize_params(std::span<const double> raw, std::size_t bins, double bound);

SplineValue spline_forward(double z, const SplineParams& p);
/// Throws NumericError if the quadratic has a negative discriminant.
SplineValue spline_inverse(double y, const SplineParams& p);

struct SplineTensors {
    ad::Tensor value;          // r x 1
    ad::Tensor log_abs_deriv;  // r x 1
};

/// Differentiable batched inverse. y: (r x 1); raw: (r x 3M-1).
SplineTensors spline_inverse(const ad::Tensor& y, const ad::Tensor& raw, std::size_t bins, double bound);

}  // namespace flowcast
