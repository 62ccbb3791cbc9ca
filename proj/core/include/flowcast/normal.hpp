#pragma once

namespace flowcast {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse standard normal CDF. Rational approximation followed by one Halley
/// refinement; absolute error well below 1e-8 on (0, 1).
/// Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

}  // namespace flowcast
