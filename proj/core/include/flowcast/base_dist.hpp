#pragma once

// Conditional diagonal Gaussian base distribution. A shape-parameter network
// maps context features to (mu, raw sigma); sigma = softplus(raw) + 1e-6.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "flowcast/autodiff.hpp"
#include "flowcast/nets.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

inline constexpr double kSigmaFloor = 1e-6;

struct GaussianParams {
    std::vector<double> mu;
    std::vector<double> sigma;

    std::size_t dim() const { return mu.size(); }
};

/// Batched parameters, each (n x d).
struct GaussianTensors {
    ad::Tensor mu;
    ad::Tensor sigma;
};

/// Splits a (n x 2d) network output into mu and floored-softplus sigma.
GaussianTensors gaussian_from_raw(const ad::Tensor& raw, std::size_t dim);

/// Parameters for one context vector.
GaussianParams shape_params(const Mlp& phi, std::span<const double> x);
/// Row-wise parameters for a batch of contexts, (n x ctx).
GaussianTensors shape_params(const Mlp& phi, const ad::Tensor& x);

double log_prob(const GaussianParams& p, std::span<const double> z);
/// Per-row log density, (n x 1).
ad::Tensor log_prob(const GaussianTensors& p, const ad::Tensor& z);

/// `count` draws of mu + sigma * eps, eps from Box-Muller.
std::vector<std::vector<double>> sample(const GaussianParams& p, std::size_t count, Rng& rng);

/// mu + sigma * inverse_normal(alpha); throws DomainError unless 0 < alpha < 1.
std::vector<double> quantile(const GaussianParams& p, double alpha);

/// Either a learned shape-parameter net or a fixed N(0, I).
class GaussianBase {
public:
    GaussianBase() = default;
    /// Learned base; phi must output 2*dim values.
    GaussianBase(Mlp phi, std::size_t dim);
    static GaussianBase standard(std::size_t dim);

    std::size_t dim() const { return dim_; }
    bool learned() const { return phi_.has_value(); }
    const std::optional<Mlp>& phi() const { return phi_; }
    std::optional<Mlp>& phi() { return phi_; }

    GaussianTensors params(const ad::Tensor& x) const;
    GaussianParams params(std::span<const double> x) const;

    std::vector<NamedTensor> named_parameters(const std::string& prefix) const;

private:
    std::optional<Mlp> phi_;
    std::size_t dim_ = 0;
};

}  // namespace flowcast
