#include "flowcast/base_dist.hpp"

#include <cmath>

#include "flowcast/errors.hpp"
#include "flowcast/normal.hpp"

namespace flowcast {

GaussianTensors gaussian_from_raw(const ad::Tensor& raw, std::size_t dim) {
    if (raw.cols() != 2 * dim) {
        throw ShapeError("base distribution: shape network outputs " + std::to_string(raw.cols()) +
                         " values, expected " + std::to_string(2 * dim));
    }
    return {ad::slice_last(raw, 0, dim), ad::softplus(ad::slice_last(raw, dim, 2 * dim)) + kSigmaFloor};
}

GaussianTensors shape_params(const Mlp& phi, const ad::Tensor& x) {
    if (phi.output_dim() % 2 != 0) throw ShapeError("base distribution: shape network width must be even");
    return gaussian_from_raw(phi.forward(x), phi.output_dim() / 2);
}

GaussianParams shape_params(const Mlp& phi, std::span<const double> x) {
    ad::NoGradGuard guard;
    const auto t = shape_params(phi, ad::Tensor::matrix(1, x.size(), std::vector<double>(x.begin(), x.end())));
    return {std::vector<double>(t.mu.data().begin(), t.mu.data().end()),
            std::vector<double>(t.sigma.data().begin(), t.sigma.data().end())};
}

double log_prob(const GaussianParams& p, std::span<const double> z) {
    if (z.size() != p.dim()) throw ShapeError("log_prob: point dimension does not match parameters");
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double u = (z[i] - p.mu[i]) / p.sigma[i];
        total += -kLogSqrt2Pi - std::log(p.sigma[i]) - 0.5 * u * u;
    }
    return total;
}

ad::Tensor log_prob(const GaussianTensors& p, const ad::Tensor& z) {
    if (z.shape() != p.mu.shape()) {
        throw ShapeError("log_prob: shape mismatch " + ad::shape_str(z.shape()) + " vs " + ad::shape_str(p.mu.shape()));
    }
    const ad::Tensor u = (z - p.mu) / p.sigma;
    const ad::Tensor per_dim = -kLogSqrt2Pi - ad::log(p.sigma) - 0.5 * ad::square(u);
    return ad::sum_last(per_dim);
}

std::vector<std::vector<double>> sample(const GaussianParams& p, std::size_t count, Rng& rng) {
    std::vector<std::vector<double>> draws(count, std::vector<double>(p.dim()));
    for (auto& draw : draws)
        for (std::size_t i = 0; i < p.dim(); ++i) draw[i] = p.mu[i] + p.sigma[i] * rng.normal();
    return draws;
}

std::vector<double> quantile(const GaussianParams& p, double alpha) {
    const double q = normal_quantile(alpha);
    std::vector<double> out(p.dim());
    for (std::size_t i = 0; i < p.dim(); ++i) out[i] = p.mu[i] + p.sigma[i] * q;
    return out;
}

GaussianBase::GaussianBase(Mlp phi, std::size_t dim) : phi_(std::move(phi)), dim_(dim) {
    if (phi_->output_dim() != 2 * dim) {
        throw ShapeError("GaussianBase: shape network outputs " + std::to_string(phi_->output_dim()) +
                         " values, expected " + std::to_string(2 * dim));
    }
}

GaussianBase GaussianBase::standard(std::size_t dim) {
    GaussianBase b;
    b.dim_ = dim;
    return b;
}

GaussianTensors GaussianBase::params(const ad::Tensor& x) const {
    if (phi_) return shape_params(*phi_, x);
    return {ad::Tensor::zeros({x.rows(), dim_}), ad::Tensor::full({x.rows(), dim_}, 1.0)};
}

GaussianParams GaussianBase::params(std::span<const double> x) const {
    if (phi_) return shape_params(*phi_, x);
    return {std::vector<double>(dim_, 0.0), std::vector<double>(dim_, 1.0)};
}

std::vector<NamedTensor> GaussianBase::named_parameters(const std::string& prefix) const {
    if (!phi_) return {};
    return phi_->named_parameters(prefix);
}

}  // namespace flowcast
