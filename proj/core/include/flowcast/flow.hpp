#pragma once

// Conditional normalizing flow: a conditional Gaussian base followed by K
// autoregressive elementwise transforms. Transform k maps z(k-1) to z(k) by
// first permuting dimensions, then applying an increasing transformer to each
// coordinate i with parameters from c_k(z(k)_{<i}, x).
//
// The inverse direction (density evaluation, training) is vectorized; the
// forward direction (sampling, quantiles) runs d sequential steps per transform.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/autodiff.hpp"
#include "flowcast/base_dist.hpp"
#include "flowcast/nets.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

enum class TransformerKind { RationalQuadratic, Affine, Sigmoid };

std::string to_string(TransformerKind kind);
TransformerKind transformer_kind_from_string(const std::string& name);

enum class ModelKind { Cnf, NnG, NnL };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct Transform {
    TransformerKind kind = TransformerKind::RationalQuadratic;
    Conditioner conditioner;  // unused by Sigmoid
    Permutation permutation;  // applied to the input before the transformer
    std::size_t bins = 0;     // spline only
    double bound = 0.0;       // spline only

    /// Raw conditioner outputs consumed per dimension.
    std::size_t params_per_dim() const;
};

/// Data-to-model affine map u = scale * y + offset (scale > 0).
struct TargetMap {
    double scale = 1.0;
    double offset = 0.0;
};

/// Per-feature standardization applied to contexts on entry.
struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    bool empty() const { return mean.empty(); }
    /// Fits mean and standard deviation per column of a row-major (n x width) matrix.
    static FeatureScaler fit(std::span<const double> rows, std::size_t width);
};

struct FlowConfig {
    ModelKind model = ModelKind::Cnf;
    std::size_t dim = 1;
    std::size_t context_dim = 1;
    std::size_t transforms = 5;
    std::vector<std::size_t> base_hidden{512, 512};
    std::vector<std::size_t> conditioner_hidden{256, 256};
    std::size_t bins = 10;
    double bound = 5.0;
    bool learned_base = true;
    bool permute = true;
    /// Conditioner output layers start at zero (spline transforms start as identity).
    bool zero_init_conditioners = true;
    /// Map [0,1] targets into [-bound+margin, bound-margin]; NN-L always uses the identity map.
    bool unit_interval_targets = false;
    double unit_margin = 0.5;
    /// NN-L clamps targets into [eps, 1-eps] before the logit.
    double logit_epsilon = 1e-3;
    std::uint64_t seed = 0;
};

struct InverseResult {
    ad::Tensor z0;       // n x d
    ad::Tensor log_det;  // n x 1, log |d z0 / d y|
};

struct ForwardResult {
    std::vector<double> y;        // n x d row-major
    std::vector<double> log_det;  // n, log |d y / d z0|
};

class ConditionalFlow {
public:
    ConditionalFlow() = default;
    ConditionalFlow(GaussianBase base, std::vector<Transform> transforms, std::size_t context_dim);

    std::size_t dim() const { return base_.dim(); }
    std::size_t context_dim() const { return context_dim_; }
    std::size_t size() const { return transforms_.size(); }

    const GaussianBase& base() const { return base_; }
    GaussianBase& base() { return base_; }
    const std::vector<Transform>& transforms() const { return transforms_; }
    std::vector<Transform>& transforms() { return transforms_; }

    const TargetMap& target_map() const { return target_; }
    void set_target_map(TargetMap map);
    const FeatureScaler& feature_scaler() const { return scaler_; }
    void set_feature_scaler(FeatureScaler scaler);
    double logit_epsilon() const { return logit_epsilon_; }
    void set_logit_epsilon(double eps) { logit_epsilon_ = eps; }

    /// Standardized context tensor (n x ctx) from raw row-major features.
    ad::Tensor context(std::span<const double> x_rows) const;

    /// y: (n x d) in data units; x: standardized context from context().
    InverseResult inverse_pass(const ad::Tensor& y, const ad::Tensor& x) const;
    /// z0 row-major (n x d); x standardized (n x ctx). No gradients recorded.
    ForwardResult forward_pass(std::span<const double> z0, const ad::Tensor& x) const;

    /// Per-row log density in data units, (n x 1).
    ad::Tensor log_prob(const ad::Tensor& y, const ad::Tensor& x) const;
    /// Mean negative log-likelihood over rows; Y (n x d), X raw features (n x ctx).
    ad::Tensor nll(std::span<const double> y_rows, std::span<const double> x_rows) const;

    std::vector<NamedTensor> named_parameters() const;
    std::vector<ad::Tensor> parameters() const { return parameters_of(named_parameters()); }

private:
    GaussianBase base_;
    std::vector<Transform> transforms_;
    std::size_t context_dim_ = 0;
    TargetMap target_;
    FeatureScaler scaler_;
    double logit_epsilon_ = 1e-3;
};

/// Builds a flow of the configured model kind.
ConditionalFlow make_flow(const FlowConfig& cfg);
/// K rational-quadratic spline transforms.
ConditionalFlow make_spline_flow(FlowConfig cfg);
/// K affine transforms (conditional Gaussian model).
ConditionalFlow make_affine_flow(FlowConfig cfg);
/// K affine transforms followed by a fixed sigmoid (conditional logit-normal model).
ConditionalFlow make_logit_flow(FlowConfig cfg);

/// Predictive law of a flow at one frozen context vector.
class ForecastDensity {
public:
    ForecastDensity(const ConditionalFlow& flow, std::vector<double> x_raw);

    std::size_t dim() const { return flow_->dim(); }
    const std::vector<double>& context() const { return x_raw_; }

    /// Log densities of n points given row-major (n x d).
    std::vector<double> log_density(std::span<const double> y_rows) const;
    /// CDF values at n scalar points (d = 1 only).
    std::vector<double> cdf(std::span<const double> y) const;
    /// Base quantile pushed through the transforms (d = 1 only); throws DomainError when d > 1.
    double quantile(double alpha) const;
    std::vector<double> quantiles(std::span<const double> alphas) const;
    /// Central (1 - beta) interval: (quantile(beta/2), quantile(1 - beta/2)).
    std::pair<double, double> interval(double beta) const;
    /// S joint draws, row-major (S x d).
    std::vector<double> sample(std::size_t count, Rng& rng) const;

private:
    ad::Tensor repeated_context(std::size_t n) const;

    const ConditionalFlow* flow_;
    std::vector<double> x_raw_;
    GaussianParams base_params_;
};

/// S scenarios at one context, row-major (S x d).
std::vector<double> sample_scenarios(const ConditionalFlow& flow, std::span<const double> x_raw, std::size_t count,
                                     Rng& rng);
double predict_quantile(const ConditionalFlow& flow, std::span<const double> x_raw, double alpha);
std::pair<double, double> predict_interval(const ConditionalFlow& flow, std::span<const double> x_raw, double beta);

}  // namespace flowcast
