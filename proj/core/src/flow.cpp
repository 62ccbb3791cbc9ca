#include "flowcast/flow.hpp"

#include <algorithm>
#include <cmath>

#include "flowcast/errors.hpp"
#include "flowcast/normal.hpp"
#include "flowcast/rq_spline.hpp"

namespace flowcast {

namespace {

constexpr double kAffineScaleFloor = 1e-6;

double softplus(double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); }

double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

// Inverse of one transformer on the whole batch. cur: (n x d) in the transform's output order.
// Returns the transformer input (before un-permuting) and the per-row inverse log-det.
std::pair<ad::Tensor, ad::Tensor> invert_transformer(const Transform& t, const ad::Tensor& cur, const ad::Tensor& x,
                                                     double logit_eps) {
    using namespace ad;
    const std::size_t n = cur.rows(), d = cur.cols();
    switch (t.kind) {
        case TransformerKind::Sigmoid: {
            std::vector<std::uint8_t> inside(cur.numel());
            std::vector<double> clamped(cur.numel());
            for (std::size_t i = 0; i < cur.numel(); ++i) {
                inside[i] = cur[i] >= logit_eps && cur[i] <= 1.0 - logit_eps;
                clamped[i] = std::clamp(cur[i], logit_eps, 1.0 - logit_eps);
            }
            const Tensor c = where(inside, cur, Tensor::from(cur.shape(), std::move(clamped)));
            const Tensor log_c = log(c);
            const Tensor log_1mc = log(1.0 - c);
            return {log_c - log_1mc, -sum_last(log_c + log_1mc)};
        }
        case TransformerKind::Affine: {
            const Tensor raw = reshape(t.conditioner.forward(cur, x), {n * d, 2});
            const Tensor shift = reshape(slice_last(raw, 0, 1), {n, d});
            const Tensor scale = softplus(reshape(slice_last(raw, 1, 2), {n, d})) + kAffineScaleFloor;
            return {(cur - shift) / scale, -sum_last(log(scale))};
        }
        case TransformerKind::RationalQuadratic: {
            const Tensor raw = reshape(t.conditioner.forward(cur, x), {n * d, spline_raw_size(t.bins)});
            const SplineTensors s = spline_inverse(reshape(cur, {n * d, 1}), raw, t.bins, t.bound);
            return {reshape(s.value, {n, d}), sum_last(reshape(s.log_abs_deriv, {n, d}))};
        }
    }
    throw Error("unknown transformer kind");
}

}  // namespace

std::string to_string(TransformerKind kind) {
    switch (kind) {
        case TransformerKind::RationalQuadratic: return "rq_spline";
        case TransformerKind::Affine: return "affine";
        case TransformerKind::Sigmoid: return "sigmoid";
    }
    return "?";
}

TransformerKind transformer_kind_from_string(const std::string& name) {
    if (name == "rq_spline") return TransformerKind::RationalQuadratic;
    if (name == "affine") return TransformerKind::Affine;
    if (name == "sigmoid") return TransformerKind::Sigmoid;
    throw ConfigError("unknown transformer kind '" + name + "'");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Cnf: return "cnf";
        case ModelKind::NnG: return "nn_g";
        case ModelKind::NnL: return "nn_l";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "cnf") return ModelKind::Cnf;
    if (name == "nn_g") return ModelKind::NnG;
    if (name == "nn_l") return ModelKind::NnL;
    throw ConfigError("unknown flow model kind '" + name + "' (expected cnf, nn_g, nn_l)");
}

std::size_t Transform::params_per_dim() const {
    switch (kind) {
        case TransformerKind::RationalQuadratic: return spline_raw_size(bins);
        case TransformerKind::Affine: return 2;
        case TransformerKind::Sigmoid: return 0;
    }
    return 0;
}

FeatureScaler FeatureScaler::fit(std::span<const double> rows, std::size_t width) {
    if (width == 0 || rows.size() % width != 0 || rows.empty()) {
        throw ShapeError("FeatureScaler::fit: feature matrix is empty or ragged");
    }
    const std::size_t n = rows.size() / width;
    FeatureScaler s;
    s.mean.assign(width, 0.0);
    s.scale.assign(width, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < width; ++c) s.mean[c] += rows[r * width + c];
    for (double& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < width; ++c) {
            const double dv = rows[r * width + c] - s.mean[c];
            s.scale[c] += dv * dv;
        }
    for (double& v : s.scale) {
        v = std::sqrt(v / static_cast<double>(n));
        if (!(v > 1e-12)) v = 1.0;
    }
    return s;
}

ConditionalFlow::ConditionalFlow(GaussianBase base, std::vector<Transform> transforms, std::size_t context_dim)
    : base_(std::move(base)), transforms_(std::move(transforms)), context_dim_(context_dim) {
    if (transforms_.empty()) throw ConfigError("ConditionalFlow: at least one transform is required");
    for (const Transform& t : transforms_) {
        if (t.permutation.size() != dim()) throw ShapeError("ConditionalFlow: permutation size does not match dim");
        if (t.kind != TransformerKind::Sigmoid && t.conditioner.output_dim() != dim() * t.params_per_dim()) {
            throw ShapeError("ConditionalFlow: conditioner width does not match transformer");
        }
    }
}

void ConditionalFlow::set_target_map(TargetMap map) {
    if (!(map.scale > 0.0)) throw DomainError("target map scale must be positive");
    target_ = map;
}

void ConditionalFlow::set_feature_scaler(FeatureScaler scaler) {
    if (!scaler.empty() && (scaler.mean.size() != context_dim_ || scaler.scale.size() != context_dim_)) {
        throw ShapeError("feature scaler width does not match context dim");
    }
    scaler_ = std::move(scaler);
}

ad::Tensor ConditionalFlow::context(std::span<const double> x_rows) const {
    if (context_dim_ == 0 || x_rows.size() % context_dim_ != 0) {
        throw ShapeError("context: " + std::to_string(x_rows.size()) + " values do not form rows of width " +
                         std::to_string(context_dim_));
    }
    std::vector<double> v(x_rows.begin(), x_rows.end());
    if (!scaler_.empty()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t c = i % context_dim_;
            v[i] = (v[i] - scaler_.mean[c]) / scaler_.scale[c];
        }
    }
    const std::size_t rows = v.size() / context_dim_;
    return ad::Tensor::matrix(rows, context_dim_, std::move(v));
}

InverseResult ConditionalFlow::inverse_pass(const ad::Tensor& y, const ad::Tensor& x) const {
    if (y.rank() != 2 || y.cols() != dim()) {
        throw ShapeError("inverse_pass: targets " + ad::shape_str(y.shape()) + " but flow dim is " +
                         std::to_string(dim()));
    }
    if (x.rows() != y.rows()) throw ShapeError("inverse_pass: target and context row counts differ");
    const std::size_t n = y.rows();
    ad::Tensor cur = y;
    if (target_.scale != 1.0 || target_.offset != 0.0) cur = y * target_.scale + target_.offset;
    ad::Tensor log_det =
        ad::Tensor::full({n, 1}, static_cast<double>(dim()) * std::log(target_.scale));
    for (std::size_t k = transforms_.size(); k-- > 0;) {
        const Transform& t = transforms_[k];
        auto [u, ld] = invert_transformer(t, cur, x, logit_epsilon_);
        cur = t.permutation.apply_inverse(u);
        log_det = log_det + ld;
    }
    return {cur, log_det};
}

ForwardResult ConditionalFlow::forward_pass(std::span<const double> z0, const ad::Tensor& x) const {
    const std::size_t d = dim();
    if (z0.size() % d != 0) throw ShapeError("forward_pass: base draws do not form rows of width d");
    const std::size_t n = z0.size() / d;
    if (x.rows() != n) throw ShapeError("forward_pass: draw and context row counts differ");
    ad::NoGradGuard guard;

    std::vector<double> cur(z0.begin(), z0.end());
    std::vector<double> log_det(n, 0.0);
    std::vector<double> row(d);
    for (const Transform& t : transforms_) {
        // Permute each row into this transformer's order.
        std::vector<double> u(n * d);
        for (std::size_t r = 0; r < n; ++r) {
            std::copy_n(cur.begin() + r * d, d, row.begin());
            const auto pr = t.permutation.apply(row);
            std::copy(pr.begin(), pr.end(), u.begin() + r * d);
        }
        std::vector<double> v(n * d, 0.0);
        if (t.kind == TransformerKind::Sigmoid) {
            for (std::size_t i = 0; i < n * d; ++i) {
                v[i] = sigmoid(u[i]);
                log_det[i / d] += -softplus(-u[i]) - softplus(u[i]);
            }
        } else {
            const std::size_t p = t.params_per_dim();
            ad::Tensor params;
            for (std::size_t i = 0; i < d; ++i) {
                // Coordinate i only needs outputs 0..i-1, which are already in v.
                if (i == 0 || t.conditioner.made()) {
                    params = t.conditioner.forward(ad::Tensor::matrix(n, d, v), x);
                }
                const auto pv = params.data();
                for (std::size_t r = 0; r < n; ++r) {
                    const std::span<const double> raw = pv.subspan(r * d * p + i * p, p);
                    const double in = u[r * d + i];
                    if (t.kind == TransformerKind::Affine) {
                        const double scale = softplus(raw[1]) + kAffineScaleFloor;
                        v[r * d + i] = scale * in + raw[0];
                        log_det[r] += std::log(scale);
                    } else {
                        const SplineValue sv = spline_forward(in, normalize_params(raw, t.bins, t.bound));
                        v[r * d + i] = sv.value;
                        log_det[r] += sv.log_abs_deriv;
                    }
                }
            }
        }
        cur = std::move(v);
    }
    for (double& c : cur) c = (c - target_.offset) / target_.scale;
    for (double& l : log_det) l -= static_cast<double>(d) * std::log(target_.scale);
    return {std::move(cur), std::move(log_det)};
}

ad::Tensor ConditionalFlow::log_prob(const ad::Tensor& y, const ad::Tensor& x) const {
    const InverseResult inv = inverse_pass(y, x);
    return ad::add(flowcast::log_prob(base_.params(x), inv.z0), inv.log_det);
}

ad::Tensor ConditionalFlow::nll(std::span<const double> y_rows, std::span<const double> x_rows) const {
    if (y_rows.empty()) throw DataError("nll: empty batch");
    if (y_rows.size() % dim() != 0) throw ShapeError("nll: targets do not form rows of width d");
    const std::size_t n = y_rows.size() / dim();
    const ad::Tensor x = context(x_rows);
    if (x.rows() != n) throw ShapeError("nll: target and feature row counts differ");
    const ad::Tensor y = ad::Tensor::matrix(n, dim(), std::vector<double>(y_rows.begin(), y_rows.end()));
    return ad::neg(ad::mean(log_prob(y, x)));
}

std::vector<NamedTensor> ConditionalFlow::named_parameters() const {
    std::vector<NamedTensor> out = base_.named_parameters("base");
    for (std::size_t k = 0; k < transforms_.size(); ++k) {
        if (transforms_[k].kind == TransformerKind::Sigmoid) continue;
        auto p = transforms_[k].conditioner.named_parameters("transform" + std::to_string(k));
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

namespace {

ConditionalFlow build(const FlowConfig& cfg, TransformerKind kind, bool sigmoid_tail) {
    if (cfg.dim == 0 || cfg.context_dim == 0) throw ConfigError("flow: dim and context_dim must be positive");
    if (cfg.transforms == 0) throw ConfigError("flow: at least one transform is required");
    Rng rng(cfg.seed);
    GaussianBase base = cfg.learned_base
                            ? GaussianBase(Mlp(cfg.context_dim, cfg.base_hidden, 2 * cfg.dim, rng), cfg.dim)
                            : GaussianBase::standard(cfg.dim);
    std::vector<Transform> transforms;
    for (std::size_t k = 0; k < cfg.transforms; ++k) {
        Transform t;
        t.kind = kind;
        t.bins = kind == TransformerKind::RationalQuadratic ? cfg.bins : 0;
        t.bound = kind == TransformerKind::RationalQuadratic ? cfg.bound : 0.0;
        const std::size_t p = t.params_per_dim();
        Mlp ctx(cfg.context_dim, cfg.conditioner_hidden, cfg.dim * p, rng);
        std::optional<MaskedMlp> made;
        if (cfg.dim > 1) made.emplace(cfg.dim, cfg.conditioner_hidden, p, rng);
        t.conditioner = Conditioner(std::move(made), std::move(ctx));
        if (cfg.zero_init_conditioners) t.conditioner.zero_output_layers();
        t.permutation = cfg.permute && k > 0 ? Permutation::reversal(cfg.dim) : Permutation::identity(cfg.dim);
        transforms.push_back(std::move(t));
    }
    if (sigmoid_tail) {
        Transform t;
        t.kind = TransformerKind::Sigmoid;
        t.permutation = Permutation::identity(cfg.dim);
        transforms.push_back(std::move(t));
    }
    ConditionalFlow flow(std::move(base), std::move(transforms), cfg.context_dim);
    if (cfg.unit_interval_targets && !sigmoid_tail) {
        const double half = cfg.bound - cfg.unit_margin;
        if (!(half > 0.0)) throw ConfigError("flow: unit_margin must be smaller than bound");
        flow.set_target_map({2.0 * half, -half});
    }
    flow.set_logit_epsilon(cfg.logit_epsilon);
    return flow;
}

}  // namespace

ConditionalFlow make_spline_flow(FlowConfig cfg) {
    if (cfg.bins == 0) throw ConfigError("flow: bins must be positive");
    if (!(cfg.bound > 0.0)) throw ConfigError("flow: bound must be positive");
    return build(cfg, TransformerKind::RationalQuadratic, false);
}

ConditionalFlow make_affine_flow(FlowConfig cfg) { return build(cfg, TransformerKind::Affine, false); }

ConditionalFlow make_logit_flow(FlowConfig cfg) { return build(cfg, TransformerKind::Affine, true); }

ConditionalFlow make_flow(const FlowConfig& cfg) {
    switch (cfg.model) {
        case ModelKind::Cnf: return make_spline_flow(cfg);
        case ModelKind::NnG: return make_affine_flow(cfg);
        case ModelKind::NnL: return make_logit_flow(cfg);
    }
    throw ConfigError("unknown model kind");
}

ForecastDensity::ForecastDensity(const ConditionalFlow& flow, std::vector<double> x_raw)
    : flow_(&flow), x_raw_(std::move(x_raw)) {
    if (x_raw_.size() != flow.context_dim()) {
        throw ShapeError("ForecastDensity: context has " + std::to_string(x_raw_.size()) + " features, flow expects " +
                         std::to_string(flow.context_dim()));
    }
    ad::NoGradGuard guard;
    const auto p = flow.base().params(flow.context(x_raw_));
    base_params_ = {std::vector<double>(p.mu.data().begin(), p.mu.data().end()),
                    std::vector<double>(p.sigma.data().begin(), p.sigma.data().end())};
}

ad::Tensor ForecastDensity::repeated_context(std::size_t n) const {
    std::vector<double> rows;
    rows.reserve(n * x_raw_.size());
    for (std::size_t i = 0; i < n; ++i) rows.insert(rows.end(), x_raw_.begin(), x_raw_.end());
    return flow_->context(rows);
}

std::vector<double> ForecastDensity::log_density(std::span<const double> y_rows) const {
    const std::size_t d = dim();
    if (y_rows.size() % d != 0) throw ShapeError("log_density: points do not form rows of width d");
    const std::size_t n = y_rows.size() / d;
    ad::NoGradGuard guard;
    const ad::Tensor lp = flow_->log_prob(ad::Tensor::matrix(n, d, std::vector<double>(y_rows.begin(), y_rows.end())),
                                          repeated_context(n));
    return {lp.data().begin(), lp.data().end()};
}

std::vector<double> ForecastDensity::cdf(std::span<const double> y) const {
    if (dim() != 1) throw DomainError("cdf: only defined for univariate flows");
    const bool unit_support = flow_->transforms().back().kind == TransformerKind::Sigmoid;
    ad::NoGradGuard guard;
    const InverseResult inv =
        flow_->inverse_pass(ad::Tensor::matrix(y.size(), 1, std::vector<double>(y.begin(), y.end())),
                            repeated_context(y.size()));
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (unit_support && y[i] <= 0.0) {
            out[i] = 0.0;
        } else if (unit_support && y[i] >= 1.0) {
            out[i] = 1.0;
        } else {
            out[i] = normal_cdf((inv.z0[i] - base_params_.mu[0]) / base_params_.sigma[0]);
        }
    }
    return out;
}

double ForecastDensity::quantile(double alpha) const {
    const double a[] = {alpha};
    return quantiles(a).front();
}

std::vector<double> ForecastDensity::quantiles(std::span<const double> alphas) const {
    if (dim() != 1) throw DomainError("quantile: only defined for univariate flows");
    std::vector<double> z(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) z[i] = flowcast::quantile(base_params_, alphas[i]).front();
    return flow_->forward_pass(z, repeated_context(alphas.size())).y;
}

std::pair<double, double> ForecastDensity::interval(double beta) const {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("interval: beta must lie in (0, 1)");
    const double a[] = {beta / 2.0, 1.0 - beta / 2.0};
    const auto q = quantiles(a);
    return {q[0], q[1]};
}

std::vector<double> ForecastDensity::sample(std::size_t count, Rng& rng) const {
    if (count == 0) throw DomainError("sample: count must be at least 1");
    const auto draws = flowcast::sample(base_params_, count, rng);
    std::vector<double> z;
    z.reserve(count * dim());
    for (const auto& d : draws) z.insert(z.end(), d.begin(), d.end());
    return flow_->forward_pass(z, repeated_context(count)).y;
}

std::vector<double> sample_scenarios(const ConditionalFlow& flow, std::span<const double> x_raw, std::size_t count,
                                     Rng& rng) {
    return ForecastDensity(flow, {x_raw.begin(), x_raw.end()}).sample(count, rng);
}

double predict_quantile(const ConditionalFlow& flow, std::span<const double> x_raw, double alpha) {
    return ForecastDensity(flow, {x_raw.begin(), x_raw.end()}).quantile(alpha);
}

std::pair<double, double> predict_interval(const ConditionalFlow& flow, std::span<const double> x_raw, double beta) {
    return ForecastDensity(flow, {x_raw.begin(), x_raw.end()}).interval(beta);
}

}  // namespace flowcast
