#include "flowcast/nets.hpp"

#include <cmath>

#include "flowcast/errors.hpp"

namespace flowcast {

ad::Tensor Linear::forward(const ad::Tensor& x) const {
    const ad::Tensor w = mask.defined() ? ad::mul(weight, mask) : weight;
    // Row-broadcast of the bias expressed as a rank-1 product keeps every op
    // within the scalar/exact-shape broadcasting rule.
    const ad::Tensor ones = ad::Tensor::full({x.rows(), 1}, 1.0);
    return ad::add(ad::matmul(x, w), ad::matmul(ones, bias));
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    std::vector<double> b(out);
    for (double& v : b) v = rng.uniform(-bound, bound);
    return Linear{ad::Tensor::matrix(in, out, std::move(w), true), ad::Tensor::matrix(1, out, std::move(b), true), {}};
}

Mlp::Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim, Rng& rng) {
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
        layers_.push_back(make_linear(in, h, rng));
        in = h;
    }
    layers_.push_back(make_linear(in, output_dim, rng));
}

Mlp::Mlp(std::vector<Linear> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("Mlp: no layers");
    for (std::size_t l = 1; l < layers_.size(); ++l) {
        if (layers_[l - 1].out_dim() != layers_[l].in_dim()) {
            throw ShapeError("Mlp: layer " + std::to_string(l - 1) + " outputs " +
                             std::to_string(layers_[l - 1].out_dim()) + " but layer " + std::to_string(l) +
                             " expects " + std::to_string(layers_[l].in_dim()));
        }
    }
}

ad::Tensor Mlp::forward(const ad::Tensor& x) const {
    if (x.rank() != 2 || x.cols() != input_dim()) {
        throw ShapeError("Mlp::forward: input " + ad::shape_str(x.shape()) + " but net expects width " +
                         std::to_string(input_dim()));
    }
    ad::Tensor h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = layers_[l].forward(h);
        if (l + 1 < layers_.size()) h = ad::relu(h);
    }
    return h;
}

void Mlp::zero_output_layer() {
    Linear& last = layers_.back();
    for (double& v : last.weight.mutable_data()) v = 0.0;
    for (double& v : last.bias.mutable_data()) v = 0.0;
}

std::vector<NamedTensor> Mlp::named_parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        out.emplace_back(prefix + ".layer" + std::to_string(l) + ".weight", layers_[l].weight);
        out.emplace_back(prefix + ".layer" + std::to_string(l) + ".bias", layers_[l].bias);
    }
    return out;
}

MaskedMlp::MaskedMlp(std::size_t dim, const std::vector<std::size_t>& hidden, std::size_t block, Rng& rng)
    : dim_(dim), block_(block) {
    if (dim == 0 || block == 0) throw ShapeError("MaskedMlp: dim and block must be positive");
    std::vector<std::size_t> input_deg(dim);
    for (std::size_t j = 0; j < dim; ++j) input_deg[j] = j + 1;
    degrees_.push_back(input_deg);
    for (std::size_t h : hidden) {
        std::vector<std::size_t> deg(h);
        for (std::size_t u = 0; u < h; ++u) deg[u] = dim == 1 ? 0 : (u % (dim - 1)) + 1;
        degrees_.push_back(std::move(deg));
    }
    std::vector<std::size_t> output_deg(dim * block);
    for (std::size_t o = 0; o < output_deg.size(); ++o) output_deg[o] = o / block + 1;
    degrees_.push_back(output_deg);

    std::vector<Linear> layers;
    for (std::size_t l = 0; l + 1 < degrees_.size(); ++l) {
        const auto& din = degrees_[l];
        const auto& dout = degrees_[l + 1];
        const bool to_output = l + 2 == degrees_.size();
        Linear lin = make_linear(din.size(), dout.size(), rng);
        std::vector<double> m(din.size() * dout.size());
        for (std::size_t i = 0; i < din.size(); ++i) {
            for (std::size_t o = 0; o < dout.size(); ++o) {
                const bool on = to_output ? dout[o] > din[i] : dout[o] >= din[i];
                m[i * dout.size() + o] = on ? 1.0 : 0.0;
            }
        }
        lin.mask = ad::Tensor::matrix(din.size(), dout.size(), std::move(m));
        layers.push_back(std::move(lin));
    }
    net_ = Mlp(std::move(layers));
}

ad::Tensor MaskedMlp::forward(const ad::Tensor& z) const {
    if (z.rank() != 2 || z.cols() != dim_) {
        throw ShapeError("MaskedMlp::forward: input " + ad::shape_str(z.shape()) + " but net expects width " +
                         std::to_string(dim_));
    }
    return net_.forward(z);
}

std::vector<std::vector<std::uint8_t>> MaskedMlp::connectivity() const {
    // reach[j][u]: input j reaches unit u of the current layer.
    std::vector<std::vector<std::uint8_t>> reach(dim_, std::vector<std::uint8_t>(dim_, 0));
    for (std::size_t j = 0; j < dim_; ++j) reach[j][j] = 1;
    for (const Linear& layer : net_.layers()) {
        const std::size_t in = layer.in_dim(), out = layer.out_dim();
        const auto m = layer.mask.data();
        std::vector<std::vector<std::uint8_t>> next(dim_, std::vector<std::uint8_t>(out, 0));
        for (std::size_t j = 0; j < dim_; ++j)
            for (std::size_t i = 0; i < in; ++i)
                if (reach[j][i])
                    for (std::size_t o = 0; o < out; ++o)
                        if (m[i * out + o] != 0.0) next[j][o] = 1;
        reach = std::move(next);
    }
    const std::size_t outputs = dim_ * block_;
    std::vector<std::vector<std::uint8_t>> conn(outputs, std::vector<std::uint8_t>(dim_, 0));
    for (std::size_t o = 0; o < outputs; ++o)
        for (std::size_t j = 0; j < dim_; ++j) conn[o][j] = reach[j][o];
    return conn;
}

std::vector<NamedTensor> MaskedMlp::named_parameters(const std::string& prefix) const {
    return net_.named_parameters(prefix);
}

Conditioner::Conditioner(std::optional<MaskedMlp> made, Mlp context)
    : made_(std::move(made)), context_(std::move(context)) {
    if (made_ && made_->net().output_dim() != context_.output_dim()) {
        throw ShapeError("Conditioner: autoregressive part width " + std::to_string(made_->net().output_dim()) +
                         " differs from context part width " + std::to_string(context_.output_dim()));
    }
}

ad::Tensor Conditioner::forward(const ad::Tensor& z, const ad::Tensor& x) const {
    ad::Tensor out = context_.forward(x);
    if (made_) out = ad::add(made_->forward(z), out);
    return out;
}

void Conditioner::zero_output_layers() {
    context_.zero_output_layer();
    if (made_) made_->zero_output_layer();
}

std::vector<NamedTensor> Conditioner::named_parameters(const std::string& prefix) const {
    std::vector<NamedTensor> out = context_.named_parameters(prefix + ".context");
    if (made_) {
        auto m = made_->named_parameters(prefix + ".made");
        out.insert(out.end(), m.begin(), m.end());
    }
    return out;
}

Permutation::Permutation(std::vector<std::size_t> order) : order_(std::move(order)), inverse_(order_.size()) {
    std::vector<std::uint8_t> seen(order_.size(), 0);
    for (std::size_t j = 0; j < order_.size(); ++j) {
        if (order_[j] >= order_.size() || seen[order_[j]]) throw ShapeError("Permutation: order is not a bijection");
        seen[order_[j]] = 1;
        inverse_[order_[j]] = j;
    }
}

Permutation Permutation::identity(std::size_t d) {
    std::vector<std::size_t> o(d);
    for (std::size_t j = 0; j < d; ++j) o[j] = j;
    return Permutation(std::move(o));
}

Permutation Permutation::reversal(std::size_t d) {
    std::vector<std::size_t> o(d);
    for (std::size_t j = 0; j < d; ++j) o[j] = d - 1 - j;
    return Permutation(std::move(o));
}

bool Permutation::is_identity() const {
    for (std::size_t j = 0; j < order_.size(); ++j)
        if (order_[j] != j) return false;
    return true;
}

ad::Tensor Permutation::apply(const ad::Tensor& x) const {
    return is_identity() ? x : ad::permute_last(x, order_);
}

ad::Tensor Permutation::apply_inverse(const ad::Tensor& x) const {
    return is_identity() ? x : ad::permute_last(x, inverse_);
}

std::vector<double> Permutation::apply(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[order_[j]];
    return out;
}

std::vector<double> Permutation::apply_inverse(const std::vector<double>& v) const {
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[inverse_[j]];
    return out;
}

std::vector<ad::Tensor> parameters_of(const std::vector<NamedTensor>& named) {
    std::vector<ad::Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

}  // namespace flowcast
