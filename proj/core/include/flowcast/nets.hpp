#pragma once

// Feed-forward networks: plain ReLU MLPs for base-distribution parameters and
// context conditioners, a masked autoregressive MLP (MADE), the additive
// conditioner combining the two, and dimension permutations.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowcast/autodiff.hpp"
#include "flowcast/random.hpp"

namespace flowcast {

using NamedTensor = std::pair<std::string, ad::Tensor>;

/// y = x W + b, optionally with W masked elementwise by a constant 0/1 matrix.
struct Linear {
    ad::Tensor weight;  // in x out
    ad::Tensor bias;    // 1 x out
    ad::Tensor mask;    // in x out, undefined when unmasked

    std::size_t in_dim() const { return weight.shape()[0]; }
    std::size_t out_dim() const { return weight.shape()[1]; }
    ad::Tensor forward(const ad::Tensor& x) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
Linear make_linear(std::size_t in, std::size_t out, Rng& rng);

class Mlp {
public:
    Mlp() = default;
    /// ReLU after every hidden layer; the output layer is affine.
    Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t output_dim, Rng& rng);
    /// Takes ownership of prebuilt layers; throws ShapeError if they do not chain.
    explicit Mlp(std::vector<Linear> layers);

    /// x: (n x input_dim) -> (n x output_dim)
    ad::Tensor forward(const ad::Tensor& x) const;

    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }
    bool empty() const { return layers_.empty(); }

    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }

    /// Zeroes the output layer so the net starts as a constant-zero map.
    void zero_output_layer();
    std::vector<NamedTensor> named_parameters(const std::string& prefix) const;

private:
    std::vector<Linear> layers_;
};

/// Masked autoregressive MLP over d inputs. Output block i (width `block`)
/// depends only on inputs 0..i-1.
class MaskedMlp {
public:
    MaskedMlp() = default;
    MaskedMlp(std::size_t dim, const std::vector<std::size_t>& hidden, std::size_t block, Rng& rng);

    /// z: (n x dim) -> (n x dim*block)
    ad::Tensor forward(const ad::Tensor& z) const;

    std::size_t dim() const { return dim_; }
    std::size_t block() const { return block_; }
    const Mlp& net() const { return net_; }
    Mlp& net() { return net_; }

    /// Degrees: inputs 1..d, hidden cycled over 1..d-1 (0 when d = 1), output block i has degree i+1.
    const std::vector<std::vector<std::size_t>>& degrees() const { return degrees_; }
    /// connectivity[o][j] != 0 iff some masked path links input j to output column o.
    std::vector<std::vector<std::uint8_t>> connectivity() const;

    void zero_output_layer() { net_.zero_output_layer(); }
    std::vector<NamedTensor> named_parameters(const std::string& prefix) const;

private:
    std::size_t dim_ = 0;
    std::size_t block_ = 0;
    std::vector<std::vector<std::size_t>> degrees_;
    Mlp net_;
};

/// c(z, x) = made(z) + context(x). For d = 1 the autoregressive part is absent.
class Conditioner {
public:
    Conditioner() = default;
    /// Throws ShapeError when the two parts' output widths differ.
    Conditioner(std::optional<MaskedMlp> made, Mlp context);

    /// z: (n x d), x: (n x ctx) -> (n x d*block)
    ad::Tensor forward(const ad::Tensor& z, const ad::Tensor& x) const;

    std::size_t output_dim() const { return context_.output_dim(); }
    const std::optional<MaskedMlp>& made() const { return made_; }
    const Mlp& context() const { return context_; }
    std::optional<MaskedMlp>& made() { return made_; }
    Mlp& context() { return context_; }

    void zero_output_layers();
    std::vector<NamedTensor> named_parameters(const std::string& prefix) const;

private:
    std::optional<MaskedMlp> made_;
    Mlp context_;
};

/// Bijection on {0..d-1}; apply() gathers out[j] = in[order[j]].
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<std::size_t> order);
    static Permutation identity(std::size_t d);
    static Permutation reversal(std::size_t d);

    std::size_t size() const { return order_.size(); }
    bool is_identity() const;
    const std::vector<std::size_t>& order() const { return order_; }
    const std::vector<std::size_t>& inverse_order() const { return inverse_; }

    ad::Tensor apply(const ad::Tensor& x) const;
    ad::Tensor apply_inverse(const ad::Tensor& x) const;
    std::vector<double> apply(const std::vector<double>& v) const;
    std::vector<double> apply_inverse(const std::vector<double>& v) const;

private:
    std::vector<std::size_t> order_;
    std::vector<std::size_t> inverse_;
};

std::vector<ad::Tensor> parameters_of(const std::vector<NamedTensor>& named);

}  // namespace flowcast
