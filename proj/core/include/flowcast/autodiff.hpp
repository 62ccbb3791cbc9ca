#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major tensors.
//
// A Tensor is a cheap handle to a graph node. Operations whose inputs require
// gradients record their parents and a vector-Jacobian closure; backward()
// replays the record in reverse topological order. Broadcasting is limited to
// scalar-vs-tensor and exact-shape operands.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace flowcast::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    std::vector<double>& ensure_grad();
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    /// Column vector (n x 1) or row matrix helpers.
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    /// Size of the last axis (1 for scalars).
    std::size_t cols() const;
    /// Product of all axes but the last.
    std::size_t rows() const;

    std::span<const double> data() const { return node_->value; }
    /// Mutable access for optimizers and initializers; never call on a graph interior.
    std::span<double> mutable_data() { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient buffer; zeros if backward never reached this tensor.
    std::vector<double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    /// Same values, no history.
    Tensor detach() const;

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// While alive on a thread, operations on that thread record no history.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Fills grads of every ancestor of `loss` with d(loss)/d(ancestor).
/// Leaf gradients accumulate across calls; call zero_grad to reset them.
void backward(const Tensor& loss);

// Elementwise binary ops. Either operand may be a single-element tensor.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor rsub(double a, const Tensor& b);  // a - b

Tensor neg(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log1p(exp(-|x|)) + max(x, 0)
Tensor softplus(const Tensor& x);

/// (n x k) @ (k x m)
Tensor matmul(const Tensor& a, const Tensor& b);

/// Softmax over the last axis.
Tensor softmax(const Tensor& x);
/// Inclusive running sum over the last axis.
Tensor cumsum(const Tensor& x);

/// Sum of all elements, scalar result.
Tensor sum(const Tensor& x);
/// Mean of all elements, scalar result.
Tensor mean(const Tensor& x);
/// Row sums over the last axis: (r x c) -> (r x 1).
Tensor sum_last(const Tensor& x);

/// Columns [begin, end) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end);
/// Concatenation along the last axis; all parts share the row count.
Tensor concat_last(const std::vector<Tensor>& parts);
/// out[r] = x[r, index[r]]; result (r x 1).
Tensor gather_last(const Tensor& x, std::span<const std::size_t> index);
/// out[:, j] = x[:, order[j]].
Tensor permute_last(const Tensor& x, std::span<const std::size_t> order);
Tensor reshape(const Tensor& x, Shape shape);
/// out[i] = mask[i] ? a[i] : b[i]; a and b share a shape.
Tensor where(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& x) { return neg(x); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, b); }
inline Tensor operator+(double a, const Tensor& b) { return add(b, a); }
inline Tensor operator-(const Tensor& a, double b) { return add(a, -b); }
inline Tensor operator-(double a, const Tensor& b) { return rsub(a, b); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(b, a); }

}  // namespace flowcast::ad
