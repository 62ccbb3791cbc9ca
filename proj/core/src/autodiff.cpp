#include "flowcast/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "flowcast/errors.hpp"

namespace flowcast::ad {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tensor make_result(Shape shape, std::vector<double> value, const char* op,
                   std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    if (g_grad_enabled) {
        bool any = false;
        for (const Tensor* t : inputs) any = any || t->requires_grad();
        if (any) {
            node->requires_grad = true;
            for (const Tensor* t : inputs) node->parents.push_back(t->node_ptr());
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

Tensor make_result_n(Shape shape, std::vector<double> value, const char* op,
                     const std::vector<Tensor>& inputs, std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    if (g_grad_enabled) {
        bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            for (const Tensor& t : inputs) node->parents.push_back(t.node_ptr());
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ShapeError(std::string(op) + ": undefined tensor operand");
}

// How a binary op's operands line up.
enum class Broadcast { Same, ScalarA, ScalarB };

Broadcast resolve(const Tensor& a, const Tensor& b, const char* op) {
    check_defined(a, op);
    check_defined(b, op);
    if (a.shape() == b.shape()) return Broadcast::Same;
    if (b.numel() == 1) return Broadcast::ScalarB;
    if (a.numel() == 1) return Broadcast::ScalarA;
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Accumulates an elementwise local-derivative product into a parent, reducing
// to a single element when the parent was broadcast.
template <class Local>
void accumulate(Node& parent, const std::vector<double>& upstream, Local local) {
    if (!parent.requires_grad) return;
    auto& g = parent.ensure_grad();
    if (g.size() == upstream.size()) {
        for (std::size_t i = 0; i < upstream.size(); ++i) g[i] += upstream[i] * local(i);
    } else {
        double total = 0.0;
        for (std::size_t i = 0; i < upstream.size(); ++i) total += upstream[i] * local(i);
        g[0] += total;
    }
}

template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F f, DA da, DB db) {
    const Broadcast mode = resolve(a, b, op);
    const Shape shape = mode == Broadcast::ScalarA ? b.shape() : a.shape();
    const std::size_t n = numel_of(shape);
    const auto av = a.data();
    const auto bv = b.data();
    const std::size_t sa = mode == Broadcast::ScalarA ? 0 : 1;
    const std::size_t sb = mode == Broadcast::ScalarB ? 0 : 1;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i * sa], bv[i * sb]);
    return make_result(shape, std::move(out), op, {&a, &b}, [sa, sb, da, db](Node& self) {
        const auto& x = self.parents[0]->value;
        const auto& y = self.parents[1]->value;
        accumulate(*self.parents[0], self.grad,
                   [&](std::size_t i) { return da(x[i * sa], y[i * sb]); });
        accumulate(*self.parents[1], self.grad,
                   [&](std::size_t i) { return db(x[i * sa], y[i * sb]); });
    });
}

// Elementwise unary op where the derivative is expressed through input x and output y.
template <class F, class D>
Tensor unary(const Tensor& x, const char* op, F f, D d) {
    check_defined(x, op);
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
    return make_result(x.shape(), std::move(out), op, {&x}, [d](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * d(p.value[i], self.value[i]);
    });
}

void require_matrix(const Tensor& t, const char* op) {
    check_defined(t, op);
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::vector<double>& Node::ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel_of(shape) != values.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " holds " +
                         std::to_string(numel_of(shape)) + " values, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = numel_of(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
    return from({rows, cols}, std::move(values), requires_grad);
}

std::size_t Tensor::cols() const { return node_->shape.empty() ? 1 : node_->shape.back(); }

std::size_t Tensor::rows() const {
    const std::size_t c = cols();
    return c == 0 ? 0 : numel() / c;
}

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return node_->value[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
    return node_->grad;
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
    check_defined(loss, "backward");
    if (loss.numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS gives a topological order (parents before children).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior grads are per-call scratch; only leaves accumulate across calls.
    for (Node* n : order) {
        if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    }
    loss.node()->ensure_grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->is_leaf()) n->backward_fn(*n);
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, double b) {
    return unary(a, "add_scalar", [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double b) {
    return unary(a, "mul_scalar", [b](double x) { return x * b; }, [b](double, double) { return b; });
}

Tensor rsub(double a, const Tensor& b) {
    return unary(b, "rsub_scalar", [a](double x) { return a - x; }, [](double, double) { return -1.0; });
}

Tensor neg(const Tensor& x) {
    return unary(x, "neg", [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& x) {
    return unary(x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
    check_defined(x, "log");
    for (double v : x.data()) {
        if (!(v > 0.0)) {
            std::ostringstream os;
            os << "log: non-positive input " << v;
            throw DomainError(os.str());
        }
    }
    return unary(x, "log", [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
    check_defined(x, "sqrt");
    for (double v : x.data()) {
        if (v < 0.0) {
            std::ostringstream os;
            os << "sqrt: negative input " << v;
            throw DomainError(os.str());
        }
    }
    return unary(x, "sqrt", [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
    return unary(x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor tanh(const Tensor& x) {
    return unary(x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
    return unary(
        x, "softplus", [](double v) { return std::log1p(std::exp(-std::abs(v))) + std::max(v, 0.0); },
        [](double v, double) {
            // d/dv softplus = sigmoid(v)
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
    if (b.shape()[0] != k) {
        throw ShapeError("matmul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(n * m);
    MutMap(out.data(), n, m).noalias() = ConstMap(a.data().data(), n, k) * ConstMap(b.data().data(), k, m);
    return make_result({n, m}, std::move(out), "matmul", {&a, &b}, [n, k, m](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const ConstMap g(self.grad.data(), n, m);
        if (pa.requires_grad) {
            MutMap(pa.ensure_grad().data(), n, k).noalias() += g * ConstMap(pb.value.data(), k, m).transpose();
        }
        if (pb.requires_grad) {
            MutMap(pb.ensure_grad().data(), k, m).noalias() += ConstMap(pa.value.data(), n, k).transpose() * g;
        }
    });
}

Tensor softmax(const Tensor& x) {
    check_defined(x, "softmax");
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = xv.data() + i * c;
        const double mx = *std::max_element(row, row + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += out[i * c + j] = std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= total;
    }
    return make_result(x.shape(), std::move(out), "softmax", {&x}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            const double* y = self.value.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += y[j] * (gy[j] - dot);
        }
    });
}

Tensor cumsum(const Tensor& x) {
    check_defined(x, "cumsum");
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = acc += xv[i * c + j];
    }
    return make_result(x.shape(), std::move(out), "cumsum", {&x}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double acc = 0.0;
            for (std::size_t j = c; j-- > 0;) g[i * c + j] += acc += self.grad[i * c + j];
        }
    });
}

Tensor sum(const Tensor& x) {
    check_defined(x, "sum");
    double total = 0.0;
    for (double v : x.data()) total += v;
    return make_result({}, {total}, "sum", {&x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        for (double& g : p.ensure_grad()) g += self.grad[0];
    });
}

Tensor mean(const Tensor& x) {
    check_defined(x, "mean");
    if (x.numel() == 0) throw ShapeError("mean: empty tensor");
    return mul(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_last(const Tensor& x) {
    check_defined(x, "sum_last");
    const std::size_t r = x.rows(), c = x.cols();
    const auto xv = x.data();
    std::vector<double> out(r, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i] += xv[i * c + j];
    return make_result({r, 1}, std::move(out), "sum_last", {&x}, [r, c](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i];
    });
}

Tensor slice_last(const Tensor& x, std::size_t begin, std::size_t end) {
    check_defined(x, "slice_last");
    const std::size_t r = x.rows(), c = x.cols();
    if (begin > end || end > c) {
        throw ShapeError("slice_last: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(x.shape()));
    }
    const std::size_t w = end - begin;
    const auto xv = x.data();
    std::vector<double> out(r * w);
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(xv.data() + i * c + begin, w, out.data() + i * w);
    return make_result({r, w}, std::move(out), "slice", {&x}, [r, c, w, begin](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += self.grad[i * w + j];
    });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_last: no operands");
    const std::size_t r = parts.front().rows();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const Tensor& t : parts) {
        check_defined(t, "concat_last");
        if (t.rows() != r) {
            throw ShapeError("concat_last: shape mismatch " + shape_str(parts.front().shape()) + " vs " +
                             shape_str(t.shape()));
        }
        offsets.push_back(total);
        total += t.cols();
    }
    std::vector<double> out(r * total);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const std::size_t c = parts[p].cols();
        const auto v = parts[p].data();
        for (std::size_t i = 0; i < r; ++i) std::copy_n(v.data() + i * c, c, out.data() + i * total + offsets[p]);
    }
    return make_result_n({r, total}, std::move(out), "concat", parts, [r, total, offsets](Node& self) {
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            Node& parent = *self.parents[p];
            if (!parent.requires_grad) continue;
            const std::size_t c = parent.value.size() / (r == 0 ? 1 : r);
            auto& g = parent.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + offsets[p] + j];
        }
    });
}

Tensor gather_last(const Tensor& x, std::span<const std::size_t> index) {
    check_defined(x, "gather_last");
    const std::size_t r = x.rows(), c = x.cols();
    if (index.size() != r) {
        throw ShapeError("gather_last: " + std::to_string(index.size()) + " indices for " + shape_str(x.shape()));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    const auto xv = x.data();
    std::vector<double> out(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (idx[i] >= c) throw ShapeError("gather_last: index out of range");
        out[i] = xv[i * c + idx[i]];
    }
    return make_result({r, 1}, std::move(out), "gather", {&x}, [c, idx = std::move(idx)](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) g[i * c + idx[i]] += self.grad[i];
    });
}

Tensor permute_last(const Tensor& x, std::span<const std::size_t> order) {
    check_defined(x, "permute_last");
    const std::size_t r = x.rows(), c = x.cols();
    if (order.size() != c) throw ShapeError("permute_last: order length does not match " + shape_str(x.shape()));
    std::vector<std::size_t> ord(order.begin(), order.end());
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + ord[j]];
    return make_result(x.shape(), std::move(out), "permute", {&x}, [r, c, ord = std::move(ord)](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + ord[j]] += self.grad[i * c + j];
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    check_defined(x, "reshape");
    if (numel_of(shape) != x.numel()) {
        throw ShapeError("reshape: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result(std::move(shape), std::move(out), "reshape", {&x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor where(std::span<const std::uint8_t> mask, const Tensor& a, const Tensor& b) {
    check_defined(a, "where");
    check_defined(b, "where");
    if (a.shape() != b.shape()) {
        throw ShapeError("where: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    if (mask.size() != a.numel()) throw ShapeError("where: mask length does not match " + shape_str(a.shape()));
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] ? av[i] : bv[i];
    return make_result(a.shape(), std::move(out), "where", {&a, &b}, [m = std::move(m)](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < m.size(); ++i)
                if (m[i]) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < m.size(); ++i)
                if (!m[i]) g[i] += self.grad[i];
        }
    });
}

}  // namespace flowcast::ad
