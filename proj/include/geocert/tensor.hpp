#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "geocert/fft.hpp"

namespace geocert {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily on first accumulation
    bool requires_grad = false;
    bool tape_used = false;  // set once this node participated in a backward pass
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

    void accumulate(const std::vector<double>& g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }

    double* grad_data() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad.data();
    }
};

inline void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string("non-finite value in ") + what);
}

// Right-aligned broadcast: dimensions must match, be 1, or be absent.
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t ra = a.size(), rb = b.size();
    const std::size_t r = std::max(ra, rb);
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t da = i < ra ? a[ra - 1 - i] : 1;
        const std::size_t db = i < rb ? b[rb - 1 - i] : 1;
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument("broadcast mismatch: " + shape_str(a) + " vs " + shape_str(b));
        out[r - 1 - i] = std::max(da, db);
    }
    return out;
}

// Strides of `s` as seen inside broadcast result shape `out` (0 on broadcast dims).
inline std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t st = 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const std::size_t d = s.size() - 1 - i;
        const std::size_t od = out.size() - 1 - i;
        strides[od] = (s[d] == 1 && out[od] != 1) ? 0 : st;
        st *= s[d];
    }
    return strides;
}

}  // namespace detail

/// Dense row-major 64-bit float tensor with reverse-mode autodiff.
/// Handles are cheap shared references to graph nodes.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (numel(shape) != data.size())
            throw std::invalid_argument("tensor: shape/data size mismatch");
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        detail::check_finite(n->value, "tensor literal");
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        std::vector<double> data(numel(shape), v);
        return from(std::move(shape), std::move(data), requires_grad);
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), 0.0, requires_grad);
    }

    static Tensor scalar(double v) { return from({1}, {v}); }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& mutable_data() { return node_->value; }
    bool requires_grad() const { return node_->requires_grad; }
    double item() const {
        if (size() != 1) throw std::logic_error("item() on non-scalar tensor");
        return node_->value[0];
    }

    const std::vector<double>& grad() const {
        if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0);
        return node_->grad;
    }

    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    /// Reverse-mode pass from a scalar loss. Each graph may be consumed once.
    void backward() const {
        if (size() != 1) throw std::logic_error("backward() requires a scalar loss");
        if (!node_->requires_grad) throw std::logic_error("backward() on a graph with no parameters");
        if (node_->tape_used) throw std::logic_error("backward() called twice on the same tape");

        // iterative post-order topological sort over grad-requiring nodes
        std::vector<detail::Node*> order;
        std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
        std::unordered_set<detail::Node*> visited{node_.get()};
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                detail::Node* p = n->parents[idx].get();
                ++idx;
                if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }

        node_->grad.assign(1, 1.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node* n = *it;
            if (n->backprop) {
                if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
                n->backprop(*n);
                n->tape_used = true;
            }
        }
        node_->tape_used = true;
    }

    std::shared_ptr<detail::Node> node() const { return node_; }

    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

namespace ops {

using detail::Node;

inline Tensor make_op(Shape shape, std::vector<double> value,
                      std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backprop, const char* what) {
    detail::check_finite(value, what);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return Tensor(std::move(n));
}

// ---- elementwise binary with trailing broadcast ----

template <class F, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, F f, DA dfda, DB dfdb, const char* what) {
    auto an = a.node();
    auto bn = b.node();
    const Shape out_shape = detail::broadcast_shape(an->shape, bn->shape);
    const std::size_t n = numel(out_shape);
    const auto sa = detail::broadcast_strides(an->shape, out_shape);
    const auto sb = detail::broadcast_strides(bn->shape, out_shape);
    const std::size_t rank = out_shape.size();

    std::vector<double> value(n);
    std::vector<std::size_t> ia(n), ib(n);  // flat index maps, reused by backprop
    std::vector<std::size_t> coord(rank, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t oa = 0, ob = 0;
        for (std::size_t d = 0; d < rank; ++d) {
            oa += coord[d] * sa[d];
            ob += coord[d] * sb[d];
        }
        ia[i] = oa;
        ib[i] = ob;
        value[i] = f(an->value[oa], bn->value[ob]);
        for (std::size_t d = rank; d-- > 0;) {
            if (++coord[d] < out_shape[d]) break;
            coord[d] = 0;
        }
    }

    auto backprop = [an, bn, ia = std::move(ia), ib = std::move(ib), dfda, dfdb](Node& self) {
        if (an->requires_grad) {
            double* g = an->grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[ia[i]] += self.grad[i] * dfda(an->value[ia[i]], bn->value[ib[i]]);
        }
        if (bn->requires_grad) {
            double* g = bn->grad_data();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                g[ib[i]] += self.grad[i] * dfdb(an->value[ia[i]], bn->value[ib[i]]);
        }
    };
    return make_op(out_shape, std::move(value), {an, bn}, std::move(backprop), what);
}

template <class F, class DF>
Tensor unary_op(const Tensor& a, F f, DF dfdx, const char* what) {
    auto an = a.node();
    std::vector<double> value(an->value.size());
    for (std::size_t i = 0; i < value.size(); ++i) value[i] = f(an->value[i]);
    auto backprop = [an, dfdx](Node& self) {
        double* g = an->grad_data();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            g[i] += self.grad[i] * dfdx(an->value[i]);
    };
    return make_op(an->shape, std::move(value), {an}, std::move(backprop), what);
}

}  // namespace ops

// ---- arithmetic ----

inline Tensor add(const Tensor& a, const Tensor& b) {
    return ops::binary_op(
        a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; }, "add");
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
    return ops::binary_op(
        a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; }, "sub");
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
    return ops::binary_op(
        a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; }, "mul");
}
inline Tensor div(const Tensor& a, const Tensor& b) {
    return ops::binary_op(
        a, b, [](double x, double y) { return x / y; }, [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); }, "div");
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
inline Tensor operator-(const Tensor& a, double c) { return sub(a, Tensor::scalar(c)); }
inline Tensor operator*(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }
inline Tensor operator/(const Tensor& a, double c) { return div(a, Tensor::scalar(c)); }
inline Tensor operator+(double c, const Tensor& a) { return add(Tensor::scalar(c), a); }
inline Tensor operator-(double c, const Tensor& a) { return sub(Tensor::scalar(c), a); }
inline Tensor operator*(double c, const Tensor& a) { return mul(Tensor::scalar(c), a); }
inline Tensor operator/(double c, const Tensor& a) { return div(Tensor::scalar(c), a); }

// ---- unary ----

inline Tensor neg(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return -x; }, [](double) { return -1.0; }, "neg");
}
inline Tensor relu(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; },
        "relu");
}
inline double sigmoid_val(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline Tensor sigmoid(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return sigmoid_val(x); },
        [](double x) {
            const double s = sigmoid_val(x);
            return s * (1.0 - s);
        },
        "sigmoid");
}
inline Tensor silu(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return x * sigmoid_val(x); },
        [](double x) {
            const double s = sigmoid_val(x);
            return s + x * s * (1.0 - s);
        },
        "silu");
}
inline Tensor elu(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
        [](double x) { return x > 0.0 ? 1.0 : std::exp(x); }, "elu");
}
inline Tensor tanh(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        },
        "tanh");
}
inline Tensor exp(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); }, "exp");
}
inline Tensor log(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; }, "log");
}
inline Tensor sqrt(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::sqrt(x); }, [](double x) { return 0.5 / std::sqrt(x); },
        "sqrt");
}
inline Tensor cos(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); }, "cos");
}
inline Tensor abs(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return std::abs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }, "abs");
}
// sign carries zero gradient almost everywhere
inline Tensor sign(const Tensor& a) {
    return ops::unary_op(
        a, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); },
        [](double) { return 0.0; }, "sign");
}
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    return ops::unary_op(
        a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
        [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; }, "clamp");
}

// ---- shape ops ----

inline Tensor reshape(const Tensor& a, Shape shape) {
    auto an = a.node();
    if (numel(shape) != an->value.size()) throw std::invalid_argument("reshape: size mismatch");
    auto backprop = [an](ops::Node& self) { an->accumulate(self.grad); };
    return ops::make_op(std::move(shape), an->value, {an}, std::move(backprop), "reshape");
}

/// Swap the last two axes (rank >= 2).
inline Tensor transpose_12(const Tensor& a) {
    auto an = a.node();
    if (an->shape.size() < 2) throw std::invalid_argument("transpose_12: rank < 2");
    Shape out = an->shape;
    const std::size_t r = out.size();
    std::swap(out[r - 1], out[r - 2]);
    const std::size_t rows = an->shape[r - 2], cols = an->shape[r - 1];
    const std::size_t mat = rows * cols;
    const std::size_t batch = an->value.size() / mat;
    std::vector<double> value(an->value.size());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                value[b * mat + j * rows + i] = an->value[b * mat + i * cols + j];
    auto backprop = [an, rows, cols, mat, batch](ops::Node& self) {
        double* g = an->grad_data();
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    g[b * mat + i * cols + j] += self.grad[b * mat + j * rows + i];
    };
    return ops::make_op(std::move(out), std::move(value), {an}, std::move(backprop), "transpose");
}

/// Slice along the last axis: elements [start, start+len).
inline Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len) {
    auto an = a.node();
    const std::size_t last = an->shape.back();
    if (start + len > last) throw std::invalid_argument("slice_last: out of range");
    Shape out = an->shape;
    out.back() = len;
    const std::size_t outer = an->value.size() / last;
    std::vector<double> value(outer * len);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t j = 0; j < len; ++j) value[o * len + j] = an->value[o * last + start + j];
    auto backprop = [an, start, len, last, outer](ops::Node& self) {
        double* g = an->grad_data();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < len; ++j) g[o * last + start + j] += self.grad[o * len + j];
    };
    return ops::make_op(std::move(out), std::move(value), {an}, std::move(backprop), "slice");
}

/// Concatenate along the last axis; all other extents must agree.
inline Tensor concat_last(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_last: empty");
    std::vector<std::shared_ptr<ops::Node>> nodes;
    std::size_t total = 0;
    for (const auto& p : parts) {
        nodes.push_back(p.node());
        total += p.shape().back();
    }
    Shape out = nodes[0]->shape;
    const std::size_t outer = nodes[0]->value.size() / out.back();
    for (const auto& n : nodes) {
        Shape s = n->shape;
        if (s.size() != out.size() || n->value.size() / s.back() != outer)
            throw std::invalid_argument("concat_last: shape mismatch");
    }
    out.back() = total;
    std::vector<double> value(outer * total);
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const auto& n : nodes) {
        const std::size_t w = n->shape.back();
        offsets.push_back(off);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t j = 0; j < w; ++j) value[o * total + off + j] = n->value[o * w + j];
        off += w;
    }
    auto backprop = [nodes, offsets, total, outer](ops::Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!nodes[k]->requires_grad) continue;
            const std::size_t w = nodes[k]->shape.back();
            double* g = nodes[k]->grad_data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < w; ++j)
                    g[o * w + j] += self.grad[o * total + offsets[k] + j];
        }
    };
    return ops::make_op(std::move(out), std::move(value), std::move(nodes), std::move(backprop),
                        "concat");
}

// ---- matmul ----

/// a: [..., m, k]; b: [k, n] or [..., k, n] with identical leading dims.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    auto an = a.node();
    auto bn = b.node();
    if (an->shape.size() < 2 || bn->shape.size() < 2)
        throw std::invalid_argument("matmul: rank < 2");
    const std::size_t ra = an->shape.size(), rb = bn->shape.size();
    const std::size_t m = an->shape[ra - 2], k = an->shape[ra - 1];
    const std::size_t kb = bn->shape[rb - 2], n = bn->shape[rb - 1];
    if (k != kb)
        throw std::invalid_argument("matmul: inner dimension mismatch " + shape_str(an->shape) +
                                    " x " + shape_str(bn->shape));
    const bool b_batched = rb > 2;
    if (b_batched && !std::equal(an->shape.begin(), an->shape.end() - 2, bn->shape.begin(),
                                 bn->shape.end() - 2))
        throw std::invalid_argument("matmul: batch dims mismatch");
    Shape out(an->shape.begin(), an->shape.end() - 2);
    out.push_back(m);
    out.push_back(n);
    const std::size_t batch = an->value.size() / (m * k);

    std::vector<double> value(batch * m * n, 0.0);
    const double* A = an->value.data();
    const double* B = bn->value.data();
    for (std::size_t t = 0; t < batch; ++t) {
        const double* At = A + t * m * k;
        const double* Bt = B + (b_batched ? t * k * n : 0);
        double* Ct = value.data() + t * m * n;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const double av = At[i * k + p];
                if (av == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) Ct[i * n + j] += av * Bt[p * n + j];
            }
    }

    auto backprop = [an, bn, m, k, n, batch, b_batched](ops::Node& self) {
        const double* G = self.grad.data();
        if (an->requires_grad) {
            double* gA = an->grad_data();
            const double* B = bn->value.data();
            for (std::size_t t = 0; t < batch; ++t) {
                const double* Gt = G + t * m * n;
                const double* Bt = B + (b_batched ? t * k * n : 0);
                double* gAt = gA + t * m * k;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gv = Gt[i * n + j];
                        if (gv == 0.0) continue;
                        for (std::size_t p = 0; p < k; ++p) gAt[i * k + p] += gv * Bt[p * n + j];
                    }
            }
        }
        if (bn->requires_grad) {
            double* gB = bn->grad_data();
            const double* A = an->value.data();
            for (std::size_t t = 0; t < batch; ++t) {
                const double* Gt = G + t * m * n;
                const double* At = A + t * m * k;
                double* gBt = gB + (b_batched ? t * k * n : 0);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = At[i * k + p];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) gBt[p * n + j] += av * Gt[i * n + j];
                    }
            }
        }
    };
    return ops::make_op(std::move(out), std::move(value), {an, bn}, std::move(backprop), "matmul");
}

// ---- reductions ----

enum class Reduce { sum, mean, var };

/// Reduce over the last axis, removing it. Variance uses the population
/// denominator N.
inline Tensor reduce_last(const Tensor& a, Reduce kind) {
    auto an = a.node();
    if (an->shape.empty()) throw std::invalid_argument("reduce: rank 0");
    const std::size_t last = an->shape.back();
    if (last == 0) throw std::invalid_argument("reduce: empty axis");
    Shape out(an->shape.begin(), an->shape.end() - 1);
    if (out.empty()) out = {1};
    const std::size_t outer = an->value.size() / last;
    std::vector<double> value(outer);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* x = an->value.data() + o * last;
        double s = 0.0;
        for (std::size_t j = 0; j < last; ++j) s += x[j];
        if (kind == Reduce::sum) {
            value[o] = s;
        } else if (kind == Reduce::mean) {
            value[o] = s / static_cast<double>(last);
        } else {
            const double mu = s / static_cast<double>(last);
            double v = 0.0;
            for (std::size_t j = 0; j < last; ++j) v += (x[j] - mu) * (x[j] - mu);
            value[o] = v / static_cast<double>(last);
        }
    }
    auto backprop = [an, kind, last, outer](ops::Node& self) {
        double* g = an->grad_data();
        const double nn = static_cast<double>(last);
        for (std::size_t o = 0; o < outer; ++o) {
            const double go = self.grad[o];
            const double* x = an->value.data() + o * last;
            if (kind == Reduce::sum) {
                for (std::size_t j = 0; j < last; ++j) g[o * last + j] += go;
            } else if (kind == Reduce::mean) {
                for (std::size_t j = 0; j < last; ++j) g[o * last + j] += go / nn;
            } else {
                double mu = 0.0;
                for (std::size_t j = 0; j < last; ++j) mu += x[j];
                mu /= nn;
                for (std::size_t j = 0; j < last; ++j)
                    g[o * last + j] += go * 2.0 * (x[j] - mu) / nn;
            }
        }
    };
    return ops::make_op(std::move(out), std::move(value), {an}, std::move(backprop), "reduce");
}

/// Reduce over a single axis. Supports the last two axes of arbitrary-rank
/// tensors, which covers every shape this project uses.
inline Tensor reduce(const Tensor& a, Reduce kind, std::size_t axis) {
    const std::size_t r = a.rank();
    if (axis >= r) throw std::invalid_argument("reduce: axis out of range");
    if (axis == r - 1) return reduce_last(a, kind);
    if (axis == r - 2) return reduce_last(transpose_12(a), kind);
    throw std::invalid_argument("reduce: only the last two axes are supported");
}

inline Tensor reduce_all(const Tensor& a, Reduce kind) {
    return reduce_last(reshape(a, {a.size()}), kind);
}

// ---- softmax / layernorm ----

inline Tensor softmax_last(const Tensor& a) {
    auto an = a.node();
    const std::size_t last = an->shape.back();
    const std::size_t outer = an->value.size() / last;
    std::vector<double> value(an->value.size());
    for (std::size_t o = 0; o < outer; ++o) {
        const double* x = an->value.data() + o * last;
        double mx = x[0];
        for (std::size_t j = 1; j < last; ++j) mx = std::max(mx, x[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < last; ++j) s += (value[o * last + j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < last; ++j) value[o * last + j] /= s;
    }
    auto value_copy = value;  // saved activations for the backward pass
    auto backprop = [an, last, outer, y = std::move(value_copy)](ops::Node& self) {
        double* g = an->grad_data();
        for (std::size_t o = 0; o < outer; ++o) {
            double dot = 0.0;
            for (std::size_t j = 0; j < last; ++j) dot += self.grad[o * last + j] * y[o * last + j];
            for (std::size_t j = 0; j < last; ++j)
                g[o * last + j] += (self.grad[o * last + j] - dot) * y[o * last + j];
        }
    };
    return ops::make_op(an->shape, std::move(value), {an}, std::move(backprop), "softmax");
}

/// LayerNorm over the last axis: zero mean / unit variance, then affine.
/// gain/bias have the extent of the last axis.
inline Tensor layernorm(const Tensor& a, const Tensor& gain, const Tensor& bias,
                        double eps = 1e-5) {
    auto an = a.node();
    auto gn = gain.node();
    auto bn = bias.node();
    const std::size_t last = an->shape.back();
    if (gn->value.size() != last || bn->value.size() != last)
        throw std::invalid_argument("layernorm: gain/bias extent mismatch");
    if (eps <= 0.0) throw std::invalid_argument("layernorm: eps must be positive");
    const std::size_t outer = an->value.size() / last;
    std::vector<double> value(an->value.size());
    std::vector<double> xhat(an->value.size());
    std::vector<double> inv_sigma(outer);
    for (std::size_t o = 0; o < outer; ++o) {
        const double* x = an->value.data() + o * last;
        double mu = 0.0;
        for (std::size_t j = 0; j < last; ++j) mu += x[j];
        mu /= static_cast<double>(last);
        double var = 0.0;
        for (std::size_t j = 0; j < last; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(last);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[o] = is;
        for (std::size_t j = 0; j < last; ++j) {
            xhat[o * last + j] = (x[j] - mu) * is;
            value[o * last + j] = xhat[o * last + j] * gn->value[j] + bn->value[j];
        }
    }
    auto backprop = [an, gn, bn, last, outer, xhat = std::move(xhat),
                     inv_sigma = std::move(inv_sigma)](ops::Node& self) {
        const double nn = static_cast<double>(last);
        if (an->requires_grad) {
            double* g = an->grad_data();
            for (std::size_t o = 0; o < outer; ++o) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < last; ++j) {
                    const double dxh = self.grad[o * last + j] * gn->value[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat[o * last + j];
                }
                mean_dxhat /= nn;
                mean_dxhat_xhat /= nn;
                for (std::size_t j = 0; j < last; ++j) {
                    const double dxh = self.grad[o * last + j] * gn->value[j];
                    g[o * last + j] +=
                        inv_sigma[o] * (dxh - mean_dxhat - xhat[o * last + j] * mean_dxhat_xhat);
                }
            }
        }
        if (gn->requires_grad) {
            double* g = gn->grad_data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < last; ++j)
                    g[j] += self.grad[o * last + j] * xhat[o * last + j];
        }
        if (bn->requires_grad) {
            double* g = bn->grad_data();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t j = 0; j < last; ++j) g[j] += self.grad[o * last + j];
        }
    };
    return ops::make_op(an->shape, std::move(value), {an, gn, bn}, std::move(backprop),
                        "layernorm");
}

// ---- real FFT along the last axis ----
// rfft/irfft are linear maps, so the backward pass is the exact adjoint
// (computed directly from the DFT definition; sizes here are desk-scale).

namespace ops {

inline Tensor rfft_part(const Tensor& a, bool imag_part) {
    auto an = a.node();
    const std::size_t L = an->shape.back();
    if (L == 0) throw std::invalid_argument("rfft: empty axis");
    const std::size_t lf = L / 2 + 1;
    const std::size_t outer = an->value.size() / L;
    Shape out = an->shape;
    out.back() = lf;
    std::vector<double> value(outer * lf);
    for (std::size_t o = 0; o < outer; ++o) {
        std::vector<double> row(an->value.begin() + o * L, an->value.begin() + (o + 1) * L);
        const auto f = geocert::fft::rfft(row);
        for (std::size_t k = 0; k < lf; ++k) value[o * lf + k] = imag_part ? f.im[k] : f.re[k];
    }
    auto backprop = [an, L, lf, outer, imag_part](Node& self) {
        double* g = an->grad_data();
        const double two_pi = 2.0 * std::numbers::pi;
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t idx = 0; idx < L; ++idx) {
                double acc = 0.0;
                for (std::size_t k = 0; k < lf; ++k) {
                    const double ang = two_pi * static_cast<double>(k) * static_cast<double>(idx) /
                                       static_cast<double>(L);
                    acc += self.grad[o * lf + k] * (imag_part ? -std::sin(ang) : std::cos(ang));
                }
                g[o * L + idx] += acc;
            }
    };
    return make_op(std::move(out), std::move(value), {an}, std::move(backprop), "rfft");
}

}  // namespace ops

inline Tensor rfft_re(const Tensor& a) { return ops::rfft_part(a, false); }
inline Tensor rfft_im(const Tensor& a) { return ops::rfft_part(a, true); }

/// Inverse real FFT along the last axis. im[0] (and im[L/2] for even L) are
/// ignored, as conjugate symmetry forces those bins real.
inline Tensor irfft(const Tensor& re, const Tensor& im, std::size_t L) {
    auto rn = re.node();
    auto in = im.node();
    const std::size_t lf = L / 2 + 1;
    if (rn->shape.back() != lf || in->shape.back() != lf || rn->shape != in->shape)
        throw std::invalid_argument("irfft: spectrum shape mismatch");
    const std::size_t outer = rn->value.size() / lf;
    Shape out = rn->shape;
    out.back() = L;
    std::vector<double> value(outer * L);
    for (std::size_t o = 0; o < outer; ++o) {
        geocert::fft::ComplexVector f;
        f.re.assign(rn->value.begin() + o * lf, rn->value.begin() + (o + 1) * lf);
        f.im.assign(in->value.begin() + o * lf, in->value.begin() + (o + 1) * lf);
        const auto row = geocert::fft::irfft(f, L);
        std::copy(row.begin(), row.end(), value.begin() + o * L);
    }
    auto backprop = [rn, in, L, lf, outer](ops::Node& self) {
        const double two_pi = 2.0 * std::numbers::pi;
        const double inv_l = 1.0 / static_cast<double>(L);
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t k = 0; k < lf; ++k) {
                const bool edge = (k == 0) || (L % 2 == 0 && k == L / 2);
                const double w = edge ? 1.0 : 2.0;
                double dre = 0.0, dim = 0.0;
                for (std::size_t idx = 0; idx < L; ++idx) {
                    const double ang = two_pi * static_cast<double>(k) * static_cast<double>(idx) /
                                       static_cast<double>(L);
                    dre += self.grad[o * L + idx] * std::cos(ang);
                    dim -= self.grad[o * L + idx] * std::sin(ang);
                }
                if (rn->requires_grad) rn->grad_data()[o * lf + k] += inv_l * w * dre;
                if (in->requires_grad && !edge) in->grad_data()[o * lf + k] += inv_l * w * dim;
            }
    };
    return ops::make_op(std::move(out), std::move(value), {rn, in}, std::move(backprop), "irfft");
}

// ---- op-kind dispatch (string-keyed front door for the CLI gradcheck) ----

inline Tensor elementwise(const std::string& kind, const Tensor& a,
                          const Tensor* b = nullptr, double lo = 0.0, double hi = 0.0) {
    if (kind == "add") return add(a, *b);
    if (kind == "sub") return sub(a, *b);
    if (kind == "mul") return mul(a, *b);
    if (kind == "div") return div(a, *b);
    if (kind == "relu") return relu(a);
    if (kind == "silu") return silu(a);
    if (kind == "elu") return elu(a);
    if (kind == "tanh") return tanh(a);
    if (kind == "sigmoid") return sigmoid(a);
    if (kind == "exp") return exp(a);
    if (kind == "cos") return cos(a);
    if (kind == "neg") return neg(a);
    if (kind == "clamp") return clamp(a, lo, hi);
    throw std::invalid_argument("unknown elementwise op: " + kind);
}

}  // namespace geocert
