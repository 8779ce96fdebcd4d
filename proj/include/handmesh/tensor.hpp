#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "handmesh/error.hpp"

namespace handmesh {

// When enabled every op scans its result for NaN/Inf and throws NumericError.
// On in tests, off in training loops.
inline bool& checked_mode() {
    static bool enabled = false;
    return enabled;
}

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Dense tensor with reverse-mode autodiff. A Tensor is a shared handle to a
// graph node; ops return new nodes holding strong references to their
// operands, so a computation graph stays alive exactly as long as some handle
// into it does. Gradients accumulate additively across fan-out; zero_grad()
// must be called between optimizer steps.
template <typename T>
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;     // allocated iff needs_grad
        bool requires_grad = false; // leaf flag
        bool needs_grad = false;    // requires_grad or any parent needs it
        std::vector<Tensor<T>> parents;
        // Reads this node's values/grad, accumulates into parents' grads.
        std::function<void(const Node&)> backward;
    };

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(0), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        const std::size_t n = shape_numel(shape);
        return from_vector(std::vector<T>(n, value), std::move(shape), requires_grad);
    }

    static Tensor from_vector(std::vector<T> data, Shape shape, bool requires_grad = false) {
        if (data.size() != shape_numel(shape))
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->values = std::move(data);
        t.node_->requires_grad = requires_grad;
        t.node_->needs_grad = requires_grad;
        if (requires_grad) t.node_->grad.assign(t.node_->values.size(), T(0));
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return from_vector({value}, Shape{1}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->values.size(); }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape[i]; }
    bool requires_grad() const { return node_->requires_grad; }
    bool needs_grad() const { return node_ && node_->needs_grad; }

    std::vector<T>& values() { return node_->values; }
    const std::vector<T>& values() const { return node_->values; }
    std::vector<T>& grad() { return node_->grad; }
    const std::vector<T>& grad() const { return node_->grad; }

    T item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->values[0];
    }

    void set_requires_grad(bool flag) {
        node_->requires_grad = flag;
        node_->needs_grad = flag || !node_->parents.empty();
        if (flag && node_->grad.empty()) node_->grad.assign(node_->values.size(), T(0));
    }

    void zero_grad() {
        std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    // Value copy detached from any graph.
    Tensor detach() const { return from_vector(node_->values, node_->shape, false); }

    // Reverse pass from a scalar. Visits every reachable node exactly once in
    // reverse topological order.
    void backward() const {
        if (numel() != 1) throw ContractError("backward() requires a scalar loss, got " + shape_str(shape()));
        std::vector<Node*> order;
        std::unordered_set<Node*> visited;
        // Iterative post-order DFS.
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        visited.insert(node_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node* parent = node->parents[next].node_.get();
                ++next;
                if (parent->needs_grad && !visited.count(parent)) {
                    visited.insert(parent);
                    stack.emplace_back(parent, 0);
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        ensure_grad(*node_);
        node_->grad[0] = T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            if ((*it)->backward) (*it)->backward(**it);
        }
    }

    // --- op plumbing -------------------------------------------------------

    static void ensure_grad(Node& n) {
        if (n.grad.empty()) n.grad.assign(n.values.size(), T(0));
    }

    static Tensor make_op(const char* op_name, Shape shape, std::vector<T> values,
                          std::vector<Tensor<T>> parents,
                          std::function<void(const Node&)> backward) {
        bool needs = false;
        for (const auto& p : parents) needs = needs || p.needs_grad();
        Tensor out = from_vector(std::move(values), std::move(shape), false);
        if (checked_mode()) {
            for (T v : out.node_->values)
                if (!std::isfinite(static_cast<double>(v)))
                    throw NumericError(std::string("non-finite value in output of ") + op_name);
        }
        if (needs) {
            out.node_->needs_grad = true;
            out.node_->grad.assign(out.node_->values.size(), T(0));
            out.node_->parents = std::move(parents);
            out.node_->backward = std::move(backward);
        }
        return out;
    }

    std::shared_ptr<Node> node_;
};

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

// --- elementwise -----------------------------------------------------------

template <typename T>
Tensor<T> add(Tensor<T> a, Tensor<T> b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return Tensor<T>::make_op("add", a.shape(), std::move(out), {a, b},
        [a, b](const typename Tensor<T>::Node& self) mutable {
            if (a.needs_grad()) {
                Tensor<T>::ensure_grad(*a.node_);
                auto& g = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (b.needs_grad()) {
                Tensor<T>::ensure_grad(*b.node_);
                auto& g = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
        });
}

template <typename T>
Tensor<T> sub(Tensor<T> a, Tensor<T> b) {
    check_same_shape(a, b, "sub");
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return Tensor<T>::make_op("sub", a.shape(), std::move(out), {a, b},
        [a, b](const typename Tensor<T>::Node& self) mutable {
            if (a.needs_grad()) {
                Tensor<T>::ensure_grad(*a.node_);
                auto& g = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (b.needs_grad()) {
                Tensor<T>::ensure_grad(*b.node_);
                auto& g = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
            }
        });
}

// Hadamard product.
template <typename T>
Tensor<T> mul(Tensor<T> a, Tensor<T> b) {
    check_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return Tensor<T>::make_op("mul", a.shape(), std::move(out), {a, b},
        [a, b](const typename Tensor<T>::Node& self) mutable {
            if (a.needs_grad()) {
                Tensor<T>::ensure_grad(*a.node_);
                auto& g = a.grad();
                const auto& bv = b.values();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
            }
            if (b.needs_grad()) {
                Tensor<T>::ensure_grad(*b.node_);
                auto& g = b.grad();
                const auto& av = a.values();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
            }
        });
}

template <typename T>
Tensor<T> neg(Tensor<T> a) {
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -av[i];
    return Tensor<T>::make_op("neg", a.shape(), std::move(out), {a},
        [a](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        });
}

// Multiply by a compile-time-known constant (layer scaling).
template <typename T>
Tensor<T> scale(Tensor<T> a, T c) {
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
    return Tensor<T>::make_op("scale", a.shape(), std::move(out), {a},
        [a, c](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * c;
        });
}

// Multiply by a scalar tensor that participates in the graph.
template <typename T>
Tensor<T> scale_by(Tensor<T> a, Tensor<T> s) {
    if (s.numel() != 1) throw ShapeError("scale_by: scale must be a scalar tensor");
    const T sv = s.values()[0];
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * sv;
    return Tensor<T>::make_op("scale_by", a.shape(), std::move(out), {a, s},
        [a, s](const typename Tensor<T>::Node& self) mutable {
            if (a.needs_grad()) {
                Tensor<T>::ensure_grad(*a.node_);
                auto& g = a.grad();
                const T sv = s.values()[0];
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * sv;
            }
            if (s.needs_grad()) {
                Tensor<T>::ensure_grad(*s.node_);
                T acc = 0;
                const auto& av = a.values();
                for (std::size_t i = 0; i < av.size(); ++i) acc += self.grad[i] * av[i];
                s.grad()[0] += acc;
            }
        });
}

template <typename T>
Tensor<T> relu(Tensor<T> a) {
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > T(0) ? av[i] : T(0);
    return Tensor<T>::make_op("relu", a.shape(), std::move(out), {a},
        [a](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            const auto& av = a.values();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (av[i] > T(0)) g[i] += self.grad[i];
        });
}

// Generic differentiable elementwise map; df receives the input value.
template <typename T, typename F, typename DF>
Tensor<T> unary_op(const char* name, Tensor<T> a, F f, DF df) {
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i]);
    return Tensor<T>::make_op(name, a.shape(), std::move(out), {a},
        [a, df](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            const auto& av = a.values();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(av[i]);
        });
}

// --- row/column helpers for [m, n] matrices --------------------------------

// X + broadcast row vector b (bias over rows).
template <typename T>
Tensor<T> add_row_vec(Tensor<T> x, Tensor<T> b) {
    if (x.ndim() != 2 || b.ndim() != 1 || b.dim(0) != x.dim(1))
        throw ShapeError("add_row_vec: need [m,n] and [n], got " + shape_str(x.shape()) +
                         " and " + shape_str(b.shape()));
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<T> out(x.numel());
    const auto& xv = x.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
    return Tensor<T>::make_op("add_row_vec", x.shape(), std::move(out), {x, b},
        [x, b, m, n](const typename Tensor<T>::Node& self) mutable {
            if (x.needs_grad()) {
                Tensor<T>::ensure_grad(*x.node_);
                auto& g = x.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
            if (b.needs_grad()) {
                Tensor<T>::ensure_grad(*b.node_);
                auto& g = b.grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
            }
        });
}

// Scale row i of X by the constant w[i] (w is not a graph participant).
template <typename T>
Tensor<T> scale_rows(Tensor<T> x, std::vector<T> w) {
    if (x.ndim() != 2 || w.size() != x.dim(0))
        throw ShapeError("scale_rows: weight length must equal row count");
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<T> out(x.numel());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * w[i];
    return Tensor<T>::make_op("scale_rows", x.shape(), std::move(out), {x},
        [x, w = std::move(w), m, n](const typename Tensor<T>::Node& self) mutable {
            if (!x.needs_grad()) return;
            Tensor<T>::ensure_grad(*x.node_);
            auto& g = x.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * w[i];
        });
}

// --- shape ops ---------------------------------------------------------------

template <typename T>
Tensor<T> reshape(Tensor<T> a, Shape new_shape) {
    if (shape_numel(new_shape) != a.numel())
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(new_shape));
    return Tensor<T>::make_op("reshape", std::move(new_shape), a.values(), {a},
        [a](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        });
}

template <typename T>
Tensor<T> transpose2d(Tensor<T> a) {
    if (a.ndim() != 2) throw ShapeError("transpose2d: need a 2-d tensor, got " + shape_str(a.shape()));
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
    return Tensor<T>::make_op("transpose2d", Shape{n, m}, std::move(out), {a},
        [a, m, n](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
        });
}

// Contiguous slice [start, start+len) along an axis.
template <typename T>
Tensor<T> slice(Tensor<T> a, std::size_t axis, std::size_t start, std::size_t len) {
    if (axis >= a.ndim()) throw ShapeError("slice: axis out of range");
    if (start + len > a.dim(axis)) throw ShapeError("slice: range exceeds axis extent");
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t ax = s[axis];
    Shape out_shape = s;
    out_shape[axis] = len;
    std::vector<T> out(outer * len * inner);
    const auto& av = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t k = 0; k < len; ++k)
            std::copy_n(&av[(o * ax + start + k) * inner], inner, &out[(o * len + k) * inner]);
    return Tensor<T>::make_op("slice", std::move(out_shape), std::move(out), {a},
        [a, outer, inner, ax, start, len](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t k = 0; k < len; ++k) {
                    const T* src = &self.grad[(o * len + k) * inner];
                    T* dst = &g[(o * ax + start + k) * inner];
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                }
        });
}

template <typename T>
Tensor<T> concat(std::vector<Tensor<T>> parts, std::size_t axis) {
    if (parts.empty()) throw ContractError("concat: no operands");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw ShapeError("concat: axis out of range");
    std::size_t total_axis = 0;
    for (const auto& p : parts) {
        if (p.ndim() != s0.size()) throw ShapeError("concat: rank mismatch");
        for (std::size_t i = 0; i < s0.size(); ++i)
            if (i != axis && p.dim(i) != s0[i]) throw ShapeError("concat: non-axis extent mismatch");
        total_axis += p.dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
    for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
    Shape out_shape = s0;
    out_shape[axis] = total_axis;
    std::vector<T> out(outer * total_axis * inner);
    std::vector<std::size_t> offsets(parts.size());
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        offsets[p] = off;
        const std::size_t ax = parts[p].dim(axis);
        const auto& pv = parts[p].values();
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(&pv[o * ax * inner], ax * inner, &out[(o * total_axis + off) * inner]);
        off += ax;
    }
    return Tensor<T>::make_op("concat", std::move(out_shape), std::move(out), parts,
        [parts, offsets, outer, inner, total_axis](const typename Tensor<T>::Node& self) mutable {
            for (std::size_t p = 0; p < parts.size(); ++p) {
                if (!parts[p].needs_grad()) continue;
                Tensor<T>::ensure_grad(*parts[p].node_);
                auto& g = parts[p].grad();
                const std::size_t axp = g.size() / (outer * inner);
                for (std::size_t o = 0; o < outer; ++o) {
                    const T* src = &self.grad[(o * total_axis + offsets[p]) * inner];
                    T* dst = &g[o * axp * inner];
                    for (std::size_t i = 0; i < axp * inner; ++i) dst[i] += src[i];
                }
            }
        });
}

// --- matmul ------------------------------------------------------------------

namespace detail {
// C[m,n] += A[m,k] * B[k,n]; ikj order so the inner loop vectorizes.
template <typename T>
void gemm_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,n] += A[m,k] * B^T where Bt is [n,k].
template <typename T>
void gemm_bt_acc(const T* a, const T* bt, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const T* brow = bt + j * k;
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k,n] += A^T * B where A is [m,k], B is [m,n].
template <typename T>
void gemm_at_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = a + i * k;
        const T* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            if (av == T(0)) continue;
            T* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}
} // namespace detail

template <typename T>
Tensor<T> matmul(Tensor<T> a, Tensor<T> b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(m * n, T(0));
    detail::gemm_acc(a.values().data(), b.values().data(), out.data(), m, k, n);
    return Tensor<T>::make_op("matmul", Shape{m, n}, std::move(out), {a, b},
        [a, b, m, k, n](const typename Tensor<T>::Node& self) mutable {
            if (a.needs_grad()) { // dA = dC * B^T
                Tensor<T>::ensure_grad(*a.node_);
                detail::gemm_bt_acc(self.grad.data(), b.values().data(), a.grad().data(), m, n, k);
            }
            if (b.needs_grad()) { // dB = A^T * dC
                Tensor<T>::ensure_grad(*b.node_);
                detail::gemm_at_acc(a.values().data(), self.grad.data(), b.grad().data(), m, k, n);
            }
        });
}

// --- softmax -------------------------------------------------------------------

// Numerically stabilized softmax along `axis`; rows sum to 1.
template <typename T>
Tensor<T> softmax(Tensor<T> a, std::size_t axis) {
    if (axis >= a.ndim()) throw ShapeError("softmax: axis out of range");
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t ax = s[axis];
    std::vector<T> out(a.numel());
    const auto& av = a.values();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * ax * inner + in;
            T mx = av[base];
            for (std::size_t j = 1; j < ax; ++j) mx = std::max(mx, av[base + j * inner]);
            T denom = 0;
            for (std::size_t j = 0; j < ax; ++j) {
                const T e = std::exp(av[base + j * inner] - mx);
                out[base + j * inner] = e;
                denom += e;
            }
            for (std::size_t j = 0; j < ax; ++j) out[base + j * inner] /= denom;
        }
    return Tensor<T>::make_op("softmax", a.shape(), std::move(out), {a},
        [a, outer, inner, ax](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * ax * inner + in;
                    T dot = 0;
                    for (std::size_t j = 0; j < ax; ++j)
                        dot += self.grad[base + j * inner] * self.values[base + j * inner];
                    for (std::size_t j = 0; j < ax; ++j) {
                        const std::size_t idx = base + j * inner;
                        g[idx] += self.values[idx] * (self.grad[idx] - dot);
                    }
                }
        });
}

// --- reductions & losses ---------------------------------------------------------

template <typename T>
Tensor<T> sum(Tensor<T> a) {
    T acc = 0;
    for (T v : a.values()) acc += v;
    return Tensor<T>::make_op("sum", Shape{1}, {acc}, {a},
        [a](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0];
        });
}

template <typename T>
Tensor<T> mean(Tensor<T> a) {
    T acc = 0;
    for (T v : a.values()) acc += v;
    const T inv = T(1) / static_cast<T>(a.numel());
    return Tensor<T>::make_op("mean", Shape{1}, {acc * inv}, {a},
        [a, inv](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * inv;
        });
}

// Mean of squared differences.
template <typename T>
Tensor<T> mse_loss(Tensor<T> a, Tensor<T> b) {
    check_same_shape(a, b, "mse_loss");
    const auto& av = a.values();
    const auto& bv = b.values();
    T acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const T d = av[i] - bv[i];
        acc += d * d;
    }
    const T inv = T(1) / static_cast<T>(a.numel());
    return Tensor<T>::make_op("mse_loss", Shape{1}, {acc * inv}, {a, b},
        [a, b, inv](const typename Tensor<T>::Node& self) mutable {
            const auto& av = a.values();
            const auto& bv = b.values();
            const T c = T(2) * inv * self.grad[0];
            if (a.needs_grad()) {
                Tensor<T>::ensure_grad(*a.node_);
                auto& g = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += c * (av[i] - bv[i]);
            }
            if (b.needs_grad()) {
                Tensor<T>::ensure_grad(*b.node_);
                auto& g = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= c * (av[i] - bv[i]);
            }
        });
}

// --- small fixed-size helpers -------------------------------------------------

// Skew-symmetric cross-product matrix of a 3-vector.
template <typename T>
Tensor<T> skew3(Tensor<T> a) {
    if (a.numel() != 3) throw ShapeError("skew3: need a 3-vector");
    const auto& v = a.values();
    std::vector<T> out = {T(0), -v[2], v[1],
                          v[2], T(0), -v[0],
                          -v[1], v[0], T(0)};
    return Tensor<T>::make_op("skew3", Shape{3, 3}, std::move(out), {a},
        [a](const typename Tensor<T>::Node& self) mutable {
            if (!a.needs_grad()) return;
            Tensor<T>::ensure_grad(*a.node_);
            auto& g = a.grad();
            const auto& sg = self.grad;
            g[0] += sg[7] - sg[5];
            g[1] += sg[2] - sg[6];
            g[2] += sg[3] - sg[1];
        });
}

} // namespace handmesh
