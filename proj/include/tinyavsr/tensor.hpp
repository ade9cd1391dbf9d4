#pragma once

// Dense tensors with reverse-mode automatic differentiation on a dynamic
// tape. Scalar type is a template parameter: float for training throughput,
// double for gradient checks and oracles. Only the shapes a small
// decoder-only transformer needs are supported (mostly 1-D / 2-D, no general
// broadcasting).

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "tinyavsr/common.hpp"

namespace avsr {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape");
        n *= d;
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

namespace detail {
inline thread_local bool grad_mode_enabled = true;
}

inline bool grad_enabled() { return detail::grad_mode_enabled; }

// RAII guard that disables tape recording (inference, data plumbing).
struct NoGradGuard {
    NoGradGuard() : prev_(detail::grad_mode_enabled) { detail::grad_mode_enabled = false; }
    ~NoGradGuard() { detail::grad_mode_enabled = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <typename T>
class TensorT {
public:
    using Scalar = T;
    struct Node;
    using GradMap = std::unordered_map<Node*, std::vector<T>>;

    struct Node {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;  // persistent; non-empty only after backward() on requires_grad
        bool requires_grad = false;
        bool on_path = false;  // produced by a recorded op that reaches a trainable leaf
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(const std::vector<T>& gout, GradMap& grads)> backward_fn;
    };

    TensorT() : node_(std::make_shared<Node>()) {}

    static TensorT zeros(const Shape& shape, bool requires_grad = false) {
        TensorT t;
        t.node_->shape = shape;
        t.node_->data.assign(static_cast<size_t>(shape_numel(shape)), T(0));
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static TensorT full(const Shape& shape, T value, bool requires_grad = false) {
        TensorT t = zeros(shape, requires_grad);
        std::fill(t.node_->data.begin(), t.node_->data.end(), value);
        return t;
    }

    static TensorT from_vector(const Shape& shape, std::vector<T> values,
                               bool requires_grad = false) {
        if (static_cast<int64_t>(values.size()) != shape_numel(shape)) {
            throw ShapeError("from_vector: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape));
        }
        TensorT t;
        t.node_->shape = shape;
        t.node_->data = std::move(values);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    static TensorT scalar(T value, bool requires_grad = false) {
        return from_vector({1}, {value}, requires_grad);
    }

    static TensorT randn(const Shape& shape, Rng& rng, T stddev = T(1),
                         bool requires_grad = false) {
        TensorT t = zeros(shape, requires_grad);
        for (auto& v : t.node_->data) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    const Shape& shape() const { return node_->shape; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }
    int dim(int i) const { return node_->shape.at(static_cast<size_t>(i)); }

    int rows() const {
        require_2d("rows");
        return node_->shape[0];
    }
    int cols() const {
        require_2d("cols");
        return node_->shape[1];
    }

    const std::vector<T>& data() const { return node_->data; }
    std::vector<T>& mutable_data() { return node_->data; }

    T item() const {
        if (numel() != 1) throw ContractError("item: tensor is not scalar");
        return node_->data[0];
    }

    T at(int i, int j) const {
        require_2d("at");
        return node_->data[static_cast<size_t>(i) * node_->shape[1] + j];
    }
    T& at(int i, int j) {
        require_2d("at");
        return node_->data[static_cast<size_t>(i) * node_->shape[1] + j];
    }

    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool value) {
        if (!node_->parents.empty()) {
            throw ContractError("set_requires_grad: only leaf tensors may change flag");
        }
        node_->requires_grad = value;
        if (!value) node_->grad.clear();
    }

    bool has_grad() const { return !node_->grad.empty(); }

    const std::vector<T>& grad() const {
        if (node_->grad.empty()) throw StateError("grad: no gradient present");
        return node_->grad;
    }

    void zero_grad() { node_->grad.clear(); }

    bool is_leaf() const { return node_->parents.empty(); }
    bool on_path() const { return node_->on_path; }

    // Reverse-mode sweep from a scalar. Gradients of requires_grad tensors
    // accumulate across calls; intermediates keep nothing.
    void backward() const {
        if (numel() != 1) {
            throw ContractError("backward: loss must be scalar, got " + shape_str(shape()));
        }
        std::vector<Node*> topo = topo_order(node_.get());
        GradMap grads;
        grads[node_.get()] = {T(1)};
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            Node* n = *it;
            auto found = grads.find(n);
            if (found == grads.end()) continue;
            if (n->backward_fn) n->backward_fn(found->second, grads);
            if (n->requires_grad) {
                if (n->grad.empty()) n->grad.assign(n->data.size(), T(0));
                const auto& g = found->second;
                for (size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
            }
            grads.erase(found);
        }
    }

    // Detached copy of the values (no tape).
    TensorT detached() const {
        TensorT t;
        t.node_->shape = node_->shape;
        t.node_->data = node_->data;
        return t;
    }

    template <typename U>
    TensorT<U> astype() const {
        std::vector<U> out(node_->data.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(node_->data[i]);
        return TensorT<U>::from_vector(node_->shape, std::move(out));
    }

    std::shared_ptr<Node> node() const { return node_; }

    // --- op plumbing -------------------------------------------------------

    static bool contributes(const TensorT& t) {
        return t.node_->requires_grad || t.node_->on_path;
    }

    // Creates the result tensor of an op and, when recording applies, wires
    // parents + backward_fn.
    template <typename BackwardFn>
    static TensorT make_result(Shape shape, std::vector<T> data,
                               std::vector<TensorT> parents, BackwardFn&& fn) {
        TensorT out = from_vector(std::move(shape), std::move(data));
        if (!grad_enabled()) return out;
        bool record = false;
        for (const auto& p : parents) record = record || contributes(p);
        if (!record) return out;
        out.node_->on_path = true;
        out.node_->parents.reserve(parents.size());
        for (auto& p : parents) out.node_->parents.push_back(p.node_);
        out.node_->backward_fn = std::forward<BackwardFn>(fn);
        return out;
    }

    static std::vector<T>& grad_buf(GradMap& grads, const std::shared_ptr<Node>& n) {
        auto& buf = grads[n.get()];
        if (buf.empty()) buf.assign(n->data.size(), T(0));
        return buf;
    }

    static bool wants(const std::shared_ptr<Node>& n) {
        return n->requires_grad || n->on_path;
    }

private:
    void require_2d(const char* what) const {
        if (node_->shape.size() != 2) {
            throw ShapeError(std::string(what) + ": expected 2-D tensor, got " +
                             shape_str(node_->shape));
        }
    }

    static std::vector<Node*> topo_order(Node* root) {
        std::vector<Node*> order;
        std::unordered_set<Node*> visited;
        // iterative DFS; graphs from long decodes can be deep
        std::vector<std::pair<Node*, size_t>> stack;
        stack.emplace_back(root, 0);
        visited.insert(root);
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                Node* p = n->parents[idx++].get();
                if (!visited.count(p)) {
                    visited.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        return order;
    }

    std::shared_ptr<Node> node_;
};

using Tensor32 = TensorT<float>;
using Tensor64 = TensorT<double>;

namespace detail {

template <typename T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;

template <typename T>
inline void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

}  // namespace detail

// --- elementwise ops --------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_result(
        a.shape(), std::move(out), {a, b},
        [an, bn](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (TensorT<T>::wants(an)) {
                auto& ga = TensorT<T>::grad_buf(grads, an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_result(
        a.shape(), std::move(out), {a, b},
        [an, bn](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (TensorT<T>::wants(an)) {
                auto& ga = TensorT<T>::grad_buf(grads, an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_result(
        a.shape(), std::move(out), {a, b},
        [an, bn](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (TensorT<T>::wants(an)) {
                auto& ga = TensorT<T>::grad_buf(grads, an);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[i];
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->data[i];
            }
        });
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    std::vector<T> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    auto an = a.node();
    return TensorT<T>::make_result(
        a.shape(), std::move(out), {a},
        [an, c](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(an)) return;
            auto& ga = TensorT<T>::grad_buf(grads, an);
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
        });
}

// x[T x d] + row vector b[d]
template <typename T>
TensorT<T> add_rowvec(const TensorT<T>& x, const TensorT<T>& b) {
    if (x.ndim() != 2 || b.ndim() != 1 || x.cols() != b.dim(0)) {
        throw ShapeError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(b.shape()));
    }
    const int n = x.rows(), d = x.cols();
    std::vector<T> out(x.data().size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<size_t>(i) * d + j] = x.at(i, j) + b.data()[j];
    auto xn = x.node(), bn = b.node();
    return TensorT<T>::make_result(
        x.shape(), std::move(out), {x, b},
        [xn, bn, n, d](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (TensorT<T>::wants(xn)) {
                auto& gx = TensorT<T>::grad_buf(grads, xn);
                for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j) gb[j] += g[static_cast<size_t>(i) * d + j];
            }
        });
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    std::vector<T> out(x.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
    auto xn = x.node();
    return TensorT<T>::make_result(
        x.shape(), std::move(out), {x},
        [xn](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (size_t i = 0; i < g.size(); ++i)
                if (xn->data[i] > T(0)) gx[i] += g[i];
        });
}

// --- matrix products --------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<T> out(static_cast<size_t>(m) * n);
    {
        detail::ConstMatMap<T> A(a.data().data(), m, k), B(b.data().data(), k, n);
        detail::MatMap<T> C(out.data(), m, n);
        C.noalias() = A * B;
    }
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_result(
        {m, n}, std::move(out), {a, b},
        [an, bn, m, k, n](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            detail::ConstMatMap<T> G(g.data(), m, n);
            detail::ConstMatMap<T> A(an->data.data(), m, k), B(bn->data.data(), k, n);
            if (TensorT<T>::wants(an)) {
                auto& ga = TensorT<T>::grad_buf(grads, an);
                detail::MatMap<T>(ga.data(), m, k).noalias() += G * B.transpose();
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                detail::MatMap<T>(gb.data(), k, n).noalias() += A.transpose() * G;
            }
        });
}

// a[m x k] * b[n x k]^T -> [m x n]
template <typename T>
TensorT<T> matmul_nt(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()) + "^T");
    }
    const int m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<T> out(static_cast<size_t>(m) * n);
    {
        detail::ConstMatMap<T> A(a.data().data(), m, k), B(b.data().data(), n, k);
        detail::MatMap<T> C(out.data(), m, n);
        C.noalias() = A * B.transpose();
    }
    auto an = a.node(), bn = b.node();
    return TensorT<T>::make_result(
        {m, n}, std::move(out), {a, b},
        [an, bn, m, k, n](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            detail::ConstMatMap<T> G(g.data(), m, n);
            detail::ConstMatMap<T> A(an->data.data(), m, k), B(bn->data.data(), n, k);
            if (TensorT<T>::wants(an)) {
                auto& ga = TensorT<T>::grad_buf(grads, an);
                detail::MatMap<T>(ga.data(), m, k).noalias() += G * B;
            }
            if (TensorT<T>::wants(bn)) {
                auto& gb = TensorT<T>::grad_buf(grads, bn);
                detail::MatMap<T>(gb.data(), n, k).noalias() += G.transpose() * A;
            }
        });
}

// --- slicing / concatenation -------------------------------------------------

template <typename T>
TensorT<T> slice_rows(const TensorT<T>& x, int start, int len) {
    if (x.ndim() != 2) throw ShapeError("slice_rows: expected 2-D tensor");
    if (start < 0 || len < 0 || start + len > x.rows()) {
        throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + std::to_string(x.rows()));
    }
    const int d = x.cols();
    std::vector<T> out(static_cast<size_t>(len) * d);
    std::copy_n(x.data().begin() + static_cast<size_t>(start) * d, out.size(), out.begin());
    auto xn = x.node();
    return TensorT<T>::make_result(
        {len, d}, std::move(out), {x},
        [xn, start, d](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>(start) * d + i] += g[i];
        });
}

template <typename T>
TensorT<T> slice_cols(const TensorT<T>& x, int start, int len) {
    if (x.ndim() != 2) throw ShapeError("slice_cols: expected 2-D tensor");
    if (start < 0 || len < 0 || start + len > x.cols()) {
        throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + std::to_string(x.cols()));
    }
    const int n = x.rows(), d = x.cols();
    std::vector<T> out(static_cast<size_t>(n) * len);
    for (int i = 0; i < n; ++i)
        std::copy_n(x.data().begin() + static_cast<size_t>(i) * d + start, len,
                    out.begin() + static_cast<size_t>(i) * len);
    auto xn = x.node();
    return TensorT<T>::make_result(
        {n, len}, std::move(out), {x},
        [xn, start, len, n, d](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < len; ++j)
                    gx[static_cast<size_t>(i) * d + start + j] +=
                        g[static_cast<size_t>(i) * len + j];
        });
}

template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const int d = parts[0].cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.cols() != d) {
            throw ShapeError("concat_rows: width mismatch " + shape_str(p.shape()));
        }
        total += p.rows();
    }
    std::vector<T> out;
    out.reserve(static_cast<size_t>(total) * d);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<std::pair<std::shared_ptr<typename TensorT<T>::Node>, size_t>> offsets;
    size_t off = 0;
    for (const auto& p : parts) {
        offsets.emplace_back(p.node(), off);
        off += p.data().size();
    }
    return TensorT<T>::make_result(
        {total, d}, std::move(out), parts,
        [offsets](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            for (const auto& [node, start] : offsets) {
                if (!TensorT<T>::wants(node)) continue;
                auto& gp = TensorT<T>::grad_buf(grads, node);
                for (size_t i = 0; i < node->data.size(); ++i) gp[i] += g[start + i];
            }
        });
}

template <typename T>
TensorT<T> concat_cols(const std::vector<TensorT<T>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const int n = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.ndim() != 2 || p.rows() != n) {
            throw ShapeError("concat_cols: height mismatch " + shape_str(p.shape()));
        }
        total += p.cols();
    }
    std::vector<T> out(static_cast<size_t>(n) * total);
    int col = 0;
    for (const auto& p : parts) {
        const int d = p.cols();
        for (int i = 0; i < n; ++i)
            std::copy_n(p.data().begin() + static_cast<size_t>(i) * d, d,
                        out.begin() + static_cast<size_t>(i) * total + col);
        col += d;
    }
    std::vector<std::tuple<std::shared_ptr<typename TensorT<T>::Node>, int, int>> layout;
    col = 0;
    for (const auto& p : parts) {
        layout.emplace_back(p.node(), col, p.cols());
        col += p.cols();
    }
    return TensorT<T>::make_result(
        {n, total}, std::move(out), parts,
        [layout, n, total](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            for (const auto& [node, start, d] : layout) {
                if (!TensorT<T>::wants(node)) continue;
                auto& gp = TensorT<T>::grad_buf(grads, node);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        gp[static_cast<size_t>(i) * d + j] +=
                            g[static_cast<size_t>(i) * total + start + j];
            }
        });
}

// --- reductions ---------------------------------------------------------------

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
    T acc = std::accumulate(x.data().begin(), x.data().end(), T(0));
    auto xn = x.node();
    return TensorT<T>::make_result(
        {1}, {acc}, {x},
        [xn](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (auto& v : gx) v += g[0];
        });
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
    if (x.numel() == 0) throw DegenerateInputError("mean_all: empty tensor");
    return scale(sum_all(x), T(1) / static_cast<T>(x.numel()));
}

// --- softmax family -------------------------------------------------------------

// Row-wise softmax of logits / tau. Works on [N x V].
template <typename T>
TensorT<T> softmax_with_temperature(const TensorT<T>& logits, T tau) {
    if (tau <= T(0)) throw ParamError("softmax_with_temperature: tau must be > 0");
    if (logits.ndim() != 2) throw ShapeError("softmax_with_temperature: expected 2-D logits");
    const int n = logits.rows(), v = logits.cols();
    std::vector<T> out(logits.data().size());
    for (int i = 0; i < n; ++i) {
        const T* row = logits.data().data() + static_cast<size_t>(i) * v;
        T* orow = out.data() + static_cast<size_t>(i) * v;
        T mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int j = 0; j < v; ++j) {
            orow[j] = std::exp((row[j] - mx) / tau);
            denom += orow[j];
        }
        for (int j = 0; j < v; ++j) orow[j] /= denom;
    }
    auto xn = logits.node();
    auto probs = std::make_shared<std::vector<T>>(out);
    return TensorT<T>::make_result(
        logits.shape(), std::move(out), {logits},
        [xn, probs, n, v, tau](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (int i = 0; i < n; ++i) {
                const T* p = probs->data() + static_cast<size_t>(i) * v;
                const T* go = g.data() + static_cast<size_t>(i) * v;
                T dot = T(0);
                for (int j = 0; j < v; ++j) dot += go[j] * p[j];
                for (int j = 0; j < v; ++j)
                    gx[static_cast<size_t>(i) * v + j] += p[j] * (go[j] - dot) / tau;
            }
        });
}

// Causal softmax over attention scores. Row i corresponds to query at absolute
// position first_query_pos + i over keys 0..S-1; key j is visible iff
// j <= first_query_pos + i. Masked entries are exactly zero.
template <typename T>
TensorT<T> causal_softmax(const TensorT<T>& scores, int first_query_pos) {
    if (scores.ndim() != 2) throw ShapeError("causal_softmax: expected 2-D scores");
    const int n = scores.rows(), s = scores.cols();
    if (first_query_pos < 0) throw ParamError("causal_softmax: negative query position");
    std::vector<T> out(scores.data().size(), T(0));
    for (int i = 0; i < n; ++i) {
        const int limit = std::min(s - 1, first_query_pos + i);
        if (limit < 0) throw ShapeError("causal_softmax: row with no visible keys");
        const T* row = scores.data().data() + static_cast<size_t>(i) * s;
        T* orow = out.data() + static_cast<size_t>(i) * s;
        T mx = row[0];
        for (int j = 1; j <= limit; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int j = 0; j <= limit; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (int j = 0; j <= limit; ++j) orow[j] /= denom;
    }
    auto xn = scores.node();
    auto probs = std::make_shared<std::vector<T>>(out);
    return TensorT<T>::make_result(
        scores.shape(), std::move(out), {scores},
        [xn, probs, n, s, first_query_pos](const std::vector<T>& g,
                                           typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            for (int i = 0; i < n; ++i) {
                const int limit = std::min(s - 1, first_query_pos + i);
                const T* p = probs->data() + static_cast<size_t>(i) * s;
                const T* go = g.data() + static_cast<size_t>(i) * s;
                T dot = T(0);
                for (int j = 0; j <= limit; ++j) dot += go[j] * p[j];
                for (int j = 0; j <= limit; ++j)
                    gx[static_cast<size_t>(i) * s + j] += p[j] * (go[j] - dot);
            }
        });
}

// --- normalization ----------------------------------------------------------------

// Scale-only (RMS) normalization per row: y = gain * x / sqrt(mean(x^2) + eps).
template <typename T>
TensorT<T> rms_norm(const TensorT<T>& x, const TensorT<T>& gain, T eps = T(1e-6)) {
    if (x.ndim() != 2 || gain.ndim() != 1 || gain.dim(0) != x.cols()) {
        throw ShapeError("rms_norm: " + shape_str(x.shape()) + " with gain " +
                         shape_str(gain.shape()));
    }
    const int n = x.rows(), d = x.cols();
    std::vector<T> out(x.data().size());
    std::vector<T> inv_rms(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const T* row = x.data().data() + static_cast<size_t>(i) * d;
        T ms = T(0);
        for (int j = 0; j < d; ++j) ms += row[j] * row[j];
        ms = ms / static_cast<T>(d) + eps;
        const T inv = T(1) / std::sqrt(ms);
        inv_rms[static_cast<size_t>(i)] = inv;
        for (int j = 0; j < d; ++j)
            out[static_cast<size_t>(i) * d + j] = gain.data()[j] * row[j] * inv;
    }
    auto xn = x.node(), gn = gain.node();
    auto inv_keep = std::make_shared<std::vector<T>>(std::move(inv_rms));
    return TensorT<T>::make_result(
        x.shape(), std::move(out), {x, gain},
        [xn, gn, inv_keep, n, d](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            const bool wx = TensorT<T>::wants(xn), wg = TensorT<T>::wants(gn);
            if (!wx && !wg) return;
            for (int i = 0; i < n; ++i) {
                const T inv = (*inv_keep)[static_cast<size_t>(i)];
                const T* row = xn->data.data() + static_cast<size_t>(i) * d;
                const T* go = g.data() + static_cast<size_t>(i) * d;
                if (wg) {
                    auto& gg = TensorT<T>::grad_buf(grads, gn);
                    for (int j = 0; j < d; ++j) gg[j] += go[j] * row[j] * inv;
                }
                if (wx) {
                    auto& gx = TensorT<T>::grad_buf(grads, xn);
                    T dot = T(0);
                    for (int j = 0; j < d; ++j) dot += go[j] * gn->data[j] * row[j];
                    const T c = dot * inv * inv * inv / static_cast<T>(d);
                    for (int j = 0; j < d; ++j)
                        gx[static_cast<size_t>(i) * d + j] +=
                            gn->data[j] * go[j] * inv - row[j] * c;
                }
            }
        });
}

// --- rotary position encoding ---------------------------------------------------

// Rotates consecutive pairs of columns by position-dependent angles. Row i is
// treated as absolute position pos_offset + i. Column pairs (2p, 2p+1) rotate
// by theta = pos * base^(-2p/d).
template <typename T>
TensorT<T> rope(const TensorT<T>& x, int pos_offset, double base = 10000.0) {
    if (x.ndim() != 2) throw ShapeError("rope: expected 2-D tensor");
    if (x.cols() % 2 != 0) throw ShapeError("rope: width must be even");
    if (pos_offset < 0) throw ParamError("rope: negative position offset");
    const int n = x.rows(), d = x.cols(), half = d / 2;
    std::vector<T> out(x.data().size());
    std::vector<T> trig(static_cast<size_t>(n) * d);  // cos/sin per (row, pair)
    for (int i = 0; i < n; ++i) {
        const double pos = static_cast<double>(pos_offset + i);
        for (int p = 0; p < half; ++p) {
            const double freq = std::pow(base, -2.0 * p / d);
            const double th = pos * freq;
            const T c = static_cast<T>(std::cos(th)), s = static_cast<T>(std::sin(th));
            trig[(static_cast<size_t>(i) * half + p) * 2] = c;
            trig[(static_cast<size_t>(i) * half + p) * 2 + 1] = s;
            const T x0 = x.data()[static_cast<size_t>(i) * d + 2 * p];
            const T x1 = x.data()[static_cast<size_t>(i) * d + 2 * p + 1];
            out[static_cast<size_t>(i) * d + 2 * p] = x0 * c - x1 * s;
            out[static_cast<size_t>(i) * d + 2 * p + 1] = x0 * s + x1 * c;
        }
    }
    auto xn = x.node();
    auto trig_keep = std::make_shared<std::vector<T>>(std::move(trig));
    return TensorT<T>::make_result(
        x.shape(), std::move(out), {x},
        [xn, trig_keep, n, d, half](const std::vector<T>& g,
                                    typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            // backward of a rotation is the inverse rotation
            for (int i = 0; i < n; ++i) {
                for (int p = 0; p < half; ++p) {
                    const T c = (*trig_keep)[(static_cast<size_t>(i) * half + p) * 2];
                    const T s = (*trig_keep)[(static_cast<size_t>(i) * half + p) * 2 + 1];
                    const T g0 = g[static_cast<size_t>(i) * d + 2 * p];
                    const T g1 = g[static_cast<size_t>(i) * d + 2 * p + 1];
                    gx[static_cast<size_t>(i) * d + 2 * p] += g0 * c + g1 * s;
                    gx[static_cast<size_t>(i) * d + 2 * p + 1] += -g0 * s + g1 * c;
                }
            }
        });
}

// --- embedding lookup ------------------------------------------------------------

template <typename T>
TensorT<T> embedding(const TensorT<T>& table, const std::vector<int>& ids) {
    if (table.ndim() != 2) throw ShapeError("embedding: table must be 2-D");
    const int v = table.rows(), d = table.cols();
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw ParamError("embedding: id " + std::to_string(id) + " outside [0, " +
                             std::to_string(v) + ")");
        }
    }
    const int n = static_cast<int>(ids.size());
    std::vector<T> out(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i)
        std::copy_n(table.data().begin() + static_cast<size_t>(ids[i]) * d, d,
                    out.begin() + static_cast<size_t>(i) * d);
    auto tn = table.node();
    auto ids_keep = std::make_shared<std::vector<int>>(ids);
    return TensorT<T>::make_result(
        {n, d}, std::move(out), {table},
        [tn, ids_keep, d](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(tn)) return;
            auto& gt = TensorT<T>::grad_buf(grads, tn);
            for (size_t i = 0; i < ids_keep->size(); ++i) {
                const size_t dst = static_cast<size_t>((*ids_keep)[i]) * d;
                for (int j = 0; j < d; ++j) gt[dst + j] += g[i * d + j];
            }
        });
}

// --- masked cross-entropy ----------------------------------------------------------

// Mean over masked positions of -log softmax(logits)[target]. Unmasked
// positions contribute nothing to value or gradient.
template <typename T>
TensorT<T> masked_cross_entropy(const TensorT<T>& logits, const std::vector<int>& targets,
                                const std::vector<bool>& mask) {
    if (logits.ndim() != 2) throw ShapeError("masked_cross_entropy: expected 2-D logits");
    const int n = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != n || static_cast<int>(mask.size()) != n) {
        throw ShapeError("masked_cross_entropy: targets/mask length must equal rows");
    }
    int n_masked = 0;
    for (int i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        ++n_masked;
        if (targets[i] < 0 || targets[i] >= v) {
            throw ParamError("masked_cross_entropy: target " + std::to_string(targets[i]) +
                             " outside [0, " + std::to_string(v) + ")");
        }
    }
    if (n_masked == 0) throw DegenerateInputError("masked_cross_entropy: mask is all false");

    // log-sum-exp per masked row
    std::vector<T> probs(static_cast<size_t>(n) * v, T(0));
    T loss = T(0);
    for (int i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        const T* row = logits.data().data() + static_cast<size_t>(i) * v;
        T mx = row[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, row[j]);
        T denom = T(0);
        for (int j = 0; j < v; ++j) denom += std::exp(row[j] - mx);
        const T log_denom = std::log(denom) + mx;
        loss += log_denom - row[targets[i]];
        for (int j = 0; j < v; ++j)
            probs[static_cast<size_t>(i) * v + j] = std::exp(row[j] - log_denom);
    }
    loss /= static_cast<T>(n_masked);

    auto xn = logits.node();
    auto probs_keep = std::make_shared<std::vector<T>>(std::move(probs));
    auto targets_keep = std::make_shared<std::vector<int>>(targets);
    auto mask_keep = std::make_shared<std::vector<bool>>(mask);
    return TensorT<T>::make_result(
        {1}, {loss}, {logits},
        [xn, probs_keep, targets_keep, mask_keep, n, v, n_masked](
            const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(xn)) return;
            auto& gx = TensorT<T>::grad_buf(grads, xn);
            const T c = g[0] / static_cast<T>(n_masked);
            for (int i = 0; i < n; ++i) {
                if (!(*mask_keep)[i]) continue;
                const T* p = probs_keep->data() + static_cast<size_t>(i) * v;
                for (int j = 0; j < v; ++j) gx[static_cast<size_t>(i) * v + j] += c * p[j];
                gx[static_cast<size_t>(i) * v + (*targets_keep)[i]] -= c;
            }
        });
}

// --- frame stacking ------------------------------------------------------------------

// Concatenates groups of K consecutive rows along the feature dimension.
// Output row t = rows tK .. tK+K-1; the final group is right-padded with zero
// frames when T is not divisible by K. Output length = ceil(T/K).
template <typename T>
TensorT<T> stack_compress(const TensorT<T>& features, int k) {
    if (k < 1) throw ParamError("stack_compress: K must be >= 1");
    if (features.ndim() != 2) throw ShapeError("stack_compress: expected 2-D features");
    const int t = features.rows(), d = features.cols();
    if (t < 1) throw ShapeError("stack_compress: empty feature sequence");
    const int t_out = (t + k - 1) / k;
    std::vector<T> out(static_cast<size_t>(t_out) * k * d, T(0));
    for (int i = 0; i < t; ++i) {
        const int group = i / k, slot = i % k;
        std::copy_n(features.data().begin() + static_cast<size_t>(i) * d, d,
                    out.begin() + (static_cast<size_t>(group) * k + slot) * d);
    }
    auto fn = features.node();
    return TensorT<T>::make_result(
        {t_out, k * d}, std::move(out), {features},
        [fn, t, d, k](const std::vector<T>& g, typename TensorT<T>::GradMap& grads) {
            if (!TensorT<T>::wants(fn)) return;
            auto& gf = TensorT<T>::grad_buf(grads, fn);
            for (int i = 0; i < t; ++i) {
                const int group = i / k, slot = i % k;
                const size_t src = (static_cast<size_t>(group) * k + slot) * d;
                for (int j = 0; j < d; ++j) gf[static_cast<size_t>(i) * d + j] += g[src + j];
            }
        });
}

}  // namespace avsr
