#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sdci/errors.hpp"
#include "sdci/rng.hpp"

namespace sdci {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

namespace detail {

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad; // sized iff requires_grad
    bool requires_grad = false;

    void enable_grad() {
        if (!requires_grad) {
            requires_grad = true;
            grad.assign(data.size(), T(0));
        }
    }
};

} // namespace detail

// Dense row-major tensor with a shared value/gradient buffer. Copies are
// shallow; ops below produce fresh tensors and record their backward pass on
// the active tape.
template <typename T>
class Tensor {
public:
    using Impl = detail::TensorImpl<T>;

    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false)
        : impl_(std::make_shared<Impl>()) {
        for (std::size_t d : shape)
            if (d == 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(shape));
        impl_->shape = std::move(shape);
        impl_->data.assign(shape_numel(impl_->shape), T(0));
        if (requires_grad) impl_->enable_grad();
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
        return t;
    }

    static Tensor ones(Shape shape, bool requires_grad = false) {
        return full(std::move(shape), T(1), requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return full({1}, value, requires_grad);
    }

    static Tensor from_vector(Shape shape, const std::vector<T>& values,
                              bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        if (values.size() != t.size())
            throw ShapeError("from_vector: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(t.shape()));
        std::copy(values.begin(), values.end(), t.impl_->data.begin());
        return t;
    }

    static Tensor randn(Shape shape, RngStream& rng, T stddev = T(1),
                        bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        for (auto& v : t.impl_->data) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t ndim() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->data.size(); }

    // view of the last axis as columns, everything before it as rows
    std::size_t cols() const { return impl_->shape.empty() ? 1 : impl_->shape.back(); }
    std::size_t rows() const { return size() / cols(); }

    std::span<T> data() { return impl_->data; }
    std::span<const T> data() const { return impl_->data; }
    std::span<T> grad() {
        if (!impl_->requires_grad) throw ContractError("tensor has no grad buffer");
        return impl_->grad;
    }
    std::span<const T> grad() const {
        if (!impl_->requires_grad) throw ContractError("tensor has no grad buffer");
        return impl_->grad;
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void enable_grad() { impl_->enable_grad(); }
    void zero_grad() {
        if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }

    T item() const {
        if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
        return impl_->data[0];
    }

    T& at(std::initializer_list<std::size_t> idx) {
        return impl_->data[flat_index(idx)];
    }
    T at(std::initializer_list<std::size_t> idx) const {
        return impl_->data[flat_index(idx)];
    }

    std::shared_ptr<Impl> impl() const { return impl_; }

private:
    std::size_t flat_index(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != ndim()) throw ShapeError("index rank mismatch for shape " + shape_str(shape()));
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (std::size_t i : idx) {
            if (i >= impl_->shape[axis]) throw ShapeError("index out of range");
            flat = flat * impl_->shape[axis] + i;
            ++axis;
        }
        return flat;
    }

    std::shared_ptr<Impl> impl_;
};

// Wengert-list tape: closures are appended in execution order and replayed in
// reverse by backward(). One tape per training step; threads use separate
// tapes via the thread_local active pointer.
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    void register_output(std::shared_ptr<detail::TensorImpl<T>> impl) {
        outputs_.push_back(std::move(impl));
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        outputs_.clear();
    }

    // Seeds d(loss)/d(loss) = 1 and replays the tape once in reverse. Grads
    // of intermediate (op-produced) tensors are reset first, so calling again
    // adds the same gradient into the leaves once more.
    void backward(Tensor<T>& loss) {
        if (loss.size() != 1)
            throw ContractError("backward expects a scalar loss, got shape " + shape_str(loss.shape()));
        if (!loss.requires_grad())
            throw ContractError("backward: loss does not require grad (was it recorded on a tape?)");
        for (auto& o : outputs_) std::fill(o->grad.begin(), o->grad.end(), T(0));
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    static Tape*& active() {
        thread_local Tape* current = nullptr;
        return current;
    }

    struct Scope {
        explicit Scope(Tape& t) : prev_(active()) { active() = &t; }
        ~Scope() { active() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<std::shared_ptr<detail::TensorImpl<T>>> outputs_;
};

// ---------------------------------------------------------------------------
// op helpers
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
bool tracing(std::initializer_list<const Tensor<T>*> inputs) {
    if (Tape<T>::active() == nullptr) return false;
    for (const Tensor<T>* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

template <typename T>
void mark_output(Tensor<T>& out, bool traced) {
    if (traced) {
        out.enable_grad();
        Tape<T>::active()->register_output(out.impl());
    }
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

template <typename T>
using EigenMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMat<T>>;

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    bool traced = detail::tracing<T>({&a, &b});
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([a = a.impl(), b = b.impl(), o = out.impl()] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad[i] += o->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    bool traced = detail::tracing<T>({&a, &b});
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([a = a.impl(), b = b.impl(), o = out.impl()] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad[i] -= o->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    bool traced = detail::tracing<T>({&a, &b});
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([a = a.impl(), b = b.impl(), o = out.impl()] {
            if (a->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i] * b->data[i];
            if (b->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) b->grad[i] += o->grad[i] * a->data[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T c) {
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = x.data()[i] * c;
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), c] {
            if (x->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i] * c;
        });
    }
    return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = x.data()[i] + c;
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl()] {
            if (x->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i];
        });
    }
    return out;
}

// multiply every element by a learnable scalar tensor of shape [1]
template <typename T>
Tensor<T> scale_tensor(const Tensor<T>& x, const Tensor<T>& s) {
    if (s.size() != 1) throw ShapeError("scale_tensor: scale must have shape [1], got " + shape_str(s.shape()));
    bool traced = detail::tracing<T>({&x, &s});
    Tensor<T> out(x.shape());
    T sv = s.data()[0];
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = x.data()[i] * sv;
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), s = s.impl(), o = out.impl()] {
            T sv = s->data[0];
            if (x->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i] * sv;
            if (s->requires_grad) {
                T acc = T(0);
                for (std::size_t i = 0; i < o->grad.size(); ++i) acc += o->grad[i] * x->data[i];
                s->grad[0] += acc;
            }
        });
    }
    return out;
}

// x[r, c] + bias[c]
template <typename T>
Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& bias) {
    std::size_t C = x.cols();
    if (bias.size() != C)
        throw ShapeError("add_rowvec: bias " + shape_str(bias.shape()) + " vs columns of " +
                         shape_str(x.shape()));
    bool traced = detail::tracing<T>({&x, &bias});
    Tensor<T> out(x.shape());
    std::size_t R = x.rows();
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c)
            out.data()[r * C + c] = x.data()[r * C + c] + bias.data()[c];
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), b = bias.impl(), o = out.impl(), R, C] {
            if (x->requires_grad)
                for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i];
            if (b->requires_grad)
                for (std::size_t r = 0; r < R; ++r)
                    for (std::size_t c = 0; c < C; ++c) b->grad[c] += o->grad[r * C + c];
        });
    }
    return out;
}

// x[r, c] * col[r]
template <typename T>
Tensor<T> rowwise_scale(const Tensor<T>& x, const Tensor<T>& col) {
    std::size_t R = x.rows(), C = x.cols();
    if (col.size() != R)
        throw ShapeError("rowwise_scale: column " + shape_str(col.shape()) + " vs rows of " +
                         shape_str(x.shape()));
    bool traced = detail::tracing<T>({&x, &col});
    Tensor<T> out(x.shape());
    for (std::size_t r = 0; r < R; ++r) {
        T cv = col.data()[r];
        for (std::size_t c = 0; c < C; ++c) out.data()[r * C + c] = x.data()[r * C + c] * cv;
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), k = col.impl(), o = out.impl(), R, C] {
            if (x->requires_grad)
                for (std::size_t r = 0; r < R; ++r) {
                    T cv = k->data[r];
                    for (std::size_t c = 0; c < C; ++c) x->grad[r * C + c] += o->grad[r * C + c] * cv;
                }
            if (k->requires_grad)
                for (std::size_t r = 0; r < R; ++r) {
                    T acc = T(0);
                    for (std::size_t c = 0; c < C; ++c) acc += o->grad[r * C + c] * x->data[r * C + c];
                    k->grad[r] += acc;
                }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        throw ShapeError("matmul expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    std::size_t m = a.shape()[0], k = a.shape()[1];
    std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ShapeError("matmul: inner extents disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    bool traced = detail::tracing<T>({&a, &b});
    Tensor<T> out({m, n});
    detail::MatMap<T>(out.data().data(), m, n).noalias() =
        detail::ConstMatMap<T>(a.data().data(), m, k) *
        detail::ConstMatMap<T>(b.data().data(), k, n);
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([a = a.impl(), b = b.impl(), o = out.impl(), m, k, n] {
            detail::ConstMatMap<T> G(o->grad.data(), m, n);
            if (a->requires_grad)
                detail::MatMap<T>(a->grad.data(), m, k).noalias() +=
                    G * detail::ConstMatMap<T>(b->data.data(), k, n).transpose();
            if (b->requires_grad)
                detail::MatMap<T>(b->grad.data(), k, n).noalias() +=
                    detail::ConstMatMap<T>(a->data.data(), m, k).transpose() * G;
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// nonlinearities and reductions
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> elu(const Tensor<T>& x) {
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        T v = x.data()[i];
        out.data()[i] = v > T(0) ? v : std::expm1(v);
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl()] {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.size(); ++i) {
                T d = x->data[i] > T(0) ? T(1) : o->data[i] + T(1);
                x->grad[i] += o->grad[i] * d;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> exp_t(const Tensor<T>& x) {
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(x.data()[i]);
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl()] {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i] * o->data[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
    bool traced = detail::tracing<T>({&x});
    T acc = T(0);
    for (std::size_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Tensor<T> out = Tensor<T>::scalar(acc);
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl()] {
            if (!x->requires_grad) return;
            T g = o->grad[0];
            for (std::size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& x) {
    return scale(sum_all(x), T(1) / static_cast<T>(x.size()));
}

// softmax over the last axis, with temperature; max-subtraction for stability
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x, T tau) {
    if (!(tau > T(0))) throw ValueError("softmax temperature must be positive");
    bool traced = detail::tracing<T>({&x});
    std::size_t R = x.rows(), C = x.cols();
    Tensor<T> out(x.shape());
    for (std::size_t r = 0; r < R; ++r) {
        const T* xr = x.data().data() + r * C;
        T* yr = out.data().data() + r * C;
        T m = xr[0] / tau;
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, xr[c] / tau);
        T z = T(0);
        for (std::size_t c = 0; c < C; ++c) {
            yr[c] = std::exp(xr[c] / tau - m);
            z += yr[c];
        }
        for (std::size_t c = 0; c < C; ++c) yr[c] /= z;
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), R, C, tau] {
            if (!x->requires_grad) return;
            for (std::size_t r = 0; r < R; ++r) {
                const T* p = o->data.data() + r * C;
                const T* g = o->grad.data() + r * C;
                T dot = T(0);
                for (std::size_t c = 0; c < C; ++c) dot += g[c] * p[c];
                T* xg = x->grad.data() + r * C;
                for (std::size_t c = 0; c < C; ++c) xg[c] += p[c] * (g[c] - dot) / tau;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x, T tau) {
    if (!(tau > T(0))) throw ValueError("softmax temperature must be positive");
    bool traced = detail::tracing<T>({&x});
    std::size_t R = x.rows(), C = x.cols();
    Tensor<T> out(x.shape());
    for (std::size_t r = 0; r < R; ++r) {
        const T* xr = x.data().data() + r * C;
        T* yr = out.data().data() + r * C;
        T m = xr[0] / tau;
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, xr[c] / tau);
        T z = T(0);
        for (std::size_t c = 0; c < C; ++c) z += std::exp(xr[c] / tau - m);
        T lz = std::log(z);
        for (std::size_t c = 0; c < C; ++c) yr[c] = xr[c] / tau - m - lz;
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), R, C, tau] {
            if (!x->requires_grad) return;
            for (std::size_t r = 0; r < R; ++r) {
                const T* y = o->data.data() + r * C;
                const T* g = o->grad.data() + r * C;
                T gs = T(0);
                for (std::size_t c = 0; c < C; ++c) gs += g[c];
                T* xg = x->grad.data() + r * C;
                for (std::size_t c = 0; c < C; ++c) xg[c] += (g[c] - std::exp(y[c]) * gs) / tau;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape_copy(const Tensor<T>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out(std::move(new_shape));
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl()] {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ValueError("concat_cols: no inputs");
    std::size_t R = parts[0].rows();
    Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
    std::size_t C = 0;
    for (const auto& p : parts) {
        Shape plead(p.shape().begin(), p.shape().end() - 1);
        if (p.rows() != R || plead != lead)
            throw ShapeError("concat_cols: leading dims disagree, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        C += p.cols();
    }
    bool traced = false;
    for (const auto& p : parts) traced = traced || detail::tracing<T>({&p});
    Shape out_shape = lead;
    out_shape.push_back(C);
    Tensor<T> out(out_shape);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::size_t pc = p.cols();
        for (std::size_t r = 0; r < R; ++r)
            std::copy_n(p.data().data() + r * pc, pc, out.data().data() + r * C + off);
        off += pc;
    }
    detail::mark_output(out, traced);
    if (traced) {
        std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        Tape<T>::active()->record([impls, o = out.impl(), R, C] {
            std::size_t off = 0;
            for (auto& pi : impls) {
                std::size_t pc = pi->shape.back();
                if (pi->requires_grad)
                    for (std::size_t r = 0; r < R; ++r)
                        for (std::size_t c = 0; c < pc; ++c)
                            pi->grad[r * pc + c] += o->grad[r * C + off + c];
                off += pc;
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
    return concat_cols(std::vector<Tensor<T>>{a, b});
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ValueError("concat_rows: no inputs");
    Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
    std::size_t r_total = 0;
    for (const auto& p : parts) {
        Shape ptail(p.shape().begin() + 1, p.shape().end());
        if (ptail != tail)
            throw ShapeError("concat_rows: trailing dims disagree, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        r_total += p.shape()[0];
    }
    bool traced = false;
    for (const auto& p : parts) traced = traced || detail::tracing<T>({&p});
    Shape out_shape = {r_total};
    out_shape.insert(out_shape.end(), tail.begin(), tail.end());
    Tensor<T> out(out_shape);
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + off);
        off += p.size();
    }
    detail::mark_output(out, traced);
    if (traced) {
        std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        Tape<T>::active()->record([impls, o = out.impl()] {
            std::size_t off = 0;
            for (auto& pi : impls) {
                if (pi->requires_grad)
                    for (std::size_t i = 0; i < pi->grad.size(); ++i) pi->grad[i] += o->grad[off + i];
                off += pi->data.size();
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1) {
    std::size_t C = x.cols();
    if (c0 >= c1 || c1 > C)
        throw ShapeError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") out of range for " + shape_str(x.shape()));
    bool traced = detail::tracing<T>({&x});
    std::size_t R = x.rows(), W = c1 - c0;
    Shape out_shape(x.shape().begin(), x.shape().end() - 1);
    out_shape.push_back(W);
    Tensor<T> out(out_shape);
    for (std::size_t r = 0; r < R; ++r)
        std::copy_n(x.data().data() + r * C + c0, W, out.data().data() + r * W);
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), R, C, c0, W] {
            if (!x->requires_grad) return;
            for (std::size_t r = 0; r < R; ++r)
                for (std::size_t c = 0; c < W; ++c)
                    x->grad[r * C + c0 + c] += o->grad[r * W + c];
        });
    }
    return out;
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx) {
    std::size_t R = x.rows(), C = x.cols();
    for (std::size_t i : idx)
        if (i >= R) throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " + std::to_string(R));
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out({idx.size(), C});
    for (std::size_t m = 0; m < idx.size(); ++m)
        std::copy_n(x.data().data() + idx[m] * C, C, out.data().data() + m * C);
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), idx, C] {
            if (!x->requires_grad) return;
            for (std::size_t m = 0; m < idx.size(); ++m)
                for (std::size_t c = 0; c < C; ++c)
                    x->grad[idx[m] * C + c] += o->grad[m * C + c];
        });
    }
    return out;
}

// out[idx[m], :] += x[m, :]   (out has out_rows rows)
template <typename T>
Tensor<T> scatter_sum_rows(const Tensor<T>& x, const std::vector<std::size_t>& idx,
                           std::size_t out_rows) {
    std::size_t R = x.rows(), C = x.cols();
    if (idx.size() != R)
        throw ShapeError("scatter_sum_rows: " + std::to_string(idx.size()) + " indices for " +
                         std::to_string(R) + " rows");
    for (std::size_t i : idx)
        if (i >= out_rows) throw ShapeError("scatter_sum_rows: index out of range");
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out({out_rows, C});
    for (std::size_t m = 0; m < R; ++m)
        for (std::size_t c = 0; c < C; ++c) out.data()[idx[m] * C + c] += x.data()[m * C + c];
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), idx, C] {
            if (!x->requires_grad) return;
            for (std::size_t m = 0; m < idx.size(); ++m)
                for (std::size_t c = 0; c < C; ++c)
                    x->grad[m * C + c] += o->grad[idx[m] * C + c];
        });
    }
    return out;
}

// stack L same-shaped tensors into [..., L] along a new trailing axis
template <typename T>
Tensor<T> stack_last(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ValueError("stack_last: no inputs");
    const Shape& s = parts[0].shape();
    for (const auto& p : parts) detail::check_same_shape(parts[0], p, "stack_last");
    bool traced = false;
    for (const auto& p : parts) traced = traced || detail::tracing<T>({&p});
    std::size_t L = parts.size(), M = parts[0].size();
    Shape out_shape = s;
    out_shape.push_back(L);
    Tensor<T> out(out_shape);
    for (std::size_t l = 0; l < L; ++l)
        for (std::size_t i = 0; i < M; ++i) out.data()[i * L + l] = parts[l].data()[i];
    detail::mark_output(out, traced);
    if (traced) {
        std::vector<std::shared_ptr<detail::TensorImpl<T>>> impls;
        for (const auto& p : parts) impls.push_back(p.impl());
        Tape<T>::active()->record([impls, o = out.impl(), L, M] {
            for (std::size_t l = 0; l < L; ++l) {
                if (!impls[l]->requires_grad) continue;
                for (std::size_t i = 0; i < M; ++i) impls[l]->grad[i] += o->grad[i * L + l];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// 1-D convolution over the trailing (time) axis
// ---------------------------------------------------------------------------

// x: [G, Cin, L], kernels: [Cout, Cin, W], bias: [Cout] -> [G, Cout, L-W+1]
// valid cross-correlation, no padding
template <typename T>
Tensor<T> conv1d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
    if (x.ndim() != 3 || kernels.ndim() != 3)
        throw ShapeError("conv1d expects [G,Cin,L] and [Cout,Cin,W], got " + shape_str(x.shape()) +
                         " and " + shape_str(kernels.shape()));
    std::size_t G = x.shape()[0], Ci = x.shape()[1], L = x.shape()[2];
    std::size_t Co = kernels.shape()[0], Ci2 = kernels.shape()[1], W = kernels.shape()[2];
    if (Ci != Ci2)
        throw ShapeError("conv1d: channel mismatch " + shape_str(x.shape()) + " vs " +
                         shape_str(kernels.shape()));
    if (L < W)
        throw ShapeError("conv1d: input length " + std::to_string(L) + " shorter than kernel width " +
                         std::to_string(W));
    if (bias.size() != Co) throw ShapeError("conv1d: bias size " + shape_str(bias.shape()));
    bool traced = detail::tracing<T>({&x, &kernels, &bias});
    std::size_t Lo = L - W + 1;
    Tensor<T> out({G, Co, Lo});
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t o = 0; o < Co; ++o)
            for (std::size_t t = 0; t < Lo; ++t) {
                T acc = bias.data()[o];
                for (std::size_t c = 0; c < Ci; ++c) {
                    const T* xr = x.data().data() + (g * Ci + c) * L + t;
                    const T* kr = kernels.data().data() + (o * Ci + c) * W;
                    for (std::size_t w = 0; w < W; ++w) acc += xr[w] * kr[w];
                }
                out.data()[(g * Co + o) * Lo + t] = acc;
            }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record(
            [x = x.impl(), k = kernels.impl(), b = bias.impl(), ot = out.impl(), G, Ci, L, Co, W, Lo] {
                for (std::size_t g = 0; g < G; ++g)
                    for (std::size_t o = 0; o < Co; ++o)
                        for (std::size_t t = 0; t < Lo; ++t) {
                            T go = ot->grad[(g * Co + o) * Lo + t];
                            if (go == T(0)) continue;
                            if (b->requires_grad) b->grad[o] += go;
                            for (std::size_t c = 0; c < Ci; ++c) {
                                const std::size_t xbase = (g * Ci + c) * L + t;
                                const std::size_t kbase = (o * Ci + c) * W;
                                for (std::size_t w = 0; w < W; ++w) {
                                    if (x->requires_grad) x->grad[xbase + w] += go * k->data[kbase + w];
                                    if (k->requires_grad) k->grad[kbase + w] += go * x->data[xbase + w];
                                }
                            }
                        }
            });
    }
    return out;
}

// max over the trailing (time) axis: [G, C, L] -> [G, C]
template <typename T>
Tensor<T> maxpool_time(const Tensor<T>& x) {
    if (x.ndim() != 3) throw ShapeError("maxpool_time expects [G,C,L], got " + shape_str(x.shape()));
    std::size_t G = x.shape()[0], C = x.shape()[1], L = x.shape()[2];
    bool traced = detail::tracing<T>({&x});
    Tensor<T> out({G, C});
    std::vector<std::size_t> arg(G * C);
    for (std::size_t gc = 0; gc < G * C; ++gc) {
        const T* row = x.data().data() + gc * L;
        std::size_t best = 0;
        for (std::size_t t = 1; t < L; ++t)
            if (row[t] > row[best]) best = t;
        arg[gc] = best;
        out.data()[gc] = row[best];
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), o = out.impl(), arg, L] {
            if (!x->requires_grad) return;
            for (std::size_t gc = 0; gc < arg.size(); ++gc) x->grad[gc * L + arg[gc]] += o->grad[gc];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch normalization (batch statistics, training form)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
    std::size_t R = x.rows(), C = x.cols();
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batch_norm: scale/shift " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " vs columns of " + shape_str(x.shape()));
    bool traced = detail::tracing<T>({&x, &gamma, &beta});
    Tensor<T> out(x.shape());
    std::vector<T> inv_std(C), xhat(R * C);
    for (std::size_t c = 0; c < C; ++c) {
        T mean = T(0);
        for (std::size_t r = 0; r < R; ++r) mean += x.data()[r * C + c];
        mean /= static_cast<T>(R);
        T var = T(0);
        for (std::size_t r = 0; r < R; ++r) {
            T d = x.data()[r * C + c] - mean;
            var += d * d;
        }
        var /= static_cast<T>(R);
        T inv = T(1) / std::sqrt(var + eps);
        inv_std[c] = inv;
        for (std::size_t r = 0; r < R; ++r) {
            T h = (x.data()[r * C + c] - mean) * inv;
            xhat[r * C + c] = h;
            out.data()[r * C + c] = gamma.data()[c] * h + beta.data()[c];
        }
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = x.impl(), g = gamma.impl(), b = beta.impl(), o = out.impl(),
                                   inv_std = std::move(inv_std), xhat = std::move(xhat), R, C] {
            for (std::size_t c = 0; c < C; ++c) {
                T sum_g = T(0), sum_gx = T(0);
                for (std::size_t r = 0; r < R; ++r) {
                    T go = o->grad[r * C + c];
                    sum_g += go;
                    sum_gx += go * xhat[r * C + c];
                }
                if (g->requires_grad) g->grad[c] += sum_gx;
                if (b->requires_grad) b->grad[c] += sum_g;
                if (x->requires_grad) {
                    T coef = g->data[c] * inv_std[c];
                    T mg = sum_g / static_cast<T>(R);
                    T mgx = sum_gx / static_cast<T>(R);
                    for (std::size_t r = 0; r < R; ++r) {
                        T go = o->grad[r * C + c];
                        x->grad[r * C + c] += coef * (go - mg - xhat[r * C + c] * mgx);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// sampling helpers
// ---------------------------------------------------------------------------

// one-hot of the row argmax, gradient passed through unchanged
template <typename T>
Tensor<T> straight_through_onehot(const Tensor<T>& soft) {
    std::size_t R = soft.rows(), C = soft.cols();
    bool traced = detail::tracing<T>({&soft});
    Tensor<T> out(soft.shape());
    for (std::size_t r = 0; r < R; ++r) {
        const T* row = soft.data().data() + r * C;
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (row[c] > row[best]) best = c;
        out.data()[r * C + best] = T(1);
    }
    detail::mark_output(out, traced);
    if (traced) {
        Tape<T>::active()->record([x = soft.impl(), o = out.impl()] {
            if (!x->requires_grad) return;
            for (std::size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i];
        });
    }
    return out;
}

// draws one Gumbel(0,1) noise value per entry of `shape`
template <typename T>
Tensor<T> gumbel_noise(const Shape& shape, RngStream& rng) {
    Tensor<T> noise(shape);
    for (auto& v : noise.data()) v = static_cast<T>(rng.gumbel());
    return noise;
}

// Relaxed draw from a categorical given log-probabilities over the last axis.
// Soft mode: softmax((log_probs + g) / tau). Hard mode: one-hot argmax with a
// straight-through gradient equal to the soft sample's.
template <typename T>
Tensor<T> gumbel_softmax_sample(const Tensor<T>& log_probs, T tau, RngStream& rng, bool hard) {
    if (!(tau > T(0))) throw ValueError("gumbel_softmax_sample: tau must be positive");
    Tensor<T> noise = gumbel_noise<T>(log_probs.shape(), rng);
    Tensor<T> soft = softmax_rows(add(log_probs, noise), tau);
    return hard ? straight_through_onehot(soft) : soft;
}

// ---------------------------------------------------------------------------
// conversions and forward-only helpers
// ---------------------------------------------------------------------------

template <typename To, typename From>
Tensor<To> cast_tensor(const Tensor<From>& x) {
    Tensor<To> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = static_cast<To>(x.data()[i]);
    return out;
}

template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& x) {
    std::size_t R = x.rows(), C = x.cols();
    std::vector<std::size_t> out(R);
    for (std::size_t r = 0; r < R; ++r) {
        const T* row = x.data().data() + r * C;
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c)
            if (row[c] > row[best]) best = c;
        out[r] = best;
    }
    return out;
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
    for (T v : x.data())
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace sdci
