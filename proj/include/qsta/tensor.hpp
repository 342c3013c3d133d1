#pragma once

// Dense float64 tensor with tape-based reverse-mode autodiff.
//
// Tensors are immutable after their forward op creates them, except for the
// gradient accumulators. Recording happens on a thread-local active tape;
// a backward pass propagates through per-pass scratch buffers and then adds
// the result into each tensor's persistent .grad, so running backward twice
// on the same tape accumulates exactly twice the gradient.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsta {

struct TensorError : std::runtime_error {
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

}  // namespace detail

struct TensorImpl {
    std::vector<std::size_t> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;     // persistent accumulator
    std::vector<double> scratch;  // per-backward-pass buffer
    std::uint64_t touch_mark = 0;

    std::size_t size() const { return data.size(); }
};

class Tensor {
public:
    Tensor() : p_(nullptr) {}
    explicit Tensor(std::shared_ptr<TensorImpl> p) : p_(std::move(p)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
        auto p = std::make_shared<TensorImpl>();
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        p->shape = std::move(shape);
        p->data.assign(n, 0.0);
        p->requires_grad = requires_grad;
        return Tensor(p);
    }

    static Tensor full(std::vector<std::size_t> shape, double v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.data()) x = v;
        return t;
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        Tensor t = zeros({1}, requires_grad);
        t.data()[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> v, bool requires_grad = false) {
        auto p = std::make_shared<TensorImpl>();
        p->shape = {v.size()};
        p->data = std::move(v);
        p->requires_grad = requires_grad;
        return Tensor(p);
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v,
                         bool requires_grad = false) {
        if (v.size() != rows * cols)
            throw TensorError("matrix: data length " + std::to_string(v.size()) +
                              " does not fill " + std::to_string(rows) + "x" + std::to_string(cols));
        auto p = std::make_shared<TensorImpl>();
        p->shape = {rows, cols};
        p->data = std::move(v);
        p->requires_grad = requires_grad;
        return Tensor(p);
    }

    bool defined() const { return p_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return p_->shape; }
    std::size_t ndim() const { return p_->shape.size(); }
    std::size_t size() const { return p_->data.size(); }
    std::size_t rows() const { return p_->shape.at(0); }
    std::size_t cols() const { return p_->shape.at(1); }

    std::vector<double>& data() { return p_->data; }
    const std::vector<double>& data() const { return p_->data; }

    double value() const {
        if (size() != 1) throw TensorError("value: tensor is not scalar " + detail::shape_str(shape()));
        return p_->data[0];
    }

    double& at(std::size_t i) { return p_->data.at(i); }
    double at(std::size_t i) const { return p_->data.at(i); }
    double& at(std::size_t r, std::size_t c) { return p_->data.at(r * cols() + c); }
    double at(std::size_t r, std::size_t c) const { return p_->data.at(r * cols() + c); }

    bool requires_grad() const { return p_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        p_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !p_->grad.empty(); }
    std::vector<double>& grad() {
        if (p_->grad.size() != p_->data.size()) p_->grad.assign(p_->data.size(), 0.0);
        return p_->grad;
    }
    const std::vector<double>& grad() const { return p_->grad; }
    void zero_grad() { p_->grad.assign(p_->data.size(), 0.0); }

    std::shared_ptr<TensorImpl> impl() const { return p_; }

private:
    std::shared_ptr<TensorImpl> p_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace detail {

// Monotonic source for tape epochs. Each Tape generation must be globally
// unique within the thread: touch marks live on the shared TensorImpl, so a
// fresh Tape reusing an old epoch value would silently skip tensors that an
// earlier tape had marked.
inline std::uint64_t next_tape_epoch() {
    thread_local std::uint64_t counter = 0;
    return ++counter;
}

}  // namespace detail

class Tape {
public:
    using BackFn = std::function<void()>;

    Tape() : epoch_(detail::next_tape_epoch()) {}

    void touch(const Tensor& t) {
        auto impl = t.impl();
        if (impl->touch_mark != epoch_) {
            impl->touch_mark = epoch_;
            touched_.push_back(impl);
        }
    }

    // Record one op node. `fn` reads the output's scratch and adds into the
    // inputs' scratch buffers. Every tensor the node reads or writes must be
    // passed in `tensors` so its scratch gets managed.
    void record(BackFn fn, std::initializer_list<Tensor> tensors) {
        for (const auto& t : tensors) touch(t);
        nodes_.push_back(std::move(fn));
    }

    void record(BackFn fn, const std::vector<Tensor>& tensors) {
        for (const auto& t : tensors) touch(t);
        nodes_.push_back(std::move(fn));
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        touched_.clear();
        epoch_ = detail::next_tape_epoch();
    }

    // Reverse pass from a scalar loss. Accumulates into .grad additively.
    void backward(const Tensor& loss) {
        if (loss.size() != 1)
            throw TensorError("backward: loss must be scalar, got " +
                              detail::shape_str(loss.shape()));
        touch(loss);
        for (auto& impl : touched_) impl->scratch.assign(impl->data.size(), 0.0);
        loss.impl()->scratch[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        for (auto& impl : touched_) {
            if (!impl->requires_grad) continue;
            if (impl->grad.size() != impl->data.size()) impl->grad.assign(impl->data.size(), 0.0);
            for (std::size_t i = 0; i < impl->data.size(); ++i) impl->grad[i] += impl->scratch[i];
        }
    }

private:
    std::vector<BackFn> nodes_;
    std::vector<std::shared_ptr<TensorImpl>> touched_;
    std::uint64_t epoch_;
};

inline Tape*& tape_slot() {
    thread_local Tape* slot = nullptr;
    return slot;
}

inline Tape* active_tape() { return tape_slot(); }

struct TapeScope {
    explicit TapeScope(Tape& t) : prev_(tape_slot()) { tape_slot() = &t; }
    ~TapeScope() { tape_slot() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

struct NoGradScope {
    NoGradScope() : prev_(tape_slot()) { tape_slot() = nullptr; }
    ~NoGradScope() { tape_slot() = prev_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* prev_;
};

namespace detail {

inline bool recording(std::initializer_list<const Tensor*> ins) {
    if (!active_tape()) return false;
    for (const auto* t : ins)
        if ((*t).requires_grad()) return true;
    return false;
}

inline Tensor make_out(std::vector<std::size_t> shape, bool req) {
    return Tensor::zeros(std::move(shape), req);
}

inline bool all_zero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return false;
    return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic
// ---------------------------------------------------------------------------

namespace detail {

enum class BroadcastKind { Same, ScalarRhs, RowRhs };

inline BroadcastKind classify_broadcast(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return BroadcastKind::Same;
    if (b.size() == 1) return BroadcastKind::ScalarRhs;
    if (a.ndim() == 2 && b.ndim() == 1 && b.size() == a.cols()) return BroadcastKind::RowRhs;
    throw TensorError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    auto kind = detail::classify_broadcast("add", a, b);
    bool rec = detail::recording({&a, &b});
    Tensor out = detail::make_out(a.shape(), a.requires_grad() || b.requires_grad());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    switch (kind) {
        case detail::BroadcastKind::Same:
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
            break;
        case detail::BroadcastKind::ScalarRhs:
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[0];
            break;
        case detail::BroadcastKind::RowRhs: {
            const std::size_t c = a.cols();
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i % c];
            break;
        }
    }
    if (rec) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        std::size_t c = (kind == detail::BroadcastKind::RowRhs) ? a.cols() : 0;
        active_tape()->record(
            [ai, bi, oi, kind, c] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i) {
                    const double g = oi->scratch[i];
                    ai->scratch[i] += g;
                    switch (kind) {
                        case detail::BroadcastKind::Same: bi->scratch[i] += g; break;
                        case detail::BroadcastKind::ScalarRhs: bi->scratch[0] += g; break;
                        case detail::BroadcastKind::RowRhs: bi->scratch[i % c] += g; break;
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    auto kind = detail::classify_broadcast("sub", a, b);
    bool rec = detail::recording({&a, &b});
    Tensor out = detail::make_out(a.shape(), a.requires_grad() || b.requires_grad());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    switch (kind) {
        case detail::BroadcastKind::Same:
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] - bv[i];
            break;
        case detail::BroadcastKind::ScalarRhs:
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] - bv[0];
            break;
        case detail::BroadcastKind::RowRhs: {
            const std::size_t c = a.cols();
            for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] - bv[i % c];
            break;
        }
    }
    if (rec) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        std::size_t c = (kind == detail::BroadcastKind::RowRhs) ? a.cols() : 0;
        active_tape()->record(
            [ai, bi, oi, kind, c] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i) {
                    const double g = oi->scratch[i];
                    ai->scratch[i] += g;
                    switch (kind) {
                        case detail::BroadcastKind::Same: bi->scratch[i] -= g; break;
                        case detail::BroadcastKind::ScalarRhs: bi->scratch[0] -= g; break;
                        case detail::BroadcastKind::RowRhs: bi->scratch[i % c] -= g; break;
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    auto kind = detail::classify_broadcast("mul", a, b);
    bool rec = detail::recording({&a, &b});
    Tensor out = detail::make_out(a.shape(), a.requires_grad() || b.requires_grad());
    const auto& av = a.data();
    const auto& bv = b.data();
    auto& ov = out.data();
    const std::size_t c = (kind == detail::BroadcastKind::RowRhs) ? a.cols() : 0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        double bx = kind == detail::BroadcastKind::Same     ? bv[i]
                    : kind == detail::BroadcastKind::ScalarRhs ? bv[0]
                                                               : bv[i % c];
        ov[i] = av[i] * bx;
    }
    if (rec) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(
            [ai, bi, oi, kind, c] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i) {
                    const double g = oi->scratch[i];
                    switch (kind) {
                        case detail::BroadcastKind::Same:
                            ai->scratch[i] += g * bi->data[i];
                            bi->scratch[i] += g * ai->data[i];
                            break;
                        case detail::BroadcastKind::ScalarRhs:
                            ai->scratch[i] += g * bi->data[0];
                            bi->scratch[0] += g * ai->data[i];
                            break;
                        case detail::BroadcastKind::RowRhs:
                            ai->scratch[i] += g * bi->data[i % c];
                            bi->scratch[i % c] += g * ai->data[i];
                            break;
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

// Multiply by a compile-time constant (no gradient to the constant).
inline Tensor scale(const Tensor& a, double s) {
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, s] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i)
                    ai->scratch[i] += oi->scratch[i] * s;
            },
            {a, out});
    }
    return out;
}

inline Tensor add_const(const Tensor& a, double s) {
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + s;
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i)
                    ai->scratch[i] += oi->scratch[i];
            },
            {a, out});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Matrix ops
// ---------------------------------------------------------------------------

namespace detail {

// C[m x n] += A[m x k] * B[k x n], row-major, ikj order.
inline void gemm_acc(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                     std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = a_row[p];
            if (a == 0.0) continue;
            const double* b_row = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C[m x n] += A[m x k] * B^T where Bt is [n x k] row-major.
inline void gemm_bt_acc(const double* A, const double* Bt, double* C, std::size_t m,
                        std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        double* c_row = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b_row = Bt + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a_row[p] * b_row[p];
            c_row[j] += s;
        }
    }
}

// C[k x n] += A^T * G where A is [m x k], G is [m x n].
inline void gemm_at_acc(const double* A, const double* G, double* C, std::size_t m,
                        std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = A + i * k;
        const double* g_row = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = a_row[p];
            if (a == 0.0) continue;
            double* c_row = C + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += a * g_row[j];
        }
    }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
        throw TensorError("matmul: incompatible shapes " + detail::shape_str(a.shape()) +
                          " and " + detail::shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    bool rec = detail::recording({&a, &b});
    Tensor out = detail::make_out({m, n}, a.requires_grad() || b.requires_grad());
    detail::gemm_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n);
    if (rec) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(
            [ai, bi, oi, m, k, n] {
                // dA += G * B^T ; dB += A^T * G
                detail::gemm_bt_acc(oi->scratch.data(), bi->data.data(), ai->scratch.data(), m, n,
                                    k);
                detail::gemm_at_acc(ai->data.data(), oi->scratch.data(), bi->scratch.data(), m, k,
                                    n);
            },
            {a, b, out});
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2)
        throw TensorError("transpose: expected 2-D tensor, got " + detail::shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out({c, r}, a.requires_grad());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = a.data()[i * c + j];
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, r, c] {
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        ai->scratch[i * c + j] += oi->scratch[j * r + i];
            },
            {a, out});
    }
    return out;
}

inline Tensor reshape(const Tensor& a, std::vector<std::size_t> new_shape) {
    std::size_t n = 1;
    for (auto d : new_shape) n *= d;
    if (n != a.size())
        throw TensorError("reshape: cannot view " + detail::shape_str(a.shape()) + " as " +
                          detail::shape_str(new_shape));
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out(std::move(new_shape), a.requires_grad());
    out.data() = a.data();
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i)
                    ai->scratch[i] += oi->scratch[i];
            },
            {a, out});
    }
    return out;
}

// Slice along an axis of a 1-D or 2-D tensor.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t count) {
    if (a.ndim() == 1) {
        if (axis != 0 || start + count > a.size())
            throw TensorError("slice: out of range on " + detail::shape_str(a.shape()));
        bool rec = detail::recording({&a});
        Tensor out = detail::make_out({count}, a.requires_grad());
        for (std::size_t i = 0; i < count; ++i) out.data()[i] = a.data()[start + i];
        if (rec) {
            auto ai = a.impl(), oi = out.impl();
            active_tape()->record(
                [ai, oi, start, count] {
                    for (std::size_t i = 0; i < count; ++i) ai->scratch[start + i] += oi->scratch[i];
                },
                {a, out});
        }
        return out;
    }
    if (a.ndim() != 2 || axis > 1)
        throw TensorError("slice: expected 1-D or 2-D tensor, got " + detail::shape_str(a.shape()));
    const std::size_t r = a.rows(), c = a.cols();
    if ((axis == 0 && start + count > r) || (axis == 1 && start + count > c))
        throw TensorError("slice: out of range on " + detail::shape_str(a.shape()));
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out(axis == 0 ? std::vector<std::size_t>{count, c}
                                            : std::vector<std::size_t>{r, count},
                                  a.requires_grad());
    if (axis == 0) {
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t j = 0; j < c; ++j) out.data()[i * c + j] = a.data()[(start + i) * c + j];
    } else {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j)
                out.data()[i * count + j] = a.data()[i * c + start + j];
    }
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, axis, start, count, r, c] {
                if (axis == 0) {
                    for (std::size_t i = 0; i < count; ++i)
                        for (std::size_t j = 0; j < c; ++j)
                            ai->scratch[(start + i) * c + j] += oi->scratch[i * c + j];
                } else {
                    for (std::size_t i = 0; i < r; ++i)
                        for (std::size_t j = 0; j < count; ++j)
                            ai->scratch[i * c + start + j] += oi->scratch[i * count + j];
                }
            },
            {a, out});
    }
    return out;
}

// Concatenate two 1-D or two 2-D tensors along an axis.
inline Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
    bool rec = detail::recording({&a, &b});
    if (a.ndim() == 1 && b.ndim() == 1) {
        if (axis != 0) throw TensorError("concat: 1-D tensors concatenate on axis 0");
        Tensor out = detail::make_out({a.size() + b.size()}, a.requires_grad() || b.requires_grad());
        for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i];
        for (std::size_t i = 0; i < b.size(); ++i) out.data()[a.size() + i] = b.data()[i];
        if (rec) {
            auto ai = a.impl(), bi = b.impl(), oi = out.impl();
            const std::size_t na = a.size();
            active_tape()->record(
                [ai, bi, oi, na] {
                    for (std::size_t i = 0; i < na; ++i) ai->scratch[i] += oi->scratch[i];
                    for (std::size_t i = 0; i < bi->scratch.size(); ++i)
                        bi->scratch[i] += oi->scratch[na + i];
                },
                {a, b, out});
        }
        return out;
    }
    if (a.ndim() != 2 || b.ndim() != 2 || axis > 1)
        throw TensorError("concat: incompatible shapes " + detail::shape_str(a.shape()) + " and " +
                          detail::shape_str(b.shape()));
    if (axis == 0 ? a.cols() != b.cols() : a.rows() != b.rows())
        throw TensorError("concat: incompatible shapes " + detail::shape_str(a.shape()) + " and " +
                          detail::shape_str(b.shape()));
    const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
    Tensor out = detail::make_out(axis == 0 ? std::vector<std::size_t>{ar + br, ac}
                                            : std::vector<std::size_t>{ar, ac + bc},
                                  a.requires_grad() || b.requires_grad());
    if (axis == 0) {
        std::copy(a.data().begin(), a.data().end(), out.data().begin());
        std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
    } else {
        for (std::size_t i = 0; i < ar; ++i) {
            for (std::size_t j = 0; j < ac; ++j) out.data()[i * (ac + bc) + j] = a.data()[i * ac + j];
            for (std::size_t j = 0; j < bc; ++j)
                out.data()[i * (ac + bc) + ac + j] = b.data()[i * bc + j];
        }
    }
    if (rec) {
        auto ai = a.impl(), bi = b.impl(), oi = out.impl();
        active_tape()->record(
            [ai, bi, oi, axis, ar, ac, bc] {
                if (axis == 0) {
                    for (std::size_t i = 0; i < ai->scratch.size(); ++i)
                        ai->scratch[i] += oi->scratch[i];
                    for (std::size_t i = 0; i < bi->scratch.size(); ++i)
                        bi->scratch[i] += oi->scratch[ai->scratch.size() + i];
                } else {
                    for (std::size_t i = 0; i < ar; ++i) {
                        for (std::size_t j = 0; j < ac; ++j)
                            ai->scratch[i * ac + j] += oi->scratch[i * (ac + bc) + j];
                        for (std::size_t j = 0; j < bc; ++j)
                            bi->scratch[i * bc + j] += oi->scratch[i * (ac + bc) + ac + j];
                    }
                }
            },
            {a, b, out});
    }
    return out;
}

// Stack 2-D tensors with equal column counts into one tall matrix (one node,
// scatter on backward) -- cheaper than a concat chain for long batch lists.
inline Tensor stack_rows(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw TensorError("stack_rows: empty input list");
    const std::size_t c = xs[0].ndim() == 2 ? xs[0].cols() : xs[0].size();
    std::size_t total = 0;
    bool any_grad = false;
    for (const auto& x : xs) {
        const std::size_t xc = x.ndim() == 2 ? x.cols() : x.size();
        if (xc != c)
            throw TensorError("stack_rows: column mismatch " + std::to_string(xc) + " vs " +
                              std::to_string(c));
        total += x.size() / c;
        any_grad = any_grad || x.requires_grad();
    }
    bool rec = active_tape() && any_grad;
    Tensor out = detail::make_out({total, c}, any_grad);
    std::size_t offset = 0;
    for (const auto& x : xs) {
        std::copy(x.data().begin(), x.data().end(), out.data().begin() + offset);
        offset += x.size();
    }
    if (rec) {
        std::vector<std::shared_ptr<TensorImpl>> impls;
        impls.reserve(xs.size());
        for (const auto& x : xs) impls.push_back(x.impl());
        auto oi = out.impl();
        std::vector<Tensor> touched = xs;
        touched.push_back(out);
        active_tape()->record(
            [impls = std::move(impls), oi] {
                std::size_t off = 0;
                for (const auto& xi : impls) {
                    for (std::size_t i = 0; i < xi->scratch.size(); ++i)
                        xi->scratch[i] += oi->scratch[off + i];
                    off += xi->scratch.size();
                }
            },
            touched);
    }
    return out;
}

// Replicate a 1-D row vector into a [rows x len] matrix.
inline Tensor broadcast_rows(const Tensor& a, std::size_t rows) {
    if (a.ndim() != 1)
        throw TensorError("broadcast: expected 1-D tensor, got " + detail::shape_str(a.shape()));
    const std::size_t c = a.size();
    bool rec = detail::recording({&a});
    Tensor out = detail::make_out({rows, c}, a.requires_grad());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < c; ++j) out.data()[i * c + j] = a.data()[j];
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, rows, c] {
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < c; ++j) ai->scratch[j] += oi->scratch[i * c + j];
            },
            {a, out});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    bool rec = detail::recording({&a});
    Tensor out = Tensor::zeros({1}, a.requires_grad());
    double s = 0.0;
    for (double x : a.data()) s += x;
    out.data()[0] = s;
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi] {
                const double g = oi->scratch[0];
                for (auto& x : ai->scratch) x += g;
            },
            {a, out});
    }
    return out;
}

inline Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw TensorError("mean: empty tensor");
    Tensor s = sum(a);
    return scale(s, 1.0 / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

namespace detail {

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    bool rec = recording({&a});
    Tensor out = make_out(a.shape(), a.requires_grad());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = fwd(a.data()[i]);
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, bwd] {
                for (std::size_t i = 0; i < oi->scratch.size(); ++i)
                    ai->scratch[i] += oi->scratch[i] * bwd(ai->data[i], oi->data[i]);
            },
            {a, out});
    }
    return out;
}

}  // namespace detail

inline Tensor relu(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(const Tensor& a, double slope = 0.2) {
    return detail::unary_op(
        a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

inline Tensor tanh_t(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_op(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

// Elementwise natural log; inputs must be strictly positive.
inline Tensor log_t(const Tensor& a) {
    for (double v : a.data())
        if (v <= 0.0) throw TensorError("log: non-positive input");
    return detail::unary_op(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi)(x + 0.044715 x^3))).
// Agrees with the exact erf form to better than 1e-3 absolute.
inline Tensor gelu(const Tensor& a) {
    constexpr double kC = 0.7978845608028653558798921198687;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    return detail::unary_op(
        a,
        [](double x) {
            const double u = kC * (x + kA * x * x * x);
            return 0.5 * x * (1.0 + std::tanh(u));
        },
        [](double x, double) {
            const double u = kC * (x + kA * x * x * x);
            const double t = std::tanh(u);
            const double du = kC * (1.0 + 3.0 * kA * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        });
}

// ---------------------------------------------------------------------------
// softmax / layer_norm / cross_entropy
// ---------------------------------------------------------------------------

// Numerically stabilized softmax along `axis` of a 1-D or 2-D tensor.
inline Tensor softmax(const Tensor& a, std::size_t axis = static_cast<std::size_t>(-1)) {
    const bool is1d = a.ndim() == 1;
    if (is1d && axis == static_cast<std::size_t>(-1)) axis = 0;
    if (!is1d && axis == static_cast<std::size_t>(-1)) axis = 1;
    if ((is1d && axis != 0) || (!is1d && (a.ndim() != 2 || axis > 1)))
        throw TensorError("softmax: bad axis " + std::to_string(axis) + " for " +
                          detail::shape_str(a.shape()));
    const std::size_t axis_len = is1d ? a.size() : (axis == 1 ? a.cols() : a.rows());
    if (axis_len == 0) throw TensorError("softmax: empty axis");

    bool rec = detail::recording({&a});
    Tensor out = detail::make_out(a.shape(), a.requires_grad());
    const std::size_t groups = a.size() / axis_len;
    const std::size_t stride = (is1d || axis == 1) ? 1 : a.cols();
    // group g starts at g*axis_len for row groups, at column g for column groups
    const std::size_t group_mul = (is1d || axis == 1) ? axis_len : 1;
    for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t base = g * group_mul;
        double mx = -1e308;
        for (std::size_t i = 0; i < axis_len; ++i) mx = std::max(mx, a.data()[base + i * stride]);
        double z = 0.0;
        for (std::size_t i = 0; i < axis_len; ++i) {
            const double e = std::exp(a.data()[base + i * stride] - mx);
            out.data()[base + i * stride] = e;
            z += e;
        }
        for (std::size_t i = 0; i < axis_len; ++i) out.data()[base + i * stride] /= z;
    }
    if (rec) {
        auto ai = a.impl(), oi = out.impl();
        active_tape()->record(
            [ai, oi, groups, axis_len, stride, group_mul] {
                for (std::size_t g = 0; g < groups; ++g) {
                    const std::size_t base = g * group_mul;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < axis_len; ++i)
                        dot += oi->scratch[base + i * stride] * oi->data[base + i * stride];
                    for (std::size_t i = 0; i < axis_len; ++i) {
                        const std::size_t k = base + i * stride;
                        ai->scratch[k] += oi->data[k] * (oi->scratch[k] - dot);
                    }
                }
            },
            {a, out});
    }
    return out;
}

// LayerNorm over the last axis, with affine parameters gamma and beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
    const std::size_t d = x.ndim() == 1 ? x.size() : x.cols();
    if (d == 0) throw TensorError("layer_norm: empty last axis");
    if (gamma.size() != d || beta.size() != d)
        throw TensorError("layer_norm: affine shape mismatch, needs length " + std::to_string(d));
    const std::size_t rows = x.size() / d;
    bool rec = detail::recording({&x, &gamma, &beta});
    Tensor out = detail::make_out(x.shape(),
                                  x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
    std::vector<double> inv_sigma(rows), xhat(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[r] = is;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (xr[j] - mu) * is;
            xhat[r * d + j] = h;
            out.data()[r * d + j] = h * gamma.data()[j] + beta.data()[j];
        }
    }
    if (rec) {
        auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
        active_tape()->record(
            [xi, gi, bi, oi, rows, d, inv_sigma = std::move(inv_sigma), xhat = std::move(xhat)] {
                for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = oi->scratch.data() + r * d;
                    const double* xh = xhat.data() + r * d;
                    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[j] * gi->data[j];
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xh[j];
                        gi->scratch[j] += g[j] * xh[j];
                        bi->scratch[j] += g[j];
                    }
                    const double inv_d = 1.0 / static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        const double dxh = g[j] * gi->data[j];
                        xi->scratch[r * d + j] +=
                            inv_sigma[r] * (dxh - inv_d * sum_dxhat - xh[j] * inv_d * sum_dxhat_xhat);
                    }
                }
            },
            {x, gamma, beta, out});
    }
    return out;
}

// -log softmax(logits)[label] for a 1-D logits vector.
inline Tensor cross_entropy(const Tensor& logits, std::size_t label) {
    if (logits.ndim() != 1)
        throw TensorError("cross_entropy: expected 1-D logits, got " +
                          detail::shape_str(logits.shape()));
    if (label >= logits.size())
        throw TensorError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
    bool rec = detail::recording({&logits});
    const std::size_t c = logits.size();
    double mx = -1e308;
    for (double v : logits.data()) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : logits.data()) z += std::exp(v - mx);
    const double logz = std::log(z) + mx;
    Tensor out = Tensor::zeros({1}, logits.requires_grad());
    out.data()[0] = logz - logits.data()[label];
    if (rec) {
        auto li = logits.impl(), oi = out.impl();
        active_tape()->record(
            [li, oi, label, c, mx, z] {
                const double g = oi->scratch[0];
                for (std::size_t j = 0; j < c; ++j) {
                    const double p = std::exp(li->data[j] - mx) / z;
                    li->scratch[j] += g * (p - (j == label ? 1.0 : 0.0));
                }
            },
            {logits, out});
    }
    return out;
}

// Mean cross-entropy over a batch of logits rows.
inline Tensor cross_entropy_batch(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.ndim() != 2 || labels.size() != logits.rows())
        throw TensorError("cross_entropy: batch shape mismatch " +
                          detail::shape_str(logits.shape()) + " with " +
                          std::to_string(labels.size()) + " labels");
    const std::size_t b = logits.rows(), c = logits.cols();
    for (auto l : labels)
        if (l >= c)
            throw TensorError("cross_entropy: label " + std::to_string(l) + " out of range for " +
                              std::to_string(c) + " classes");
    bool rec = detail::recording({&logits});
    Tensor out = Tensor::zeros({1}, logits.requires_grad());
    std::vector<double> mxs(b), zs(b);
    double total = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = logits.data().data() + i * c;
        double mx = -1e308;
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        mxs[i] = mx;
        zs[i] = z;
        total += std::log(z) + mx - row[labels[i]];
    }
    out.data()[0] = total / static_cast<double>(b);
    if (rec) {
        auto li = logits.impl(), oi = out.impl();
        active_tape()->record(
            [li, oi, labels, b, c, mxs = std::move(mxs), zs = std::move(zs)] {
                const double g = oi->scratch[0] / static_cast<double>(b);
                for (std::size_t i = 0; i < b; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        const double p = std::exp(li->data[i * c + j] - mxs[i]) / zs[i];
                        li->scratch[i * c + j] += g * (p - (j == labels[i] ? 1.0 : 0.0));
                    }
                }
            },
            {logits, out});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Max over all parameter entries of |autodiff - central difference| / max(1, |numeric|).
// `f` must rebuild the loss from scratch on the active tape each call.
inline double finite_diff_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                                double h = 1e-5) {
    std::vector<std::vector<double>> auto_grads;
    {
        Tape tape;
        TapeScope scope(tape);
        for (auto& p : params) p.zero_grad();
        Tensor loss = f();
        tape.backward(loss);
        for (auto& p : params) auto_grads.push_back(p.grad());
    }
    double worst = 0.0;
    NoGradScope ng;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.data()[i];
            p.data()[i] = saved + h;
            const double fp = f().value();
            p.data()[i] = saved - h;
            const double fm = f().value();
            p.data()[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double err = std::abs(auto_grads[pi][i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace qsta
