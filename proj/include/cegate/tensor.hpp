#ifndef CEGATE_TENSOR_HPP
#define CEGATE_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cegate/check.hpp"

namespace cegate {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

struct TensorData {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;  // leaf/trainable flag
    bool needs_grad = false;     // requires_grad, or depends on such a tensor
    std::vector<double> grad;    // allocated lazily, same length as data

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
    void drop_grad() {
        grad.clear();
        grad.shrink_to_fit();
    }
};

using TensorPtr = std::shared_ptr<TensorData>;

// Value-semantics handle over a shared dense buffer. Leaves are created
// directly; intermediates are created by ops while a Tape is active.
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
        check(numel(shape) == values.size(),
              "tensor data length " + std::to_string(values.size()) +
                  " does not match shape " + shape_str(shape));
        d_ = std::make_shared<TensorData>();
        d_->shape = std::move(shape);
        d_->data = std::move(values);
        d_->requires_grad = requires_grad;
        d_->needs_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<double> v(numel(shape), 0.0);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        std::vector<double> v(numel(shape), value);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return Tensor({1}, {value}, requires_grad);
    }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    std::size_t size() const { return d_->data.size(); }
    std::size_t rows() const { return d_->shape.at(0); }
    std::size_t cols() const { return d_->shape.at(1); }
    bool is_matrix() const { return d_->shape.size() == 2; }

    std::vector<double>& data() { return d_->data; }
    const std::vector<double>& data() const { return d_->data; }
    std::vector<double>& grad() { return d_->grad; }
    const std::vector<double>& grad() const { return d_->grad; }
    bool has_grad() const { return !d_->grad.empty(); }

    double value() const {
        check(size() == 1, "value() requires a scalar tensor, got " + shape_str(shape()));
        return d_->data[0];
    }

    double& at(std::size_t i, std::size_t j) { return d_->data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return d_->data[i * cols() + j]; }

    bool requires_grad() const { return d_->requires_grad; }
    bool needs_grad() const { return d_->needs_grad; }

    void set_requires_grad(bool flag) {
        d_->requires_grad = flag;
        d_->needs_grad = flag;
        if (!flag) d_->drop_grad();
    }

    void zero_grad() const { d_->zero_grad(); }

    TensorPtr ptr() const { return d_; }

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

private:
    TensorPtr d_;
};

// Append-only record of one forward pass (define-by-run). Backward walks the
// nodes in strictly decreasing append order. Gradients of non-requires_grad
// intermediates are transient: populated during the sweep and dropped at the
// end, so only leaves accumulate across backward calls.
class Tape {
public:
    struct Node {
        std::vector<TensorPtr> outs;
        std::function<void()> back;
    };

    void record(std::vector<TensorPtr> outs, std::function<void()> back) {
        nodes_.push_back(Node{std::move(outs), std::move(back)});
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

    void backward(const Tensor& loss) {
        check(loss.size() == 1,
              "backward requires a scalar loss, got " + shape_str(loss.shape()));
        loss.ptr()->ensure_grad();
        loss.ptr()->grad[0] = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            bool any = false;
            for (const auto& o : it->outs)
                if (!o->grad.empty()) any = true;
            if (any) it->back();
        }
        for (auto& node : nodes_)
            for (auto& o : node.outs)
                if (!o->requires_grad) o->drop_grad();
    }

private:
    std::vector<Node> nodes_;
};

namespace detail {

inline Tape*& active_tape_slot() {
    thread_local Tape* tape = nullptr;
    return tape;
}

}  // namespace detail

inline Tape* active_tape() { return detail::active_tape_slot(); }

// RAII activation of a tape for one forward pass.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : prev_(detail::active_tape_slot()) {
        detail::active_tape_slot() = &tape;
    }
    ~TapeScope() { detail::active_tape_slot() = prev_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> values, bool needs_grad) {
    Tensor t(std::move(shape), std::move(values));
    t.ptr()->needs_grad = needs_grad;
    return t;
}

inline bool tracing(std::initializer_list<const Tensor*> inputs) {
    if (!active_tape()) return false;
    for (const Tensor* t : inputs)
        if (t->needs_grad()) return true;
    return false;
}

// Accumulate g into t's grad buffer iff t participates in the backward pass.
inline void add_grad(const TensorPtr& t, const std::vector<double>& g) {
    if (!t->needs_grad) return;
    t->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) t->grad[i] += g[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    bool trace = detail::tracing({&a, &b});
    Tensor c = detail::make_result(a.shape(), std::move(out), trace);
    if (trace) {
        auto ad = a.ptr(), bd = b.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [ad, bd, cd] {
            detail::add_grad(ad, cd->grad);
            detail::add_grad(bd, cd->grad);
        });
    }
    return c;
}

inline Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
    bool trace = detail::tracing({&a});
    Tensor c = detail::make_result(a.shape(), std::move(out), trace);
    if (trace) {
        auto ad = a.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [ad, cd, factor] {
            if (!ad->needs_grad) return;
            ad->ensure_grad();
            for (std::size_t i = 0; i < cd->grad.size(); ++i)
                ad->grad[i] += factor * cd->grad[i];
        });
    }
    return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    bool trace = detail::tracing({&a, &b});
    Tensor c = detail::make_result(a.shape(), std::move(out), trace);
    if (trace) {
        auto ad = a.ptr(), bd = b.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [ad, bd, cd] {
            if (ad->needs_grad) {
                ad->ensure_grad();
                for (std::size_t i = 0; i < cd->grad.size(); ++i)
                    ad->grad[i] += bd->data[i] * cd->grad[i];
            }
            if (bd->needs_grad) {
                bd->ensure_grad();
                for (std::size_t i = 0; i < cd->grad.size(); ++i)
                    bd->grad[i] += ad->data[i] * cd->grad[i];
            }
        });
    }
    return c;
}

// x [m x n] + row vector v [n], broadcast over rows
inline Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check(x.is_matrix(), "add_rowvec: x must be a matrix, got " + shape_str(x.shape()));
    check(v.size() == x.cols(), "add_rowvec: vector length " + shape_str(v.shape()) +
                                    " does not match columns of " + shape_str(x.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = x.data()[i * n + j] + v.data()[j];
    bool trace = detail::tracing({&x, &v});
    Tensor c = detail::make_result(x.shape(), std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), vd = v.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, vd, cd, m, n] {
            if (xd->needs_grad) detail::add_grad(xd, cd->grad);
            if (vd->needs_grad) {
                vd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        vd->grad[j] += cd->grad[i * n + j];
            }
        });
    }
    return c;
}

// scale row i of x by w[i]; w has numel == rows(x)
inline Tensor mul_colvec(const Tensor& x, const Tensor& w) {
    check(x.is_matrix(), "mul_colvec: x must be a matrix");
    check(w.size() == x.rows(), "mul_colvec: weight length " + shape_str(w.shape()) +
                                    " does not match rows of " + shape_str(x.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i * n + j] = x.data()[i * n + j] * w.data()[i];
    bool trace = detail::tracing({&x, &w});
    Tensor c = detail::make_result(x.shape(), std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), wd = w.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, wd, cd, m, n] {
            if (xd->needs_grad) {
                xd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        xd->grad[i * n + j] += wd->data[i] * cd->grad[i * n + j];
            }
            if (wd->needs_grad) {
                wd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        s += xd->data[i * n + j] * cd->grad[i * n + j];
                    wd->grad[i] += s;
                }
            }
        });
    }
    return c;
}

inline Tensor transpose(const Tensor& x) {
    check(x.is_matrix(), "transpose: need a matrix, got " + shape_str(x.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.data()[i * n + j];
    bool trace = detail::tracing({&x});
    Tensor c = detail::make_result({n, m}, std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, cd, m, n] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    xd->grad[i * n + j] += cd->grad[j * m + i];
        });
    }
    return c;
}

inline Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count) {
    check(x.is_matrix(), "slice_cols: need a matrix");
    check(start + count <= x.cols(), "slice_cols: range [" + std::to_string(start) +
                                         ", " + std::to_string(start + count) +
                                         ") out of " + shape_str(x.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(m * count);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j)
            out[i * count + j] = x.data()[i * n + start + j];
    bool trace = detail::tracing({&x});
    Tensor c = detail::make_result({m, count}, std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, cd, m, n, start, count] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j)
                    xd->grad[i * n + start + j] += cd->grad[i * count + j];
        });
    }
    return c;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat_cols: empty input");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    bool trace = false;
    for (const auto& p : parts) {
        check(p.is_matrix() && p.rows() == m, "concat_cols: row mismatch");
        n += p.cols();
        if (active_tape() && p.needs_grad()) trace = true;
    }
    std::vector<double> out(m * n);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t pc = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j)
                out[i * n + off + j] = p.data()[i * pc + j];
        off += pc;
    }
    Tensor c = detail::make_result({m, n}, std::move(out), trace);
    if (trace) {
        std::vector<TensorPtr> ins;
        for (const auto& p : parts) ins.push_back(p.ptr());
        auto cd = c.ptr();
        active_tape()->record({cd}, [ins, cd, m, n] {
            std::size_t off = 0;
            for (const auto& p : ins) {
                const std::size_t pc = p->shape[1];
                if (p->needs_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < pc; ++j)
                            p->grad[i * pc + j] += cd->grad[i * n + off + j];
                }
                off += pc;
            }
        });
    }
    return c;
}

inline Tensor sum(const Tensor& x) {
    double s = std::accumulate(x.data().begin(), x.data().end(), 0.0);
    bool trace = detail::tracing({&x});
    Tensor c = detail::make_result({1}, {s}, trace);
    if (trace) {
        auto xd = x.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, cd] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            for (auto& g : xd->grad) g += cd->grad[0];
        });
    }
    return c;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.is_matrix() && b.is_matrix(),
          "matmul: need matrices, got " + shape_str(a.shape()) + " and " +
              shape_str(b.shape()));
    check(a.cols() == b.rows(), "matmul: inner dimensions differ, " +
                                    shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.data()[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                out[i * n + j] += av * b.data()[p * n + j];
        }
    bool trace = detail::tracing({&a, &b});
    Tensor c = detail::make_result({m, n}, std::move(out), trace);
    if (trace) {
        auto ad = a.ptr(), bd = b.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [ad, bd, cd, m, k, n] {
            if (ad->needs_grad) {
                ad->ensure_grad();
                // dA = dC * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            s += cd->grad[i * n + j] * bd->data[p * n + j];
                        ad->grad[i * k + p] += s;
                    }
            }
            if (bd->needs_grad) {
                bd->ensure_grad();
                // dB = A^T * dC
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double av = ad->data[i * k + p];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j)
                            bd->grad[p * n + j] += av * cd->grad[i * n + j];
                    }
            }
        });
    }
    return c;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline Tensor softmax_rows(const Tensor& x) {
    check(x.is_matrix(), "softmax_rows: need a matrix, got " + shape_str(x.shape()));
    for (double v : x.data())
        check_numeric(std::isfinite(v), "softmax_rows: non-finite input");
    const std::size_t m = x.rows(), n = x.cols();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < m; ++i) {
        double mx = x.data()[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x.data()[i * n + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(x.data()[i * n + j] - mx);
            denom += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= denom;
    }
    bool trace = detail::tracing({&x});
    Tensor c = detail::make_result(x.shape(), std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, cd, m, n] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    dot += cd->grad[i * n + j] * cd->data[i * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    xd->grad[i * n + j] +=
                        cd->data[i * n + j] * (cd->grad[i * n + j] - dot);
            }
        });
    }
    return c;
}

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
    check(x.is_matrix(), "layer_norm: need a matrix, got " + shape_str(x.shape()));
    const std::size_t m = x.rows(), n = x.cols();
    check(gamma.size() == n && beta.size() == n,
          "layer_norm: affine parameters must have length " + std::to_string(n));
    std::vector<double> out(x.size());
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x.data()[i * n + j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = x.data()[i * n + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            double h = (x.data()[i * n + j] - mean) * is;
            (*xhat)[i * n + j] = h;
            out[i * n + j] = gamma.data()[j] * h + beta.data()[j];
        }
    }
    bool trace = detail::tracing({&x, &gamma, &beta});
    Tensor c = detail::make_result(x.shape(), std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), gd = gamma.ptr(), bd = beta.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, gd, bd, cd, xhat, inv_std, m, n] {
            if (gd->needs_grad) {
                gd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        gd->grad[j] += cd->grad[i * n + j] * (*xhat)[i * n + j];
            }
            if (bd->needs_grad) {
                bd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) bd->grad[j] += cd->grad[i * n + j];
            }
            if (xd->needs_grad) {
                xd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double mean_dh = 0.0, mean_dh_h = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        double dh = cd->grad[i * n + j] * gd->data[j];
                        mean_dh += dh;
                        mean_dh_h += dh * (*xhat)[i * n + j];
                    }
                    mean_dh /= static_cast<double>(n);
                    mean_dh_h /= static_cast<double>(n);
                    for (std::size_t j = 0; j < n; ++j) {
                        double dh = cd->grad[i * n + j] * gd->data[j];
                        xd->grad[i * n + j] +=
                            (*inv_std)[i] *
                            (dh - mean_dh - (*xhat)[i * n + j] * mean_dh_h);
                    }
                }
            }
        });
    }
    return c;
}

namespace detail {

// exact GELU: x * Phi(x)
inline double gelu_scalar(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

inline double gelu_grad_scalar(double x) {
    double phi_cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    double phi_pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return phi_cdf + x * phi_pdf;
}

}  // namespace detail

inline Tensor gelu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = detail::gelu_scalar(x.data()[i]);
    bool trace = detail::tracing({&x});
    Tensor c = detail::make_result(x.shape(), std::move(out), trace);
    if (trace) {
        auto xd = x.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [xd, cd] {
            if (!xd->needs_grad) return;
            xd->ensure_grad();
            for (std::size_t i = 0; i < cd->grad.size(); ++i)
                xd->grad[i] += detail::gelu_grad_scalar(xd->data[i]) * cd->grad[i];
        });
    }
    return c;
}

// mean over rows of -log softmax(logits)[label]
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    check(logits.is_matrix(), "cross_entropy: logits must be a matrix");
    const std::size_t p = logits.rows(), nc = logits.cols();
    check(labels.size() == p, "cross_entropy: label count " +
                                  std::to_string(labels.size()) + " != rows " +
                                  std::to_string(p));
    for (int y : labels)
        check_index(y >= 0 && static_cast<std::size_t>(y) < nc,
                    "cross_entropy: label " + std::to_string(y) + " out of [0, " +
                        std::to_string(nc) + ")");
    auto probs = std::make_shared<std::vector<double>>(logits.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        double mx = logits.data()[i * nc];
        for (std::size_t j = 1; j < nc; ++j) mx = std::max(mx, logits.data()[i * nc + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < nc; ++j) {
            (*probs)[i * nc + j] = std::exp(logits.data()[i * nc + j] - mx);
            denom += (*probs)[i * nc + j];
        }
        for (std::size_t j = 0; j < nc; ++j) (*probs)[i * nc + j] /= denom;
        loss -= std::log((*probs)[i * nc + labels[i]]);
    }
    loss /= static_cast<double>(p);
    bool trace = detail::tracing({&logits});
    Tensor c = detail::make_result({1}, {loss}, trace);
    if (trace) {
        auto ld = logits.ptr(), cd = c.ptr();
        active_tape()->record({cd}, [ld, cd, probs, labels, p, nc] {
            if (!ld->needs_grad) return;
            ld->ensure_grad();
            const double g = cd->grad[0] / static_cast<double>(p);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < nc; ++j) {
                    double ind = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                    ld->grad[i * nc + j] += g * ((*probs)[i * nc + j] - ind);
                }
        });
    }
    return c;
}

// Explicit gradient zeroing; never implicit.
inline void zero_grads(const std::vector<Tensor>& params) {
    for (const auto& p : params) p.zero_grad();
}

}  // namespace cegate

#endif
