#ifndef CEGATE_TEST_ORACLES_HPP
#define CEGATE_TEST_ORACLES_HPP

// Independent scalar-level oracles used to freeze expected values in tests.
// Nothing here may call into the tensor op implementations it checks.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "cegate/rng.hpp"
#include "cegate/tensor.hpp"

namespace oracle {

inline std::vector<double> softmax(const std::vector<double>& x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    std::vector<double> e(x.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e[i] = std::exp(x[i] - mx);
        denom += e[i];
    }
    for (auto& v : e) v /= denom;
    return e;
}

inline double log_softmax_at(const std::vector<double>& x, std::size_t idx) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double denom = 0.0;
    for (double v : x) denom += std::exp(v - mx);
    return (x[idx] - mx) - std::log(denom);
}

inline std::vector<double> layer_norm_row(const std::vector<double>& x,
                                          const std::vector<double>& gamma,
                                          const std::vector<double>& beta,
                                          double eps) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = gamma[j] * (x[j] - mean) / std::sqrt(var + eps) + beta[j];
    return out;
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

// Plain double-loop matrices for oracle-side computations.
using Mat = std::vector<std::vector<double>>;

inline Mat mat(std::size_t r, std::size_t c, double v = 0.0) {
    return Mat(r, std::vector<double>(c, v));
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c = mat(a.size(), b[0].size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j)
                c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline Mat from_tensor(const cegate::Tensor& t) {
    Mat m = mat(t.rows(), t.cols());
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
    return m;
}

// Central finite differences on one scalar slot of a parameter.
inline double fd_grad(const std::function<double()>& loss_value, double& slot,
                      double step = 1e-5) {
    const double saved = slot;
    slot = saved + step;
    double up = loss_value();
    slot = saved - step;
    double down = loss_value();
    slot = saved;
    return (up - down) / (2.0 * step);
}

struct GradCheck {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Runs one taped forward/backward via make_loss, then sweeps every slot of
// every parameter with central differences. make_loss must be a pure function
// of the current parameter values.
inline GradCheck check_gradients(const std::vector<cegate::Tensor>& params,
                                 const std::function<cegate::Tensor()>& make_loss,
                                 double step = 1e-5) {
    cegate::Tape tape;
    cegate::Tensor loss;
    {
        cegate::TapeScope scope(tape);
        loss = make_loss();
    }
    std::vector<std::vector<double>> autodiff;
    for (auto p : params) p.zero_grad();
    tape.backward(loss);
    for (const auto& p : params)
        autodiff.push_back(p.has_grad() ? p.grad()
                                        : std::vector<double>(p.size(), 0.0));

    auto loss_value = [&] { return make_loss().value(); };
    GradCheck result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            double fd = fd_grad(loss_value, p.data()[i], step);
            double ad = autodiff[pi][i];
            double scale = std::max(std::abs(ad), std::abs(fd));
            if (scale > 1e-6)
                result.max_rel_err = std::max(result.max_rel_err,
                                              std::abs(ad - fd) / scale);
            ++result.checked;
        }
    }
    return result;
}

// Independent scalar reimplementation of a single-head pre-norm transformer
// block, for checking block_forward at d=4, heads=1.
struct BlockWeightsOracle {
    Mat wq, wk, wv, wo, w1, w2;
    std::vector<double> bq, bk, bv, bo, b1, b2;
    std::vector<double> ln1g, ln1b, ln2g, ln2b;
};

inline Mat affine(const Mat& x, const Mat& w, const std::vector<double>& b) {
    Mat y = matmul(x, w);
    for (auto& row : y)
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    return y;
}

inline Mat ln_rows(const Mat& x, const std::vector<double>& g,
                   const std::vector<double>& b, double eps = 1e-5) {
    Mat y = x;
    for (auto& row : y) row = layer_norm_row(row, g, b, eps);
    return y;
}

inline Mat block_forward_oracle(const BlockWeightsOracle& w, const Mat& x) {
    const std::size_t l = x.size(), d = x[0].size();
    Mat h = ln_rows(x, w.ln1g, w.ln1b);
    Mat q = affine(h, w.wq, w.bq);
    Mat k = affine(h, w.wk, w.bk);
    Mat v = affine(h, w.wv, w.bv);
    Mat scores = mat(l, l);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < d; ++p) s += q[i][p] * k[j][p];
            scores[i][j] = s / std::sqrt(static_cast<double>(d));
        }
    for (auto& row : scores) row = softmax(row);
    Mat attn = matmul(scores, v);
    Mat msa = affine(attn, w.wo, w.bo);
    Mat t_attn = x;
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < d; ++j) t_attn[i][j] += msa[i][j];
    Mat h2 = ln_rows(t_attn, w.ln2g, w.ln2b);
    Mat pre = affine(h2, w.w1, w.b1);
    for (auto& row : pre)
        for (auto& vv : row) vv = gelu(vv);
    Mat mlp = affine(pre, w.w2, w.b2);
    Mat out = t_attn;
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i][j] += mlp[i][j];
    return out;
}

// Scalar bottleneck adapter: GELU(t.Wd).Wu
inline Mat bottleneck_oracle(const Mat& t, const Mat& wd, const Mat& wu) {
    Mat h = matmul(t, wd);
    for (auto& row : h)
        for (auto& v : row) v = gelu(v);
    return matmul(h, wu);
}

inline cegate::Tensor random_tensor(cegate::Shape shape, cegate::Rng& rng,
                                    double lo = -1.0, double hi = 1.0,
                                    bool requires_grad = false) {
    std::vector<double> v(cegate::numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return cegate::Tensor(std::move(shape), std::move(v), requires_grad);
}

}  // namespace oracle

#endif
