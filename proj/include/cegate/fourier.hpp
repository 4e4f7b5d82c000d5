#ifndef CEGATE_FOURIER_HPP
#define CEGATE_FOURIER_HPP

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "cegate/check.hpp"

namespace cegate {

struct ComplexGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> real;
    std::vector<double> imag;
};

struct RealGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;
};

// Naive O(g^4) 2-D DFT; grids are small (<= 32x32) so this is fine.
inline ComplexGrid dft2(const RealGrid& x) {
    check(x.height == x.width, "dft2: grid must be square, got " +
                                   std::to_string(x.height) + "x" +
                                   std::to_string(x.width));
    check(x.height >= 1, "dft2: empty grid");
    check(x.values.size() == x.height * x.width, "dft2: value count mismatch");
    const std::size_t g = x.height;
    ComplexGrid out{g, g, std::vector<double>(g * g, 0.0), std::vector<double>(g * g, 0.0)};
    const double w0 = -2.0 * std::numbers::pi / static_cast<double>(g);
    for (std::size_t u = 0; u < g; ++u)
        for (std::size_t v = 0; v < g; ++v) {
            double re = 0.0, im = 0.0;
            for (std::size_t m = 0; m < g; ++m)
                for (std::size_t n = 0; n < g; ++n) {
                    double ang = w0 * static_cast<double>(u * m + v * n);
                    double val = x.values[m * g + n];
                    re += val * std::cos(ang);
                    im += val * std::sin(ang);
                }
            out.real[u * g + v] = re;
            out.imag[u * g + v] = im;
        }
    return out;
}

// Inverse transform; returns the real part (inputs are expected to be
// conjugate-symmetric spectra of real grids).
inline RealGrid idft2(const ComplexGrid& f) {
    check(f.height == f.width, "idft2: grid must be square");
    check(f.real.size() == f.imag.size() && f.real.size() == f.height * f.width,
          "idft2: buffer size mismatch");
    const std::size_t g = f.height;
    RealGrid out{g, g, std::vector<double>(g * g, 0.0)};
    const double w0 = 2.0 * std::numbers::pi / static_cast<double>(g);
    const double norm = 1.0 / static_cast<double>(g * g);
    for (std::size_t m = 0; m < g; ++m)
        for (std::size_t n = 0; n < g; ++n) {
            double acc = 0.0;
            for (std::size_t u = 0; u < g; ++u)
                for (std::size_t v = 0; v < g; ++v) {
                    double ang = w0 * static_cast<double>(u * m + v * n);
                    acc += f.real[u * g + v] * std::cos(ang) -
                           f.imag[u * g + v] * std::sin(ang);
                }
            out.values[m * g + n] = acc * norm;
        }
    return out;
}

// DC-centered frequency coordinate of bin index k in [0, g).
inline long centered_freq(std::size_t k, std::size_t g) {
    long lk = static_cast<long>(k);
    long lg = static_cast<long>(g);
    return (lk <= lg / 2) ? lk : lk - lg;
}

// Square low-pass mask: bin (u, v) kept iff max(|u_c|, |v_c|) <= rho * (g/2).
// Symmetric under frequency negation, so low/high masks partition the bins.
inline std::vector<bool> low_pass_mask(std::size_t g, double rho) {
    check(rho > 0.0 && rho < 1.0, "low_pass_mask: rho must be in (0, 1)");
    const double cutoff = rho * (static_cast<double>(g) / 2.0);
    std::vector<bool> mask(g * g, false);
    for (std::size_t u = 0; u < g; ++u)
        for (std::size_t v = 0; v < g; ++v) {
            double fu = std::abs(static_cast<double>(centered_freq(u, g)));
            double fv = std::abs(static_cast<double>(centered_freq(v, g)));
            mask[u * g + v] = std::max(fu, fv) <= cutoff;
        }
    return mask;
}

// Low-pass projection of a real square grid (DFT -> mask -> inverse DFT).
// The operator is a symmetric projection, so it is its own adjoint.
inline RealGrid low_pass_filter(const RealGrid& x, const std::vector<bool>& mask) {
    ComplexGrid f = dft2(x);
    check(mask.size() == f.real.size(), "low_pass_filter: mask size mismatch");
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) {
            f.real[i] = 0.0;
            f.imag[i] = 0.0;
        }
    return idft2(f);
}

}  // namespace cegate

#endif
