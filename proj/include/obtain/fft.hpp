#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "obtain/errors.hpp"

namespace obtain {

/// In-place iterative radix-2 Cooley-Tukey transform.
/// Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw InputError("fft size must be a nonzero power of two");
    }

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

/// Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (N-1)). Used for the
/// FIR smoother taps.
inline std::vector<double> hamming_window(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) {
        return w;
    }
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.54 - 0.46 * std::cos(step * static_cast<double>(i));
    }
    return w;
}

/// Periodic (DFT-even) Hamming window, 0.54 - 0.46 cos(2 pi n / N). Used as
/// the spectral analysis window: a DC input then leaks into bin 1 only.
inline std::vector<double> hamming_window_periodic(std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (n < 2) {
        return w;
    }
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.54 - 0.46 * std::cos(step * static_cast<double>(i));
    }
    return w;
}

} // namespace obtain
