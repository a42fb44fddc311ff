// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace bpcalc {

using cdouble = std::complex<double>;

namespace fft_detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place.  sign = -1 forward, +1 inverse
// (inverse is unnormalized; callers scale).  Deterministic summation order.
inline void transform_pow2(cdouble* a, std::size_t n, int sign)
{
    if (!is_pow2(n))
        throw std::invalid_argument("fft: length must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * pi / double(len);
        const cdouble wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cdouble w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                cdouble u = a[i + k];
                cdouble v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

} // namespace fft_detail

// Forward DFT: X_k = sum_m x_m e^{-2 pi i k m / N}.
inline void fft_forward(std::vector<cdouble>& a)
{
    fft_detail::transform_pow2(a.data(), a.size(), -1);
}

// Inverse DFT including the 1/N factor: x_m = (1/N) sum_k X_k e^{+2 pi i k m / N}.
inline void fft_inverse(std::vector<cdouble>& a)
{
    fft_detail::transform_pow2(a.data(), a.size(), +1);
    const double inv = 1.0 / double(a.size());
    for (auto& v : a) v *= inv;
}

// n-dimensional transforms on a row-major array with power-of-two extents.
// Applies the 1-d transform along every axis.
inline void fft_nd(std::vector<cdouble>& a, const std::vector<std::size_t>& extents, int sign)
{
    std::size_t total = 1;
    for (auto e : extents) total *= e;
    if (total != a.size())
        throw std::invalid_argument("fft_nd: extents do not match data size");
    const std::size_t dims = extents.size();
    std::vector<cdouble> line;
    std::size_t stride = 1; // stride of the last axis is 1 in row-major
    for (std::size_t axis = dims; axis-- > 0;) {
        const std::size_t n = extents[axis];
        line.resize(n);
        const std::size_t block = stride * n;
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t i = 0; i < n; ++i) line[i] = a[base + off + i * stride];
                fft_detail::transform_pow2(line.data(), n, sign);
                for (std::size_t i = 0; i < n; ++i) a[base + off + i * stride] = line[i];
            }
        }
        stride *= n;
    }
}

inline void fft_nd_forward(std::vector<cdouble>& a, const std::vector<std::size_t>& extents)
{
    fft_nd(a, extents, -1);
}

inline void fft_nd_inverse(std::vector<cdouble>& a, const std::vector<std::size_t>& extents)
{
    fft_nd(a, extents, +1);
    std::size_t total = 1;
    for (auto e : extents) total *= e;
    const double inv = 1.0 / double(total);
    for (auto& v : a) v *= inv;
}

} // namespace bpcalc
