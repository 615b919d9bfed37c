#pragma once

#include <complex>
#include <vector>

#include "common.hpp"
#include "special.hpp"

namespace stableflow::fft {

using cd = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey. inverse=true applies the conjugate transform
// and divides by n, so forward followed by inverse is the identity.
inline void transform(std::vector<cd>& a, bool inverse) {
    const std::size_t n = a.size();
    require(is_pow2(n), "fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * special::pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / static_cast<double>(n);
        for (auto& z : a) z *= inv;
    }
}

// Separable transform of a row-major array with extents dims[0] x dims[1] x ...
inline void transform_nd(std::vector<cd>& a, const std::vector<std::size_t>& dims,
                         bool inverse) {
    std::size_t total = 1;
    for (std::size_t d : dims) {
        require(is_pow2(d), "fft: every extent must be a power of two");
        total *= d;
    }
    require(a.size() == total, "fft: array size does not match extents");
    std::size_t stride = 1;
    for (std::size_t axis = dims.size(); axis-- > 0;) {
        const std::size_t n = dims[axis];
        std::vector<cd> line(n);
        const std::size_t block = stride * n;
        for (std::size_t base = 0; base < total; base += block) {
            for (std::size_t off = 0; off < stride; ++off) {
                for (std::size_t k = 0; k < n; ++k) line[k] = a[base + off + k * stride];
                transform(line, inverse);
                for (std::size_t k = 0; k < n; ++k) a[base + off + k * stride] = line[k];
            }
        }
        stride *= n;
    }
}

}  // namespace stableflow::fft
