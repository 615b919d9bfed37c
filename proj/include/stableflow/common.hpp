#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace stableflow {

template <std::size_t D>
using vec = std::array<double, D>;

// Row-major square matrix, fixed dimension.
template <std::size_t D>
using mat = std::array<std::array<double, D>, D>;

template <std::size_t D>
inline vec<D> zero_vec() {
    vec<D> v{};
    v.fill(0.0);
    return v;
}

template <std::size_t D>
inline mat<D> identity() {
    mat<D> m{};
    for (std::size_t i = 0; i < D; ++i) {
        m[i].fill(0.0);
        m[i][i] = 1.0;
    }
    return m;
}

template <std::size_t D>
inline mat<D> scaled_identity(double s) {
    mat<D> m = identity<D>();
    for (std::size_t i = 0; i < D; ++i) m[i][i] = s;
    return m;
}

template <std::size_t D>
inline vec<D> add(const vec<D>& a, const vec<D>& b) {
    vec<D> r;
    for (std::size_t i = 0; i < D; ++i) r[i] = a[i] + b[i];
    return r;
}

template <std::size_t D>
inline vec<D> sub(const vec<D>& a, const vec<D>& b) {
    vec<D> r;
    for (std::size_t i = 0; i < D; ++i) r[i] = a[i] - b[i];
    return r;
}

template <std::size_t D>
inline vec<D> scale(const vec<D>& a, double s) {
    vec<D> r;
    for (std::size_t i = 0; i < D; ++i) r[i] = a[i] * s;
    return r;
}

template <std::size_t D>
inline double dot(const vec<D>& a, const vec<D>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < D; ++i) s += a[i] * b[i];
    return s;
}

template <std::size_t D>
inline double norm2(const vec<D>& a) {
    return std::sqrt(dot(a, a));
}

template <std::size_t D>
inline vec<D> matvec(const mat<D>& m, const vec<D>& x) {
    vec<D> r;
    for (std::size_t i = 0; i < D; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < D; ++j) s += m[i][j] * x[j];
        r[i] = s;
    }
    return r;
}

// y = sigma^T zeta, needed for characteristic functions of pushed-forward noise.
template <std::size_t D>
inline vec<D> mat_t_vec(const mat<D>& m, const vec<D>& x) {
    vec<D> r;
    for (std::size_t j = 0; j < D; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < D; ++i) s += m[i][j] * x[i];
        r[j] = s;
    }
    return r;
}

template <std::size_t D>
inline bool all_finite(const vec<D>& v) {
    for (std::size_t i = 0; i < D; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw std::invalid_argument(what);
}

}  // namespace stableflow
