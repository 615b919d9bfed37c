#pragma once

// Independent numerical oracles used by the tests. Everything here is
// deliberately written against the definitions, not against the library
// implementation paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

inline constexpr double pi = 3.141592653589793238462643383279502884;

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = simpson(f, a, m, fa, flm, fm);
    const double right = simpson(f, m, b, fm, frm, fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-11) {
    const double m = 0.5 * (a + b);
    const double fa = f(a), fm = f(m), fb = f(b);
    return detail::adaptive_step(f, a, b, fa, fm, fb, detail::simpson(f, a, b, fa, fm, fb), tol,
                                 48);
}

// integral over the whole real line of (1 - cos u)/|u|^{1+alpha}, assembled
// from a power-series piece near zero, adaptive quadrature over decades, and
// the exact monotone tail with the oscillatory remainder dropped (its size is
// below 3e-4 * A^{-alpha} at A = 1e4).
inline double radial_constant(double alpha) {
    const auto f = [alpha](double u) {
        return (1.0 - std::cos(u)) * std::pow(u, -1.0 - alpha);
    };
    const double eps = 1e-6;
    double head = std::pow(eps, 2.0 - alpha) / (2.0 * (2.0 - alpha)) -
                  std::pow(eps, 4.0 - alpha) / (24.0 * (4.0 - alpha));
    double body = 0.0;
    double lo = eps;
    const double cap = 1e4;
    while (lo < cap) {
        const double hi = std::min(cap, lo * 10.0);
        body += integrate(f, lo, hi, 1e-13);
        lo = hi;
    }
    const double tail = std::pow(cap, -alpha) / alpha;
    return 2.0 * (head + body + tail);
}

// E |cos(theta)|^alpha for theta uniform on the circle.
inline double circle_moment(double alpha) {
    const auto f = [alpha](double t) { return std::pow(std::cos(t), alpha); };
    return 2.0 / pi * integrate(f, 0.0, 0.5 * pi - 1e-12, 1e-13);
}

// Plain dense-tableau simplex for max c.x subject to A x <= b, x >= 0 with
// b >= 0, Bland's rule throughout. Only meant for tiny cross-check instances.
inline double tableau_simplex_max(const std::vector<std::vector<double>>& a,
                                  const std::vector<double>& b, const std::vector<double>& c) {
    const std::size_t m = a.size(), k = c.size();
    const std::size_t cols = k + m + 1;
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t j = 0; j < k; ++j) t[r][j] = a[r][j];
        t[r][k + r] = 1.0;
        t[r][cols - 1] = b[r];
    }
    for (std::size_t j = 0; j < k; ++j) t[m][j] = -c[j];
    std::vector<std::size_t> basis(m);
    for (std::size_t r = 0; r < m; ++r) basis[r] = k + r;

    for (long iter = 0; iter < 2000000; ++iter) {
        std::size_t enter = cols - 1;
        for (std::size_t j = 0; j + 1 < cols; ++j) {
            if (t[m][j] < -1e-9) {
                enter = j;
                break;
            }
        }
        if (enter == cols - 1) return t[m][cols - 1];
        std::size_t leave = m;
        double best = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            if (t[r][enter] <= 1e-11) continue;
            const double ratio = t[r][cols - 1] / t[r][enter];
            if (leave == m || ratio < best - 1e-13 ||
                (ratio < best + 1e-13 && basis[r] < basis[leave])) {
                best = ratio;
                leave = r;
            }
        }
        if (leave == m) throw std::runtime_error("tableau oracle: unbounded");
        const double piv = t[leave][enter];
        for (std::size_t j = 0; j < cols; ++j) t[leave][j] /= piv;
        for (std::size_t r = 0; r <= m; ++r) {
            if (r == leave) continue;
            const double f = t[r][enter];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) t[r][j] -= f * t[leave][j];
        }
        basis[leave] = enter;
    }
    throw std::runtime_error("tableau oracle: iteration cap");
}

// Exact optimal transport on tiny instances by enumerating every spanning
// tree of the bipartite support graph and solving the flow equations densely.
inline double ot_bruteforce(const std::vector<double>& a, const std::vector<double>& b,
                            const std::vector<double>& cost) {
    const std::size_t n = a.size(), m = b.size();
    const std::size_t cells = n * m, need = n + m - 1;
    if (cells > 20) throw std::runtime_error("ot oracle: instance too large");
    double best = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << cells); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != need) continue;
        std::vector<std::size_t> parent(n + m);
        for (std::size_t v = 0; v < n + m; ++v) parent[v] = v;
        const std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
            while (parent[v] != v) v = parent[v] = parent[parent[v]];
            return v;
        };
        bool acyclic = true;
        std::vector<std::size_t> edge;
        for (std::size_t e = 0; e < cells && acyclic; ++e) {
            if (!(mask & (1u << e))) continue;
            const std::size_t i = e / m, j = n + e % m;
            const std::size_t ri = find(i), rj = find(j);
            if (ri == rj)
                acyclic = false;
            else {
                parent[ri] = rj;
                edge.push_back(e);
            }
        }
        if (!acyclic) continue;

        // flow equations: one row per supply, per demand but the last
        std::vector<std::vector<double>> sys(need, std::vector<double>(need + 1, 0.0));
        for (std::size_t t = 0; t < need; ++t) {
            const std::size_t i = edge[t] / m, j = edge[t] % m;
            sys[i][t] = 1.0;
            if (j + 1 < m) sys[n + j][t] = 1.0;
        }
        for (std::size_t i = 0; i < n; ++i) sys[i][need] = a[i];
        for (std::size_t j = 0; j + 1 < m; ++j) sys[n + j][need] = b[j];

        bool ok = true;
        for (std::size_t col = 0; col < need && ok; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < need; ++r)
                if (std::abs(sys[r][col]) > std::abs(sys[piv][col])) piv = r;
            if (std::abs(sys[piv][col]) < 1e-12) {
                ok = false;
                break;
            }
            std::swap(sys[piv], sys[col]);
            for (std::size_t r = 0; r < need; ++r) {
                if (r == col) continue;
                const double f = sys[r][col] / sys[col][col];
                if (f == 0.0) continue;
                for (std::size_t cc = col; cc <= need; ++cc) sys[r][cc] -= f * sys[col][cc];
            }
        }
        if (!ok) continue;
        double value = 0.0;
        for (std::size_t t = 0; t < need && ok; ++t) {
            const double flow = sys[t][need] / sys[t][t];
            if (flow < -1e-9) ok = false;
            value += std::max(0.0, flow) * cost[edge[t]];
        }
        if (ok) best = std::min(best, value);
    }
    if (!std::isfinite(best)) throw std::runtime_error("ot oracle: no feasible tree");
    return best;
}

}  // namespace oracle
