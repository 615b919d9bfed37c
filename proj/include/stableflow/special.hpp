#pragma once

#include <cmath>
#include <vector>

#include "common.hpp"

namespace stableflow::special {

inline constexpr double pi = 3.141592653589793238462643383279502884;

// c(alpha) = integral over the whole real line of (1 - cos u) / |u|^{1+alpha}.
// Closed form 2*Gamma(2-alpha)*sin(pi*(1-alpha)/2) / (alpha*(1-alpha)) with a
// removable singularity at alpha = 1 where the value is pi.
inline double radial_constant(double alpha) {
    require(alpha > 0.0 && alpha < 2.0, "radial_constant: alpha must lie in (0,2)");
    const double u = 1.0 - alpha;
    const double f = (std::abs(u) < 1e-12) ? 0.5 * pi : std::sin(0.5 * pi * u) / u;
    return 2.0 * std::tgamma(2.0 - alpha) * f / alpha;
}

// E |<e, xi>|^alpha for xi uniform on the unit sphere in R^d.
inline double isotropic_direction_moment(int d, double alpha) {
    require(d >= 1, "isotropic_direction_moment: d must be >= 1");
    return std::exp(std::lgamma(0.5 * d) + std::lgamma(0.5 * (alpha + 1.0)) -
                    0.5 * std::log(pi) - std::lgamma(0.5 * (d + alpha)));
}

// Surface measure of the unit sphere S^{d-1}; counting measure (mass 2) at d=1.
inline double sphere_surface(int d) {
    require(d >= 1, "sphere_surface: d must be >= 1");
    return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

struct quadrature_rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule on [0,1]; nodes found by Newton on the Legendre
// recurrence, accurate to machine precision for n <= 64.
inline quadrature_rule gauss_legendre(int n) {
    require(n >= 1 && n <= 64, "gauss_legendre: order out of range");
    quadrature_rule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 =
                    ((2.0 * k - 1.0) * x * p1 - (static_cast<double>(k) - 1.0) * p0) /
                    static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (x + 1.0);
        rule.weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

namespace detail {

inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a,x) = Gamma(a,x)/Gamma(a).
inline double gamma_q(double a, double x) {
    require(a > 0.0 && x >= 0.0, "gamma_q: need a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

// Survival function of the chi-squared law with k degrees of freedom.
inline double chi2_sf(double x, int k) {
    require(k >= 1, "chi2_sf: k must be >= 1");
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5 * k, 0.5 * x);
}

// Survival function of the Kolmogorov distribution.
inline double kolmogorov_sf(double x) {
    if (x <= 0.0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1) ? term : -term;
        if (term < 1e-18) break;
    }
    return std::min(1.0, std::max(0.0, 2.0 * s));
}

// Upper quantile: smallest x with kolmogorov_sf(x) <= p.
inline double kolmogorov_quantile(double p) {
    require(p > 0.0 && p < 1.0, "kolmogorov_quantile: p must lie in (0,1)");
    double lo = 1e-3, hi = 4.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_sf(mid) > p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace stableflow::special
