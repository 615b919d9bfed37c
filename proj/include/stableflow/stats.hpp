#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "common.hpp"
#include "special.hpp"

namespace stableflow::stats {

inline double mean(const std::vector<double>& x) {
    require(!x.empty(), "mean: empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
    require(x.size() >= 2, "variance: need at least two points");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double stddev(const std::vector<double>& x) { return std::sqrt(variance(x)); }

struct ks_result {
    double statistic = 0.0;
    double p_value = 0.0;
};

// One-sample Kolmogorov-Smirnov against a continuous CDF.
inline ks_result ks_one_sample(std::vector<double> x, const std::function<double(double)>& cdf) {
    require(!x.empty(), "ks_one_sample: empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
    }
    ks_result r;
    r.statistic = d;
    r.p_value = special::kolmogorov_sf(std::sqrt(n) * d);
    return r;
}

inline ks_result ks_two_sample(std::vector<double> x, std::vector<double> y) {
    require(!x.empty() && !y.empty(), "ks_two_sample: empty sample");
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t) ++i;
        while (j < y.size() && y[j] <= t) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    ks_result r;
    r.statistic = d;
    const double ne = nx * ny / (nx + ny);
    r.p_value = special::kolmogorov_sf(std::sqrt(ne) * d);
    return r;
}

struct chi2_result {
    double statistic = 0.0;
    double p_value = 0.0;
    int dof = 0;
};

// Goodness of fit from observed counts and expected counts (same binning).
inline chi2_result chi2_gof(const std::vector<double>& observed,
                            const std::vector<double>& expected,
                            int fitted_params = 0) {
    require(observed.size() == expected.size() && observed.size() >= 2,
            "chi2_gof: bin count mismatch");
    double s = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        require(expected[i] > 0.0, "chi2_gof: expected count must be positive");
        const double d = observed[i] - expected[i];
        s += d * d / expected[i];
        ++used;
    }
    chi2_result r;
    r.statistic = s;
    r.dof = used - 1 - fitted_params;
    require(r.dof >= 1, "chi2_gof: not enough bins for requested dof");
    r.p_value = special::chi2_sf(s, r.dof);
    return r;
}

struct line_fit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double max_residual = 0.0;
    double r2 = 0.0;
};

// Ordinary least squares y = a + b x.
inline line_fit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "fit_line: need matched samples, n >= 2");
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    require(sxx > 0.0, "fit_line: degenerate abscissae");
    line_fit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        sse += r * r;
        f.max_residual = std::max(f.max_residual, std::abs(r));
    }
    if (n > 2) f.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
    f.r2 = (syy > 0.0) ? 1.0 - sse / syy : 1.0;
    return f;
}

// Fit y ~ C x^p on log-log axes; inputs must be positive.
inline line_fit fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "fit_power_law: size mismatch");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        require(x[i] > 0.0 && y[i] > 0.0, "fit_power_law: inputs must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_line(lx, ly);
}

inline std::vector<double> histogram(const std::vector<double>& x, double lo, double hi,
                                     int bins) {
    require(bins >= 1 && hi > lo, "histogram: bad binning");
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    const double w = (hi - lo) / bins;
    for (double v : x) {
        if (v < lo || v >= hi) continue;
        auto k = static_cast<std::size_t>((v - lo) / w);
        if (k >= h.size()) k = h.size() - 1;
        h[k] += 1.0;
    }
    return h;
}

}  // namespace stableflow::stats
