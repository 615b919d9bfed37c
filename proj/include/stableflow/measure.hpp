#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "common.hpp"

namespace stableflow::meas {

template <std::size_t D>
struct empirical_measure {
    std::vector<vec<D>> points;
    std::vector<double> weights;

    static empirical_measure dirac(const vec<D>& x) { return from_points({x}, {1.0}); }

    static empirical_measure from_points(std::vector<vec<D>> pts, std::vector<double> w) {
        empirical_measure m;
        m.points = std::move(pts);
        m.weights = std::move(w);
        m.validate();
        return m;
    }

    static empirical_measure equal_weights(std::vector<vec<D>> pts) {
        const std::size_t n = pts.size();
        return from_points(std::move(pts), std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    std::size_t size() const { return points.size(); }

    void validate() const {
        require(!points.empty(), "empirical_measure: no support points");
        require(points.size() == weights.size(), "empirical_measure: size mismatch");
        double s = 0.0, comp = 0.0;  // compensated: the check must not drown in roundoff
        for (std::size_t i = 0; i < points.size(); ++i) {
            require(all_finite(points[i]), "empirical_measure: non-finite point");
            require(weights[i] >= 0.0, "empirical_measure: negative weight");
            const double y = weights[i] - comp;
            const double t = s + y;
            comp = (t - s) - y;
            s = t;
        }
        require(std::abs(s - 1.0) <= 1e-12, "empirical_measure: weights must sum to 1");
    }

    // Merge duplicate locations (weights add) and drop zero-weight atoms.
    empirical_measure consolidated() const {
        empirical_measure out;
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (weights[i] == 0.0) continue;
            bool merged = false;
            for (std::size_t j = 0; j < out.points.size(); ++j) {
                if (out.points[j] == points[i]) {
                    out.weights[j] += weights[i];
                    merged = true;
                    break;
                }
            }
            if (!merged) {
                out.points.push_back(points[i]);
                out.weights.push_back(weights[i]);
            }
        }
        if (out.points.empty()) {  // all-zero weights cannot happen for a valid measure
            out.points.push_back(points.front());
            out.weights.push_back(0.0);
        }
        return out;
    }

    // Mean of h over the measure.
    template <typename F>
    double integrate(F&& h) const {
        double s = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) s += weights[i] * h(points[i]);
        return s;
    }

    vec<D> mean() const {
        vec<D> m = zero_vec<D>();
        for (std::size_t i = 0; i < points.size(); ++i)
            m = add(m, scale(points[i], weights[i]));
        return m;
    }
};

// Signed difference mu - nu on the union of supports, duplicates merged and
// exact cancellations dropped. Dropping zero-weight union points is lossless
// for the Hoelder-dual value: a feasible f on the reduced support extends to
// the full space with the same norm.
template <std::size_t D>
struct signed_support {
    std::vector<vec<D>> points;
    std::vector<double> weights;  // mu weight minus nu weight
};

template <std::size_t D>
signed_support<D> support_difference(const empirical_measure<D>& mu,
                                     const empirical_measure<D>& nu) {
    signed_support<D> s;
    auto push = [&](const vec<D>& p, double w) {
        for (std::size_t j = 0; j < s.points.size(); ++j) {
            if (s.points[j] == p) {
                s.weights[j] += w;
                return;
            }
        }
        s.points.push_back(p);
        s.weights.push_back(w);
    };
    for (std::size_t i = 0; i < mu.points.size(); ++i) push(mu.points[i], mu.weights[i]);
    for (std::size_t i = 0; i < nu.points.size(); ++i) push(nu.points[i], -nu.weights[i]);
    std::size_t kept = 0;
    for (std::size_t j = 0; j < s.points.size(); ++j) {
        if (std::abs(s.weights[j]) < 1e-15) continue;
        s.points[kept] = s.points[j];
        s.weights[kept] = s.weights[j];
        ++kept;
    }
    s.points.resize(kept);
    s.weights.resize(kept);
    return s;
}

template <std::size_t D>
struct measure_flow {
    std::vector<double> times;
    std::vector<empirical_measure<D>> marginals;
    bool initial_fixed = false;

    void validate() const {
        require(!times.empty() && times.size() == marginals.size(),
                "measure_flow: grid/marginal mismatch");
        for (std::size_t k = 1; k < times.size(); ++k)
            require(times[k] > times[k - 1], "measure_flow: grid must be strictly increasing");
        for (const auto& m : marginals) m.validate();
    }

    // restriction to the first k+1 nodes
    measure_flow prefix(std::size_t k) const {
        require(k < times.size(), "measure_flow: prefix index out of range");
        measure_flow out;
        out.times.assign(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        out.marginals.assign(marginals.begin(),
                             marginals.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        out.initial_fixed = initial_fixed;
        return out;
    }
};

}  // namespace stableflow::meas
