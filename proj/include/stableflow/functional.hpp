#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "common.hpp"
#include "measure.hpp"
#include "special.hpp"
#include "stats.hpp"

namespace stableflow::model {

// A function of probability measures as coefficients consume it. Scalar form
// U(m) = int h dm, quadratic form U(m) = int int h(x-y) m(dx) m(dy), or a
// user-supplied evaluator. The flat derivative follows the normalization
// int (dU/dm)(m)(y) m(dy) = 0.
template <std::size_t D>
class measure_functional {
  public:
    enum class kind_t { scalar, convolution, custom };
    using point_fn = std::function<double(const vec<D>&)>;
    using measure_fn = std::function<double(const meas::empirical_measure<D>&)>;
    using deriv_fn = std::function<double(const meas::empirical_measure<D>&, const vec<D>&)>;

    static measure_functional scalar(point_fn h) {
        measure_functional f;
        f.kind_ = kind_t::scalar;
        f.h_ = std::move(h);
        return f;
    }

    static measure_functional convolution(point_fn h) {
        measure_functional f;
        f.kind_ = kind_t::convolution;
        f.h_ = std::move(h);
        return f;
    }

    static measure_functional custom(measure_fn evaluator, deriv_fn flat = {}) {
        measure_functional f;
        f.kind_ = kind_t::custom;
        f.eval_ = std::move(evaluator);
        f.deriv_ = std::move(flat);
        return f;
    }

    kind_t kind() const { return kind_; }
    bool depends_on_state() const { return kind_ == kind_t::convolution; }
    bool has_flat_derivative() const { return kind_ != kind_t::custom || bool(deriv_); }

    double value(const meas::empirical_measure<D>& m) const {
        switch (kind_) {
            case kind_t::scalar:
                return m.integrate([this](const vec<D>& y) { return h_(y); });
            case kind_t::convolution: {
                double s = 0.0;
                for (std::size_t i = 0; i < m.size(); ++i)
                    for (std::size_t j = 0; j < m.size(); ++j)
                        s += m.weights[i] * m.weights[j] * h_(sub(m.points[i], m.points[j]));
                return s;
            }
            case kind_t::custom:
                return eval_(m);
        }
        return 0.0;
    }

    // The number coefficients read: scalar/custom ignore x, the convolution
    // kind evaluates the field (h * m)(x).
    double field_value(const meas::empirical_measure<D>& m, const vec<D>& x) const {
        if (kind_ != kind_t::convolution) return value(m);
        double s = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            s += m.weights[i] * h_(sub(x, m.points[i]));
        return s;
    }

    double flat_derivative(const meas::empirical_measure<D>& m, const vec<D>& y) const {
        switch (kind_) {
            case kind_t::scalar:
                return h_(y) - value(m);
            case kind_t::convolution: {
                double s = 0.0;
                for (std::size_t i = 0; i < m.size(); ++i)
                    s += m.weights[i] * (h_(sub(m.points[i], y)) + h_(sub(y, m.points[i])));
                return s - 2.0 * value(m);
            }
            case kind_t::custom:
                if (!deriv_)
                    throw std::invalid_argument(
                        "measure_functional: custom variant has no flat derivative");
                return deriv_(m, y);
        }
        return 0.0;
    }

  private:
    kind_t kind_ = kind_t::custom;
    point_fn h_;
    measure_fn eval_;
    deriv_fn deriv_;
};

// convex mixture (1-lambda) m + lambda m'
template <std::size_t D>
meas::empirical_measure<D> mix(const meas::empirical_measure<D>& m,
                               const meas::empirical_measure<D>& mp, double lambda) {
    require(lambda >= 0.0 && lambda <= 1.0, "mix: lambda outside [0,1]");
    std::vector<vec<D>> pts;
    std::vector<double> w;
    pts.reserve(m.size() + mp.size());
    w.reserve(m.size() + mp.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        pts.push_back(m.points[i]);
        w.push_back((1.0 - lambda) * m.weights[i]);
    }
    for (std::size_t i = 0; i < mp.size(); ++i) {
        pts.push_back(mp.points[i]);
        w.push_back(lambda * mp.weights[i]);
    }
    return meas::empirical_measure<D>::from_points(std::move(pts), std::move(w));
}

struct derivative_report {
    std::vector<double> eps;
    std::vector<double> error;  // |difference quotient - flat-derivative pairing|
    double slope = 0.0;         // log-log order of the error, 0 when at the floor
    bool linear_exact = false;  // every error at the floor: U is linear in m
    double taylor_residual = std::numeric_limits<double>::quiet_NaN();
};

// Difference-quotient vs pairing check of the flat derivative, plus the
// integrated first-order identity
//   U(m') - U(m) = int_0^1 int (dU/dm)((1-l)m + lm')(y) (m'-m)(dy) dl
// evaluated with 16-point Gauss-Legendre in l.
template <std::size_t D>
derivative_report check_flat_derivative(const measure_functional<D>& u,
                                        const meas::empirical_measure<D>& m,
                                        const meas::empirical_measure<D>& mp,
                                        const std::vector<double>& eps_schedule) {
    require(u.has_flat_derivative(), "check_flat_derivative: no flat derivative");
    require(!eps_schedule.empty(), "check_flat_derivative: empty schedule");
    derivative_report rep;

    const auto pairing_at = [&](const meas::empirical_measure<D>& base) {
        double s = 0.0;
        for (std::size_t i = 0; i < mp.size(); ++i)
            s += mp.weights[i] * u.flat_derivative(base, mp.points[i]);
        for (std::size_t i = 0; i < m.size(); ++i)
            s -= m.weights[i] * u.flat_derivative(base, m.points[i]);
        return s;
    };

    const double u0 = u.value(m);
    const double pairing = pairing_at(m);
    double scale = std::max(1.0, std::abs(u0));
    for (const double eps : eps_schedule) {
        require(eps > 0.0 && eps <= 1.0, "check_flat_derivative: eps outside (0,1]");
        const double quotient = (u.value(mix(m, mp, eps)) - u0) / eps;
        rep.eps.push_back(eps);
        rep.error.push_back(std::abs(quotient - pairing));
    }

    // the quotient cancels eps out of the numerator, so its floating-point
    // floor grows like scale / eps
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < rep.eps.size(); ++k) {
        if (rep.error[k] > 64.0 * std::numeric_limits<double>::epsilon() * scale / rep.eps[k]) {
            lx.push_back(std::log(rep.eps[k]));
            ly.push_back(std::log(rep.error[k]));
        }
    }
    rep.linear_exact = lx.empty();
    if (lx.size() >= 2) rep.slope = stats::fit_line(lx, ly).slope;

    const auto rule = special::gauss_legendre(16);
    double integral = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q)
        integral += rule.weights[q] * pairing_at(mix(m, mp, rule.nodes[q]));
    rep.taylor_residual = std::abs(u.value(mp) - u0 - integral);
    return rep;
}

}  // namespace stableflow::model
