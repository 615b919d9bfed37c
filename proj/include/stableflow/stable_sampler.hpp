#pragma once

#include <cmath>

#include "common.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "spectral.hpp"

namespace stableflow::noise {

// Symmetric alpha-stable scalar with E e^{iuX} = exp(-|u|^alpha)
// (Chambers-Mallows-Stuck). Continuous through alpha = 1 where it reduces to
// tan(V), a standard Cauchy.
inline double sample_sym_stable(double alpha, rng::philox_engine& gen) {
    require(alpha > 0.0 && alpha < 2.0, "sample_sym_stable: alpha must lie in (0,2)");
    const double v = gen.uniform(-0.5 * special::pi, 0.5 * special::pi);
    const double e = gen.exponential();
    const double s = std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha);
    const double t = std::pow(std::cos((1.0 - alpha) * v) / e, (1.0 - alpha) / alpha);
    return s * t;
}

// Positive beta-stable with Laplace transform E e^{-uS} = exp(-u^beta),
// beta in (0,1) (Zolotarev-Kanter). Evaluated in log space.
inline double sample_pos_stable(double beta, rng::philox_engine& gen) {
    require(beta > 0.0 && beta < 1.0, "sample_pos_stable: beta must lie in (0,1)");
    const double th = special::pi * gen.uniform01();
    const double e = gen.exponential();
    const double log_b = (beta * std::log(std::sin(beta * th)) +
                          (1.0 - beta) * std::log(std::sin((1.0 - beta) * th)) -
                          std::log(std::sin(th))) /
                         (1.0 - beta);
    return std::exp((1.0 - beta) / beta * (log_b - std::log(e)));
}

template <std::size_t D>
inline vec<D> sample_unit_sphere(rng::philox_engine& gen) {
    if constexpr (D == 1) {
        return vec<1>{gen.uniform01() < 0.5 ? -1.0 : 1.0};
    } else {
        vec<D> g{};
        double n2;
        do {
            for (std::size_t i = 0; i < D; ++i) g[i] = gen.normal();
            n2 = norm2(g);
        } while (n2 < 1e-12);
        return scale(g, 1.0 / n2);
    }
}

// Draw a direction from the normalized spectral measure.
template <std::size_t D>
vec<D> sample_direction(const spectral_measure<D>& spec, rng::philox_engine& gen) {
    if (spec.variant == spectral_measure<D>::kind::atomic) {
        double total = 0.0;
        for (const auto& a : spec.atoms) total += a.weight;
        double u = gen.uniform01() * total;
        for (const auto& a : spec.atoms) {
            u -= a.weight;
            if (u <= 0.0) return a.direction;
        }
        return spec.atoms.back().direction;
    }
    if (spec.is_uniform()) return sample_unit_sphere<D>(gen);
    if constexpr (D == 2) {
        double gmax = 0.0;
        for (double v : spec.angle_density) gmax = std::max(gmax, v);
        for (;;) {
            const double th = gen.uniform(0.0, 2.0 * special::pi);
            if (gen.uniform01() * gmax <= spec.shape_at_angle(th))
                return vec<2>{std::cos(th), std::sin(th)};
        }
    }
    throw std::invalid_argument("sample_direction: tabulated density requires d = 2");
}

namespace detail {

// Exact atomic draw: independent one-dimensional symmetric stable components
// along each atom; the exponent is additive over atoms.
template <std::size_t D>
vec<D> sample_atomic(const stable_params<D>& params, const spectral_measure<D>& spec, double dt,
                     rng::philox_engine& gen) {
    const double c = special::radial_constant(params.alpha);
    vec<D> x = zero_vec<D>();
    for (const auto& a : spec.atoms) {
        const double sigma = std::pow(dt * c * a.weight, 1.0 / params.alpha);
        x = add(x, scale(a.direction, sigma * sample_sym_stable(params.alpha, gen)));
    }
    return x;
}

// Exact rotation-invariant draw via subordination: sqrt(2S) times a standard
// Gaussian vector, S positive alpha/2-stable scaled to the target exponent.
template <std::size_t D>
vec<D> sample_isotropic(const stable_params<D>& params, const spectral_measure<D>& spec,
                        double dt, rng::philox_engine& gen) {
    const double gamma_alpha = special::radial_constant(params.alpha) * spec.mass *
                               special::isotropic_direction_moment(D, params.alpha);
    const double s = std::pow(dt * gamma_alpha, 2.0 / params.alpha) *
                     sample_pos_stable(0.5 * params.alpha, gen);
    const double r = std::sqrt(2.0 * s);
    vec<D> x{};
    for (std::size_t i = 0; i < D; ++i) x[i] = r * gen.normal();
    return x;
}

}  // namespace detail

template <std::size_t D>
vec<D> sample_increment(const stable_params<D>& params, const spectral_measure<D>& spec,
                        double dt, rng::philox_engine& gen);

}  // namespace stableflow::noise
