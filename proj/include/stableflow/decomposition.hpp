#pragma once

#include <cmath>

#include "common.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "spectral.hpp"
#include "stable_sampler.hpp"

namespace stableflow::noise {

struct decomposition_config {
    // Jump-size cutoff = cut_multiplier * dt^{1/alpha}.
    double cut_multiplier = 1.0;
    // Shot-noise series for the small part stops once the next radius falls
    // below series_cut_factor * threshold. Tunable bias knob.
    double series_cut_factor = 1e-3;
    long max_series_terms = 10'000'000;

    void validate() const {
        require(cut_multiplier > 0.0, "decomposition_config: cut_multiplier must be positive");
        require(series_cut_factor > 0.0 && series_cut_factor < 1.0,
                "decomposition_config: series_cut_factor must lie in (0,1)");
        require(max_series_terms >= 1, "decomposition_config: series depth must be >= 1");
    }
};

template <std::size_t D>
struct jump_decomposition {
    vec<D> small_part = zero_vec<D>();
    vec<D> large_part = zero_vec<D>();
    double threshold = 0.0;
};

namespace detail {

inline long sample_poisson(double lam, rng::philox_engine& gen) {
    long n = 0;
    while (lam > 500.0) {  // chunk so exp(-lam) stays representable
        double t = 0.0;
        long k = -1;
        while (t < 500.0) {
            t += gen.exponential();
            ++k;
        }
        n += k;
        lam -= 500.0;
    }
    const double limit = std::exp(-lam);
    double prod = gen.uniform01();
    while (prod > limit) {
        prod *= gen.uniform01();
        ++n;
    }
    return n;
}

}  // namespace detail

// Ito-Levy split at radius h = cut_multiplier * dt^{1/alpha}. The radial
// intensity in the polar half-line parametrization is 2*omega x dr/r^{1+alpha}
// (the factor 2 carries the full-line radial convention used by
// characteristic_exponent). The large part is an exact compound Poisson draw
// from the tail; the small part is a LePage series over the truncated measure,
// stopped at radius series_cut_factor * h. No compensator term: the measure is
// symmetric.
template <std::size_t D>
jump_decomposition<D> sample_decomposed(const stable_params<D>& params,
                                        const spectral_measure<D>& spec, double dt,
                                        rng::philox_engine& gen,
                                        const decomposition_config& config = {}) {
    params.validate();
    config.validate();
    require(dt > 0.0, "sample_decomposed: dt must be positive");
    const double alpha = params.alpha;
    const double w = spec.total_mass();
    const double h = config.cut_multiplier * std::pow(dt, 1.0 / alpha);

    jump_decomposition<D> out;
    out.threshold = h;

    const double tail_rate = dt * 2.0 * w / alpha * std::pow(h, -alpha);
    const long n_large = detail::sample_poisson(tail_rate, gen);
    for (long k = 0; k < n_large; ++k) {
        const double r = h * std::pow(gen.uniform01(), -1.0 / alpha);
        out.large_part = add(out.large_part, scale(sample_direction(spec, gen), r));
    }

    const double cut = config.series_cut_factor * h;
    const double pace = alpha / (2.0 * w * dt);
    double arrival = 0.0;
    for (long k = 0; k < config.max_series_terms; ++k) {
        arrival += gen.exponential();
        const double r = std::pow(std::pow(h, -alpha) + pace * arrival, -1.0 / alpha);
        if (r < cut) break;
        out.small_part = add(out.small_part, scale(sample_direction(spec, gen), r));
    }
    return out;
}

// Increment of the driving process over dt. Atomic and uniform spectral
// measures are sampled exactly in law; tabulated spherical densities fall back
// to the decomposition (small-jump series bias applies).
template <std::size_t D>
vec<D> sample_increment(const stable_params<D>& params, const spectral_measure<D>& spec,
                        double dt, rng::philox_engine& gen) {
    params.validate();
    require(dt >= 0.0, "sample_increment: dt must be >= 0");
    if (dt == 0.0) return zero_vec<D>();
    if (spec.variant == spectral_measure<D>::kind::atomic)
        return detail::sample_atomic(params, spec, dt, gen);
    if (spec.is_uniform()) return detail::sample_isotropic(params, spec, dt, gen);
    const auto parts = sample_decomposed(params, spec, dt, gen);
    return add(parts.small_part, parts.large_part);
}

}  // namespace stableflow::noise
