#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "special.hpp"

namespace stableflow::noise {

template <std::size_t D>
struct stable_params {
    double alpha = 1.5;
    static constexpr std::size_t dim = D;

    void validate() const {
        require(alpha > 0.0 && alpha < 2.0, "stable_params: alpha must lie in (0,2)");
    }
};

// Spectral measure omega on the unit sphere. Conventions:
//   psi(zeta) = -c(alpha) * integral_S |<zeta,xi>|^alpha omega(dxi)
// with c(alpha) the full-line radial constant (special::radial_constant), and
// omega = mass * (normalized shape). The shape is either uniform surface
// measure or, in d = 2, a tabulated even density over equally spaced angles.
template <std::size_t D>
struct spectral_measure {
    enum class kind { atomic, isotropic };

    struct atom {
        vec<D> direction{};
        double weight = 0.0;
    };

    kind variant = kind::isotropic;
    std::vector<atom> atoms;            // atomic only
    double mass = 1.0;                  // isotropic only: omega(S)
    std::vector<double> angle_density;  // isotropic, d = 2: values at 2*pi*j/n, normalized

    static spectral_measure uniform(double total_mass = 1.0) {
        spectral_measure m;
        m.variant = kind::isotropic;
        m.mass = total_mass;
        m.validate();
        return m;
    }

    static spectral_measure from_atoms(std::vector<atom> a) {
        spectral_measure m;
        m.variant = kind::atomic;
        m.atoms = std::move(a);
        m.validate();
        return m;
    }

    // d = 2 only: even density tabulated on the uniform angle grid; the values
    // are renormalized so the shape integrates to 1 against d(theta).
    static spectral_measure from_angle_density(std::vector<double> values, double total_mass) {
        static_assert(D == 2, "tabulated spherical densities are supported in d = 2 only");
        spectral_measure m;
        m.variant = kind::isotropic;
        m.mass = total_mass;
        m.angle_density = std::move(values);
        const std::size_t n = m.angle_density.size();
        require(n >= 4 && n % 2 == 0, "spectral_measure: need an even grid of at least 4 angles");
        double s = 0.0;
        for (double v : m.angle_density) {
            require(v >= 0.0 && std::isfinite(v), "spectral_measure: density values must be >= 0");
            s += v;
        }
        require(s > 0.0, "spectral_measure: density must not vanish identically");
        const double cell = 2.0 * special::pi / static_cast<double>(n);
        for (double& v : m.angle_density) v /= s * cell;
        m.validate();
        return m;
    }

    double total_mass() const {
        if (variant == kind::isotropic) return mass;
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }

    bool is_uniform() const { return variant == kind::isotropic && angle_density.empty(); }

    // Piecewise-linear periodic interpolation of the tabulated shape.
    double shape_at_angle(double theta) const {
        const std::size_t n = angle_density.size();
        const double cell = 2.0 * special::pi / static_cast<double>(n);
        double t = std::fmod(theta, 2.0 * special::pi);
        if (t < 0.0) t += 2.0 * special::pi;
        const double pos = t / cell;
        auto j = static_cast<std::size_t>(pos);
        if (j >= n) j = n - 1;
        const double frac = pos - static_cast<double>(j);
        return (1.0 - frac) * angle_density[j] + frac * angle_density[(j + 1) % n];
    }

    void validate() const {
        if (variant == kind::atomic) {
            require(!atoms.empty(), "spectral_measure: atomic variant needs atoms");
            for (const auto& a : atoms) {
                require(a.weight > 0.0 && std::isfinite(a.weight),
                        "spectral_measure: atom weights must be positive");
                require(std::abs(norm2(a.direction) - 1.0) < 1e-9,
                        "spectral_measure: atom directions must be unit vectors");
            }
            for (const auto& a : atoms) {
                bool matched = false;
                for (const auto& b : atoms) {
                    if (norm2(sub(scale(a.direction, -1.0), b.direction)) < 1e-9) {
                        require(std::abs(a.weight - b.weight) < 1e-9 * (a.weight + b.weight),
                                "spectral_measure: mirrored atoms must carry equal weights");
                        matched = true;
                        break;
                    }
                }
                require(matched, "spectral_measure: atom set must be closed under negation");
            }
        } else {
            require(mass > 0.0 && std::isfinite(mass), "spectral_measure: mass must be positive");
            if (!angle_density.empty()) {
                const std::size_t n = angle_density.size();
                for (std::size_t j = 0; j < n; ++j)
                    require(std::abs(angle_density[j] - angle_density[(j + n / 2) % n]) <
                                1e-9 * (1.0 + angle_density[j]),
                            "spectral_measure: tabulated density must be even on the sphere");
            }
        }
    }
};

namespace detail {

// integral_S |<z,xi>|^alpha omega(dxi) for unit z, without the radial constant.
template <std::size_t D>
double direction_integral(const spectral_measure<D>& spec, double alpha, const vec<D>& z) {
    if (spec.variant == spectral_measure<D>::kind::atomic) {
        double s = 0.0;
        for (const auto& a : spec.atoms) s += a.weight * std::pow(std::abs(dot(z, a.direction)), alpha);
        return s;
    }
    if (spec.is_uniform())
        return spec.mass * special::isotropic_direction_moment(D, alpha) *
               std::pow(norm2(z), alpha);
    if constexpr (D == 2) {
        const int n = 8192;
        const double cell = 2.0 * special::pi / n;
        double s = 0.0;
        for (int j = 0; j < n; ++j) {
            const double th = (j + 0.5) * cell;
            const double ip = z[0] * std::cos(th) + z[1] * std::sin(th);
            s += std::pow(std::abs(ip), alpha) * spec.shape_at_angle(th);
        }
        return spec.mass * s * cell;
    }
    throw std::invalid_argument("spectral_measure: tabulated density requires d = 2");
}

// Prefix-stable unit-direction sequence used for kappa estimation. The first
// 2D entries are the signed coordinate axes, so measures that vanish on a
// coordinate hyperplane are caught exactly.
template <std::size_t D>
vec<D> probe_direction(std::size_t k) {
    if constexpr (D == 1) {
        return vec<1>{k % 2 == 0 ? 1.0 : -1.0};
    } else if (k < 2 * D) {
        vec<D> e = zero_vec<D>();
        e[k / 2] = (k % 2 == 0) ? 1.0 : -1.0;
        return e;
    } else if constexpr (D == 2) {
        const double golden = 0.61803398874989484820;
        const double th = 2.0 * special::pi * std::fmod(static_cast<double>(k) * golden, 1.0);
        return vec<2>{std::cos(th), std::sin(th)};
    } else {
        const double a1 = 0.75487766624669276005;  // plastic-constant (R2) sequence
        const double a2 = 0.56984029099805326591;
        const double u = std::fmod(0.5 + static_cast<double>(k) * a1, 1.0);
        const double v = std::fmod(0.5 + static_cast<double>(k) * a2, 1.0);
        const double z = 1.0 - 2.0 * u;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = 2.0 * special::pi * v;
        return vec<3>{r * std::cos(th), r * std::sin(th), z};
    }
}

}  // namespace detail

// psi(zeta) = log characteristic value; closed form for atoms and uniform
// spherical measure, angle quadrature for tabulated densities.
template <std::size_t D>
double characteristic_exponent(const stable_params<D>& params, const spectral_measure<D>& spec,
                               const vec<D>& zeta) {
    params.validate();
    require(all_finite(zeta), "characteristic_exponent: zeta must be finite");
    const double c = special::radial_constant(params.alpha);
    return -c * detail::direction_integral(spec, params.alpha, zeta);
}

struct kappa_bracket {
    double lower = 1.0;
    double upper = 1.0;
    double integral_min = 0.0;
    double integral_max = 0.0;
};

namespace detail {

// Covering radius (chordal, conservative) of the first n probe directions.
template <std::size_t D>
double covering_radius(const std::vector<vec<D>>& dirs, std::size_t n) {
    if constexpr (D == 1) {
        return 0.0;
    } else if constexpr (D == 2) {
        std::vector<double> ang(n);
        for (std::size_t k = 0; k < n; ++k) ang[k] = std::atan2(dirs[k][1], dirs[k][0]);
        std::sort(ang.begin(), ang.end());
        double gap = 2.0 * special::pi + ang.front() - ang.back();
        for (std::size_t k = 1; k < n; ++k) gap = std::max(gap, ang[k] - ang[k - 1]);
        return 0.5 * gap;  // chord <= arc
    } else {
        double delta = 0.0;
        const std::size_t n_probe = 2048;
        for (std::size_t p = 0; p < n_probe; ++p) {
            const auto q = probe_direction<D>(7919 + 3 * p);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < n; ++k) best = std::min(best, norm2(sub(q, dirs[k])));
            delta = std::max(delta, best);
        }
        return 2.0 * delta;  // probe-estimated; doubled as slack
    }
}

}  // namespace detail

// Brackets the best non-degeneracy constant kappa with
//   kappa^{-1} <= integral_S |<z,xi>|^alpha omega(dxi) <= kappa, |z| = 1.
// Lower bound from sampled extremes; upper bound widens them by a Hoelder
// modulus of the direction integral over the covering radius of prefix
// sample sets, with the tightest milestone retained so the bracket shrinks
// monotonically as n_directions doubles. Throws when the integral vanishes
// at a sampled direction.
template <std::size_t D>
kappa_bracket estimate_kappa(const spectral_measure<D>& spec, const stable_params<D>& params,
                             int n_directions) {
    params.validate();
    spec.validate();
    require(n_directions >= 16, "estimate_kappa: need at least 16 directions");
    const auto n = static_cast<std::size_t>(n_directions);
    const double w = spec.total_mass();

    std::vector<vec<D>> dirs(n);
    double imin = std::numeric_limits<double>::infinity();
    double imax = 0.0;
    double upper = std::numeric_limits<double>::infinity();
    const auto widen = [&](double delta) {
        const double modulus = (params.alpha <= 1.0) ? w * std::pow(delta, params.alpha)
                                                     : w * params.alpha * delta;
        const double lo_wide = imin - modulus;
        if (lo_wide <= 0.0) return std::numeric_limits<double>::infinity();
        return std::max({1.0, imax + modulus, 1.0 / lo_wide});
    };
    for (std::size_t k = 0; k < n; ++k) {
        dirs[k] = detail::probe_direction<D>(k);
        const double val = detail::direction_integral(spec, params.alpha, dirs[k]);
        if (val <= 1e-14 * w)
            throw std::runtime_error(
                "estimate_kappa: degenerate spectral measure (direction integral vanishes)");
        imin = std::min(imin, val);
        imax = std::max(imax, val);
        const std::size_t sz = k + 1;
        const bool milestone = (sz >= 16 && (sz & (sz - 1)) == 0) || sz == n;
        if (milestone) upper = std::min(upper, widen(detail::covering_radius<D>(dirs, sz)));
    }

    kappa_bracket out;
    out.integral_min = imin;
    out.integral_max = imax;
    out.lower = std::max({1.0, imax, 1.0 / imin});
    out.upper = std::max(upper, out.lower);
    return out;
}

}  // namespace stableflow::noise
