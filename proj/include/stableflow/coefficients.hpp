#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "common.hpp"
#include "functional.hpp"
#include "measure.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace stableflow::model {

// Drift and diffusion receive the measure only through the values of the
// declared functionals, which keeps flat derivatives computable.
template <std::size_t D>
struct coefficient_spec {
    std::string name = "custom";
    double eta = 0.5;                    // spatial exponent is 2*eta
    double drift_seminorm = 0.0;         // declared bound on [b(t,.,m)] in C^{2 eta}
    double lambda_ue = 1.0;              // uniform ellipticity constant, >= 1
    double diffusion_holder = 0.0;       // declared spatial Hoelder constant of sigma
    double flat_derivative_norm = 0.0;   // declared sup of ||d b/dm||_{C^{2 eta}}, 0 = undeclared
    bool check_ellipticity = true;

    std::vector<measure_functional<D>> functionals;
    std::function<vec<D>(double, const vec<D>&, const std::vector<double>&)> drift;
    std::function<mat<D>(double, const vec<D>&, const std::vector<double>&)> diffusion;

    void validate_with(const noise::stable_params<D>& params) const {
        require(eta > 0.0 && eta <= 0.5, "coefficient_spec: eta outside (0, 1/2]");
        require(2.0 * eta + params.alpha > 1.0,
                "coefficient_spec: need 2*eta + alpha > 1");
        require(lambda_ue >= 1.0, "coefficient_spec: ellipticity constant below 1");
        require(bool(drift) && bool(diffusion), "coefficient_spec: missing coefficient maps");
    }
};

namespace coeff_detail {

template <std::size_t D>
std::string describe(double t, const vec<D>& x) {
    std::ostringstream os;
    os << "t=" << t << " x=(";
    for (std::size_t k = 0; k < D; ++k) os << (k ? "," : "") << x[k];
    os << ")";
    return os.str();
}

}  // namespace coeff_detail

// Values of the x-independent functionals, reusable across particles at a
// fixed time node. Convolution slots are filled per state.
template <std::size_t D>
std::vector<double> functional_base(const coefficient_spec<D>& spec,
                                    const meas::empirical_measure<D>& mu) {
    std::vector<double> vals(spec.functionals.size(), 0.0);
    for (std::size_t k = 0; k < spec.functionals.size(); ++k)
        if (!spec.functionals[k].depends_on_state()) vals[k] = spec.functionals[k].value(mu);
    return vals;
}

template <std::size_t D>
void functional_finish(const coefficient_spec<D>& spec, const meas::empirical_measure<D>& mu,
                       const vec<D>& x, std::vector<double>& vals) {
    for (std::size_t k = 0; k < spec.functionals.size(); ++k)
        if (spec.functionals[k].depends_on_state())
            vals[k] = spec.functionals[k].field_value(mu, x);
}

template <std::size_t D>
vec<D> drift_with_base(const coefficient_spec<D>& spec, double t, const vec<D>& x,
                       const meas::empirical_measure<D>& mu, std::vector<double> vals) {
    functional_finish(spec, mu, x, vals);
    const vec<D> b = spec.drift(t, x, vals);
    if (!all_finite(b))
        throw std::runtime_error("eval_drift: non-finite value at " +
                                 coeff_detail::describe(t, x));
    return b;
}

template <std::size_t D>
mat<D> diffusion_with_base(const coefficient_spec<D>& spec, double t, const vec<D>& x,
                           const meas::empirical_measure<D>& mu, std::vector<double> vals) {
    functional_finish(spec, mu, x, vals);
    const mat<D> s = spec.diffusion(t, x, vals);
    for (std::size_t r = 0; r < D; ++r)
        if (!all_finite(s[r]))
            throw std::runtime_error("eval_diffusion: non-finite value at " +
                                     coeff_detail::describe(t, x));
    if (spec.check_ellipticity) {
        // probe |sigma xi|^2 against Lambda^{-1} |xi|^2 .. Lambda |xi|^2
        for (std::size_t probe = 0; probe <= D; ++probe) {
            vec<D> xi = zero_vec<D>();
            if (probe < D)
                xi[probe] = 1.0;
            else
                for (std::size_t k = 0; k < D; ++k) xi[k] = 1.0 / std::sqrt(double(D));
            const double q = dot(matvec(s, xi), matvec(s, xi));
            const double lo = (1.0 - 1e-9) / spec.lambda_ue;
            const double hi = (1.0 + 1e-9) * spec.lambda_ue;
            if (q < lo || q > hi)
                throw std::runtime_error("eval_diffusion: ellipticity violation (|sigma xi|^2=" +
                                         std::to_string(q) + ", Lambda=" +
                                         std::to_string(spec.lambda_ue) + ") at " +
                                         coeff_detail::describe(t, x));
        }
    }
    return s;
}

template <std::size_t D>
vec<D> eval_drift(const coefficient_spec<D>& spec, double t, const vec<D>& x,
                  const meas::empirical_measure<D>& mu) {
    return drift_with_base(spec, t, x, mu, functional_base(spec, mu));
}

template <std::size_t D>
mat<D> eval_diffusion(const coefficient_spec<D>& spec, double t, const vec<D>& x,
                      const meas::empirical_measure<D>& mu) {
    return diffusion_with_base(spec, t, x, mu, functional_base(spec, mu));
}

// ---- built-in families ----------------------------------------------------

template <std::size_t D>
coefficient_spec<D> make_zero(double sigma0 = 1.0) {
    require(sigma0 > 0.0, "make_zero: sigma0 must be positive");
    coefficient_spec<D> s;
    s.name = "zero";
    s.drift = [](double, const vec<D>&, const std::vector<double>&) { return zero_vec<D>(); };
    s.diffusion = [sigma0](double, const vec<D>&, const std::vector<double>&) {
        return scaled_identity<D>(sigma0);
    };
    s.lambda_ue = std::max(sigma0 * sigma0, 1.0 / (sigma0 * sigma0));
    return s;
}

// b = a * int y m(dy), sigma = sigma0 * Id
template <std::size_t D>
coefficient_spec<D> make_mean_field(double a, double sigma0 = 1.0) {
    coefficient_spec<D> s = make_zero<D>(sigma0);
    s.name = "mean_field";
    for (std::size_t k = 0; k < D; ++k)
        s.functionals.push_back(
            measure_functional<D>::scalar([k](const vec<D>& y) { return y[k]; }));
    s.drift = [a](double, const vec<D>&, const std::vector<double>& v) {
        vec<D> b;
        for (std::size_t k = 0; k < D; ++k) b[k] = a * v[k];
        return b;
    };
    return s;
}

// b = a * (int y m(dy) - x), sigma = sigma0 * Id
template <std::size_t D>
coefficient_spec<D> make_mean_reversion(double a, double sigma0 = 1.0) {
    coefficient_spec<D> s = make_mean_field<D>(a, sigma0);
    s.name = "mean_reversion";
    s.drift = [a](double, const vec<D>& x, const std::vector<double>& v) {
        vec<D> b;
        for (std::size_t k = 0; k < D; ++k) b[k] = a * (v[k] - x[k]);
        return b;
    };
    s.drift_seminorm = std::abs(a);
    return s;
}

// b_k = a * tanh(int tanh(y_1) m(dy)) - kappa * x_k, sigma = sigma0 * Id.
// Bounded interaction with a Lipschitz flat derivative.
template <std::size_t D>
coefficient_spec<D> make_tanh_mean(double a, double kappa, double sigma0 = 1.0) {
    coefficient_spec<D> s = make_zero<D>(sigma0);
    s.name = "tanh_mean";
    s.functionals.push_back(
        measure_functional<D>::scalar([](const vec<D>& y) { return std::tanh(y[0]); }));
    s.drift = [a, kappa](double, const vec<D>& x, const std::vector<double>& v) {
        const double pull = a * std::tanh(v[0]);
        vec<D> b;
        for (std::size_t k = 0; k < D; ++k) b[k] = pull - kappa * x[k];
        return b;
    };
    s.drift_seminorm = std::abs(kappa);
    s.flat_derivative_norm = 3.0 * std::abs(a);
    return s;
}

// b_k = a * (h * m)(x) with Gaussian kernel h(u) = exp(-|u|^2 / width^2)
template <std::size_t D>
coefficient_spec<D> make_kernel_conv(double a, double width, double sigma0 = 1.0) {
    require(width > 0.0, "make_kernel_conv: width must be positive");
    coefficient_spec<D> s = make_zero<D>(sigma0);
    s.name = "kernel_conv";
    s.functionals.push_back(measure_functional<D>::convolution(
        [width](const vec<D>& u) { return std::exp(-dot(u, u) / (width * width)); }));
    s.drift = [a](double, const vec<D>&, const std::vector<double>& v) {
        vec<D> b;
        for (std::size_t k = 0; k < D; ++k) b[k] = a * v[0];
        return b;
    };
    s.drift_seminorm = std::abs(a) * static_cast<double>(D) / width;
    s.flat_derivative_norm = 2.0 * std::abs(a) * std::max(1.0, 2.0 / width);
    return s;
}

// b = 0, sigma = sigma0 * (1 + 0.5 sin(int tanh(y_1) m(dy))) * Id
template <std::size_t D>
coefficient_spec<D> make_sin_diffusion(double sigma0 = 1.0) {
    coefficient_spec<D> s = make_zero<D>(sigma0);
    s.name = "sin_diffusion";
    s.functionals.push_back(
        measure_functional<D>::scalar([](const vec<D>& y) { return std::tanh(y[0]); }));
    s.diffusion = [sigma0](double, const vec<D>&, const std::vector<double>& v) {
        return scaled_identity<D>(sigma0 * (1.0 + 0.5 * std::sin(v[0])));
    };
    const double top = 2.25 * sigma0 * sigma0, bot = 4.0 / (sigma0 * sigma0);
    s.lambda_ue = std::max(top, bot);
    s.flat_derivative_norm = 3.0 * sigma0;
    return s;
}

// ---- sampled assumption checks ---------------------------------------------

struct holder_check_report {
    double worst_ratio = 0.0;   // max |b(x)-b(y)| / |x-y|^{2 eta}
    double declared = 0.0;
    bool within_declared = true;
};

// samples the spatial Hoelder quotient of the drift at a fixed measure
template <std::size_t D>
holder_check_report check_drift_holder(const coefficient_spec<D>& spec, double t,
                                       const meas::empirical_measure<D>& mu, int n_pairs,
                                       rng::philox_engine& gen) {
    holder_check_report rep;
    rep.declared = spec.drift_seminorm;
    const auto base = functional_base(spec, mu);
    for (int k = 0; k < n_pairs; ++k) {
        vec<D> x, y;
        for (std::size_t j = 0; j < D; ++j) {
            x[j] = 2.0 * gen.normal();
            y[j] = x[j] + ((k % 3 == 0) ? 0.05 : 1.0) * gen.normal();
        }
        const double gap = norm2(sub(x, y));
        if (gap < 1e-12) continue;
        const vec<D> bx = drift_with_base(spec, t, x, mu, base);
        const vec<D> by = drift_with_base(spec, t, y, mu, base);
        rep.worst_ratio =
            std::max(rep.worst_ratio, norm2(sub(bx, by)) / std::pow(gap, 2.0 * spec.eta));
    }
    rep.within_declared = rep.worst_ratio <= rep.declared * (1.0 + 1e-9) + 1e-12;
    return rep;
}

struct measure_lipschitz_report {
    double worst_ratio = 0.0;   // sup_x |b(t,x,mu)-b(t,x,nu)| / d_{2 eta}(mu,nu)
    double declared = 0.0;      // flat_derivative_norm (0 = undeclared, advisory only)
    int violations = 0;
    int pairs_used = 0;
};

// Verifies |b(t,.,mu) - b(t,.,nu)|_inf <= K d_{2 eta}(mu, nu) on sampled pairs.
// Violations are counted, never thrown: declared constants may be conservative
// or absent.
template <std::size_t D>
measure_lipschitz_report check_measure_lipschitz(const coefficient_spec<D>& spec, double t,
                                                 double beta, int n_pairs,
                                                 rng::philox_engine& gen) {
    measure_lipschitz_report rep;
    rep.declared = spec.flat_derivative_norm;
    for (int k = 0; k < n_pairs; ++k) {
        const std::size_t na = 3 + gen.next_u32() % 6, nb = 3 + gen.next_u32() % 6;
        std::vector<vec<D>> pa(na), pb(nb);
        for (auto& p : pa)
            for (std::size_t j = 0; j < D; ++j) p[j] = gen.normal();
        for (auto& p : pb)
            for (std::size_t j = 0; j < D; ++j) p[j] = 0.3 + gen.normal();
        const auto mu = meas::empirical_measure<D>::equal_weights(std::move(pa));
        const auto nu = meas::empirical_measure<D>::equal_weights(std::move(pb));
        const double dist = meas::dbeta_exact(mu, nu, beta);
        if (dist < 1e-12) continue;

        double gap = 0.0;
        const auto bmu = functional_base(spec, mu);
        const auto bnu = functional_base(spec, nu);
        for (int px = -2; px <= 2; ++px) {
            vec<D> x = zero_vec<D>();
            x[0] = static_cast<double>(px);
            gap = std::max(gap, norm2(sub(drift_with_base(spec, t, x, mu, bmu),
                                          drift_with_base(spec, t, x, nu, bnu))));
        }
        const double ratio = gap / dist;
        rep.worst_ratio = std::max(rep.worst_ratio, ratio);
        ++rep.pairs_used;
        if (rep.declared > 0.0 && ratio > rep.declared * (1.0 + 1e-6)) ++rep.violations;
    }
    return rep;
}

}  // namespace stableflow::model
