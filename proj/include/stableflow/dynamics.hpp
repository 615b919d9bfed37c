#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coefficients.hpp"
#include "common.hpp"
#include "decomposition.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "spectral.hpp"
#include "thread_pool.hpp"

// Linearized dynamics under a frozen measure flow: the Euler scheme for the
// particle system, the deterministic frozen flow theta, the frozen-mean map,
// and the linearized generator on test functions.

namespace stableflow::model {

struct time_grid {
    std::vector<double> nodes;

    static time_grid uniform(double s, double t, std::size_t steps) {
        require(steps >= 1, "time_grid: need at least one step");
        require(t > s, "time_grid: horizon must be positive");
        time_grid g;
        g.nodes.resize(steps + 1);
        for (std::size_t k = 0; k <= steps; ++k)
            g.nodes[k] = s + (t - s) * static_cast<double>(k) / static_cast<double>(steps);
        g.nodes.back() = t;
        return g;
    }

    void validate() const {
        require(!nodes.empty(), "time_grid: empty");
        for (double v : nodes) require(std::isfinite(v), "time_grid: non-finite node");
        for (std::size_t k = 1; k < nodes.size(); ++k)
            require(nodes[k] > nodes[k - 1], "time_grid: nodes must be strictly increasing");
    }

    std::size_t steps() const { return nodes.size() - 1; }
    double dt(std::size_t k) const { return nodes[k + 1] - nodes[k]; }

    // index of t on the grid, or throw; tolerance scales with the node value
    std::size_t index_of(double t) const {
        for (std::size_t k = 0; k < nodes.size(); ++k)
            if (std::abs(nodes[k] - t) <= 1e-10 * std::max(1.0, std::abs(nodes[k]))) return k;
        throw std::invalid_argument("time_grid: " + std::to_string(t) + " is not a grid node");
    }
};

// Driving increments in step-major order, one record per (step, particle).
template <std::size_t D>
struct noise_tape {
    std::uint32_t particles = 0;
    std::uint32_t steps = 0;
    std::vector<vec<D>> increments;

    void resize(std::size_t n, std::size_t k) {
        particles = static_cast<std::uint32_t>(n);
        steps = static_cast<std::uint32_t>(k);
        increments.assign(n * k, zero_vec<D>());
    }

    void validate() const {
        require(increments.size() == static_cast<std::size_t>(particles) * steps,
                "noise_tape: record count mismatch");
        for (const auto& z : increments) require(all_finite(z), "noise_tape: non-finite record");
    }

    const vec<D>& at(std::size_t step, std::size_t particle) const {
        return increments[step * particles + particle];
    }
    vec<D>& at(std::size_t step, std::size_t particle) {
        return increments[step * particles + particle];
    }
};

template <std::size_t D>
struct particle_ensemble {
    std::vector<vec<D>> states;              // at the terminal node
    std::vector<std::vector<vec<D>>> paths;  // node-major; empty unless stored
    std::optional<noise_tape<D>> tape;

    std::size_t size() const { return states.size(); }
    bool has_paths() const { return !paths.empty(); }

    meas::empirical_measure<D> terminal() const {
        return meas::empirical_measure<D>::equal_weights(states);
    }

    meas::empirical_measure<D> marginal(std::size_t node) const {
        require(node < paths.size(), "particle_ensemble: no stored path at that node");
        return meas::empirical_measure<D>::equal_weights(paths[node]);
    }

    // marginal flow on the grid, for feeding back into the fixed-point map
    meas::measure_flow<D> flow(const time_grid& grid) const {
        require(paths.size() == grid.nodes.size(), "particle_ensemble: paths/grid mismatch");
        meas::measure_flow<D> out;
        out.times = grid.nodes;
        out.marginals.reserve(paths.size());
        for (std::size_t k = 0; k < paths.size(); ++k)
            out.marginals.push_back(meas::empirical_measure<D>::equal_weights(paths[k]));
        return out;
    }
};

enum class resample_scheme { multinomial, stratified };

template <std::size_t D>
struct sim_config {
    std::size_t particles = 0;  // 0: take the initial atoms as-is (equal weights)
    int workers = 1;
    bool store_paths = true;
    bool record_noise = false;
    resample_scheme resampling = resample_scheme::multinomial;
    const noise_tape<D>* replay = nullptr;  // increments read from tape instead of fresh draws
};

namespace dyn_detail {

constexpr std::uint64_t tag_init = 0x696e6974;
constexpr std::uint64_t tag_step = 0x73746570;

// Initial particle positions: atoms of mu replicated by weight. Both schemes
// draw from a dedicated stream, so particle streams stay untouched.
template <std::size_t D>
std::vector<vec<D>> initial_states(const meas::empirical_measure<D>& mu,
                                   const sim_config<D>& cfg, std::uint64_t seed) {
    mu.validate();
    if (cfg.particles == 0) {
        const double w0 = 1.0 / static_cast<double>(mu.size());
        for (double w : mu.weights)
            require(std::abs(w - w0) <= 1e-12,
                    "simulate_linear: particles=0 requires equal initial weights");
        return mu.points;
    }
    std::vector<double> cdf(mu.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        acc += mu.weights[i];
        cdf[i] = acc;
    }
    cdf.back() = 1.0;

    rng::philox_engine gen(seed, rng::derive_stream({tag_init}));
    std::vector<vec<D>> out(cfg.particles);
    if (cfg.resampling == resample_scheme::multinomial) {
        for (auto& x : out) {
            const double u = gen.uniform01();
            const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            x = mu.points[static_cast<std::size_t>(it - cdf.begin())];
        }
    } else {
        const double n = static_cast<double>(cfg.particles);
        std::size_t j = 0;
        for (std::size_t i = 0; i < cfg.particles; ++i) {
            const double u = (static_cast<double>(i) + gen.uniform01()) / n;
            while (j + 1 < cdf.size() && cdf[j] < u) ++j;
            out[i] = mu.points[j];
        }
    }
    return out;
}

template <std::size_t D>
void check_flow_alignment(const meas::measure_flow<D>& q, const time_grid& grid) {
    require(q.times.size() == grid.nodes.size(), "measure flow does not cover the grid");
    for (std::size_t k = 0; k < grid.nodes.size(); ++k)
        require(std::abs(q.times[k] - grid.nodes[k]) <=
                    1e-10 * std::max(1.0, std::abs(grid.nodes[k])),
                "measure flow nodes do not match the grid");
}

}  // namespace dyn_detail

// Explicit Euler for the linear SDE under the frozen flow Q:
//   X_{k+1} = X_k + b(t_k, X_k, Q_k) dt + sigma(t_k, X_k, Q_k) dZ_k.
// Coefficients are read at the left endpoint. Particle i consumes a stream
// derived from (seed, step, particle), so results are independent of the
// worker count and increments are shared across runs with the same seed.
template <std::size_t D>
particle_ensemble<D> simulate_linear(const coefficient_spec<D>& spec,
                                     const noise::stable_params<D>& params,
                                     const noise::spectral_measure<D>& omega,
                                     const meas::measure_flow<D>& q,
                                     const meas::empirical_measure<D>& initial,
                                     const time_grid& grid, std::uint64_t seed,
                                     const sim_config<D>& cfg = {}) {
    grid.validate();
    q.validate();
    params.validate();
    omega.validate();
    dyn_detail::check_flow_alignment(q, grid);

    particle_ensemble<D> ens;
    ens.states = dyn_detail::initial_states(initial, cfg, seed);
    const std::size_t n = ens.states.size();
    const std::size_t steps = grid.steps();

    if (cfg.replay != nullptr) {
        cfg.replay->validate();
        require(cfg.replay->particles == n && cfg.replay->steps == steps,
                "simulate_linear: tape shape does not match the run");
    }
    if (cfg.record_noise) {
        ens.tape.emplace();
        ens.tape->resize(n, steps);
    }
    if (cfg.store_paths) {
        ens.paths.reserve(steps + 1);
        ens.paths.push_back(ens.states);
    }

    for (std::size_t k = 0; k < steps; ++k) {
        const double t = grid.nodes[k];
        const double dt = grid.dt(k);
        const auto& qk = q.marginals[k];
        const auto base = functional_base(spec, qk);

        std::atomic<std::size_t> first_bad{n};
        parallel_for(n, cfg.workers, [&](std::size_t i0, std::size_t i1) {
            for (std::size_t i = i0; i < i1; ++i) {
                vec<D> dz;
                if (cfg.replay != nullptr) {
                    dz = cfg.replay->at(k, i);
                } else {
                    rng::philox_engine gen(
                        seed, rng::derive_stream({dyn_detail::tag_step, k, i}));
                    dz = noise::sample_increment(params, omega, dt, gen);
                }
                if (cfg.record_noise) ens.tape->at(k, i) = dz;

                const vec<D>& x = ens.states[i];
                const vec<D> b = drift_with_base(spec, t, x, qk, base);
                const mat<D> s = diffusion_with_base(spec, t, x, qk, base);
                vec<D> next = add(x, add(scale(b, dt), matvec(s, dz)));
                if (!all_finite(next)) {
                    std::size_t seen = n;
                    while (!first_bad.compare_exchange_weak(seen, std::min(seen, i)))
                        ;
                    next = zero_vec<D>();
                }
                ens.states[i] = next;
            }
        });
        if (first_bad.load() < n)
            throw std::runtime_error("simulate_linear: non-finite state at step " +
                                     std::to_string(k) + " (particle " +
                                     std::to_string(first_bad.load()) + ")");
        if (cfg.store_paths) ens.paths.push_back(ens.states);
    }
    return ens;
}

// Deterministic flow theta_{s,tau}(xi): frozen at xi before tau, explicit
// Euler for d theta = b(s, theta, Q(s)) ds afterwards. The scheme follows one
// Peano branch; no branch enumeration.
template <std::size_t D>
struct frozen_flow {
    double tau = 0.0;
    vec<D> xi{};
    std::vector<double> times;
    std::vector<vec<D>> values;

    const vec<D>& at(std::size_t k) const { return values[k]; }
};

template <std::size_t D>
frozen_flow<D> solve_frozen_flow(const coefficient_spec<D>& spec,
                                 const meas::measure_flow<D>& q, double tau, const vec<D>& xi,
                                 const time_grid& grid) {
    grid.validate();
    q.validate();
    dyn_detail::check_flow_alignment(q, grid);
    const std::size_t j = grid.index_of(tau);

    frozen_flow<D> flow;
    flow.tau = grid.nodes[j];
    flow.xi = xi;
    flow.times = grid.nodes;
    flow.values.assign(grid.nodes.size(), xi);
    for (std::size_t k = j; k + 1 < grid.nodes.size(); ++k) {
        const auto base = functional_base(spec, q.marginals[k]);
        const vec<D> b =
            drift_with_base(spec, grid.nodes[k], flow.values[k], q.marginals[k], base);
        flow.values[k + 1] = add(flow.values[k], scale(b, grid.dt(k)));
    }
    return flow;
}

// m^{(tau,xi)}_{v,s}(x) = x + int_s^v b(r, theta_r, Q(r)) dr with the same
// left-endpoint sums as the Euler flow, so the flow identity holds exactly on
// shared grids.
template <std::size_t D>
vec<D> frozen_mean(const vec<D>& x, double s, double v, const frozen_flow<D>& flow,
                   const coefficient_spec<D>& spec, const meas::measure_flow<D>& q) {
    require(flow.times.size() == q.times.size(), "frozen_mean: flow/measure grid mismatch");
    time_grid grid;
    grid.nodes = flow.times;
    const std::size_t is = grid.index_of(s);
    const std::size_t iv = grid.index_of(v);
    if (is > iv) throw std::invalid_argument("frozen_mean: need s <= v");

    vec<D> acc = x;
    for (std::size_t k = is; k < iv; ++k) {
        const auto base = functional_base(spec, q.marginals[k]);
        const vec<D> b =
            drift_with_base(spec, grid.nodes[k], flow.values[k], q.marginals[k], base);
        acc = add(acc, scale(b, grid.dt(k)));
    }
    return acc;
}

// ---- generator --------------------------------------------------------------

struct generator_quadrature {
    double r_min = 1e-4;
    double r_max = 1e4;
    std::size_t radial_nodes = 256;
    std::size_t sphere_nodes = 64;  // isotropic, d = 2; d = 1 uses the two poles
};

struct generator_result {
    double value = 0.0;
    double truncation = 0.0;  // estimated mass outside [r_min, r_max]
};

namespace dyn_detail {

template <std::size_t D>
struct sphere_atom {
    vec<D> direction;
    double weight;
};

template <std::size_t D>
std::vector<sphere_atom<D>> sphere_rule(const noise::spectral_measure<D>& omega,
                                        std::size_t nodes) {
    std::vector<sphere_atom<D>> out;
    if (omega.variant == noise::spectral_measure<D>::kind::atomic) {
        out.reserve(omega.atoms.size());
        for (const auto& a : omega.atoms) out.push_back({a.direction, a.weight});
        return out;
    }
    if constexpr (D == 1) {
        out.push_back({vec<1>{1.0}, omega.mass / 2.0});
        out.push_back({vec<1>{-1.0}, omega.mass / 2.0});
    } else if constexpr (D == 2) {
        const double cell = 2.0 * special::pi / static_cast<double>(nodes);
        out.reserve(nodes);
        for (std::size_t j = 0; j < nodes; ++j) {
            const double th = (static_cast<double>(j) + 0.5) * cell;
            const double shape = omega.is_uniform() ? 1.0 / (2.0 * special::pi)
                                                    : omega.shape_at_angle(th);
            out.push_back({vec<2>{std::cos(th), std::sin(th)}, omega.mass * shape * cell});
        }
    } else {
        throw std::invalid_argument("apply_generator: spherical rule only for d <= 2");
    }
    return out;
}

}  // namespace dyn_detail

// Linearized generator at (t, x, mu):
//   A phi = <b, grad phi> + int [phi(x + sigma r lambda) + phi(x - sigma r lambda)
//                                - 2 phi(x)] r^{-1-alpha} dr omega(d lambda).
// The paired +-r lambda nodes cancel the odd part, so the principal value
// needs no explicit compensator; the polar jump intensity 2 omega is absorbed
// by sweeping the full symmetric atom set.
template <std::size_t D>
generator_result apply_generator(const coefficient_spec<D>& spec,
                                 const noise::stable_params<D>& params,
                                 const noise::spectral_measure<D>& omega, double t,
                                 const vec<D>& x, const meas::empirical_measure<D>& mu,
                                 const std::function<double(const vec<D>&)>& phi,
                                 const std::function<vec<D>(const vec<D>&)>& grad_phi,
                                 const generator_quadrature& quad = {}) {
    params.validate();
    omega.validate();
    require(quad.r_min > 0.0 && quad.r_max > quad.r_min, "apply_generator: bad radial range");
    require(quad.radial_nodes >= 2, "apply_generator: need at least two radial nodes");

    const vec<D> b = eval_drift(spec, t, x, mu);
    const mat<D> sig = eval_diffusion(spec, t, x, mu);
    const double phi0 = phi(x);
    const auto sphere = dyn_detail::sphere_rule(omega, quad.sphere_nodes);

    const double alpha = params.alpha;
    const double lmin = std::log(quad.r_min);
    const double du = (std::log(quad.r_max) - lmin) / static_cast<double>(quad.radial_nodes - 1);

    generator_result res;
    res.value = dot(b, grad_phi(x));
    for (const auto& atom : sphere) {
        const vec<D> dir = matvec(sig, atom.direction);
        double inner = 0.0;
        double f_first = 0.0, f_last = 0.0;
        for (std::size_t jr = 0; jr < quad.radial_nodes; ++jr) {
            const double u = lmin + du * static_cast<double>(jr);
            const double r = std::exp(u);
            const double f =
                phi(add(x, scale(dir, r))) + phi(sub(x, scale(dir, r))) - 2.0 * phi0;
            const double wt = (jr == 0 || jr + 1 == quad.radial_nodes) ? 0.5 : 1.0;
            inner += wt * f * std::exp(-alpha * u);
            if (jr == 0) f_first = f;
            if (jr + 1 == quad.radial_nodes) f_last = f;
        }
        res.value += atom.weight * inner * du;
        res.truncation +=
            atom.weight * (std::abs(f_first) * std::pow(quad.r_min, -alpha) / (2.0 - alpha) +
                           std::abs(f_last) * std::pow(quad.r_max, -alpha) / alpha);
    }
    if (!std::isfinite(res.value) || !std::isfinite(res.truncation))
        throw std::runtime_error("apply_generator: non-finite quadrature");
    return res;
}

}  // namespace stableflow::model
