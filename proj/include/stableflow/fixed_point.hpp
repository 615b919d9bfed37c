#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "measure.hpp"
#include "metrics.hpp"
#include "stats.hpp"

// The fixed-point map T on measure flows, Picard iteration with common random
// numbers, window chaining, the iterated T.T mode, and the semigroup
// contraction diagnostic.

namespace stableflow::model {

enum class picard_mode { single, squared };

struct picard_config {
    double beta = 0.0;  // 0: eta in single mode, (1 - lambda) 2 eta in squared mode
    double tol = 0.05;
    std::size_t max_iter = 12;
    std::size_t particles = 2000;
    std::size_t steps = 32;  // Euler steps per window
    double window = 0.0;     // 0: one window across the horizon
    picard_mode mode = picard_mode::single;
    double lambda = -1.0;  // < 0: midpoint of the admissible interval
    int workers = 1;
    double snap_resolution = 0.05;  // 0: metric on raw particle clouds
    std::size_t bootstrap = 6;
    std::size_t max_halvings = 2;
    resample_scheme resampling = resample_scheme::multinomial;

    void validate() const {
        require(tol > 0.0, "picard_config: tol must be positive");
        require(max_iter >= 1, "picard_config: max_iter must be >= 1");
        require(particles >= 1, "picard_config: need particles");
        require(steps >= 1, "picard_config: need steps");
        require(window >= 0.0, "picard_config: window must be >= 0");
        require(snap_resolution >= 0.0, "picard_config: snap resolution must be >= 0");
    }
};

struct window_record {
    double start = 0.0;
    double end = 0.0;
    std::size_t halvings = 0;  // splits applied before this window ran
    std::vector<double> distances;
    bool converged = false;
    double self_consistency = 0.0;
    double bootstrap_error = 0.0;
};

template <std::size_t D>
struct picard_report {
    double beta = 0.0;
    double lambda = 0.0;  // resolved value, squared mode only
    bool converged = false;
    std::vector<double> iterates;  // distance trace, windows concatenated
    std::vector<window_record> windows;
    meas::measure_flow<D> final_flow;
    double self_consistency = 0.0;
    double self_consistency_error = 0.0;
    std::vector<std::string> warnings;
};

namespace fp_detail {

constexpr std::uint64_t tag_window = 0x77696e;
constexpr std::uint64_t tag_boot = 0x626f6f74;
constexpr std::uint64_t tag_diag = 0x64696167;

// lambda for the squared map: midpoint of the interval carved out by
// 2 lambda eta + alpha > 1 and alpha + (1 - lambda) 2 eta > 1
inline double resolve_lambda(double requested, double alpha, double eta) {
    const double lo = std::max(0.0, (1.0 - alpha) / (2.0 * eta));
    const double hi = std::min(1.0, 1.0 - (1.0 - alpha) / (2.0 * eta));
    double lam = requested;
    if (lam < 0.0) {
        require(lo < hi, "picard_solve: squared mode infeasible for these (alpha, eta)");
        lam = 0.5 * (lo + hi);
    }
    require(2.0 * lam * eta + alpha > 1.0,
            "picard_solve: squared mode needs 2 lambda eta + alpha > 1");
    require(alpha + (1.0 - lam) * 2.0 * eta > 1.0,
            "picard_solve: squared mode needs alpha + (1 - lambda) 2 eta > 1");
    return lam;
}

template <std::size_t D>
double resolve_beta(const picard_config& cfg, const coefficient_spec<D>& spec, double lambda) {
    if (cfg.beta > 0.0) return cfg.beta;
    return cfg.mode == picard_mode::single ? spec.eta : (1.0 - lambda) * 2.0 * spec.eta;
}

template <std::size_t D>
meas::measure_flow<D> snap_flow(const meas::measure_flow<D>& q, double resolution) {
    if (resolution <= 0.0) return q;
    meas::measure_flow<D> out;
    out.times = q.times;
    out.initial_fixed = q.initial_fixed;
    out.marginals.reserve(q.marginals.size());
    for (const auto& m : q.marginals) out.marginals.push_back(meas::snapped(m, resolution));
    return out;
}

template <std::size_t D>
meas::measure_flow<D> constant_flow(const meas::empirical_measure<D>& mu,
                                    const time_grid& grid) {
    meas::measure_flow<D> q;
    q.times = grid.nodes;
    q.marginals.assign(grid.nodes.size(), mu);
    q.initial_fixed = true;
    return q;
}

// one node of the flow metric, with the same capped fallback as flow_distance
template <std::size_t D>
double node_distance(const meas::empirical_measure<D>& a, const meas::empirical_measure<D>& b,
                     double beta, const meas::dbeta_options& opt = {}) {
    const auto diff = meas::support_difference(a, b);
    if (diff.points.size() <= opt.lp_cap) return meas::dbeta_exact(a, b, beta, opt);
    return std::min(2.0, 2.0 * meas::wtilde_beta(a, b, beta));
}

template <std::size_t D>
struct t_application {
    particle_ensemble<D> ensemble;
    meas::measure_flow<D> flow;  // marginal flow with the initial node pinned
};

template <std::size_t D>
t_application<D> run_t(const coefficient_spec<D>& spec, const noise::stable_params<D>& params,
                       const noise::spectral_measure<D>& omega, const meas::measure_flow<D>& q,
                       const meas::empirical_measure<D>& mu, const time_grid& grid,
                       std::uint64_t seed, const picard_config& cfg) {
    sim_config<D> sc;
    sc.particles = cfg.particles;
    sc.workers = cfg.workers;
    sc.resampling = cfg.resampling;
    t_application<D> app;
    app.ensemble = simulate_linear(spec, params, omega, q, mu, grid, seed, sc);
    app.flow = app.ensemble.flow(grid);
    app.flow.marginals[0] = mu;
    app.flow.initial_fixed = true;
    return app;
}

// flow rebuilt from resampled trajectories, for bootstrap error bars
template <std::size_t D>
meas::measure_flow<D> resampled_flow(const particle_ensemble<D>& ens, const time_grid& grid,
                                     const meas::empirical_measure<D>& mu,
                                     rng::philox_engine& gen) {
    const std::size_t n = ens.paths[0].size();
    std::vector<std::size_t> idx(n);
    for (auto& j : idx) j = static_cast<std::size_t>(gen.uniform01() * static_cast<double>(n));
    meas::measure_flow<D> out;
    out.times = grid.nodes;
    out.initial_fixed = true;
    out.marginals.reserve(grid.nodes.size());
    out.marginals.push_back(mu);
    for (std::size_t k = 1; k < grid.nodes.size(); ++k) {
        std::vector<vec<D>> pts(n);
        for (std::size_t j = 0; j < n; ++j) pts[j] = ens.paths[k][idx[j]];
        out.marginals.push_back(meas::empirical_measure<D>::equal_weights(std::move(pts)));
    }
    return out;
}

}  // namespace fp_detail

// One application of the flow map: simulate the linear SDE under the frozen
// flow q from mu and return the empirical marginal flow, initial node pinned.
template <std::size_t D>
meas::measure_flow<D> apply_T(const coefficient_spec<D>& spec,
                              const noise::stable_params<D>& params,
                              const noise::spectral_measure<D>& omega,
                              const meas::measure_flow<D>& q,
                              const meas::empirical_measure<D>& mu, const time_grid& grid,
                              std::uint64_t seed, const picard_config& cfg = {}) {
    return fp_detail::run_t(spec, params, omega, q, mu, grid, seed, cfg).flow;
}

namespace fp_detail {

// Picard loop on one window. Appends records; returns the window's flow.
// Splits the window in half (up to cfg.max_halvings) when the loop fails to
// contract within max_iter.
template <std::size_t D>
meas::measure_flow<D> solve_window(const coefficient_spec<D>& spec,
                                   const noise::stable_params<D>& params,
                                   const noise::spectral_measure<D>& omega,
                                   const meas::empirical_measure<D>& mu, double s, double e,
                                   std::size_t depth, double beta, const picard_config& cfg,
                                   std::uint64_t seed, std::size_t& window_counter,
                                   picard_report<D>& report) {
    const time_grid grid = time_grid::uniform(s, e, cfg.steps);
    const std::uint64_t wseed =
        rng::derive_stream({seed, tag_window, static_cast<std::uint64_t>(window_counter)});
    ++window_counter;

    window_record rec;
    rec.start = s;
    rec.end = e;
    rec.halvings = depth;

    meas::measure_flow<D> q = constant_flow(mu, grid);
    meas::measure_flow<D> q_snap = snap_flow(q, cfg.snap_resolution);
    t_application<D> last;

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        last = run_t(spec, params, omega, q, mu, grid, wseed, cfg);
        if (cfg.mode == picard_mode::squared)
            last = run_t(spec, params, omega, last.flow, mu, grid, wseed, cfg);
        auto next_snap = snap_flow(last.flow, cfg.snap_resolution);
        const double dist =
            meas::flow_distance(next_snap, q_snap, beta,
                                static_cast<unsigned>(cfg.workers))
                .value;
        rec.distances.push_back(dist);
        report.iterates.push_back(dist);
        q = last.flow;
        q_snap = std::move(next_snap);
        if (dist < cfg.tol) {
            rec.converged = true;
            break;
        }
    }

    if (!rec.converged && depth < cfg.max_halvings) {
        const double mid = 0.5 * (s + e);
        auto left = solve_window(spec, params, omega, mu, s, mid, depth + 1, beta, cfg, seed,
                                 window_counter, report);
        auto right = solve_window(spec, params, omega, left.marginals.back(), mid, e, depth + 1,
                                  beta, cfg, seed, window_counter, report);
        left.times.insert(left.times.end(), right.times.begin() + 1, right.times.end());
        left.marginals.insert(left.marginals.end(), right.marginals.begin() + 1,
                              right.marginals.end());
        return left;
    }

    // self-consistency at the accepted flow, with a trajectory bootstrap
    const auto check = run_t(spec, params, omega, q, mu, grid, wseed, cfg);
    const auto q_final_snap = snap_flow(q, cfg.snap_resolution);
    rec.self_consistency =
        meas::flow_distance(snap_flow(check.flow, cfg.snap_resolution), q_final_snap, beta,
                            static_cast<unsigned>(cfg.workers))
            .value;
    if (cfg.bootstrap >= 2) {
        std::vector<double> ds(cfg.bootstrap);
        for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
            rng::philox_engine gen(wseed, rng::derive_stream({tag_boot, b}));
            const auto bflow = resampled_flow(check.ensemble, grid, mu, gen);
            ds[b] = meas::flow_distance(snap_flow(bflow, cfg.snap_resolution), q_final_snap,
                                        beta, static_cast<unsigned>(cfg.workers))
                        .value;
        }
        rec.bootstrap_error = stats::stddev(ds);
    }

    report.windows.push_back(rec);
    report.self_consistency = std::max(report.self_consistency, rec.self_consistency);
    report.self_consistency_error =
        std::max(report.self_consistency_error, rec.bootstrap_error);
    return q;
}

}  // namespace fp_detail

// Picard iteration from the constant flow at mu0, chained over windows. Every
// iterate within a window reuses the same derived noise (common random
// numbers), so successive distances measure the map's contraction and not
// sampling jitter. Non-convergence yields a report, not an exception.
template <std::size_t D>
picard_report<D> picard_solve(const coefficient_spec<D>& spec,
                              const noise::stable_params<D>& params,
                              const noise::spectral_measure<D>& omega,
                              const meas::empirical_measure<D>& mu0, double horizon,
                              const picard_config& cfg, std::uint64_t seed) {
    cfg.validate();
    params.validate();
    omega.validate();
    mu0.validate();
    require(horizon > 0.0, "picard_solve: horizon must be positive");

    picard_report<D> report;
    double lambda = 0.0;
    if (cfg.mode == picard_mode::squared) {
        lambda = fp_detail::resolve_lambda(cfg.lambda, params.alpha, spec.eta);
        report.lambda = lambda;
    } else if (params.alpha < 1.0 &&
               !(params.alpha > std::max(2.0 * spec.eta, 1.0 - spec.eta))) {
        report.warnings.push_back(
            "single mode outside the contraction regime: alpha < 1 needs "
            "alpha > max(2 eta, 1 - eta)");
    }
    report.beta = fp_detail::resolve_beta(cfg, spec, lambda);

    std::vector<double> cuts{0.0};
    if (cfg.window > 0.0) {
        while (cuts.back() + cfg.window < horizon - 1e-12 * horizon)
            cuts.push_back(cuts.back() + cfg.window);
    }
    cuts.push_back(horizon);

    meas::empirical_measure<D> mu = mu0;
    std::size_t window_counter = 0;
    meas::measure_flow<D> full;
    for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
        auto wf = fp_detail::solve_window(spec, params, omega, mu, cuts[j], cuts[j + 1], 0,
                                          report.beta, cfg, seed, window_counter, report);
        mu = wf.marginals.back();
        if (full.times.empty()) {
            full = std::move(wf);
        } else {
            full.times.insert(full.times.end(), wf.times.begin() + 1, wf.times.end());
            full.marginals.insert(full.marginals.end(), wf.marginals.begin() + 1,
                                  wf.marginals.end());
        }
    }
    full.initial_fixed = true;
    report.final_flow = std::move(full);
    report.converged = true;
    for (const auto& w : report.windows) report.converged = report.converged && w.converged;
    return report;
}

struct contraction_report {
    std::vector<double> horizons;
    std::vector<double> numerator;
    std::vector<double> denominator;
    std::vector<double> rho;
    std::vector<double> rho_error;  // trajectory-bootstrap spread of the numerator
    bool fit_valid = false;
    double c_tilde = 0.0;
    double zeta_tilde = 0.0;
    stats::line_fit fit;
};

// Contraction factors rho(T) = d(T(P1), T(P2)) / d(P1, P2) over nested
// horizons under common noise, with a log-log fit of rho against T - s.
template <std::size_t D>
contraction_report contraction_diagnostic(const coefficient_spec<D>& spec,
                                          const noise::stable_params<D>& params,
                                          const noise::spectral_measure<D>& omega,
                                          const meas::measure_flow<D>& p1,
                                          const meas::measure_flow<D>& p2,
                                          const std::vector<double>& horizons,
                                          const meas::empirical_measure<D>& mu,
                                          const time_grid& grid, std::uint64_t seed,
                                          const picard_config& cfg = {}) {
    grid.validate();
    require(!horizons.empty(), "contraction_diagnostic: no horizons");
    for (std::size_t m = 1; m < horizons.size(); ++m)
        require(horizons[m] > horizons[m - 1],
                "contraction_diagnostic: horizons must increase");
    require(p1.marginals.front().points == p2.marginals.front().points &&
                p1.marginals.front().weights == p2.marginals.front().weights,
            "contraction_diagnostic: flows must share the initial marginal");

    const double beta = cfg.beta > 0.0 ? cfg.beta : spec.eta;
    const std::size_t nodes = grid.nodes.size();
    const std::uint64_t dseed = rng::derive_stream({seed, fp_detail::tag_diag});
    const auto t1 = fp_detail::run_t(spec, params, omega, p1, mu, grid, dseed, cfg);
    const auto t2 = fp_detail::run_t(spec, params, omega, p2, mu, grid, dseed, cfg);

    const auto node_dist = [&](const meas::measure_flow<D>& a, const meas::measure_flow<D>& b,
                               std::size_t k) {
        if (cfg.snap_resolution <= 0.0)
            return fp_detail::node_distance<D>(a.marginals[k], b.marginals[k], beta);
        return fp_detail::node_distance<D>(meas::snapped(a.marginals[k], cfg.snap_resolution),
                                           meas::snapped(b.marginals[k], cfg.snap_resolution),
                                           beta);
    };

    std::vector<double> dnum(nodes, 0.0), dden(nodes, 0.0);
    for (std::size_t k = 1; k < nodes; ++k) {
        dnum[k] = node_dist(t1.flow, t2.flow, k);
        dden[k] = node_dist(p1, p2, k);
    }

    std::vector<std::vector<double>> boot(cfg.bootstrap);
    for (std::size_t b = 0; b < cfg.bootstrap; ++b) {
        rng::philox_engine gen(dseed, rng::derive_stream({fp_detail::tag_boot, b}));
        rng::philox_engine gen2 = gen;  // paired indices for both ensembles
        const auto f1 = fp_detail::resampled_flow(t1.ensemble, grid, mu, gen);
        const auto f2 = fp_detail::resampled_flow(t2.ensemble, grid, mu, gen2);
        boot[b].assign(nodes, 0.0);
        for (std::size_t k = 1; k < nodes; ++k) boot[b][k] = node_dist(f1, f2, k);
    }

    contraction_report rep;
    double num_max = 0.0, den_max = 0.0;
    std::vector<double> boot_max(cfg.bootstrap, 0.0);
    std::size_t m = 0;
    std::vector<double> lx, ly;
    for (std::size_t k = 1; k < nodes && m < horizons.size(); ++k) {
        num_max = std::max(num_max, dnum[k]);
        den_max = std::max(den_max, dden[k]);
        for (std::size_t b = 0; b < cfg.bootstrap; ++b)
            boot_max[b] = std::max(boot_max[b], boot[b][k]);
        if (std::abs(grid.nodes[k] - horizons[m]) <=
            1e-10 * std::max(1.0, std::abs(horizons[m]))) {
            if (den_max <= 1e-14)
                throw std::invalid_argument(
                    "contraction_diagnostic: flows coincide up to the horizon");
            rep.horizons.push_back(horizons[m]);
            rep.numerator.push_back(num_max);
            rep.denominator.push_back(den_max);
            rep.rho.push_back(num_max / den_max);
            if (cfg.bootstrap >= 2) {
                std::vector<double> rb(cfg.bootstrap);
                for (std::size_t b = 0; b < cfg.bootstrap; ++b) rb[b] = boot_max[b] / den_max;
                rep.rho_error.push_back(stats::stddev(rb));
            } else {
                rep.rho_error.push_back(0.0);
            }
            if (rep.rho.back() > 1e-14) {
                lx.push_back(std::log(horizons[m] - grid.nodes.front()));
                ly.push_back(std::log(rep.rho.back()));
            }
            ++m;
        }
    }
    require(m == horizons.size(), "contraction_diagnostic: horizons must be grid nodes");

    if (lx.size() == rep.rho.size() && lx.size() >= 2) {
        rep.fit = stats::fit_line(lx, ly);
        rep.zeta_tilde = rep.fit.slope;
        rep.c_tilde = std::exp(rep.fit.intercept);
        rep.fit_valid = true;
    }
    return rep;
}

}  // namespace stableflow::model
