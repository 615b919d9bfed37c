#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "common.hpp"
#include "lp.hpp"
#include "measure.hpp"
#include "rng.hpp"
#include "thread_pool.hpp"

namespace stableflow::meas {

struct dbeta_options {
    std::size_t lp_cap = 2000;
};

struct distance_estimate {
    double beta = 1.0;
    std::optional<double> exact;
    double lower = 0.0;
    double upper = 0.0;

    void validate() const {
        require(beta > 0.0 && beta <= 1.0, "distance_estimate: beta outside (0,1]");
        require(lower >= -1e-12 && upper >= lower - 1e-9, "distance_estimate: lower > upper");
        require(upper <= 2.0 + 1e-9, "distance_estimate: upper exceeds 2");
        if (exact) {
            require(*exact >= lower - 1e-9 && *exact <= upper + 1e-9,
                    "distance_estimate: exact outside bracket");
        }
    }
};

namespace metric_detail {

template <std::size_t D>
std::vector<double> pair_powers(const std::vector<vec<D>>& pts, double beta) {
    const std::size_t n = pts.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double r = std::pow(norm2(sub(pts[i], pts[j])), beta);
            d[i * n + j] = r;
            d[j * n + i] = r;
        }
    }
    return d;
}

// Exact transportation simplex. Supplies/demands get a tiny index-graded
// perturbation so the north-west start and every pivot are nondegenerate;
// the final flows are re-solved on the optimal tree with the original
// masses, which keeps the certificate and removes the perturbation bias.
class transport_solver {
  public:
    transport_solver(std::vector<double> a, std::vector<double> b, std::vector<double> cost)
        : n_(a.size()), m_(b.size()), a_(std::move(a)), b_(std::move(b)), cost_(std::move(cost)) {}

    double solve() {
        perturb();
        northwest_start();
        const long cap = 100 * static_cast<long>(n_ + m_) + 20000;
        for (long it = 0;; ++it) {
            if (it >= cap) throw std::runtime_error("transport_solver: iteration cap hit");
            rebuild_tree();
            compute_potentials();
            std::size_t ei = 0, ej = 0;
            if (!price(ei, ej)) break;
            pivot(ei, ej);
        }
        rebuild_tree();
        return resolve_unperturbed();
    }

  private:
    struct cell {
        std::size_t i, j;
        double flow;
    };

    void perturb() {
        ap_ = a_;
        bp_ = b_;
        const double eps = 1e-9 / static_cast<double>(n_ + 3);
        double total = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double bump = eps * static_cast<double>(i + 1);
            ap_[i] += bump;
            total += bump;
        }
        bp_[m_ - 1] += total;
    }

    void northwest_start() {
        basics_.clear();
        std::vector<double> ra = ap_, rb = bp_;
        std::size_t i = 0, j = 0;
        while (i < n_ && j < m_) {
            const double t = std::min(ra[i], rb[j]);
            basics_.push_back({i, j, t});
            ra[i] -= t;
            rb[j] -= t;
            if (i + 1 == n_ && j + 1 == m_) break;
            if (ra[i] <= rb[j] && i + 1 < n_)
                ++i;
            else
                ++j;
        }
        if (basics_.size() != n_ + m_ - 1)
            throw std::runtime_error("transport_solver: degenerate start");
    }

    void rebuild_tree() {
        adj_.assign(n_ + m_, {});
        for (std::size_t k = 0; k < basics_.size(); ++k) {
            adj_[basics_[k].i].push_back(k);
            adj_[n_ + basics_[k].j].push_back(k);
        }
    }

    void compute_potentials() {
        u_.assign(n_, 0.0);
        v_.assign(m_, 0.0);
        std::vector<char> seen(n_ + m_, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            for (const std::size_t k : adj_[node]) {
                const cell& c = basics_[k];
                const std::size_t other = (node < n_) ? n_ + c.j : c.i;
                if (seen[other]) continue;
                seen[other] = 1;
                if (other >= n_)
                    v_[other - n_] = cost_[c.i * m_ + c.j] - u_[c.i];
                else
                    u_[other] = cost_[c.i * m_ + c.j] - v_[c.j];
                stack.push_back(other);
            }
        }
        for (std::size_t node = 0; node < n_ + m_; ++node)
            if (!seen[node]) throw std::runtime_error("transport_solver: tree disconnected");
    }

    bool price(std::size_t& ei, std::size_t& ej) const {
        double best = -1e-12;
        bool found = false;
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = &cost_[i * m_];
            for (std::size_t j = 0; j < m_; ++j) {
                const double rc = row[j] - u_[i] - v_[j];
                if (rc < best) {
                    best = rc;
                    ei = i;
                    ej = j;
                    found = true;
                }
            }
        }
        return found;
    }

    void pivot(std::size_t ei, std::size_t ej) {
        // unique tree path from supply ei to demand ej; edge signs alternate
        // starting with minus (those edges share row ei / column ej flow)
        std::vector<long> par_node(n_ + m_, -1), par_edge(n_ + m_, -1);
        std::vector<char> seen(n_ + m_, 0);
        std::vector<std::size_t> stack{ei};
        seen[ei] = 1;
        while (!stack.empty()) {
            const std::size_t node = stack.back();
            stack.pop_back();
            if (node == n_ + ej) break;
            for (const std::size_t k : adj_[node]) {
                const cell& c = basics_[k];
                const std::size_t other = (node < n_) ? n_ + c.j : c.i;
                if (seen[other]) continue;
                seen[other] = 1;
                par_node[other] = static_cast<long>(node);
                par_edge[other] = static_cast<long>(k);
                stack.push_back(other);
            }
        }
        if (!seen[n_ + ej]) throw std::runtime_error("transport_solver: no cycle path");
        std::vector<std::size_t> path;
        for (std::size_t node = n_ + ej; node != ei;
             node = static_cast<std::size_t>(par_node[node]))
            path.push_back(static_cast<std::size_t>(par_edge[node]));
        std::reverse(path.begin(), path.end());

        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = basics_.size();
        for (std::size_t p = 0; p < path.size(); p += 2) {
            if (basics_[path[p]].flow < theta) {
                theta = basics_[path[p]].flow;
                leave = path[p];
            }
        }
        if (leave == basics_.size()) throw std::runtime_error("transport_solver: ratio failure");
        for (std::size_t p = 0; p < path.size(); ++p) {
            double& flow = basics_[path[p]].flow;
            flow += (p % 2 == 0) ? -theta : theta;
            if (flow < 0.0) flow = 0.0;
        }
        basics_[leave] = {ei, ej, theta};
    }

    double resolve_unperturbed() {
        std::vector<double> rem(n_ + m_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) rem[i] = a_[i];
        for (std::size_t j = 0; j < m_; ++j) rem[n_ + j] = b_[j];
        std::vector<std::size_t> deg(n_ + m_, 0);
        for (std::size_t node = 0; node < n_ + m_; ++node) deg[node] = adj_[node].size();
        std::vector<char> done_edge(basics_.size(), 0);
        std::vector<std::size_t> leaves;
        for (std::size_t node = 0; node < n_ + m_; ++node)
            if (deg[node] == 1) leaves.push_back(node);
        double value = 0.0;
        std::size_t processed = 0;
        while (!leaves.empty()) {
            const std::size_t node = leaves.back();
            leaves.pop_back();
            if (deg[node] == 0) continue;
            std::size_t edge = basics_.size();
            for (const std::size_t k : adj_[node])
                if (!done_edge[k]) edge = k;
            if (edge == basics_.size()) continue;
            const cell& c = basics_[edge];
            double flow = rem[node];
            if (flow < 0.0) {
                if (flow < -1e-6) throw std::runtime_error("transport_solver: inconsistent tree");
                flow = 0.0;
            }
            value += flow * cost_[c.i * m_ + c.j];
            const std::size_t other = (node < n_) ? n_ + c.j : c.i;
            rem[node] = 0.0;
            rem[other] -= flow;
            done_edge[edge] = 1;
            ++processed;
            --deg[node];
            if (--deg[other] == 1) leaves.push_back(other);
        }
        if (processed != basics_.size())
            throw std::runtime_error("transport_solver: tree resolve incomplete");
        return value;
    }

    std::size_t n_, m_;
    std::vector<double> a_, b_, cost_, ap_, bp_, u_, v_;
    std::vector<cell> basics_;
    std::vector<std::vector<std::size_t>> adj_;
};

inline double logsumexp(const std::vector<double>& t) {
    double hi = -std::numeric_limits<double>::infinity();
    for (const double x : t) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double s = 0.0;
    for (const double x : t) s += std::exp(x - hi);
    return hi + std::log(s);
}

// Entropic iteration on a shrinking temperature schedule, then rounding of
// the plan onto the feasible polytope; any feasible plan upper-bounds the
// transport value, so the result is a certified upper bound.
inline double sinkhorn_upper(const std::vector<double>& a, const std::vector<double>& b,
                             const std::vector<double>& cost) {
    const std::size_t n = a.size(), m = b.size();
    double mean_c = 0.0;
    for (const double c : cost) mean_c += c;
    mean_c = std::max(1e-12, mean_c / static_cast<double>(n * m));

    std::vector<double> f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
    const double levels[5] = {1.0, 0.3, 0.1, 0.03, 0.01};
    double eps = mean_c;
    for (const double lv : levels) {
        eps = lv * mean_c;
        for (int sweep = 0; sweep < 400; ++sweep) {
            for (std::size_t i = 0; i < n; ++i) {
                buf.resize(m);
                for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost[i * m + j]) / eps;
                f[i] = eps * std::log(a[i]) - eps * logsumexp(buf);
            }
            for (std::size_t j = 0; j < m; ++j) {
                buf.resize(n);
                for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost[i * m + j]) / eps;
                g[j] = eps * std::log(b[j]) - eps * logsumexp(buf);
            }
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    row += std::exp(std::min(30.0, (f[i] + g[j] - cost[i * m + j]) / eps));
                err += std::abs(row - a[i]);
            }
            if (err < 1e-9) break;
        }
    }

    const auto weight = [&](std::size_t i, std::size_t j) {
        return std::exp(std::min(30.0, (f[i] + g[j] - cost[i * m + j]) / eps));
    };
    std::vector<double> r(n, 1.0), c(m, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) row += weight(i, j);
        r[i] = std::min(1.0, a[i] / std::max(row, 1e-300));
    }
    for (std::size_t j = 0; j < m; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) colsum += r[i] * weight(i, j);
        c[j] = std::min(1.0, b[j] / std::max(colsum, 1e-300));
    }
    std::vector<double> erra(n, 0.0), errb(m, 0.0);
    double value = 0.0, delta_a = 0.0, delta_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double p = r[i] * c[j] * weight(i, j);
            row += p;
            value += p * cost[i * m + j];
        }
        erra[i] = std::max(0.0, a[i] - row);
        delta_a += erra[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) colsum += r[i] * c[j] * weight(i, j);
        errb[j] = std::max(0.0, b[j] - colsum);
        delta_b += errb[j];
    }
    if (delta_a > 1e-15 && delta_b > 1e-15) {
        for (std::size_t i = 0; i < n; ++i) {
            if (erra[i] == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j)
                value += (erra[i] / delta_a) * errb[j] * cost[i * m + j];
        }
    }
    return value;
}

}  // namespace metric_detail

// round every coordinate to a multiple of `resolution` and merge
template <std::size_t D>
empirical_measure<D> snapped(const empirical_measure<D>& mu, double resolution) {
    require(resolution > 0.0, "snapped: resolution must be positive");
    empirical_measure<D> out = mu;
    for (auto& p : out.points)
        for (std::size_t k = 0; k < D; ++k) p[k] = std::round(p[k] / resolution) * resolution;
    return out.consolidated();
}

template <std::size_t D>
double dbeta_exact(const empirical_measure<D>& mu, const empirical_measure<D>& nu, double beta,
                   const dbeta_options& opt = {}) {
    require(beta > 0.0 && beta <= 1.0, "dbeta_exact: beta outside (0,1]");
    const signed_support<D> s = support_difference(mu, nu);
    const std::size_t n = s.points.size();
    if (n == 0) return 0.0;
    if (n > opt.lp_cap)
        throw std::invalid_argument(
            "dbeta_exact: union support " + std::to_string(n) + " exceeds LP cap " +
            std::to_string(opt.lp_cap) + "; use dbeta_bracket or snap to a grid");
    std::vector<double> dist = metric_detail::pair_powers<D>(s.points, beta);
    std::vector<std::uint8_t> mask;
    // triangle-composition pruning: |z_i-z_j| = |z_i-z_k| + |z_k-z_j| makes the
    // (i,j) row implied; with a strictly concave power the composition never
    // dominates, so the scan only runs at beta = 1
    if (beta == 1.0 && n >= 3 && n <= 400) {
        mask.assign(n * n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double dij = dist[i * n + j];
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == i || k == j) continue;
                    if (dij >= dist[i * n + k] + dist[k * n + j] - 1e-12 * (dij + 1e-300)) {
                        mask[i * n + j] = 1;
                        break;
                    }
                }
            }
        }
    }
    lp_detail::dbeta_simplex lp(std::move(dist), s.weights);
    lp.set_pair_mask(std::move(mask));
    const double value = lp.solve().value;
    return std::clamp(value, 0.0, 2.0);
}

template <std::size_t D>
double wtilde_beta(const empirical_measure<D>& mu, const empirical_measure<D>& nu, double beta) {
    require(beta > 0.0 && beta <= 1.0, "wtilde_beta: beta outside (0,1]");
    const empirical_measure<D> cm = mu.consolidated();
    const empirical_measure<D> cn = nu.consolidated();
    const std::size_t n = cm.size(), m = cn.size();
    require(n > 0 && m > 0, "wtilde_beta: empty measure");
    std::vector<double> cost(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            cost[i * m + j] =
                std::min(std::pow(norm2(sub(cm.points[i], cn.points[j])), beta), 1.0);
    if (n + m <= 512) {
        metric_detail::transport_solver ts(cm.weights, cn.weights, std::move(cost));
        return std::max(0.0, ts.solve());
    }
    return std::max(0.0, metric_detail::sinkhorn_upper(cm.weights, cn.weights, cost));
}

template <std::size_t D>
distance_estimate dbeta_bracket(const empirical_measure<D>& mu, const empirical_measure<D>& nu,
                                double beta, int effort,
                                std::uint64_t seed = 0x9e3779b97f4a7c15ull) {
    require(beta > 0.0 && beta <= 1.0, "dbeta_bracket: beta outside (0,1]");
    require(effort >= 1, "dbeta_bracket: effort must be >= 1");
    distance_estimate est;
    est.beta = beta;
    est.upper = std::min(2.0, 2.0 * wtilde_beta(mu, nu, beta));

    const signed_support<D> s = support_difference(mu, nu);
    const std::size_t n = s.points.size();
    if (n == 0) {
        est.exact = 0.0;
        est.upper = 0.0;
        est.validate();
        return est;
    }

    std::vector<double> gaps;
    gaps.reserve(64);
    for (std::size_t i = 0; i < n && gaps.size() < 64; ++i)
        for (std::size_t j = i + 1; j < n && gaps.size() < 64; ++j)
            gaps.push_back(norm2(sub(s.points[i], s.points[j])));
    if (gaps.empty()) gaps.push_back(1.0);
    std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(gaps.size() / 2),
                     gaps.end());
    const double med = std::max(1e-6, gaps[gaps.size() / 2]);

    // Randomized feasible test functions: Gaussian-kernel mixtures scaled so
    // ||f||_inf + [f]_beta <= 1, using [f]_beta <= (2M)^(1-beta) L^beta for a
    // function bounded by M with Lipschitz constant L.
    rng::philox_engine gen(seed, rng::derive_stream({0x6b72, static_cast<std::uint64_t>(n)}));
    double best = 0.0;
    for (int trial = 0; trial < effort; ++trial) {
        const int comps = 1 + static_cast<int>(gen.next_u32() % 4u);
        std::vector<vec<D>> centers(static_cast<std::size_t>(comps));
        std::vector<double> amps(static_cast<std::size_t>(comps)),
            widths(static_cast<std::size_t>(comps));
        double big_m = 0.0, big_l = 0.0;
        for (int k = 0; k < comps; ++k) {
            centers[static_cast<std::size_t>(k)] =
                s.points[gen.next_u64() % static_cast<std::uint64_t>(n)];
            amps[static_cast<std::size_t>(k)] = gen.normal();
            widths[static_cast<std::size_t>(k)] = med * std::exp(0.7 * gen.normal());
            big_m += std::abs(amps[static_cast<std::size_t>(k)]);
            big_l += std::abs(amps[static_cast<std::size_t>(k)]) /
                     (widths[static_cast<std::size_t>(k)] * std::sqrt(std::exp(1.0)));
        }
        if (big_m <= 0.0) continue;
        const double sem = std::pow(2.0 * big_m, 1.0 - beta) * std::pow(big_l, beta);
        const double scale = 1.0 / (big_m + sem);
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double fi = 0.0;
            for (int k = 0; k < comps; ++k) {
                const auto ks = static_cast<std::size_t>(k);
                const double r2 = [&] {
                    const vec<D> diff = sub(s.points[i], centers[ks]);
                    return dot(diff, diff);
                }();
                fi += amps[ks] * std::exp(-r2 / (2.0 * widths[ks] * widths[ks]));
            }
            obj += s.weights[i] * fi;
        }
        best = std::max(best, std::abs(obj) * scale);
    }
    est.lower = best;

    if (n <= 512) {
        dbeta_options opt;
        est.exact = dbeta_exact(mu, nu, beta, opt);
        est.lower = std::min(est.lower, *est.exact);
        est.upper = std::max(est.upper, *est.exact);
    }
    est.validate();
    return est;
}

struct flow_distance_result {
    double value = 0.0;
    bool certified_upper = false;  // true when any node fell back to 2*wtilde
};

template <std::size_t D>
flow_distance_result flow_distance(const measure_flow<D>& p, const measure_flow<D>& q, double beta,
                                   unsigned workers = 1, const dbeta_options& opt = {}) {
    p.validate();
    q.validate();
    require(p.times == q.times, "flow_distance: grids differ");
    if (p.initial_fixed || q.initial_fixed) {
        require(p.initial_fixed && q.initial_fixed,
                "flow_distance: initial_fixed flags differ");
        require(p.marginals.front().points == q.marginals.front().points &&
                    p.marginals.front().weights == q.marginals.front().weights,
                "flow_distance: pinned initial marginals differ");
    }
    const std::size_t nodes = p.times.size();
    std::vector<double> vals(nodes, 0.0);
    std::vector<char> flagged(nodes, 0);
    parallel_for(nodes, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
            const signed_support<D> s = support_difference(p.marginals[k], q.marginals[k]);
            if (s.points.size() <= opt.lp_cap) {
                vals[k] = dbeta_exact(p.marginals[k], q.marginals[k], beta, opt);
            } else {
                vals[k] = std::min(2.0, 2.0 * wtilde_beta(p.marginals[k], q.marginals[k], beta));
                flagged[k] = 1;
            }
        }
    });
    flow_distance_result out;
    for (std::size_t k = 0; k < nodes; ++k) {
        out.value = std::max(out.value, vals[k]);
        out.certified_upper = out.certified_upper || flagged[k] != 0;
    }
    return out;
}

}  // namespace stableflow::meas
