#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "common.hpp"

namespace stableflow::meas {

struct holder_lp_result {
    double value = 0.0;
    std::vector<double> f;  // optimal test function on the support
    double u = 0.0;
    double v = 0.0;
    long iterations = 0;
};

namespace lp_detail {

// Solves max sum_i w_i f_i over |f_i| <= u, f_i - f_j <= v d_ij, u + v <= 1,
// v >= 0 through its dual, which has only n + 2 equality rows:
//   rows f_i:  sum_j (g_ij - g_ji) + a_i - b_i = w_i
//   row  u:    -sum_i (a_i + b_i) + t          = 0
//   row  v:    -sum_ij d_ij g_ij + t - s       = 0
//   minimize t,  all variables >= 0.
// A feasible starting basis is explicit (a_i or b_i carrying |w_i|, plus t
// and s), so the revised simplex runs in a single phase. The optimal test
// function is read off the equality multipliers.
class dbeta_simplex {
  public:
    dbeta_simplex(std::vector<double> dist, std::vector<double> w)
        : n_(w.size()), m_(w.size() + 2), dist_(std::move(dist)), w_(std::move(w)) {
        require(dist_.size() == n_ * n_, "dbeta_simplex: distance matrix size mismatch");
    }

    // marks pair columns whose primal row is implied by triangle composition;
    // skipping them cannot change the optimum
    void set_pair_mask(std::vector<std::uint8_t> mask) {
        require(mask.empty() || mask.size() == n_ * n_, "dbeta_simplex: mask size mismatch");
        mask_ = std::move(mask);
    }

    holder_lp_result solve() {
        build_rhs();
        crash_basis();
        refactorize();

        holder_lp_result out;
        const long hard_cap = 200 * static_cast<long>(m_) + 100000;
        long stall = 0;
        bool bland = false;
        double best_obj = std::numeric_limits<double>::infinity();
        for (long it = 0;; ++it) {
            if (it >= hard_cap) throw std::runtime_error("dbeta_simplex: iteration cap hit");
            compute_multipliers();
            const std::int64_t enter = price(bland);
            if (enter < 0) break;
            const int leave = ratio_test(enter);
            if (leave < 0) throw std::runtime_error("dbeta_simplex: dual unbounded");
            pivot(enter, leave);
            ++out.iterations;
            if ((out.iterations & 255) == 0) refactorize();
            const double obj = objective();
            if (obj < best_obj - 1e-13) {
                best_obj = obj;
                stall = 0;
            } else if (++stall > 60) {
                bland = true;
            }
        }

        compute_multipliers();
        out.value = objective();
        out.f.assign(n_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) out.f[i] = yhat_[i];
        out.u = yhat_[n_];
        out.v = yhat_[n_ + 1];
        return out;
    }

  private:
    // column codes: pair(i,j) = i*n + j; then a_i, b_i, t, s
    std::int64_t code_a(std::size_t i) const { return static_cast<std::int64_t>(n_ * n_ + i); }
    std::int64_t code_b(std::size_t i) const {
        return static_cast<std::int64_t>(n_ * n_ + n_ + i);
    }
    std::int64_t code_t() const { return static_cast<std::int64_t>(n_ * n_ + 2 * n_); }
    std::int64_t code_s() const { return static_cast<std::int64_t>(n_ * n_ + 2 * n_ + 1); }

    struct col {
        int nnz = 0;
        std::size_t row[3];
        double val[3];
        double cost = 0.0;
    };

    col fetch(std::int64_t code) const {
        col c;
        const auto add = [&c](std::size_t r, double v) {
            c.row[c.nnz] = r;
            c.val[c.nnz] = v;
            ++c.nnz;
        };
        const auto p2 = static_cast<std::int64_t>(n_ * n_);
        if (code < p2) {
            const std::size_t i = static_cast<std::size_t>(code) / n_;
            const std::size_t j = static_cast<std::size_t>(code) % n_;
            add(i, 1.0);
            add(j, -1.0);
            add(n_ + 1, -dist_[i * n_ + j]);
        } else if (code < p2 + static_cast<std::int64_t>(n_)) {
            const auto i = static_cast<std::size_t>(code - p2);
            add(i, 1.0);
            add(n_, -1.0);
        } else if (code < p2 + static_cast<std::int64_t>(2 * n_)) {
            const auto i = static_cast<std::size_t>(code - p2 - static_cast<std::int64_t>(n_));
            add(i, -1.0);
            add(n_, -1.0);
        } else if (code == code_t()) {
            add(n_, 1.0);
            add(n_ + 1, 1.0);
            c.cost = 1.0;
        } else {
            add(n_ + 1, -1.0);
        }
        return c;
    }

    void build_rhs() {
        sign_.assign(m_, 1.0);
        rhs_.assign(m_, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            sign_[i] = (w_[i] >= 0.0) ? 1.0 : -1.0;
            rhs_[i] = std::abs(w_[i]);
        }
    }

    void crash_basis() {
        basis_.clear();
        for (std::size_t i = 0; i < n_; ++i)
            basis_.push_back(w_[i] >= 0.0 ? code_a(i) : code_b(i));
        basis_.push_back(code_t());
        basis_.push_back(code_s());
    }

    void refactorize() {
        std::vector<double> b(m_ * m_, 0.0);
        for (std::size_t k = 0; k < m_; ++k) {
            const col c = fetch(basis_[k]);
            for (int e = 0; e < c.nnz; ++e) b[c.row[e] * m_ + k] = sign_[c.row[e]] * c.val[e];
        }
        binv_.assign(m_ * m_, 0.0);
        for (std::size_t r = 0; r < m_; ++r) binv_[r * m_ + r] = 1.0;
        for (std::size_t colk = 0; colk < m_; ++colk) {  // Gauss-Jordan, partial pivoting
            std::size_t piv = colk;
            double best = std::abs(b[colk * m_ + colk]);
            for (std::size_t r = colk + 1; r < m_; ++r) {
                const double cand = std::abs(b[r * m_ + colk]);
                if (cand > best) {
                    best = cand;
                    piv = r;
                }
            }
            if (best < 1e-13) throw std::runtime_error("dbeta_simplex: singular basis");
            if (piv != colk) {
                for (std::size_t c = 0; c < m_; ++c) {
                    std::swap(b[piv * m_ + c], b[colk * m_ + c]);
                    std::swap(binv_[piv * m_ + c], binv_[colk * m_ + c]);
                }
            }
            const double inv = 1.0 / b[colk * m_ + colk];
            for (std::size_t c = 0; c < m_; ++c) {
                b[colk * m_ + c] *= inv;
                binv_[colk * m_ + c] *= inv;
            }
            for (std::size_t r = 0; r < m_; ++r) {
                if (r == colk) continue;
                const double factor = b[r * m_ + colk];
                if (factor == 0.0) continue;
                for (std::size_t c = 0; c < m_; ++c) {
                    b[r * m_ + c] -= factor * b[colk * m_ + c];
                    binv_[r * m_ + c] -= factor * binv_[colk * m_ + c];
                }
            }
        }
        xb_.assign(m_, 0.0);
        for (std::size_t r = 0; r < m_; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < m_; ++c) s += binv_[r * m_ + c] * rhs_[c];
            xb_[r] = std::max(0.0, s);
        }
    }

    void compute_multipliers() {
        y_.assign(m_, 0.0);
        for (std::size_t k = 0; k < m_; ++k) {
            const double ck = fetch(basis_[k]).cost;
            if (ck == 0.0) continue;
            for (std::size_t r = 0; r < m_; ++r) y_[r] += ck * binv_[k * m_ + r];
        }
        yhat_.assign(m_, 0.0);
        for (std::size_t r = 0; r < m_; ++r) yhat_[r] = y_[r] * sign_[r];
    }

    double reduced_cost(std::int64_t code) const {
        const col c = fetch(code);
        double s = c.cost;
        for (int e = 0; e < c.nnz; ++e) s -= yhat_[c.row[e]] * c.val[e];
        return s;
    }

    std::int64_t price(bool bland) const {
        const double tol = 1e-9;
        const double yu = yhat_[n_], yv = yhat_[n_ + 1];
        std::int64_t best_code = -1;
        double best_rc = -tol;
        const auto consider = [&](std::int64_t code, double rc) -> bool {
            if (rc < -tol) {
                if (bland) {
                    best_code = code;
                    return true;
                }
                if (rc < best_rc) {
                    best_rc = rc;
                    best_code = code;
                }
            }
            return false;
        };
        const bool masked = !mask_.empty();
        for (std::size_t i = 0; i < n_; ++i) {
            const double yi = yhat_[i];
            const double* row = &dist_[i * n_];
            for (std::size_t j = 0; j < n_; ++j) {
                if (i == j) continue;
                if (masked && mask_[i * n_ + j]) continue;
                const double rc = -(yi - yhat_[j] - row[j] * yv);
                if (consider(static_cast<std::int64_t>(i * n_ + j), rc)) return best_code;
            }
        }
        for (std::size_t i = 0; i < n_; ++i) {
            if (consider(code_a(i), -yhat_[i] + yu)) return best_code;
            if (consider(code_b(i), yhat_[i] + yu)) return best_code;
        }
        if (consider(code_t(), 1.0 - yu - yv)) return best_code;
        if (consider(code_s(), yv)) return best_code;
        return best_code;
    }

    std::vector<double> direction(std::int64_t code) const {
        const col c = fetch(code);
        std::vector<double> d(m_, 0.0);
        for (int e = 0; e < c.nnz; ++e) {
            const double scale_e = sign_[c.row[e]] * c.val[e];
            const std::size_t r = c.row[e];
            for (std::size_t k = 0; k < m_; ++k) d[k] += scale_e * binv_[k * m_ + r];
        }
        return d;
    }

    int ratio_test(std::int64_t enter) {
        dir_ = direction(enter);
        const double piv_tol = 1e-11;
        int leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < m_; ++k) {
            if (dir_[k] <= piv_tol) continue;
            const double ratio = xb_[k] / dir_[k];
            if (ratio < best - 1e-13 ||
                (ratio < best + 1e-13 && (leave < 0 || basis_[k] < basis_[leave]))) {
                best = ratio;
                leave = static_cast<int>(k);
            }
        }
        return leave;
    }

    void pivot(std::int64_t enter, int leave) {
        const auto l = static_cast<std::size_t>(leave);
        const double p = dir_[l];
        const double theta = xb_[l] / p;
        for (std::size_t k = 0; k < m_; ++k) {
            if (k == l) continue;
            xb_[k] = std::max(0.0, xb_[k] - theta * dir_[k]);
        }
        xb_[l] = theta;
        const double inv = 1.0 / p;
        for (std::size_t c = 0; c < m_; ++c) binv_[l * m_ + c] *= inv;
        for (std::size_t k = 0; k < m_; ++k) {
            if (k == l) continue;
            const double factor = dir_[k];
            if (factor == 0.0) continue;
            for (std::size_t c = 0; c < m_; ++c) binv_[k * m_ + c] -= factor * binv_[l * m_ + c];
        }
        basis_[l] = enter;
    }

    double objective() const {
        double z = 0.0;
        for (std::size_t k = 0; k < m_; ++k) z += fetch(basis_[k]).cost * xb_[k];
        return z;
    }

    std::size_t n_, m_;
    std::vector<double> dist_;   // n x n, |z_i - z_j|^beta
    std::vector<double> w_;      // signed weights, all nonzero
    std::vector<std::uint8_t> mask_;
    std::vector<double> sign_, rhs_;
    std::vector<std::int64_t> basis_;
    std::vector<double> binv_, xb_, y_, yhat_, dir_;
};

}  // namespace lp_detail

}  // namespace stableflow::meas
