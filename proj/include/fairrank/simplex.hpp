#pragma once

// Dense two-phase tableau simplex for
//     maximize c^T x  subject to  A x (<=, =, >=) b,  x >= 0.
//
// Pricing is Dantzig's largest-coefficient rule; after a run of degenerate
// pivots the solver switches to Bland's smallest-index rule for the rest of
// the phase, which rules out cycling. Once an optimal basis is found the
// basic values are recomputed from the original constraint matrix with a
// fresh LU solve so that accumulated tableau round-off does not leak into
// the result.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace fairrank {

enum class Relation { less_equal, equal, greater_equal };

struct LinearConstraint {
    std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
    Relation relation = Relation::equal;
    double rhs = 0.0;
};

struct LinearProgram {
    std::size_t num_vars = 0;
    std::vector<double> objective;  // maximized
    std::vector<LinearConstraint> constraints;
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-10;
    double pivot_tol = 1e-9;
    std::size_t bland_after_degenerate = 64;
    std::size_t max_iterations = 0;  // 0: 50 * (rows + columns)
};

struct LpSolution {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    double phase1_infeasibility = 0.0;  // minimum sum of artificial variables
    std::size_t iterations = 0;
};

namespace detail {

class Tableau {
  public:
    Tableau(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), width_(cols + 1), data_(rows * width_, 0.0),
          cost_(width_, 0.0), basis_(rows, 0), origin_(rows) {
        for (std::size_t i = 0; i < rows; ++i) origin_[i] = i;
    }

    double& at(std::size_t i, std::size_t j) { return data_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * width_ + j]; }
    double& rhs(std::size_t i) { return data_[i * width_ + cols_]; }
    double rhs(std::size_t i) const { return data_[i * width_ + cols_]; }
    double* row_ptr(std::size_t i) { return data_.data() + i * width_; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<double>& cost() { return cost_; }
    std::vector<std::size_t>& basis() { return basis_; }
    const std::vector<std::size_t>& origin() const { return origin_; }

    void pivot(std::size_t r, std::size_t q) {
        double* pr = row_ptr(r);
        const double inv = 1.0 / pr[q];
        nz_.clear();
        for (std::size_t j = 0; j < width_; ++j) {
            if (pr[j] != 0.0) {
                pr[j] *= inv;
                nz_.push_back(j);
            }
        }
        pr[q] = 1.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == r) continue;
            double* pi = row_ptr(i);
            const double f = pi[q];
            if (f == 0.0) continue;
            for (std::size_t j : nz_) pi[j] -= f * pr[j];
            pi[q] = 0.0;
        }
        const double f = cost_[q];
        if (f != 0.0) {
            for (std::size_t j : nz_) cost_[j] -= f * pr[j];
            cost_[q] = 0.0;
        }
        basis_[r] = q;
    }

    void erase_row(std::size_t r) {
        data_.erase(data_.begin() + static_cast<std::ptrdiff_t>(r * width_),
                    data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * width_));
        basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(r));
        origin_.erase(origin_.begin() + static_cast<std::ptrdiff_t>(r));
        --rows_;
    }

  private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t width_;
    std::vector<double> data_;
    std::vector<double> cost_;  // reduced costs; cost_[cols_] holds -objective
    std::vector<std::size_t> basis_;
    std::vector<std::size_t> origin_;  // constraint index each row came from
    std::vector<std::size_t> nz_;
};

enum class PhaseResult { optimal, unbounded };

// Runs primal simplex on the current cost row. `allowed[j]` gates entering
// columns.
inline PhaseResult run_phase(Tableau& t, const std::vector<bool>& allowed,
                             const SimplexOptions& opt, std::size_t& iterations,
                             std::size_t max_iterations) {
    bool bland = false;
    std::size_t degenerate_run = 0;
    auto& cost = t.cost();
    for (;;) {
        std::size_t q = t.cols();
        if (bland) {
            for (std::size_t j = 0; j < t.cols(); ++j) {
                if (allowed[j] && cost[j] < -opt.optimality_tol) {
                    q = j;
                    break;
                }
            }
        } else {
            double best = -opt.optimality_tol;
            for (std::size_t j = 0; j < t.cols(); ++j) {
                if (allowed[j] && cost[j] < best) {
                    best = cost[j];
                    q = j;
                }
            }
        }
        if (q == t.cols()) return PhaseResult::optimal;

        std::size_t r = t.rows();
        double best_ratio = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const double a = t.at(i, q);
            if (a <= opt.pivot_tol) continue;
            const double ratio = std::max(t.rhs(i), 0.0) / a;
            if (r == t.rows() || ratio < best_ratio - 1e-12 ||
                (ratio <= best_ratio + 1e-12 &&
                 (bland ? t.basis()[i] < t.basis()[r] : a > t.at(r, q)))) {
                if (ratio < best_ratio) best_ratio = ratio;
                r = i;
            }
        }
        if (r == t.rows()) return PhaseResult::unbounded;

        if (++iterations > max_iterations) {
            throw NumericError("simplex iteration limit reached after " +
                               std::to_string(iterations - 1) + " iterations");
        }
        if (best_ratio <= 1e-12) {
            if (++degenerate_run >= opt.bland_after_degenerate) bland = true;
        } else {
            degenerate_run = 0;
        }
        t.pivot(r, q);
    }
}

// Solves the dense system M y = rhs in place with partial pivoting. Returns
// false if M is numerically singular.
inline bool lu_solve(std::vector<double>& m, std::vector<double>& rhs, std::size_t dim) {
    for (std::size_t c = 0; c < dim; ++c) {
        std::size_t p = c;
        double best = std::abs(m[c * dim + c]);
        for (std::size_t i = c + 1; i < dim; ++i) {
            const double v = std::abs(m[i * dim + c]);
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best < 1e-13) return false;
        if (p != c) {
            for (std::size_t j = 0; j < dim; ++j) std::swap(m[c * dim + j], m[p * dim + j]);
            std::swap(rhs[c], rhs[p]);
        }
        const double inv = 1.0 / m[c * dim + c];
        for (std::size_t i = c + 1; i < dim; ++i) {
            const double f = m[i * dim + c] * inv;
            if (f == 0.0) continue;
            for (std::size_t j = c; j < dim; ++j) m[i * dim + j] -= f * m[c * dim + j];
            rhs[i] -= f * rhs[c];
        }
    }
    for (std::size_t c = dim; c-- > 0;) {
        double s = rhs[c];
        for (std::size_t j = c + 1; j < dim; ++j) s -= m[c * dim + j] * rhs[j];
        rhs[c] = s / m[c * dim + c];
    }
    return true;
}

}  // namespace detail

inline LpSolution solve_simplex(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    const std::size_t nv = lp.num_vars;
    if (lp.objective.size() != nv) throw std::invalid_argument("objective length != num_vars");
    const std::size_t m = lp.constraints.size();

    // Dense copy of the constraints with non-negative right-hand sides and
    // each row scaled so that its largest coefficient has magnitude 1.
    std::vector<double> a(m * nv, 0.0);
    std::vector<double> b(m, 0.0);
    std::vector<Relation> rel(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& con = lp.constraints[i];
        double scale = 0.0;
        for (const auto& [var, coef] : con.terms) {
            if (var >= nv) throw std::invalid_argument("constraint references unknown variable");
            a[i * nv + var] += coef;
        }
        for (std::size_t j = 0; j < nv; ++j) scale = std::max(scale, std::abs(a[i * nv + j]));
        if (scale == 0.0) scale = 1.0;
        double sign = con.rhs < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < nv; ++j) a[i * nv + j] *= sign / scale;
        b[i] = con.rhs * sign / scale;
        rel[i] = con.relation;
        if (sign < 0.0 && rel[i] != Relation::equal) {
            rel[i] = rel[i] == Relation::less_equal ? Relation::greater_equal : Relation::less_equal;
        }
    }

    // Column layout: [original | slack/surplus | artificial].
    std::size_t n_slack = 0;
    std::size_t n_art = 0;
    for (auto r : rel) {
        if (r != Relation::equal) ++n_slack;
        if (r != Relation::less_equal) ++n_art;
    }
    const std::size_t total = nv + n_slack + n_art;
    detail::Tableau t(m, total);
    std::vector<bool> is_art(total, false);
    // Column of the full (unscaled-sign) structural matrix, used for the
    // final basis solve. Slack columns are unit vectors.
    std::vector<std::pair<std::size_t, double>> slack_of(n_slack);
    {
        std::size_t s = nv;
        std::size_t art = nv + n_slack;
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(a.begin() + static_cast<std::ptrdiff_t>(i * nv),
                      a.begin() + static_cast<std::ptrdiff_t>((i + 1) * nv), t.row_ptr(i));
            t.rhs(i) = b[i];
            if (rel[i] == Relation::less_equal) {
                t.at(i, s) = 1.0;
                slack_of[s - nv] = {i, 1.0};
                t.basis()[i] = s++;
            } else {
                if (rel[i] == Relation::greater_equal) {
                    t.at(i, s) = -1.0;
                    slack_of[s - nv] = {i, -1.0};
                    ++s;
                }
                t.at(i, art) = 1.0;
                is_art[art] = true;
                t.basis()[i] = art++;
            }
        }
    }

    LpSolution sol;
    const std::size_t max_iter =
        opt.max_iterations ? opt.max_iterations : 50 * (m + total) + 1000;

    // Phase 1: maximize -sum(artificials).
    std::vector<bool> allowed(total, true);
    if (n_art > 0) {
        auto& cost = t.cost();
        std::fill(cost.begin(), cost.end(), 0.0);
        for (std::size_t j = 0; j < total; ++j) {
            if (is_art[j]) cost[j] = 1.0;
        }
        for (std::size_t i = 0; i < t.rows(); ++i) {
            if (!is_art[t.basis()[i]]) continue;
            const double* row = t.row_ptr(i);
            for (std::size_t j = 0; j <= total; ++j) cost[j] -= row[j];
        }
        detail::run_phase(t, allowed, opt, sol.iterations, max_iter);
        double infeas = 0.0;
        for (std::size_t i = 0; i < t.rows(); ++i) {
            if (is_art[t.basis()[i]]) infeas += std::max(t.rhs(i), 0.0);
        }
        sol.phase1_infeasibility = infeas;
        double bnorm = 1.0;
        for (double v : b) bnorm = std::max(bnorm, std::abs(v));
        if (infeas > opt.feasibility_tol * bnorm) {
            sol.status = LpStatus::infeasible;
            return sol;
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        for (std::size_t i = t.rows(); i-- > 0;) {
            if (!is_art[t.basis()[i]]) continue;
            std::size_t q = total;
            double best = 1e-9;
            for (std::size_t j = 0; j < nv + n_slack; ++j) {
                if (std::abs(t.at(i, j)) > best) {
                    best = std::abs(t.at(i, j));
                    q = j;
                }
            }
            if (q == total) {
                t.erase_row(i);
            } else {
                t.pivot(i, q);
            }
        }
        for (std::size_t j = 0; j < total; ++j) {
            if (is_art[j]) allowed[j] = false;
        }
    }

    // Phase 2.
    {
        auto& cost = t.cost();
        std::fill(cost.begin(), cost.end(), 0.0);
        for (std::size_t j = 0; j < nv; ++j) cost[j] = -lp.objective[j];
        for (std::size_t i = 0; i < t.rows(); ++i) {
            const double cb = cost[t.basis()[i]];
            if (cb == 0.0) continue;
            const double* row = t.row_ptr(i);
            for (std::size_t j = 0; j <= total; ++j) cost[j] -= cb * row[j];
        }
        if (detail::run_phase(t, allowed, opt, sol.iterations, max_iter) ==
            detail::PhaseResult::unbounded) {
            sol.status = LpStatus::unbounded;
            return sol;
        }
    }

    std::vector<double> full(total, 0.0);
    for (std::size_t i = 0; i < t.rows(); ++i) full[t.basis()[i]] = t.rhs(i);

    // Refine basic values: B x_B = b over the constraints that survived.
    const std::size_t dim = t.rows();
    {
        std::vector<std::size_t> local(m, dim);
        for (std::size_t r = 0; r < dim; ++r) local[t.origin()[r]] = r;
        std::vector<double> bm(dim * dim, 0.0);
        std::vector<double> rhs(dim);
        for (std::size_t r = 0; r < dim; ++r) rhs[r] = b[t.origin()[r]];
        bool ok = true;
        for (std::size_t c = 0; c < dim && ok; ++c) {
            const std::size_t col = t.basis()[c];
            if (col < nv) {
                for (std::size_t r = 0; r < dim; ++r) bm[r * dim + c] = a[t.origin()[r] * nv + col];
            } else if (col < nv + n_slack) {
                const auto [row, sgn] = slack_of[col - nv];
                if (local[row] == dim) ok = false;
                else bm[local[row] * dim + c] = sgn;
            } else {
                ok = false;
            }
        }
        if (ok && detail::lu_solve(bm, rhs, dim)) {
            std::fill(full.begin(), full.end(), 0.0);
            for (std::size_t c = 0; c < dim; ++c) full[t.basis()[c]] = rhs[c];
        }
    }

    sol.x.assign(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(nv));
    for (double& v : sol.x) {
        if (v < 0.0 && v > -1e-7) v = 0.0;
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < nv; ++j) sol.objective += lp.objective[j] * sol.x[j];
    sol.status = LpStatus::optimal;
    return sol;
}

}  // namespace fairrank
