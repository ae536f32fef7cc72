#pragma once

// Fairness-constrained utility maximization over MRP matrices.
//
// Variables are the entries P(i, j) (row-major, index i*k + j). The program is
//
//     maximize   sum_ij u_i v_j P(i, j)
//     subject to sum_i P(i, j) = 1                      for every rank j
//                sum_j P(i, j) <= 1  (= 1 when k = n)   for every item i
//                eps_i / u_i - eps_{i+1} / u_{i+1} = 0  for i = 1..n-1
//                P >= 0
//
// where eps_i = sum_j v_j P(i, j). Consecutive equalities imply all pairwise
// ones. In slack mode every fairness row gets a pair of non-negative slack
// variables and the solve is lexicographic: first minimize the total slack,
// then maximize utility with the slack held at that minimum.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "simplex.hpp"

namespace fairrank {

enum class FairnessMode { strict, slack };

inline const char* to_string(FairnessMode m) { return m == FairnessMode::strict ? "strict" : "slack"; }

struct LpProblem {
    std::string query_id;
    std::size_t n = 0;
    std::size_t k = 0;
    FairnessMode mode = FairnessMode::strict;
    std::vector<double> merits;
    std::vector<double> biases;

    LinearProgram program;  // utility objective over n*k (+ 2(n-1) slack) variables
    std::size_t column_constraints = 0;
    std::size_t fairness_constraints = 0;
    std::size_t row_constraints = 0;
    bool rows_are_equalities = false;

    std::size_t mrp_variables() const { return n * k; }
    std::size_t slack_variables() const { return program.num_vars - n * k; }
};

enum class SolveStatus { optimal, infeasible, unbounded };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

struct SolveReport {
    SolveStatus status = SolveStatus::infeasible;
    std::optional<MrpMatrix> mrp;
    double objective_value = 0.0;
    double fairness_residual = 0.0;
    double slack_total = 0.0;
    std::size_t iterations = 0;
    std::string note;
};

/// max_i eps_i/u_i - min_i eps_i/u_i.
inline double fairness_residual(std::span<const double> exposure, std::span<const double> merits) {
    double lo = INFINITY;
    double hi = -INFINITY;
    for (std::size_t i = 0; i < exposure.size(); ++i) {
        const double r = exposure[i] / merits[i];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    return exposure.empty() ? 0.0 : hi - lo;
}

inline double expected_utility(const MrpMatrix& p, std::span<const double> merits,
                               const ExposureModel& model) {
    const auto eps = expected_exposure(p, model);
    double u = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) u += merits[i] * eps[i];
    return u;
}

inline LpProblem build_fairness_lp(const ItemCatalog& catalog, const ExposureModel& model,
                                   FairnessMode mode = FairnessMode::strict) {
    const std::size_t n = catalog.size();
    const std::size_t k = model.k();
    if (k > n) {
        throw std::invalid_argument("k=" + std::to_string(k) + " exceeds item count n=" +
                                    std::to_string(n) + " for query '" + catalog.query_id() + "'");
    }
    LpProblem prob;
    prob.query_id = catalog.query_id();
    prob.n = n;
    prob.k = k;
    prob.mode = mode;
    prob.merits = catalog.merits();
    prob.biases.assign(model.biases().begin(), model.biases().end());
    for (double u : prob.merits) {
        if (!(u > 0.0)) throw std::invalid_argument("merit must be positive for the fairness LP");
    }
    const auto& u = prob.merits;
    const auto& v = prob.biases;
    const std::size_t nslack = mode == FairnessMode::slack && n > 1 ? 2 * (n - 1) : 0;

    LinearProgram& lp = prob.program;
    lp.num_vars = n * k + nslack;
    lp.objective.assign(lp.num_vars, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) lp.objective[i * k + j] = u[i] * v[j];
    }

    for (std::size_t j = 0; j < k; ++j) {
        LinearConstraint c{{}, Relation::equal, 1.0};
        for (std::size_t i = 0; i < n; ++i) c.terms.emplace_back(i * k + j, 1.0);
        lp.constraints.push_back(std::move(c));
    }
    prob.column_constraints = k;

    for (std::size_t i = 0; i + 1 < n; ++i) {
        LinearConstraint c{{}, Relation::equal, 0.0};
        for (std::size_t j = 0; j < k; ++j) {
            c.terms.emplace_back(i * k + j, v[j] / u[i]);
            c.terms.emplace_back((i + 1) * k + j, -v[j] / u[i + 1]);
        }
        if (nslack > 0) {
            c.terms.emplace_back(n * k + 2 * i, 1.0);
            c.terms.emplace_back(n * k + 2 * i + 1, -1.0);
        }
        lp.constraints.push_back(std::move(c));
    }
    prob.fairness_constraints = n - 1;

    prob.rows_are_equalities = k == n;
    for (std::size_t i = 0; i < n; ++i) {
        LinearConstraint c{{}, prob.rows_are_equalities ? Relation::equal : Relation::less_equal, 1.0};
        for (std::size_t j = 0; j < k; ++j) c.terms.emplace_back(i * k + j, 1.0);
        lp.constraints.push_back(std::move(c));
    }
    prob.row_constraints = n;
    return prob;
}

namespace detail {

// Clamps solver dust and renormalizes every column to sum to exactly 1.
inline MrpMatrix clean_mrp(std::size_t n, std::size_t k, std::span<const double> x) {
    MrpMatrix p(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double v = x[i * k + j];
            p(i, j) = v > 0.0 ? std::min(v, 1.0) : 0.0;  // also maps -0.0 to +0.0
        }
    }
    for (std::size_t j = 0; j < k; ++j) {
        const double s = p.column_sum(j);
        if (s > 0.0) {
            for (std::size_t i = 0; i < n; ++i) p(i, j) /= s;
        }
    }
    return p;
}

inline SolveReport finish_report(const LpProblem& prob, const LpSolution& sol) {
    SolveReport rep;
    rep.iterations = sol.iterations;
    MrpMatrix p = clean_mrp(prob.n, prob.k, sol.x);
    const auto violations = validate_mrp(p);
    if (!violations.empty()) {
        std::ostringstream os;
        os << "solver returned an invalid MRP matrix (" << violations.size()
           << " violations, first: " << to_string(violations.front().kind) << " residual "
           << violations.front().residual << ") after " << sol.iterations << " iterations";
        throw NumericError(os.str());
    }
    const ExposureModel model(prob.biases);
    const auto eps = expected_exposure(p, model);
    rep.status = SolveStatus::optimal;
    rep.objective_value = expected_utility(p, prob.merits, model);
    rep.fairness_residual = fairness_residual(eps, prob.merits);
    for (std::size_t s = prob.n * prob.k; s < prob.program.num_vars; ++s) {
        rep.slack_total += std::max(sol.x[s], 0.0);
    }
    rep.mrp = std::move(p);
    return rep;
}

}  // namespace detail

inline SolveReport solve_mrp(const LpProblem& prob, const SimplexOptions& opt = {}) {
    if (prob.n == 1) {
        // k <= n forces k = 1: the single item takes the single rank.
        SolveReport rep;
        rep.status = SolveStatus::optimal;
        rep.mrp = MrpMatrix::from_rows({{1.0}});
        rep.objective_value = prob.merits[0] * prob.biases[0];
        return rep;
    }

    if (prob.mode == FairnessMode::strict) {
        const LpSolution sol = solve_simplex(prob.program, opt);
        if (sol.status == LpStatus::infeasible) {
            SolveReport rep;
            rep.status = SolveStatus::infeasible;
            rep.iterations = sol.iterations;
            std::ostringstream os;
            os << "query '" << prob.query_id
               << "': no MRP matrix gives exposure proportional to merit (phase-1 minimum "
                  "infeasibility "
               << sol.phase1_infeasibility << " > 0)";
            rep.note = os.str();
            return rep;
        }
        if (sol.status == LpStatus::unbounded) {
            SolveReport rep;
            rep.status = SolveStatus::unbounded;
            rep.iterations = sol.iterations;
            rep.note = "objective unbounded";
            return rep;
        }
        return detail::finish_report(prob, sol);
    }

    // Slack mode, stage 1: minimize total fairness slack.
    LinearProgram stage1 = prob.program;
    std::fill(stage1.objective.begin(), stage1.objective.end(), 0.0);
    for (std::size_t s = prob.n * prob.k; s < stage1.num_vars; ++s) stage1.objective[s] = -1.0;
    const LpSolution s1 = solve_simplex(stage1, opt);
    if (s1.status != LpStatus::optimal) {
        throw NumericError("slack-mode stage 1 did not reach an optimum after " +
                           std::to_string(s1.iterations) + " iterations");
    }
    double min_slack = 0.0;
    for (std::size_t s = prob.n * prob.k; s < stage1.num_vars; ++s) min_slack += std::max(s1.x[s], 0.0);

    // Stage 2: maximize utility with the slack capped at its minimum.
    LinearProgram stage2 = prob.program;
    LinearConstraint cap{{}, Relation::less_equal, min_slack * (1.0 + 1e-9) + 1e-11};
    for (std::size_t s = prob.n * prob.k; s < stage2.num_vars; ++s) cap.terms.emplace_back(s, 1.0);
    stage2.constraints.push_back(std::move(cap));
    const LpSolution s2 = solve_simplex(stage2, opt);
    SolveReport rep = detail::finish_report(prob, s2.status == LpStatus::optimal ? s2 : s1);
    rep.iterations = s1.iterations + s2.iterations;
    if (s2.status != LpStatus::optimal) rep.note = "utility stage failed; returning minimum-slack vertex";
    return rep;
}

}  // namespace fairrank
