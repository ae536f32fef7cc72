#pragma once

// Test-only generators and reference oracles. Nothing here calls into the
// library's solver, matcher or decomposition code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <fairrank/core.hpp>
#include <fairrank/random.hpp>

namespace fairrank::oracle {

inline Ranking random_ranking(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(k);
    return Ranking{perm};
}

/// Sinkhorn-balanced positive n x n matrix, truncated to k columns. Columns
/// are normalized last so they sum to 1 up to one rounding per entry.
inline MrpMatrix dense_mrp(std::size_t n, std::size_t k, Rng& rng) {
    std::uniform_real_distribution<double> U(0.05, 1.0);
    std::vector<double> a(n * n);
    for (double& x : a) x = U(rng) * U(rng);
    for (int it = 0; it < 2000; ++it) {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += a[i * n + j];
            worst = std::max(worst, std::abs(s - 1.0));
            for (std::size_t j = 0; j < n; ++j) a[i * n + j] /= s;
        }
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += a[i * n + j];
            for (std::size_t i = 0; i < n; ++i) a[i * n + j] /= s;
        }
        if (worst < 1e-14) break;
    }
    MrpMatrix p(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) p(i, j) = a[i * n + j];
    }
    return p;
}

/// Convex combination of m random rankings: sparse support, many ties.
inline MrpMatrix sparse_mrp(std::size_t n, std::size_t k, std::size_t m, Rng& rng) {
    std::uniform_real_distribution<double> U(0.1, 1.0);
    std::vector<double> w(m);
    for (double& x : w) x = U(rng);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    MrpMatrix p(n, k);
    for (std::size_t r = 0; r < m; ++r) {
        const Ranking rk = random_ranking(n, k, rng);
        for (std::size_t j = 0; j < k; ++j) p(rk.items[j], j) += w[r] / total;
    }
    return p;
}

/// Either construction, chosen at random, so suites see both dense and
/// degenerate supports.
inline MrpMatrix random_mrp(std::size_t n, std::size_t k, Rng& rng) {
    if (rng() % 2 == 0) return dense_mrp(n, k, rng);
    return sparse_mrp(n, k, 1 + rng() % (n + 2), rng);
}

/// Entrywise sum of alpha * indicator(ranking) computed directly.
inline std::vector<double> sum_rankings(std::size_t n, std::size_t k,
                                        const std::vector<PolicyEntry>& entries) {
    std::vector<double> out(n * k, 0.0);
    for (const auto& e : entries) {
        for (std::size_t j = 0; j < k; ++j) out[e.ranking.items[j] * k + j] += e.prob;
    }
    return out;
}

inline double max_abs_error(const MrpMatrix& p, const std::vector<double>& flat) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.n(); ++i) {
        for (std::size_t j = 0; j < p.k(); ++j) {
            worst = std::max(worst, std::abs(p(i, j) - flat[i * p.k() + j]));
        }
    }
    return worst;
}

/// Exhaustive search for an assignment of k ranks to distinct rows using only
/// entries above `threshold`, with every unplaced row having a dummy entry
/// above `threshold`. `e` is row-major n x (k + 1).
inline std::optional<std::vector<std::size_t>> brute_force_assignment(std::size_t n, std::size_t k,
                                                                        const std::vector<double>& e,
                                                                        double threshold) {
    const std::size_t w = k + 1;
    std::vector<std::size_t> rank_row(k);
    std::vector<bool> used(n, false);
    std::optional<std::vector<std::size_t>> found;
    std::function<void(std::size_t)> rec = [&](std::size_t j) {
        if (found) return;
        if (j == k) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!used[i] && !(e[i * w + k] > threshold)) return;
            }
            std::vector<std::size_t> col(n, k);
            for (std::size_t r = 0; r < k; ++r) col[rank_row[r]] = r;
            found = col;
            return;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (used[i] || !(e[i * w + j] > threshold)) continue;
            used[i] = true;
            rank_row[j] = i;
            rec(j + 1);
            used[i] = false;
        }
    };
    rec(0);
    return found;
}

/// Dense LP max c.x subject to A x = b, G x <= h, x >= 0 (bounds included by
/// the caller or added here), solved by enumerating every vertex. Only for
/// tiny problems.
struct VertexLp {
    std::size_t d = 0;
    std::vector<double> c;
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    std::vector<std::vector<double>> g;
    std::vector<double> h;
};

struct VertexResult {
    bool feasible = false;
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> x;
};

namespace detail {

// Row-reduces [m | rhs]; returns the unique solution when the system is
// consistent with full column rank.
inline std::optional<std::vector<double>> solve_unique(std::vector<std::vector<double>> m,
                                                       std::vector<double> rhs, std::size_t d) {
    const std::size_t rows = m.size();
    std::size_t r = 0;
    std::vector<std::size_t> pivot_col;
    for (std::size_t col = 0; col < d && r < rows; ++col) {
        std::size_t best = r;
        for (std::size_t i = r; i < rows; ++i) {
            if (std::abs(m[i][col]) > std::abs(m[best][col])) best = i;
        }
        if (std::abs(m[best][col]) < 1e-11) continue;
        std::swap(m[best], m[r]);
        std::swap(rhs[best], rhs[r]);
        for (std::size_t i = 0; i < rows; ++i) {
            if (i == r) continue;
            const double f = m[i][col] / m[r][col];
            if (f == 0.0) continue;
            for (std::size_t t = col; t < d; ++t) m[i][t] -= f * m[r][t];
            rhs[i] -= f * rhs[r];
        }
        pivot_col.push_back(col);
        ++r;
    }
    if (r < d) return std::nullopt;
    for (std::size_t i = r; i < rows; ++i) {
        if (std::abs(rhs[i]) > 1e-8) return std::nullopt;
    }
    std::vector<double> x(d);
    for (std::size_t i = 0; i < r; ++i) x[pivot_col[i]] = rhs[i] / m[i][pivot_col[i]];
    return x;
}

inline std::size_t rank(std::vector<std::vector<double>> m, std::size_t d) {
    std::size_t r = 0;
    for (std::size_t col = 0; col < d && r < m.size(); ++col) {
        std::size_t best = r;
        for (std::size_t i = r; i < m.size(); ++i) {
            if (std::abs(m[i][col]) > std::abs(m[best][col])) best = i;
        }
        if (std::abs(m[best][col]) < 1e-11) continue;
        std::swap(m[best], m[r]);
        for (std::size_t i = r + 1; i < m.size(); ++i) {
            const double f = m[i][col] / m[r][col];
            for (std::size_t t = col; t < d; ++t) m[i][t] -= f * m[r][t];
        }
        ++r;
    }
    return r;
}

}  // namespace detail

inline VertexResult enumerate_vertices(const VertexLp& lp, double feas_tol = 1e-9) {
    VertexResult out;
    std::vector<std::vector<double>> ineq = lp.g;
    std::vector<double> rhs = lp.h;
    for (std::size_t v = 0; v < lp.d; ++v) {
        std::vector<double> row(lp.d, 0.0);
        row[v] = -1.0;
        ineq.push_back(row);
        rhs.push_back(0.0);
    }
    const std::size_t m = ineq.size();
    const std::size_t need = lp.d - detail::rank(lp.a, lp.d);
    std::vector<std::size_t> pick;
    auto evaluate = [&] {
        std::vector<std::vector<double>> sys = lp.a;
        std::vector<double> sr = lp.b;
        for (std::size_t p : pick) {
            sys.push_back(ineq[p]);
            sr.push_back(rhs[p]);
        }
        const auto x = detail::solve_unique(sys, sr, lp.d);
        if (!x) return;
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t t = 0; t < lp.d; ++t) s += ineq[i][t] * (*x)[t];
            if (s > rhs[i] + feas_tol) return;
        }
        double obj = 0.0;
        for (std::size_t t = 0; t < lp.d; ++t) obj += lp.c[t] * (*x)[t];
        out.feasible = true;
        if (obj > out.best) {
            out.best = obj;
            out.x = *x;
        }
    };
    std::function<void(std::size_t)> rec = [&](std::size_t start) {
        if (pick.size() == need) {
            evaluate();
            return;
        }
        for (std::size_t i = start; i + (need - pick.size()) <= m; ++i) {
            pick.push_back(i);
            rec(i + 1);
            pick.pop_back();
        }
    };
    rec(0);
    return out;
}

/// The fairness LP written out independently: variables P[i][j] row-major,
/// maximize sum u_i v_j P_ij, column sums 1, row sums <= 1 (== when k = n),
/// and eps_i / u_i equal for all i.
inline VertexLp fairness_vertex_lp(const std::vector<double>& u, const std::vector<double>& v) {
    const std::size_t n = u.size();
    const std::size_t k = v.size();
    VertexLp lp;
    lp.d = n * k;
    lp.c.assign(lp.d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) lp.c[i * k + j] = u[i] * v[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> row(lp.d, 0.0);
        for (std::size_t i = 0; i < n; ++i) row[i * k + j] = 1.0;
        lp.a.push_back(row);
        lp.b.push_back(1.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(lp.d, 0.0);
        for (std::size_t j = 0; j < k; ++j) row[i * k + j] = 1.0;
        if (k == n) {
            lp.a.push_back(row);
            lp.b.push_back(1.0);
        } else {
            lp.g.push_back(row);
            lp.h.push_back(1.0);
        }
    }
    // eps_i * u_0 - eps_0 * u_i = 0, a different but equivalent encoding.
    for (std::size_t i = 1; i < n; ++i) {
        std::vector<double> row(lp.d, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
            row[i * k + j] += v[j] * u[0];
            row[0 * k + j] -= v[j] * u[i];
        }
        lp.a.push_back(row);
        lp.b.push_back(0.0);
    }
    return lp;
}

/// Feasibility of exposure proportional to merit: the target vector must be
/// majorized by v padded with zeros (sorted partial sums bounded by the top
/// partial sums of v).
inline bool proportional_exposure_feasible(const std::vector<double>& u, const std::vector<double>& v,
                                           double tol = 1e-12) {
    const double total_v = std::accumulate(v.begin(), v.end(), 0.0);
    const double total_u = std::accumulate(u.begin(), u.end(), 0.0);
    std::vector<double> target(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) target[i] = total_v * u[i] / total_u;
    std::sort(target.begin(), target.end(), std::greater<>());
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t m = 0; m < target.size(); ++m) {
        lhs += target[m];
        if (m < v.size()) rhs += v[m];
        if (lhs > rhs + tol) return false;
    }
    return true;
}

/// Population z-scores computed the textbook way, for cross-checks.
inline std::vector<double> reference_zscores(const std::vector<double>& g) {
    const double n = static_cast<double>(g.size());
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : g) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    std::vector<double> z(g.size(), 0.0);
    if (sd == 0.0) return z;
    for (std::size_t i = 0; i < g.size(); ++i) z[i] = (g[i] - mean) / sd;
    return z;
}

inline ItemCatalog make_catalog(const std::vector<double>& merits, const std::vector<double>& features = {},
                                const std::string& id = "q") {
    std::vector<Item> items(merits.size());
    for (std::size_t i = 0; i < merits.size(); ++i) {
        items[i] = {"d" + std::to_string(i), merits[i], features.empty() ? 0.0 : features[i]};
    }
    return ItemCatalog(id, std::move(items));
}

}  // namespace fairrank::oracle
