#pragma once

// Decomposition of MRP matrices into convex combinations of rankings.
//
// decompose() handles any n x k matrix with unit column sums and row sums at
// most one. The matrix is extended by a single aggregate column holding each
// row's missing mass, and each step finds a perfect matching in which that
// column absorbs n - k rows. The step weight is the smallest matched entry;
// subtracting it zeroes at least one entry, so the loop terminates.
//
// decompose_square() is the textbook algorithm for doubly stochastic matrices
// and decompose_via_full_extension() goes through the n x n doubly stochastic
// completion. Both exist as independent cross-checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "matching.hpp"
#include "random.hpp"

namespace fairrank {

inline constexpr double kZeroThreshold = 1e-12;

using Decomposition = StochasticPolicy;

/// n x (k+1) matrix: the MRP matrix plus a last column with 1 - row sum.
class ExtendedMatrix {
  public:
    ExtendedMatrix() = default;
    ExtendedMatrix(std::size_t n, std::size_t k) : n_(n), k_(k), data_(n * (k + 1), 0.0) {}

    std::size_t n() const noexcept { return n_; }
    std::size_t k() const noexcept { return k_; }
    std::size_t width() const noexcept { return k_ + 1; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * (k_ + 1) + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * (k_ + 1) + j]; }
    double dummy(std::size_t i) const { return (*this)(i, k_); }

  private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<double> data_;
};

inline ExtendedMatrix extend_matrix(const MrpMatrix& p, double tol = kDefaultTolerance) {
    if (p.k() > p.n() || p.k() == 0) throw std::invalid_argument("extend_matrix requires 1 <= k <= n");
    ExtendedMatrix e(p.n(), p.k());
    for (std::size_t i = 0; i < p.n(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.k(); ++j) {
            e(i, j) = p(i, j);
            s += p(i, j);
        }
        double c = 1.0 - s;
        if (c < -tol) {
            std::ostringstream os;
            os << "row " << i << " of the MRP matrix sums to " << s << " > 1";
            throw std::invalid_argument(os.str());
        }
        e(i, p.k()) = p.k() == p.n() ? 0.0 : std::clamp(c, 0.0, 1.0);
    }
    return e;
}

/// Lemma-style completion to an n x n doubly stochastic matrix: the missing
/// row mass is spread evenly over n - k extra columns.
inline MrpMatrix extend_to_doubly_stochastic(const MrpMatrix& p, double tol = kDefaultTolerance) {
    const ExtendedMatrix e = extend_matrix(p, tol);
    const std::size_t n = p.n();
    const std::size_t k = p.k();
    MrpMatrix full(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) full(i, j) = p(i, j);
        for (std::size_t j = k; j < n; ++j) full(i, j) = e.dummy(i) / static_cast<double>(n - k);
    }
    return full;
}

/// Row i is matched to column column_of_item[i]; column k is the aggregate
/// column.
struct Assignment {
    std::vector<std::size_t> column_of_item;

    Ranking ranking(std::size_t k) const {
        Ranking r;
        r.items.assign(k, kUnmatched);
        for (std::size_t i = 0; i < column_of_item.size(); ++i) {
            if (column_of_item[i] < k) r.items[column_of_item[i]] = i;
        }
        return r;
    }
};

namespace detail {

template <typename Entry>
void build_support_graph(std::size_t rows, std::size_t cols, std::size_t dummy_capacity,
                         Entry&& entry, double threshold, Rng& rng, BipartiteGraph& g) {
    g.adjacency.resize(rows);
    g.capacity.assign(cols, 1);
    if (dummy_capacity != 1) g.capacity.back() = dummy_capacity;
    for (std::size_t i = 0; i < rows; ++i) {
        auto& adj = g.adjacency[i];
        adj.clear();
        for (std::size_t j = 0; j < cols; ++j) {
            if (entry(i, j) > threshold) adj.push_back(static_cast<std::uint32_t>(j));
        }
        shuffle(std::span<std::uint32_t>(adj), rng);
    }
}

// Runs the matcher with left vertices visited in a shuffled order and maps the
// result back to the caller's indexing.
inline std::size_t shuffled_matching(const BipartiteGraph& g, std::vector<std::size_t>& match,
                                     Rng& rng) {
    const std::size_t n = g.left_size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    BipartiteGraph permuted;
    permuted.capacity = g.capacity;
    permuted.adjacency.resize(n);
    std::vector<std::size_t> pm(n, kUnmatched);
    for (std::size_t t = 0; t < n; ++t) {
        permuted.adjacency[t] = g.adjacency[order[t]];
        if (match.size() == n) pm[t] = match[order[t]];
    }
    const std::size_t size = max_capacitated_matching(permuted, pm);
    match.assign(n, kUnmatched);
    for (std::size_t t = 0; t < n; ++t) match[order[t]] = pm[t];
    return size;
}

}  // namespace detail

/// Perfect matching on the support of `e`: every row is matched, each of the
/// first k columns exactly once and the aggregate column n - k times.
inline Assignment find_assignment(const ExtendedMatrix& e, Rng& rng,
                                  double threshold = kZeroThreshold) {
    BipartiteGraph g;
    detail::build_support_graph(
        e.n(), e.width(), e.n() - e.k(), [&](std::size_t i, std::size_t j) { return e(i, j); },
        threshold, rng, g);
    std::vector<std::size_t> match;
    if (detail::shuffled_matching(g, match, rng) != e.n()) {
        throw NumericError("decomposition stuck: no perfect matching on the support");
    }
    return Assignment{std::move(match)};
}

struct DecomposeOptions {
    double zero_threshold = kZeroThreshold;
    double tolerance = kDefaultTolerance;
    // A remainder at most this large that no longer admits a perfect matching
    // is treated as round-off and folded into the emitted weights.
    double residual_tolerance = 1e-9;
};

inline Decomposition decompose(const MrpMatrix& p, std::uint64_t seed,
                               const DecomposeOptions& opt = {}) {
    if (const auto v = validate_mrp(p, opt.tolerance); !v.empty()) {
        std::ostringstream os;
        os << "cannot decompose an invalid MRP matrix: " << to_string(v.front().kind)
           << " at row " << v.front().row << ", column " << v.front().column << " (residual "
           << v.front().residual << ")";
        throw std::invalid_argument(os.str());
    }
    const std::size_t n = p.n();
    const std::size_t k = p.k();
    ExtendedMatrix w = extend_matrix(p, opt.tolerance);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= k; ++j) {
            if (w(i, j) <= opt.zero_threshold) w(i, j) = 0.0;
            nonzero += w(i, j) != 0.0;
        }
    }

    Rng rng(seed);
    Decomposition out;
    out.n = n;
    out.k = k;
    BipartiteGraph g;
    std::vector<std::size_t> match;
    const std::size_t max_steps = n * (k + 1) + 8;
    double emitted = 0.0;

    while (nonzero > 0) {
        if (out.entries.size() >= max_steps) {
            throw NumericError("decomposition exceeded " + std::to_string(max_steps) +
                               " steps without emptying the matrix");
        }
        detail::build_support_graph(
            n, k + 1, n - k, [&](std::size_t i, std::size_t j) { return w(i, j); }, 0.0, rng, g);
        // Keep the part of the previous matching that is still supported.
        for (std::size_t i = 0; i < match.size(); ++i) {
            if (match[i] != kUnmatched && w(i, match[i]) == 0.0) match[i] = kUnmatched;
        }
        if (detail::shuffled_matching(g, match, rng) != n) {
            double remaining = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                for (std::size_t i = 0; i < n; ++i) remaining += w(i, j);
            }
            remaining /= static_cast<double>(k);
            if (remaining > opt.residual_tolerance || emitted <= 0.0) {
                std::ostringstream os;
                os << "decomposition stuck: no perfect matching with remaining mass " << remaining;
                throw NumericError(os.str());
            }
            for (auto& e : out.entries) e.prob /= emitted;
            break;
        }

        double alpha = INFINITY;
        for (std::size_t i = 0; i < n; ++i) alpha = std::min(alpha, w(i, match[i]));
        PolicyEntry entry{alpha, Assignment{match}.ranking(k)};
        for (std::size_t i = 0; i < n; ++i) {
            double& x = w(i, match[i]);
            x = x - alpha <= opt.zero_threshold ? 0.0 : x - alpha;
            nonzero -= x == 0.0;
        }
        emitted += alpha;
        out.entries.push_back(std::move(entry));
    }
    return out;
}

/// Textbook decomposition of a doubly stochastic n x n matrix: a fresh
/// maximum matching on the support at every step.
inline Decomposition decompose_square(const MrpMatrix& p, std::uint64_t seed,
                                      const DecomposeOptions& opt = {}) {
    if (p.n() != p.k()) throw std::invalid_argument("decompose_square requires a square matrix");
    if (!is_valid_mrp(p, opt.tolerance)) throw std::invalid_argument("matrix is not doubly stochastic");
    const std::size_t n = p.n();
    MrpMatrix w = p;
    for (double& x : w.data()) {
        if (x <= opt.zero_threshold) x = 0.0;
    }
    Rng rng(seed);
    Decomposition out;
    out.n = n;
    out.k = n;
    BipartiteGraph g;
    double emitted = 0.0;
    for (;;) {
        if (std::all_of(w.data().begin(), w.data().end(), [](double x) { return x == 0.0; })) break;
        if (out.entries.size() > n * n + 8) throw NumericError("square decomposition did not terminate");
        detail::build_support_graph(
            n, n, 1, [&](std::size_t i, std::size_t j) { return w(i, j); }, 0.0, rng, g);
        std::vector<std::size_t> match;
        if (detail::shuffled_matching(g, match, rng) != n) {
            double remaining = 0.0;
            for (double x : w.data()) remaining += x;
            remaining /= static_cast<double>(n);
            if (remaining > opt.residual_tolerance || emitted <= 0.0) {
                throw NumericError("square decomposition stuck");
            }
            for (auto& e : out.entries) e.prob /= emitted;
            break;
        }
        double alpha = INFINITY;
        for (std::size_t i = 0; i < n; ++i) alpha = std::min(alpha, w(i, match[i]));
        for (std::size_t i = 0; i < n; ++i) {
            double& x = w(i, match[i]);
            x = x - alpha <= opt.zero_threshold ? 0.0 : x - alpha;
        }
        emitted += alpha;
        out.entries.push_back({alpha, Assignment{match}.ranking(n)});
    }
    return out;
}

/// Sums the probabilities of repeated rankings, keeping first-seen order.
inline StochasticPolicy merge_duplicates(const StochasticPolicy& policy) {
    StochasticPolicy out;
    out.n = policy.n;
    out.k = policy.k;
    std::map<Ranking, std::size_t> index;
    for (const auto& e : policy.entries) {
        auto [it, inserted] = index.try_emplace(e.ranking, out.entries.size());
        if (inserted) {
            out.entries.push_back(e);
        } else {
            out.entries[it->second].prob += e.prob;
        }
    }
    return out;
}

/// Decomposes through the full n x n completion, then keeps the first k
/// ranks of every permutation.
inline Decomposition decompose_via_full_extension(const MrpMatrix& p, std::uint64_t seed,
                                                  const DecomposeOptions& opt = {}) {
    const MrpMatrix full = extend_to_doubly_stochastic(p, opt.tolerance);
    Decomposition sq = decompose_square(full, seed, opt);
    for (auto& e : sq.entries) e.ranking.items.resize(p.k());
    sq.k = p.k();
    return merge_duplicates(sq);
}

inline MrpMatrix reconstruct(const Decomposition& d) { return marginals(d); }

}  // namespace fairrank
