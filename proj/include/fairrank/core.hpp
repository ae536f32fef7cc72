#pragma once

// Domain types shared by every module: item catalogs, the position-based
// exposure model, marginal rank probability (MRP) matrices, rankings and
// stochastic policies.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fairrank {

inline constexpr double kDefaultTolerance = 1e-9;
inline constexpr double kDefaultMeritFloor = 1e-4;

/// Raised when a numeric routine cannot make progress (singular basis,
/// iteration cap, a decomposition that cannot find a matching).
class NumericError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Item {
    std::string doc_id;
    double merit = 0.0;
    double feature = 0.0;
};

/// Candidate set of one query. Merits must already lie in [merit_floor, 1];
/// use normalize_merits() on raw scores first.
class ItemCatalog {
  public:
    ItemCatalog() = default;

    ItemCatalog(std::string query_id, std::vector<Item> items,
                double merit_floor = kDefaultMeritFloor)
        : query_id_(std::move(query_id)), items_(std::move(items)) {
        if (items_.empty()) {
            throw std::invalid_argument("catalog '" + query_id_ + "' has no items");
        }
        std::unordered_set<std::string> seen;
        for (const auto& item : items_) {
            if (!seen.insert(item.doc_id).second) {
                throw std::invalid_argument("catalog '" + query_id_ +
                                            "': duplicate doc_id '" + item.doc_id + "'");
            }
            if (!(item.merit >= merit_floor - 1e-15 && item.merit <= 1.0 + 1e-15)) {
                throw std::invalid_argument("catalog '" + query_id_ + "': merit of '" +
                                            item.doc_id + "' outside [merit_floor, 1]");
            }
            if (!std::isfinite(item.feature)) {
                throw std::invalid_argument("catalog '" + query_id_ + "': non-finite feature for '" +
                                            item.doc_id + "'");
            }
        }
    }

    const std::string& query_id() const noexcept { return query_id_; }
    std::size_t size() const noexcept { return items_.size(); }
    std::span<const Item> items() const noexcept { return items_; }
    const Item& operator[](std::size_t i) const { return items_.at(i); }

    std::vector<double> merits() const {
        std::vector<double> out(items_.size());
        std::transform(items_.begin(), items_.end(), out.begin(),
                       [](const Item& it) { return it.merit; });
        return out;
    }

    std::vector<double> features() const {
        std::vector<double> out(items_.size());
        std::transform(items_.begin(), items_.end(), out.begin(),
                       [](const Item& it) { return it.feature; });
        return out;
    }

  private:
    std::string query_id_;
    std::vector<Item> items_;
};

/// Affinely rescales raw scores onto [floor, 1]. A constant score vector maps
/// to all ones.
inline std::vector<double> normalize_merits(std::span<const double> raw,
                                            double floor = kDefaultMeritFloor) {
    if (raw.empty()) return {};
    const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(raw.size(), 1.0);
    if (hi - lo <= 0.0) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = floor + (1.0 - floor) * (raw[i] - lo) / (hi - lo);
    }
    return out;
}

/// Position-based model: examination probability v(j) for ranks 1..k.
class ExposureModel {
  public:
    ExposureModel() = default;

    explicit ExposureModel(std::vector<double> biases) : biases_(std::move(biases)) {
        if (biases_.empty()) throw std::invalid_argument("exposure model needs k >= 1");
        for (std::size_t j = 0; j < biases_.size(); ++j) {
            if (!(biases_[j] > 0.0) || !std::isfinite(biases_[j])) {
                throw std::invalid_argument("position biases must be positive and finite");
            }
            if (j > 0 && biases_[j] > biases_[j - 1]) {
                throw std::invalid_argument("position biases must be non-increasing");
            }
        }
    }

    /// v(j) = 1 / log_base(1 + j). Base 2 gives v(1) = 1.
    static ExposureModel logarithmic(std::size_t k, double log_base = 2.0) {
        if (k == 0) throw std::invalid_argument("exposure model needs k >= 1");
        if (!(log_base > 1.0)) throw std::invalid_argument("log base must exceed 1");
        std::vector<double> v(k);
        for (std::size_t j = 0; j < k; ++j) {
            v[j] = std::log(log_base) / std::log(2.0 + static_cast<double>(j));
        }
        return ExposureModel(std::move(v));
    }

    std::size_t k() const noexcept { return biases_.size(); }
    std::span<const double> biases() const noexcept { return biases_; }

    double total() const { return std::accumulate(biases_.begin(), biases_.end(), 0.0); }

  private:
    std::vector<double> biases_;
};

/// v(rank) for a 1-based rank.
inline double position_bias(std::size_t rank, const ExposureModel& model) {
    if (rank < 1 || rank > model.k()) {
        throw std::out_of_range("rank " + std::to_string(rank) + " outside [1, " +
                                std::to_string(model.k()) + "]");
    }
    return model.biases()[rank - 1];
}

/// Dense n x k matrix, row-major. P(i, j) is the probability that item i is
/// placed at rank j + 1.
class MrpMatrix {
  public:
    MrpMatrix() = default;
    MrpMatrix(std::size_t n, std::size_t k) : n_(n), k_(k), data_(n * k, 0.0) {}
    MrpMatrix(std::size_t n, std::size_t k, std::vector<double> row_major)
        : n_(n), k_(k), data_(std::move(row_major)) {
        if (data_.size() != n * k) throw std::invalid_argument("MRP entry count != n*k");
    }

    static MrpMatrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("MRP matrix needs at least one row");
        const std::size_t k = rows.front().size();
        MrpMatrix m(rows.size(), k);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != k) throw std::invalid_argument("ragged MRP rows");
            std::copy(rows[i].begin(), rows[i].end(), m.data_.begin() + i * k);
        }
        return m;
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t k() const noexcept { return k_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * k_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * k_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * k_, k_}; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double row_sum(std::size_t i) const {
        auto r = row(i);
        return std::accumulate(r.begin(), r.end(), 0.0);
    }
    double column_sum(std::size_t j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, j);
        return s;
    }

    double max_abs_diff(const MrpMatrix& other) const {
        if (other.n_ != n_ || other.k_ != k_) throw std::invalid_argument("MRP shape mismatch");
        double d = 0.0;
        for (std::size_t t = 0; t < data_.size(); ++t) {
            d = std::max(d, std::abs(data_[t] - other.data_[t]));
        }
        return d;
    }

  private:
    std::size_t n_ = 0;
    std::size_t k_ = 0;
    std::vector<double> data_;
};

enum class MrpViolationKind { entry_range, column_sum, row_sum_exceeds, row_sum_square, shape };

struct MrpViolation {
    MrpViolationKind kind;
    std::size_t row = 0;     // meaningful for entry_range and row_* kinds
    std::size_t column = 0;  // meaningful for entry_range and column_sum
    double residual = 0.0;   // magnitude by which the invariant is missed
};

inline const char* to_string(MrpViolationKind kind) {
    switch (kind) {
        case MrpViolationKind::entry_range: return "entry_range";
        case MrpViolationKind::column_sum: return "column_sum";
        case MrpViolationKind::row_sum_exceeds: return "row_sum_exceeds";
        case MrpViolationKind::row_sum_square: return "row_sum_square";
        case MrpViolationKind::shape: return "shape";
    }
    return "unknown";
}

/// Checks the MRP invariants and returns every violation found. An empty
/// result means the matrix is valid.
inline std::vector<MrpViolation> validate_mrp(const MrpMatrix& p,
                                              double tol = kDefaultTolerance) {
    std::vector<MrpViolation> out;
    if (p.n() == 0 || p.k() == 0 || p.k() > p.n()) {
        out.push_back({MrpViolationKind::shape, p.n(), p.k(), 0.0});
        return out;
    }
    for (std::size_t i = 0; i < p.n(); ++i) {
        for (std::size_t j = 0; j < p.k(); ++j) {
            const double x = p(i, j);
            if (!std::isfinite(x)) {
                out.push_back({MrpViolationKind::entry_range, i, j, INFINITY});
            } else if (x < -tol) {
                out.push_back({MrpViolationKind::entry_range, i, j, -x});
            } else if (x > 1.0 + tol) {
                out.push_back({MrpViolationKind::entry_range, i, j, x - 1.0});
            }
        }
    }
    for (std::size_t j = 0; j < p.k(); ++j) {
        const double r = p.column_sum(j) - 1.0;
        if (std::abs(r) > tol) out.push_back({MrpViolationKind::column_sum, 0, j, std::abs(r)});
    }
    const bool square = p.k() == p.n();
    for (std::size_t i = 0; i < p.n(); ++i) {
        const double r = p.row_sum(i) - 1.0;
        if (square) {
            if (std::abs(r) > tol) out.push_back({MrpViolationKind::row_sum_square, i, 0, std::abs(r)});
        } else if (r > tol) {
            out.push_back({MrpViolationKind::row_sum_exceeds, i, 0, r});
        }
    }
    return out;
}

inline bool is_valid_mrp(const MrpMatrix& p, double tol = kDefaultTolerance) {
    return validate_mrp(p, tol).empty();
}

/// eps[i] = sum_j P(i, j) * v(j + 1).
inline std::vector<double> expected_exposure(const MrpMatrix& p, const ExposureModel& model) {
    if (model.k() != p.k()) {
        throw std::invalid_argument("exposure model has k=" + std::to_string(model.k()) +
                                    " but MRP matrix has k=" + std::to_string(p.k()));
    }
    const auto v = model.biases();
    std::vector<double> eps(p.n(), 0.0);
    for (std::size_t i = 0; i < p.n(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < p.k(); ++j) s += p(i, j) * v[j];
        eps[i] = s;
    }
    return eps;
}

/// Items placed at ranks 1..k. items[j] is the item index at rank j + 1.
struct Ranking {
    std::vector<std::size_t> items;

    std::size_t k() const noexcept { return items.size(); }
    friend bool operator==(const Ranking&, const Ranking&) = default;
    friend auto operator<=>(const Ranking&, const Ranking&) = default;
};

inline bool is_valid_ranking(const Ranking& r, std::size_t n) {
    std::vector<bool> used(n, false);
    for (std::size_t idx : r.items) {
        if (idx >= n || used[idx]) return false;
        used[idx] = true;
    }
    return true;
}

struct PolicyEntry {
    double prob = 0.0;
    Ranking ranking;
};

/// Executable policy: a distribution over rankings of k out of n items.
struct StochasticPolicy {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<PolicyEntry> entries;

    double total_probability() const {
        double s = 0.0;
        for (const auto& e : entries) s += e.prob;
        return s;
    }
};

/// Throws std::invalid_argument unless the policy is a proper distribution
/// over valid rankings.
inline void check_policy(const StochasticPolicy& policy, double tol = kDefaultTolerance) {
    if (policy.entries.empty()) throw std::invalid_argument("policy has no entries");
    for (const auto& e : policy.entries) {
        if (!(e.prob > 0.0) || e.prob > 1.0 + tol) {
            throw std::invalid_argument("policy probability outside (0, 1]");
        }
        if (e.ranking.k() != policy.k || !is_valid_ranking(e.ranking, policy.n)) {
            throw std::invalid_argument("policy contains an invalid ranking");
        }
    }
    if (std::abs(policy.total_probability() - 1.0) > tol) {
        throw std::invalid_argument("policy probabilities do not sum to 1");
    }
}

/// Marginal rank probabilities of a distribution over rankings.
inline MrpMatrix marginals(const StochasticPolicy& policy) {
    MrpMatrix p(policy.n, policy.k);
    for (const auto& e : policy.entries) {
        for (std::size_t j = 0; j < e.ranking.k(); ++j) p(e.ranking.items[j], j) += e.prob;
    }
    return p;
}

}  // namespace fairrank
