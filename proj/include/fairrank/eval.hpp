#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "core.hpp"
#include "felix.hpp"
#include "lp.hpp"

namespace fairrank {

/// eps*_i = (sum_j v_j) * u_i / sum(u).
inline std::vector<double> target_exposure(const ItemCatalog& catalog, const ExposureModel& model) {
    const auto u = catalog.merits();
    double total_merit = 0.0;
    for (double x : u) total_merit += x;
    const double total = model.total();
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = total * u[i] / total_merit;
    return out;
}

/// Squared L2 distance between realized and target expected exposure.
inline double ee_loss(const MrpMatrix& p, const ItemCatalog& catalog, const ExposureModel& model) {
    if (p.n() != catalog.size()) throw std::invalid_argument("MRP rows != catalog size");
    const auto eps = expected_exposure(p, model);
    const auto target = target_exposure(catalog, model);
    double loss = 0.0;
    for (std::size_t i = 0; i < eps.size(); ++i) loss += (eps[i] - target[i]) * (eps[i] - target[i]);
    return loss;
}

inline double ee_loss(const StochasticPolicy& policy, const ItemCatalog& catalog,
                      const ExposureModel& model) {
    return ee_loss(marginals(policy), catalog, model);
}

inline double policy_utility(const StochasticPolicy& policy, const ItemCatalog& catalog,
                             const ExposureModel& model) {
    return expected_utility(marginals(policy), catalog.merits(), model);
}

namespace detail {

inline double discount(std::size_t rank) { return 1.0 / std::log2(1.0 + static_cast<double>(rank)); }

}  // namespace detail

/// Expected NDCG@cutoff with gain = merit and discount 1/log2(1 + rank). A
/// cutoff beyond the ranking length is clipped to it.
inline double ndcg_at(const StochasticPolicy& policy, const ItemCatalog& catalog, std::size_t cutoff) {
    const std::size_t c = std::min(cutoff, policy.k);
    auto sorted = catalog.merits();
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t j = 0; j < c && j < sorted.size(); ++j) ideal += sorted[j] * detail::discount(j + 1);
    if (ideal <= 0.0) return 0.0;
    double expected = 0.0;
    for (const auto& e : policy.entries) {
        double dcg = 0.0;
        for (std::size_t j = 0; j < c; ++j) dcg += catalog[e.ranking.items[j]].merit * detail::discount(j + 1);
        expected += e.prob * dcg / ideal;
    }
    return expected;
}

/// Probability mass on rankings the predicate rejects.
inline double prob_unknown(const StochasticPolicy& policy, const ItemCatalog& catalog,
                           const ExposurePredicate& known) {
    double mass = 0.0;
    for (const auto& e : policy.entries) {
        if (!known(e.ranking, catalog)) mass += e.prob;
    }
    return mass;
}

inline double prob_unknown(const StochasticPolicy& policy, const ItemCatalog& catalog,
                           const ZScoreOutlierPredicate& pred) {
    return prob_unknown(policy, catalog, ExposurePredicate(pred));
}

/// Expected sum of |z| over the outliers in each ranking's top-cutoff.
inline double outlierness_at(const StochasticPolicy& policy, const ItemCatalog& catalog,
                             std::size_t cutoff, double lambda = 2.5) {
    const ZScoreOutlierPredicate ctx{lambda, cutoff};
    double expected = 0.0;
    for (const auto& e : policy.entries) {
        double sum = 0.0;
        for (double z : zscores(ctx.context_features(e.ranking, catalog))) {
            if (std::abs(z) > lambda) sum += std::abs(z);
        }
        expected += e.prob * sum;
    }
    return expected;
}

struct EvalReport {
    double ee_l = 0.0;
    std::map<std::size_t, double> ndcg_at;
    double prob_unknown = 0.0;
    double outlierness_at = 0.0;
    double utility = 0.0;
    double epsilon_total = 0.0;
};

inline EvalReport evaluate(const StochasticPolicy& policy, const ItemCatalog& catalog,
                           const ExposureModel& model, const ZScoreOutlierPredicate& pred,
                           std::span<const std::size_t> ndcg_cutoffs = {}) {
    EvalReport r;
    const MrpMatrix p = marginals(policy);
    r.ee_l = ee_loss(p, catalog, model);
    for (std::size_t c : ndcg_cutoffs) r.ndcg_at[c] = ndcg_at(policy, catalog, c);
    r.prob_unknown = prob_unknown(policy, catalog, pred);
    r.outlierness_at = outlierness_at(policy, catalog, pred.context_size ? pred.context_size : policy.k,
                                      pred.lambda);
    r.utility = expected_utility(p, catalog.merits(), model);
    r.epsilon_total = model.total();
    return r;
}

}  // namespace fairrank
