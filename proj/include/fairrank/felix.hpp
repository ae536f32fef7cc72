#pragma once

// Iterative re-sampling that moves policy mass away from rankings whose
// exposure distribution is unknown, without touching the marginals.
//
// Each iteration decomposes the working matrix, commits the rankings the
// predicate accepts, and sums the rejected ones back into a matrix that is
// decomposed again (after rescaling to unit column sums) in the next
// iteration with a different matching order. After the last iteration the
// rejected rankings are committed as well, so the final policy always has
// exactly the input marginals.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "bvn.hpp"
#include "core.hpp"
#include "random.hpp"

namespace fairrank {

/// z_i = (g_i - mean) / population stddev. All zeros when the stddev is 0.
inline std::vector<double> zscores(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("zscores of an empty list");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double g : values) mean += g;
    mean /= n;
    double var = 0.0;
    for (double g : values) var += (g - mean) * (g - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> z(values.size(), 0.0);
    // Relative guard: a spread at round-off level of the values is no spread.
    if (!(sd > 1e-14 * std::max(1.0, std::abs(mean)))) return z;
    for (std::size_t i = 0; i < values.size(); ++i) z[i] = (values[i] - mean) / sd;
    return z;
}

/// True means the ranking's exposure distribution is known.
using ExposurePredicate = std::function<bool(const Ranking&, const ItemCatalog&)>;

/// An item is an outlier when |z| > lambda among the features of the first
/// `context_size` ranked items (0 = the whole ranking).
struct ZScoreOutlierPredicate {
    double lambda = 2.5;
    std::size_t context_size = 0;

    std::vector<double> context_features(const Ranking& r, const ItemCatalog& catalog) const {
        const std::size_t c =
            context_size == 0 ? r.k() : std::min(context_size, r.k());
        std::vector<double> g(c);
        for (std::size_t j = 0; j < c; ++j) g[j] = catalog[r.items[j]].feature;
        return g;
    }

    bool operator()(const Ranking& r, const ItemCatalog& catalog) const {
        if (r.k() == 0) return true;
        for (double z : zscores(context_features(r, catalog))) {
            if (std::abs(z) > lambda) return false;
        }
        return true;
    }
};

inline bool is_known_exposure(const Ranking& r, const ItemCatalog& catalog,
                              const ZScoreOutlierPredicate& pred) {
    return pred(r, catalog);
}

struct FelixConfig {
    std::size_t iterations = 20;
    std::uint64_t seed = 42;
    DecomposeOptions decompose;
};

struct FelixResult {
    StochasticPolicy policy;
    // unknown_mass_trace[t] is the probability mass the predicate rejected in
    // iteration t + 1, i.e. what the policy would show with t + 1 iterations.
    std::vector<double> unknown_mass_trace;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
};

inline FelixResult run_felix(const MrpMatrix& p, const ItemCatalog& catalog,
                             const ExposurePredicate& known, const FelixConfig& cfg) {
    if (cfg.iterations < 1) throw std::invalid_argument("FELIX needs at least one iteration");
    if (catalog.size() != p.n()) {
        throw std::invalid_argument("catalog has " + std::to_string(catalog.size()) +
                                    " items but the MRP matrix has " + std::to_string(p.n()) +
                                    " rows");
    }
    FelixResult result;
    result.iterations = cfg.iterations;
    result.seed = cfg.seed;
    StochasticPolicy& policy = result.policy;
    policy.n = p.n();
    policy.k = p.k();
    std::map<Ranking, std::size_t> index;
    auto commit = [&](const PolicyEntry& e) {
        auto [it, inserted] = index.try_emplace(e.ranking, policy.entries.size());
        if (inserted) {
            policy.entries.push_back(e);
        } else {
            policy.entries[it->second].prob += e.prob;
        }
    };

    MrpMatrix working = p;
    double mass = 1.0;
    for (std::size_t t = 0; t < cfg.iterations; ++t) {
        const bool last = t + 1 == cfg.iterations;
        const Decomposition d = decompose(working, derive_seed(cfg.seed, t), cfg.decompose);
        MrpMatrix unknown(p.n(), p.k());
        double unknown_mass = 0.0;
        double unknown_share = 0.0;  // same quantity, relative to `working`
        for (const auto& e : d.entries) {
            const PolicyEntry scaled{e.prob * mass, e.ranking};
            if (known(e.ranking, catalog)) {
                commit(scaled);
            } else {
                unknown_mass += scaled.prob;
                unknown_share += e.prob;
                if (last) {
                    commit(scaled);
                } else {
                    for (std::size_t j = 0; j < p.k(); ++j) unknown(e.ranking.items[j], j) += e.prob;
                }
            }
        }
        result.unknown_mass_trace.push_back(unknown_mass);
        if (last) break;
        if (unknown_mass == 0.0) {
            result.unknown_mass_trace.resize(cfg.iterations, 0.0);
            break;
        }
        // Rescale the rejected part to unit column sums for the next round.
        for (double& x : unknown.data()) x /= unknown_share;
        working = std::move(unknown);
        mass = unknown_mass;
    }
    return result;
}

inline FelixResult run_felix(const MrpMatrix& p, const ItemCatalog& catalog,
                             const ZScoreOutlierPredicate& pred, const FelixConfig& cfg) {
    return run_felix(p, catalog, ExposurePredicate(pred), cfg);
}

/// Draws entry m with probability entries[m].prob (inverse CDF).
inline const Ranking& sample(const StochasticPolicy& policy, Rng& rng) {
    if (policy.entries.empty()) throw std::invalid_argument("cannot sample from an empty policy");
    const double u = uniform01(rng) * policy.total_probability();
    double acc = 0.0;
    for (const auto& e : policy.entries) {
        acc += e.prob;
        if (u < acc) return e.ranking;
    }
    return policy.entries.back().ranking;
}

}  // namespace fairrank
