#pragma once

// Synthetic queries, base outlier rates and the FELIX sensitivity sweeps
// (candidate count and iteration count), plus a Plackett-Luce sampler used
// as a baseline policy.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "felix.hpp"
#include "lp.hpp"
#include "random.hpp"

namespace fairrank {

enum class FeatureKind { uniform, normal, lognormal, powerlaw };

struct FeatureDistribution {
    FeatureKind kind = FeatureKind::uniform;
    double lognormal_sigma = 1.0;
    double powerlaw_shape = 1.5;  // Pareto tail index, x_min = 1

    double draw(Rng& rng) const {
        switch (kind) {
            case FeatureKind::uniform: return uniform01(rng);
            case FeatureKind::normal: return std::normal_distribution<double>(0.0, 1.0)(rng);
            case FeatureKind::lognormal:
                return std::exp(lognormal_sigma * std::normal_distribution<double>(0.0, 1.0)(rng));
            case FeatureKind::powerlaw: return std::pow(1.0 - uniform01(rng), -1.0 / powerlaw_shape);
        }
        return 0.0;
    }
};

inline const char* to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::uniform: return "uniform";
        case FeatureKind::normal: return "normal";
        case FeatureKind::lognormal: return "lognormal";
        case FeatureKind::powerlaw: return "powerlaw";
    }
    return "unknown";
}

inline FeatureKind parse_feature_kind(const std::string& s) {
    if (s == "uniform") return FeatureKind::uniform;
    if (s == "normal" || s == "gaussian") return FeatureKind::normal;
    if (s == "lognormal" || s == "log_normal") return FeatureKind::lognormal;
    if (s == "powerlaw" || s == "power_law" || s == "pareto") return FeatureKind::powerlaw;
    throw std::invalid_argument("unknown feature distribution '" + s + "'");
}

/// n items with merits ~ U[0, 1] clamped to [merit_floor, 1] and features
/// drawn from `dist`. Merits come from `merit_rng` and features from
/// `feature_rng`, so the same merits can be paired with different feature
/// distributions.
inline ItemCatalog generate_query(std::size_t n, const FeatureDistribution& dist, Rng& merit_rng,
                                  Rng& feature_rng, const std::string& query_id = "sim",
                                  double merit_floor = kDefaultMeritFloor) {
    if (n == 0) throw std::invalid_argument("generate_query needs n >= 1");
    std::vector<Item> items(n);
    for (std::size_t i = 0; i < n; ++i) {
        items[i].doc_id = "d" + std::to_string(i);
        items[i].merit = std::clamp(uniform01(merit_rng), merit_floor, 1.0);
    }
    for (std::size_t i = 0; i < n; ++i) items[i].feature = dist.draw(feature_rng);
    return ItemCatalog(query_id, std::move(items), merit_floor);
}

inline ItemCatalog generate_query(std::size_t n, const FeatureDistribution& dist, Rng& rng,
                                  const std::string& query_id = "sim") {
    return generate_query(n, dist, rng, rng, query_id);
}

/// Monte-Carlo probability that an i.i.d. list of `list_length` draws
/// contains an item with |z| > lambda.
inline double base_outlier_rate(const FeatureDistribution& dist, std::size_t list_length,
                                std::size_t trials, double lambda, Rng& rng) {
    if (list_length == 0 || trials == 0) throw std::invalid_argument("base_outlier_rate needs a list and trials");
    std::vector<double> g(list_length);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& x : g) x = dist.draw(rng);
        for (double z : zscores(g)) {
            if (std::abs(z) > lambda) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

/// Plackett-Luce: repeatedly draw an unplaced item with probability
/// proportional to its merit.
inline Ranking sample_pl_ranking(const ItemCatalog& catalog, std::size_t k, Rng& rng) {
    const std::size_t n = catalog.size();
    if (k > n) throw std::invalid_argument("PL ranking longer than the catalog");
    std::vector<double> w = catalog.merits();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    double total = 0.0;
    for (double x : w) total += x;
    Ranking r;
    r.items.reserve(k);
    std::size_t live = n;
    for (std::size_t pos = 0; pos < k; ++pos) {
        double u = uniform01(rng) * total;
        std::size_t pick = live - 1;
        for (std::size_t t = 0; t < live; ++t) {
            u -= w[t];
            if (u < 0.0) {
                pick = t;
                break;
            }
        }
        r.items.push_back(idx[pick]);
        total -= w[pick];
        std::swap(w[pick], w[live - 1]);
        std::swap(idx[pick], idx[live - 1]);
        --live;
        if (live > 0 && !(total > 0.0)) {
            total = 0.0;
            for (std::size_t t = 0; t < live; ++t) total += w[t];
        }
    }
    return r;
}

struct SensitivityRow {
    FeatureKind kind = FeatureKind::uniform;
    std::size_t x = 0;
    double relative_reduction_pct = std::numeric_limits<double>::quiet_NaN();
    std::size_t queries_used = 0;
    std::size_t queries_skipped = 0;  // zero baseline or infeasible LP
    std::size_t queries_infeasible = 0;
};

struct SensitivityConfig {
    std::vector<FeatureDistribution> distributions;
    std::size_t m_queries = 100;
    std::size_t k = 10;
    double lambda = 2.5;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

struct QueryTrace {
    bool feasible = false;
    std::vector<std::vector<double>> traces;  // per distribution
};

// One simulated query of size n: merits from the query stream, an MRP matrix
// from the strict LP, then one FELIX run per feature distribution.
inline QueryTrace simulate_query(std::size_t n, std::size_t q, std::size_t iterations,
                                 const SensitivityConfig& cfg) {
    QueryTrace out;
    const std::uint64_t qseed = derive_seed(cfg.seed, n, q);
    Rng merit_rng(derive_seed(qseed, 0x6d65726974ULL));
    std::vector<Item> items(n);
    for (std::size_t i = 0; i < n; ++i) {
        items[i].doc_id = "d" + std::to_string(i);
        items[i].merit = std::clamp(uniform01(merit_rng), kDefaultMeritFloor, 1.0);
    }
    const ExposureModel model = ExposureModel::logarithmic(cfg.k);
    const ItemCatalog merits_only("q" + std::to_string(q), items);
    const SolveReport rep = solve_mrp(build_fairness_lp(merits_only, model));
    if (rep.status != SolveStatus::optimal) return out;
    out.feasible = true;
    const ZScoreOutlierPredicate pred{cfg.lambda, cfg.k};
    for (std::size_t d = 0; d < cfg.distributions.size(); ++d) {
        Rng feature_rng(derive_seed(qseed, d + 1));
        auto with_features = items;
        for (auto& it : with_features) it.feature = cfg.distributions[d].draw(feature_rng);
        const ItemCatalog catalog(merits_only.query_id(), std::move(with_features));
        const FelixResult res =
            run_felix(*rep.mrp, catalog, pred, FelixConfig{iterations, derive_seed(qseed, 0x66656c6978ULL), {}});
        out.traces.push_back(res.unknown_mass_trace);
    }
    return out;
}

// Mean of 100 * (w_iter - w_1) / w_1 over queries with w_1 > 0.
inline SensitivityRow reduce_rows(FeatureKind kind, std::size_t x, std::size_t dist,
                                  std::size_t iter, const std::vector<QueryTrace>& queries) {
    SensitivityRow row;
    row.kind = kind;
    row.x = x;
    double sum = 0.0;
    for (const auto& q : queries) {
        if (!q.feasible) {
            ++row.queries_infeasible;
            ++row.queries_skipped;
            continue;
        }
        const auto& trace = q.traces[dist];
        const double base = trace.front();
        if (!(base > 0.0)) {
            ++row.queries_skipped;
            continue;
        }
        sum += 100.0 * (trace[iter - 1] - base) / base;
        ++row.queries_used;
    }
    if (row.queries_used > 0) row.relative_reduction_pct = sum / static_cast<double>(row.queries_used);
    return row;
}

}  // namespace detail

/// Relative reduction of P(u|pi) of FELIX(iterations) against FELIX(1) as a
/// function of the candidate count n.
inline std::vector<SensitivityRow> sensitivity_candidates(const SensitivityConfig& cfg,
                                                          const std::vector<std::size_t>& n_values,
                                                          std::size_t iterations = 20) {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    for (std::size_t n : n_values) {
        if (n < cfg.k) throw std::invalid_argument("candidate count below k");
    }
    std::vector<SensitivityRow> rows;
    std::vector<std::vector<SensitivityRow>> per_n(n_values.size());
    for (std::size_t a = 0; a < n_values.size(); ++a) {
        std::vector<detail::QueryTrace> queries(cfg.m_queries);
        detail::parallel_for(cfg.m_queries, cfg.threads, [&](std::size_t q) {
            queries[q] = detail::simulate_query(n_values[a], q, iterations, cfg);
        });
        for (std::size_t d = 0; d < cfg.distributions.size(); ++d) {
            per_n[a].push_back(
                detail::reduce_rows(cfg.distributions[d].kind, n_values[a], d, iterations, queries));
        }
    }
    for (std::size_t d = 0; d < cfg.distributions.size(); ++d) {
        for (std::size_t a = 0; a < n_values.size(); ++a) rows.push_back(per_n[a][d]);
    }
    return rows;
}

/// Relative reduction of P(u|pi) of FELIX(iter) against FELIX(1) at fixed n.
/// FELIX(t) with a given seed is the first t iterations of FELIX(T) with the
/// same seed, so one run with the largest iteration count serves every row.
inline std::vector<SensitivityRow> sensitivity_iterations(const SensitivityConfig& cfg,
                                                          const std::vector<std::size_t>& iter_values,
                                                          std::size_t n = 100) {
    if (n < cfg.k) throw std::invalid_argument("candidate count below k");
    std::size_t max_iter = 1;
    for (std::size_t it : iter_values) {
        if (it < 1) throw std::invalid_argument("iteration counts must be >= 1");
        max_iter = std::max(max_iter, it);
    }
    std::vector<detail::QueryTrace> queries(cfg.m_queries);
    detail::parallel_for(cfg.m_queries, cfg.threads, [&](std::size_t q) {
        queries[q] = detail::simulate_query(n, q, max_iter, cfg);
    });
    std::vector<SensitivityRow> rows;
    for (std::size_t d = 0; d < cfg.distributions.size(); ++d) {
        for (std::size_t it : iter_values) {
            rows.push_back(detail::reduce_rows(cfg.distributions[d].kind, it, d, it, queries));
        }
    }
    return rows;
}

}  // namespace fairrank
