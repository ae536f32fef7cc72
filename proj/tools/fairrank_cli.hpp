#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fairrank/fairrank.hpp>

#ifndef FAIRRANK_VERSION
#define FAIRRANK_VERSION "0.0.0"
#endif

namespace fairrank::cli {

enum ExitCode : int { ok = 0, usage = 1, infeasible = 2, numeric = 3 };

struct RunConfig {
    std::string subcommand;
    std::string input;
    std::string mrp;
    std::string policy;
    std::string items;
    std::string out;
    std::string manifest;
    std::size_t k = 10;
    double lambda = 2.5;
    std::size_t iterations = 20;
    std::uint64_t seed = 42;
    std::string mode = "strict";
    double log_base = 2.0;
    unsigned threads = 1;
    bool deterministic = false;
    bool raw_merits = false;
    std::size_t count = 1;
    std::string sweep = "candidates";
    std::vector<std::string> distributions{"uniform", "normal", "lognormal", "powerlaw"};
    std::vector<std::size_t> values;
    std::size_t queries = 100;
    std::size_t n = 100;
};

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class InfeasibleError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

namespace fs = std::filesystem;

inline void require_input(const std::string& path, const char* flag) {
    if (path.empty()) throw UsageError(std::string(flag) + " is required");
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw UsageError(std::string(flag) + ": cannot read '" + path + "'");
    std::ifstream probe(path);
    if (!probe) throw UsageError(std::string(flag) + ": cannot open '" + path + "'");
}

inline void require_output(const std::string& path, const char* flag) {
    if (path.empty()) throw UsageError(std::string(flag) + " is required");
    const fs::path parent = fs::path(path).parent_path();
    std::error_code ec;
    if (!parent.empty() && !fs::is_directory(parent, ec)) {
        throw UsageError(std::string(flag) + ": directory '" + parent.string() + "' does not exist");
    }
    if (fs::is_directory(path, ec)) throw UsageError(std::string(flag) + ": '" + path + "' is a directory");
}

// Write to a sibling temporary file and rename it into place.
inline void write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw UsageError("cannot write '" + path + "'");
        f << content;
        if (!f.flush()) throw UsageError("cannot write '" + path + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<ItemCatalog> load_catalogs(const std::string& path, bool raw_merits) {
    std::ifstream in(path);
    CatalogReadOptions opt;
    opt.normalize = !raw_merits;
    return read_catalogs(in, path, opt);
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw UsageError(path + ": " + e.what());
    }
}

template <typename Record, typename Parse>
std::vector<Record> load_records(const std::string& path, Parse parse) {
    try {
        return records_from_json(load_json(path), parse);
    } catch (const Json::exception& e) {
        throw UsageError(path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(path + ": " + e.what());
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline FairnessMode parse_mode(const std::string& s) {
    if (s == "strict") return FairnessMode::strict;
    if (s == "slack") return FairnessMode::slack;
    throw UsageError("--mode must be strict or slack");
}

inline std::size_t effective_k(const RunConfig& cfg, const ItemCatalog& c) { return std::min(cfg.k, c.size()); }

inline MrpRecord solve_one(const RunConfig& cfg, const ItemCatalog& catalog) {
    const ExposureModel model = ExposureModel::logarithmic(effective_k(cfg, catalog), cfg.log_base);
    const SolveReport rep = solve_mrp(build_fairness_lp(catalog, model, parse_mode(cfg.mode)));
    if (rep.status == SolveStatus::infeasible) throw InfeasibleError(rep.note);
    if (rep.status != SolveStatus::optimal || !rep.mrp) {
        throw NumericError("query '" + catalog.query_id() + "': LP solve ended " + to_string(rep.status));
    }
    return {catalog.query_id(), *rep.mrp, rep.objective_value, rep.fairness_residual};
}

// Runs fn over [0, count) honoring --threads; results are stored by index so
// the output does not depend on scheduling.
template <typename Fn>
void for_each_query(const RunConfig& cfg, std::size_t count, Fn&& fn) {
    fairrank::detail::parallel_for(count, cfg.deterministic ? 1u : cfg.threads, fn);
}

inline const ItemCatalog& find_catalog(const std::vector<ItemCatalog>& catalogs, const std::string& id,
                                       const std::string& items_path, const std::string& other_path) {
    for (const auto& c : catalogs) {
        if (c.query_id() == id) return c;
    }
    throw UsageError("query '" + id + "' from '" + other_path + "' is missing in '" + items_path + "'");
}

inline void check_dims(const ItemCatalog& c, std::size_t n, std::size_t k, const std::string& items_path,
                       const std::string& other_path) {
    if (c.size() != n || k > n) {
        throw UsageError("query '" + c.query_id() + "': '" + other_path + "' has n=" + std::to_string(n) +
                         ", k=" + std::to_string(k) + " but '" + items_path + "' lists " +
                         std::to_string(c.size()) + " items");
    }
}

inline Json manifest_json(const RunConfig& cfg, const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
    Json config{{"k", cfg.k},
                {"lambda", cfg.lambda},
                {"iterations", cfg.iterations},
                {"seed", cfg.seed},
                {"mode", cfg.mode},
                {"log_base", cfg.log_base},
                {"threads", cfg.deterministic ? 1u : cfg.threads},
                {"deterministic", cfg.deterministic},
                {"raw_merits", cfg.raw_merits},
                {"merit_floor", kDefaultMeritFloor}};
    if (cfg.subcommand == "sample") config["count"] = cfg.count;
    if (cfg.subcommand == "eval") config["ndcg_cutoffs"] = {5, 10};
    if (cfg.subcommand == "simulate") {
        config["sweep"] = cfg.sweep;
        config["distributions"] = cfg.distributions;
        config["values"] = cfg.values;
        config["queries"] = cfg.queries;
        config["n"] = cfg.n;
    }
    return Json{{"tool", "fairrank"},
                {"version", FAIRRANK_VERSION},
                {"subcommand", cfg.subcommand},
                {"config", std::move(config)},
                {"inputs", inputs},
                {"outputs", outputs}};
}

inline void cmd_solve(const RunConfig& cfg) {
    require_input(cfg.input, "--input");
    require_output(cfg.out, "--out");
    const auto catalogs = load_catalogs(cfg.input, cfg.raw_merits);
    std::vector<std::optional<MrpRecord>> results(catalogs.size());
    for_each_query(cfg, catalogs.size(), [&](std::size_t q) { results[q] = solve_one(cfg, catalogs[q]); });
    std::vector<MrpRecord> records;
    for (auto& r : results) records.push_back(std::move(*r));
    write_file(cfg.out, dump(records_to_json(records)));
}

inline void cmd_decompose(const RunConfig& cfg) {
    require_input(cfg.input, "--input");
    require_output(cfg.out, "--out");
    const auto mrps = load_records<MrpRecord>(cfg.input, mrp_from_json);
    std::vector<PolicyRecord> policies(mrps.size());
    for_each_query(cfg, mrps.size(), [&](std::size_t q) {
        policies[q].query_id = mrps[q].query_id;
        policies[q].policy = decompose(mrps[q].mrp, cfg.seed);
    });
    write_file(cfg.out, dump(records_to_json(policies)));
}

inline void cmd_felix(const RunConfig& cfg) {
    require_input(cfg.input, "--input");
    if (!cfg.mrp.empty()) require_input(cfg.mrp, "--mrp");
    require_output(cfg.out, "--out");
    if (cfg.iterations < 1) throw UsageError("--iterations must be >= 1");
    const auto catalogs = load_catalogs(cfg.input, cfg.raw_merits);
    std::vector<MrpRecord> mrps;
    if (!cfg.mrp.empty()) mrps = load_records<MrpRecord>(cfg.mrp, mrp_from_json);
    std::vector<PolicyRecord> policies(catalogs.size());
    for_each_query(cfg, catalogs.size(), [&](std::size_t q) {
        const ItemCatalog& c = catalogs[q];
        MrpMatrix p;
        if (cfg.mrp.empty()) {
            p = solve_one(cfg, c).mrp;
        } else {
            const MrpRecord* rec = nullptr;
            for (const auto& m : mrps) {
                if (m.query_id == c.query_id()) rec = &m;
            }
            if (!rec) {
                throw UsageError("query '" + c.query_id() + "' from '" + cfg.input + "' is missing in '" +
                                 cfg.mrp + "'");
            }
            check_dims(c, rec->mrp.n(), rec->mrp.k(), cfg.input, cfg.mrp);
            p = rec->mrp;
        }
        const ZScoreOutlierPredicate pred{cfg.lambda, p.k()};
        FelixResult res = run_felix(p, c, pred, FelixConfig{cfg.iterations, cfg.seed, {}});
        policies[q] = {c.query_id(), std::move(res.policy), res.iterations, res.seed,
                       std::move(res.unknown_mass_trace)};
    });
    write_file(cfg.out, dump(records_to_json(policies)));
}

inline void cmd_sample(const RunConfig& cfg) {
    require_input(cfg.policy, "--policy");
    if (!cfg.items.empty()) require_input(cfg.items, "--items");
    require_output(cfg.out, "--out");
    const auto policies = load_records<PolicyRecord>(cfg.policy, policy_from_json);
    std::vector<ItemCatalog> catalogs;
    if (!cfg.items.empty()) catalogs = load_catalogs(cfg.items, cfg.raw_merits);
    std::ostringstream os;
    os << "query_id,sample,ranking\n";
    for (std::size_t q = 0; q < policies.size(); ++q) {
        const auto& rec = policies[q];
        check_policy(rec.policy);
        const ItemCatalog* c = nullptr;
        if (!catalogs.empty()) {
            c = &find_catalog(catalogs, rec.query_id, cfg.items, cfg.policy);
            check_dims(*c, rec.policy.n, rec.policy.k, cfg.items, cfg.policy);
        }
        Rng rng(derive_seed(cfg.seed, q));
        for (std::size_t s = 0; s < cfg.count; ++s) {
            const Ranking& r = sample(rec.policy, rng);
            os << fairrank::detail::csv_escape(rec.query_id) << ',' << s << ',';
            for (std::size_t j = 0; j < r.items.size(); ++j) {
                if (j) os << ' ';
                if (c) {
                    os << (*c)[r.items[j]].doc_id;
                } else {
                    os << r.items[j];
                }
            }
            os << '\n';
        }
    }
    write_file(cfg.out, os.str());
}

inline void cmd_eval(const RunConfig& cfg) {
    require_input(cfg.policy, "--policy");
    require_input(cfg.items, "--items");
    require_output(cfg.out, "--out");
    const auto policies = load_records<PolicyRecord>(cfg.policy, policy_from_json);
    const auto catalogs = load_catalogs(cfg.items, cfg.raw_merits);
    std::vector<MetricsRow> rows(policies.size());
    for_each_query(cfg, policies.size(), [&](std::size_t q) {
        const auto& rec = policies[q];
        const ItemCatalog& c = find_catalog(catalogs, rec.query_id, cfg.items, cfg.policy);
        check_dims(c, rec.policy.n, rec.policy.k, cfg.items, cfg.policy);
        check_policy(rec.policy);
        const ExposureModel model = ExposureModel::logarithmic(rec.policy.k, cfg.log_base);
        const ZScoreOutlierPredicate pred{cfg.lambda, rec.policy.k};
        const std::size_t cutoffs[] = {5, 10};
        const EvalReport r = evaluate(rec.policy, c, model, pred, cutoffs);
        rows[q] = {rec.query_id, r.ee_l, r.ndcg_at.at(5), r.ndcg_at.at(10), r.prob_unknown, r.outlierness_at,
                   r.utility};
    });
    std::ostringstream os;
    write_metrics_csv(os, rows);
    write_file(cfg.out, os.str());
}

inline void cmd_simulate(const RunConfig& cfg) {
    require_output(cfg.out, "--out");
    SensitivityConfig sc;
    for (const auto& d : cfg.distributions) {
        try {
            sc.distributions.push_back({parse_feature_kind(d)});
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("--distributions: ") + e.what());
        }
    }
    sc.m_queries = cfg.queries;
    sc.k = cfg.k;
    sc.lambda = cfg.lambda;
    sc.seed = cfg.seed;
    sc.threads = cfg.deterministic ? 1u : cfg.threads;
    std::vector<SensitivityRow> rows;
    if (cfg.sweep == "candidates") {
        const auto& values = cfg.values;
        for (std::size_t v : values) {
            if (v < cfg.k) throw UsageError("--values: candidate count " + std::to_string(v) + " is below k");
        }
        rows = sensitivity_candidates(sc, values, cfg.iterations);
    } else if (cfg.sweep == "iterations") {
        const auto& values = cfg.values;
        for (std::size_t v : values) {
            if (v < 1) throw UsageError("--values: iteration counts must be >= 1");
        }
        if (cfg.n < cfg.k) throw UsageError("--n must be >= k");
        rows = sensitivity_iterations(sc, values, cfg.n);
    } else {
        throw UsageError("--sweep must be candidates or iterations");
    }
    std::ostringstream os;
    write_sensitivity_csv(os, rows);
    write_file(cfg.out, os.str());
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    RunConfig cfg;
    CLI::App app{"Fair stochastic rankings: LP, Birkhoff-von Neumann decomposition and FELIX"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(FAIRRANK_VERSION));

    auto common = [&](CLI::App* sub, bool with_model) {
        sub->add_option("--out", cfg.out, "Output file")->required();
        sub->add_option("--manifest", cfg.manifest, "Manifest path (default: <out>.manifest.json)");
        sub->add_option("--seed", cfg.seed, "Base seed")->capture_default_str();
        sub->add_option("--threads", cfg.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_flag("--deterministic", cfg.deterministic, "Force single-threaded execution");
        if (with_model) {
            sub->add_option("--k", cfg.k, "Ranking length")->capture_default_str()->check(CLI::PositiveNumber);
            sub->add_option("--lambda", cfg.lambda, "Outlier z-score threshold")->capture_default_str();
            sub->add_option("--log-base", cfg.log_base, "Base of the position-bias logarithm")
                ->capture_default_str()
                ->check(CLI::Range(1.000001, 1e9));
            sub->add_option("--mode", cfg.mode, "Fairness constraints")
                ->capture_default_str()
                ->check(CLI::IsMember({"strict", "slack"}));
            sub->add_flag("--raw-merits", cfg.raw_merits, "Use merits as given instead of rescaling them");
        }
    };

    auto* solve = app.add_subcommand("solve", "Catalog CSV to MRP JSON");
    solve->add_option("--input", cfg.input, "Catalog CSV")->required();
    common(solve, true);

    auto* dec = app.add_subcommand("decompose", "MRP JSON to policy JSON");
    dec->add_option("--input", cfg.input, "MRP JSON")->required();
    common(dec, false);

    auto* felix = app.add_subcommand("felix", "Catalog (and optional MRP JSON) to FELIX policy JSON");
    felix->add_option("--input", cfg.input, "Catalog CSV")->required();
    felix->add_option("--mrp", cfg.mrp, "MRP JSON; solved from the catalog when omitted");
    felix->add_option("--iterations", cfg.iterations, "FELIX iterations")->capture_default_str();
    common(felix, true);

    auto* samp = app.add_subcommand("sample", "Draw rankings from a policy");
    samp->add_option("--policy", cfg.policy, "Policy JSON")->required();
    samp->add_option("--items", cfg.items, "Catalog CSV; prints doc_ids instead of indices");
    samp->add_option("--count", cfg.count, "Rankings per query")->capture_default_str();
    common(samp, false);
    samp->add_flag("--raw-merits", cfg.raw_merits, "Use merits as given instead of rescaling them");

    auto* ev = app.add_subcommand("eval", "Policy + catalog to metrics CSV");
    ev->add_option("--policy", cfg.policy, "Policy JSON")->required();
    ev->add_option("--items", cfg.items, "Catalog CSV")->required();
    common(ev, true);

    auto* sim = app.add_subcommand("simulate", "Synthetic sensitivity sweeps to CSV");
    sim->add_option("--sweep", cfg.sweep, "candidates or iterations")
        ->capture_default_str()
        ->check(CLI::IsMember({"candidates", "iterations"}));
    sim->add_option("--distributions", cfg.distributions, "Feature distributions")->delimiter(',');
    sim->add_option("--values", cfg.values, "Sweep values (n or iteration counts)")->delimiter(',');
    sim->add_option("--queries", cfg.queries, "Queries per point")->capture_default_str()->check(CLI::PositiveNumber);
    sim->add_option("--n", cfg.n, "Candidate count for the iteration sweep")->capture_default_str();
    sim->add_option("--iterations", cfg.iterations, "FELIX iterations for the candidate sweep")->capture_default_str();
    common(sim, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }
    cfg.subcommand = app.get_subcommands().front()->get_name();
    if (cfg.manifest.empty()) cfg.manifest = cfg.out + ".manifest.json";
    if (cfg.subcommand == "simulate" && cfg.values.empty()) {
        cfg.values = cfg.sweep == "iterations" ? std::vector<std::size_t>{1, 2, 5, 10, 15, 20}
                                               : std::vector<std::size_t>{20, 40, 60, 80, 100};
    }

    std::vector<std::string> inputs;
    for (const std::string* p : {&cfg.input, &cfg.mrp, &cfg.policy, &cfg.items}) {
        if (!p->empty()) inputs.push_back(*p);
    }
    try {
        detail::require_output(cfg.manifest, "--manifest");
        if (cfg.subcommand == "solve") detail::cmd_solve(cfg);
        if (cfg.subcommand == "decompose") detail::cmd_decompose(cfg);
        if (cfg.subcommand == "felix") detail::cmd_felix(cfg);
        if (cfg.subcommand == "sample") detail::cmd_sample(cfg);
        if (cfg.subcommand == "eval") detail::cmd_eval(cfg);
        if (cfg.subcommand == "simulate") detail::cmd_simulate(cfg);
        detail::write_file(cfg.manifest, detail::dump(detail::manifest_json(cfg, inputs, {cfg.out})));
    } catch (const InfeasibleError& e) {
        err << "fairrank " << cfg.subcommand << ": infeasible: " << e.what() << '\n';
        return infeasible;
    } catch (const NumericError& e) {
        err << "fairrank " << cfg.subcommand << ": numeric failure: " << e.what() << '\n';
        return numeric;
    } catch (const std::exception& e) {
        err << "fairrank " << cfg.subcommand << ": " << e.what() << '\n';
        return usage;
    }
    return ok;
}

}  // namespace fairrank::cli
