#pragma once

// File formats:
//   catalog CSV      query_id,doc_id,merit,feature
//   MRP JSON         {query_id, n, k, entries (row-major rows), objective, fairness_residual}
//   policy JSON      {query_id, n, k, entries: [{prob, doc_indices}]} plus, for
//                    FELIX output, {iterations, seed, unknown_mass_trace}
//   metrics CSV      query_id,ee_l,ndcg_5,ndcg_10,p_unknown,outlierness,utility + MEAN row
//   sensitivity CSV  distribution,x,relative_reduction_pct,queries_used,queries_skipped
// A file holding several queries stores a JSON array of the per-query objects.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "lp.hpp"
#include "sim.hpp"

namespace fairrank {

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, const std::string& source,
                                               std::size_t lineno) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError(source, lineno, "unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& field, const std::string& source, std::size_t lineno,
                           const char* what) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
        throw ParseError(source, lineno, std::string("invalid ") + what + " '" + field + "'");
    }
    return v;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

struct CatalogReadOptions {
    bool normalize = true;  // affinely rescale each query's merits onto [merit_floor, 1]
    double merit_floor = kDefaultMeritFloor;
};

/// Reads a catalog CSV. Queries are returned in order of first appearance.
inline std::vector<ItemCatalog> read_catalogs(std::istream& in, const std::string& source = "<catalog>",
                                              const CatalogReadOptions& opt = {}) {
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::vector<std::string> order;
    std::map<std::string, std::vector<Item>> groups;
    std::map<std::string, std::vector<std::size_t>> group_lines;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line, source, lineno);
        for (auto& f : fields) f = detail::trim(f);
        if (!have_header) {
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            if (fields != std::vector<std::string>{"query_id", "doc_id", "merit", "feature"}) {
                throw ParseError(source, lineno, "expected header 'query_id,doc_id,merit,feature'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != 4) {
            throw ParseError(source, lineno, "expected 4 fields, found " + std::to_string(fields.size()));
        }
        if (fields[0].empty() || fields[1].empty()) throw ParseError(source, lineno, "empty query_id or doc_id");
        Item item{fields[1], detail::parse_number(fields[2], source, lineno, "merit"),
                  detail::parse_number(fields[3], source, lineno, "feature")};
        auto [it, inserted] = groups.try_emplace(fields[0]);
        if (inserted) order.push_back(fields[0]);
        for (const auto& other : it->second) {
            if (other.doc_id == item.doc_id) {
                throw ParseError(source, lineno, "duplicate doc_id '" + item.doc_id + "' in query '" +
                                                     fields[0] + "'");
            }
        }
        if (!opt.normalize && (item.merit < opt.merit_floor || item.merit > 1.0)) {
            throw ParseError(source, lineno, "merit outside [merit_floor, 1]");
        }
        it->second.push_back(std::move(item));
        group_lines[fields[0]].push_back(lineno);
    }
    if (!have_header) throw ParseError(source, lineno, "missing header");
    std::vector<ItemCatalog> out;
    for (const auto& q : order) {
        auto items = groups[q];
        if (opt.normalize) {
            std::vector<double> raw(items.size());
            for (std::size_t i = 0; i < items.size(); ++i) raw[i] = items[i].merit;
            const auto norm = normalize_merits(raw, opt.merit_floor);
            for (std::size_t i = 0; i < items.size(); ++i) items[i].merit = norm[i];
        }
        out.emplace_back(q, std::move(items), opt.merit_floor);
    }
    return out;
}

inline void write_catalogs(std::ostream& out, const std::vector<ItemCatalog>& catalogs) {
    out << "query_id,doc_id,merit,feature\n";
    for (const auto& c : catalogs) {
        for (const auto& it : c.items()) {
            out << detail::csv_escape(c.query_id()) << ',' << detail::csv_escape(it.doc_id) << ','
                << format_double(it.merit) << ',' << format_double(it.feature) << '\n';
        }
    }
}

using Json = nlohmann::ordered_json;

struct MrpRecord {
    std::string query_id;
    MrpMatrix mrp;
    double objective = 0.0;
    double fairness_residual = 0.0;
};

inline Json to_json(const MrpRecord& r) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < r.mrp.n(); ++i) {
        const auto row = r.mrp.row(i);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return Json{{"query_id", r.query_id},       {"n", r.mrp.n()},
                {"k", r.mrp.k()},               {"entries", std::move(rows)},
                {"objective", r.objective},     {"fairness_residual", r.fairness_residual}};
}

inline MrpRecord mrp_from_json(const Json& j) {
    MrpRecord r;
    r.query_id = j.value("query_id", std::string{});
    const auto n = j.at("n").get<std::size_t>();
    const auto k = j.at("k").get<std::size_t>();
    const auto rows = j.at("entries").get<std::vector<std::vector<double>>>();
    if (rows.size() != n) throw std::invalid_argument("MRP JSON: entries has " + std::to_string(rows.size()) + " rows, n=" + std::to_string(n));
    for (const auto& row : rows) {
        if (row.size() != k) throw std::invalid_argument("MRP JSON: row length != k");
    }
    r.mrp = MrpMatrix::from_rows(rows);
    r.objective = j.value("objective", 0.0);
    r.fairness_residual = j.value("fairness_residual", 0.0);
    return r;
}

struct PolicyRecord {
    std::string query_id;
    StochasticPolicy policy;
    std::optional<std::size_t> iterations;
    std::optional<std::uint64_t> seed;
    std::vector<double> unknown_mass_trace;
};

inline Json to_json(const PolicyRecord& r) {
    Json entries = Json::array();
    for (const auto& e : r.policy.entries) {
        entries.push_back(Json{{"prob", e.prob}, {"doc_indices", e.ranking.items}});
    }
    Json j{{"query_id", r.query_id}, {"n", r.policy.n}, {"k", r.policy.k}, {"entries", std::move(entries)}};
    if (r.iterations) j["iterations"] = *r.iterations;
    if (r.seed) j["seed"] = *r.seed;
    if (r.iterations) j["unknown_mass_trace"] = r.unknown_mass_trace;
    return j;
}

inline PolicyRecord policy_from_json(const Json& j) {
    PolicyRecord r;
    r.query_id = j.value("query_id", std::string{});
    r.policy.n = j.at("n").get<std::size_t>();
    r.policy.k = j.at("k").get<std::size_t>();
    for (const auto& e : j.at("entries")) {
        r.policy.entries.push_back(
            {e.at("prob").get<double>(), Ranking{e.at("doc_indices").get<std::vector<std::size_t>>()}});
    }
    if (j.contains("iterations")) r.iterations = j.at("iterations").get<std::size_t>();
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("unknown_mass_trace")) {
        r.unknown_mass_trace = j.at("unknown_mass_trace").get<std::vector<double>>();
    }
    return r;
}

/// One object for a single record, an array otherwise.
template <typename Record>
Json records_to_json(const std::vector<Record>& records) {
    if (records.size() == 1) return to_json(records.front());
    Json arr = Json::array();
    for (const auto& r : records) arr.push_back(to_json(r));
    return arr;
}

template <typename Fn>
auto records_from_json(const Json& j, Fn&& parse) {
    std::vector<decltype(parse(j))> out;
    if (j.is_array()) {
        for (const auto& e : j) out.push_back(parse(e));
    } else {
        out.push_back(parse(j));
    }
    return out;
}

struct MetricsRow {
    std::string query_id;
    double ee_l = 0.0;
    double ndcg_5 = 0.0;
    double ndcg_10 = 0.0;
    double p_unknown = 0.0;
    double outlierness = 0.0;
    double utility = 0.0;
};

/// Writes the rows followed by a MEAN row (unweighted mean over queries).
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    out << "query_id,ee_l,ndcg_5,ndcg_10,p_unknown,outlierness,utility\n";
    MetricsRow mean{"MEAN"};
    auto line = [&](const MetricsRow& r) {
        out << detail::csv_escape(r.query_id) << ',' << format_double(r.ee_l) << ','
            << format_double(r.ndcg_5) << ',' << format_double(r.ndcg_10) << ','
            << format_double(r.p_unknown) << ',' << format_double(r.outlierness) << ','
            << format_double(r.utility) << '\n';
    };
    for (const auto& r : rows) {
        line(r);
        mean.ee_l += r.ee_l;
        mean.ndcg_5 += r.ndcg_5;
        mean.ndcg_10 += r.ndcg_10;
        mean.p_unknown += r.p_unknown;
        mean.outlierness += r.outlierness;
        mean.utility += r.utility;
    }
    if (!rows.empty()) {
        const double m = static_cast<double>(rows.size());
        mean.ee_l /= m;
        mean.ndcg_5 /= m;
        mean.ndcg_10 /= m;
        mean.p_unknown /= m;
        mean.outlierness /= m;
        mean.utility /= m;
    }
    line(mean);
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& in, const std::string& source = "<metrics>") {
    std::string line;
    std::size_t lineno = 0;
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line != "query_id,ee_l,ndcg_5,ndcg_10,p_unknown,outlierness,utility") {
                throw ParseError(source, lineno, "unexpected metrics header");
            }
            continue;
        }
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line, source, lineno);
        if (f.size() != 7) throw ParseError(source, lineno, "expected 7 fields");
        rows.push_back({f[0], detail::parse_number(f[1], source, lineno, "ee_l"),
                        detail::parse_number(f[2], source, lineno, "ndcg_5"),
                        detail::parse_number(f[3], source, lineno, "ndcg_10"),
                        detail::parse_number(f[4], source, lineno, "p_unknown"),
                        detail::parse_number(f[5], source, lineno, "outlierness"),
                        detail::parse_number(f[6], source, lineno, "utility")});
    }
    return rows;
}

inline void write_sensitivity_csv(std::ostream& out, const std::vector<SensitivityRow>& rows) {
    out << "distribution,x,relative_reduction_pct,queries_used,queries_skipped\n";
    for (const auto& r : rows) {
        out << to_string(r.kind) << ',' << r.x << ',' << format_double(r.relative_reduction_pct) << ','
            << r.queries_used << ',' << r.queries_skipped << '\n';
    }
}

}  // namespace fairrank
