#include "fpmap/localization.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "fpmap/error.hpp"

namespace fpmap {

using nlohmann::json;

FingerprintVector to_positive(const Fingerprint& fp, std::shared_ptr<const ApUniverse> universe,
                              double tau, double min_rss) {
    FingerprintVector v;
    v.tau = tau;
    v.min_rss = min_rss;
    v.values.assign(universe->size(), 0.0);
    for (std::size_t i = 0; i < universe->size(); ++i) {
        auto it = fp.find((*universe)[i]);
        if (it != fp.end() && it->second >= tau) v.values[i] = it->second - min_rss;
    }
    v.universe = std::move(universe);
    return v;
}

namespace {

void require_same_universe(const FingerprintVector& a, const FingerprintVector& b) {
    if (a.values.size() != b.values.size() ||
        (a.universe != b.universe && (!a.universe || !b.universe || *a.universe != *b.universe)))
        throw ContractViolation("fingerprint vectors over different AP universes");
}

}  // namespace

double euclidean(const FingerprintVector& a, const FingerprintVector& b) {
    require_same_universe(a, b);
    double sum = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

std::optional<double> sorensen(const FingerprintVector& a, const FingerprintVector& b) {
    require_same_universe(a, b);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        num += std::abs(a.values[i] - b.values[i]);
        den += a.values[i] + b.values[i];
    }
    if (den <= 0) return std::nullopt;
    return num / den;
}

std::string metric_name(Metric m) { return m == Metric::Euclidean ? "euclidean" : "sorensen"; }

Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::Euclidean;
    if (name == "sorensen") return Metric::Sorensen;
    throw ParseError("unknown metric \"" + name + "\" (expected euclidean or sorensen)");
}

std::string tau_scope_name(TauScope s) {
    switch (s) {
        case TauScope::Both: return "both";
        case TauScope::QueryOnly: return "query";
        case TauScope::MapOnly: return "map";
    }
    return "?";
}

TauScope parse_tau_scope(const std::string& name) {
    if (name == "both") return TauScope::Both;
    if (name == "query") return TauScope::QueryOnly;
    if (name == "map") return TauScope::MapOnly;
    throw ParseError("unknown tau scope \"" + name + "\" (expected both, query or map)");
}

void LocalizationConfig::validate() const {
    if (k < 1) throw ValidationError("k must be at least 1");
    if (!std::isfinite(tau)) throw ValidationError("tau must be finite");
}

ApUniverse ap_universe(const RadioMap& map, double tau) {
    std::set<std::string> macs;
    for (const auto& e : map.entries)
        for (const auto& [mac, rss] : e.fingerprint)
            if (rss >= tau) macs.insert(mac);
    return {macs.begin(), macs.end()};
}

double map_min_rss(const RadioMap& map) {
    int lowest = std::numeric_limits<int>::max();
    for (const auto& e : map.entries)
        for (const auto& [mac, rss] : e.fingerprint) lowest = std::min(lowest, rss);
    if (lowest == std::numeric_limits<int>::max()) return 0;
    return static_cast<double>(lowest) - 1.0;
}

namespace {

constexpr double kNoThreshold = -std::numeric_limits<double>::infinity();

double map_tau(const LocalizationConfig& cfg) {
    return cfg.tau_scope == TauScope::QueryOnly ? kNoThreshold : cfg.tau;
}

double query_tau(const LocalizationConfig& cfg) {
    return cfg.tau_scope == TauScope::MapOnly ? kNoThreshold : cfg.tau;
}

}  // namespace

RadioMapIndex::RadioMapIndex(const RadioMap& map, const LocalizationConfig& cfg) : map_(map), cfg_(cfg) {
    cfg.validate();
    if (map.entries.empty()) throw ValidationError("cannot localize against an empty radio map");
    universe_ = std::make_shared<const ApUniverse>(ap_universe(map, map_tau(cfg)));
    min_rss_ = map_min_rss(map);
    vectors_.reserve(map.entries.size());
    for (const auto& e : map.entries)
        vectors_.push_back(to_positive(e.fingerprint, universe_, map_tau(cfg), min_rss_));
}

FingerprintVector RadioMapIndex::vectorize_query(const Fingerprint& fp) const {
    return to_positive(fp, universe_, query_tau(cfg_), min_rss_);
}

LocalizationResult RadioMapIndex::localize(const Fingerprint& query) const {
    const auto q = vectorize_query(query);
    std::vector<Neighbor> all;
    all.reserve(vectors_.size());
    for (std::size_t i = 0; i < vectors_.size(); ++i) {
        Neighbor n{i, std::nullopt};
        if (cfg_.metric == Metric::Euclidean)
            n.distance = euclidean(q, vectors_[i]);
        else
            n.distance = sorensen(q, vectors_[i]);
        all.push_back(n);
    }
    // Undefined distances rank after every defined one; ties keep map order.
    std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance.has_value() != b.distance.has_value()) return a.distance.has_value();
        return a.distance && *a.distance < *b.distance;
    });
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg_.k), all.size());
    all.resize(k);

    LocalizationResult r;
    std::map<int, int> votes;
    for (const auto& n : all) {
        const auto& e = map_.entries[n.entry];
        r.x += e.x;
        r.y += e.y;
        ++votes[e.floor];
    }
    r.x /= static_cast<double>(k);
    r.y /= static_cast<double>(k);
    int best_votes = 0;
    for (const auto& [floor, count] : votes) best_votes = std::max(best_votes, count);
    // Among floors with the most votes, the one whose nearest neighbor ranks first.
    for (const auto& n : all) {
        const int f = map_.entries[n.entry].floor;
        if (votes[f] == best_votes) {
            r.floor = f;
            break;
        }
    }
    r.neighbors = std::move(all);
    return r;
}

LocalizationResult knn_localize(const Fingerprint& query, const RadioMap& map,
                                const LocalizationConfig& cfg) {
    return RadioMapIndex(map, cfg).localize(query);
}

double percentile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw ContractViolation("percentile of an empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

EvaluationReport evaluate(std::span<const TestQuery> queries, const RadioMap& map,
                          const LocalizationConfig& cfg) {
    if (queries.empty()) throw ValidationError("evaluation needs at least one query");
    const RadioMapIndex index(map, cfg);
    EvaluationReport rep;
    int correct = 0;
    for (const auto& q : queries) {
        QueryOutcome o{q, index.localize(q.fingerprint), 0, false};
        o.error = std::hypot(o.estimate.x - q.x, o.estimate.y - q.y);
        o.floor_correct = o.estimate.floor == q.floor;
        if (o.floor_correct) {
            ++correct;
            rep.error_cdf.push_back(o.error);
        }
        rep.outcomes.push_back(std::move(o));
    }
    rep.floor_accuracy = static_cast<double>(correct) / static_cast<double>(queries.size());
    if (!rep.error_cdf.empty()) {
        rep.mean_error = std::accumulate(rep.error_cdf.begin(), rep.error_cdf.end(), 0.0) /
                         static_cast<double>(rep.error_cdf.size());
        std::sort(rep.error_cdf.begin(), rep.error_cdf.end());
        rep.p50 = percentile(rep.error_cdf, 0.50);
        rep.p75 = percentile(rep.error_cdf, 0.75);
        rep.p90 = percentile(rep.error_cdf, 0.90);
    }
    return rep;
}

void write_evaluation_csv(const EvaluationReport& report, std::ostream& out) {
    out << "query_id,truth_x,truth_y,truth_floor,est_x,est_y,est_floor,error_m,floor_correct\n";
    char buf[256];
    for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
        const auto& o = report.outcomes[i];
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%d,%.6f,%.6f,%d,%.6f,%d\n", i, o.truth.x,
                      o.truth.y, o.truth.floor, o.estimate.x, o.estimate.y, o.estimate.floor,
                      o.error, o.floor_correct ? 1 : 0);
        out << buf;
    }
}

std::string evaluation_summary_json(const EvaluationReport& report) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j = {{"queries", report.outcomes.size()},
              {"floor_accuracy", report.floor_accuracy},
              {"mean_error_m", opt(report.mean_error)},
              {"p50", opt(report.p50)},
              {"p75", opt(report.p75)},
              {"p90", opt(report.p90)}};
    return j.dump(2) + "\n";
}

void write_queries(std::span<const TestQuery> queries, std::ostream& out) {
    for (const auto& q : queries) {
        json fp = json::object();
        for (const auto& [mac, rss] : q.fingerprint) fp[mac] = rss;
        out << json{{"x", q.x}, {"y", q.y}, {"floor", q.floor}, {"fp", fp}}.dump() << '\n';
    }
}

std::vector<TestQuery> parse_queries(std::istream& in) {
    std::vector<TestQuery> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(text);
            TestQuery q;
            q.x = j.at("x").get<double>();
            q.y = j.at("y").get<double>();
            q.floor = j.at("floor").get<int>();
            for (const auto& [mac, rss] : j.at("fp").items()) {
                if (!is_valid_mac(mac)) throw ParseError("invalid MAC \"" + mac + "\"", line);
                q.fingerprint[mac] = rss.get<int>();
            }
            out.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError(std::string("bad query record: ") + e.what(), line);
        }
    }
    return out;
}

void save_queries(std::span<const TestQuery> queries, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write queries " + path.string());
    write_queries(queries, out);
}

std::vector<TestQuery> load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open queries " + path.string());
    return parse_queries(in);
}

}  // namespace fpmap
