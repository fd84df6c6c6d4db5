#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fpmap/radiomap.hpp"
#include "fpmap/sensors.hpp"

namespace fpmap {

using ApUniverse = std::vector<std::string>;

/// Positive-value fingerprint over a shared AP universe.
struct FingerprintVector {
    std::shared_ptr<const ApUniverse> universe;
    std::vector<double> values;
    double tau = 0;
    double min_rss = 0;
};

/// value_i = RSS_i - min_rss when AP i is present with RSS_i >= tau, else 0.
FingerprintVector to_positive(const Fingerprint& fp, std::shared_ptr<const ApUniverse> universe,
                              double tau, double min_rss);

/// Throw ContractViolation when the universes differ.
double euclidean(const FingerprintVector& a, const FingerprintVector& b);
/// nullopt when both vectors are all zero.
std::optional<double> sorensen(const FingerprintVector& a, const FingerprintVector& b);

enum class Metric { Euclidean, Sorensen };
std::string metric_name(Metric m);
Metric parse_metric(const std::string& name);

/// Where the RSS threshold applies. Both is the default.
enum class TauScope { Both, QueryOnly, MapOnly };
std::string tau_scope_name(TauScope s);
TauScope parse_tau_scope(const std::string& name);

struct LocalizationConfig {
    int k = 1;
    Metric metric = Metric::Euclidean;
    double tau = -90;  ///< dBm
    TauScope tau_scope = TauScope::Both;

    void validate() const;
};

struct Neighbor {
    std::size_t entry = 0;  ///< index into the radio map
    std::optional<double> distance;  ///< nullopt when the metric is undefined
};

struct LocalizationResult {
    double x = 0, y = 0;
    int floor = 0;
    std::vector<Neighbor> neighbors;  ///< ascending distance, undefined last
};

/// Vectorized radio map, shareable across concurrent queries.
class RadioMapIndex {
public:
    RadioMapIndex(const RadioMap& map, const LocalizationConfig& cfg);

    const ApUniverse& universe() const { return *universe_; }
    double min_rss() const { return min_rss_; }
    const RadioMap& map() const { return map_; }

    FingerprintVector vectorize_query(const Fingerprint& fp) const;
    LocalizationResult localize(const Fingerprint& query) const;

private:
    RadioMap map_;
    LocalizationConfig cfg_;
    std::shared_ptr<const ApUniverse> universe_;
    double min_rss_ = 0;
    std::vector<FingerprintVector> vectors_;
};

/// Sorted MACs seen at or above tau anywhere in the map.
ApUniverse ap_universe(const RadioMap& map, double tau);
/// Global minimum RSS over the map minus one.
double map_min_rss(const RadioMap& map);

LocalizationResult knn_localize(const Fingerprint& query, const RadioMap& map,
                                const LocalizationConfig& cfg);

struct TestQuery {
    double x = 0, y = 0;
    int floor = 0;
    Fingerprint fingerprint;
};

struct QueryOutcome {
    TestQuery truth;
    LocalizationResult estimate;
    double error = 0;
    bool floor_correct = false;
};

struct EvaluationReport {
    std::vector<QueryOutcome> outcomes;
    double floor_accuracy = 0;
    std::optional<double> mean_error;  ///< over correct-floor queries only
    std::vector<double> error_cdf;     ///< sorted errors of correct-floor queries
    std::optional<double> p50, p75, p90;
};

EvaluationReport evaluate(std::span<const TestQuery> queries, const RadioMap& map,
                          const LocalizationConfig& cfg);

/// Linear-interpolated percentile of sorted values, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

void write_evaluation_csv(const EvaluationReport& report, std::ostream& out);
std::string evaluation_summary_json(const EvaluationReport& report);

void write_queries(std::span<const TestQuery> queries, std::ostream& out);
std::vector<TestQuery> parse_queries(std::istream& in);
void save_queries(std::span<const TestQuery> queries, const std::filesystem::path& path);
std::vector<TestQuery> load_queries(const std::filesystem::path& path);

}  // namespace fpmap
