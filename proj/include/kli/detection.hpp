#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kli/catalog.hpp"
#include "kli/events.hpp"

namespace kli {

inline constexpr double kDefaultAlpha = 0.5;

// Per-property smoothing rates alpha_k, aligned with the schema.
using AlphaRates = std::vector<double>;

AlphaRates make_alpha(const PropertySchema& schema, double default_alpha,
                      const std::map<std::string, double>& overrides = {});

struct CalibrationParams {
  double significance = 0.05;
  std::size_t n_samples = 20000;
  std::size_t max_length = 50;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

inline constexpr std::size_t kMinCalibrationSamples = 1000;

// Null-quantile thresholds epsilon^m_k for m in 1..max_length.
struct ThresholdTable {
  std::vector<PropertyKey> keys;
  AlphaRates alpha;
  std::vector<std::vector<double>> thresholds;  // [k][m - 1]
  double significance = 0.05;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  std::size_t max_length = 0;

  // Sessions longer than max_length use the max_length threshold.
  double threshold(std::size_t k, std::size_t m) const;

  // Replaces every threshold of property k with a fixed value.
  void override_threshold(std::size_t k, double epsilon);

  bool operator==(const ThresholdTable&) const = default;
};

ThresholdTable calibrate_thresholds(const GlobalModel& global, const PropertySchema& schema,
                                    const AlphaRates& alpha, const CalibrationParams& params);

// Null distribution sample for one (property, length) cell: `n` divergences of
// smoothed i.i.d. G_k draws from G_k, in draw order.
std::vector<double> sample_null_divergences(const Categorical& value_dist, double alpha,
                                            std::size_t m, std::size_t n, std::uint64_t seed);

// Order statistic of rank ceil((1 - significance) * n), 1-based. Reorders
// `samples`.
double upper_quantile(std::vector<double>& samples, double significance);

std::string threshold_table_to_json(const ThresholdTable& table);
ThresholdTable threshold_table_from_json(std::string_view text);
void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path);
ThresholdTable load_threshold_table(const std::filesystem::path& path);

// Delta^s_k = KL(Psi-hat^s_k || G_k).
double session_divergence(std::span<const ItemIndex> session, std::size_t k, double alpha,
                          const GlobalModel& global, const Catalog& catalog);
double session_divergence(const Session& session, std::string_view key, double alpha,
                          const GlobalModel& global, const Catalog& catalog);

// Detected set U^s with the evidence behind each decision. All vectors are
// aligned with `keys`.
struct InterestReport {
  std::vector<PropertyKey> keys;
  std::vector<bool> detected;
  std::vector<double> divergences;
  std::vector<double> thresholds;
  std::size_t session_length = 0;

  std::vector<PropertyKey> interests() const;
  bool empty() const;
  // detected[k] == (divergences[k] > thresholds[k]) for every k.
  bool consistent() const;
};

// Throws when `alpha` differs from the rates the table was calibrated with or
// when the table's keys do not match the catalog schema.
InterestReport detect_interest(std::span<const ItemIndex> session, const ThresholdTable& table,
                               const AlphaRates& alpha, const GlobalModel& global,
                               const Catalog& catalog);
InterestReport detect_interest(const Session& session, const ThresholdTable& table,
                               const AlphaRates& alpha, const GlobalModel& global,
                               const Catalog& catalog);

// A report with every property rejected; used by the unenhanced baselines.
InterestReport no_interest(const PropertySchema& schema, std::size_t session_length);

std::string report_to_json_line(const InterestReport& report, const Session& session,
                                std::size_t session_index);

}  // namespace kli
