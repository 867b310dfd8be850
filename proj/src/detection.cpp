#include "kli/detection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kli/distributions.hpp"
#include "kli/error.hpp"
#include "kli/parallel.hpp"
#include "kli/rng.hpp"
#include "kli/simd/kernels.hpp"

namespace kli {

using ordered_json = nlohmann::ordered_json;

AlphaRates make_alpha(const PropertySchema& schema, double default_alpha,
                      const std::map<std::string, double>& overrides) {
  if (!(default_alpha >= 0.0) || !std::isfinite(default_alpha)) throw Error("alpha must be a finite value >= 0");
  AlphaRates alpha(schema.size(), default_alpha);
  for (const auto& [key, value] : overrides) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw Error("alpha for '" + key + "' must be >= 0");
    alpha[schema.require(key)] = value;
  }
  return alpha;
}

double ThresholdTable::threshold(std::size_t k, std::size_t m) const {
  if (m == 0) throw Error("threshold: session length 0");
  return thresholds[k][std::min(m, max_length) - 1];
}

void ThresholdTable::override_threshold(std::size_t k, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error("threshold override must be >= 0");
  std::fill(thresholds[k].begin(), thresholds[k].end(), epsilon);
}

std::vector<double> sample_null_divergences(const Categorical& value_dist, double alpha,
                                            std::size_t m, std::size_t n, std::uint64_t seed) {
  const simd::Kernels& kern = simd::active();
  const std::size_t card = value_dist.size();
  const DiscreteSampler sampler(value_dist.probs());
  const double lambda = smoothing_weight(alpha, m);
  const double inv_m = 1.0 / static_cast<double>(m);

  Engine eng(seed);
  std::vector<double> counts(card);
  std::vector<double> estimate(card);
  std::vector<double> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) counts[sampler(eng)] += 1.0;
    for (double& c : counts) c *= inv_m;
    kern.blend(estimate.data(), counts.data(), value_dist.probs().data(), lambda, card);
    const double d = kern.kl_sum(estimate.data(), value_dist.probs().data(), card);
    out[s] = d > 0.0 ? d : 0.0;
  }
  return out;
}

double upper_quantile(std::vector<double>& samples, double significance) {
  if (samples.empty()) throw Error("upper_quantile: no samples");
  const double n = static_cast<double>(samples.size());
  // The 1e-9 slack keeps exact products such as 0.95 * 20000 from rounding
  // up to the next rank.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - significance) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  auto nth = samples.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(samples.begin(), nth, samples.end());
  return *nth;
}

ThresholdTable calibrate_thresholds(const GlobalModel& global, const PropertySchema& schema,
                                    const AlphaRates& alpha, const CalibrationParams& params) {
  if (!(params.significance > 0.0 && params.significance < 1.0)) {
    throw Error("calibrate: significance must be in (0, 1)");
  }
  if (params.n_samples < kMinCalibrationSamples) {
    throw Error("calibrate: n_samples must be at least " + std::to_string(kMinCalibrationSamples));
  }
  if (params.max_length < 1) throw Error("calibrate: M_max must be >= 1");
  if (alpha.size() != schema.size()) throw Error("calibrate: alpha does not match schema");
  if (global.value_dists.size() != schema.size()) throw Error("calibrate: global model does not match schema");

  ThresholdTable table;
  table.alpha = alpha;
  table.significance = params.significance;
  table.n_samples = params.n_samples;
  table.seed = params.seed;
  table.max_length = params.max_length;
  table.thresholds.assign(schema.size(), std::vector<double>(params.max_length, 0.0));
  for (const Property& p : schema.properties()) table.keys.push_back(p.key);

  const std::size_t cells = schema.size() * params.max_length;
  parallel_for(cells, params.threads, [&](std::size_t cell) {
    const std::size_t k = cell / params.max_length;
    const std::size_t m = cell % params.max_length + 1;
    auto samples = sample_null_divergences(global.value_dist(k), alpha[k], m, params.n_samples,
                                           derive_seed(params.seed, k, m));
    table.thresholds[k][m - 1] = upper_quantile(samples, params.significance);
  });
  return table;
}

std::string threshold_table_to_json(const ThresholdTable& table) {
  ordered_json doc;
  doc["significance"] = table.significance;
  doc["n_samples"] = table.n_samples;
  doc["seed"] = table.seed;
  doc["M_max"] = table.max_length;
  ordered_json alpha = ordered_json::object();
  ordered_json thresholds = ordered_json::object();
  for (std::size_t k = 0; k < table.keys.size(); ++k) {
    alpha[table.keys[k]] = table.alpha[k];
    thresholds[table.keys[k]] = table.thresholds[k];
  }
  doc["alpha"] = std::move(alpha);
  doc["thresholds"] = std::move(thresholds);
  return doc.dump(1) + "\n";
}

ThresholdTable threshold_table_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(std::string("thresholds: malformed JSON: ") + e.what());
  }
  ThresholdTable table;
  try {
    table.significance = doc.at("significance").get<double>();
    table.n_samples = doc.at("n_samples").get<std::size_t>();
    table.seed = doc.at("seed").get<std::uint64_t>();
    table.max_length = doc.at("M_max").get<std::size_t>();
    const auto& alpha = doc.at("alpha");
    const auto& thresholds = doc.at("thresholds");
    if (!thresholds.is_object() || !alpha.is_object()) throw Error("thresholds: 'alpha' and 'thresholds' must be objects");
    for (const auto& [key, values] : thresholds.items()) {
      table.keys.push_back(key);
      if (!alpha.contains(key)) throw Error("thresholds: no alpha for property '" + key + "'");
      table.alpha.push_back(alpha.at(key).get<double>());
      auto eps = values.get<std::vector<double>>();
      if (eps.size() != table.max_length) {
        throw Error("thresholds: property '" + key + "' has " + std::to_string(eps.size()) +
                    " entries, expected M_max = " + std::to_string(table.max_length));
      }
      for (double e : eps) {
        if (!(e >= 0.0)) throw Error("thresholds: negative threshold for '" + key + "'");
      }
      table.thresholds.push_back(std::move(eps));
    }
    if (alpha.size() != table.keys.size()) throw Error("thresholds: 'alpha' and 'thresholds' keys differ");
  } catch (const ordered_json::exception& e) {
    throw Error(std::string("thresholds: ") + e.what());
  }
  if (table.max_length < 1) throw Error("thresholds: M_max must be >= 1");
  return table;
}

void save_threshold_table(const ThresholdTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write thresholds file '" + path.string() + "'");
  out << threshold_table_to_json(table);
}

ThresholdTable load_threshold_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open thresholds file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return threshold_table_from_json(buf.str());
}

double session_divergence(std::span<const ItemIndex> session, std::size_t k, double alpha,
                          const GlobalModel& global, const Catalog& catalog) {
  return kl_divergence(smoothed_session_estimate(session, k, alpha, global, catalog),
                       global.value_dist(k));
}

double session_divergence(const Session& session, std::string_view key, double alpha,
                          const GlobalModel& global, const Catalog& catalog) {
  return session_divergence(resolve_items(catalog, session), catalog.schema().require(key),
                            alpha, global, catalog);
}

std::vector<PropertyKey> InterestReport::interests() const {
  std::vector<PropertyKey> out;
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (detected[k]) out.push_back(keys[k]);
  }
  return out;
}

bool InterestReport::empty() const {
  return std::none_of(detected.begin(), detected.end(), [](bool d) { return d; });
}

bool InterestReport::consistent() const {
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (detected[k] != (divergences[k] > thresholds[k])) return false;
  }
  return true;
}

InterestReport detect_interest(std::span<const ItemIndex> session, const ThresholdTable& table,
                               const AlphaRates& alpha, const GlobalModel& global,
                               const Catalog& catalog) {
  if (session.empty()) throw Error("detect_interest: empty session");
  const PropertySchema& schema = catalog.schema();
  if (table.keys.size() != schema.size()) throw Error("detect_interest: threshold table does not match catalog schema");
  for (std::size_t k = 0; k < schema.size(); ++k) {
    if (table.keys[k] != schema[k].key) {
      throw Error("detect_interest: threshold table property '" + table.keys[k] +
                  "' does not match catalog property '" + schema[k].key + "'");
    }
    if (alpha.size() != schema.size() || alpha[k] != table.alpha[k]) {
      throw Error("detect_interest: alpha for '" + schema[k].key +
                  "' differs from the value the thresholds were calibrated with");
    }
  }

  InterestReport report;
  report.keys = table.keys;
  report.session_length = session.size();
  report.detected.resize(schema.size());
  report.divergences.resize(schema.size());
  report.thresholds.resize(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const double delta = session_divergence(session, k, alpha[k], global, catalog);
    const double eps = table.threshold(k, session.size());
    report.divergences[k] = delta;
    report.thresholds[k] = eps;
    report.detected[k] = delta > eps;
  }
  return report;
}

InterestReport detect_interest(const Session& session, const ThresholdTable& table,
                               const AlphaRates& alpha, const GlobalModel& global,
                               const Catalog& catalog) {
  return detect_interest(resolve_items(catalog, session), table, alpha, global, catalog);
}

InterestReport no_interest(const PropertySchema& schema, std::size_t session_length) {
  InterestReport report;
  report.session_length = session_length;
  for (const Property& p : schema.properties()) report.keys.push_back(p.key);
  report.detected.assign(schema.size(), false);
  report.divergences.assign(schema.size(), 0.0);
  report.thresholds.assign(schema.size(), 0.0);
  return report;
}

std::string report_to_json_line(const InterestReport& report, const Session& session,
                                std::size_t session_index) {
  ordered_json line;
  line["session"] = session_index;
  line["user_id"] = session.user_id;
  line["length"] = report.session_length;
  line["interests"] = report.interests();
  ordered_json div = ordered_json::object();
  ordered_json eps = ordered_json::object();
  for (std::size_t k = 0; k < report.keys.size(); ++k) {
    div[report.keys[k]] = report.divergences[k];
    eps[report.keys[k]] = report.thresholds[k];
  }
  line["divergences"] = std::move(div);
  line["thresholds"] = std::move(eps);
  return line.dump();
}

}  // namespace kli
