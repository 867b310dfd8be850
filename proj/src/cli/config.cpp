#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kli/cli.hpp"

namespace kli::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

std::map<std::string, double> read_overrides(const ordered_json& node, const char* name) {
  if (!node.is_object()) throw UsageError(std::string("config: '") + name + "' must be an object");
  std::map<std::string, double> out;
  for (const auto& [key, value] : node.items()) {
    if (!value.is_number()) throw UsageError(std::string("config: '") + name + "." + key + "' must be a number");
    out[key] = value.get<double>();
  }
  return out;
}

}  // namespace

Config Config::from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw UsageError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config: expected a JSON object");
  Config c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "alpha") c.alpha = value.get<double>();
      else if (key == "alpha_overrides") c.alpha_overrides = read_overrides(value, "alpha_overrides");
      else if (key == "significance") c.significance = value.get<double>();
      else if (key == "n_samples") c.n_samples = value.get<std::size_t>();
      else if (key == "M_max") c.M_max = value.get<std::size_t>();
      else if (key == "max_gap_seconds") c.max_gap_seconds = value.get<std::int64_t>();
      else if (key == "N") c.N = value.get<std::size_t>();
      else if (key == "smoothing_epsilon") c.smoothing_epsilon = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<unsigned>();
      else if (key == "candidates") c.candidates = value.get<std::size_t>();
      else if (key == "epsilon_overrides") c.epsilon_overrides = read_overrides(value, "epsilon_overrides");
      else throw UsageError("config: unknown key '" + key + "'");
    }
  } catch (const ordered_json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string Config::to_json() const {
  ordered_json doc;
  doc["alpha"] = alpha;
  doc["alpha_overrides"] = alpha_overrides;
  doc["significance"] = significance;
  doc["n_samples"] = n_samples;
  doc["M_max"] = M_max;
  doc["max_gap_seconds"] = max_gap_seconds;
  doc["N"] = N;
  doc["smoothing_epsilon"] = smoothing_epsilon;
  doc["seed"] = seed;
  doc["threads"] = threads;
  doc["candidates"] = candidates;
  doc["epsilon_overrides"] = epsilon_overrides;
  return doc.dump(1);
}

void Config::validate() const {
  auto non_negative = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!non_negative(alpha)) throw UsageError("config: alpha must be >= 0");
  for (const auto& [k, v] : alpha_overrides) {
    if (!non_negative(v)) throw UsageError("config: alpha override for '" + k + "' must be >= 0");
  }
  if (!(significance > 0.0 && significance < 1.0)) throw UsageError("config: significance must be in (0, 1)");
  if (n_samples < 1000) throw UsageError("config: n_samples must be >= 1000");
  if (M_max < 1) throw UsageError("config: M_max must be >= 1");
  if (max_gap_seconds <= 0) throw UsageError("config: max_gap_seconds must be > 0");
  if (N < 1) throw UsageError("config: N must be >= 1");
  if (!(smoothing_epsilon >= 0.0 && smoothing_epsilon < 1.0)) {
    throw UsageError("config: smoothing_epsilon must be in [0, 1)");
  }
  for (const auto& [k, v] : epsilon_overrides) {
    if (!non_negative(v)) throw UsageError("config: epsilon override for '" + k + "' must be >= 0");
  }
}

}  // namespace kli::cli
