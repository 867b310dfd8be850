#include "kli/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <ostream>

#include "kli/error.hpp"
#include "kli/parallel.hpp"
#include "kli/rng.hpp"

namespace kli {

std::vector<PropertySpec> parse_schema_spec(std::string_view text) {
  std::vector<PropertySpec> specs;
  while (!text.empty()) {
    const std::size_t comma = text.find(',');
    std::string_view part = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    const std::size_t colon = part.find(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw Error("schema spec: expected key:count, got '" + std::string(part) + "'");
    }
    std::size_t count = 0;
    const auto digits = part.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), count);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw Error("schema spec: bad value count in '" + std::string(part) + "'");
    }
    specs.push_back({std::string(part.substr(0, colon)), count, {}});
  }
  if (specs.empty()) throw Error("schema spec: no properties");
  return specs;
}

namespace {

std::string padded(const char* prefix, std::size_t i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, width - digits.size(), '0');
  return prefix + digits;
}

int digits_for(std::size_t n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return std::max(d, 4);
}

}  // namespace

SyntheticCatalog synth_catalog(std::size_t n_items, std::span<const PropertySpec> schema,
                               std::uint64_t seed, double smoothing_epsilon) {
  if (n_items < 2) throw Error("synth_catalog: need at least 2 items");
  if (schema.empty()) throw Error("synth_catalog: schema has no properties");
  std::vector<Property> properties;
  std::vector<std::vector<ValueIndex>> columns;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const PropertySpec& spec = schema[k];
    if (spec.n_values < 2) throw Error("synth_catalog: property '" + spec.key + "' needs at least 2 values");
    if (!spec.weights.empty() && spec.weights.size() != spec.n_values) {
      throw Error("synth_catalog: weight count mismatch for '" + spec.key + "'");
    }
    Property p{spec.key, {}};
    for (std::size_t v = 0; v < spec.n_values; ++v) p.values.push_back(padded("v", v, 0));
    properties.push_back(std::move(p));

    const std::vector<double> weights =
        spec.weights.empty() ? std::vector<double>(spec.n_values, 1.0) : spec.weights;
    const DiscreteSampler sampler(weights);
    if (!(sampler.total() > 0.0)) throw Error("synth_catalog: zero weights for '" + spec.key + "'");
    Engine eng(derive_seed(seed, 0x5eed, k));
    std::vector<ValueIndex> column(n_items);
    for (auto& v : column) v = static_cast<ValueIndex>(sampler(eng));
    columns.push_back(std::move(column));
  }
  const int width = digits_for(n_items - 1);
  std::vector<std::string> ids;
  ids.reserve(n_items);
  for (std::size_t i = 0; i < n_items; ++i) ids.push_back(padded("i", i, width));

  Catalog catalog(PropertySchema(std::move(properties)), std::move(ids), std::move(columns));
  GlobalModel global = fit_global_model(catalog, std::nullopt, smoothing_epsilon);
  return {std::move(catalog), std::move(global)};
}

Categorical tilted_distribution(const Catalog& catalog, const GlobalModel& global,
                                const PlantedInterest& planted) {
  std::vector<std::vector<double>> ratios;
  for (const auto& [k, target] : planted.targets) {
    const Categorical& g = global.value_dist(k);
    if (target.size() != g.size()) throw Error("planted interest: target support mismatch");
    std::vector<double> r(g.size(), 0.0);
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (target[v] > 0.0) {
        if (g[v] == 0.0) throw Error("planted interest: target puts mass where G_k is zero");
        r[v] = target[v] / g[v];
      }
    }
    ratios.push_back(std::move(r));
  }
  std::vector<double> weights(catalog.item_count());
  for (ItemIndex i = 0; i < catalog.item_count(); ++i) {
    double w = global.item_dist[i];
    for (std::size_t t = 0; t < ratios.size(); ++t) {
      w *= ratios[t][catalog.value(i, planted.targets[t].first)];
    }
    weights[i] = w;
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw Error("planted interest: tilted distribution has zero mass");
  return Categorical::from_weights(std::move(weights));
}

Session synth_session(const Catalog& catalog, const GlobalModel& global,
                      const PlantedInterest& planted, std::uint64_t seed) {
  if (planted.session_length < 1) throw Error("synth_session: session_length must be >= 1");
  const Categorical psi = tilted_distribution(catalog, global, planted);
  const DiscreteSampler sampler(psi.probs());
  Engine eng(seed);
  Session s;
  s.user_id = "sim";
  for (std::size_t j = 0; j < planted.session_length; ++j) {
    s.items.push_back(catalog.id(static_cast<ItemIndex>(sampler(eng))));
    s.timestamps.push_back(static_cast<std::int64_t>(10 * j));
  }
  return s;
}

Categorical boosted_value_distribution(const Categorical& value_dist, ValueIndex value,
                                       double ratio) {
  if (!(ratio > 0.0)) throw Error("tilt ratio must be positive");
  std::vector<double> w(value_dist.probs().begin(), value_dist.probs().end());
  w.at(value) *= ratio;
  return Categorical::from_weights(std::move(w));
}

std::vector<SimulatedSession> simulate_sessions(const Catalog& catalog, const GlobalModel& global,
                                                const SimulationOptions& options,
                                                std::uint64_t seed) {
  if (options.min_length < 1 || options.max_length < options.min_length) {
    throw Error("simulate: invalid session length range");
  }
  const std::size_t n_props = catalog.schema().size();
  if (options.planted_properties > n_props) {
    throw Error("simulate: more planted properties than the schema has");
  }
  std::vector<SimulatedSession> out(options.n_sessions);
  const int width = digits_for(options.n_sessions == 0 ? 0 : options.n_sessions - 1);
  parallel_for(options.n_sessions, options.threads, [&](std::size_t idx) {
    Engine eng(derive_seed(seed, 0x5e55, idx));
    const std::size_t span = options.max_length - options.min_length + 1;
    const std::size_t length =
        options.min_length + static_cast<std::size_t>(uniform01(eng) * static_cast<double>(span));

    std::vector<std::size_t> props(n_props);
    std::iota(props.begin(), props.end(), std::size_t{0});
    PlantedInterest planted;
    planted.session_length = std::min(length, options.max_length);
    SimulatedSession& result = out[idx];
    for (std::size_t t = 0; t < options.planted_properties; ++t) {
      // Partial Fisher-Yates to pick distinct properties.
      const std::size_t pick =
          t + static_cast<std::size_t>(uniform01(eng) * static_cast<double>(n_props - t));
      std::swap(props[t], props[pick]);
      const std::size_t k = props[t];
      const std::size_t card = catalog.schema()[k].values.size();
      const auto value = static_cast<ValueIndex>(uniform01(eng) * static_cast<double>(card));
      planted.targets.emplace_back(
          k, boosted_value_distribution(global.value_dist(k), value, options.tilt_ratio));
      result.planted.emplace_back(k, value);
    }
    result.session = synth_session(catalog, global, planted, eng());
    result.session.user_id = padded("u", idx, width);
    const auto start = static_cast<std::int64_t>(idx) * 86400;
    for (auto& t : result.session.timestamps) t += start;
  });
  return out;
}

std::vector<Event> to_events(std::span<const SimulatedSession> sessions) {
  std::vector<Event> events;
  for (const auto& s : sessions) {
    for (std::size_t j = 0; j < s.session.size(); ++j) {
      events.push_back({s.session.user_id, s.session.items[j], s.session.timestamps[j], EventType::view});
    }
  }
  return events;
}

void write_truth_csv(std::ostream& out, std::span<const SimulatedSession> sessions,
                     const Catalog& catalog) {
  out << "user_id,property,value\n";
  for (const auto& s : sessions) {
    for (const auto& [k, v] : s.planted) {
      const Property& p = catalog.schema()[k];
      out << s.session.user_id << ',' << p.key << ',' << p.values[v] << '\n';
    }
  }
}

}  // namespace kli
