#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kli/catalog.hpp"
#include "kli/events.hpp"

namespace kli {

// One property of a synthetic schema. Empty `weights` means values are
// assigned uniformly.
struct PropertySpec {
  PropertyKey key;
  std::size_t n_values = 2;
  std::vector<double> weights;
};

// Parses "color:10,size:4" into property specs.
std::vector<PropertySpec> parse_schema_spec(std::string_view text);

struct SyntheticCatalog {
  Catalog catalog;
  GlobalModel global;
};

// Items get independent per-property values; G is uniform over items.
SyntheticCatalog synth_catalog(std::size_t n_items, std::span<const PropertySpec> schema,
                               std::uint64_t seed,
                               double smoothing_epsilon = kDefaultSmoothingEpsilon);

// Target value distributions for the properties the simulated user cares
// about. Empty targets give a null session.
struct PlantedInterest {
  std::vector<std::pair<std::size_t, Categorical>> targets;
  std::size_t session_length = 1;
};

// Psi^s(i) proportional to G(i) * prod_k target_k(f(i,k)) / G_k(f(i,k)).
Categorical tilted_distribution(const Catalog& catalog, const GlobalModel& global,
                                const PlantedInterest& planted);

// m i.i.d. draws from Psi^s; timestamps 0, 10, 20, ... for user "sim".
Session synth_session(const Catalog& catalog, const GlobalModel& global,
                      const PlantedInterest& planted, std::uint64_t seed);

// Target distribution that multiplies G_k(value) by `ratio` and renormalizes.
Categorical boosted_value_distribution(const Categorical& value_dist, ValueIndex value,
                                       double ratio);

struct SimulationOptions {
  std::size_t n_sessions = 1000;
  std::size_t min_length = 5;
  std::size_t max_length = 10;
  std::size_t planted_properties = 1;  // per session; 0 gives null sessions
  double tilt_ratio = 3.0;
  unsigned threads = 0;
};

struct SimulatedSession {
  Session session;
  std::vector<std::pair<std::size_t, ValueIndex>> planted;  // (property, boosted value)
};

// Sessions use derived per-session seeds, so output does not depend on the
// thread count. User ids are "u0000", "u0001", ...; session j starts at
// j * 86400 s with events 10 s apart.
std::vector<SimulatedSession> simulate_sessions(const Catalog& catalog, const GlobalModel& global,
                                                const SimulationOptions& options,
                                                std::uint64_t seed);

std::vector<Event> to_events(std::span<const SimulatedSession> sessions);

// CSV of session, user_id, planted property and boosted value label.
void write_truth_csv(std::ostream& out, std::span<const SimulatedSession> sessions,
                     const Catalog& catalog);

}  // namespace kli
