#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "kli/distributions.hpp"
#include "kli/error.hpp"
#include "kli/simulator.hpp"

using namespace kli;

TEST_CASE("schema spec parsing") {
  const auto specs = parse_schema_spec("color:10,size:4");
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].key == "color");
  CHECK(specs[0].n_values == 10);
  CHECK(specs[1].n_values == 4);
  CHECK_THROWS_AS(parse_schema_spec("color"), Error);
  CHECK_THROWS_AS(parse_schema_spec("color:x"), Error);
  CHECK_THROWS_AS(parse_schema_spec(""), Error);
}

TEST_CASE("synthetic catalog") {
  const std::vector<PropertySpec> spec{{"color", 10, {}}};
  const auto a = synth_catalog(1000, spec, 1);
  CHECK(a.catalog.item_count() == 1000);
  CHECK(a.catalog.id(0) == "i0000");
  CHECK(a.catalog.id(999) == "i0999");
  std::vector<int> counts(10, 0);
  for (ItemIndex i = 0; i < 1000; ++i) ++counts[a.catalog.value(i, 0)];
  for (int c : counts) CHECK(std::abs(c / 1000.0 - 0.1) <= 0.1);
  CHECK(a.global.item_dist[0] == doctest::Approx(1e-3));

  CHECK(synth_catalog(1000, spec, 1).catalog == a.catalog);
  CHECK_FALSE(synth_catalog(1000, spec, 2).catalog == a.catalog);

  const std::vector<PropertySpec> minimal{{"k", 2, {}}};
  CHECK(synth_catalog(2, minimal, 3).catalog.item_count() == 2);
  CHECK_THROWS_AS(synth_catalog(1, minimal, 3), Error);
  const std::vector<PropertySpec> one_value{{"k", 1, {}}};
  CHECK_THROWS_AS(synth_catalog(10, one_value, 3), Error);
}

TEST_CASE("tilted distribution matches a brute-force product") {
  const std::vector<PropertySpec> spec{{"a", 4, {1, 2, 3, 4}}, {"b", 3, {}}};
  auto synth = synth_catalog(80, spec, 4);
  std::mt19937_64 rng(5);
  // Non-uniform item popularity to make the check meaningful.
  const auto g_items = Categorical::from_probs(test::random_simplex(rng, 80, false));
  const GlobalModel g = global_model_from_items(synth.catalog, g_items);
  const auto ta = Categorical::from_probs(test::random_simplex(rng, 4, false));
  const auto tb = Categorical::from_probs(test::random_simplex(rng, 3, false));
  const PlantedInterest planted{{{0, ta}, {1, tb}}, 5};
  const auto psi = tilted_distribution(synth.catalog, g, planted);

  std::vector<double> w(80);
  double total = 0.0;
  for (ItemIndex i = 0; i < 80; ++i) {
    const auto va = synth.catalog.value(i, 0);
    const auto vb = synth.catalog.value(i, 1);
    w[i] = g_items[i] * ta[va] / g.value_dist(0)[va] * tb[vb] / g.value_dist(1)[vb];
    total += w[i];
  }
  for (ItemIndex i = 0; i < 80; ++i) CHECK(std::abs(psi[i] - w[i] / total) <= 1e-12);

  const auto null = tilted_distribution(synth.catalog, g, PlantedInterest{{}, 3});
  for (ItemIndex i = 0; i < 80; ++i) CHECK(std::abs(null[i] - g_items[i]) <= 1e-15);
}

TEST_CASE("null sessions follow G") {
  const std::vector<PropertySpec> spec{{"k", 3, {}}};
  const auto synth = synth_catalog(6, spec, 8);
  const auto s = synth_session(synth.catalog, synth.global, PlantedInterest{{}, 60000}, 99);
  CHECK(s.user_id == "sim");
  CHECK(s.timestamps[2] == 20);
  std::map<std::string, int> counts;
  for (const auto& id : s.items) ++counts[id];
  // Chi-square with 5 degrees of freedom; 20.5 is the 0.999 quantile.
  double chi2 = 0.0;
  for (ItemIndex i = 0; i < 6; ++i) {
    const double expected = 10000.0;
    const double d = counts[synth.catalog.id(i)] - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 20.5);
}

TEST_CASE("a target on a single value yields only that value") {
  const auto c = test::make_catalog({{"color", {"red", "blue"}}}, {{0}, {1}, {0}, {1}});
  const GlobalModel g = fit_global_model(c);
  const PlantedInterest planted{{{0, Categorical::point_mass(2, 0)}}, 200};
  const auto s = synth_session(c, g, planted, 3);
  for (const auto& id : s.items) CHECK(c.value(c.require(id), 0) == 0);
}

TEST_CASE("empirical marginals converge to the target") {
  const std::vector<PropertySpec> spec{{"color", 5, {}}, {"size", 3, {}}};
  const auto synth = synth_catalog(300, spec, 10);
  const auto target = boosted_value_distribution(synth.global.value_dist(0), 2, 3.0);
  const PlantedInterest planted{{{0, target}}, 100000};
  const auto s = synth_session(synth.catalog, synth.global, planted, 11);
  const auto f = empirical_value_distribution(resolve_items(synth.catalog, s), 0, synth.catalog);
  for (std::size_t v = 0; v < 5; ++v) CHECK(std::abs(f[v] - target[v]) < 0.01);
}

TEST_CASE("boosted value distribution") {
  const auto g = Categorical::from_probs({0.5, 0.25, 0.25});
  const auto b = boosted_value_distribution(g, 1, 2.0);
  CHECK(b[0] == doctest::Approx(0.4));
  CHECK(b[1] == doctest::Approx(0.4));
  CHECK(b[2] == doctest::Approx(0.2));
  CHECK_THROWS_AS(boosted_value_distribution(g, 1, 0.0), Error);
}

TEST_CASE("simulate_sessions") {
  const std::vector<PropertySpec> spec{{"color", 6, {}}, {"size", 4, {}}};
  const auto synth = synth_catalog(120, spec, 12);
  SimulationOptions opt;
  opt.n_sessions = 300;
  opt.threads = 1;
  const auto one = simulate_sessions(synth.catalog, synth.global, opt, 77);
  opt.threads = 4;
  const auto four = simulate_sessions(synth.catalog, synth.global, opt, 77);
  REQUIRE(one.size() == 300);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].session.items == four[i].session.items);
    CHECK(one[i].planted == four[i].planted);
  }
  std::map<std::size_t, int> lengths;
  for (const auto& s : one) {
    ++lengths[s.session.size()];
    CHECK(s.planted.size() == 1);
  }
  CHECK(lengths.begin()->first == 5);
  CHECK(lengths.rbegin()->first == 10);
  CHECK(lengths.size() == 6);
  CHECK(one[1].session.user_id == "u0001");
  CHECK(one[1].session.timestamps[0] == 86400);
  CHECK(one[1].session.timestamps[1] == 86410);

  // Events re-sessionize into the same sessions.
  const auto events = to_events(one);
  const auto resplit = split_sessions(events, kDefaultMaxGapSeconds);
  REQUIRE(resplit.size() == one.size());
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(resplit[i].items == one[i].session.items);

  std::ostringstream truth;
  write_truth_csv(truth, std::span(one).first(1), synth.catalog);
  CHECK(truth.str().starts_with("user_id,property,value\nu0000,"));

  opt.planted_properties = 3;
  CHECK_THROWS_AS(simulate_sessions(synth.catalog, synth.global, opt, 1), Error);
}
