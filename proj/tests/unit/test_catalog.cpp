#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "kli/catalog.hpp"
#include "kli/error.hpp"
#include "kli/simulator.hpp"

using namespace kli;

namespace {

const char* kTwoItems = R"({
  "properties": {"color": ["red", "blue"]},
  "items": [
    {"id": "a", "props": {"color": "red"}},
    {"id": "b", "props": {"color": "blue"}}
  ]
})";

}  // namespace

TEST_CASE("parse a minimal catalog") {
  const Catalog c = parse_catalog(kTwoItems);
  CHECK(c.item_count() == 2);
  CHECK(c.schema().size() == 1);
  CHECK(c.id(1) == "b");
  CHECK(property_value(c, "a", "color") == 0);
  CHECK(property_value(c, "b", "color") == 1);
  CHECK(c.schema().feature_dim() == 2);
}

TEST_CASE("property order in the file decides indices") {
  const Catalog c = parse_catalog(R"({"properties": {"zeta": ["x", "y"], "alpha": ["q", "p", "r"]},
    "items": [{"id": "i", "props": {"alpha": "r", "zeta": "y"}}]})");
  CHECK(c.schema()[0].key == "zeta");
  CHECK(c.schema()[1].key == "alpha");
  CHECK(c.value(0, 1) == 2);
  CHECK(c.schema().feature_offset(1) == 2);
}

TEST_CASE("catalog load errors name the item") {
  CHECK_THROWS_WITH_AS(parse_catalog(R"({"properties": {"color": ["red"]},
      "items": [{"id": "a", "props": {}}]})"),
                       doctest::Contains("missing property 'color'"), Error);
  CHECK_THROWS_WITH_AS(parse_catalog(R"({"properties": {"color": ["red"]},
      "items": [{"id": "a", "props": {"color": "teal"}}]})"),
                       doctest::Contains("id 'a'"), Error);
  CHECK_THROWS_WITH_AS(parse_catalog(R"({"properties": {"color": ["red"]},
      "items": [{"id": "a", "props": {"color": "red", "size": "xl"}}]})"),
                       doctest::Contains("unknown property 'size'"), Error);
  CHECK_THROWS_WITH_AS(parse_catalog(R"({"properties": {"color": ["red"]},
      "items": [{"id": "a", "props": {"color": "red"}}, {"id": "a", "props": {"color": "red"}}]})"),
                       doctest::Contains("duplicate item_id 'a'"), Error);
  CHECK_THROWS_WITH_AS(parse_catalog("{not json"), doctest::Contains("malformed JSON"), Error);
  CHECK_THROWS_AS(parse_catalog(R"({"properties": {"color": []}, "items": []})"), Error);
  CHECK_THROWS_AS(parse_catalog(R"({"properties": {"color": ["r", "r"]}, "items": []})"), Error);
  CHECK_THROWS_WITH_AS(load_catalog("/nonexistent/catalog.json"),
                       doctest::Contains("/nonexistent/catalog.json"), Error);
}

TEST_CASE("generated catalogs round-trip through JSON") {
  const std::vector<PropertySpec> spec{{"color", 12, {}}, {"size", 5, {}}, {"brand", 30, {}}};
  const auto synth = synth_catalog(1000, spec, 77);
  const std::string text = dump_catalog(synth.catalog);
  const Catalog back = parse_catalog(text);
  CHECK(back == synth.catalog);
  CHECK(dump_catalog(back) == text);

  std::filesystem::create_directories(KLI_TEST_TMP);
  const auto path = std::filesystem::path(KLI_TEST_TMP) / "roundtrip_catalog.json";
  save_catalog(synth.catalog, path);
  CHECK(load_catalog(path) == synth.catalog);
}

TEST_CASE("property_value lookups") {
  const Catalog c = parse_catalog(kTwoItems);
  CHECK_THROWS_AS(property_value(c, "zzz", "color"), Error);
  CHECK_THROWS_AS(property_value(c, "a", "size"), Error);

  const std::vector<PropertySpec> spec{{"p", 3, {}}, {"q", 9, {}}};
  const auto synth = synth_catalog(300, spec, 1);
  for (ItemIndex i = 0; i < synth.catalog.item_count(); ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(property_value(synth.catalog, synth.catalog.id(i), synth.catalog.schema()[k].key) <
            synth.catalog.schema()[k].values.size());
    }
  }
}

TEST_CASE("fit_global_model examples") {
  const Catalog c = parse_catalog(kTwoItems);
  const GlobalModel uniform = fit_global_model(c);
  CHECK(uniform.item_dist[0] == 0.5);
  CHECK(uniform.item_dist[1] == 0.5);

  const Catalog reds = parse_catalog(R"({"properties": {"color": ["red", "blue"]},
    "items": [{"id": "a", "props": {"color": "red"}}, {"id": "b", "props": {"color": "red"}}]})");
  CHECK(fit_global_model(reds, std::nullopt, 0.0).value_dist(0)[0] == 1.0);
  CHECK(fit_global_model(reds, std::nullopt, 1e-6).value_dist(0)[1] > 0.0);

  const std::vector<Event> events{{"u", "a", 0, EventType::view},
                                  {"u", "a", 1, EventType::view},
                                  {"u", "b", 2, EventType::purchase},
                                  {"u", "ghost", 3, EventType::view}};
  const GlobalModel counted = fit_global_model(c, std::span<const Event>(events), 0.0);
  CHECK(counted.item_dist[0] == doctest::Approx(3.0 / 5.0).epsilon(1e-15));
  CHECK(counted.item_dist[1] == doctest::Approx(2.0 / 5.0).epsilon(1e-15));
  CHECK(counted.skipped_events == 1);

  CHECK_THROWS_AS(fit_global_model(c, std::nullopt, 1.0), Error);
  CHECK_THROWS_AS(fit_global_model(c, std::nullopt, -0.1), Error);
  CHECK_THROWS_AS(fit_global_model(Catalog{}), Error);
}

TEST_CASE("G_k is the pushforward of G and stays positive when smoothed") {
  std::mt19937_64 rng(8);
  const std::vector<PropertySpec> spec{{"a", 4, {5, 1, 1, 0}}, {"b", 7, {}}, {"c", 3, {1, 2, 3}}};
  const auto synth = synth_catalog(200, spec, 3);
  const Catalog& cat = synth.catalog;
  std::vector<Event> events;
  for (int e = 0; e < 500; ++e) {
    events.push_back({"u", cat.id(static_cast<ItemIndex>(rng() % 50)), e, EventType::view});
  }
  const GlobalModel raw = fit_global_model(cat, std::span<const Event>(events), 0.0);
  for (std::size_t k = 0; k < cat.schema().size(); ++k) {
    for (std::size_t v = 0; v < cat.schema()[k].values.size(); ++v) {
      double brute = 0.0;
      for (ItemIndex i = 0; i < cat.item_count(); ++i) {
        if (cat.value(i, k) == v) brute += raw.item_dist[i];
      }
      CHECK(std::abs(raw.value_dist(k)[v] - brute) <= 1e-12);
    }
  }
  // Value a=3 has zero weight, so only smoothing keeps it positive.
  CHECK(raw.value_dist(0)[3] == 0.0);
  const GlobalModel smoothed = fit_global_model(cat, std::span<const Event>(events), 1e-6);
  for (const auto& g : smoothed.value_dists) {
    for (double p : g.probs()) CHECK(p > 0.0);
  }
  CHECK(fit_global_model(cat, std::span<const Event>(events), 1e-6) == smoothed);
}

TEST_CASE("one-hot features") {
  const Catalog c = test::make_catalog({{"color", {"r", "g"}}, {"size", {"s", "m", "l"}}},
                                       {{0, 2}, {1, 2}});
  const auto f0 = c.features(0);
  CHECK(std::vector<double>(f0.begin(), f0.end()) == std::vector<double>{1, 0, 0, 0, 1});
  CHECK(c.feature_norm(1) == doctest::Approx(std::sqrt(2.0)));
}
