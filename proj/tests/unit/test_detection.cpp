#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "kli/detection.hpp"
#include "kli/error.hpp"
#include "kli/rng.hpp"

using namespace kli;

namespace {

// One property with `n` values, one item per value: G and G_k uniform.
struct Uniform {
  Catalog catalog;
  GlobalModel global;
};

Uniform uniform_catalog(std::size_t n, double eps = 0.0) {
  std::vector<std::vector<ValueIndex>> rows;
  for (std::size_t v = 0; v < n; ++v) rows.push_back({static_cast<ValueIndex>(v)});
  Catalog c = test::make_catalog({test::numbered_property("k", n)}, rows);
  GlobalModel g = fit_global_model(c, std::nullopt, eps);
  return {std::move(c), std::move(g)};
}

// KL of the smoothed point mass against uniform(n): independent closed form.
double point_mass_divergence(std::size_t n, double alpha, std::size_t m) {
  const double lambda = std::exp(-alpha * static_cast<double>(m));
  const double u = 1.0 / static_cast<double>(n);
  const double hit = (1.0 - lambda) + lambda * u;
  const double miss = lambda * u;
  return hit * std::log(hit / u) + static_cast<double>(n - 1) * miss * std::log(miss / u);
}

}  // namespace

TEST_CASE("closed-form divergences used as oracles") {
  CHECK(point_mass_divergence(2, 0.5, 1) == doctest::Approx(0.0795415058653013).epsilon(1e-12));
  CHECK(point_mass_divergence(10, 0.5, 10) == doctest::Approx(2.2522553767650444).epsilon(1e-12));
}

TEST_CASE("upper_quantile takes the ceil((1 - sig) n) order statistic") {
  std::vector<double> xs(20000);
  std::iota(xs.begin(), xs.end(), 1.0);
  std::shuffle(xs.begin(), xs.end(), std::mt19937_64(1));
  CHECK(upper_quantile(xs, 0.05) == 19000.0);
  CHECK(upper_quantile(xs, 0.999) == 20.0);
  std::vector<double> three{3.0, 1.0, 2.0};
  CHECK(upper_quantile(three, 0.5) == 2.0);
}

TEST_CASE("single-draw null sessions on a binary uniform property") {
  const auto u = uniform_catalog(2);
  const AlphaRates alpha{0.5};
  const auto table = calibrate_thresholds(u.global, u.catalog.schema(), alpha,
                                          CalibrationParams{0.05, 2000, 3, 1, 1});
  // Every m = 1 null session is a point mass, so every draw gives the same Delta.
  CHECK(table.thresholds[0][0] == doctest::Approx(point_mass_divergence(2, 0.5, 1)).epsilon(1e-12));
  CHECK(std::abs(table.thresholds[0][0] - 0.07947) < 1e-4);
}

TEST_CASE("calibration validates its parameters") {
  const auto u = uniform_catalog(3);
  const AlphaRates alpha{0.5};
  CHECK_THROWS_AS(calibrate_thresholds(u.global, u.catalog.schema(), alpha, {0.0, 2000, 5, 1, 1}), Error);
  CHECK_THROWS_AS(calibrate_thresholds(u.global, u.catalog.schema(), alpha, {1.0, 2000, 5, 1, 1}), Error);
  CHECK_THROWS_AS(calibrate_thresholds(u.global, u.catalog.schema(), alpha, {0.05, 999, 5, 1, 1}), Error);
  CHECK_THROWS_AS(calibrate_thresholds(u.global, u.catalog.schema(), alpha, {0.05, 2000, 0, 1, 1}), Error);
  CHECK_THROWS_AS(calibrate_thresholds(u.global, u.catalog.schema(), AlphaRates{}, {0.05, 2000, 5, 1, 1}), Error);
}

TEST_CASE("calibration is deterministic and schedule independent") {
  const auto u = uniform_catalog(6, 1e-6);
  const AlphaRates alpha{0.7};
  const CalibrationParams one{0.05, 3000, 12, 99, 1};
  CalibrationParams many = one;
  many.threads = 7;
  const auto a = calibrate_thresholds(u.global, u.catalog.schema(), alpha, one);
  const auto b = calibrate_thresholds(u.global, u.catalog.schema(), alpha, many);
  CHECK(a == b);
  CHECK(threshold_table_to_json(a) == threshold_table_to_json(b));
}

TEST_CASE("different seeds agree within Monte Carlo error") {
  // Skewed G_k so the null distribution of Delta is close to continuous.
  const std::vector<double> g{0.31, 0.22, 0.15, 0.11, 0.08, 0.06, 0.04, 0.02, 0.007, 0.003};
  const auto dist = Categorical::from_probs(g);
  const std::size_t n = 20000;
  const double sig = 0.05;
  for (std::size_t m : {3u, 8u}) {
    auto first = sample_null_divergences(dist, 0.5, m, n, 1);
    auto second = sample_null_divergences(dist, 0.5, m, n, 2);
    const double q2 = upper_quantile(second, sig);
    // Distribution-free 3-sigma bracket from the binomial law of the rank.
    std::sort(first.begin(), first.end());
    const double r = std::ceil((1 - sig) * n);
    const double spread = 3.0 * std::sqrt(n * sig * (1 - sig));
    const double lo = first[static_cast<std::size_t>(r - spread) - 1];
    const double hi = first[static_cast<std::size_t>(r + spread) - 1];
    CHECK(q2 >= lo);
    CHECK(q2 <= hi);
  }
}

TEST_CASE("thresholds fall as significance rises") {
  const auto u = uniform_catalog(5, 1e-6);
  const AlphaRates alpha{0.5};
  double prev_sig = 0.0;
  ThresholdTable prev;
  for (double sig : {0.01, 0.05, 0.2, 0.5, 0.999}) {
    auto t = calibrate_thresholds(u.global, u.catalog.schema(), alpha, {sig, 2000, 10, 5, 1});
    for (const auto& row : t.thresholds) {
      for (double e : row) CHECK(e >= 0.0);
    }
    if (prev_sig > 0.0) {
      for (std::size_t m = 0; m < 10; ++m) CHECK(t.thresholds[0][m] <= prev.thresholds[0][m]);
    }
    prev_sig = sig;
    prev = std::move(t);
  }
  // At significance 0.999 the threshold is the 2nd smallest of 2000 draws.
  auto samples = sample_null_divergences(u.global.value_dist(0), 0.5, 4, 2000, derive_seed(5, 0, 4));
  std::sort(samples.begin(), samples.end());
  CHECK(prev.thresholds[0][3] == samples[1]);
}

TEST_CASE("session divergence") {
  const auto u = uniform_catalog(10);
  const std::vector<ItemIndex> same(10, 3);
  CHECK(session_divergence(same, 0, 0.0, u.global, u.catalog) == 0.0);
  CHECK(session_divergence(same, 0, 0.5, u.global, u.catalog) ==
        doctest::Approx(point_mass_divergence(10, 0.5, 10)).epsilon(1e-12));
  CHECK(std::abs(session_divergence(same, 0, 0.5, u.global, u.catalog) - 2.2523) < 1e-3);
  CHECK_THROWS_AS(session_divergence(std::span<const ItemIndex>{}, 0, 0.5, u.global, u.catalog), Error);

  Session s;
  s.items = {"i1", "i1"};
  s.timestamps = {0, 1};
  CHECK(session_divergence(s, "k", 0.5, u.global, u.catalog) > 0.0);
}

TEST_CASE("null sessions stay under the threshold at the calibrated rate") {
  const std::vector<double> g{0.3, 0.2, 0.15, 0.1, 0.08, 0.06, 0.05, 0.03, 0.02, 0.01};
  std::vector<std::vector<ValueIndex>> rows;
  for (std::size_t v = 0; v < g.size(); ++v) rows.push_back({static_cast<ValueIndex>(v)});
  const Catalog c = test::make_catalog({test::numbered_property("k", g.size())}, rows);
  const GlobalModel global = global_model_from_items(c, Categorical::from_probs(g), 0.0);
  const AlphaRates alpha{0.5};
  const auto table = calibrate_thresholds(global, c.schema(), alpha, {0.05, 20000, 7, 3, 0});

  Engine eng(123);
  const DiscreteSampler sampler(global.item_dist.probs());
  const int trials = 10000;
  int below = 0;
  for (int t = 0; t < trials; ++t) {
    std::vector<ItemIndex> s(7);
    for (auto& i : s) i = static_cast<ItemIndex>(sampler(eng));
    if (session_divergence(s, 0, 0.5, global, c) <= table.threshold(0, 7)) ++below;
  }
  const double rate = static_cast<double>(below) / trials;
  CHECK(rate >= 0.93);
  CHECK(rate <= 0.97);
}

TEST_CASE("detect_interest decisions") {
  const auto u = uniform_catalog(10, 1e-6);
  const AlphaRates alpha{0.5};
  const auto table = calibrate_thresholds(u.global, u.catalog.schema(), alpha, {0.05, 5000, 20, 7, 0});
  const std::vector<ItemIndex> planted(10, 4);

  const auto report = detect_interest(planted, table, alpha, u.global, u.catalog);
  CHECK(report.interests() == std::vector<PropertyKey>{"k"});
  CHECK(report.consistent());
  CHECK(report.session_length == 10);
  CHECK(report.divergences[0] > 2.0);

  SUBCASE("alpha zero empties U") {
    const AlphaRates zero{0.0};
    const auto t0 = calibrate_thresholds(u.global, u.catalog.schema(), zero, {0.05, 2000, 20, 7, 0});
    // Every null Delta is 0, so the thresholds are 0 and nothing exceeds them.
    CHECK(detect_interest(planted, t0, zero, u.global, u.catalog).empty());
    ThresholdTable positive = t0;
    positive.override_threshold(0, 0.01);
    CHECK(detect_interest(planted, positive, zero, u.global, u.catalog).empty());
  }
  SUBCASE("alpha must match the calibration") {
    CHECK_THROWS_WITH_AS(detect_interest(planted, table, AlphaRates{0.6}, u.global, u.catalog),
                         doctest::Contains("alpha"), Error);
  }
  SUBCASE("empty session") {
    CHECK_THROWS_AS(detect_interest(std::span<const ItemIndex>{}, table, alpha, u.global, u.catalog), Error);
  }
  SUBCASE("lengths beyond M_max use the last threshold") {
    const std::vector<ItemIndex> long_session(35, 1);
    const auto r = detect_interest(long_session, table, alpha, u.global, u.catalog);
    CHECK(r.thresholds[0] == table.thresholds[0][19]);
  }
  SUBCASE("threshold override") {
    ThresholdTable strict = table;
    strict.override_threshold(0, 100.0);
    CHECK(detect_interest(planted, strict, alpha, u.global, u.catalog).empty());
  }
}

TEST_CASE("lowering significance never grows U") {
  std::mt19937_64 rng(17);
  const std::vector<std::size_t> cards{3, 6, 9};
  std::vector<Property> props;
  for (std::size_t k = 0; k < cards.size(); ++k) props.push_back(test::numbered_property("p" + std::to_string(k), cards[k]));
  std::vector<std::vector<ValueIndex>> rows;
  for (int i = 0; i < 120; ++i) {
    rows.push_back({static_cast<ValueIndex>(rng() % 3), static_cast<ValueIndex>(rng() % 6),
                    static_cast<ValueIndex>(rng() % 9)});
  }
  const Catalog c = test::make_catalog(props, rows);
  const GlobalModel g = fit_global_model(c);
  const AlphaRates alpha = make_alpha(c.schema(), 0.5);
  const auto loose = calibrate_thresholds(g, c.schema(), alpha, {0.2, 2000, 12, 4, 0});
  const auto strict = calibrate_thresholds(g, c.schema(), alpha, {0.01, 2000, 12, 4, 0});
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<ItemIndex> s(1 + rng() % 12);
    const ItemIndex anchor = static_cast<ItemIndex>(rng() % 120);
    for (auto& i : s) i = rng() % 2 ? anchor : static_cast<ItemIndex>(rng() % 120);
    const auto r_loose = detect_interest(s, loose, alpha, g, c);
    const auto r_strict = detect_interest(s, strict, alpha, g, c);
    CHECK(r_loose.consistent());
    CHECK(r_strict.consistent());
    for (std::size_t k = 0; k < cards.size(); ++k) {
      if (r_strict.detected[k]) CHECK(r_loose.detected[k]);
    }
  }
}

TEST_CASE("threshold table JSON") {
  const auto u = uniform_catalog(4, 1e-6);
  const AlphaRates alpha{0.25};
  const auto table = calibrate_thresholds(u.global, u.catalog.schema(), alpha, {0.05, 2000, 6, 11, 0});
  const std::string text = threshold_table_to_json(table);
  const auto back = threshold_table_from_json(text);
  CHECK(back == table);
  CHECK(threshold_table_to_json(back) == text);
  CHECK(text.find("\"M_max\": 6") != std::string::npos);

  CHECK_THROWS_AS(threshold_table_from_json("{}"), Error);
  CHECK_THROWS_AS(threshold_table_from_json(
                      R"({"significance":0.05,"n_samples":1000,"seed":1,"M_max":2,"alpha":{"k":0.5},"thresholds":{"k":[0.1]}})"),
                  Error);
  CHECK_THROWS_AS(threshold_table_from_json(
                      R"({"significance":0.05,"n_samples":1000,"seed":1,"M_max":1,"alpha":{},"thresholds":{"k":[0.1]}})"),
                  Error);
}

TEST_CASE("make_alpha applies overrides by key") {
  const PropertySchema schema({{"a", {"x"}}, {"b", {"y"}}});
  CHECK(make_alpha(schema, 0.5, {{"b", 1.5}}) == AlphaRates{0.5, 1.5});
  CHECK_THROWS_AS(make_alpha(schema, 0.5, {{"c", 1.0}}), Error);
  CHECK_THROWS_AS(make_alpha(schema, -1.0), Error);
}
