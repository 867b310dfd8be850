#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kli/catalog.hpp"
#include "kli/detection.hpp"

namespace kli {

enum class ScorerKind { static_cosine, uniform, popularity };

const char* to_string(ScorerKind kind);
// Accepts "static", "static-cosine", "uniform", "popularity".
ScorerKind parse_scorer(std::string_view name);

// Base weight function w. static-cosine needs the anchor item (last item of
// the session history).
struct Scorer {
  ScorerKind kind = ScorerKind::popularity;
  std::optional<ItemIndex> anchor;
};

// One weight per catalog item, in load order.
std::vector<double> base_weights(const Scorer& scorer, const Catalog& catalog,
                                 const GlobalModel& global);

// Likelihood ratios Psi-hat^s_k(v) / G_k(v) for each detected property k.
struct InterestTilt {
  std::vector<std::pair<std::size_t, std::vector<double>>> ratios;

  bool empty() const { return ratios.empty(); }
};

InterestTilt interest_tilt(std::span<const ItemIndex> session, const InterestReport& report,
                           const AlphaRates& alpha, const GlobalModel& global,
                           const Catalog& catalog);

// Tilt from explicit per-property estimates (property index, Psi-hat_k).
InterestTilt interest_tilt_from_estimates(
    std::span<const std::pair<std::size_t, Categorical>> estimates, const GlobalModel& global);

// c^s(j) = prod over detected k of Psi-hat^s_k(f(j,k)) / G_k(f(j,k)); 1 when
// nothing was detected.
double interest_coefficient(const InterestTilt& tilt, const Catalog& catalog, ItemIndex item);
double interest_coefficient(const Session& session, const InterestReport& report,
                            std::string_view item_id, const AlphaRates& alpha,
                            const GlobalModel& global, const Catalog& catalog);

// scores[j] = c^s(j) * base[j] for every item.
std::vector<double> enhanced_scores(std::span<const double> base, const InterestTilt& tilt,
                                    const Catalog& catalog);

struct RankedEntry {
  ItemIndex item = 0;
  std::string item_id;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

// Sorted by score descending, ties by ascending item_id.
struct RankedList {
  std::vector<RankedEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool operator==(const RankedList&) const = default;
};

// arg top-N over all items except `exclude`.
RankedList top_n(std::span<const double> scores, const Catalog& catalog,
                 std::optional<ItemIndex> exclude, std::size_t n);

struct RecommendOptions {
  ScorerKind scorer = ScorerKind::static_cosine;
  std::size_t n = 10;
  // When > 0, only the base top-`candidates` items are re-scored.
  std::size_t candidates = 0;
};

// R*(s): ranks every item but the session's last by c^s(j) * w(j).
RankedList recommend(std::span<const ItemIndex> session, const InterestTilt& tilt,
                     const RecommendOptions& options, const Catalog& catalog,
                     const GlobalModel& global);
RankedList recommend(const Session& session, const InterestReport& report,
                     const AlphaRates& alpha, const RecommendOptions& options,
                     const Catalog& catalog, const GlobalModel& global);

// R(i): the base recommender's top-N for anchor i, no interest adjustment.
RankedList base_recommend(ItemIndex anchor, const RecommendOptions& options,
                          const Catalog& catalog, const GlobalModel& global);

}  // namespace kli
