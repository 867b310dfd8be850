#include "kli/rerank.hpp"

#include <algorithm>
#include <numeric>

#include "kli/distributions.hpp"
#include "kli/error.hpp"
#include "kli/simd/kernels.hpp"

namespace kli {

const char* to_string(ScorerKind kind) {
  switch (kind) {
    case ScorerKind::static_cosine: return "static";
    case ScorerKind::uniform: return "uniform";
    case ScorerKind::popularity: return "popularity";
  }
  return "static";
}

ScorerKind parse_scorer(std::string_view name) {
  if (name == "static" || name == "static-cosine") return ScorerKind::static_cosine;
  if (name == "uniform") return ScorerKind::uniform;
  if (name == "popularity") return ScorerKind::popularity;
  throw Error("unknown scorer '" + std::string(name) + "'");
}

std::vector<double> base_weights(const Scorer& scorer, const Catalog& catalog,
                                 const GlobalModel& global) {
  const std::size_t n = catalog.item_count();
  switch (scorer.kind) {
    case ScorerKind::uniform:
      return std::vector<double>(n, 1.0);
    case ScorerKind::popularity: {
      auto p = global.item_dist.probs();
      return {p.begin(), p.end()};
    }
    case ScorerKind::static_cosine: {
      if (!scorer.anchor) throw Error("static-cosine scorer needs an anchor item");
      const ItemIndex a = *scorer.anchor;
      const auto anchor_features = catalog.features(a);
      const double anchor_norm = catalog.feature_norm(a);
      const auto dot = simd::active().dot;
      std::vector<double> w(n, 0.0);
      for (ItemIndex j = 0; j < n; ++j) {
        const double denom = anchor_norm * catalog.feature_norm(j);
        if (denom == 0.0) continue;
        w[j] = dot(anchor_features.data(), catalog.features(j).data(), anchor_features.size()) / denom;
      }
      return w;
    }
  }
  return {};
}

InterestTilt interest_tilt_from_estimates(
    std::span<const std::pair<std::size_t, Categorical>> estimates, const GlobalModel& global) {
  InterestTilt tilt;
  for (const auto& [k, estimate] : estimates) {
    const Categorical& g = global.value_dist(k);
    if (estimate.size() != g.size()) throw Error("interest tilt: estimate support mismatch");
    std::vector<double> ratio(g.size(), 0.0);
    for (std::size_t v = 0; v < g.size(); ++v) {
      if (g[v] == 0.0) {
        if (estimate[v] > 0.0) {
          throw Error("interest coefficient: global value distribution has zero mass "
                      "(unsmoothed global model)");
        }
        continue;
      }
      ratio[v] = estimate[v] / g[v];
    }
    tilt.ratios.emplace_back(k, std::move(ratio));
  }
  return tilt;
}

InterestTilt interest_tilt(std::span<const ItemIndex> session, const InterestReport& report,
                           const AlphaRates& alpha, const GlobalModel& global,
                           const Catalog& catalog) {
  std::vector<std::pair<std::size_t, Categorical>> estimates;
  for (std::size_t k = 0; k < report.detected.size(); ++k) {
    if (!report.detected[k]) continue;
    estimates.emplace_back(k, smoothed_session_estimate(session, k, alpha[k], global, catalog));
  }
  return interest_tilt_from_estimates(estimates, global);
}

double interest_coefficient(const InterestTilt& tilt, const Catalog& catalog, ItemIndex item) {
  double c = 1.0;
  for (const auto& [k, ratio] : tilt.ratios) c *= ratio[catalog.value(item, k)];
  return c;
}

double interest_coefficient(const Session& session, const InterestReport& report,
                            std::string_view item_id, const AlphaRates& alpha,
                            const GlobalModel& global, const Catalog& catalog) {
  const ItemIndex item = catalog.require(item_id);
  const auto items = resolve_items(catalog, session);
  return interest_coefficient(interest_tilt(items, report, alpha, global, catalog), catalog, item);
}

std::vector<double> enhanced_scores(std::span<const double> base, const InterestTilt& tilt,
                                    const Catalog& catalog) {
  std::vector<double> scores(base.begin(), base.end());
  const auto scale = simd::active().scale_by_lookup;
  for (const auto& [k, ratio] : tilt.ratios) {
    scale(scores.data(), catalog.column(k).data(), ratio.data(), scores.size());
  }
  return scores;
}

namespace {

struct RankOrder {
  std::span<const double> scores;
  const Catalog* catalog;

  bool operator()(ItemIndex a, ItemIndex b) const {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return catalog->id_rank(a) < catalog->id_rank(b);
  }
};

RankedList to_ranked_list(std::span<const ItemIndex> order, std::span<const double> scores,
                          const Catalog& catalog) {
  RankedList out;
  out.entries.reserve(order.size());
  for (ItemIndex j : order) out.entries.push_back({j, catalog.id(j), scores[j]});
  return out;
}

}  // namespace

RankedList top_n(std::span<const double> scores, const Catalog& catalog,
                 std::optional<ItemIndex> exclude, std::size_t n) {
  if (scores.size() != catalog.item_count()) throw Error("top_n: score vector does not match catalog");
  std::vector<ItemIndex> order;
  order.reserve(scores.size());
  for (ItemIndex j = 0; j < scores.size(); ++j) {
    if (exclude && *exclude == j) continue;
    order.push_back(j);
  }
  const std::size_t keep = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    RankOrder{scores, &catalog});
  order.resize(keep);
  return to_ranked_list(order, scores, catalog);
}

RankedList recommend(std::span<const ItemIndex> session, const InterestTilt& tilt,
                     const RecommendOptions& options, const Catalog& catalog,
                     const GlobalModel& global) {
  if (session.empty()) throw Error("recommend: empty session");
  if (options.n < 1) throw Error("recommend: N must be >= 1");
  const ItemIndex anchor = session.back();
  const auto base = base_weights(Scorer{options.scorer, anchor}, catalog, global);

  if (options.candidates == 0) {
    return top_n(enhanced_scores(base, tilt, catalog), catalog, anchor, options.n);
  }

  // Truncated re-ranking: re-score only the base top-`candidates`.
  const RankedList pool = top_n(base, catalog, anchor, std::max(options.candidates, options.n));
  std::vector<ItemIndex> order;
  std::vector<double> scores(catalog.item_count(), 0.0);
  for (const auto& e : pool.entries) {
    order.push_back(e.item);
    scores[e.item] = interest_coefficient(tilt, catalog, e.item) * base[e.item];
  }
  std::sort(order.begin(), order.end(), RankOrder{scores, &catalog});
  order.resize(std::min(order.size(), options.n));
  return to_ranked_list(order, scores, catalog);
}

RankedList recommend(const Session& session, const InterestReport& report,
                     const AlphaRates& alpha, const RecommendOptions& options,
                     const Catalog& catalog, const GlobalModel& global) {
  if (session.items.empty()) throw Error("recommend: empty session");
  const auto items = resolve_items(catalog, session);
  return recommend(items, interest_tilt(items, report, alpha, global, catalog), options, catalog,
                   global);
}

RankedList base_recommend(ItemIndex anchor, const RecommendOptions& options,
                          const Catalog& catalog, const GlobalModel& global) {
  if (options.n < 1) throw Error("recommend: N must be >= 1");
  const auto base = base_weights(Scorer{options.scorer, anchor}, catalog, global);
  return top_n(base, catalog, anchor, options.n);
}

}  // namespace kli
