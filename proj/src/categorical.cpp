#include "kli/categorical.hpp"

#include <cmath>
#include <string>

#include "kli/distributions.hpp"
#include "kli/error.hpp"
#include "kli/simd/kernels.hpp"

namespace kli {

Categorical Categorical::from_probs(std::vector<double> probs) {
  if (probs.empty()) throw Error("categorical: empty support");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error("categorical: negative or non-finite probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error("categorical: probabilities sum to " + std::to_string(total));
  }
  return Categorical(std::move(probs));
}

Categorical Categorical::from_weights(std::vector<double> weights) {
  if (weights.empty()) throw Error("categorical: empty support");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("categorical: negative or non-finite weight");
    total += w;
  }
  if (!(total > 0.0)) throw Error("categorical: zero total mass");
  for (double& w : weights) w /= total;
  return Categorical(std::move(weights));
}

Categorical Categorical::uniform(std::size_t support_size) {
  if (support_size == 0) throw Error("categorical: empty support");
  return Categorical(std::vector<double>(support_size, 1.0 / static_cast<double>(support_size)));
}

Categorical Categorical::point_mass(std::size_t support_size, std::size_t index) {
  if (index >= support_size) throw Error("categorical: point mass index out of range");
  std::vector<double> probs(support_size, 0.0);
  probs[index] = 1.0;
  return Categorical(std::move(probs));
}

double kl_divergence(const Categorical& p, const Categorical& q) {
  if (p.size() != q.size()) {
    throw Error("kl_divergence: support mismatch (" + std::to_string(p.size()) + " vs " +
                std::to_string(q.size()) + ")");
  }
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] > 0.0 && q[v] == 0.0) {
      throw Error("kl_divergence: infinite divergence, reference has zero mass at index " +
                  std::to_string(v));
    }
  }
  const double d = simd::active().kl_sum(p.probs().data(), q.probs().data(), p.size());
  // Rounding can leave a tiny negative value for near-identical inputs.
  return d > 0.0 ? d : 0.0;
}

double total_variation(const Categorical& p, const Categorical& q) {
  if (p.size() != q.size()) throw Error("total_variation: support mismatch");
  double acc = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) acc += std::abs(p[v] - q[v]);
  return 0.5 * acc;
}

Categorical empirical_value_distribution(std::span<const ItemIndex> session,
                                         std::size_t k, const Catalog& catalog) {
  if (session.empty()) throw Error("empirical_value_distribution: empty session");
  std::vector<double> counts(catalog.schema()[k].values.size(), 0.0);
  for (ItemIndex i : session) counts[catalog.value(i, k)] += 1.0;
  const double m = static_cast<double>(session.size());
  for (double& c : counts) c /= m;
  return Categorical::from_probs(std::move(counts));
}

Categorical empirical_value_distribution(const Session& session, std::string_view key,
                                         const Catalog& catalog) {
  const std::size_t k = catalog.schema().require(key);
  return empirical_value_distribution(resolve_items(catalog, session), k, catalog);
}

double smoothing_weight(double alpha, std::size_t m) {
  return std::exp(-alpha * static_cast<double>(m));
}

Categorical smoothed_session_estimate(std::span<const ItemIndex> session,
                                      std::size_t k, double alpha,
                                      const GlobalModel& global, const Catalog& catalog) {
  if (session.empty()) throw Error("smoothed_session_estimate: empty session");
  if (!(alpha >= 0.0)) throw Error("smoothed_session_estimate: negative alpha");
  const Categorical f = empirical_value_distribution(session, k, catalog);
  const Categorical& g = global.value_dist(k);
  const double lambda = smoothing_weight(alpha, session.size());
  std::vector<double> out(f.size());
  simd::active().blend(out.data(), f.probs().data(), g.probs().data(), lambda, f.size());
  return Categorical::from_probs(std::move(out));
}

Categorical smoothed_session_estimate(const Session& session, std::string_view key,
                                      double alpha, const GlobalModel& global,
                                      const Catalog& catalog) {
  const std::size_t k = catalog.schema().require(key);
  return smoothed_session_estimate(resolve_items(catalog, session), k, alpha, global, catalog);
}

}  // namespace kli
