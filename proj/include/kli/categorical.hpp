#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace kli {

// Probability distribution over a finite, densely indexed support.
class Categorical {
 public:
  // Validates: non-empty, every entry >= 0, sum = 1 within 1e-9.
  static Categorical from_probs(std::vector<double> probs);
  // Normalizes non-negative weights with positive total.
  static Categorical from_weights(std::vector<double> weights);
  static Categorical uniform(std::size_t support_size);
  static Categorical point_mass(std::size_t support_size, std::size_t index);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t v) const { return probs_[v]; }
  std::span<const double> probs() const { return probs_; }

  bool operator==(const Categorical&) const = default;

 private:
  explicit Categorical(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

// KL(p || q) in nats. Terms with p(v) = 0 contribute 0; throws kli::Error on
// support mismatch or when q(v) = 0 while p(v) > 0. Never negative.
double kl_divergence(const Categorical& p, const Categorical& q);

// Total variation distance, 0.5 * sum |p - q|.
double total_variation(const Categorical& p, const Categorical& q);

}  // namespace kli
