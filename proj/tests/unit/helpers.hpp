#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "kli/catalog.hpp"

namespace kli::test {

// Term-by-term KL with std::log; independent of the dispatched kernels.
inline double brute_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double acc = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) {
    if (p[v] > 0.0) acc += p[v] * std::log(p[v] / q[v]);
  }
  return acc;
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n, bool allow_zeros) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = u(rng);
    if (allow_zeros && u(rng) < 0.2) x = 0.0;
    total += x;
  }
  if (total == 0.0) {
    w[0] = 1.0;
    total = 1.0;
  }
  for (auto& x : w) x /= total;
  return w;
}

// Catalog whose items are given as rows of value indices.
inline Catalog make_catalog(std::vector<Property> props,
                            const std::vector<std::vector<ValueIndex>>& rows,
                            const std::string& prefix = "i") {
  std::vector<std::string> ids;
  std::vector<std::vector<ValueIndex>> columns(props.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ids.push_back(prefix + std::to_string(i));
    for (std::size_t k = 0; k < props.size(); ++k) columns[k].push_back(rows[i][k]);
  }
  return Catalog(PropertySchema(std::move(props)), std::move(ids), std::move(columns));
}

inline Property numbered_property(const std::string& key, std::size_t n) {
  Property p{key, {}};
  for (std::size_t v = 0; v < n; ++v) p.values.push_back(key + std::to_string(v));
  return p;
}

}  // namespace kli::test
