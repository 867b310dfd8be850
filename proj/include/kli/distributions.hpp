#pragma once

#include <span>

#include "kli/catalog.hpp"
#include "kli/categorical.hpp"
#include "kli/events.hpp"

namespace kli {

// f^s_k: frequency of each value of property k among the session's items.
Categorical empirical_value_distribution(std::span<const ItemIndex> session,
                                         std::size_t k, const Catalog& catalog);
Categorical empirical_value_distribution(const Session& session, std::string_view key,
                                         const Catalog& catalog);

// Weight given to G_k when smoothing a session of length m.
double smoothing_weight(double alpha, std::size_t m);

// Psi-hat^s_k = (1 - lambda) f^s_k + lambda G_k, lambda = exp(-alpha * m).
Categorical smoothed_session_estimate(std::span<const ItemIndex> session,
                                      std::size_t k, double alpha,
                                      const GlobalModel& global, const Catalog& catalog);
Categorical smoothed_session_estimate(const Session& session, std::string_view key,
                                      double alpha, const GlobalModel& global,
                                      const Catalog& catalog);

}  // namespace kli
