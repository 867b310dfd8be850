#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kli/categorical.hpp"
#include "kli/events.hpp"

namespace kli {

using PropertyKey = std::string;
using ValueIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

struct Property {
  PropertyKey key;
  std::vector<std::string> values;

  bool operator==(const Property&) const = default;
};

// Ordered property keys, each with a finite ordered value space. Value labels
// map to dense indices 0..|V_k|-1 in declaration order.
class PropertySchema {
 public:
  PropertySchema() = default;
  explicit PropertySchema(std::vector<Property> properties);

  std::size_t size() const { return properties_.size(); }
  const Property& operator[](std::size_t k) const { return properties_[k]; }
  std::span<const Property> properties() const { return properties_; }

  std::optional<std::size_t> find(std::string_view key) const;
  std::size_t require(std::string_view key) const;
  std::optional<ValueIndex> find_value(std::size_t k, std::string_view label) const;

  // Offset of property k's block inside the concatenated one-hot vector.
  std::size_t feature_offset(std::size_t k) const { return offsets_[k]; }
  std::size_t feature_dim() const { return offsets_.empty() ? 0 : offsets_.back(); }

  bool operator==(const PropertySchema& o) const { return properties_ == o.properties_; }

 private:
  std::vector<Property> properties_;
  std::unordered_map<std::string, std::size_t> key_index_;
  std::vector<std::unordered_map<std::string, ValueIndex>> value_index_;
  std::vector<std::size_t> offsets_;  // size() + 1 entries
};

// The item universe. f(i, k) is total: every item carries a value for every
// property. Items keep load order.
class Catalog {
 public:
  Catalog() = default;
  // values[k][i] is the value index of item i for property k.
  Catalog(PropertySchema schema, std::vector<std::string> item_ids,
          std::vector<std::vector<ValueIndex>> values);

  const PropertySchema& schema() const { return schema_; }
  std::size_t item_count() const { return ids_.size(); }
  const std::string& id(ItemIndex i) const { return ids_[i]; }
  std::span<const std::string> ids() const { return ids_; }

  std::optional<ItemIndex> find(std::string_view item_id) const;
  ItemIndex require(std::string_view item_id) const;

  ValueIndex value(ItemIndex i, std::size_t k) const { return columns_[k][i]; }
  std::span<const ValueIndex> column(std::size_t k) const { return columns_[k]; }

  // Concatenated one-hot encoding of the item's property values.
  std::span<const double> features(ItemIndex i) const {
    return {features_.data() + std::size_t{i} * schema_.feature_dim(), schema_.feature_dim()};
  }
  double feature_norm(ItemIndex i) const { return norms_[i]; }

  // Position of the item in ascending item_id order (tie-breaking key).
  std::uint32_t id_rank(ItemIndex i) const { return id_rank_[i]; }

  bool operator==(const Catalog& o) const {
    return schema_ == o.schema_ && ids_ == o.ids_ && columns_ == o.columns_;
  }

 private:
  PropertySchema schema_;
  std::vector<std::string> ids_;
  std::vector<std::vector<ValueIndex>> columns_;
  std::unordered_map<std::string, ItemIndex> id_index_;
  std::vector<double> features_;
  std::vector<double> norms_;
  std::vector<std::uint32_t> id_rank_;
};

Catalog parse_catalog(std::string_view json_text);
Catalog load_catalog(const std::filesystem::path& path);
std::string dump_catalog(const Catalog& catalog);
void save_catalog(const Catalog& catalog, const std::filesystem::path& path);

ValueIndex property_value(const Catalog& catalog, std::string_view item_id,
                          std::string_view key);

// Resolves session item ids to catalog indices; throws on unknown ids.
std::vector<ItemIndex> resolve_items(const Catalog& catalog, const Session& session);

inline constexpr double kDefaultSmoothingEpsilon = 1e-6;

// G over items and its smoothed pushforwards G_k over each property's values.
struct GlobalModel {
  Categorical item_dist = Categorical::uniform(1);
  std::vector<Categorical> value_dists;  // aligned with the schema
  std::size_t skipped_events = 0;        // events naming items not in the catalog

  const Categorical& value_dist(std::size_t k) const { return value_dists[k]; }

  bool operator==(const GlobalModel&) const = default;
};

// G(i) is proportional to (event count of i) + 1, or uniform without events.
// G_k = (1 - eps) * pushforward(G, f(., k)) + eps * uniform(V_k).
GlobalModel fit_global_model(const Catalog& catalog,
                             std::optional<std::span<const Event>> events = std::nullopt,
                             double smoothing_epsilon = kDefaultSmoothingEpsilon);

// Builds a GlobalModel from an explicit item distribution.
GlobalModel global_model_from_items(const Catalog& catalog, Categorical item_dist,
                                    double smoothing_epsilon = kDefaultSmoothingEpsilon);

}  // namespace kli
