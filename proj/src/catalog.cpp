#include "kli/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "kli/error.hpp"

namespace kli {

using ordered_json = nlohmann::ordered_json;

PropertySchema::PropertySchema(std::vector<Property> properties)
    : properties_(std::move(properties)) {
  value_index_.resize(properties_.size());
  offsets_.reserve(properties_.size() + 1);
  offsets_.push_back(0);
  for (std::size_t k = 0; k < properties_.size(); ++k) {
    const Property& p = properties_[k];
    if (!key_index_.emplace(p.key, k).second) {
      throw Error("schema: duplicate property key '" + p.key + "'");
    }
    if (p.values.empty()) throw Error("schema: property '" + p.key + "' has no values");
    for (std::size_t v = 0; v < p.values.size(); ++v) {
      if (!value_index_[k].emplace(p.values[v], static_cast<ValueIndex>(v)).second) {
        throw Error("schema: duplicate value '" + p.values[v] + "' in property '" + p.key + "'");
      }
    }
    offsets_.push_back(offsets_.back() + p.values.size());
  }
}

std::optional<std::size_t> PropertySchema::find(std::string_view key) const {
  auto it = key_index_.find(std::string(key));
  if (it == key_index_.end()) return std::nullopt;
  return it->second;
}

std::size_t PropertySchema::require(std::string_view key) const {
  if (auto k = find(key)) return *k;
  throw Error("unknown property key '" + std::string(key) + "'");
}

std::optional<ValueIndex> PropertySchema::find_value(std::size_t k, std::string_view label) const {
  auto it = value_index_[k].find(std::string(label));
  if (it == value_index_[k].end()) return std::nullopt;
  return it->second;
}

Catalog::Catalog(PropertySchema schema, std::vector<std::string> item_ids,
                 std::vector<std::vector<ValueIndex>> values)
    : schema_(std::move(schema)), ids_(std::move(item_ids)), columns_(std::move(values)) {
  if (columns_.size() != schema_.size()) throw Error("catalog: value columns do not match schema");
  const std::size_t n = ids_.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!id_index_.emplace(ids_[i], static_cast<ItemIndex>(i)).second) {
      throw Error("catalog: duplicate item_id '" + ids_[i] + "'");
    }
  }
  for (std::size_t k = 0; k < schema_.size(); ++k) {
    if (columns_[k].size() != n) throw Error("catalog: column size mismatch for '" + schema_[k].key + "'");
    for (std::size_t i = 0; i < n; ++i) {
      if (columns_[k][i] >= schema_[k].values.size()) {
        throw Error("catalog: item '" + ids_[i] + "' has out-of-range value for '" + schema_[k].key + "'");
      }
    }
  }

  const std::size_t dim = schema_.feature_dim();
  features_.assign(n * dim, 0.0);
  norms_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < schema_.size(); ++k) {
      features_[i * dim + schema_.feature_offset(k) + columns_[k][i]] = 1.0;
    }
    norms_[i] = std::sqrt(static_cast<double>(schema_.size()));
  }

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids_[a] < ids_[b]; });
  id_rank_.resize(n);
  for (std::uint32_t r = 0; r < n; ++r) id_rank_[order[r]] = r;
}

std::optional<ItemIndex> Catalog::find(std::string_view item_id) const {
  auto it = id_index_.find(std::string(item_id));
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

ItemIndex Catalog::require(std::string_view item_id) const {
  if (auto i = find(item_id)) return *i;
  throw Error("unknown item_id '" + std::string(item_id) + "'");
}

namespace {

std::string item_context(std::size_t position, const std::string& id) {
  return "item #" + std::to_string(position) + (id.empty() ? "" : " (id '" + id + "')");
}

}  // namespace

Catalog parse_catalog(std::string_view json_text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(std::string("catalog: malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("properties") || !doc.contains("items")) {
    throw Error("catalog: expected an object with 'properties' and 'items'");
  }
  const auto& props = doc.at("properties");
  const auto& items = doc.at("items");
  if (!props.is_object()) throw Error("catalog: 'properties' must be an object");
  if (!items.is_array()) throw Error("catalog: 'items' must be an array");

  std::vector<Property> properties;
  for (const auto& [key, labels] : props.items()) {
    if (!labels.is_array()) throw Error("catalog: values of property '" + key + "' must be an array");
    Property p{key, {}};
    for (const auto& label : labels) {
      if (!label.is_string()) throw Error("catalog: value labels of '" + key + "' must be strings");
      p.values.push_back(label.get<std::string>());
    }
    properties.push_back(std::move(p));
  }
  PropertySchema schema(std::move(properties));

  std::vector<std::string> ids;
  std::vector<std::vector<ValueIndex>> columns(schema.size());
  ids.reserve(items.size());
  for (auto& c : columns) c.reserve(items.size());
  std::size_t position = 0;
  for (const auto& item : items) {
    std::string id;
    if (item.is_object() && item.contains("id") && item.at("id").is_string()) {
      id = item.at("id").get<std::string>();
    } else {
      throw Error("catalog: " + item_context(position, id) + ": missing string 'id'");
    }
    if (!item.contains("props") || !item.at("props").is_object()) {
      throw Error("catalog: " + item_context(position, id) + ": missing 'props' object");
    }
    const auto& item_props = item.at("props");
    for (const auto& [key, label] : item_props.items()) {
      if (!schema.find(key)) {
        throw Error("catalog: " + item_context(position, id) + ": unknown property '" + key + "'");
      }
    }
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const std::string& key = schema[k].key;
      if (!item_props.contains(key)) {
        throw Error("catalog: " + item_context(position, id) + ": missing property '" + key + "'");
      }
      const auto& label = item_props.at(key);
      if (!label.is_string()) {
        throw Error("catalog: " + item_context(position, id) + ": value of '" + key + "' must be a string");
      }
      auto v = schema.find_value(k, label.get<std::string>());
      if (!v) {
        throw Error("catalog: " + item_context(position, id) + ": unknown value '" +
                    label.get<std::string>() + "' for property '" + key + "'");
      }
      columns[k].push_back(*v);
    }
    ids.push_back(std::move(id));
    ++position;
  }
  return Catalog(std::move(schema), std::move(ids), std::move(columns));
}

Catalog load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open catalog file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_catalog(buf.str());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string dump_catalog(const Catalog& catalog) {
  const PropertySchema& schema = catalog.schema();
  ordered_json doc;
  ordered_json props = ordered_json::object();
  for (const Property& p : schema.properties()) props[p.key] = p.values;
  doc["properties"] = std::move(props);
  ordered_json items = ordered_json::array();
  for (ItemIndex i = 0; i < catalog.item_count(); ++i) {
    ordered_json item_props = ordered_json::object();
    for (std::size_t k = 0; k < schema.size(); ++k) {
      item_props[schema[k].key] = schema[k].values[catalog.value(i, k)];
    }
    items.push_back({{"id", catalog.id(i)}, {"props", std::move(item_props)}});
  }
  doc["items"] = std::move(items);
  return doc.dump(1) + "\n";
}

void save_catalog(const Catalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write catalog file '" + path.string() + "'");
  out << dump_catalog(catalog);
}

ValueIndex property_value(const Catalog& catalog, std::string_view item_id,
                          std::string_view key) {
  const ItemIndex i = catalog.require(item_id);
  return catalog.value(i, catalog.schema().require(key));
}

std::vector<ItemIndex> resolve_items(const Catalog& catalog, const Session& session) {
  std::vector<ItemIndex> out;
  out.reserve(session.items.size());
  for (const auto& id : session.items) out.push_back(catalog.require(id));
  return out;
}

GlobalModel global_model_from_items(const Catalog& catalog, Categorical item_dist,
                                    double smoothing_epsilon) {
  if (catalog.item_count() == 0) throw Error("fit_global_model: empty catalog");
  if (!(smoothing_epsilon >= 0.0 && smoothing_epsilon < 1.0)) {
    throw Error("fit_global_model: smoothing_epsilon must be in [0, 1)");
  }
  if (item_dist.size() != catalog.item_count()) {
    throw Error("fit_global_model: item distribution does not match catalog size");
  }
  const PropertySchema& schema = catalog.schema();
  GlobalModel model;
  model.value_dists.reserve(schema.size());
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const std::size_t card = schema[k].values.size();
    std::vector<double> mass(card, 0.0);
    for (ItemIndex i = 0; i < catalog.item_count(); ++i) mass[catalog.value(i, k)] += item_dist[i];
    const double uniform = 1.0 / static_cast<double>(card);
    if (smoothing_epsilon > 0.0) {
      for (double& g : mass) g = (1.0 - smoothing_epsilon) * g + smoothing_epsilon * uniform;
    }
    model.value_dists.push_back(Categorical::from_weights(std::move(mass)));
  }
  model.item_dist = std::move(item_dist);
  return model;
}

GlobalModel fit_global_model(const Catalog& catalog,
                             std::optional<std::span<const Event>> events,
                             double smoothing_epsilon) {
  if (catalog.item_count() == 0) throw Error("fit_global_model: empty catalog");
  if (!events) {
    return global_model_from_items(catalog, Categorical::uniform(catalog.item_count()),
                                   smoothing_epsilon);
  }
  std::vector<double> counts(catalog.item_count(), 1.0);
  std::size_t skipped = 0;
  for (const Event& e : *events) {
    if (auto i = catalog.find(e.item_id)) {
      counts[*i] += 1.0;
    } else {
      ++skipped;
    }
  }
  GlobalModel model =
      global_model_from_items(catalog, Categorical::from_weights(std::move(counts)), smoothing_epsilon);
  model.skipped_events = skipped;
  return model;
}

}  // namespace kli
