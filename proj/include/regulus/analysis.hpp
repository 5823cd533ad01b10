#pragma once

// An analysis: one dataset, its original tree, any number of derived trees
// (each with its own measure store chained to its source), projection
// presets and the current reference node. Saved as a single versioned JSON
// document; see docs/analysis-format.md.

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regulus/dataset.hpp"
#include "regulus/fitness.hpp"
#include "regulus/measures.hpp"
#include "regulus/projection.hpp"
#include "regulus/tree.hpp"

namespace regulus {

inline constexpr int kAnalysisFormatVersion = 1;
inline constexpr const char* kOriginalHandle = "orig";

struct AnalysisSettings {
  std::size_t k = kDefaultNeighbors;
  FitSpec fit{FitKind::ridge, kDefaultRidgeLambda};
  CurveParams curve;
  std::vector<std::string> measures{"fitness", "parent_fitness", "child_fitness",
                                    "child_dim_fitness"};
};

inline json to_json(const AnalysisSettings& s) {
  return {{"k", s.k}, {"fit", to_json(s.fit)}, {"curve", to_json(s.curve)}, {"measures", s.measures}};
}

inline AnalysisSettings settings_from_json(const json& j) {
  AnalysisSettings s;
  s.k = j.at("k").get<std::size_t>();
  s.fit = fit_spec_from_json(j.at("fit"));
  s.curve = curve_params_from_json(j.at("curve"));
  s.measures = j.at("measures").get<std::vector<std::string>>();
  return s;
}

inline json to_json(const ReduceRule& r) {
  json j = json::object();
  if (r.min_points) j["minPoints"] = *r.min_points;
  if (r.min_lifespan) j["minLifespan"] = *r.min_lifespan;
  if (r.value_range) j["valueRange"] = {r.value_range->first, r.value_range->second};
  return j;
}

inline ReduceRule reduce_rule_from_json(const json& j) {
  if (!j.is_object()) throw Error("reduction rule must be an object");
  ReduceRule r;
  for (const auto& [key, v] : j.items()) {
    if (key == "minPoints") {
      if (!v.is_number_unsigned()) throw Error("minPoints must be a non-negative integer");
      r.min_points = v.get<std::size_t>();
    } else if (key == "minLifespan") {
      if (!v.is_number()) throw Error("minLifespan must be a number");
      r.min_lifespan = v.get<double>();
    } else if (key == "valueRange") {
      if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        throw Error("valueRange must be [low, high]");
      r.value_range = {{v[0].get<double>(), v[1].get<double>()}};
    } else {
      throw Error("unknown reduction rule '" + key + "'");
    }
  }
  return r;
}

// ------------------------------------------------------------ tree JSON

inline json to_json(const RegulusTree& t) {
  json nodes = json::array();
  for (NodeId id : t.nodes()) {
    const auto& rec = t.partition(id);
    const NodeId parent = t.parent(id);
    nodes.push_back({{"id", id},
                     {"parent", parent == kNoNode ? json(nullptr) : json(parent)},
                     {"persistence", rec.persistence},
                     {"range", {rec.range.lo, rec.range.hi}},
                     {"minExt", rec.min_ext},
                     {"maxExt", rec.max_ext},
                     {"extraCriticalCount", rec.extra_criticals.size()},
                     {"exactCount", t.exact_point_count(id)}});
  }
  return {{"root", t.root()}, {"pointCount", t.point_count()}, {"nodes", std::move(nodes)}};
}

inline json to_json(const std::vector<LayoutRect>& rects) {
  json out = json::array();
  for (const auto& r : rects)
    out.push_back({{"node", r.node}, {"x", r.x}, {"width", r.width}, {"y", r.y}, {"height", r.height}});
  return out;
}

inline json to_json(const Dataset& ds) {
  auto rows = [](const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(std::move(row));
    }
    return out;
  };
  return {{"dimNames", ds.dim_names},
          {"outputNames", ds.output_names},
          {"activeOutput", ds.active_output},
          {"rawMeans", ds.raw_means},
          {"rawScales", ds.raw_scales},
          {"inputs", rows(ds.inputs)},
          {"outputs", rows(ds.outputs)}};
}

inline Dataset dataset_from_json(const json& j) {
  Dataset ds;
  ds.dim_names = j.at("dimNames").get<std::vector<std::string>>();
  ds.output_names = j.at("outputNames").get<std::vector<std::string>>();
  ds.active_output = j.at("activeOutput").get<std::size_t>();
  ds.raw_means = j.at("rawMeans").get<std::vector<double>>();
  ds.raw_scales = j.at("rawScales").get<std::vector<double>>();
  auto matrix = [](const json& rows, std::size_t cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != cols) throw Error("dataset row " + std::to_string(r) + " has the wrong width");
      for (std::size_t c = 0; c < cols; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
    return m;
  };
  ds.inputs = matrix(j.at("inputs"), ds.dim_names.size());
  ds.outputs = matrix(j.at("outputs"), ds.output_names.size());
  if (ds.inputs.rows() != ds.outputs.rows()) throw Error("dataset input and output row counts differ");
  if (ds.active_output >= ds.output_names.size()) throw Error("active output out of range");
  if (ds.raw_means.size() != ds.d() + ds.output_count() || ds.raw_scales.size() != ds.raw_means.size())
    throw Error("dataset statistics have the wrong length");
  return ds;
}

/// Content hash of a dataset (FNV-1a over its canonical JSON).
inline std::string dataset_hash(const Dataset& ds) { return detail::hex64(detail::fnv1a(to_json(ds).dump())); }

// --------------------------------------------------------------- bundle

class AnalysisBundle {
 public:
  struct TreeEntry {
    std::string handle;
    std::string source;  // handle of the tree this one was derived from
    json rule;           // reduction rule that produced it (null for the original)
    std::shared_ptr<const RegulusTree> tree;
    std::shared_ptr<AttributeStore> store;
  };

  AnalysisBundle(std::shared_ptr<const Dataset> data, std::shared_ptr<const RegulusTree> tree,
                 AnalysisSettings settings = {})
      : data_(std::move(data)), settings_(std::move(settings)) {
    if (!data_ || !tree) throw Error("analysis needs a dataset and a tree");
    if (tree->point_count() != data_->n()) throw Error("tree and dataset sizes differ");
    hash_ = dataset_hash(*data_);
    auto store = std::make_shared<AttributeStore>(tree, data_);
    register_builtin_measures(*store, settings_.fit);
    store->set_parameter("inverse_curve", to_json(settings_.curve));
    trees_.emplace(kOriginalHandle, TreeEntry{kOriginalHandle, "", nullptr, std::move(tree), std::move(store)});
    order_.push_back(kOriginalHandle);
  }

  [[nodiscard]] const Dataset& dataset() const { return *data_; }
  [[nodiscard]] const std::shared_ptr<const Dataset>& shared_dataset() const { return data_; }
  [[nodiscard]] const std::string& hash() const { return hash_; }
  [[nodiscard]] const AnalysisSettings& settings() const { return settings_; }

  [[nodiscard]] const std::vector<std::string>& handles() const { return order_; }
  [[nodiscard]] bool has_tree(const std::string& handle) const { return trees_.count(handle) > 0; }

  [[nodiscard]] const TreeEntry& entry(const std::string& handle) const {
    auto it = trees_.find(handle);
    if (it == trees_.end()) throw Error("unknown tree handle '" + handle + "'");
    return it->second;
  }
  [[nodiscard]] const RegulusTree& tree(const std::string& handle = kOriginalHandle) const {
    return *entry(handle).tree;
  }
  [[nodiscard]] AttributeStore& store(const std::string& handle = kOriginalHandle) const {
    return *entry(handle).store;
  }

  /// Registers the reduction of `from` by `rule` under a fresh handle.
  std::string reduce(const std::string& from, const ReduceRule& rule) {
    const auto& src = entry(from);
    auto tree = std::make_shared<const RegulusTree>(reduce_tree(src.tree, rule, *data_));
    const std::string handle = "d" + std::to_string(next_derived_++);
    add_derived(handle, from, to_json(rule), std::move(tree));
    return handle;
  }

  /// Reference model for reference_fitness, taken from `node` of the
  /// original tree; applies to every tree.
  void set_reference(std::optional<NodeId> node) {
    if (node) {
      const json model = to_json(store().get<LinearModel>("model", *node));
      for (auto& [h, e] : trees_) e.store->set_parameter("reference_fitness", model);
    } else {
      for (auto& [h, e] : trees_) e.store->clear_parameter("reference_fitness");
    }
    reference_ = node;
  }
  [[nodiscard]] std::optional<NodeId> reference() const { return reference_; }

  [[nodiscard]] const std::map<std::string, ProjectionSpec>& presets() const { return presets_; }
  void set_preset(const std::string& name, ProjectionSpec spec) {
    if (name.empty()) throw Error("preset name must not be empty");
    if (spec.dims() != data_->d())
      throw Error("preset has " + std::to_string(spec.dims()) + " axes but the data has " +
                  std::to_string(data_->d()) + " dimensions");
    presets_.insert_or_assign(name, std::move(spec));
  }

  /// Evaluates each named measure on every node of a tree.
  void evaluate(const std::string& handle, const std::vector<std::string>& measures) {
    auto& s = store(handle);
    for (const auto& m : measures) {
      if (!s.has_measure(m)) throw Error("unknown measure '" + m + "'");
      if (s.scope(m) == MeasureScope::pair)
        throw Error("measure '" + m + "' takes two nodes and cannot be evaluated per node");
      for (NodeId id : tree(handle).nodes()) s.value(m, id);
    }
  }

  // ------------------------------------------------------ persistence

  [[nodiscard]] json to_document() const {
    json doc;
    doc["format"] = "regulus-analysis";
    doc["version"] = kAnalysisFormatVersion;
    doc["dataset"] = {{"hash", hash_}, {"data", to_json(*data_)}};
    doc["settings"] = to_json(settings_);

    const auto& parts = tree().partitions();
    json records = json::array();
    for (const auto& r : parts.records)
      records.push_back({{"id", r.id},
                         {"persistence", r.persistence},
                         {"range", {r.range.lo, r.range.hi}},
                         {"minExt", r.min_ext},
                         {"maxExt", r.max_ext},
                         {"extraCriticals", r.extra_criticals}});
    doc["partitions"] = {{"permutation", parts.permutation}, {"records", std::move(records)}};

    json trees = json::array();
    for (const auto& handle : order_) {
      const auto& e = trees_.at(handle);
      json parents = json::array();
      for (NodeId id : e.tree->nodes()) parents.push_back({id, e.tree->parent(id)});
      json params = json::object();
      for (const auto& [name, value] : e.store->parameters()) params[name] = value;
      trees.push_back({{"handle", handle},
                       {"source", e.source.empty() ? json(nullptr) : json(e.source)},
                       {"rule", e.rule},
                       {"nodes", std::move(parents)},
                       {"parameters", std::move(params)},
                       {"cache", e.store->save_cache()}});
    }
    doc["trees"] = std::move(trees);
    doc["nextDerived"] = next_derived_;

    json presets = json::object();
    for (const auto& [name, spec] : presets_) presets[name] = to_json(spec);
    doc["presets"] = std::move(presets);
    doc["reference"] = reference_ ? json(*reference_) : json(nullptr);
    return doc;
  }

  [[nodiscard]] std::string save() const { return to_document().dump() + "\n"; }

  /// Rebuilds a bundle. `extra_measures` registers user measures on each
  /// store before its cache is restored.
  static AnalysisBundle from_document(const json& doc,
                                      const std::function<void(AttributeStore&)>& extra_measures = {}) {
    if (doc.value("format", std::string()) != "regulus-analysis")
      throw Error("not an analysis file");
    if (!doc.contains("version") || doc.at("version") != kAnalysisFormatVersion)
      throw Error("unsupported analysis version " +
                  (doc.contains("version") ? doc.at("version").dump() : std::string("(missing)")) +
                  ", expected " + std::to_string(kAnalysisFormatVersion));
    auto data = std::make_shared<const Dataset>(dataset_from_json(doc.at("dataset").at("data")));
    const auto stored_hash = doc.at("dataset").at("hash").get<std::string>();
    if (dataset_hash(*data) != stored_hash)
      throw Error("integrity error: dataset hash " + stored_hash + " does not match its content");
    const auto settings = settings_from_json(doc.at("settings"));

    auto parts = std::make_shared<PartitionCollection>();
    const auto& pj = doc.at("partitions");
    parts->permutation = pj.at("permutation").get<std::vector<PointId>>();
    const std::size_t n = parts->permutation.size();
    if (n != data->n()) throw Error("permutation length does not match the dataset");
    parts->position.assign(n, n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      const auto p = parts->permutation[pos];
      if (p >= n || parts->position[p] != n) throw Error("permutation is not a bijection");
      parts->position[p] = pos;
    }
    for (const auto& r : pj.at("records")) {
      PartitionRecord rec;
      rec.id = r.at("id").get<NodeId>();
      if (rec.id != static_cast<NodeId>(parts->records.size())) throw Error("partition ids are not sequential");
      rec.persistence = r.at("persistence").get<double>();
      rec.range = {r.at("range").at(0).get<std::size_t>(), r.at("range").at(1).get<std::size_t>()};
      if (rec.range.lo >= rec.range.hi || rec.range.hi > n) throw Error("partition range out of bounds");
      rec.min_ext = r.at("minExt").get<PointId>();
      rec.max_ext = r.at("maxExt").get<PointId>();
      rec.extra_criticals = r.at("extraCriticals").get<std::vector<PointId>>();
      parts->records.push_back(std::move(rec));
    }
    std::shared_ptr<const PartitionCollection> shared = std::move(parts);

    auto wiring = [&](const json& t, std::shared_ptr<const RegulusTree> source) {
      const std::size_t count = shared->records.size();
      std::vector<NodeId> parents(count, kNoNode);
      std::vector<char> present(count, 0);
      for (const auto& pair : t.at("nodes")) {
        const auto id = pair.at(0).get<NodeId>();
        if (id < 0 || static_cast<std::size_t>(id) >= count) throw Error("tree refers to unknown node");
        present[static_cast<std::size_t>(id)] = 1;
        parents[static_cast<std::size_t>(id)] = pair.at(1).get<NodeId>();
      }
      return std::make_shared<const RegulusTree>(
          RegulusTree::from_wiring(shared, parents, present, std::move(source)));
    };

    const auto& trees = doc.at("trees");
    if (trees.empty() || trees.at(0).at("handle") != kOriginalHandle)
      throw Error("analysis has no original tree");
    AnalysisBundle bundle(data, wiring(trees.at(0), nullptr), settings);
    for (std::size_t i = 1; i < trees.size(); ++i) {
      const auto& t = trees.at(i);
      const auto source = t.at("source").get<std::string>();
      bundle.add_derived(t.at("handle").get<std::string>(), source, t.at("rule"),
                         wiring(t, bundle.entry(source).tree));
    }
    for (const auto& t : trees) {
      auto& store = bundle.store(t.at("handle").get<std::string>());
      if (extra_measures) extra_measures(store);
      for (const auto& [name, value] : t.at("parameters").items()) store.set_parameter(name, value);
      store.load_cache(t.at("cache"));
    }
    bundle.next_derived_ = doc.at("nextDerived").get<int>();
    for (const auto& [name, spec] : doc.at("presets").items())
      bundle.set_preset(name, projection_from_json(spec));
    if (!doc.at("reference").is_null()) bundle.reference_ = doc.at("reference").get<NodeId>();
    return bundle;
  }

  static AnalysisBundle load(std::string_view text,
                             const std::function<void(AttributeStore&)>& extra_measures = {}) {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(std::string("malformed analysis file: ") + e.what());
    }
    return from_document(doc, extra_measures);
  }

 private:
  void add_derived(const std::string& handle, const std::string& source, json rule,
                   std::shared_ptr<const RegulusTree> tree) {
    if (trees_.count(handle)) throw Error("duplicate tree handle '" + handle + "'");
    auto store = std::make_shared<AttributeStore>(tree, data_, entry(source).store);
    trees_.emplace(handle, TreeEntry{handle, source, std::move(rule), std::move(tree), std::move(store)});
    order_.push_back(handle);
  }

  std::shared_ptr<const Dataset> data_;
  std::string hash_;
  AnalysisSettings settings_;
  std::map<std::string, TreeEntry> trees_;
  std::vector<std::string> order_;
  int next_derived_ = 1;
  std::map<std::string, ProjectionSpec> presets_;
  std::optional<NodeId> reference_;
};

/// Decomposes a standardized dataset and evaluates the configured measures
/// on every node of the original tree.
inline AnalysisBundle analyze(std::shared_ptr<const Dataset> data, AnalysisSettings settings = {}) {
  if (settings.k == 0) throw Error("neighbor count k must be positive");
  auto dec = decompose(*data, settings.k);
  AnalysisBundle bundle(std::move(data), dec.tree, settings);
  bundle.evaluate(kOriginalHandle, settings.measures);
  return bundle;
}

}  // namespace regulus
