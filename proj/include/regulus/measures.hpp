#pragma once

// Named, lazily evaluated attributes over the nodes of a tree.
//
// A store owns one cache per tree. Lookups go own cache -> chained store
// (the store of the tree this one was derived from) -> compute. Values are
// opaque (std::any); measures that should survive save/load provide an
// encoder and decoder.

#include <algorithm>
#include <any>
#include <atomic>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "regulus/dataset.hpp"
#include "regulus/error.hpp"
#include "regulus/json_util.hpp"
#include "regulus/tree.hpp"

namespace regulus {

/// How a measure is keyed.
enum class MeasureScope {
  node,         // one node; depends only on the partition's own data
  pair,         // two explicit nodes (a, b)
  parent_pair,  // queried per node, stored under (node, parent in this tree)
};

struct MeasureKey {
  NodeId first = kNoNode;
  NodeId second = kNoNode;

  [[nodiscard]] bool is_pair() const { return second != kNoNode; }
  friend auto operator<=>(const MeasureKey&, const MeasureKey&) = default;
};

class AttributeStore;

/// Read access handed to a measure's compute function.
class MeasureContext {
 public:
  MeasureContext(AttributeStore& store, const json* parameter)
      : store_(store), parameter_(parameter) {}

  [[nodiscard]] const RegulusTree& tree() const;
  [[nodiscard]] const Dataset& dataset() const;
  [[nodiscard]] AttributeStore& store() const { return store_; }
  /// Parameter of a parameterized measure, or nullptr.
  [[nodiscard]] const json* parameter() const { return parameter_; }

  template <class T>
  T get(std::string_view measure, NodeId node, NodeId node2 = kNoNode) const;

 private:
  AttributeStore& store_;
  const json* parameter_;
};

struct MeasureDef {
  std::string name;
  MeasureScope scope = MeasureScope::node;
  std::vector<std::string> depends_on;
  bool parameterized = false;
  std::function<std::any(const MeasureContext&, MeasureKey)> compute;
  // Optional persistence hooks; measures without them are never saved.
  std::function<json(const std::any&)> encode;
  std::function<std::any(const json&)> decode;
};

/// Encoder/decoder pair for plain real-valued measures.
inline void make_scalar_codec(MeasureDef& def) {
  def.encode = [](const std::any& v) { return encode_real(std::any_cast<double>(v)); };
  def.decode = [](const json& j) { return std::any(decode_real(j)); };
}

inline constexpr int kCacheFormatVersion = 1;

class AttributeStore {
 public:
  AttributeStore(std::shared_ptr<const RegulusTree> tree, std::shared_ptr<const Dataset> data,
                 std::shared_ptr<AttributeStore> chain = nullptr)
      : tree_(std::move(tree)), data_(std::move(data)), chain_(std::move(chain)) {
    if (!tree_ || !data_) throw Error("attribute store needs a tree and a dataset");
    if (chain_) {
      std::shared_lock lock(chain_->mutex_);
      defs_ = chain_->defs_;
      params_ = chain_->params_;
    }
  }

  AttributeStore(const AttributeStore&) = delete;
  AttributeStore& operator=(const AttributeStore&) = delete;

  [[nodiscard]] const RegulusTree& tree() const { return *tree_; }
  [[nodiscard]] const std::shared_ptr<const RegulusTree>& shared_tree() const { return tree_; }
  [[nodiscard]] const Dataset& dataset() const { return *data_; }
  [[nodiscard]] const std::shared_ptr<AttributeStore>& chain() const { return chain_; }

  /// Adds a measure. Replacing an existing one requires `replace` and clears
  /// the cached values of that measure and of everything depending on it.
  void register_measure(MeasureDef def, bool replace = false) {
    if (def.name.empty()) throw Error("measure name must not be empty");
    if (!def.compute) throw Error("measure '" + def.name + "' has no compute function");
    std::unique_lock lock(mutex_);
    const bool exists = defs_.count(def.name) > 0;
    if (exists && !replace) throw Error("measure '" + def.name + "' is already registered");
    check_acyclic(def);
    std::set<std::string> stale;
    if (exists) stale = dependents_closure(def.name);
    Entry entry{std::move(def), next_revision()};
    const std::string name = entry.def.name;
    defs_.insert_or_assign(name, std::move(entry));
    for (const auto& s : stale) cache_.erase(s);
  }

  [[nodiscard]] bool has_measure(std::string_view name) const {
    std::shared_lock lock(mutex_);
    return defs_.count(std::string(name)) > 0;
  }

  [[nodiscard]] std::vector<std::string> measure_names() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> names;
    for (const auto& [name, e] : defs_) names.push_back(name);
    return names;
  }

  [[nodiscard]] MeasureScope scope(std::string_view name) const {
    std::shared_lock lock(mutex_);
    return lookup(name).def.scope;
  }

  /// Sets the parameter of a parameterized measure. A changed parameter
  /// invalidates the measure and its dependents.
  void set_parameter(std::string_view name, json value) {
    std::unique_lock lock(mutex_);
    const auto& e = lookup(name);
    if (!e.def.parameterized) throw Error("measure '" + std::string(name) + "' takes no parameter");
    auto it = params_.find(e.def.name);
    if (it != params_.end() && it->second == value) return;
    params_[e.def.name] = std::move(value);
    for (const auto& s : dependents_closure(e.def.name)) cache_.erase(s);
  }

  void clear_parameter(std::string_view name) {
    std::unique_lock lock(mutex_);
    const auto& e = lookup(name);
    if (params_.erase(e.def.name) > 0)
      for (const auto& s : dependents_closure(e.def.name)) cache_.erase(s);
  }

  [[nodiscard]] std::optional<json> parameter(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = params_.find(std::string(name));
    if (it == params_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::map<std::string, json> parameters() const {
    std::shared_lock lock(mutex_);
    return params_;
  }

  /// Get-or-compute. For parent_pair measures only `node` is given; the key
  /// is completed with the node's parent in this tree.
  std::any value(std::string_view name, NodeId node, NodeId node2 = kNoNode) {
    MeasureDef def;
    json param;
    bool has_param = false;
    std::uint64_t phash = 0;
    std::uint64_t signature = 0;
    {
      std::shared_lock lock(mutex_);
      const auto& e = lookup(name);
      def = e.def;
      if (auto it = params_.find(def.name); it != params_.end()) {
        param = it->second;
        has_param = true;
        phash = detail::fnv1a(param.dump());
      }
      signature = signature_locked(def.name);
    }
    const MeasureKey key = make_key(def, node, node2);
    const CacheKey ck{key, phash};

    {
      std::shared_lock lock(mutex_);
      if (auto hit = find_local(def.name, ck)) return *hit;
    }
    if (chain_ && chainable(def.name)) {
      if (auto hit = chain_->find_chained(def.name, ck, signature)) {
        std::unique_lock lock(mutex_);
        return cache_[def.name].try_emplace(ck, *hit).first->second;
      }
    }

    MeasureContext ctx(*this, has_param ? &param : nullptr);
    std::any result = def.compute(ctx, key);
    ++computes_;
    {
      std::unique_lock lock(mutex_);
      ++compute_by_name_[def.name];
      // A racing computation may have landed first; the first value wins.
      return cache_[def.name].try_emplace(ck, std::move(result)).first->second;
    }
  }

  template <class T>
  T get(std::string_view name, NodeId node, NodeId node2 = kNoNode) {
    std::any v = value(name, node, node2);
    if (const T* p = std::any_cast<T>(&v)) return *p;
    throw Error("measure '" + std::string(name) + "' holds a different value type");
  }

  /// Scalar measure over every node of the tree, in tree order.
  std::vector<std::pair<NodeId, double>> evaluate_all(std::string_view name) {
    std::vector<std::pair<NodeId, double>> out;
    out.reserve(tree_->node_count());
    for (NodeId id : tree_->nodes()) out.emplace_back(id, get<double>(name, id));
    return out;
  }

  [[nodiscard]] bool is_cached(std::string_view name, NodeId node, NodeId node2 = kNoNode) const {
    std::shared_lock lock(mutex_);
    const auto& e = lookup(name);
    std::uint64_t phash = 0;
    if (auto it = params_.find(e.def.name); it != params_.end())
      phash = detail::fnv1a(it->second.dump());
    return find_local(e.def.name, {make_key(e.def, node, node2), phash}).has_value();
  }

  /// Number of compute calls made by this store (not by chained stores).
  [[nodiscard]] std::size_t compute_count() const { return computes_.load(); }
  [[nodiscard]] std::size_t compute_count(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = compute_by_name_.find(std::string(name));
    return it == compute_by_name_.end() ? 0 : it->second;
  }

  [[nodiscard]] std::size_t cache_size(std::string_view name) const {
    std::shared_lock lock(mutex_);
    auto it = cache_.find(std::string(name));
    return it == cache_.end() ? 0 : it->second.size();
  }

  /// Cached keys of one measure, in key order.
  [[nodiscard]] std::vector<MeasureKey> cached_keys(std::string_view name) const {
    std::shared_lock lock(mutex_);
    std::vector<MeasureKey> keys;
    if (auto it = cache_.find(std::string(name)); it != cache_.end())
      for (const auto& [ck, v] : it->second) keys.push_back(ck.key);
    return keys;
  }

  void clear_cache() {
    std::unique_lock lock(mutex_);
    cache_.clear();
  }

  /// Versioned JSON snapshot of every persistable cached value.
  [[nodiscard]] json save_cache() const {
    std::shared_lock lock(mutex_);
    json out;
    out["version"] = kCacheFormatVersion;
    json names = json::array();
    for (const auto& [name, e] : defs_) names.push_back(name);
    out["measures"] = std::move(names);
    json entries = json::array();
    for (const auto& [name, values] : cache_) {
      const auto& e = defs_.at(name);
      if (!e.def.encode) continue;
      for (const auto& [ck, v] : values) {
        json key = ck.key.is_pair() ? json::array({ck.key.first, ck.key.second})
                                    : json(ck.key.first);
        entries.push_back({{"measure", name},
                           {"key", std::move(key)},
                           {"param_hash", detail::hex64(ck.param_hash)},
                           {"value", e.def.encode(v)}});
      }
    }
    out["entries"] = std::move(entries);
    return out;
  }

  /// Restores values written by save_cache. Every named measure must be
  /// registered; entries for a parameter other than the current one are
  /// skipped.
  void load_cache(const json& in) {
    if (!in.contains("version") || in.at("version") != kCacheFormatVersion)
      throw Error("unsupported measure cache version " +
                  (in.contains("version") ? in.at("version").dump() : std::string("(missing)")));
    std::unique_lock lock(mutex_);
    for (const auto& name : in.at("measures"))
      if (!defs_.count(name.get<std::string>()))
        throw Error("cache refers to unknown measure '" + name.get<std::string>() + "'");
    for (const auto& entry : in.at("entries")) {
      const auto name = entry.at("measure").get<std::string>();
      auto it = defs_.find(name);
      if (it == defs_.end()) throw Error("cache refers to unknown measure '" + name + "'");
      if (!it->second.def.decode) continue;
      std::uint64_t phash = 0;
      if (auto p = params_.find(name); p != params_.end()) phash = detail::fnv1a(p->second.dump());
      if (entry.at("param_hash").get<std::string>() != detail::hex64(phash)) continue;
      MeasureKey key;
      const auto& k = entry.at("key");
      if (k.is_array()) key = {k.at(0).get<NodeId>(), k.at(1).get<NodeId>()};
      else key = {k.get<NodeId>(), kNoNode};
      cache_[name].insert_or_assign(CacheKey{key, phash}, it->second.def.decode(entry.at("value")));
    }
  }

 private:
  struct Entry {
    MeasureDef def;
    std::uint64_t revision = 0;
  };
  struct CacheKey {
    MeasureKey key;
    std::uint64_t param_hash = 0;
    friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
  };

  static std::uint64_t next_revision() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
  }

  const Entry& lookup(std::string_view name) const {
    auto it = defs_.find(std::string(name));
    if (it == defs_.end()) throw Error("unknown measure '" + std::string(name) + "'");
    return it->second;
  }

  MeasureKey make_key(const MeasureDef& def, NodeId node, NodeId node2) const {
    if (!tree_->contains(node)) throw Error("unknown node " + std::to_string(node));
    switch (def.scope) {
      case MeasureScope::node:
        return {node, kNoNode};
      case MeasureScope::pair:
        if (node2 == kNoNode) node2 = node;
        if (!tree_->contains(node2)) throw Error("unknown node " + std::to_string(node2));
        return {node, node2};
      case MeasureScope::parent_pair:
        return {node, tree_->parent(node)};
    }
    return {node, kNoNode};
  }

  std::optional<std::any> find_local(const std::string& name, const CacheKey& ck) const {
    auto it = cache_.find(name);
    if (it == cache_.end()) return std::nullopt;
    auto v = it->second.find(ck);
    if (v == it->second.end()) return std::nullopt;
    return v->second;
  }

  // Looks through this store and its own chain, never computing. Values are
  // only shared when the definitions agree (same revision, parameters and
  // dependencies).
  std::optional<std::any> find_chained(const std::string& name, const CacheKey& ck,
                                       std::uint64_t signature) const {
    {
      std::shared_lock lock(mutex_);
      if (!defs_.count(name) || signature_locked(name) != signature) return std::nullopt;
      if (auto hit = find_local(name, ck)) return hit;
    }
    return chain_ ? chain_->find_chained(name, ck, signature) : std::nullopt;
  }

  // Hash of the definition revision, parameter and dependency signatures.
  std::uint64_t signature_locked(const std::string& name) const {
    auto it = defs_.find(name);
    if (it == defs_.end()) return 0;
    std::string material = std::to_string(it->second.revision);
    if (auto p = params_.find(name); p != params_.end()) material += "|" + p->second.dump();
    for (const auto& dep : it->second.def.depends_on)
      material += "|" + dep + ":" + std::to_string(signature_locked(dep));
    return detail::fnv1a(material);
  }

  // Node-scoped measures that (transitively) read tree structure cannot be
  // reused across trees; pair-keyed ones carry the structure in their key.
  bool chainable(const std::string& name) const {
    std::shared_lock lock(mutex_);
    std::set<std::string> seen;
    std::function<bool(const std::string&)> structural = [&](const std::string& n) {
      if (!seen.insert(n).second) return false;
      auto it = defs_.find(n);
      if (it == defs_.end()) return false;
      if (it->second.def.scope == MeasureScope::parent_pair) return true;
      return std::any_of(it->second.def.depends_on.begin(), it->second.def.depends_on.end(),
                         structural);
    };
    const auto& def = lookup(name).def;
    if (def.scope != MeasureScope::node) return true;
    return std::none_of(def.depends_on.begin(), def.depends_on.end(), structural);
  }

  void check_acyclic(const MeasureDef& def) const {
    std::set<std::string> seen;
    std::function<void(const std::string&)> walk = [&](const std::string& n) {
      if (n == def.name) throw Error("measure '" + def.name + "' has a dependency cycle");
      if (!seen.insert(n).second) return;
      auto it = defs_.find(n);
      if (it == defs_.end()) return;
      for (const auto& d : it->second.def.depends_on) walk(d);
    };
    for (const auto& d : def.depends_on) walk(d);
  }

  // `name` plus every registered measure that depends on it transitively.
  std::set<std::string> dependents_closure(const std::string& name) const {
    std::set<std::string> out{name};
    bool grew = true;
    while (grew) {
      grew = false;
      for (const auto& [n, e] : defs_) {
        if (out.count(n)) continue;
        for (const auto& d : e.def.depends_on)
          if (out.count(d)) {
            out.insert(n);
            grew = true;
            break;
          }
      }
    }
    return out;
  }

  std::shared_ptr<const RegulusTree> tree_;
  std::shared_ptr<const Dataset> data_;
  std::shared_ptr<AttributeStore> chain_;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> defs_;
  std::map<std::string, json> params_;
  std::map<std::string, std::map<CacheKey, std::any>> cache_;
  std::map<std::string, std::size_t> compute_by_name_;
  std::atomic<std::size_t> computes_{0};
};

inline const RegulusTree& MeasureContext::tree() const { return store_.tree(); }
inline const Dataset& MeasureContext::dataset() const { return store_.dataset(); }

template <class T>
T MeasureContext::get(std::string_view measure, NodeId node, NodeId node2) const {
  return store_.get<T>(measure, node, node2);
}

// ------------------------------------------------------------ helpers

/// Standardized inputs and active output of the points in a node's range.
struct PointBlock {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

inline PointBlock node_points(const RegulusTree& t, const Dataset& ds, NodeId id) {
  const auto& r = t.partition(id).range;
  const auto m = static_cast<Eigen::Index>(r.size());
  PointBlock block{Eigen::MatrixXd(m, ds.inputs.cols()), Eigen::VectorXd(m)};
  const auto y = ds.y();
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto p = static_cast<Eigen::Index>(t.permutation()[r.lo + static_cast<std::size_t>(i)]);
    block.x.row(i) = ds.inputs.row(p);
    block.y[i] = y[p];
  }
  return block;
}

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

/// lifespan, min_value, max_value, size_norm, shared_min_id, shared_max_id.
///
/// lifespan reads the parent and is therefore keyed by (node, parent).
/// min/max values are in standardized units of the active output. The
/// shared extremum ids enumerate distinct extrema over the whole partition
/// collection, so they agree across derived trees.
inline void register_structural_measures(AttributeStore& store, bool replace = false) {
  auto scalar = [&](std::string name, MeasureScope scope,
                    std::function<double(const MeasureContext&, MeasureKey)> fn) {
    MeasureDef def;
    def.name = std::move(name);
    def.scope = scope;
    def.compute = [fn = std::move(fn)](const MeasureContext& ctx, MeasureKey key) {
      return std::any(fn(ctx, key));
    };
    make_scalar_codec(def);
    store.register_measure(std::move(def), replace);
  };

  scalar("lifespan", MeasureScope::parent_pair, [](const MeasureContext& ctx, MeasureKey key) {
    const auto& t = ctx.tree();
    const double top = key.second == kNoNode ? 1.0 : t.partition(key.second).persistence;
    return top - t.partition(key.first).persistence;
  });
  auto extreme = [](const MeasureContext& ctx, NodeId id, bool want_max) {
    const auto& t = ctx.tree();
    const auto y = ctx.dataset().y();
    const auto& r = t.partition(id).range;
    double v = want_max ? -std::numeric_limits<double>::infinity()
                        : std::numeric_limits<double>::infinity();
    for (std::size_t pos = r.lo; pos < r.hi; ++pos) {
      const double f = y[static_cast<Eigen::Index>(t.permutation()[pos])];
      v = want_max ? std::max(v, f) : std::min(v, f);
    }
    return v;
  };
  scalar("min_value", MeasureScope::node, [extreme](const MeasureContext& ctx, MeasureKey key) {
    return extreme(ctx, key.first, false);
  });
  scalar("max_value", MeasureScope::node, [extreme](const MeasureContext& ctx, MeasureKey key) {
    return extreme(ctx, key.first, true);
  });
  scalar("size_norm", MeasureScope::node, [](const MeasureContext& ctx, MeasureKey key) {
    const auto& t = ctx.tree();
    return static_cast<double>(t.size(key.first)) / static_cast<double>(t.point_count());
  });
  auto shared_id = [](const MeasureContext& ctx, NodeId id, bool maxima) {
    std::set<PointId> distinct;
    for (const auto& rec : ctx.tree().partitions().records)
      distinct.insert(maxima ? rec.max_ext : rec.min_ext);
    const auto& rec = ctx.tree().partition(id);
    const auto it = distinct.find(maxima ? rec.max_ext : rec.min_ext);
    return static_cast<double>(std::distance(distinct.begin(), it));
  };
  scalar("shared_min_id", MeasureScope::node, [shared_id](const MeasureContext& ctx, MeasureKey key) {
    return shared_id(ctx, key.first, false);
  });
  scalar("shared_max_id", MeasureScope::node, [shared_id](const MeasureContext& ctx, MeasureKey key) {
    return shared_id(ctx, key.first, true);
  });
}

}  // namespace regulus
