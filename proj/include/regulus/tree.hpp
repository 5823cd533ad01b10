#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "regulus/dataset.hpp"
#include "regulus/error.hpp"
#include "regulus/msc.hpp"

namespace regulus {

using NodeId = int;
inline constexpr NodeId kNoNode = -1;

/// Half-open interval into the tree's point permutation.
struct PointRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  [[nodiscard]] std::size_t size() const { return hi - lo; }
  [[nodiscard]] bool contains(std::size_t pos) const { return pos >= lo && pos < hi; }
  [[nodiscard]] bool contains(const PointRange& o) const { return o.lo >= lo && o.hi <= hi; }
  [[nodiscard]] bool overlaps(const PointRange& o) const { return lo < o.hi && o.lo < hi; }
  friend bool operator==(const PointRange&, const PointRange&) = default;
};

/// One partition. Records are immutable and shared by every tree derived
/// from the same original; parent/child wiring lives in the tree.
struct PartitionRecord {
  NodeId id = kNoNode;
  double persistence = 0.0;  // creation level
  PointRange range;
  PointId min_ext = 0;
  PointId max_ext = 0;
  std::vector<PointId> extra_criticals;  // associated extrema outside `range`
};

/// The shared partition collection plus the leaf-ordered point enumeration.
struct PartitionCollection {
  std::vector<PartitionRecord> records;  // indexed by id
  std::vector<PointId> permutation;      // display position -> original point
  std::vector<std::size_t> position;     // original point -> display position
};

/// A hierarchy of nested partitions: the original simplification tree or a
/// view derived from it. Node ids are partition ids, so they stay stable
/// across derived trees.
class RegulusTree {
 public:
  RegulusTree() = default;

  [[nodiscard]] const PartitionCollection& partitions() const { return *partitions_; }
  [[nodiscard]] const std::shared_ptr<const PartitionCollection>& shared_partitions() const {
    return partitions_;
  }
  [[nodiscard]] const PartitionRecord& partition(NodeId id) const {
    check(id);
    return partitions_->records[static_cast<std::size_t>(id)];
  }
  [[nodiscard]] NodeId root() const { return root_; }
  [[nodiscard]] NodeId parent(NodeId id) const {
    check(id);
    return parent_[static_cast<std::size_t>(id)];
  }
  [[nodiscard]] const std::vector<NodeId>& children(NodeId id) const {
    check(id);
    return children_[static_cast<std::size_t>(id)];
  }
  [[nodiscard]] bool contains(NodeId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < present_.size() &&
           present_[static_cast<std::size_t>(id)];
  }
  [[nodiscard]] bool is_leaf(NodeId id) const { return children(id).empty(); }

  /// Present node ids in depth-first preorder.
  [[nodiscard]] const std::vector<NodeId>& nodes() const { return order_; }
  [[nodiscard]] std::size_t node_count() const { return order_.size(); }
  [[nodiscard]] std::size_t point_count() const { return partitions_->permutation.size(); }
  [[nodiscard]] const std::vector<PointId>& permutation() const {
    return partitions_->permutation;
  }
  /// Tree this one was derived from, if any.
  [[nodiscard]] const std::shared_ptr<const RegulusTree>& source() const { return source_; }

  /// Persistence at which the node is absorbed by its parent; the root
  /// extends to 1.0.
  [[nodiscard]] double destruction(NodeId id) const {
    const NodeId p = parent(id);
    return p == kNoNode ? 1.0 : partition(p).persistence;
  }
  [[nodiscard]] double lifespan(NodeId id) const {
    return destruction(id) - partition(id).persistence;
  }
  [[nodiscard]] std::size_t size(NodeId id) const { return partition(id).range.size(); }
  /// Exact point count including associated extrema stored outside the range.
  [[nodiscard]] std::size_t exact_point_count(NodeId id) const {
    return size(id) + partition(id).extra_criticals.size();
  }
  /// Original indices of the points in a node's range.
  [[nodiscard]] std::vector<PointId> points(NodeId id) const {
    const auto& r = partition(id).range;
    return {partitions_->permutation.begin() + static_cast<std::ptrdiff_t>(r.lo),
            partitions_->permutation.begin() + static_cast<std::ptrdiff_t>(r.hi)};
  }
  [[nodiscard]] bool is_ancestor(NodeId ancestor, NodeId node) const {
    for (NodeId p = parent(node); p != kNoNode; p = parent(p))
      if (p == ancestor) return true;
    return false;
  }

  /// Assembles a tree from explicit wiring. `parents[id]` is kNoNode for the
  /// root and for ids not present; `present[id]` marks membership.
  static RegulusTree from_wiring(std::shared_ptr<const PartitionCollection> partitions,
                                 const std::vector<NodeId>& parents,
                                 const std::vector<char>& present,
                                 std::shared_ptr<const RegulusTree> source = nullptr) {
    RegulusTree t;
    const std::size_t count = partitions->records.size();
    if (parents.size() != count || present.size() != count)
      throw Error("tree wiring does not match the partition collection");
    t.partitions_ = std::move(partitions);
    t.parent_ = parents;
    t.present_ = present;
    t.children_.assign(count, {});
    t.source_ = std::move(source);
    for (std::size_t id = 0; id < count; ++id) {
      if (!present[id]) continue;
      const NodeId p = parents[id];
      if (p == kNoNode) {
        if (t.root_ != kNoNode) throw Error("tree has more than one root");
        t.root_ = static_cast<NodeId>(id);
      } else {
        if (p < 0 || static_cast<std::size_t>(p) >= count || !present[static_cast<std::size_t>(p)])
          throw Error("node " + std::to_string(id) + " has an unknown parent");
        t.children_[static_cast<std::size_t>(p)].push_back(static_cast<NodeId>(id));
      }
    }
    if (t.root_ == kNoNode) throw Error("tree has no root");
    for (auto& kids : t.children_)
      std::sort(kids.begin(), kids.end(), [&](NodeId a, NodeId b) {
        return t.partitions_->records[static_cast<std::size_t>(a)].range.lo <
               t.partitions_->records[static_cast<std::size_t>(b)].range.lo;
      });
    std::vector<NodeId> stack{t.root_};
    while (!stack.empty()) {
      NodeId id = stack.back();
      stack.pop_back();
      t.order_.push_back(id);
      const auto& kids = t.children_[static_cast<std::size_t>(id)];
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    if (t.order_.size() != static_cast<std::size_t>(std::count(present.begin(), present.end(), 1)))
      throw Error("tree wiring contains a cycle or unreachable nodes");
    return t;
  }

 private:
  void check(NodeId id) const {
    if (!contains(id)) throw Error("unknown node " + std::to_string(id));
  }

  std::shared_ptr<const PartitionCollection> partitions_ =
      std::make_shared<const PartitionCollection>();
  std::vector<NodeId> parent_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<char> present_;
  std::vector<NodeId> order_;
  NodeId root_ = kNoNode;
  std::shared_ptr<const RegulusTree> source_;
};

/// Builds the original tree by replaying the cancellation sequence.
///
/// Leaves are the base partitions at persistence 0; each merge record
/// creates a node whose children are the merged pair, at the step's
/// persistence. A merged node that merges again at the level it was created
/// is never alive, so the new node adopts its children and children always
/// sit strictly below their parent. Ids are assigned in depth-first preorder and points are
/// enumerated leaf by leaf (ascending original index within a leaf), so
/// every node owns one contiguous range. Each extremum point is placed in
/// the lowest-id leaf keyed with it, unless that would empty its own leaf;
/// nodes keyed with an extremum outside their range list it in
/// `extra_criticals`.
inline RegulusTree build_regulus_tree(const std::vector<BasePartition>& parts,
                                      const CancellationSequence& seq) {
  if (parts.empty()) throw Error("no base partitions");
  if (seq.base_count != parts.size())
    throw Error("cancellation sequence was built for a different partition set");

  struct Proto {
    double persistence = 0.0;
    PointId min_ext = 0, max_ext = 0;
    std::vector<int> children;
  };
  std::vector<Proto> proto;
  proto.reserve(parts.size() * 2);
  for (const auto& p : parts) proto.push_back({0.0, p.min_ext, p.max_ext, {}});
  std::vector<char> alive(parts.size(), 1);
  // Live keys; relabels change these but leave each record's creation key.
  std::vector<std::pair<PointId, PointId>> key;
  for (const auto& p : parts) key.emplace_back(p.min_ext, p.max_ext);

  auto live_handle = [&](int h) {
    if (h < 0 || static_cast<std::size_t>(h) >= proto.size() || !alive[static_cast<std::size_t>(h)])
      throw Error("inconsistent sequence: merge references unknown partition " + std::to_string(h));
    return static_cast<std::size_t>(h);
  };

  for (const auto& step : seq.steps) {
    std::set<int> touched;
    for (const auto& m : step.merges) {
      const auto a = live_handle(m.dying_side);
      const auto b = live_handle(m.surviving_side);
      if (a == b || !touched.insert(m.dying_side).second || !touched.insert(m.surviving_side).second)
        throw Error("inconsistent sequence: partition merged twice in one step");
      if (m.merged != static_cast<int>(proto.size()))
        throw Error("inconsistent sequence: unexpected merged partition handle");
      Proto node;
      node.persistence = step.persistence;
      node.min_ext = key[b].first;
      node.max_ext = key[b].second;
      if (step.kind == CancelKind::max_merge) node.max_ext = step.surviving;
      else node.min_ext = step.surviving;
      // A merged partition that merges again at its own creation level has
      // zero lifespan; its children join the new node instead.
      for (const auto side : {a, b}) {
        if (side >= parts.size() && proto[side].persistence == step.persistence) {
          const auto kids = proto[side].children;
          node.children.insert(node.children.end(), kids.begin(), kids.end());
        } else {
          node.children.push_back(static_cast<int>(side));
        }
      }
      alive[a] = alive[b] = 0;
      key.emplace_back(node.min_ext, node.max_ext);
      proto.push_back(std::move(node));
      alive.push_back(1);
    }
    for (const auto& r : step.relabels) key[live_handle(r.partition)] = {r.new_min, r.new_max};
  }
  if (std::count(alive.begin(), alive.end(), 1) != 1)
    throw Error("cancellation sequence does not reduce to a single partition");
  const int root_handle = static_cast<int>(std::find(alive.begin(), alive.end(), 1) - alive.begin());

  // Depth-first preorder ids.
  std::vector<NodeId> id_of(proto.size(), kNoNode);
  std::vector<int> handle_of;
  std::vector<NodeId> parent_id;
  {
    std::vector<std::pair<int, NodeId>> stack{{root_handle, kNoNode}};
    while (!stack.empty()) {
      auto [h, par] = stack.back();
      stack.pop_back();
      const auto id = static_cast<NodeId>(handle_of.size());
      id_of[static_cast<std::size_t>(h)] = id;
      handle_of.push_back(h);
      parent_id.push_back(par);
      const auto& kids = proto[static_cast<std::size_t>(h)].children;
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back({*it, id});
    }
  }
  const std::size_t count = handle_of.size();

  // Leaf membership, with extrema moved to the lowest-id leaf keyed with them.
  std::vector<std::vector<PointId>> leaf_points(count);
  std::size_t n = 0;
  for (std::size_t b = 0; b < parts.size(); ++b) {
    leaf_points[static_cast<std::size_t>(id_of[b])] = parts[b].points;
    n += parts[b].points.size();
  }
  {
    std::vector<NodeId> leaf_of(n, kNoNode);
    for (std::size_t id = 0; id < count; ++id)
      for (auto p : leaf_points[id]) {
        if (p >= n || leaf_of[p] != kNoNode) throw Error("base partitions must be a disjoint cover");
        leaf_of[p] = static_cast<NodeId>(id);
      }
    std::map<PointId, NodeId> lowest_keyed;
    for (std::size_t b = 0; b < parts.size(); ++b) {
      const NodeId id = id_of[b];
      for (auto e : {parts[b].min_ext, parts[b].max_ext}) {
        auto [it, fresh] = lowest_keyed.emplace(e, id);
        if (!fresh) it->second = std::min(it->second, id);
      }
    }
    for (const auto& [e, target] : lowest_keyed) {
      const NodeId current = leaf_of[e];
      if (current == target) continue;
      auto& from = leaf_points[static_cast<std::size_t>(current)];
      if (from.size() <= 1) continue;
      from.erase(std::find(from.begin(), from.end(), e));
      auto& to = leaf_points[static_cast<std::size_t>(target)];
      to.insert(std::lower_bound(to.begin(), to.end(), e), e);
      leaf_of[e] = target;
    }
  }

  auto collection = std::make_shared<PartitionCollection>();
  collection->records.resize(count);
  collection->permutation.reserve(n);
  // Preorder visits leaves left to right, so ranges come out contiguous.
  for (std::size_t id = 0; id < count; ++id) {
    const auto& pr = proto[static_cast<std::size_t>(handle_of[id])];
    auto& rec = collection->records[id];
    rec.id = static_cast<NodeId>(id);
    rec.persistence = pr.persistence;
    rec.min_ext = pr.min_ext;
    rec.max_ext = pr.max_ext;
    if (pr.children.empty()) {
      rec.range.lo = collection->permutation.size();
      collection->permutation.insert(collection->permutation.end(), leaf_points[id].begin(),
                                     leaf_points[id].end());
      rec.range.hi = collection->permutation.size();
    }
  }
  // Internal ranges: postorder union of children.
  for (std::size_t i = count; i-- > 0;) {
    const auto& pr = proto[static_cast<std::size_t>(handle_of[i])];
    if (pr.children.empty()) continue;
    auto& rec = collection->records[i];
    const auto& first = collection->records[static_cast<std::size_t>(
        id_of[static_cast<std::size_t>(pr.children.front())])];
    const auto& last = collection->records[static_cast<std::size_t>(
        id_of[static_cast<std::size_t>(pr.children.back())])];
    rec.range = {first.range.lo, last.range.hi};
  }
  collection->position.assign(n, 0);
  for (std::size_t pos = 0; pos < n; ++pos)
    collection->position[collection->permutation[pos]] = pos;
  for (auto& rec : collection->records) {
    for (auto e : {rec.min_ext, rec.max_ext}) {
      if (e >= n) throw Error("extremum index out of range");
      if (!rec.range.contains(collection->position[e]) &&
          std::find(rec.extra_criticals.begin(), rec.extra_criticals.end(), e) ==
              rec.extra_criticals.end())
        rec.extra_criticals.push_back(e);
    }
  }

  std::vector<char> present(count, 1);
  return RegulusTree::from_wiring(std::move(collection), parent_id, present);
}

/// Convenience: the full pipeline from a standardized dataset.
struct Decomposition {
  NeighborhoodGraph graph;
  FlowAssignment flow;
  std::vector<BasePartition> base;
  CancellationSequence sequence;
  std::shared_ptr<const RegulusTree> tree;
};

inline Decomposition decompose(const Dataset& ds, std::size_t k = kDefaultNeighbors) {
  Decomposition out;
  out.graph = build_neighborhood_graph(ds, k);
  out.flow = compute_flow(ds, out.graph);
  out.base = extract_base_partitions(out.flow);
  out.sequence = compute_cancellation_sequence(ds, out.graph, out.flow, out.base);
  out.tree = std::make_shared<const RegulusTree>(build_regulus_tree(out.base, out.sequence));
  return out;
}

// ---------------------------------------------------------------- layout

struct LayoutRect {
  NodeId node = kNoNode;
  std::size_t x = 0;      // range.lo
  std::size_t width = 0;  // range length
  double y = 0.0;         // creation persistence
  double height = 0.0;    // lifespan
};

/// One rectangle per node: horizontal extent from the point range, bottom at
/// the creation persistence, top at the parent's (1.0 for the root).
inline std::vector<LayoutRect> layout_tree(const RegulusTree& t) {
  std::vector<LayoutRect> rects;
  rects.reserve(t.node_count());
  for (NodeId id : t.nodes()) {
    const auto& rec = t.partition(id);
    rects.push_back({id, rec.range.lo, rec.range.size(), rec.persistence, t.lifespan(id)});
  }
  return rects;
}

// ------------------------------------------------------------- selection

enum class SelectionMode { global_line, step_line, discrete, non_consistent };

struct Selection {
  std::vector<NodeId> nodes;  // ascending range.lo
  SelectionMode mode = SelectionMode::global_line;
};

namespace detail {

inline void sort_by_position(const RegulusTree& t, std::vector<NodeId>& ids) {
  std::sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
    const auto& ra = t.partition(a).range;
    const auto& rb = t.partition(b).range;
    return std::pair{ra.lo, rb.hi} < std::pair{rb.lo, ra.hi};
  });
}

inline bool tiles(const RegulusTree& t, const std::vector<NodeId>& sorted_ids, PointRange span) {
  std::size_t at = span.lo;
  for (NodeId id : sorted_ids) {
    const auto& r = t.partition(id).range;
    if (r.lo != at) return false;
    at = r.hi;
  }
  return at == span.hi;
}

}  // namespace detail

/// Nodes alive at persistence `p`: creation <= p < destruction. The root is
/// selected for every p at or above its creation level.
inline Selection cut_at_persistence(const RegulusTree& t, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("persistence threshold must lie in [0, 1]");
  Selection sel;
  sel.mode = SelectionMode::global_line;
  std::vector<NodeId> stack{t.root()};
  while (!stack.empty()) {
    NodeId id = stack.back();
    stack.pop_back();
    if (t.partition(id).persistence <= p) {
      if (id == t.root() || p < t.destruction(id)) sel.nodes.push_back(id);
      continue;  // descendants were created earlier and already destroyed
    }
    for (NodeId c : t.children(id)) stack.push_back(c);
  }
  detail::sort_by_position(t, sel.nodes);
  return sel;
}

/// One segment of a step line: a persistence level over a range of display
/// positions.
struct LineStep {
  PointRange columns;
  double persistence = 0.0;
};

/// Selection along a step-shaped line. Each step contributes the nodes its
/// level cuts within its columns. Where a selected node overlaps a selected
/// descendant, the ancestor is split down toward that descendant: the path
/// nodes are dropped and their off-path children are taken whole, so the
/// deepest intersected node wins in every column and the result still
/// tiles [0, n).
inline Selection select_step_line(const RegulusTree& t, std::vector<LineStep> steps) {
  const std::size_t n = t.point_count();
  std::sort(steps.begin(), steps.end(),
            [](const LineStep& a, const LineStep& b) { return a.columns.lo < b.columns.lo; });
  std::size_t at = 0;
  for (const auto& s : steps) {
    if (s.columns.lo != at || s.columns.hi <= s.columns.lo)
      throw Error("step line segments must tile the point range without gaps or overlaps");
    if (!(s.persistence >= 0.0 && s.persistence <= 1.0))
      throw Error("step line levels must lie in [0, 1]");
    at = s.columns.hi;
  }
  if (at != n) throw Error("step line segments must tile the point range without gaps or overlaps");

  std::set<NodeId> chosen;
  for (const auto& s : steps)
    for (NodeId id : cut_at_persistence(t, s.persistence).nodes)
      if (t.partition(id).range.overlaps(s.columns)) chosen.insert(id);

  // Split every chosen ancestor around its chosen descendants.
  auto has_chosen_below = [&](NodeId id) {
    return std::any_of(chosen.begin(), chosen.end(),
                       [&](NodeId o) { return t.is_ancestor(id, o); });
  };
  std::set<NodeId> result;
  std::function<void(NodeId)> take = [&](NodeId id) {
    if (!has_chosen_below(id)) {
      result.insert(id);
      return;
    }
    for (NodeId c : t.children(id)) take(c);
  };
  for (NodeId id : chosen) {
    const bool under_other = std::any_of(chosen.begin(), chosen.end(),
                                         [&](NodeId o) { return t.is_ancestor(o, id); });
    if (!under_other) take(id);
  }
  Selection sel;
  sel.mode = SelectionMode::step_line;
  sel.nodes.assign(result.begin(), result.end());
  detail::sort_by_position(t, sel.nodes);
  return sel;
}

/// Checks a user-assembled selection against the rules of its mode.
/// Line modes must tile [0, n); discrete mode forbids ancestor/descendant
/// pairs; non-consistent mode accepts overlaps.
inline Selection validate_selection(const RegulusTree& t, std::vector<NodeId> ids,
                                    SelectionMode mode) {
  for (NodeId id : ids)
    if (!t.contains(id)) throw Error("unknown node " + std::to_string(id));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (mode != SelectionMode::non_consistent) {
    for (NodeId a : ids)
      for (NodeId b : ids)
        if (a != b && t.is_ancestor(a, b))
          throw Error("selection contains node " + std::to_string(a) + " and its descendant " +
                      std::to_string(b));
  }
  detail::sort_by_position(t, ids);
  if ((mode == SelectionMode::global_line || mode == SelectionMode::step_line) &&
      !detail::tiles(t, ids, {0, t.point_count()}))
    throw Error("line selections must tile the point range");
  return {std::move(ids), mode};
}

// ------------------------------------------------------------- reduction

/// Keep/remove decision for one node. `kept_ancestor` is the nearest
/// ancestor already kept in the tree being built.
using KeepPredicate =
    std::function<bool(const RegulusTree& source, NodeId node, NodeId kept_ancestor)>;

/// Derived tree without the nodes rejected by `keep`. Children of a removed
/// node reattach to the nearest kept ancestor; removed leaves simply vanish,
/// leaving their columns without a leaf. Partition records are shared.
inline RegulusTree reduce_tree(std::shared_ptr<const RegulusTree> source, const KeepPredicate& keep) {
  const auto& t = *source;
  if (!keep(t, t.root(), kNoNode)) throw Error("reduction rule removes the root");
  const std::size_t count = t.partitions().records.size();
  std::vector<NodeId> parents(count, kNoNode);
  std::vector<char> present(count, 0);
  present[static_cast<std::size_t>(t.root())] = 1;

  std::vector<std::pair<NodeId, NodeId>> stack;  // (node, kept ancestor)
  for (NodeId c : t.children(t.root())) stack.push_back({c, t.root()});
  while (!stack.empty()) {
    auto [id, anc] = stack.back();
    stack.pop_back();
    NodeId next_anc = anc;
    if (keep(t, id, anc)) {
      present[static_cast<std::size_t>(id)] = 1;
      parents[static_cast<std::size_t>(id)] = anc;
      next_anc = id;
    }
    for (NodeId c : t.children(id)) stack.push_back({c, next_anc});
  }
  return RegulusTree::from_wiring(t.shared_partitions(), parents, present, std::move(source));
}

/// Built-in reduction rules; the root is always kept.
struct ReduceRule {
  std::optional<std::size_t> min_points;
  std::optional<double> min_lifespan;  // relative to the nearest kept ancestor
  /// Keep nodes whose active-output values (raw units) intersect [lo, hi].
  std::optional<std::pair<double, double>> value_range;
};

inline KeepPredicate make_predicate(const ReduceRule& rule, const Dataset& ds) {
  return [rule, &ds](const RegulusTree& t, NodeId id, NodeId anc) {
    if (id == t.root()) return true;
    if (rule.min_points && t.size(id) < *rule.min_points) return false;
    if (rule.min_lifespan && anc != kNoNode &&
        t.partition(anc).persistence - t.partition(id).persistence < *rule.min_lifespan)
      return false;
    if (rule.value_range) {
      const auto y = ds.y();
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      const auto& r = t.partition(id).range;
      for (std::size_t pos = r.lo; pos < r.hi; ++pos) {
        const double v = y[static_cast<Eigen::Index>(t.permutation()[pos])];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      lo = output_to_raw(ds, ds.active_output, lo);
      hi = output_to_raw(ds, ds.active_output, hi);
      if (hi < rule.value_range->first || lo > rule.value_range->second) return false;
    }
    return true;
  };
}

inline RegulusTree reduce_tree(std::shared_ptr<const RegulusTree> source, const ReduceRule& rule,
                               const Dataset& ds) {
  return reduce_tree(std::move(source), make_predicate(rule, ds));
}

}  // namespace regulus
