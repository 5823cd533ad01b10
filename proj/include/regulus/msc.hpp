#pragma once

// Approximate Morse-Smale decomposition of a function sampled on a point
// cloud: a k-nearest-neighbour graph stands in for the mesh, steepest
// ascent/descent along graph edges stands in for integral lines, and
// extremum cancellations are ordered by range-normalized persistence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regulus/dataset.hpp"
#include "regulus/error.hpp"

namespace regulus {

using PointId = std::uint32_t;

inline constexpr std::size_t kDefaultNeighbors = 15;

/// Undirected adjacency over the sample points.
struct NeighborhoodGraph {
  std::size_t k = 0;
  std::vector<std::vector<PointId>> adjacency;  // sorted, no self-loops

  [[nodiscard]] std::size_t size() const { return adjacency.size(); }
  [[nodiscard]] std::size_t edge_count() const {
    std::size_t twice = 0;
    for (const auto& a : adjacency) twice += a.size();
    return twice / 2;
  }
  [[nodiscard]] bool has_edge(PointId a, PointId b) const {
    const auto& adj = adjacency[a];
    return std::binary_search(adj.begin(), adj.end(), b);
  }
};

struct GraphOptions {
  // Join disconnected k-NN components through their closest point pairs so
  // that every pair of regions can eventually be cancelled.
  bool bridge_components = true;
};

namespace detail {

inline std::vector<double> row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.size()));
  const auto cols = static_cast<std::size_t>(m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

inline double squared_distance(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline std::vector<std::size_t> component_labels(const NeighborhoodGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::size_t> label(n, n);
  std::size_t next = 0;
  std::vector<PointId> stack;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] != n) continue;
    label[s] = next;
    stack.assign(1, static_cast<PointId>(s));
    while (!stack.empty()) {
      auto p = stack.back();
      stack.pop_back();
      for (auto q : g.adjacency[p])
        if (label[q] == n) {
          label[q] = next;
          stack.push_back(q);
        }
    }
    ++next;
  }
  return label;
}

inline void add_edge(NeighborhoodGraph& g, PointId a, PointId b) {
  auto insert = [](std::vector<PointId>& adj, PointId v) {
    auto it = std::lower_bound(adj.begin(), adj.end(), v);
    if (it == adj.end() || *it != v) adj.insert(it, v);
  };
  insert(g.adjacency[a], b);
  insert(g.adjacency[b], a);
}

// Boruvka rounds over components: each component links to its nearest
// outside point until one component remains.
inline void bridge_components(NeighborhoodGraph& g, const std::vector<double>& pts,
                              std::size_t d) {
  const std::size_t n = g.size();
  for (;;) {
    auto label = component_labels(g);
    const std::size_t count = *std::max_element(label.begin(), label.end()) + 1;
    if (count <= 1) return;
    using Candidate = std::tuple<double, PointId, PointId>;
    std::vector<std::optional<Candidate>> best(count);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (label[i] == label[j]) continue;
        Candidate c{squared_distance(&pts[i * d], &pts[j * d], d), static_cast<PointId>(i),
                    static_cast<PointId>(j)};
        for (auto comp : {label[i], label[j]})
          if (!best[comp] || c < *best[comp]) best[comp] = c;
      }
    }
    for (const auto& c : best)
      if (c) add_edge(g, std::get<1>(*c), std::get<2>(*c));
  }
}

}  // namespace detail

/// Symmetrized k-nearest-neighbour graph in (standardized) input space.
/// Distance ties are broken by the smaller point index.
inline NeighborhoodGraph build_neighborhood_graph(const Dataset& ds, std::size_t k,
                                                  GraphOptions options = {}) {
  const std::size_t n = ds.n();
  const std::size_t d = ds.d();
  if (k == 0) throw Error("neighbour count k must be positive");
  if (k >= n) throw Error("neighbour count k must be smaller than the number of points");

  const auto pts = detail::row_major(ds.inputs);
  NeighborhoodGraph g;
  g.k = k;
  g.adjacency.resize(n);

  std::vector<std::pair<double, PointId>> dist(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[m++] = {detail::squared_distance(&pts[i * d], &pts[j * d], d),
                   static_cast<PointId>(j)};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t r = 0; r < k; ++r) g.adjacency[i].push_back(dist[r].second);
  }
  // Symmetrize.
  std::vector<std::vector<PointId>> sym(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : g.adjacency[i]) {
      sym[i].push_back(j);
      sym[j].push_back(static_cast<PointId>(i));
    }
  for (auto& adj : sym) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }
  g.adjacency = std::move(sym);

  if (options.bridge_components) detail::bridge_components(g, pts, d);
  return g;
}

/// Per-point destination of steepest ascent (max_of) and descent (min_of).
struct FlowAssignment {
  std::vector<PointId> max_of;
  std::vector<PointId> min_of;
  std::vector<PointId> maxima;  // ascending point order
  std::vector<PointId> minima;
};

namespace detail {

// Steepest neighbour by difference quotient in direction `sign` (+1 ascent).
// Returns the point itself when no neighbour is strictly better.
inline std::vector<PointId> steepest_step(const NeighborhoodGraph& g,
                                          const std::vector<double>& pts, std::size_t d,
                                          const Eigen::VectorXd& f, double sign) {
  const std::size_t n = g.size();
  std::vector<PointId> next(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double fp = sign * f[static_cast<Eigen::Index>(p)];
    PointId best = static_cast<PointId>(p);
    double best_slope = -1.0;
    for (auto q : g.adjacency[p]) {
      const double rise = sign * f[static_cast<Eigen::Index>(q)] - fp;
      if (!(rise > 0.0)) continue;
      const double len = std::sqrt(squared_distance(&pts[p * d], &pts[q * d], d));
      const double slope = len > 0.0 ? rise / len : std::numeric_limits<double>::infinity();
      // Adjacency is sorted, so strict comparison keeps the smaller index on ties.
      if (slope > best_slope) {
        best_slope = slope;
        best = q;
      }
    }
    next[p] = best;
  }
  return next;
}

inline std::vector<PointId> follow_to_fixpoint(std::vector<PointId> next) {
  const std::size_t n = next.size();
  std::vector<char> done(n, 0);
  std::vector<PointId> path;
  for (std::size_t s = 0; s < n; ++s) {
    if (done[s]) continue;
    path.clear();
    PointId p = static_cast<PointId>(s);
    while (!done[p] && next[p] != p) {
      path.push_back(p);
      p = next[p];
    }
    const PointId target = done[p] ? next[p] : p;
    done[p] = 1;
    for (auto q : path) {
      next[q] = target;
      done[q] = 1;
    }
  }
  return next;
}

}  // namespace detail

/// Traces every point to the extremum reached by repeated steepest steps.
inline FlowAssignment compute_flow(const Dataset& ds, const NeighborhoodGraph& g) {
  if (g.size() != ds.n()) throw Error("neighbourhood graph does not cover the dataset");
  const auto pts = detail::row_major(ds.inputs);
  const Eigen::VectorXd f = ds.y();
  FlowAssignment flow;
  flow.max_of = detail::follow_to_fixpoint(detail::steepest_step(g, pts, ds.d(), f, +1.0));
  flow.min_of = detail::follow_to_fixpoint(detail::steepest_step(g, pts, ds.d(), f, -1.0));
  for (std::size_t p = 0; p < ds.n(); ++p) {
    if (flow.max_of[p] == p) flow.maxima.push_back(static_cast<PointId>(p));
    if (flow.min_of[p] == p) flow.minima.push_back(static_cast<PointId>(p));
  }
  return flow;
}

/// A cell of the decomposition: the points sharing one (minimum, maximum) pair.
struct BasePartition {
  PointId min_ext = 0;
  PointId max_ext = 0;
  std::vector<PointId> points;  // ascending
};

/// One partition per occupied (min, max) key, ordered by key.
inline std::vector<BasePartition> extract_base_partitions(const FlowAssignment& flow) {
  std::map<std::pair<PointId, PointId>, std::vector<PointId>> cells;
  for (std::size_t p = 0; p < flow.max_of.size(); ++p)
    cells[{flow.min_of[p], flow.max_of[p]}].push_back(static_cast<PointId>(p));
  std::vector<BasePartition> parts;
  parts.reserve(cells.size());
  for (auto& [key, pts] : cells) parts.push_back({key.first, key.second, std::move(pts)});
  return parts;
}

enum class CancelKind { max_merge, min_merge };

/// Two partitions fused into a new one. Handles index base partitions first
/// (0..base_count-1), then merged partitions in creation order.
struct PartitionMerge {
  int dying_side = 0;     // partition keyed with the cancelled extremum
  int surviving_side = 0; // partition already keyed with the survivor
  int merged = 0;
};

/// A partition whose key changes without merging.
struct PartitionRelabel {
  int partition = 0;
  PointId new_min = 0;
  PointId new_max = 0;
};

struct CancellationStep {
  double persistence = 0.0;  // normalized to [0, 1]
  PointId dying = 0;
  PointId surviving = 0;
  CancelKind kind = CancelKind::max_merge;
  double saddle_value = 0.0;
  std::vector<PartitionMerge> merges;
  std::vector<PartitionRelabel> relabels;
};

struct CancellationSequence {
  std::size_t base_count = 0;
  double value_range = 0.0;  // normalization denominator
  std::vector<CancellationStep> steps;
};

namespace detail {

// Region adjacency for one extremum kind, with the best saddle value per pair.
class SaddleGraph {
 public:
  using Pair = std::pair<PointId, PointId>;

  // `better(a, b)` is true when saddle value a should replace b.
  template <class Better>
  void offer(PointId a, PointId b, double value, Better better) {
    if (a == b) return;
    auto& slot = adj_[a];
    auto it = slot.find(b);
    if (it == slot.end()) {
      slot.emplace(b, value);
      adj_[b].emplace(a, value);
    } else if (better(value, it->second)) {
      it->second = value;
      adj_[b][a] = value;
    }
  }

  // Folds `dying` into `survivor`, keeping the better saddle per neighbour.
  template <class Better>
  void contract(PointId dying, PointId survivor, Better better) {
    auto node = adj_.extract(dying);
    if (node.empty()) return;
    for (auto& [other, value] : node.mapped()) {
      adj_[other].erase(dying);
      if (other != survivor) offer(survivor, other, value, better);
    }
    auto s = adj_.find(survivor);
    if (s != adj_.end()) {
      s->second.erase(dying);
      if (s->second.empty()) adj_.erase(s);
    }
  }

  template <class Visit>
  void for_each_pair(Visit visit) const {
    for (const auto& [a, nbrs] : adj_)
      for (const auto& [b, value] : nbrs)
        if (a < b) visit(a, b, value);
  }

 private:
  std::map<PointId, std::map<PointId, double>> adj_;
};

}  // namespace detail

/// Persistence-ordered sequence of extremum cancellations, expressed as
/// partition merges and relabels.
///
/// Adjacent extrema of one kind are those whose ascending (descending)
/// regions share a graph edge. The separating saddle value of two maxima
/// regions is the largest min(f(p), f(q)) over boundary edges (p, q), and
/// the smallest max(f(p), f(q)) for minima. The lower maximum (higher
/// minimum) of the cheapest pair dies; ties go to the smaller dying index.
/// Repeats until a single partition remains.
inline CancellationSequence compute_cancellation_sequence(const Dataset& ds,
                                                          const NeighborhoodGraph& g,
                                                          const FlowAssignment& flow,
                                                          const std::vector<BasePartition>& parts) {
  if (parts.empty()) throw Error("no base partitions");
  const std::size_t n = ds.n();
  if (g.size() != n || flow.max_of.size() != n) throw Error("graph/flow size mismatch");

  const Eigen::VectorXd f = ds.y();
  auto fv = [&](PointId p) { return f[static_cast<Eigen::Index>(p)]; };
  // Total order used to pick the lower of two extrema; equal values rank the
  // smaller index as higher.
  auto higher = [&](PointId a, PointId b) {
    return fv(a) > fv(b) || (fv(a) == fv(b) && a < b);
  };

  CancellationSequence seq;
  seq.base_count = parts.size();
  seq.value_range = f.size() > 0 ? f.maxCoeff() - f.minCoeff() : 0.0;
  auto normalize = [&](double span) {
    return seq.value_range > 0.0 ? std::clamp(span / seq.value_range, 0.0, 1.0) : 0.0;
  };

  detail::SaddleGraph max_graph, min_graph;
  auto keep_larger = [](double a, double b) { return a > b; };
  auto keep_smaller = [](double a, double b) { return a < b; };

  for (std::size_t p = 0; p < n; ++p) {
    for (auto q : g.adjacency[p]) {
      if (q <= p) continue;
      const auto pp = static_cast<PointId>(p);
      if (flow.max_of[p] != flow.max_of[q])
        max_graph.offer(flow.max_of[p], flow.max_of[q], std::min(fv(pp), fv(q)), keep_larger);
      if (flow.min_of[p] != flow.min_of[q])
        min_graph.offer(flow.min_of[p], flow.min_of[q], std::max(fv(pp), fv(q)), keep_smaller);
    }
  }

  std::map<std::pair<PointId, PointId>, int> live;  // (min, max) -> handle
  for (std::size_t i = 0; i < parts.size(); ++i) {
    auto [it, fresh] = live.emplace(std::pair{parts[i].min_ext, parts[i].max_ext},
                                    static_cast<int>(i));
    if (!fresh) throw Error("duplicate base partition key");
  }
  int next_handle = static_cast<int>(parts.size());

  while (live.size() > 1) {
    struct Candidate {
      double persistence;
      PointId dying;
      int kind;  // 0 = max, 1 = min
      PointId surviving;
      double saddle;
    };
    std::optional<Candidate> best;
    auto consider = [&](const Candidate& c) {
      if (!best || std::tie(c.persistence, c.dying, c.kind) <
                       std::tie(best->persistence, best->dying, best->kind))
        best = c;
    };
    max_graph.for_each_pair([&](PointId a, PointId b, double s) {
      const PointId low = higher(a, b) ? b : a;
      const PointId high = low == a ? b : a;
      consider({normalize(fv(low) - s), low, 0, high, s});
    });
    min_graph.for_each_pair([&](PointId a, PointId b, double s) {
      const PointId high = higher(a, b) ? a : b;
      const PointId low = high == a ? b : a;
      consider({normalize(s - fv(high)), high, 1, low, s});
    });
    if (!best) throw Error("regions are not connected; cannot complete the cancellation sequence");

    CancellationStep step;
    step.persistence = best->persistence;
    step.dying = best->dying;
    step.surviving = best->surviving;
    step.kind = best->kind == 0 ? CancelKind::max_merge : CancelKind::min_merge;
    step.saddle_value = best->saddle;

    const bool max_kind = best->kind == 0;
    if (max_kind) {
      max_graph.contract(best->dying, best->surviving, keep_larger);
    } else {
      min_graph.contract(best->dying, best->surviving, keep_smaller);
    }

    std::vector<std::pair<std::pair<PointId, PointId>, int>> affected;
    for (const auto& [key, handle] : live)
      if ((max_kind ? key.second : key.first) == best->dying) affected.emplace_back(key, handle);
    for (const auto& [key, handle] : affected) {
      live.erase(key);
      const auto target = max_kind ? std::pair{key.first, best->surviving}
                                   : std::pair{best->surviving, key.second};
      auto it = live.find(target);
      if (it != live.end()) {
        step.merges.push_back({handle, it->second, next_handle});
        it->second = next_handle++;
      } else {
        live.emplace(target, handle);
        step.relabels.push_back({handle, target.first, target.second});
      }
    }
    seq.steps.push_back(std::move(step));
  }
  return seq;
}

/// Number of maxima and minima still alive at normalized persistence `p`:
/// extrema whose cancellation happens at or below `p` are gone.
inline std::size_t extrema_alive(const FlowAssignment& flow, const CancellationSequence& seq,
                                 double p) {
  std::size_t alive = flow.maxima.size() + flow.minima.size();
  for (const auto& step : seq.steps)
    if (step.persistence <= p) --alive;
  return alive;
}

}  // namespace regulus
