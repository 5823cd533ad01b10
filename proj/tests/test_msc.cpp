#include <gtest/gtest.h>

#include <map>
#include <set>

#include "oracles.hpp"

using namespace regulus;

namespace {

Dataset line_dataset(const std::vector<double>& y) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), 1);
  Eigen::VectorXd f(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    x(static_cast<Eigen::Index>(i), 0) = static_cast<double>(i);
    f[static_cast<Eigen::Index>(i)] = y[i];
  }
  return synthetic::make_dataset(std::move(x), std::move(f));
}

Dataset two_bump_grid() {
  const std::vector<synthetic::Bump> bumps{{{0.25, 0.5}, 1.0, 0.15}, {{0.75, 0.5}, 0.8, 0.15}};
  // An odd row count puts a row through the bump centers; an even one
  // would split each peak into two equal-valued maxima.
  Eigen::MatrixXd x(220, 2);
  Eigen::VectorXd y(220);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 11; ++j) {
      const double p[2] = {i / 19.0, j / 10.0};
      x(i * 11 + j, 0) = p[0];
      x(i * 11 + j, 1) = p[1];
      y[i * 11 + j] = synthetic::bumps_value(bumps, p, 2);
    }
  return synthetic::make_dataset(std::move(x), std::move(y));
}

// Steepest-ascent destination of every point, computed directly from the
// brute-force neighbourhoods.
std::vector<PointId> oracle_flow(const Dataset& ds, const std::vector<std::set<PointId>>& adj, double sign) {
  const std::size_t n = ds.n();
  std::vector<PointId> next(n);
  for (std::size_t p = 0; p < n; ++p) {
    PointId best = static_cast<PointId>(p);
    double best_slope = 0.0;
    for (PointId q : adj[p]) {
      const double dist = (ds.inputs.row(static_cast<Eigen::Index>(p)) - ds.inputs.row(q)).norm();
      const double slope = sign * (ds.y()[q] - ds.y()[static_cast<Eigen::Index>(p)]) / dist;
      if (slope > best_slope) {
        best_slope = slope;
        best = q;
      }
    }
    next[p] = best;
  }
  for (std::size_t p = 0; p < n; ++p)
    while (next[next[p]] != next[p]) next[p] = next[next[p]];
  return next;
}

}  // namespace

// ---------------------------------------------------------------- graph

TEST(NeighborhoodGraph, CollinearTripleIsSymmetrized) {
  const auto ds = line_dataset({0.0, 1.0, 2.0});
  const auto g = build_neighborhood_graph(ds, 1);
  EXPECT_TRUE(g.has_edge(1, 0));
  EXPECT_TRUE(g.has_edge(1, 2));
  EXPECT_TRUE(g.has_edge(0, 1));
  EXPECT_TRUE(g.has_edge(2, 1));
}

TEST(NeighborhoodGraph, FullNeighbourhoodIsComplete) {
  const auto ds = oracle::random_smooth_dataset(1, 12, 3);
  const auto g = build_neighborhood_graph(ds, 11);
  EXPECT_EQ(g.edge_count(), 12u * 11u / 2u);
}

TEST(NeighborhoodGraph, MatchesBruteForceNeighbours) {
  const auto ds = oracle::random_smooth_dataset(2, 50, 2);
  const auto g = build_neighborhood_graph(ds, 5, {.bridge_components = false});
  const auto want = oracle::brute_knn(ds, 5);
  for (std::size_t p = 0; p < ds.n(); ++p) {
    const std::set<PointId> got(g.adjacency[p].begin(), g.adjacency[p].end());
    EXPECT_EQ(got, want[p]) << "point " << p;
  }
}

TEST(NeighborhoodGraph, InvariantsOnRandomClouds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = oracle::random_smooth_dataset(seed, 80 + seed * 10, 1 + seed % 4);
    const std::size_t k = 3 + seed % 6;
    const auto g = build_neighborhood_graph(ds, k);
    for (std::size_t p = 0; p < g.size(); ++p) {
      EXPECT_GE(g.adjacency[p].size(), k);
      EXPECT_TRUE(std::is_sorted(g.adjacency[p].begin(), g.adjacency[p].end()));
      for (PointId q : g.adjacency[p]) {
        EXPECT_NE(q, p);
        EXPECT_TRUE(g.has_edge(q, static_cast<PointId>(p)));
      }
    }
  }
}

TEST(NeighborhoodGraph, BridgesSeparatedClusters) {
  Eigen::MatrixXd x(6, 1);
  x << 0.0, 0.1, 0.2, 10.0, 10.1, 10.2;
  const auto ds = synthetic::make_dataset(x, Eigen::VectorXd::LinSpaced(6, 0.0, 1.0));
  const auto g = build_neighborhood_graph(ds, 1);
  EXPECT_TRUE(g.has_edge(2, 3));
  const auto open = build_neighborhood_graph(ds, 1, {.bridge_components = false});
  EXPECT_FALSE(open.has_edge(2, 3));
}

TEST(NeighborhoodGraph, RejectsBadNeighbourCount) {
  const auto ds = line_dataset({0.0, 1.0, 2.0});
  EXPECT_THROW(build_neighborhood_graph(ds, 0), Error);
  EXPECT_THROW(build_neighborhood_graph(ds, 3), Error);
}

// ----------------------------------------------------------------- flow

TEST(Flow, MonotoneChainReachesEndpoints) {
  const auto ds = line_dataset({0.0, 0.5, 0.7, 1.2, 3.0, 3.1});
  const auto flow = compute_flow(ds, build_neighborhood_graph(ds, 1));
  EXPECT_EQ(flow.maxima, (std::vector<PointId>{5}));
  EXPECT_EQ(flow.minima, (std::vector<PointId>{0}));
  for (std::size_t p = 0; p < ds.n(); ++p) {
    EXPECT_EQ(flow.max_of[p], 5u);
    EXPECT_EQ(flow.min_of[p], 0u);
  }
}

TEST(Flow, ConstantFunctionMakesEveryPointAnExtremum) {
  const auto ds = line_dataset({2.0, 2.0, 2.0, 2.0});
  const auto dec = decompose(ds, 1);
  EXPECT_EQ(dec.flow.maxima.size(), 4u);
  EXPECT_EQ(dec.flow.minima.size(), 4u);
  EXPECT_EQ(dec.base.size(), 4u);
  for (const auto& s : dec.sequence.steps) EXPECT_EQ(s.persistence, 0.0);
  // Every merge happens at level 0, so the root adopts all four leaves.
  EXPECT_EQ(dec.tree->node_count(), 5u);
  EXPECT_EQ(dec.tree->children(dec.tree->root()).size(), 4u);
}

TEST(Flow, TwoBumpMaximaMatchDenseGrid) {
  const auto ds = two_bump_grid();
  const auto flow = compute_flow(ds, build_neighborhood_graph(ds, 8));
  const std::vector<synthetic::Bump> bumps{{{0.25, 0.5}, 1.0, 0.15}, {{0.75, 0.5}, 0.8, 0.15}};
  const auto grid = oracle::grid_topology(
      [&](double a, double b) {
        const double p[2] = {a, b};
        return synthetic::bumps_value(bumps, p, 2);
      },
      201, 0.0);
  EXPECT_EQ(grid.maxima, 2u);
  EXPECT_EQ(flow.maxima.size(), grid.maxima);
}

TEST(Flow, AssignmentsPointAtExtrema) {
  const auto ds = oracle::random_smooth_dataset(4, 300, 3);
  const auto flow = compute_flow(ds, build_neighborhood_graph(ds, 10));
  const std::set<PointId> maxima(flow.maxima.begin(), flow.maxima.end());
  const std::set<PointId> minima(flow.minima.begin(), flow.minima.end());
  for (PointId m : flow.maxima) EXPECT_EQ(flow.max_of[m], m);
  for (PointId m : flow.minima) EXPECT_EQ(flow.min_of[m], m);
  for (std::size_t p = 0; p < ds.n(); ++p) {
    EXPECT_TRUE(maxima.count(flow.max_of[p]));
    EXPECT_TRUE(minima.count(flow.min_of[p]));
  }
}

// ----------------------------------------------------- base partitions

TEST(BasePartitions, SingleExtremumPairGivesOnePartition) {
  const auto ds = line_dataset({0.0, 1.0, 2.0, 3.0});
  const auto dec = decompose(ds, 1);
  ASSERT_EQ(dec.base.size(), 1u);
  EXPECT_EQ(dec.base[0].points.size(), 4u);
  EXPECT_TRUE(dec.sequence.steps.empty());
}

TEST(BasePartitions, WShapeMatchesOracleFlow) {
  const auto ds = line_dataset({3.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.5, 1.0, 0.5, 1.0, 2.0, 3.0});
  const auto adj = oracle::brute_knn(ds, 1);
  const auto up = oracle_flow(ds, adj, 1.0), down = oracle_flow(ds, adj, -1.0);
  std::set<std::pair<PointId, PointId>> pairs;
  for (std::size_t p = 0; p < ds.n(); ++p) pairs.insert({down[p], up[p]});
  const auto dec = decompose(ds, 1);
  EXPECT_EQ(dec.base.size(), pairs.size());
  EXPECT_EQ(dec.base.size(), 4u);
}

TEST(BasePartitions, RandomDataMatchesOracleFlow) {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto ds = oracle::random_smooth_dataset(seed, 150, 2);
    const auto g = build_neighborhood_graph(ds, 6, {.bridge_components = false});
    const auto adj = oracle::brute_knn(ds, 6);
    const auto up = oracle_flow(ds, adj, 1.0), down = oracle_flow(ds, adj, -1.0);
    const auto flow = compute_flow(ds, g);
    EXPECT_EQ(flow.max_of, up);
    EXPECT_EQ(flow.min_of, down);
    std::set<std::pair<PointId, PointId>> pairs;
    for (std::size_t p = 0; p < ds.n(); ++p) pairs.insert({down[p], up[p]});
    EXPECT_EQ(extract_base_partitions(flow).size(), pairs.size());
  }
}

TEST(BasePartitions, DisjointCoverKeyedByMemberFlow) {
  const auto ds = oracle::random_smooth_dataset(8, 400, 2);
  const auto dec = decompose(ds, 12);
  std::vector<int> owner(ds.n(), -1);
  for (std::size_t b = 0; b < dec.base.size(); ++b)
    for (PointId p : dec.base[b].points) {
      EXPECT_EQ(owner[p], -1);
      owner[p] = static_cast<int>(b);
      EXPECT_EQ(dec.flow.max_of[p], dec.base[b].max_ext);
      EXPECT_EQ(dec.flow.min_of[p], dec.base[b].min_ext);
    }
  for (int o : owner) EXPECT_GE(o, 0);
}

// --------------------------------------------------------- cancellation

TEST(Cancellation, FirstStepOfTwoMinimaValley) {
  // Minima at 2 (1.0 below the ridge at 4) and 6 (0.3 below it).
  const auto ds = line_dataset({1.5, 0.5, 0.0, 0.5, 1.0, 0.85, 0.7, 0.85, 1.5});
  const auto dec = decompose(ds, 1);
  ASSERT_FALSE(dec.sequence.steps.empty());
  EXPECT_DOUBLE_EQ(dec.sequence.value_range, 1.5);
  EXPECT_NEAR(dec.sequence.steps.front().persistence, 0.3 / 1.5, 1e-12);
}

TEST(Cancellation, SaddleConfigurationMergesTwoPairsInOneStep) {
  const auto dec = decompose(synthetic::saddle_grid(), 8);
  EXPECT_EQ(dec.flow.maxima.size(), 2u);
  EXPECT_EQ(dec.flow.minima.size(), 2u);
  ASSERT_EQ(dec.base.size(), 4u);
  ASSERT_EQ(dec.sequence.steps.size(), 2u);
  EXPECT_EQ(dec.sequence.steps[0].merges.size(), 2u);
  EXPECT_EQ(dec.sequence.steps[1].merges.size(), 1u);
}

TEST(Cancellation, ReplayInvariantsOnRandomData) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const std::size_t n = 60 + (seed * 37) % 300, d = 1 + seed % 4;
    const auto ds = oracle::random_smooth_dataset(seed, n, d);
    const auto dec = decompose(ds, 4 + seed % 10);
    const auto& seq = dec.sequence;
    std::map<int, std::size_t> live;
    for (std::size_t b = 0; b < dec.base.size(); ++b) live[static_cast<int>(b)] = dec.base[b].points.size();
    int next = static_cast<int>(dec.base.size());
    double last = 0.0;
    for (const auto& step : seq.steps) {
      EXPECT_GE(step.persistence, last);
      EXPECT_LE(step.persistence, 1.0);
      last = step.persistence;
      std::set<int> touched;
      for (const auto& m : step.merges) {
        EXPECT_TRUE(touched.insert(m.dying_side).second);
        EXPECT_TRUE(touched.insert(m.surviving_side).second);
        ASSERT_TRUE(live.count(m.dying_side) && live.count(m.surviving_side));
        EXPECT_EQ(m.merged, next++);
        live[m.merged] = live[m.dying_side] + live[m.surviving_side];
        live.erase(m.dying_side);
        live.erase(m.surviving_side);
      }
      std::size_t total = 0;
      for (auto& [h, size] : live) total += size;
      EXPECT_EQ(total, n);
    }
    EXPECT_EQ(live.size(), 1u) << "seed " << seed;
  }
}

TEST(Cancellation, AliveCountMatchesRecount) {
  const auto ds = oracle::random_smooth_dataset(77, 400, 2);
  const auto dec = decompose(ds, 10);
  std::map<PointId, double> death;
  for (const auto& s : dec.sequence.steps) death[s.dying] = s.persistence;
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (int i = 0; i <= 100; ++i) {
    const double p = i / 100.0;
    std::size_t recount = 0;
    for (auto m : dec.flow.maxima) recount += !death.count(m) || death[m] > p;
    for (auto m : dec.flow.minima) recount += !death.count(m) || death[m] > p;
    const auto alive = extrema_alive(dec.flow, dec.sequence, p);
    EXPECT_EQ(alive, recount);
    EXPECT_LE(alive, prev);
    prev = alive;
  }
}

TEST(Cancellation, IsDeterministic) {
  const auto ds = oracle::random_smooth_dataset(5, 300, 3);
  const auto a = decompose(ds, 9), b = decompose(ds, 9);
  ASSERT_EQ(a.sequence.steps.size(), b.sequence.steps.size());
  for (std::size_t i = 0; i < a.sequence.steps.size(); ++i) {
    EXPECT_EQ(a.sequence.steps[i].persistence, b.sequence.steps[i].persistence);
    EXPECT_EQ(a.sequence.steps[i].dying, b.sequence.steps[i].dying);
    EXPECT_EQ(a.sequence.steps[i].surviving, b.sequence.steps[i].surviving);
  }
  EXPECT_EQ(a.tree->permutation(), b.tree->permutation());
}
