#pragma once

// Hand-built inputs shared by several suites.

#include <memory>
#include <vector>

#include "regulus/regulus.hpp"

namespace fixture {

using namespace regulus;

// Two maxima (points 0, 1) and two minima (points 2, 3) cut the 8 points
// into four cells keyed (min, max):
//   b0 = (2, 0)  b1 = (2, 1)  b2 = (3, 0)  b3 = (3, 1)
// Cancelling maximum 1 merges b1 into b0 and b3 into b2 in a single step;
// cancelling minimum 3 then merges the two results.
inline std::vector<BasePartition> four_cell_parts() {
  return {{2, 0, {0, 2, 4}}, {2, 1, {1, 5}}, {3, 0, {6}}, {3, 1, {3, 7}}};
}

inline CancellationSequence four_cell_sequence() {
  CancellationSequence seq;
  seq.base_count = 4;
  seq.value_range = 1.0;
  CancellationStep first;
  first.persistence = 0.3;
  first.dying = 1;
  first.surviving = 0;
  first.kind = CancelKind::max_merge;
  first.saddle_value = 0.5;
  first.merges = {{1, 0, 4}, {3, 2, 5}};
  CancellationStep second;
  second.persistence = 0.6;
  second.dying = 3;
  second.surviving = 2;
  second.kind = CancelKind::min_merge;
  second.saddle_value = 0.6;
  second.merges = {{5, 4, 6}};
  seq.steps = {first, second};
  return seq;
}

/// Point coordinates and values consistent with the cells above.
inline Dataset four_cell_dataset() {
  Eigen::MatrixXd x(8, 2);
  x << 0.0, 0.0,   // max 0
      1.0, 1.0,    // max 1
      0.0, 1.0,    // min 2
      1.0, 0.0,    // min 3
      0.2, 0.6,    //
      0.6, 0.9,    //
      0.5, 0.1,    //
      0.9, 0.4;
  Eigen::VectorXd y(8);
  y << 1.0, 0.8, 0.0, 0.3, 0.45, 0.5, 0.55, 0.6;
  return synthetic::make_dataset(std::move(x), std::move(y));
}

inline std::shared_ptr<const RegulusTree> four_cell_tree() {
  return std::make_shared<const RegulusTree>(build_regulus_tree(four_cell_parts(), four_cell_sequence()));
}

/// Leaf of `t` keyed (min, max).
inline NodeId leaf_keyed(const RegulusTree& t, PointId min_ext, PointId max_ext) {
  for (NodeId id : t.nodes())
    if (t.is_leaf(id) && t.partition(id).min_ext == min_ext && t.partition(id).max_ext == max_ext) return id;
  return kNoNode;
}

}  // namespace fixture
