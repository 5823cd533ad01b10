#pragma once

// Star-coordinate projection: each input dimension maps to a steerable 2D
// vector and a point lands at the vector-weighted sum of its coordinates.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "regulus/dataset.hpp"
#include "regulus/error.hpp"
#include "regulus/json_util.hpp"
#include "regulus/regression.hpp"
#include "regulus/tree.hpp"

namespace regulus {

using Vec2 = std::array<double, 2>;

struct ProjectionSpec {
  std::vector<Vec2> axes;       // one per input dimension; zero removes it
  std::optional<Vec2> y_axis;   // output axis, unset by default

  [[nodiscard]] std::size_t dims() const { return axes.size(); }
  friend bool operator==(const ProjectionSpec&, const ProjectionSpec&) = default;
};

/// Unit vectors at angles i*pi/d, i = 0..d-1.
inline ProjectionSpec initial_spec(std::size_t d) {
  ProjectionSpec spec;
  spec.axes.reserve(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double a = std::numbers::pi * static_cast<double>(i) / static_cast<double>(d);
    spec.axes.push_back({std::cos(a), std::sin(a)});
  }
  return spec;
}

inline Vec2 project_point(const ProjectionSpec& spec, const double* x, std::size_t d, double y = 0.0) {
  if (d != spec.dims()) throw Error("projection has " + std::to_string(spec.dims()) +
                                    " axes but the point has " + std::to_string(d) + " coordinates");
  Vec2 out{0.0, 0.0};
  for (std::size_t i = 0; i < d; ++i) {
    out[0] += x[i] * spec.axes[i][0];
    out[1] += x[i] * spec.axes[i][1];
  }
  if (spec.y_axis) {
    out[0] += y * (*spec.y_axis)[0];
    out[1] += y * (*spec.y_axis)[1];
  }
  return out;
}

inline Vec2 project_point(const ProjectionSpec& spec, const std::vector<double>& x, double y = 0.0) {
  return project_point(spec, x.data(), x.size(), y);
}

/// Positions of every row of `x` (n x d), with `y` used only when the spec
/// has an output axis. Returns n x 2.
inline Eigen::MatrixX2d project(const ProjectionSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (static_cast<std::size_t>(x.cols()) != spec.dims())
    throw Error("projection has " + std::to_string(spec.dims()) + " axes but the data has " +
                std::to_string(x.cols()) + " dimensions");
  if (y.size() != x.rows()) throw Error("input and output row counts differ");
  Eigen::MatrixX2d out(x.rows(), 2);
  std::vector<double> row(spec.dims());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = x(r, static_cast<Eigen::Index>(j));
    const Vec2 p = project_point(spec, row, y[r]);
    out(r, 0) = p[0];
    out(r, 1) = p[1];
  }
  return out;
}

/// Scales and rotates the vector of one dimension; the others are untouched.
inline ProjectionSpec update_axis(ProjectionSpec spec, std::size_t dim, double scale, double radians) {
  if (dim >= spec.dims()) throw Error("no projection axis " + std::to_string(dim));
  auto& v = spec.axes[dim];
  const double c = std::cos(radians), s = std::sin(radians);
  v = {scale * (c * v[0] - s * v[1]), scale * (s * v[0] + c * v[1])};
  return spec;
}

inline ProjectionSpec remove_axis(ProjectionSpec spec, std::size_t dim) {
  if (dim >= spec.dims()) throw Error("no projection axis " + std::to_string(dim));
  spec.axes[dim] = {0.0, 0.0};
  return spec;
}

struct PartitionEdge {
  NodeId node = kNoNode;
  Vec2 min_pos{};
  Vec2 max_pos{};
  // Projected inverse curve, when requested. Its ends need not coincide
  // with the extrema.
  std::vector<Vec2> curve;
};

/// Segment from the projected minimum to the projected maximum of each
/// selected partition. `curves`, if given, supplies one inverse curve per
/// selected node to project as a polyline.
inline std::vector<PartitionEdge> project_partition_edges(
    const ProjectionSpec& spec, const RegulusTree& t, const Dataset& ds, const Selection& sel,
    const std::vector<InverseCurve>* curves = nullptr) {
  if (curves && curves->size() != sel.nodes.size())
    throw Error("one inverse curve per selected partition is required");
  const auto y = ds.y();
  auto at = [&](PointId p) {
    const auto i = static_cast<Eigen::Index>(p);
    std::vector<double> row(ds.d());
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = ds.inputs(i, static_cast<Eigen::Index>(j));
    return project_point(spec, row, y[i]);
  };
  std::vector<PartitionEdge> edges;
  edges.reserve(sel.nodes.size());
  for (std::size_t k = 0; k < sel.nodes.size(); ++k) {
    const auto& rec = t.partition(sel.nodes[k]);
    PartitionEdge e{rec.id, at(rec.min_ext), at(rec.max_ext), {}};
    if (curves) {
      const auto& c = (*curves)[k];
      for (std::size_t s = 0; s < c.levels.size(); ++s)
        e.curve.push_back(project_point(spec, c.mean[s], c.levels[s]));
    }
    edges.push_back(std::move(e));
  }
  return edges;
}

inline json to_json(const ProjectionSpec& spec) {
  json axes = json::array();
  for (const auto& v : spec.axes) axes.push_back({v[0], v[1]});
  json y = spec.y_axis ? json{(*spec.y_axis)[0], (*spec.y_axis)[1]} : json(nullptr);
  return {{"axes", std::move(axes)}, {"yAxis", std::move(y)}};
}

inline ProjectionSpec projection_from_json(const json& j) {
  auto vec = [](const json& v) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw Error("projection vectors must be two numbers");
    Vec2 out{v[0].get<double>(), v[1].get<double>()};
    if (!std::isfinite(out[0]) || !std::isfinite(out[1]))
      throw Error("projection vectors must be finite");
    return out;
  };
  ProjectionSpec spec;
  for (const auto& v : j.at("axes")) spec.axes.push_back(vec(v));
  if (j.contains("yAxis") && !j.at("yAxis").is_null()) spec.y_axis = vec(j.at("yAxis"));
  return spec;
}

}  // namespace regulus
