#pragma once

// Text exports of an analysis: layout, measure tables and projections as
// JSON, CSV or SVG.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "regulus/analysis.hpp"

namespace regulus {

enum class ExportFormat { json, csv, svg };

inline ExportFormat export_format_from_string(const std::string& s) {
  if (s == "json") return ExportFormat::json;
  if (s == "csv") return ExportFormat::csv;
  if (s == "svg") return ExportFormat::svg;
  throw Error("unknown export format '" + s + "'");
}

namespace detail {

inline std::string number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

// Blue-yellow-red over [0, 1]; values are clamped, undefined values are gray.
inline std::string colormap(double v) {
  if (std::isnan(v)) return "#bbbbbb";
  const double t = std::clamp(v, 0.0, 1.0);
  struct Rgb { double r, g, b; };
  const Rgb blue{49, 54, 149}, yellow{255, 255, 191}, red{165, 0, 38};
  const Rgb a = t < 0.5 ? blue : yellow, b = t < 0.5 ? yellow : red;
  const double u = t < 0.5 ? t * 2.0 : (t - 0.5) * 2.0;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(a.r + (b.r - a.r) * u)),
                static_cast<int>(std::lround(a.g + (b.g - a.g) * u)),
                static_cast<int>(std::lround(a.b + (b.b - a.b) * u)));
  return buf;
}

inline std::vector<double> scalar_values(AttributeStore& store, const RegulusTree& t,
                                         const std::string& measure) {
  std::vector<double> out;
  for (NodeId id : t.nodes()) out.push_back(store.get<double>(measure, id));
  return out;
}

inline std::string tree_svg(const RegulusTree& t, const std::vector<double>& values,
                            const std::string& title) {
  const double width = 800.0, height = 400.0;
  const double sx = width / static_cast<double>(t.point_count());
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  s << "<title>" << title << "</title>\n";
  std::size_t k = 0;
  for (const auto& r : layout_tree(t)) {
    const double y_top = height * (1.0 - (r.y + r.height));
    s << "<rect data-node=\"" << r.node << "\" x=\"" << static_cast<double>(r.x) * sx << "\" y=\""
      << y_top << "\" width=\"" << static_cast<double>(r.width) * sx << "\" height=\""
      << height * r.height << "\" fill=\"" << colormap(values[k++])
      << "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace detail

/// Layout rectangles, optionally colored by a scalar measure (SVG only).
inline std::string export_layout(const AnalysisBundle& b, const std::string& handle, ExportFormat fmt,
                                 const std::string& measure = "fitness") {
  const auto& t = b.tree(handle);
  switch (fmt) {
    case ExportFormat::json:
      return json{{"handle", handle}, {"rects", to_json(layout_tree(t))}}.dump(1) + "\n";
    case ExportFormat::csv: {
      std::ostringstream s;
      s << "node,parent,x,width,y,height\n";
      for (const auto& r : layout_tree(t))
        s << r.node << ',' << t.parent(r.node) << ',' << r.x << ',' << r.width << ','
          << detail::number(r.y) << ',' << detail::number(r.height) << '\n';
      return s.str();
    }
    case ExportFormat::svg:
      return detail::tree_svg(t, detail::scalar_values(b.store(handle), t, measure), measure);
  }
  return {};
}

/// One row per node with the named scalar measures.
inline std::string export_measures(const AnalysisBundle& b, const std::string& handle,
                                   ExportFormat fmt, const std::vector<std::string>& measures) {
  const auto& t = b.tree(handle);
  auto& store = b.store(handle);
  std::vector<std::vector<double>> cols;
  for (const auto& m : measures) cols.push_back(detail::scalar_values(store, t, m));
  switch (fmt) {
    case ExportFormat::json: {
      json out = {{"handle", handle}, {"nodes", t.nodes()}};
      json values = json::object();
      for (std::size_t i = 0; i < measures.size(); ++i) values[measures[i]] = encode_reals(cols[i]);
      out["measures"] = std::move(values);
      return out.dump(1) + "\n";
    }
    case ExportFormat::csv: {
      std::ostringstream s;
      s << "node";
      for (const auto& m : measures) s << ',' << m;
      s << '\n';
      for (std::size_t k = 0; k < t.node_count(); ++k) {
        s << t.nodes()[k];
        for (const auto& c : cols) s << ',' << detail::number(c[k]);
        s << '\n';
      }
      return s.str();
    }
    case ExportFormat::svg:
      if (measures.empty()) throw Error("svg export needs a measure");
      return detail::tree_svg(t, cols.front(), measures.front());
  }
  return {};
}

/// Projected points and the min-max edges of the partitions alive at
/// `persistence`.
inline std::string export_projection(const AnalysisBundle& b, const std::string& handle,
                                     ExportFormat fmt, const ProjectionSpec& spec, double persistence) {
  const auto& ds = b.dataset();
  const auto& t = b.tree(handle);
  const Eigen::MatrixX2d pos = project(spec, ds.inputs, ds.y());
  const auto sel = cut_at_persistence(t, persistence);
  const auto edges = project_partition_edges(spec, t, ds, sel);
  switch (fmt) {
    case ExportFormat::json: {
      json pts = json::array();
      for (Eigen::Index i = 0; i < pos.rows(); ++i) pts.push_back({pos(i, 0), pos(i, 1)});
      json es = json::array();
      for (const auto& e : edges)
        es.push_back({{"node", e.node}, {"min", {e.min_pos[0], e.min_pos[1]}}, {"max", {e.max_pos[0], e.max_pos[1]}}});
      return json{{"handle", handle}, {"spec", to_json(spec)}, {"persistence", persistence},
                  {"points", std::move(pts)}, {"edges", std::move(es)}}
                 .dump(1) + "\n";
    }
    case ExportFormat::csv: {
      std::ostringstream s;
      s << "point,px,py\n";
      for (Eigen::Index i = 0; i < pos.rows(); ++i)
        s << i << ',' << detail::number(pos(i, 0)) << ',' << detail::number(pos(i, 1)) << '\n';
      return s.str();
    }
    case ExportFormat::svg: {
      const double size = 600.0, pad = 20.0;
      double lo_x = pos.col(0).minCoeff(), hi_x = pos.col(0).maxCoeff();
      double lo_y = pos.col(1).minCoeff(), hi_y = pos.col(1).maxCoeff();
      const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-12});
      auto px = [&](double v) { return pad + (v - lo_x) / span * (size - 2 * pad); };
      auto py = [&](double v) { return size - pad - (v - lo_y) / span * (size - 2 * pad); };
      std::ostringstream s;
      s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
      for (Eigen::Index i = 0; i < pos.rows(); ++i)
        s << "<circle cx=\"" << px(pos(i, 0)) << "\" cy=\"" << py(pos(i, 1)) << "\" r=\"1.2\" fill=\"#999999\"/>\n";
      for (const auto& e : edges)
        s << "<line data-node=\"" << e.node << "\" x1=\"" << px(e.min_pos[0]) << "\" y1=\"" << py(e.min_pos[1])
          << "\" x2=\"" << px(e.max_pos[0]) << "\" y2=\"" << py(e.max_pos[1])
          << "\" stroke=\"#b2182b\" stroke-width=\"2\"/>\n";
      s << "</svg>\n";
      return s.str();
    }
  }
  return {};
}

}  // namespace regulus
