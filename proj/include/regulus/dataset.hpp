#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "regulus/error.hpp"

namespace regulus {

/// Sampled scalar function: n points in R^d with one or more output columns.
///
/// Inputs and outputs are stored column-major. After `standardize` every
/// column has zero mean and unit (population) variance; `raw_means` and
/// `raw_scales` hold the statistics needed to map values back, inputs first
/// and then outputs.
struct Dataset {
  Eigen::MatrixXd inputs;   // n x d
  Eigen::MatrixXd outputs;  // n x outputs
  std::size_t active_output = 0;
  std::vector<std::string> dim_names;
  std::vector<std::string> output_names;
  std::vector<double> raw_means;
  std::vector<double> raw_scales;

  [[nodiscard]] std::size_t n() const { return static_cast<std::size_t>(inputs.rows()); }
  [[nodiscard]] std::size_t d() const { return static_cast<std::size_t>(inputs.cols()); }
  [[nodiscard]] std::size_t output_count() const {
    return static_cast<std::size_t>(outputs.cols());
  }

  /// Active output column, the one that drives topology and regression.
  [[nodiscard]] auto y() const { return outputs.col(static_cast<Eigen::Index>(active_output)); }

  [[nodiscard]] double output_mean(std::size_t col) const { return raw_means[d() + col]; }
  [[nodiscard]] double output_scale(std::size_t col) const { return raw_scales[d() + col]; }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    auto cell = trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"')
      cell = cell.substr(1, cell.size() - 2);
    cells.push_back(cell);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace detail

inline constexpr std::string_view kOutputMarker = "|";

/// Parses a comma-delimited table with a header row.
///
/// Output columns are either named in `output_columns` (takes precedence) or
/// are every column after a marker column literally named "|". The marker
/// column's cells are ignored. Values are kept raw; call `standardize` next.
inline Dataset load_table(std::istream& source, std::string_view active_output,
                          std::span<const std::string> output_columns = {}) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(source, line)) {
    ++line_no;
    if (!detail::blank(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error("missing header row");

  std::vector<std::string> header;
  for (auto cell : detail::split_csv_line(line)) header.emplace_back(cell);
  {
    std::set<std::string> seen;
    for (const auto& name : header) {
      if (name.empty()) throw Error("empty column name in header");
      if (name != kOutputMarker && !seen.insert(name).second)
        throw Error("duplicate column name '" + name + "'");
    }
  }

  // Column roles: -1 ignored, 0 input, 1 output.
  std::vector<int> role(header.size(), 0);
  if (!output_columns.empty()) {
    for (const auto& name : output_columns) {
      auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) throw Error("unknown output column '" + name + "'");
      role[static_cast<std::size_t>(it - header.begin())] = 1;
    }
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == kOutputMarker) role[c] = -1;
  } else {
    auto marker = std::find(header.begin(), header.end(), std::string(kOutputMarker));
    if (marker == header.end())
      throw Error("no output columns designated: add a '|' marker column or name them explicitly");
    if (std::count(header.begin(), header.end(), std::string(kOutputMarker)) > 1)
      throw Error("more than one '|' marker column");
    auto m = static_cast<std::size_t>(marker - header.begin());
    role[m] = -1;
    for (std::size_t c = m + 1; c < header.size(); ++c) role[c] = 1;
  }

  Dataset ds;
  std::vector<std::size_t> in_cols, out_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (role[c] == 0) {
      in_cols.push_back(c);
      ds.dim_names.push_back(header[c]);
    } else if (role[c] == 1) {
      out_cols.push_back(c);
      ds.output_names.push_back(header[c]);
    }
  }
  if (out_cols.empty()) throw Error("no output columns");
  if (in_cols.empty()) throw Error("at least one input column is required");

  auto active = std::find(ds.output_names.begin(), ds.output_names.end(), active_output);
  if (active == ds.output_names.end())
    throw Error("unknown output column '" + std::string(active_output) + "'");
  ds.active_output = static_cast<std::size_t>(active - ds.output_names.begin());

  std::vector<std::vector<double>> rows;
  while (std::getline(source, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << header.size() << " cells, found "
          << cells.size();
      throw Error(msg.str());
    }
    const std::size_t row = rows.size() + 1;
    std::vector<double> values(header.size(), 0.0);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (role[c] < 0) continue;
      auto cell = cells[c];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        std::ostringstream msg;
        msg << "non-numeric value '" << cell << "' at (row " << row << ", col " << c + 1
            << ")";
        throw Error(msg.str());
      }
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "non-finite value at (row " << row << ", col " << c + 1 << ")";
        throw Error(msg.str());
      }
      values[c] = v;
    }
    rows.push_back(std::move(values));
  }
  if (rows.size() < 2) throw Error("at least two data rows are required");

  const auto n = static_cast<Eigen::Index>(rows.size());
  ds.inputs.resize(n, static_cast<Eigen::Index>(in_cols.size()));
  ds.outputs.resize(n, static_cast<Eigen::Index>(out_cols.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& values = rows[static_cast<std::size_t>(r)];
    for (std::size_t j = 0; j < in_cols.size(); ++j)
      ds.inputs(r, static_cast<Eigen::Index>(j)) = values[in_cols[j]];
    for (std::size_t j = 0; j < out_cols.size(); ++j)
      ds.outputs(r, static_cast<Eigen::Index>(j)) = values[out_cols[j]];
  }
  ds.raw_means.assign(in_cols.size() + out_cols.size(), 0.0);
  ds.raw_scales.assign(in_cols.size() + out_cols.size(), 1.0);
  return ds;
}

inline Dataset load_table(std::string_view text, std::string_view active_output,
                          std::span<const std::string> output_columns = {}) {
  std::istringstream in{std::string(text)};
  return load_table(in, active_output, output_columns);
}

namespace detail {

// Sum over sorted terms, so the result does not depend on row order.
inline double ordered_sum(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

// Shifts and scales one column in place; returns (mean, scale).
inline std::pair<double, double> standardize_column(Eigen::Ref<Eigen::VectorXd> col) {
  const double n = static_cast<double>(col.size());
  std::vector<double> terms(col.data(), col.data() + col.size());
  const double mean = ordered_sum(terms) / n;
  if (col.maxCoeff() == col.minCoeff()) {
    col.setZero();
    return {mean, 1.0};
  }
  col.array() -= mean;
  for (Eigen::Index i = 0; i < col.size(); ++i)
    terms[static_cast<std::size_t>(i)] = col[i] * col[i];
  const double sd = std::sqrt(ordered_sum(std::move(terms)) / n);
  if (sd == 0.0) {
    col.setZero();
    return {mean, 1.0};
  }
  col /= sd;
  return {mean, sd};
}

}  // namespace detail

/// Zero-mean, unit-variance copy of every input and output column.
///
/// Uses the population standard deviation. Constant columns become zeros
/// with a recorded scale of 1. Statistics compose with any previously
/// recorded ones, so standardizing twice is a no-op up to rounding and
/// `raw_means`/`raw_scales` always refer to the originally loaded values.
inline Dataset standardize(Dataset ds) {
  const std::size_t d = ds.d();
  auto fold = [&](std::size_t slot, std::pair<double, double> stats) {
    ds.raw_means[slot] += ds.raw_scales[slot] * stats.first;
    ds.raw_scales[slot] *= stats.second;
  };
  for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) {
    Eigen::VectorXd col = ds.inputs.col(j);
    auto stats = detail::standardize_column(col);
    ds.inputs.col(j) = col;
    fold(static_cast<std::size_t>(j), stats);
  }
  for (Eigen::Index j = 0; j < ds.outputs.cols(); ++j) {
    Eigen::VectorXd col = ds.outputs.col(j);
    auto stats = detail::standardize_column(col);
    ds.outputs.col(j) = col;
    fold(d + static_cast<std::size_t>(j), stats);
  }
  return ds;
}

/// Inputs mapped back through the recorded statistics.
inline Eigen::MatrixXd raw_inputs(const Dataset& ds) {
  Eigen::MatrixXd out = ds.inputs;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto s = static_cast<std::size_t>(j);
    out.col(j) = (out.col(j).array() * ds.raw_scales[s] + ds.raw_means[s]).matrix();
  }
  return out;
}

inline Eigen::MatrixXd raw_outputs(const Dataset& ds) {
  Eigen::MatrixXd out = ds.outputs;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const auto s = ds.d() + static_cast<std::size_t>(j);
    out.col(j) = (out.col(j).array() * ds.raw_scales[s] + ds.raw_means[s]).matrix();
  }
  return out;
}

inline double output_to_raw(const Dataset& ds, std::size_t col, double v) {
  return v * ds.output_scale(col) + ds.output_mean(col);
}

inline double output_from_raw(const Dataset& ds, std::size_t col, double v) {
  return (v - ds.output_mean(col)) / ds.output_scale(col);
}

}  // namespace regulus
