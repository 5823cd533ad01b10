#pragma once

// Synthetic sample generators standing in for the datasets the method was
// demonstrated on, plus a CSV writer in the format load_table reads.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "regulus/dataset.hpp"

namespace regulus::synthetic {

struct Bump {
  std::vector<double> center;
  double amplitude = 1.0;
  double sigma = 0.15;
};

inline double bumps_value(const std::vector<Bump>& bumps, const double* x, std::size_t d) {
  double f = 0.0;
  for (const auto& b : bumps) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) r2 += (x[j] - b.center[j]) * (x[j] - b.center[j]);
    f += b.amplitude * std::exp(-r2 / (2.0 * b.sigma * b.sigma));
  }
  return f;
}

/// Four Gaussian bumps on [0,1]^2, amplitudes 1.0, 0.9, 0.8, 0.7, sigma 0.15.
inline std::vector<Bump> four_bumps() {
  return {{{0.16, 0.06}, 1.0, 0.15},
          {{0.84, 0.06}, 0.9, 0.15},
          {{0.16, 0.74}, 0.8, 0.15},
          {{0.84, 0.74}, 0.7, 0.15}};
}

inline Dataset make_dataset(Eigen::MatrixXd x, Eigen::VectorXd y, std::string output = "f") {
  Dataset ds;
  ds.inputs = std::move(x);
  ds.outputs = y;
  for (Eigen::Index j = 0; j < ds.inputs.cols(); ++j) ds.dim_names.push_back("x" + std::to_string(j + 1));
  ds.output_names = {std::move(output)};
  ds.raw_means.assign(ds.d() + 1, 0.0);
  ds.raw_scales.assign(ds.d() + 1, 1.0);
  return ds;
}

/// Uniform samples of a bump sum on [0,1]^d with Gaussian output noise.
inline Dataset sample_bumps(const std::vector<Bump>& bumps, std::size_t n, double noise,
                            std::uint64_t seed) {
  const std::size_t d = bumps.front().center.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) row[j] = unit(rng);
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < d; ++j) x(r, static_cast<Eigen::Index>(j)) = row[j];
    y[r] = bumps_value(bumps, row.data(), d) + noise * gauss(rng);
  }
  return make_dataset(std::move(x), std::move(y));
}

inline Dataset four_bump_samples(std::uint64_t seed, std::size_t n = 2000, double noise = 0.01) {
  return sample_bumps(four_bumps(), n, noise, seed);
}

/// One input: a long segment of slope +1 followed, over a disjoint x range,
/// by a short segment of slope -1 continuing from its end.
inline Dataset two_segments(std::size_t n_long = 1000, std::size_t n_short = 30) {
  const std::size_t n = n_long + n_short;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  const double step = 1.0 / static_cast<double>(n_long);
  for (std::size_t i = 0; i < n_long; ++i) {
    const double xi = step * static_cast<double>(i);
    x(static_cast<Eigen::Index>(i), 0) = xi;
    y[static_cast<Eigen::Index>(i)] = xi;
  }
  const double top = step * static_cast<double>(n_long - 1);
  for (std::size_t i = 0; i < n_short; ++i) {
    const double dx = step * static_cast<double>(i + 1);
    const auto r = static_cast<Eigen::Index>(n_long + i);
    x(r, 0) = top + dx;
    y[r] = top - dx;
  }
  return make_dataset(std::move(x), std::move(y), "y");
}

/// Stand-in for a 10-species combustion table: a few broad bumps over
/// [0,1]^d, a linear trend and noise.
inline Dataset combustion_analog(std::size_t n = 5172, std::size_t d = 10, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Bump> bumps;
  for (int b = 0; b < 4; ++b) {
    Bump bump;
    for (std::size_t j = 0; j < d; ++j) bump.center.push_back(0.2 + 0.6 * unit(rng));
    bump.amplitude = 0.6 + 0.4 * unit(rng);
    bump.sigma = 0.35;
    bumps.push_back(std::move(bump));
  }
  std::vector<double> trend(d);
  for (auto& t : trend) t = 0.3 * (unit(rng) - 0.5);

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<double> row(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    double lin = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      row[j] = unit(rng);
      x(r, static_cast<Eigen::Index>(j)) = row[j];
      lin += trend[j] * row[j];
    }
    y[r] = bumps_value(bumps, row.data(), d) + lin + 0.01 * gauss(rng);
  }
  Dataset ds = make_dataset(std::move(x), std::move(y), "temperature");
  for (std::size_t j = 0; j < d; ++j) ds.dim_names[j] = "species" + std::to_string(j + 1);
  return ds;
}

/// Regular grid over [0,1]^2 of cos(pi x) cos(pi y) plus a small tilt: two
/// maxima at (0,0), (1,1), two minima at (1,0), (0,1) and four cells. The
/// tilt makes all four extremum values distinct.
inline Dataset saddle_grid(std::size_t side = 21, double tilt = 0.05) {
  const std::size_t n = side * side;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  const double pi = 3.14159265358979323846;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      const auto r = static_cast<Eigen::Index>(i * side + j);
      const double a = static_cast<double>(i) / static_cast<double>(side - 1);
      const double b = static_cast<double>(j) / static_cast<double>(side - 1);
      x(r, 0) = a;
      x(r, 1) = b;
      y[r] = std::cos(pi * a) * std::cos(pi * b) + tilt * (a - 0.3 * b);
    }
  return make_dataset(std::move(x), std::move(y));
}

/// Writes raw (de-standardized) values with a "|" column before the outputs.
inline void write_table(std::ostream& out, const Dataset& ds) {
  const Eigen::MatrixXd in = raw_inputs(ds), outp = raw_outputs(ds);
  for (const auto& name : ds.dim_names) out << name << ',';
  out << '|';
  for (const auto& name : ds.output_names) out << ',' << name;
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    for (Eigen::Index c = 0; c < in.cols(); ++c) out << in(r, c) << ',';
    for (Eigen::Index c = 0; c < outp.cols(); ++c) out << ',' << outp(r, c);
    out << '\n';
  }
}

}  // namespace regulus::synthetic
