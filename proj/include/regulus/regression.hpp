#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "regulus/error.hpp"
#include "regulus/json_util.hpp"

namespace regulus {

enum class FitKind { ols, ridge };

/// Which regression to fit. `lambda` applies to ridge only.
struct FitSpec {
  FitKind kind = FitKind::ridge;
  double lambda = 1.0;

  friend bool operator==(const FitSpec&, const FitSpec&) = default;
};

inline constexpr double kDefaultRidgeLambda = 1.0;

/// y~ = sum_i x_i * coefficients[i] + intercept
struct LinearModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  FitSpec spec;

  [[nodiscard]] std::size_t dims() const { return static_cast<std::size_t>(coefficients.size()); }

  [[nodiscard]] Eigen::VectorXd predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
    if (x.cols() != coefficients.size()) throw Error("model dimension does not match data");
    return (x * coefficients).array() + intercept;
  }
};

/// Closed-form least squares on centered data; the intercept is recovered
/// from the means and never penalized.
///
/// Ridge solves (Xc'Xc + lambda I) theta = Xc'yc. Ordinary least squares
/// (and ridge with lambda = 0) uses a rank-revealing solve of the same
/// normal equations, which yields the minimum-norm solution when the
/// system is singular or underdetermined.
inline LinearModel fit_model(const Eigen::Ref<const Eigen::MatrixXd>& x,
                             const Eigen::Ref<const Eigen::VectorXd>& y, FitSpec spec = {}) {
  if (x.rows() < 1) throw Error("cannot fit a model to zero points");
  if (x.rows() != y.size()) throw Error("input and output row counts differ");
  if (spec.kind == FitKind::ridge && !(spec.lambda >= 0.0))
    throw Error("ridge penalty must be non-negative");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  const Eigen::VectorXd rhs = xc.transpose() * yc;
  const double lambda = spec.kind == FitKind::ridge ? spec.lambda : 0.0;

  LinearModel model;
  model.spec = spec;
  if (lambda > 0.0) {
    gram.diagonal().array() += lambda;
    model.coefficients = gram.ldlt().solve(rhs);
  } else if (x.cols() > 0) {
    // Minimum-norm least squares on the centered design.
    model.coefficients = xc.completeOrthogonalDecomposition().solve(yc);
  } else {
    model.coefficients.resize(0);
  }
  model.intercept = y_mean - x_mean.dot(model.coefficients);
  return model;
}

/// Coefficient of determination from observations and predictions.
/// A zero-variance target scores 1.0 when predicted exactly and -inf
/// otherwise.
inline double r2_from_predictions(const Eigen::Ref<const Eigen::VectorXd>& y,
                                  const Eigen::Ref<const Eigen::VectorXd>& y_hat) {
  if (y.size() != y_hat.size()) throw Error("prediction count does not match observations");
  if (y.size() == 0) throw Error("cannot score an empty set");
  const double mean = y.mean();
  const double sse = (y - y_hat).squaredNorm();
  const double sst = (y.array() - mean).matrix().squaredNorm();
  if (sst == 0.0) return sse == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - sse / sst;
}

inline double r2_score(const LinearModel& model, const Eigen::Ref<const Eigen::MatrixXd>& x,
                       const Eigen::Ref<const Eigen::VectorXd>& y) {
  return r2_from_predictions(y, model.predict(x));
}

inline double sum_squared_error(const LinearModel& model,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const Eigen::Ref<const Eigen::VectorXd>& y) {
  return (y - model.predict(x)).squaredNorm();
}

/// One single-input model per dimension, model i fit on (x_i, y).
using DimModelVector = std::vector<LinearModel>;

inline DimModelVector fit_dim_models(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     FitSpec spec = {}) {
  DimModelVector models;
  models.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) models.push_back(fit_model(x.col(j), y, spec));
  return models;
}

/// Component i is the R^2 of models[i] on (x_i, y).
inline std::vector<double> dim_score_vector(const DimModelVector& models,
                                            const Eigen::Ref<const Eigen::MatrixXd>& x,
                                            const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (models.empty()) throw Error("empty model vector");
  if (static_cast<std::size_t>(x.cols()) != models.size())
    throw Error("model vector length does not match data dimension");
  std::vector<double> scores;
  scores.reserve(models.size());
  for (std::size_t j = 0; j < models.size(); ++j)
    scores.push_back(r2_score(models[j], x.col(static_cast<Eigen::Index>(j)), y));
  return scores;
}

/// a.b / (|a| |b|), or 0 when either vector is zero. Components are used as
/// given; negative scores are not clamped.
inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine similarity needs vectors of equal length");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  // Exact for identical vectors, where rounding would otherwise leave 1 - ulp.
  if (a == b) return 1.0;
  if (std::isinf(na) || std::isinf(nb)) {
    // Infinite components (-inf scores): compare directions of the signs.
    std::vector<double> sa(a.size()), sb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      sa[i] = std::isinf(a[i]) ? std::copysign(1.0, a[i]) : (std::isinf(na) ? 0.0 : a[i]);
      sb[i] = std::isinf(b[i]) ? std::copysign(1.0, b[i]) : (std::isinf(nb) ? 0.0 : b[i]);
    }
    return cosine_similarity(sa, sb);
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// ------------------------------------------------------- inverse curves

inline constexpr double kDefaultBandwidth = 0.3;
inline constexpr std::size_t kDefaultCurveSamples = 25;

/// Kernel-smoothed inputs as a function of the output level.
struct InverseCurve {
  std::vector<double> levels;              // strictly increasing output levels
  std::vector<std::vector<double>> mean;   // per level, d input coordinates
  std::vector<std::vector<double>> spread; // per level, d weighted std devs
  double bandwidth = kDefaultBandwidth;
};

/// Nadaraya-Watson estimate of E[x | y] with a Gaussian kernel at `samples`
/// equally spaced levels spanning [min y, max y], plus the kernel-weighted
/// standard deviation per dimension. A constant output yields a single
/// level at the input mean.
inline InverseCurve fit_inverse_curve(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                      const Eigen::Ref<const Eigen::VectorXd>& y,
                                      double bandwidth = kDefaultBandwidth,
                                      std::size_t samples = kDefaultCurveSamples) {
  if (x.rows() < 2) throw Error("inverse curve needs at least two points");
  if (x.rows() != y.size()) throw Error("input and output row counts differ");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) throw Error("bandwidth must be positive");
  if (samples < 2) throw Error("inverse curve needs at least two samples");

  const auto m = x.rows();
  const auto d = static_cast<std::size_t>(x.cols());
  InverseCurve curve;
  curve.bandwidth = bandwidth;

  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  auto weighted = [&](const Eigen::VectorXd& w) {
    const double total = w.sum();
    std::vector<double> mu(d), sd(d);
    for (std::size_t j = 0; j < d; ++j) {
      const auto col = x.col(static_cast<Eigen::Index>(j));
      mu[j] = w.dot(col) / total;
      const double var = w.dot((col.array() - mu[j]).square().matrix()) / total;
      sd[j] = std::sqrt(std::max(var, 0.0));
    }
    curve.mean.push_back(std::move(mu));
    curve.spread.push_back(std::move(sd));
  };

  if (hi == lo) {
    curve.levels.push_back(lo);
    weighted(Eigen::VectorXd::Ones(m));
    return curve;
  }
  const double two_h2 = 2.0 * bandwidth * bandwidth;
  Eigen::VectorXd logw(m);
  for (std::size_t s = 0; s < samples; ++s) {
    const double level =
        s + 1 == samples ? hi : lo + (hi - lo) * static_cast<double>(s) / static_cast<double>(samples - 1);
    curve.levels.push_back(level);
    logw = -(y.array() - level).square() / two_h2;
    // Shift by the maximum log-weight so distant levels do not underflow.
    const Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
    weighted(w);
  }
  return curve;
}

// ------------------------------------------------ coefficient display

enum class CoefficientNormalization { per_model, across_selection };

/// Coefficients scaled into [-1, 1] for bar display: by each model's own
/// largest |theta_i| or by the largest over all given models.
inline std::vector<std::vector<double>> normalize_coefficients(
    const std::vector<LinearModel>& models, CoefficientNormalization mode) {
  double global = 0.0;
  for (const auto& m : models) global = std::max(global, m.coefficients.cwiseAbs().maxCoeff());
  std::vector<std::vector<double>> out;
  out.reserve(models.size());
  for (const auto& m : models) {
    const double scale =
        mode == CoefficientNormalization::per_model ? m.coefficients.cwiseAbs().maxCoeff() : global;
    std::vector<double> row(m.dims());
    for (std::size_t i = 0; i < row.size(); ++i)
      row[i] = scale > 0.0 ? m.coefficients[static_cast<Eigen::Index>(i)] / scale : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

// ------------------------------------------------------------ JSON

inline std::string to_string(FitKind k) { return k == FitKind::ols ? "ols" : "ridge"; }

inline FitKind fit_kind_from_string(const std::string& s) {
  if (s == "ols") return FitKind::ols;
  if (s == "ridge") return FitKind::ridge;
  throw Error("unknown model kind '" + s + "'");
}

inline json to_json(const LinearModel& m) {
  std::vector<double> coef(m.coefficients.data(), m.coefficients.data() + m.coefficients.size());
  return json{{"kind", to_string(m.spec.kind)},
              {"lambda", m.spec.lambda},
              {"intercept", encode_real(m.intercept)},
              {"coefficients", encode_reals(coef)}};
}

inline LinearModel linear_model_from_json(const json& j) {
  LinearModel m;
  m.spec.kind = fit_kind_from_string(j.at("kind").get<std::string>());
  m.spec.lambda = j.at("lambda").get<double>();
  m.intercept = decode_real(j.at("intercept"));
  auto coef = decode_reals(j.at("coefficients"));
  m.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  return m;
}

inline json to_json(const InverseCurve& c) {
  json mean = json::array(), spread = json::array();
  for (const auto& row : c.mean) mean.push_back(encode_reals(row));
  for (const auto& row : c.spread) spread.push_back(encode_reals(row));
  return json{{"bandwidth", c.bandwidth},
              {"levels", encode_reals(c.levels)},
              {"mean", std::move(mean)},
              {"std", std::move(spread)}};
}

inline InverseCurve inverse_curve_from_json(const json& j) {
  InverseCurve c;
  c.bandwidth = j.at("bandwidth").get<double>();
  c.levels = decode_reals(j.at("levels"));
  for (const auto& row : j.at("mean")) c.mean.push_back(decode_reals(row));
  for (const auto& row : j.at("std")) c.spread.push_back(decode_reals(row));
  return c;
}

}  // namespace regulus
