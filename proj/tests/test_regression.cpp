#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace regulus;

namespace {

struct System {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
};

System random_system(std::mt19937_64& rng, std::size_t m, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  System s;
  s.x.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  s.y.resize(static_cast<Eigen::Index>(m));
  Eigen::VectorXd truth(static_cast<Eigen::Index>(d));
  for (auto& v : truth) v = g(rng);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < d; ++j) {
      s.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g(rng);
      row.push_back(s.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    s.y[static_cast<Eigen::Index>(i)] = s.x.row(static_cast<Eigen::Index>(i)).dot(truth) + 0.3 + 0.2 * g(rng);
    s.rows.push_back(std::move(row));
    s.ys.push_back(s.y[static_cast<Eigen::Index>(i)]);
  }
  return s;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(FitModel, ExactLineIsRecovered) {
  Eigen::MatrixXd x(5, 1);
  x << 0, 1, 2, 3, 4;
  const Eigen::VectorXd y = 2.0 * x.col(0).array() + 1.0;
  const auto m = fit_model(x, y, {FitKind::ols, 0.0});
  EXPECT_NEAR(m.coefficients[0], 2.0, 1e-10);
  EXPECT_NEAR(m.intercept, 1.0, 1e-10);
  EXPECT_NEAR(r2_score(m, x, y), 1.0, 1e-12);
}

TEST(FitModel, RidgeWithoutPenaltyEqualsOls) {
  std::mt19937_64 rng(1);
  const auto s = random_system(rng, 30, 4);
  const auto a = fit_model(s.x, s.y, {FitKind::ols, 0.0});
  const auto b = fit_model(s.x, s.y, {FitKind::ridge, 0.0});
  EXPECT_LE((a.coefficients - b.coefficients).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(a.intercept, b.intercept, 1e-10);
}

TEST(FitModel, SmallRidgeSystemMatchesNormalEquations) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 3, 1, 0, 5, 2, 2;
  Eigen::VectorXd y(4);
  y << 3, 4, 1, 7;
  const auto m = fit_model(x, y, {FitKind::ridge, 1.0});
  const auto o = oracle::normal_equations({{1, 2}, {3, 1}, {0, 5}, {2, 2}}, {3, 4, 1, 7}, 1.0);
  EXPECT_NEAR(m.coefficients[0], o.theta[0], 1e-8);
  EXPECT_NEAR(m.coefficients[1], o.theta[1], 1e-8);
  EXPECT_NEAR(m.intercept, o.intercept, 1e-8);
}

TEST(FitModel, UnderdeterminedOlsGivesMinimumNormInterpolant) {
  std::mt19937_64 rng(2);
  const auto s = random_system(rng, 4, 7);
  const auto m = fit_model(s.x, s.y, {FitKind::ols, 0.0});
  EXPECT_LE((m.predict(s.x) - s.y).cwiseAbs().maxCoeff(), 1e-9);
  // Minimum norm: the coefficients lie in the row space of the centered data.
  const Eigen::MatrixXd xc = s.x.rowwise() - s.x.colwise().mean();
  const Eigen::VectorXd proj = xc.transpose() * xc.transpose().completeOrthogonalDecomposition().solve(m.coefficients);
  EXPECT_LE((proj - m.coefficients).norm(), 1e-9 * std::max(1.0, m.coefficients.norm()));
}

TEST(FitModel, CollinearInputsStillFit) {
  Eigen::MatrixXd x(6, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  const Eigen::VectorXd y = x.col(0) * 3.0;
  const auto ols = fit_model(x, y, {FitKind::ols, 0.0});
  EXPECT_NEAR(r2_score(ols, x, y), 1.0, 1e-9);
  EXPECT_NEAR(ols.coefficients[1], 2.0 * ols.coefficients[0], 1e-9);  // minimum-norm split
  EXPECT_TRUE(fit_model(x, y).coefficients.allFinite());
}

TEST(FitModel, RejectsBadInput) {
  Eigen::MatrixXd x(0, 2);
  Eigen::VectorXd y(0);
  EXPECT_THROW(fit_model(x, y), Error);
  Eigen::MatrixXd x2(3, 1);
  x2 << 1, 2, 3;
  EXPECT_THROW(fit_model(x2, Eigen::VectorXd::Zero(2)), Error);
  EXPECT_THROW(fit_model(x2, Eigen::VectorXd::Zero(3), {FitKind::ridge, -1.0}), Error);
}

TEST(FitModel, MatchesOracleOnRandomSystems) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t d = 1 + rng() % 8, m = d + 2 + rng() % (49 - d);
    const auto s = random_system(rng, m, d);
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
      const auto fit = fit_model(s.x, s.y, lambda == 0.0 ? FitSpec{FitKind::ols, 0.0} : FitSpec{FitKind::ridge, lambda});
      const auto o = oracle::normal_equations(s.rows, s.ys, lambda);
      double scale = 1.0;
      for (double t : o.theta) scale = std::max(scale, std::abs(t));
      for (std::size_t j = 0; j < d; ++j)
        EXPECT_NEAR(fit.coefficients[static_cast<Eigen::Index>(j)], o.theta[j], 1e-8 * scale);
      EXPECT_NEAR(fit.intercept, o.intercept, 1e-8 * std::max(1.0, std::abs(o.intercept)));
    }
  }
}

TEST(FitModel, RidgeNormShrinksWithPenalty) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto s = random_system(rng, 10 + rng() % 30, 1 + rng() % 6);
    double last = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0, 100.0}) {
      const double norm = fit_model(s.x, s.y, {FitKind::ridge, lambda}).coefficients.norm();
      EXPECT_LE(norm, last * (1.0 + 1e-12));
      last = norm;
    }
  }
}

TEST(FitModel, OlsIsOptimalAmongPerturbedModels) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 0.1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_system(rng, 40, 3);
    const auto best = fit_model(s.x, s.y, {FitKind::ols, 0.0});
    const double r2 = r2_score(best, s.x, s.y);
    for (int k = 0; k < 20; ++k) {
      auto other = best;
      for (auto& c : other.coefficients) c += g(rng);
      other.intercept += g(rng);
      EXPECT_GE(r2, r2_score(other, s.x, s.y));
    }
  }
}

TEST(FitModel, FixedModelErrorGrowsWithPooling) {
  std::mt19937_64 rng(6);
  const auto a = random_system(rng, 30, 2);
  const auto b = random_system(rng, 20, 2);
  Eigen::MatrixXd x(50, 2);
  x << a.x, b.x;
  Eigen::VectorXd y(50);
  y << a.y, b.y;
  const auto model = fit_model(a.x, a.y);
  EXPECT_GE(sum_squared_error(model, x, y), sum_squared_error(model, a.x, a.y));
}

// ----------------------------------------------------------------- score

TEST(R2, DefinitionExamples) {
  Eigen::VectorXd y(3);
  y << 0, 1, 2;
  EXPECT_DOUBLE_EQ(r2_from_predictions(y, Eigen::VectorXd::Zero(3)), -1.5);
  EXPECT_DOUBLE_EQ(r2_from_predictions(y, y), 1.0);
  EXPECT_DOUBLE_EQ(r2_from_predictions(y, Eigen::VectorXd::Constant(3, 1.0)), 0.0);
}

TEST(R2, ZeroVarianceOutput) {
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 2.0);
  EXPECT_EQ(r2_from_predictions(y, y), 1.0);
  const double bad = r2_from_predictions(y, Eigen::VectorXd::Constant(4, 2.5));
  EXPECT_TRUE(std::isinf(bad) && bad < 0);
}

TEST(R2, MatchesFormula) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 3 + rng() % 60;
    Eigen::VectorXd y(static_cast<Eigen::Index>(m)), p(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
      y[static_cast<Eigen::Index>(i)] = g(rng);
      p[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(i)] + 0.5 * g(rng);
    }
    EXPECT_NEAR(r2_from_predictions(y, p), oracle::r2_formula(to_vec(y), to_vec(p)), 1e-12);
  }
}

// -------------------------------------------------------- dimension fits

TEST(DimScores, SeparatelyLinearDataScoresOne) {
  Eigen::MatrixXd x(6, 2);
  for (Eigen::Index i = 0; i < 6; ++i) x.row(i) << i, 2.0 * i;
  const Eigen::VectorXd y = 3.0 * x.col(0).array() + 1.0;
  const auto models = fit_dim_models(x, y, {FitKind::ols, 0.0});
  for (double s : dim_score_vector(models, x, y)) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(DimScores, IndependentColumnScoresNearZero) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(5000, 2);
  Eigen::VectorXd y(5000);
  for (Eigen::Index i = 0; i < 5000; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
    y[i] = x(i, 0) + 0.1 * g(rng);
  }
  const auto scores = dim_score_vector(fit_dim_models(x, y), x, y);
  EXPECT_GT(scores[0], 0.95);
  EXPECT_NEAR(scores[1], 0.0, 0.01);
}

TEST(DimScores, OneDimensionEqualsScalarFitness) {
  std::mt19937_64 rng(9);
  const auto s = random_system(rng, 25, 1);
  const auto scores = dim_score_vector(fit_dim_models(s.x, s.y), s.x, s.y);
  ASSERT_EQ(scores.size(), 1u);
  EXPECT_DOUBLE_EQ(scores[0], r2_score(fit_model(s.x, s.y), s.x, s.y));
}

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity({0.3, -0.2}, {0.3, -0.2}), 1.0);
  EXPECT_EQ(cosine_similarity({1, 0}, {0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity({1, 0}, {1, 1}), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_EQ(cosine_similarity({0, 0}, {1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity({1, 2}, {-1, -2}), -1.0);
  EXPECT_THROW(cosine_similarity({1}, {1, 2}), Error);
}

TEST(Cosine, BoundedSymmetricScaleInvariant) {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng() % 8), b;
    for (auto& v : a) v = g(rng);
    for (std::size_t i = 0; i < a.size(); ++i) b.push_back(g(rng));
    const double c = cosine_similarity(a, b);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_EQ(c, cosine_similarity(b, a));
    auto scaled = a;
    const double k = pos(rng);
    for (auto& v : scaled) v *= k;
    EXPECT_NEAR(cosine_similarity(scaled, b), c, 1e-12);
  }
}

TEST(Cosine, NegativeInfiniteScoresCompareBySign) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_DOUBLE_EQ(cosine_similarity({-inf, 0.5}, {-inf, 0.2}), 1.0);
  EXPECT_LT(cosine_similarity({-inf, 0.5}, {0.9, 0.8}), 0.0);
}

// ---------------------------------------------------------- inverse curve

TEST(InverseCurve, MatchesHandEvaluation) {
  Eigen::MatrixXd x(5, 1);
  x << 0.3, -1.2, 0.8, 2.0, 0.1;
  Eigen::VectorXd y(5);
  y << 0.0, 1.0, 0.5, 2.0, 1.5;
  const auto c = fit_inverse_curve(x, y, 0.5, 3);
  ASSERT_EQ(c.levels.size(), 3u);
  const std::vector<double> xs{0.3, -1.2, 0.8, 2.0, 0.1}, ys{0.0, 1.0, 0.5, 2.0, 1.5};
  const double levels[3] = {0.0, 1.0, 2.0};
  for (int s = 0; s < 3; ++s) {
    EXPECT_DOUBLE_EQ(c.levels[static_cast<std::size_t>(s)], levels[s]);
    const double mu = oracle::nadaraya_watson(xs, ys, levels[s], 0.5);
    EXPECT_NEAR(c.mean[static_cast<std::size_t>(s)][0], mu, 1e-12);
    std::vector<double> sq;
    for (double v : xs) sq.push_back((v - mu) * (v - mu));
    EXPECT_NEAR(c.spread[static_cast<std::size_t>(s)][0], std::sqrt(oracle::nadaraya_watson(sq, ys, levels[s], 0.5)), 1e-12);
  }
}

TEST(InverseCurve, CollinearPointsGiveCollinearCurve) {
  Eigen::MatrixXd x(201, 2);
  Eigen::VectorXd y(201);
  for (Eigen::Index i = 0; i < 201; ++i) {
    y[i] = i / 200.0;
    x.row(i) << 2.0 * y[i] + 1.0, -y[i];
  }
  const auto c = fit_inverse_curve(x, y, 0.02, 25);
  for (std::size_t s = 5; s < 20; ++s) {
    EXPECT_NEAR(c.mean[s][0], 2.0 * c.levels[s] + 1.0, 1e-6);
    EXPECT_NEAR(c.mean[s][1], -c.levels[s], 1e-6);
  }
}

TEST(InverseCurve, HugeBandwidthGivesInputMean) {
  std::mt19937_64 rng(11);
  const auto s = random_system(rng, 40, 3);
  const auto c = fit_inverse_curve(s.x, s.y, 1e8, 10);
  const Eigen::RowVectorXd mean = s.x.colwise().mean();
  for (const auto& level : c.mean)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(level[j], mean[static_cast<Eigen::Index>(j)], 1e-9);
}

TEST(InverseCurve, LevelsIncreaseAndSpreadIsNonNegative) {
  std::mt19937_64 rng(12);
  const auto s = random_system(rng, 60, 4);
  const auto c = fit_inverse_curve(s.x, s.y);
  ASSERT_EQ(c.levels.size(), kDefaultCurveSamples);
  EXPECT_EQ(c.levels.front(), s.y.minCoeff());
  EXPECT_EQ(c.levels.back(), s.y.maxCoeff());
  for (std::size_t i = 1; i < c.levels.size(); ++i) EXPECT_GT(c.levels[i], c.levels[i - 1]);
  for (const auto& row : c.spread)
    for (double v : row) EXPECT_GE(v, 0.0);
}

TEST(InverseCurve, ConstantOutputGivesSingleLevel) {
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 6;
  const auto c = fit_inverse_curve(x, Eigen::VectorXd::Constant(3, 4.0));
  ASSERT_EQ(c.levels.size(), 1u);
  EXPECT_DOUBLE_EQ(c.mean[0][0], 3.0);
}

TEST(Coefficients, NormalizationModes) {
  LinearModel a, b;
  a.coefficients = Eigen::Vector2d(2.0, -1.0);
  b.coefficients = Eigen::Vector2d(0.5, 4.0);
  const auto own = normalize_coefficients({a, b}, CoefficientNormalization::per_model);
  EXPECT_EQ(own[0], (std::vector<double>{1.0, -0.5}));
  EXPECT_EQ(own[1], (std::vector<double>{0.125, 1.0}));
  const auto all = normalize_coefficients({a, b}, CoefficientNormalization::across_selection);
  EXPECT_EQ(all[0], (std::vector<double>{0.5, -0.25}));
}

TEST(RegressionJson, RoundTrips) {
  std::mt19937_64 rng(13);
  const auto s = random_system(rng, 20, 3);
  const auto m = fit_model(s.x, s.y, {FitKind::ridge, 0.5});
  const auto back = linear_model_from_json(json::parse(to_json(m).dump()));
  EXPECT_EQ(back.coefficients, m.coefficients);
  EXPECT_EQ(back.intercept, m.intercept);
  EXPECT_EQ(back.spec, m.spec);
  const auto c = fit_inverse_curve(s.x, s.y);
  const auto cb = inverse_curve_from_json(json::parse(to_json(c).dump()));
  EXPECT_EQ(cb.levels, c.levels);
  EXPECT_EQ(cb.mean, c.mean);
  EXPECT_EQ(cb.spread, c.spread);
}
