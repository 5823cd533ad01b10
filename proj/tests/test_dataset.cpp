#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "regulus/dataset.hpp"
#include "regulus/synthetic.hpp"

using namespace regulus;

namespace {

Dataset raw_column(std::vector<double> values) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = values[i];
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(x.rows(), 0.0, 1.0);
  return synthetic::make_dataset(std::move(x), std::move(y));
}

Dataset random_raw(std::uint64_t seed, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(3.0, 5.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
    y[i] = 100.0 + 20.0 * g(rng);
  }
  return synthetic::make_dataset(std::move(x), std::move(y));
}

}  // namespace

TEST(LoadTable, ParsesMarkerColumnLayout) {
  const auto ds = load_table("a,b,|,f\n1,2,,3\n4,5,,6\n7,8,,9\n", "f");
  EXPECT_EQ(ds.n(), 3u);
  EXPECT_EQ(ds.d(), 2u);
  EXPECT_EQ(ds.dim_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.output_names, (std::vector<std::string>{"f"}));
  EXPECT_DOUBLE_EQ(ds.inputs(2, 1), 8.0);
  EXPECT_DOUBLE_EQ(ds.y()[1], 6.0);
}

TEST(LoadTable, NamedOutputsOverrideMarker) {
  const std::vector<std::string> outs{"g", "f"};
  const auto ds = load_table("a,f,g\n1,2,3\n4,5,6\n", "g", outs);
  EXPECT_EQ(ds.d(), 1u);
  EXPECT_EQ(ds.output_count(), 2u);
  EXPECT_EQ(ds.output_names, (std::vector<std::string>{"f", "g"}));
  EXPECT_EQ(ds.active_output, 1u);
  EXPECT_DOUBLE_EQ(ds.y()[1], 6.0);
}

TEST(LoadTable, RejectsNonFiniteCell) {
  try {
    load_table("a,|,f\n1,,2\nnan,,3\n", "f");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "non-finite value at (row 2, col 1)");
  }
}

TEST(LoadTable, RejectsMalformedInput) {
  EXPECT_THROW(load_table("", "f"), Error);
  EXPECT_THROW(load_table("a,f\n1,2\n3,4\n", "f"), Error);         // no outputs designated
  EXPECT_THROW(load_table("a,|,f\n1,,2\n", "f"), Error);           // one row
  EXPECT_THROW(load_table("a,|,f\n1,,2\n3,,x\n", "f"), Error);     // non-numeric
  EXPECT_THROW(load_table("a,|,f\n1,,2\n3,,4,5\n", "f"), Error);   // ragged
  EXPECT_THROW(load_table("a,|,f\n1,,2\n3,,4\n", "g"), Error);     // unknown output
  EXPECT_THROW(load_table("a,a,|,f\n1,1,,2\n3,3,,4\n", "f"), Error);
  EXPECT_THROW(load_table("|,f\n,2\n,4\n", "f"), Error);           // no inputs
}

TEST(LoadTable, ReadsCombustionScaleTable) {
  std::ostringstream s;
  synthetic::write_table(s, synthetic::combustion_analog());
  const auto ds = load_table(s.str(), "temperature");
  EXPECT_EQ(ds.n(), 5172u);
  EXPECT_EQ(ds.d(), 10u);
}

TEST(Standardize, TwoValueColumnMapsToMinusOnePlusOne) {
  const auto ds = standardize(raw_column({0.0, 2.0}));
  EXPECT_DOUBLE_EQ(ds.inputs(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(ds.inputs(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(ds.raw_means[0], 1.0);
  EXPECT_DOUBLE_EQ(ds.raw_scales[0], 1.0);
}

TEST(Standardize, ConstantColumnBecomesZerosWithUnitScale) {
  const auto ds = standardize(raw_column({5.0, 5.0, 5.0}));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(ds.inputs(i, 0), 0.0);
  EXPECT_EQ(ds.raw_scales[0], 1.0);
  EXPECT_EQ(ds.raw_means[0], 5.0);
}

TEST(Standardize, NormalizedColumnIsUnchanged) {
  const auto ds = standardize(raw_column({-1.0, 1.0, -1.0, 1.0}));
  EXPECT_NEAR(ds.inputs(0, 0), -1.0, 1e-12);
  EXPECT_NEAR(ds.inputs(3, 0), 1.0, 1e-12);
}

TEST(Standardize, MomentsMatchFormula) {
  const auto ds = standardize(random_raw(3, 200, 3));
  for (Eigen::Index j = 0; j < 3; ++j) {
    const auto c = ds.inputs.col(j);
    const double mean = c.mean();
    const double var = (c.array() - mean).square().sum() / static_cast<double>(c.size());
    EXPECT_NEAR(mean, 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
  }
}

TEST(Standardize, IsIdempotentAndRoundTrips) {
  const auto raw = random_raw(7, 150, 4);
  const auto once = standardize(raw);
  const auto twice = standardize(once);
  EXPECT_LE((once.inputs - twice.inputs).cwiseAbs().maxCoeff(), 1e-9);
  const Eigen::MatrixXd back = raw_inputs(twice);
  for (Eigen::Index i = 0; i < back.rows(); ++i)
    for (Eigen::Index j = 0; j < back.cols(); ++j)
      EXPECT_NEAR(back(i, j), raw.inputs(i, j), 1e-9 * std::max(1.0, std::abs(raw.inputs(i, j))));
  const Eigen::MatrixXd outs = raw_outputs(once);
  for (Eigen::Index i = 0; i < outs.rows(); ++i)
    EXPECT_NEAR(outs(i, 0), raw.outputs(i, 0), 1e-9 * std::abs(raw.outputs(i, 0)));
  EXPECT_NEAR(output_from_raw(once, 0, output_to_raw(once, 0, 0.37)), 0.37, 1e-12);
}

TEST(Standardize, CommutesWithRowPermutation) {
  const auto raw = random_raw(11, 97, 2);
  std::vector<Eigen::Index> perm(97);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
  Dataset shuffled = raw;
  for (Eigen::Index i = 0; i < 97; ++i) {
    shuffled.inputs.row(i) = raw.inputs.row(perm[static_cast<std::size_t>(i)]);
    shuffled.outputs.row(i) = raw.outputs.row(perm[static_cast<std::size_t>(i)]);
  }
  const auto a = standardize(raw);
  const auto b = standardize(shuffled);
  for (Eigen::Index i = 0; i < 97; ++i) {
    EXPECT_EQ(b.inputs.row(i), a.inputs.row(perm[static_cast<std::size_t>(i)]));
    EXPECT_EQ(b.outputs.row(i), a.outputs.row(perm[static_cast<std::size_t>(i)]));
  }
}
