#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mmdmiss/baselines.hpp"
#include "mmdmiss/mechanisms.hpp"

using namespace mmdmiss;

namespace {

const double NA = not_available();

Dataset column(std::initializer_list<double> values) {
  std::vector<Observation> rows;
  for (double v : values) rows.emplace_back(Vector::Constant(1, v), Mask{false});
  return Dataset(1, rows);
}

}  // namespace

TEST(NormalHelpers, ReferenceValues) {
  EXPECT_NEAR(normal_cdf(0.0), 0.5, 1e-16);
  EXPECT_NEAR(normal_cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(normal_cdf(-3.0), 0.0013498980316300946, 1e-17);
  EXPECT_NEAR(normal_upper_tail(8.0), 6.22096057427178e-16, 1e-28);
  EXPECT_NEAR(normal_pdf(0.0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-16);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  for (double p : {1e-6, 0.02, 0.3, 0.5, 0.9})
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-14 + 1e-12 * p);
  EXPECT_THROW(normal_quantile(0.0), ParameterError);
}

TEST(TruncatedMleLimit, LeftTruncationAtZero) {
  EXPECT_NEAR(truncated_mle_limit(0.0), std::sqrt(2.0 / std::numbers::pi), 1e-14);
  EXPECT_NEAR(truncated_mle_limit(0.0), 0.797885, 5e-7);
}

TEST(TruncatedMleLimit, PositiveAndIncreasing) {
  double previous = 0.0;
  for (double a = -5.0; a <= 8.0; a += 0.25) {
    const double v = truncated_mle_limit(a);
    EXPECT_GT(v, previous);
    EXPECT_GT(v, a);
    previous = v;
  }
  EXPECT_NEAR(truncated_mle_limit(-1.0, 1.0), 0.0, 1e-15);
  EXPECT_THROW(truncated_mle_limit(1.0, 1.0), ParameterError);
}

TEST(IgnoringMle, PerCoordinateObservedMeans) {
  const Dataset data(2, {Observation((Vector(2) << 1, NA).finished(), Mask{false, true}),
                         Observation((Vector(2) << 3, NA).finished(), Mask{false, true}),
                         Observation((Vector(2) << NA, 8).finished(), Mask{true, false})});
  EXPECT_EQ(ignoring_mle_gaussian(data), (Vector(2) << 2, 8).finished());
}

TEST(IgnoringMle, CompleteDataGivesSampleMean) {
  Rng rng(3);
  const Matrix x = GaussianMeanModel(3).sample(Vector::Ones(3), 1000, rng);
  const Vector mean = x.colwise().mean().transpose();
  EXPECT_LT((ignoring_mle_gaussian(Dataset::complete(x)) - mean).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(IgnoringMle, UndefinedCoordinate) {
  const Dataset data(2, {Observation((Vector(2) << 1, NA).finished(), Mask{false, true})});
  try {
    ignoring_mle_gaussian(data);
    FAIL();
  } catch (const UndefinedCoordinateError& e) {
    EXPECT_EQ(e.coordinate(), 1u);
  }
  EXPECT_THROW(coordinate_median(data), UndefinedCoordinateError);
}

TEST(IgnoringMle, LeftTruncationLimitBySimulation) {
  Rng rng(8);
  const Matrix x = GaussianMeanModel(1).sample(Vector::Zero(1), 100000, rng);
  const auto masked = apply_mechanism(x, MechanismSpec::truncation(0.0), rng);
  EXPECT_NEAR(ignoring_mle_gaussian(masked.dataset)[0], 0.797885, 0.02);
}

TEST(CoordinateMedian, Examples) {
  EXPECT_EQ(coordinate_median(column({1, 2, 9}))[0], 2.0);
  EXPECT_EQ(coordinate_median(column({1, 3}))[0], 2.0);
  EXPECT_EQ(coordinate_median(column({9, 1, 2}))[0], 2.0);
}

TEST(CoordinateMedian, PermutationAndSymmetricPairInvariance) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> values(101);
  for (auto& v : values) v = normal(rng);
  auto build = [](const std::vector<double>& v) {
    std::vector<Observation> rows;
    for (double x : v) rows.emplace_back(Vector::Constant(1, x), Mask{false});
    return Dataset(1, rows);
  };
  const double m = coordinate_median(build(values))[0];
  std::shuffle(values.begin(), values.end(), rng);
  EXPECT_EQ(coordinate_median(build(values))[0], m);
  values.push_back(m - 3.0);
  values.push_back(m + 3.0);
  EXPECT_EQ(coordinate_median(build(values))[0], m);
}

TEST(AverageOfExtremes, Examples) {
  EXPECT_EQ(average_of_extremes(column({-3, 0, 5})), 1.0);
  EXPECT_EQ(average_of_extremes(column({2.5})), 2.5);
  EXPECT_THROW(average_of_extremes(Dataset(2, {Observation((Vector(2) << 1, 2).finished(), Mask{false, false})})),
               UnsupportedError);
  EXPECT_THROW(average_of_extremes(Dataset(1)), UndefinedCoordinateError);
}

TEST(RunBaseline, Dispatch) {
  const Dataset data = column({1, 2, 9});
  EXPECT_EQ(run_baseline(BaselineKind::ignoring_mle_gaussian, data)[0], 4.0);
  EXPECT_EQ(run_baseline(BaselineKind::coordinate_median, data)[0], 2.0);
  EXPECT_EQ(run_baseline(BaselineKind::average_of_extremes, data)[0], 5.0);
}
