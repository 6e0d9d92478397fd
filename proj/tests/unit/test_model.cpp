#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/oracles.hpp"
#include "mmdmiss/model.hpp"

using namespace mmdmiss;

TEST(GaussianMeanModel, SampleMomentsAtZero) {
  constexpr std::size_t n = 1'000'000;
  Rng rng(2024);
  const Matrix y = GaussianMeanModel(2).sample(Vector::Zero(2), n, rng);
  const Eigen::RowVectorXd mean = y.colwise().mean();
  for (Eigen::Index c = 0; c < 2; ++c) {
    EXPECT_LT(std::abs(mean[c]), 4.0 / std::sqrt(static_cast<double>(n)));
    const double var = (y.col(c).array() - mean[c]).square().sum() / static_cast<double>(n - 1);
    EXPECT_NEAR(var, 1.0, 0.02);
  }
}

TEST(GaussianMeanModel, SampleShiftsByTheta) {
  Rng rng(5);
  const Vector theta = (Vector(3) << 10.0, -4.0, 0.5).finished();
  const Matrix y = GaussianMeanModel(3).sample(theta, 20000, rng);
  for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(y.col(c).mean(), theta[c], 4.0 / std::sqrt(20000.0));
}

TEST(GaussianMeanModel, SameSeedSameDraws) {
  Rng a(9), b(9);
  const GaussianMeanModel model(4);
  EXPECT_EQ(model.sample(Vector::Ones(4), 100, a), model.sample(Vector::Ones(4), 100, b));
}

TEST(GaussianMeanModel, GradientExamples) {
  const GaussianMeanModel model(2);
  const Vector theta = (Vector(2) << 0.3, -0.2).finished();
  EXPECT_EQ(model.grad_log_density(theta, theta), Vector::Zero(2));
  EXPECT_EQ(model.grad_log_density(Vector::Zero(2), (Vector(2) << 1.0, -2.0).finished()), (Vector(2) << 1.0, -2.0).finished());
}

TEST(GaussianMeanModel, GradientMatchesFiniteDifferences) {
  const GaussianMeanModel model(3);
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    Vector theta(3), y(3);
    for (int c = 0; c < 3; ++c) {
      theta[c] = normal(rng);
      y[c] = normal(rng);
    }
    const Vector fd = oracle::central_difference([&](const Vector& th) { return model.log_density(th, y); }, theta, 1e-4);
    EXPECT_LT((fd - model.grad_log_density(theta, y)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(GaussianMeanModel, ShapeAndParameterErrors) {
  const GaussianMeanModel model(2);
  Rng rng(1);
  EXPECT_THROW(model.sample(Vector::Zero(3), 5, rng), InputShapeError);
  EXPECT_THROW(model.sample(Vector::Zero(2), 0, rng), InputShapeError);
  EXPECT_THROW(model.grad_log_density(Vector::Zero(2), Vector::Zero(1)), InputShapeError);
  EXPECT_THROW(GaussianMeanModel(0), InputShapeError);
  EXPECT_THROW(GaussianMeanModel(2, 0.0), ParameterError);
  EXPECT_THROW(GaussianMeanModel(2, std::numeric_limits<double>::infinity()), ParameterError);
}

TEST(ProjectBox, Examples) {
  const Vector inside = (Vector(2) << 1.0, -2.0).finished();
  EXPECT_EQ(project_box(inside, 3.0), inside);
  EXPECT_EQ(project_box((Vector(2) << 5.0, -7.0).finished(), 3.0), (Vector(2) << 3.0, -3.0).finished());
  EXPECT_THROW(project_box(inside, 0.0), ParameterError);
}

TEST(ProjectBox, IdempotentAndInsideTheBox) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int t = 0; t < 200; ++t) {
    Vector theta(4);
    for (int c = 0; c < 4; ++c) theta[c] = normal(rng);
    const Vector once = project_box(theta, 7.5);
    EXPECT_EQ(project_box(once, 7.5), once);
    EXPECT_LE(once.cwiseAbs().maxCoeff(), 7.5);
  }
}
