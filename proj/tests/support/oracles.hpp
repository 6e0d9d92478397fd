#pragma once

// Independent reference computations for the tests. Nothing here calls the closed forms it is
// used to check.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mmdmiss/data.hpp"

namespace oracle {

using mmdmiss::Matrix;
using mmdmiss::Vector;

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t draws = 0;

  double relative_error(double reference) const { return std::abs(mean - reference) / std::abs(reference); }
};

/// Monte-Carlo mean of f() with at least `min_draws` draws, continued in blocks until the relative
/// standard error is at most `target_relative_se` (or `max_draws` is reached).
inline MeanEstimate sequential_mean(const std::function<double()>& f, std::size_t min_draws, double target_relative_se,
                                    std::size_t max_draws) {
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  auto take = [&](std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) {
      const double v = f();
      ++n;
      const double delta = v - mean;
      mean += delta / static_cast<double>(n);
      m2 += delta * (v - mean);
    }
  };
  auto se = [&] { return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)); };
  take(min_draws);
  while (n < max_draws && se() > target_relative_se * std::abs(mean)) take(min_draws);
  return {mean, se(), n};
}

/// Brute-force E exp(-|Y - Y'|^2 / gamma^2) for Y, Y' iid N(0, I_q).
inline MeanEstimate mc_expected_kernel_pair(double gamma2, std::size_t q, std::uint64_t seed, std::size_t min_draws,
                                            double target_relative_se = 0.0025, std::size_t max_draws = 100'000'000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  return sequential_mean(
      [&] {
        double s = 0.0;
        for (std::size_t c = 0; c < q; ++c) {
          const double diff = normal(rng) - normal(rng);
          s += diff * diff;
        }
        return std::exp(-s / gamma2);
      },
      min_draws, target_relative_se, max_draws);
}

/// Brute-force E exp(-|x - Y|^2 / gamma^2) for Y ~ N(mu, I_q), given offset = x - mu.
inline MeanEstimate mc_expected_kernel_point(double gamma2, const Vector& offset, std::uint64_t seed, std::size_t min_draws,
                                             double target_relative_se = 0.0025, std::size_t max_draws = 100'000'000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  return sequential_mean(
      [&] {
        double s = 0.0;
        for (Eigen::Index c = 0; c < offset.size(); ++c) {
          const double diff = offset[c] - normal(rng);
          s += diff * diff;
        }
        return std::exp(-s / gamma2);
      },
      min_draws, target_relative_se, max_draws);
}

/// Central finite difference of f at theta along every coordinate.
inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& theta, double h) {
  Vector g(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Vector up = theta;
    Vector down = theta;
    up[j] += h;
    down[j] -= h;
    g[j] = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

/// Direct double loop for the squared MMD V-statistic between two samples (rows are points).
inline double naive_mmd2(const Matrix& a, const Matrix& b, double gamma2) {
  auto k = [&](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) { return std::exp(-(x - y).squaredNorm() / gamma2); };
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.rows(); ++j) aa += k(a.row(i), a.row(j));
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) bb += k(b.row(i), b.row(j));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) ab += k(a.row(i), b.row(j));
  const double na = static_cast<double>(a.rows());
  const double nb = static_cast<double>(b.rows());
  return aa / (na * na) + bb / (nb * nb) - 2.0 * ab / (na * nb);
}

/// Ordinary least-squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace oracle
