#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"

namespace mmdmiss {

enum class BaselineKind { ignoring_mle_gaussian, coordinate_median, average_of_extremes };

// Standard normal helpers. erfc keeps full relative accuracy in both tails.

inline double normal_pdf(double x) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// 1 - Phi(x).
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal_quantile: probability must lie in (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

/// Limit of the ignoring MLE for N(theta*, 1) data with theta* = 0 observed only on (a, b):
/// E[X | a < X < b] = -(phi(b) - phi(a)) / (Phi(b) - Phi(a)). Pass b = +infinity for left truncation.
inline double truncated_mle_limit(double a, double b = std::numeric_limits<double>::infinity()) {
  if (!(a < b)) throw ParameterError("truncated_mle_limit: requires a < b");
  const double pdf_a = std::isinf(a) ? 0.0 : normal_pdf(a);
  const double pdf_b = std::isinf(b) ? 0.0 : normal_pdf(b);
  const double mass = a > 0.0 ? normal_upper_tail(a) - normal_upper_tail(b) : normal_cdf(b) - normal_cdf(a);
  return (pdf_a - pdf_b) / mass;
}

namespace detail {

inline std::vector<std::vector<double>> observed_columns(const Dataset& dataset) {
  std::vector<std::vector<double>> columns(dataset.dim());
  for (const auto& obs : dataset.observations())
    for (auto c : obs.pattern().observed()) columns[static_cast<std::size_t>(c)].push_back(obs.values()[c]);
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c].empty())
      throw UndefinedCoordinateError("coordinate " + std::to_string(c) + " is never observed", c);
  return columns;
}

inline double median_of(std::vector<double> values) {
  const auto n = values.size();
  auto upper = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), upper, values.end());
  if (n % 2 == 1) return *upper;
  const double lower = *std::max_element(values.begin(), upper);
  return 0.5 * (lower + *upper);
}

}  // namespace detail

/// Ignoring MLE of N(theta, I_d): the likelihood factorises per coordinate, giving the mean of the
/// observed entries of each coordinate.
inline Vector ignoring_mle_gaussian(const Dataset& dataset) {
  const auto columns = detail::observed_columns(dataset);
  Vector out(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double sum = 0.0;
    for (double v : columns[c]) sum += v;
    out[static_cast<Eigen::Index>(c)] = sum / static_cast<double>(columns[c].size());
  }
  return out;
}

/// Median of observed entries per coordinate (midpoint for even counts).
inline Vector coordinate_median(const Dataset& dataset) {
  auto columns = detail::observed_columns(dataset);
  Vector out(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) out[static_cast<Eigen::Index>(c)] = detail::median_of(std::move(columns[c]));
  return out;
}

/// Midrange (min + max) / 2 of the observed values; univariate data only.
inline double average_of_extremes(const Dataset& dataset) {
  if (dataset.dim() != 1) throw UnsupportedError("average_of_extremes: requires one-dimensional data");
  if (dataset.empty()) throw UndefinedCoordinateError("average_of_extremes: no observed value", 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& obs : dataset.observations()) {
    lo = std::min(lo, obs.values()[0]);
    hi = std::max(hi, obs.values()[0]);
  }
  return 0.5 * (lo + hi);
}

inline Vector run_baseline(BaselineKind kind, const Dataset& dataset) {
  switch (kind) {
    case BaselineKind::ignoring_mle_gaussian:
      return ignoring_mle_gaussian(dataset);
    case BaselineKind::coordinate_median:
      return coordinate_median(dataset);
    case BaselineKind::average_of_extremes: {
      Vector v(1);
      v << average_of_extremes(dataset);
      return v;
    }
  }
  throw UnsupportedError("unknown baseline");
}

}  // namespace mmdmiss
