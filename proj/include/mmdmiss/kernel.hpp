#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"

namespace mmdmiss {

enum class KernelFamily { gaussian };

/// Gaussian kernel k(x, y) = exp(-|x - y|^2 / gamma^2). Dimension independent: the same
/// spec is evaluated on subvectors of any length.
struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double gamma = 1.0;

  static KernelSpec gaussian(double gamma) {
    KernelSpec spec{KernelFamily::gaussian, gamma};
    spec.validate();
    return spec;
  }

  void validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
      throw ParameterError("kernel bandwidth must be positive and finite, got " + std::to_string(gamma));
  }

  double gamma2() const noexcept { return gamma * gamma; }
};

inline double eval_kernel(const KernelSpec& spec, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  spec.validate();
  if (x.size() == 0 || y.size() == 0) throw InputShapeError("eval_kernel: empty vector");
  if (x.size() != y.size())
    throw InputShapeError("eval_kernel: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()));
  return std::exp(-(x - y).squaredNorm() / spec.gamma2());
}

namespace detail {

/// Sum over all (i, j) of k(a_i, b_j); rows are points.
inline double kernel_sum(const Matrix& a, const Matrix& b, double inv_gamma2) {
  Eigen::ArrayXd dist2(a.rows());
  double total = 0.0;
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    dist2.setZero();
    for (Eigen::Index c = 0; c < a.cols(); ++c) dist2 += (a.col(c).array() - b(j, c)).square();
    total += (-inv_gamma2 * dist2).exp().sum();
  }
  return total;
}

inline void check_sample(const Matrix& s, const char* what) {
  if (s.rows() == 0) throw InputShapeError(std::string(what) + ": empty sample");
  if (s.cols() == 0) throw InputShapeError(std::string(what) + ": zero-length vectors");
}

/// Strict weak order on matrices used to canonicalise argument order.
inline bool lexicographically_less(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) return a.rows() < b.rows();
  if (a.cols() != b.cols()) return a.cols() < b.cols();
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      if (a(i, c) != b(i, c)) return a(i, c) < b(i, c);
  return false;
}

}  // namespace detail

/// Plug-in (V-statistic) squared MMD between two samples, one point per row.
/// Arguments are put in a canonical order first, so the result is exactly symmetric.
inline double mmd2_empirical(const KernelSpec& spec, const Matrix& sample_a, const Matrix& sample_b) {
  spec.validate();
  detail::check_sample(sample_a, "mmd2_empirical");
  detail::check_sample(sample_b, "mmd2_empirical");
  if (sample_a.cols() != sample_b.cols()) throw InputShapeError("mmd2_empirical: samples differ in dimension");

  const bool swap = detail::lexicographically_less(sample_b, sample_a);
  const Matrix& a = swap ? sample_b : sample_a;
  const Matrix& b = swap ? sample_a : sample_b;
  const double g = 1.0 / spec.gamma2();
  const double na = static_cast<double>(a.rows());
  const double nb = static_cast<double>(b.rows());
  return detail::kernel_sum(a, a, g) / (na * na) + detail::kernel_sum(b, b, g) / (nb * nb) -
         2.0 * detail::kernel_sum(a, b, g) / (na * nb);
}

/// Per-observation loss (1/S^2) sum k(y_j, y_j') - (2/S) sum k(x, y_j), without the constant k(x, x).
inline double mmd2_point_criterion(const KernelSpec& spec, const Matrix& model_sample, const Eigen::Ref<const Vector>& x) {
  spec.validate();
  detail::check_sample(model_sample, "mmd2_point_criterion");
  if (model_sample.cols() != x.size()) throw InputShapeError("mmd2_point_criterion: point and sample differ in dimension");
  const double g = 1.0 / spec.gamma2();
  const double s = static_cast<double>(model_sample.rows());
  const Matrix point = x.transpose();
  return detail::kernel_sum(model_sample, model_sample, g) / (s * s) - 2.0 * detail::kernel_sum(model_sample, point, g) / s;
}

// ---------------------------------------------------------------------------
// Closed forms for N(mu, I) models under the Gaussian kernel.

/// E k(Y, Y') for Y, Y' iid N(mu, I_q).
inline double gaussian_expected_kernel_pair(double gamma2, std::size_t q) {
  return std::pow(gamma2 / (gamma2 + 4.0), 0.5 * static_cast<double>(q));
}

/// E k(x, Y) for Y ~ N(mu, I_q), given |x - mu|^2.
inline double gaussian_expected_kernel_point(double gamma2, std::size_t q, double dist2) {
  return std::pow(gamma2 / (gamma2 + 2.0), 0.5 * static_cast<double>(q)) * std::exp(-dist2 / (gamma2 + 2.0));
}

/// Squared MMD between N(theta, I_q) and N(theta', I_q).
inline double gaussian_mmd2_closed_form(const Eigen::Ref<const Vector>& theta, const Eigen::Ref<const Vector>& theta_prime,
                                        double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("gaussian_mmd2_closed_form: gamma must be positive");
  if (theta.size() != theta_prime.size()) throw InputShapeError("gaussian_mmd2_closed_form: parameter lengths differ");
  const double g2 = gamma * gamma;
  const auto q = static_cast<std::size_t>(theta.size());
  // 1 - exp(-t) via expm1 keeps precision for nearby parameters.
  return -2.0 * gaussian_expected_kernel_pair(g2, q) * std::expm1(-(theta - theta_prime).squaredNorm() / (4.0 + g2));
}

inline double gaussian_mmd2_closed_form(double theta, double theta_prime, double gamma) {
  Vector a(1), b(1);
  a << theta;
  b << theta_prime;
  return gaussian_mmd2_closed_form(a, b, gamma);
}

/// Supremum of gaussian_mmd2_closed_form over parameter pairs (univariate case).
inline double gaussian_mmd2_supremum(double gamma) {
  const double g2 = gamma * gamma;
  return 2.0 * std::sqrt(g2 / (4.0 + g2));
}

/// Inverts the univariate closed form: |theta - theta'| as a function of the squared MMD.
/// Returns +infinity once mmd2 reaches the supremum.
inline double gaussian_parameter_distance(double mmd2, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("gaussian_parameter_distance: gamma must be positive");
  if (mmd2 <= 0.0) return 0.0;
  const double g2 = gamma * gamma;
  const double inner = 1.0 - 0.5 * std::sqrt((4.0 + g2) / g2) * mmd2;
  if (inner <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(-(4.0 + g2) * std::log(inner));
}

/// Exact-expectation version of the missing-data MMD criterion for the N(theta, I_d) model.
inline double gaussian_criterion_oracle(const Eigen::Ref<const Vector>& theta, const Dataset& dataset, const KernelSpec& spec) {
  spec.validate();
  if (dataset.empty()) throw InputShapeError("gaussian_criterion_oracle: empty dataset");
  if (static_cast<std::size_t>(theta.size()) != dataset.dim())
    throw InputShapeError("gaussian_criterion_oracle: parameter length differs from data dimension");
  const double g2 = spec.gamma2();
  double total = 0.0;
  for (const auto& block : dataset.blocks()) {
    const auto q = block.pattern.n_observed();
    const Vector center = theta(block.pattern.observed());
    const double pair = gaussian_expected_kernel_pair(g2, q);
    for (Eigen::Index r = 0; r < block.values.rows(); ++r) {
      const double dist2 = (block.values.row(r).transpose() - center).squaredNorm();
      total += pair - 2.0 * gaussian_expected_kernel_point(g2, q, dist2);
    }
  }
  return total / static_cast<double>(dataset.size());
}

// ---------------------------------------------------------------------------
// Median heuristic adapted to missing values.

namespace detail {

/// Calls f(value) for every pair i < j with at least one commonly observed coordinate,
/// value = d * |x_i - x_j|^2 / |common| over the common coordinates.
template <class F>
void for_each_pair_distance(const Dataset& dataset, F&& f) {
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.dim();
  const double dd = static_cast<double>(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& xi = dataset[i];
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& xj = dataset[j];
      double sum = 0.0;
      std::size_t common = 0;
      for (std::size_t c = 0; c < d; ++c) {
        if (xi.pattern().is_missing(c) || xj.pattern().is_missing(c)) continue;
        const double diff = xi.values()[static_cast<Eigen::Index>(c)] - xj.values()[static_cast<Eigen::Index>(c)];
        sum += diff * diff;
        ++common;
      }
      if (common > 0) f(dd * sum / static_cast<double>(common));
    }
  }
}

/// k-th smallest (0-based) pair value. Holds at most `buffer_limit` values in memory,
/// narrowing the search interval by bisection with counting passes when needed.
inline double kth_pair_distance(const Dataset& dataset, std::size_t k, double lo, double hi, std::size_t buffer_limit) {
  std::size_t below = 0;  // values < lo
  while (true) {
    std::size_t in_range = 0;
    for_each_pair_distance(dataset, [&](double v) { in_range += (v >= lo && v <= hi); });
    if (in_range <= buffer_limit) {
      std::vector<double> buf;
      buf.reserve(in_range);
      for_each_pair_distance(dataset, [&](double v) {
        if (v >= lo && v <= hi) buf.push_back(v);
      });
      auto nth = buf.begin() + static_cast<std::ptrdiff_t>(k - below);
      std::nth_element(buf.begin(), nth, buf.end());
      return *nth;
    }
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) {
      std::size_t at_lo = 0;
      for_each_pair_distance(dataset, [&](double v) { at_lo += (v == lo); });
      return k - below < at_lo ? lo : hi;
    }
    std::size_t lower = 0;
    for_each_pair_distance(dataset, [&](double v) { lower += (v >= lo && v < mid); });
    if (k - below < lower) {
      hi = mid;
    } else {
      below += lower;
      lo = mid;
    }
  }
}

}  // namespace detail

/// Bandwidth gamma with gamma^2 = median over observation pairs of d |x_i - x_j|^2 / |m_ij| on the
/// commonly observed coordinates m_ij (pairs without overlap are skipped; even counts use the midpoint).
inline double median_heuristic_bandwidth(const Dataset& dataset, std::size_t buffer_limit = std::size_t{1} << 22) {
  std::size_t count = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  detail::for_each_pair_distance(dataset, [&](double v) {
    ++count;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  });
  if (count == 0) throw BandwidthUndefinedError("median heuristic: no pair of observations shares an observed coordinate");

  const std::size_t k_low = (count - 1) / 2;
  const std::size_t k_high = count / 2;
  const double a = detail::kth_pair_distance(dataset, k_low, lo, hi, buffer_limit);
  const double b = k_high == k_low ? a : detail::kth_pair_distance(dataset, k_high, lo, hi, buffer_limit);
  const double gamma2 = 0.5 * (a + b);
  if (!(gamma2 > 0.0)) throw BandwidthUndefinedError("median heuristic: median pairwise distance is zero");
  return std::sqrt(gamma2);
}

}  // namespace mmdmiss
