#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"

namespace mmdmiss {

/// Seeded generator used throughout. Never shared between threads.
using Rng = std::mt19937_64;

/// Capabilities the stochastic gradient fit needs from a parametric model {P_theta}:
/// sampling, the score grad_theta log p_theta(y), and projection onto the parameter set.
///
/// Regularity conditions for consistency (compact parameter set, identifiability,
/// differentiability under the integral) are the model author's unchecked contract.
template <class M>
concept GenerativeModel = requires(const M& model, const Vector& theta, const Vector& y, std::size_t count, Rng& rng) {
  { model.param_dim() } -> std::convertible_to<std::size_t>;
  { model.data_dim() } -> std::convertible_to<std::size_t>;
  { model.sample(theta, count, rng) } -> std::convertible_to<Matrix>;
  { model.grad_log_density(theta, y) } -> std::convertible_to<Vector>;
  { model.project_params(theta) } -> std::convertible_to<Vector>;
};

/// Componentwise clamp onto [-radius, radius]^p.
inline Vector project_box(const Eigen::Ref<const Vector>& theta, double radius) {
  if (!(radius > 0.0)) throw ParameterError("project_box: radius must be positive");
  return theta.cwiseMax(-radius).cwiseMin(radius);
}

/// N(theta, I_d) with theta restricted to the box [-R, R]^d.
class GaussianMeanModel {
 public:
  static constexpr double default_box_radius = 100.0;

  explicit GaussianMeanModel(std::size_t d, double box_radius = default_box_radius) : d_(d), radius_(box_radius) {
    if (d_ == 0) throw InputShapeError("GaussianMeanModel: dimension must be >= 1");
    if (!(radius_ > 0.0) || !std::isfinite(radius_))
      throw ParameterError("GaussianMeanModel: box radius must be positive and finite");
  }

  std::size_t param_dim() const noexcept { return d_; }
  std::size_t data_dim() const noexcept { return d_; }
  double box_radius() const noexcept { return radius_; }

  /// `count` iid draws, one per row.
  Matrix sample(const Vector& theta, std::size_t count, Rng& rng) const {
    check_theta(theta);
    if (count == 0) throw InputShapeError("GaussianMeanModel::sample: count must be >= 1");
    std::normal_distribution<double> normal;
    Matrix out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(d_));
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index c = 0; c < out.cols(); ++c) out(i, c) = theta[c] + normal(rng);
    return out;
  }

  double log_density(const Vector& theta, const Vector& y) const {
    check_pair(theta, y);
    constexpr double log_2pi = 1.8378770664093454836;
    return -0.5 * (y - theta).squaredNorm() - 0.5 * static_cast<double>(d_) * log_2pi;
  }

  Vector grad_log_density(const Vector& theta, const Vector& y) const {
    check_pair(theta, y);
    return y - theta;
  }

  Vector project_params(const Vector& theta) const {
    check_theta(theta);
    return project_box(theta, radius_);
  }

 private:
  void check_theta(const Vector& theta) const {
    if (static_cast<std::size_t>(theta.size()) != d_)
      throw InputShapeError("GaussianMeanModel: parameter has length " + std::to_string(theta.size()) + ", expected " +
                            std::to_string(d_));
  }

  void check_pair(const Vector& theta, const Vector& y) const {
    check_theta(theta);
    if (y.size() != theta.size()) throw InputShapeError("GaussianMeanModel: data point and parameter lengths differ");
  }

  std::size_t d_;
  double radius_;
};

static_assert(GenerativeModel<GaussianMeanModel>);

}  // namespace mmdmiss
