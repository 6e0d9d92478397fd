#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"
#include "mmdmiss/kernel.hpp"
#include "mmdmiss/model.hpp"

namespace mmdmiss {

enum class StepSchedule {
  constant,      ///< eta_t = eta
  inverse_sqrt,  ///< eta_t = eta0 / sqrt(t)
};

struct SgdConfig {
  std::size_t steps = 2000;
  std::size_t model_samples = 50;
  StepSchedule schedule = StepSchedule::inverse_sqrt;
  /// eta (constant) or eta0 (inverse_sqrt). Unset means 0.1 * gamma^2.
  std::optional<double> step_size;
  std::uint64_t seed = 0;
  /// Unset means the per-coordinate mean of observed entries, projected onto the parameter set.
  std::optional<Vector> theta_init;
  /// Return the average of the last ceil(T/4) iterates instead of the final one.
  bool averaging = true;

  void validate() const {
    if (steps < 1) throw ConfigError("sgd: steps must be >= 1");
    if (model_samples < 2) throw ConfigError("sgd: at least 2 model samples per step are required");
    if (step_size && (!(*step_size >= 0.0) || !std::isfinite(*step_size)))
      throw ConfigError("sgd: step size must be finite and non-negative");
  }

  double base_step(const KernelSpec& kernel) const { return step_size.value_or(0.1 * kernel.gamma2()); }

  double step_at(std::size_t t, double base) const {
    return schedule == StepSchedule::constant ? base : base / std::sqrt(static_cast<double>(t));
  }
};

struct FitResult {
  Vector theta_hat;
  /// (iterate index t, Monte-Carlo criterion at theta^(t)) every max(1, T/100) steps.
  std::vector<std::pair<std::size_t, double>> criterion_trace;
  double final_gradient_norm = 0.0;
  double bandwidth_used = 0.0;
};

/// Criterion value and gradient estimate sharing one batch of model draws.
struct MonteCarloTerms {
  double criterion = 0.0;
  Vector gradient;
};

/// Evaluates the Monte-Carlo criterion and the unbiased gradient estimate
///
///   (2 / nS) sum_i sum_j ( 1/(S-1) sum_{j' != j} k(Y_j, Y_j') - k(X_i, Y_j) ) grad log p_theta(Y_j)
///
/// (kernel arguments projected onto pattern M_i) for the given draws. The score does not depend
/// on i, so the double sum collapses to per-draw weights; the draw-draw kernel terms depend on i
/// only through its pattern and are computed once per pattern block.
template <GenerativeModel Model>
MonteCarloTerms monte_carlo_terms(const Vector& theta, const Dataset& dataset, const KernelSpec& kernel,
                                  const Model& model, const Matrix& draws) {
  const auto s = draws.rows();
  const double ds = static_cast<double>(s);
  const double inv_g2 = 1.0 / kernel.gamma2();

  Eigen::ArrayXd weights = Eigen::ArrayXd::Zero(s);
  Eigen::ArrayXd row_sums(s);
  Eigen::ArrayXd buffer;
  double criterion = 0.0;

  for (const auto& block : dataset.blocks()) {
    const auto& coords = block.pattern.observed();
    const Matrix y = draws(Eigen::all, coords);
    const auto n_m = block.values.rows();
    const double dn_m = static_cast<double>(n_m);

    // Draw-draw kernel row sums, diagonal (== 1) included.
    buffer.resize(s);
    for (Eigen::Index j = 0; j < s; ++j) {
      buffer.setZero();
      for (Eigen::Index c = 0; c < y.cols(); ++c) buffer += (y.col(c).array() - y(j, c)).square();
      row_sums[j] = (-inv_g2 * buffer).exp().sum();
    }
    weights += dn_m * (row_sums - 1.0) / (ds - 1.0);
    criterion += dn_m * row_sums.sum() / (ds * ds);

    // Observation-draw kernel sums over the block.
    buffer.resize(n_m);
    double cross_total = 0.0;
    for (Eigen::Index j = 0; j < s; ++j) {
      buffer.setZero();
      for (Eigen::Index c = 0; c < y.cols(); ++c) buffer += (block.values.col(c).array() - y(j, c)).square();
      const double cross = (-inv_g2 * buffer).exp().sum();
      weights[j] -= cross;
      cross_total += cross;
    }
    criterion -= 2.0 * cross_total / ds;
  }

  const double n = static_cast<double>(dataset.size());
  Vector gradient = Vector::Zero(static_cast<Eigen::Index>(model.param_dim()));
  for (Eigen::Index j = 0; j < s; ++j) {
    const Vector yj = draws.row(j).transpose();
    gradient += weights[j] * model.grad_log_density(theta, yj);
  }
  gradient *= 2.0 / (n * ds);
  return {criterion / n, std::move(gradient)};
}

namespace detail {

template <GenerativeModel Model>
void check_estimation_inputs(const Vector& theta, const Dataset& dataset, const KernelSpec& kernel, const Model& model,
                             std::size_t samples) {
  kernel.validate();
  if (samples < 2) throw ConfigError("at least 2 model samples are required");
  if (dataset.empty()) throw InputShapeError("empty dataset");
  if (model.data_dim() != dataset.dim()) throw InputShapeError("model and data dimensions differ");
  if (static_cast<std::size_t>(theta.size()) != model.param_dim())
    throw InputShapeError("parameter length differs from the model's parameter dimension");
}

}  // namespace detail

/// Monte-Carlo estimate of the missing-data MMD criterion from one batch of S model draws.
template <GenerativeModel Model>
double mc_criterion(const Vector& theta, const Dataset& dataset, const KernelSpec& kernel, const Model& model,
                    std::size_t samples, Rng& rng) {
  detail::check_estimation_inputs(theta, dataset, kernel, model, samples);
  const Matrix draws = model.sample(theta, samples, rng);
  return monte_carlo_terms(theta, dataset, kernel, model, draws).criterion;
}

/// Unbiased Monte-Carlo estimate of the criterion gradient from S fresh model draws.
template <GenerativeModel Model>
Vector mc_gradient(const Vector& theta, const Dataset& dataset, const KernelSpec& kernel, const Model& model,
                   std::size_t samples, Rng& rng) {
  detail::check_estimation_inputs(theta, dataset, kernel, model, samples);
  const Matrix draws = model.sample(theta, samples, rng);
  return monte_carlo_terms(theta, dataset, kernel, model, draws).gradient;
}

/// Per-coordinate mean of the observed entries; coordinates never observed get 0.
inline Vector observed_coordinate_means(const Dataset& dataset) {
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(dataset.dim()));
  Eigen::VectorXi count = Eigen::VectorXi::Zero(static_cast<Eigen::Index>(dataset.dim()));
  for (const auto& block : dataset.blocks()) {
    const auto& coords = block.pattern.observed();
    for (std::size_t k = 0; k < coords.size(); ++k) {
      sum[coords[k]] += block.values.col(static_cast<Eigen::Index>(k)).sum();
      count[coords[k]] += static_cast<int>(block.values.rows());
    }
  }
  for (Eigen::Index c = 0; c < sum.size(); ++c) sum[c] = count[c] > 0 ? sum[c] / count[c] : 0.0;
  return sum;
}

/// Projected stochastic gradient descent on the missing-data MMD criterion, full batch over
/// observations and fresh model draws at every step.
template <GenerativeModel Model>
FitResult fit(const SgdConfig& config, const Dataset& dataset, const KernelSpec& kernel, const Model& model) {
  config.validate();
  Vector theta = model.project_params(config.theta_init ? *config.theta_init : observed_coordinate_means(dataset));
  detail::check_estimation_inputs(theta, dataset, kernel, model, config.model_samples);

  const std::size_t steps = config.steps;
  const std::size_t trace_every = std::max<std::size_t>(1, steps / 100);
  const std::size_t tail = (steps + 3) / 4;
  const double base = config.base_step(kernel);

  FitResult result;
  result.bandwidth_used = kernel.gamma;
  Vector tail_sum = Vector::Zero(theta.size());
  Rng rng(config.seed);

  for (std::size_t t = 1; t <= steps; ++t) {
    const Matrix draws = model.sample(theta, config.model_samples, rng);
    const MonteCarloTerms terms = monte_carlo_terms(theta, dataset, kernel, model, draws);
    if ((t - 1) % trace_every == 0) result.criterion_trace.emplace_back(t - 1, terms.criterion);

    theta = model.project_params(theta - config.step_at(t, base) * terms.gradient);
    if (!theta.allFinite()) throw NumericalError("fit: non-finite iterate at step " + std::to_string(t));
    if (t > steps - tail) tail_sum += theta;
    result.final_gradient_norm = terms.gradient.norm();
  }

  result.theta_hat = config.averaging ? Vector(tail_sum / static_cast<double>(tail)) : theta;
  return result;
}

}  // namespace mmdmiss
