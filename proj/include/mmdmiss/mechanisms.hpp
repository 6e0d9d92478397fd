#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "mmdmiss/baselines.hpp"
#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"
#include "mmdmiss/model.hpp"

namespace mmdmiss {

// ---------------------------------------------------------------------------
// Data-distribution contamination: rows come from N(theta*, I) with probability 1 - epsilon and
// from the contaminant otherwise.

enum class ContaminantKind { gaussian_mean, point_mass };

struct DataContamination {
  double epsilon = 0.0;
  ContaminantKind kind = ContaminantKind::gaussian_mean;
  /// Mean of the Gaussian contaminant, or location of the point mass. Empty when epsilon == 0.
  Vector location;

  static DataContamination none() { return {}; }

  static DataContamination gaussian(double epsilon, Vector mean) {
    return {epsilon, ContaminantKind::gaussian_mean, std::move(mean)};
  }

  static DataContamination point_mass(double epsilon, Vector xi) {
    return {epsilon, ContaminantKind::point_mass, std::move(xi)};
  }

  void validate(std::size_t d) const {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("data contamination: epsilon must lie in [0, 1]");
    if (epsilon > 0.0 && static_cast<std::size_t>(location.size()) != d)
      throw ConfigError("data contamination: contaminant location has the wrong dimension");
  }
};

/// n rows, each drawn independently from (1 - eps) N(theta*, I) + eps Q.
inline Matrix draw_complete(std::size_t n, const Vector& theta_star, const DataContamination& contamination, Rng& rng) {
  const auto d = static_cast<std::size_t>(theta_star.size());
  if (d == 0) throw InputShapeError("draw_complete: empty parameter");
  contamination.validate(d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Matrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const bool outlier = unif(rng) < contamination.epsilon;
    if (outlier && contamination.kind == ContaminantKind::point_mass) {
      rows.row(i) = contamination.location.transpose();
      continue;
    }
    const Vector& center = outlier ? contamination.location : theta_star;
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(i, c) = center[c] + normal(rng);
  }
  return rows;
}

/// CDF of beta^T X for X ~ (1 - eps) N(theta*, I) + eps Q, evaluated at t.
/// Point-mass contaminants contribute an exact step.
inline double mixture_cdf(const DataContamination& contamination, const Vector& beta, double t, const Vector& theta_star) {
  if (beta.size() != theta_star.size()) throw InputShapeError("mixture_cdf: beta and theta* lengths differ");
  contamination.validate(static_cast<std::size_t>(beta.size()));
  const double scale = beta.norm();
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("mixture_cdf: beta must be non-zero and finite");
  const double clean = normal_cdf((t - beta.dot(theta_star)) / scale);
  if (contamination.epsilon == 0.0) return clean;
  const double shift = beta.dot(contamination.location);
  const double outlier =
      contamination.kind == ContaminantKind::point_mass ? (t >= shift ? 1.0 : 0.0) : normal_cdf((t - shift) / scale);
  return (1.0 - contamination.epsilon) * clean + contamination.epsilon * outlier;
}

inline double mixture_cdf(const DataContamination& contamination, const Vector& beta, double t) {
  return mixture_cdf(contamination, beta, t, Vector::Zero(beta.size()));
}

// ---------------------------------------------------------------------------
// Missingness mechanisms.

/// The four blockwise patterns on coordinates 1..8 (0-based 0..7): {X1,X2,X3} missing,
/// {X3,X4,X5} missing, {X6,X7,X8} missing, nothing missing. The first two overlap on X3.
inline std::vector<Mask> blockwise_masks(std::size_t d) {
  if (d < 8) throw ConfigError("blockwise patterns need dimension >= 8");
  std::vector<Mask> masks(4, Mask(d, false));
  for (std::size_t c : {0, 1, 2}) masks[0][c] = true;
  for (std::size_t c : {2, 3, 4}) masks[1][c] = true;
  for (std::size_t c : {5, 6, 7}) masks[2][c] = true;
  return masks;
}

struct MaskProbability {
  Mask mask;
  double probability = 0.0;
};

struct MechanismSpec;

namespace mechanism {

/// Fixed pattern probabilities, independent of the data. Masks may be all-missing.
struct Mcar {
  std::vector<MaskProbability> patterns;
};

/// Mcar over the four blockwise patterns.
struct BlockwiseMcar {
  std::array<double, 4> alpha{0.25, 0.25, 0.25, 0.25};
};

/// Univariate: X observed iff lower < X < upper.
struct Truncation {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// P[M = m | x] = (1 - eps) base(m | x) + eps contaminant(m | x).
struct HuberMixture {
  std::shared_ptr<const MechanismSpec> base;
  std::shared_ptr<const MechanismSpec> contaminant;
  double epsilon = 0.0;
};

/// Self-censoring law over the blockwise patterns driven by F(beta^T x), F the cdf of beta^T X
/// under the (possibly contaminated) data law:
///   Q[m1|x] = Q[m4|x] = F/2,  Q[m2|x] = Q[m3|x] = 1/2 - F/2.
struct SelfCensoring {
  Vector beta;  ///< empty means d^{-1/2} (1, ..., 1)
  DataContamination data_law;
  Vector theta_star;  ///< empty means 0
};

enum class FlipBudget {
  caption,  ///< ceil(2 eps c) - 1 flips to missing
  ratio,    ///< ceil(eps / alpha * c) - 1 flips to missing
};

/// Univariate: MCAR with P[M = 0] = alpha, after which the smallest observed values are masked and
/// the largest value is unmasked. Has no per-row conditional law.
struct Adversarial {
  double alpha = 0.5;
  double epsilon = 0.1;
  FlipBudget budget = FlipBudget::caption;
};

}  // namespace mechanism

struct MechanismSpec {
  using Variant = std::variant<mechanism::Mcar, mechanism::BlockwiseMcar, mechanism::Truncation, mechanism::HuberMixture,
                               mechanism::SelfCensoring, mechanism::Adversarial>;
  Variant variant;

  static MechanismSpec mcar(std::vector<MaskProbability> patterns) { return {mechanism::Mcar{std::move(patterns)}}; }

  /// Univariate MCAR observing each row with probability alpha_observed.
  static MechanismSpec univariate_mcar(double alpha_observed) {
    return mcar({{Mask{false}, alpha_observed}, {Mask{true}, 1.0 - alpha_observed}});
  }

  static MechanismSpec blockwise_mcar(std::array<double, 4> alpha = {0.25, 0.25, 0.25, 0.25}) {
    return {mechanism::BlockwiseMcar{alpha}};
  }

  static MechanismSpec truncation(double lower, double upper = std::numeric_limits<double>::infinity()) {
    return {mechanism::Truncation{lower, upper}};
  }

  static MechanismSpec huber_mixture(MechanismSpec base, MechanismSpec contaminant, double epsilon) {
    return {mechanism::HuberMixture{std::make_shared<const MechanismSpec>(std::move(base)),
                                    std::make_shared<const MechanismSpec>(std::move(contaminant)), epsilon}};
  }

  static MechanismSpec self_censoring(DataContamination data_law, Vector theta_star = {}, Vector beta = {}) {
    return {mechanism::SelfCensoring{std::move(beta), std::move(data_law), std::move(theta_star)}};
  }

  static MechanismSpec adversarial(double alpha, double epsilon, mechanism::FlipBudget budget = mechanism::FlipBudget::caption) {
    return {mechanism::Adversarial{alpha, epsilon, budget}};
  }

  bool has_conditional_law() const { return !std::holds_alternative<mechanism::Adversarial>(variant); }

  /// Throws ConfigError when the spec is invalid for data of dimension d.
  void validate(std::size_t d) const;
};

namespace detail {

constexpr double probability_tolerance = 1e-12;

inline void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + ": probability outside [0, 1]");
}

inline Vector self_censoring_beta(const mechanism::SelfCensoring& s, std::size_t d) {
  return s.beta.size() == 0 ? Vector(Vector::Constant(static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d))))
                            : s.beta;
}

inline Vector self_censoring_center(const mechanism::SelfCensoring& s, std::size_t d) {
  return s.theta_star.size() == 0 ? Vector(Vector::Zero(static_cast<Eigen::Index>(d))) : s.theta_star;
}

}  // namespace detail

inline void MechanismSpec::validate(std::size_t d) const {
  using namespace mechanism;
  std::visit(
      [d](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Mcar>) {
          if (m.patterns.empty()) throw ConfigError("mcar: no patterns");
          double total = 0.0;
          for (const auto& p : m.patterns) {
            if (p.mask.size() != d) throw ConfigError("mcar: mask length differs from data dimension");
            detail::check_probability(p.probability, "mcar");
            total += p.probability;
          }
          if (std::abs(total - 1.0) > detail::probability_tolerance) throw ConfigError("mcar: probabilities do not sum to 1");
        } else if constexpr (std::is_same_v<T, BlockwiseMcar>) {
          blockwise_masks(d);
          double total = 0.0;
          for (double a : m.alpha) {
            detail::check_probability(a, "blockwise_mcar");
            total += a;
          }
          if (std::abs(total - 1.0) > detail::probability_tolerance)
            throw ConfigError("blockwise_mcar: probabilities do not sum to 1");
        } else if constexpr (std::is_same_v<T, Truncation>) {
          if (d != 1) throw ConfigError("truncation mechanism requires one-dimensional data");
          if (!(m.lower < m.upper)) throw ConfigError("truncation: empty interval");
        } else if constexpr (std::is_same_v<T, HuberMixture>) {
          if (!m.base || !m.contaminant) throw ConfigError("huber_mixture: missing component");
          if (!(m.epsilon >= 0.0 && m.epsilon < 1.0)) throw ConfigError("huber_mixture: epsilon must lie in [0, 1)");
          if (!m.base->has_conditional_law() || !m.contaminant->has_conditional_law())
            throw ConfigError("huber_mixture: components need a per-row conditional law");
          m.base->validate(d);
          m.contaminant->validate(d);
        } else if constexpr (std::is_same_v<T, SelfCensoring>) {
          blockwise_masks(d);
          if (m.beta.size() != 0 && static_cast<std::size_t>(m.beta.size()) != d)
            throw ConfigError("self_censoring: beta has the wrong dimension");
          if (m.theta_star.size() != 0 && static_cast<std::size_t>(m.theta_star.size()) != d)
            throw ConfigError("self_censoring: theta* has the wrong dimension");
          m.data_law.validate(d);
        } else if constexpr (std::is_same_v<T, Adversarial>) {
          if (d != 1) throw ConfigError("adversarial mechanism requires one-dimensional data");
          if (!(m.alpha > 0.0 && m.alpha <= 1.0)) throw ConfigError("adversarial: alpha must lie in (0, 1]");
          if (!(m.epsilon > 0.0 && m.epsilon < m.alpha)) throw ConfigError("adversarial: requires 0 < epsilon < alpha");
          if (m.budget == FlipBudget::caption && !(2.0 * m.epsilon < 1.0))
            throw ConfigError("adversarial: caption budget requires epsilon < 1/2");
        }
      },
      variant);
}

/// P[M = m | X = x] for every mask with a (possibly zero) probability under the spec.
inline std::vector<MaskProbability> conditional_law(const MechanismSpec& spec, const Vector& x) {
  using namespace mechanism;
  const auto d = static_cast<std::size_t>(x.size());
  return std::visit(
      [&](const auto& m) -> std::vector<MaskProbability> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Mcar>) {
          return m.patterns;
        } else if constexpr (std::is_same_v<T, BlockwiseMcar>) {
          auto masks = blockwise_masks(d);
          std::vector<MaskProbability> law;
          for (std::size_t k = 0; k < 4; ++k) law.push_back({std::move(masks[k]), m.alpha[k]});
          return law;
        } else if constexpr (std::is_same_v<T, Truncation>) {
          const bool inside = x[0] > m.lower && x[0] < m.upper;
          return {{Mask{false}, inside ? 1.0 : 0.0}, {Mask{true}, inside ? 0.0 : 1.0}};
        } else if constexpr (std::is_same_v<T, HuberMixture>) {
          auto law = conditional_law(*m.base, x);
          for (auto& entry : law) entry.probability *= 1.0 - m.epsilon;
          for (auto& entry : conditional_law(*m.contaminant, x)) {
            auto it = std::find_if(law.begin(), law.end(), [&](const MaskProbability& p) { return p.mask == entry.mask; });
            if (it == law.end())
              law.push_back({entry.mask, m.epsilon * entry.probability});
            else
              it->probability += m.epsilon * entry.probability;
          }
          return law;
        } else if constexpr (std::is_same_v<T, SelfCensoring>) {
          const Vector beta = detail::self_censoring_beta(m, d);
          const double f = mixture_cdf(m.data_law, beta, beta.dot(x), detail::self_censoring_center(m, d));
          auto masks = blockwise_masks(d);
          return {{std::move(masks[0]), 0.5 * f},
                  {std::move(masks[1]), 0.5 - 0.5 * f},
                  {std::move(masks[2]), 0.5 - 0.5 * f},
                  {std::move(masks[3]), 0.5 * f}};
        } else {
          throw UnsupportedError("adversarial mechanism has no per-row conditional law");
        }
      },
      spec.variant);
}

struct MaskedData {
  Dataset dataset;
  /// Mask drawn for every input row, including excluded all-missing rows.
  std::vector<Mask> masks;
  /// Input row index of each dataset observation.
  std::vector<std::size_t> kept_rows;
  std::size_t excluded_rows = 0;
  /// Adversarial only: rows flipped to missing, and whether the maximal row was unmasked.
  std::size_t flipped_to_missing = 0;
  bool unmasked_maximum = false;
};

namespace detail {

inline Mask draw_mask(const std::vector<MaskProbability>& law, double u) {
  double cumulative = 0.0;
  for (const auto& entry : law) {
    cumulative += entry.probability;
    if (u < cumulative) return entry.mask;
  }
  // Rounding left u above the total mass; fall back to the last pattern with positive probability.
  for (auto it = law.rbegin(); it != law.rend(); ++it)
    if (it->probability > 0.0) return it->mask;
  throw ConfigError("mechanism: conditional law has no mass");
}

inline std::size_t adversarial_flip_count(const mechanism::Adversarial& m, std::size_t observed) {
  const double rate = m.budget == mechanism::FlipBudget::caption ? 2.0 * m.epsilon : m.epsilon / m.alpha;
  const double raw = std::ceil(rate * static_cast<double>(observed)) - 1.0;
  if (raw <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(raw), observed);
}

inline MaskedData finish_masks(const Matrix& rows, std::vector<Mask> masks) {
  std::vector<Observation> obs;
  std::vector<std::size_t> kept;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (std::all_of(masks[i].begin(), masks[i].end(), [](bool b) { return b; })) {
      ++excluded;
      continue;
    }
    obs.emplace_back(Vector(rows.row(static_cast<Eigen::Index>(i)).transpose()), masks[i]);
    kept.push_back(i);
  }
  return {Dataset(static_cast<std::size_t>(rows.cols()), std::move(obs)), std::move(masks), std::move(kept), excluded, 0, false};
}

}  // namespace detail

/// Draws a mask for every row from the mechanism and drops rows whose mask is all-missing.
inline MaskedData apply_mechanism(const Matrix& rows, const MechanismSpec& spec, Rng& rng) {
  if (rows.rows() == 0 || rows.cols() == 0) throw InputShapeError("apply_mechanism: no rows");
  const auto d = static_cast<std::size_t>(rows.cols());
  spec.validate(d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<Mask> masks;
  masks.reserve(n);

  if (const auto* adv = std::get_if<mechanism::Adversarial>(&spec.variant)) {
    for (std::size_t i = 0; i < n; ++i) masks.push_back(Mask{!(unif(rng) < adv->alpha)});
    std::vector<std::size_t> observed;
    for (std::size_t i = 0; i < n; ++i)
      if (!masks[i][0]) observed.push_back(i);
    // Smallest observed values first; ties keep row order.
    std::stable_sort(observed.begin(), observed.end(), [&](std::size_t a, std::size_t b) {
      return rows(static_cast<Eigen::Index>(a), 0) < rows(static_cast<Eigen::Index>(b), 0);
    });
    const std::size_t flips = detail::adversarial_flip_count(*adv, observed.size());
    for (std::size_t k = 0; k < flips; ++k) masks[observed[k]][0] = true;
    Eigen::Index top = 0;
    rows.col(0).maxCoeff(&top);
    const bool was_missing = masks[static_cast<std::size_t>(top)][0];
    masks[static_cast<std::size_t>(top)][0] = false;

    auto out = detail::finish_masks(rows, std::move(masks));
    out.flipped_to_missing = flips;
    out.unmasked_maximum = was_missing;
    return out;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const Vector x = rows.row(static_cast<Eigen::Index>(i)).transpose();
    masks.push_back(detail::draw_mask(conditional_law(spec, x), unif(rng)));
  }
  return detail::finish_masks(rows, std::move(masks));
}

// ---------------------------------------------------------------------------
// Deviation from MCAR.

struct PatternDeviation {
  Mask mask;
  double probability = 0.0;  ///< pi_m = E[pi_m(X)]
  double variance = 0.0;     ///< V[pi_m(X)]

  /// V[pi_m(X)] / pi_m^2 (0 when both vanish).
  double relative_variance() const {
    if (variance == 0.0) return 0.0;
    return probability > 0.0 ? variance / (probability * probability) : std::numeric_limits<double>::infinity();
  }

  bool all_missing() const { return std::all_of(mask.begin(), mask.end(), [](bool b) { return b; }); }
};

struct DeviationReport {
  std::vector<PatternDeviation> patterns;

  /// E_M[ V[pi_M(X)] / pi_M^2 ] over every pattern with positive probability.
  double expected_relative_variance() const {
    double total = 0.0;
    for (const auto& p : patterns)
      if (p.probability > 0.0) total += p.probability * p.relative_variance();
    return total;
  }

  const PatternDeviation* find(const Mask& mask) const {
    for (const auto& p : patterns)
      if (p.mask == mask) return &p;
    return nullptr;
  }
};

/// Monte-Carlo estimate of pi_m and V[pi_m(X)] for X drawn from the (possibly contaminated) data law.
inline DeviationReport deviation_to_mcar(const MechanismSpec& spec, const Vector& theta_star, std::size_t n_mc, Rng& rng,
                                         const DataContamination& data_law = DataContamination::none()) {
  if (!spec.has_conditional_law())
    throw UnsupportedError("deviation_to_mcar: adversarial mechanism has no per-row conditional law");
  spec.validate(static_cast<std::size_t>(theta_star.size()));
  if (n_mc < 2) throw ConfigError("deviation_to_mcar: need at least 2 Monte-Carlo draws");

  const Matrix xs = draw_complete(n_mc, theta_star, data_law, rng);
  DeviationReport report;
  std::vector<double> m2;
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const double k = static_cast<double>(i + 1);
    for (const auto& entry : conditional_law(spec, xs.row(i).transpose())) {
      auto it = std::find_if(report.patterns.begin(), report.patterns.end(),
                             [&](const PatternDeviation& p) { return p.mask == entry.mask; });
      // Every law lists the same masks for every x, so new masks only appear on the first draw.
      if (it == report.patterns.end()) {
        report.patterns.push_back({entry.mask, 0.0, 0.0});
        m2.push_back(0.0);
        it = report.patterns.end() - 1;
      }
      const auto slot = static_cast<std::size_t>(it - report.patterns.begin());
      const double delta = entry.probability - it->probability;
      it->probability += delta / k;
      m2[slot] += delta * (entry.probability - it->probability);
    }
  }
  const double n = static_cast<double>(n_mc);
  for (std::size_t s = 0; s < report.patterns.size(); ++s) report.patterns[s].variance = m2[s] / n;
  return report;
}

}  // namespace mmdmiss
