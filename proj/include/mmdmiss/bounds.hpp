#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "mmdmiss/baselines.hpp"
#include "mmdmiss/error.hpp"
#include "mmdmiss/experiments.hpp"
#include "mmdmiss/kernel.hpp"
#include "mmdmiss/mechanisms.hpp"

namespace mmdmiss {

enum class BoundStatus { satisfied, violated, unsupported };

inline const char* to_string(BoundStatus s) {
  switch (s) {
    case BoundStatus::satisfied:
      return "satisfied";
    case BoundStatus::violated:
      return "violated";
    case BoundStatus::unsupported:
      return "unsupported";
  }
  return "?";
}

/// One inequality lhs <= allowed, where allowed is the analytic right side times the Monte-Carlo
/// slack (or plus an absolute tolerance for limit checks).
struct BoundCheck {
  std::string name;
  std::string statement;
  double lhs = 0.0;
  double rhs = 0.0;
  double allowed = 0.0;
  BoundStatus status = BoundStatus::unsupported;
  std::string note;

  double margin() const { return allowed - lhs; }
};

struct BoundReport {
  std::vector<BoundCheck> checks;

  bool any_violated() const {
    for (const auto& c : checks)
      if (c.status == BoundStatus::violated) return true;
    return false;
  }

  const BoundCheck& find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("no bound check named " + name);
  }

  void write_csv(std::ostream& out) const {
    out << "check,lhs,rhs,allowed,margin,status\n";
    for (const auto& c : checks)
      out << c.name << ',' << format_number(c.lhs, 8) << ',' << format_number(c.rhs, 8) << ','
          << format_number(c.allowed, 8) << ',' << format_number(c.margin(), 8) << ',' << to_string(c.status) << '\n';
  }

  void write_text(std::ostream& out) const {
    for (const auto& c : checks) {
      out << std::left << std::setw(12) << to_string(c.status) << std::setw(40) << c.name << std::right
          << " lhs=" << format_number(c.lhs, 5) << "  allowed=" << format_number(c.allowed, 5) << "  (" << c.statement << ")";
      if (!c.note.empty()) out << "  " << c.note;
      out << '\n';
    }
  }
};

struct BoundSuiteConfig {
  std::size_t n = 10000;
  std::size_t replications = 50;
  std::size_t mle_n = 100000;
  std::size_t mle_replications = 20;
  std::uint64_t seed = 7;
  double slack = 1.2;
  double mle_tolerance = 0.02;
  std::size_t deviation_draws = 200000;
  std::vector<double> truncation_levels{0.02, 0.05, 0.1};
  std::vector<std::size_t> mcar_sizes{100, 1000, 10000};
  double alpha = 0.5;
  double mechanism_epsilon = 0.1;
  double data_epsilon = 0.1;
  double outlier_location = 5.0;
  MmdEstimatorSpec mmd = [] {
    MmdEstimatorSpec spec;
    spec.bandwidth = BandwidthRule::fixed;
    spec.gamma = std::numbers::sqrt2;
    spec.sgd.steps = 1000;
    spec.sgd.model_samples = 40;
    return spec;
  }();

  /// "standard": n = 10^4 with 50 replications. "smoke": a seconds-scale version for CLI tests.
  static BoundSuiteConfig named(const std::string& name) {
    BoundSuiteConfig c;
    if (name == "standard") return c;
    if (name == "smoke") {
      c.n = 2000;
      c.replications = 8;
      c.mle_n = 20000;
      c.mle_replications = 4;
      c.deviation_draws = 20000;
      c.mcar_sizes = {100, 1000};
      c.mmd.sgd.steps = 300;
      c.mmd.sgd.model_samples = 20;
      return c;
    }
    throw ConfigError("unknown scenario set '" + name + "' (expected standard or smoke)");
  }
};

namespace detail {

struct BoundRun {
  std::vector<ReplicationRecord> records;
  double gamma = 0.0;

  /// Mean over replicates of f(estimate of estimator e); failed replicates are skipped.
  double mean_of(std::size_t e, const std::function<double(double)>& f) const {
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& r : records) {
      const double v = r.estimates[e][0];
      if (!std::isfinite(v)) continue;
      sum += f(v);
      ++used;
    }
    if (used == 0) throw NumericalError("every replicate failed");
    return sum / static_cast<double>(used);
  }
};

inline BoundCheck make_check(std::string name, std::string statement, double lhs, double rhs, double allowed) {
  BoundCheck c{std::move(name), std::move(statement), lhs, rhs, allowed, BoundStatus::satisfied, {}};
  if (!(lhs <= allowed)) c.status = BoundStatus::violated;
  return c;
}

}  // namespace detail

/// Runs every scenario of the suite on the univariate Gaussian mean model and compares the
/// empirical left sides with the analytic right sides. A failing scenario is reported as
/// unsupported rather than aborting the suite.
inline BoundReport check_bounds(const BoundSuiteConfig& config, std::size_t workers = 1) {
  BoundReport report;
  const double g = config.mmd.gamma;
  const double theta_star = 0.0;
  const double sqrt8 = 2.0 * std::numbers::sqrt2;
  std::uint64_t stream = 0;

  auto run = [&](const Scenario& scenario, std::size_t n, std::size_t reps, std::vector<EstimatorSpec> estimators) {
    ExperimentConfig c;
    c.n = n;
    c.theta_star = Vector::Constant(1, theta_star);
    c.scenario = scenario;
    c.estimators = std::move(estimators);
    c.replications = reps;
    c.seed = config.seed;
    c.stream = stream++;
    return detail::BoundRun{run_replications(c, workers), g};
  };
  auto distance = [&](double theta) { return std::sqrt(gaussian_mmd2_closed_form(theta, theta_star, g)); };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& ex) {
      BoundCheck c;
      c.name = name;
      c.statement = "not evaluated";
      c.lhs = c.rhs = c.allowed = std::numeric_limits<double>::quiet_NaN();
      c.status = BoundStatus::unsupported;
      c.note = ex.what();
      report.checks.push_back(std::move(c));
    }
  };
  const auto mmd = EstimatorSpec::mmd(config.mmd);
  const auto mle = EstimatorSpec::baseline(BaselineKind::ignoring_mle_gaussian);

  // Truncation: X observed iff X > a with P[X <= a] = eps.
  for (double eps : config.truncation_levels) {
    const std::string tag = "truncation_eps" + format_number(eps, 2);
    guarded(tag, [&] {
      const Scenario s{tag, DataContamination::none(), MechanismSpec::truncation(normal_quantile(eps))};
      const auto r = run(s, config.n, config.replications, {mmd, mle});
      const double d_mean = r.mean_of(0, distance);
      report.checks.push_back(detail::make_check(tag + "_mmd_distance", "E D(theta_hat, theta*) <= 4 eps", d_mean, 4.0 * eps,
                                                 config.slack * 4.0 * eps));

      const double abs_mean = r.mean_of(0, [&](double t) { return std::abs(t - theta_star); });
      const double inner = 1.0 - 8.0 * std::sqrt((4.0 + g * g) / (g * g)) * eps * eps;
      const double param_rhs = inner > 0.0 ? std::sqrt(-(4.0 + g * g) * std::log(inner)) : std::numeric_limits<double>::infinity();
      report.checks.push_back(detail::make_check(tag + "_parameter", "E |theta_hat - theta*| <= inverted 4 eps distance",
                                                 abs_mean, param_rhs, config.slack * param_rhs));

      Rng dev_rng(mix_seed(config.seed ^ stream));
      const auto dev = deviation_to_mcar(s.mechanism, Vector::Constant(1, theta_star), config.deviation_draws, dev_rng);
      const auto* observed = dev.find(Mask{false});
      if (observed == nullptr) throw NumericalError("observed pattern has no mass");
      const double pi = observed->probability;
      const double tv_rhs = 2.0 * observed->variance / (pi * pi);
      const double tv_lhs = r.mean_of(1, [&](double t) {
        const double tv = 2.0 * normal_cdf(std::abs(t - theta_star) / 2.0) - 1.0;
        return tv * tv;
      });
      report.checks.push_back(detail::make_check(tag + "_mle_total_variation", "E TV^2(MLE, theta*) <= 2 V[pi(X)] / pi^2",
                                                 tv_lhs, tv_rhs, config.slack * tv_rhs));

      const double pattern_lhs = pi * r.mean_of(0, [&](double t) { return gaussian_mmd2_closed_form(t, theta_star, g); });
      const double pattern_rhs = 4.0 * dev.expected_relative_variance();
      report.checks.push_back(detail::make_check(tag + "_pattern_mmd", "E_M D^2_M <= 4 E_M[V[pi_M(X)] / pi_M^2]", pattern_lhs,
                                                 pattern_rhs, config.slack * pattern_rhs));
    });
  }

  // Ignoring MLE under left truncation converges to E[X | X > a].
  for (double eps : config.truncation_levels) {
    const std::string tag = "truncation_eps" + format_number(eps, 2) + "_mle_limit";
    guarded(tag, [&] {
      const double a = normal_quantile(eps);
      const Scenario s{tag, DataContamination::none(), MechanismSpec::truncation(a)};
      const auto r = run(s, config.mle_n, config.mle_replications, {mle});
      const double limit = truncated_mle_limit(a);
      const double gap = std::abs(r.mean_of(0, [](double t) { return t; }) - limit);
      auto c = detail::make_check(tag, "|mean MLE - phi(a)/(1 - Phi(a))| <= tolerance", gap, 0.0, config.mle_tolerance);
      c.note = "limit " + format_number(limit, 5);
      report.checks.push_back(std::move(c));
    });
  }

  // Well-specified MCAR: E D <= 2 sqrt(2) / sqrt(n pi).
  for (std::size_t n : config.mcar_sizes) {
    const std::string tag = "mcar_n" + std::to_string(n);
    guarded(tag, [&] {
      const Scenario s{tag, DataContamination::none(), MechanismSpec::univariate_mcar(config.alpha)};
      const auto r = run(s, n, config.replications, {mmd});
      const double rhs = sqrt8 / std::sqrt(static_cast<double>(n) * config.alpha);
      report.checks.push_back(
          detail::make_check(tag + "_finite_sample", "E D <= 2 sqrt(2) / sqrt(n pi)", r.mean_of(0, distance), rhs, config.slack * rhs));
    });
  }

  // Huber contamination of the data under MCAR.
  guarded("huber_data", [&] {
    const double e = config.data_epsilon;
    const auto law = DataContamination::point_mass(e, Vector::Constant(1, config.outlier_location));
    const Scenario s{"huber_data", law, MechanismSpec::univariate_mcar(config.alpha)};
    const auto r = run(s, config.n, config.replications, {mmd});
    Rng dev_rng(mix_seed(config.seed ^ stream));
    const auto dev = deviation_to_mcar(s.mechanism, Vector::Constant(1, theta_star), config.deviation_draws, dev_rng);
    const auto* observed = dev.find(Mask{false});
    const double pi = observed->probability;
    const double rhs = 4.0 * e + 8.0 * e / (pi * (1.0 - e)) + 2.0 * std::sqrt(observed->variance) / pi +
                       sqrt8 / std::sqrt(static_cast<double>(config.n) * pi * (1.0 - e));
    report.checks.push_back(detail::make_check("huber_data_finite_sample", "E D <= 4e + 8e/(pi(1-e)) + 2 sqrt(V)/pi + 2 sqrt(2)/sqrt(n pi (1-e))",
                                               r.mean_of(0, distance), rhs, config.slack * rhs));
  });

  // Huber contamination of an MCAR mechanism by "observed iff X > 0".
  guarded("huber_mechanism", [&] {
    const double a = config.alpha;
    const double e = config.mechanism_epsilon;
    const Scenario s{"huber_mechanism", DataContamination::none(),
                     MechanismSpec::huber_mixture(MechanismSpec::univariate_mcar(a), MechanismSpec::truncation(0.0), e)};
    const auto r = run(s, config.n, config.replications, {mmd});
    const double rhs = 2.0 * e / (a * (1.0 - e)) + sqrt8 / std::sqrt(static_cast<double>(config.n) * a * (1.0 - e));
    report.checks.push_back(detail::make_check("huber_mechanism_finite_sample", "E D <= 2e/(alpha(1-e)) + 2 sqrt(2)/sqrt(n alpha (1-e))",
                                               r.mean_of(0, distance), rhs, config.slack * rhs));
    // Squared distance averaged over MCAR patterns; the empty pattern contributes nothing on the left.
    const double inverse_alpha_sq = a / (a * a) + (1.0 - a) / ((1.0 - a) * (1.0 - a));
    const double pop_rhs = 8.0 * inverse_alpha_sq * (e / (1.0 - e)) * (e / (1.0 - e));
    const double pop_lhs = a * r.mean_of(0, [&](double t) { return gaussian_mmd2_closed_form(t, theta_star, g); });
    report.checks.push_back(detail::make_check("huber_mechanism_pattern_mmd", "E_{M~alpha} D^2_M <= 8 E[1/alpha_M^2] (e/(1-e))^2",
                                               pop_lhs, pop_rhs, config.slack * pop_rhs));
  });

  // Adversarial flipping after MCAR selection.
  guarded("adversarial", [&] {
    const double a = config.alpha;
    const double e = config.mechanism_epsilon;
    const Scenario s{"adversarial", DataContamination::none(), MechanismSpec::adversarial(a, e)};
    const auto r = run(s, config.n, config.replications, {mmd});
    const double rhs = 6.0 * e / (a - e) + sqrt8 / std::sqrt(static_cast<double>(config.n) * a);
    report.checks.push_back(detail::make_check("adversarial_finite_sample", "E D <= 6e/(alpha-e) + 2 sqrt(2)/sqrt(n alpha)",
                                               r.mean_of(0, distance), rhs, config.slack * rhs));
  });

  return report;
}

}  // namespace mmdmiss
