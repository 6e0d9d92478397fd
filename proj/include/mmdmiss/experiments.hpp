#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "mmdmiss/baselines.hpp"
#include "mmdmiss/data.hpp"
#include "mmdmiss/error.hpp"
#include "mmdmiss/estimator.hpp"
#include "mmdmiss/kernel.hpp"
#include "mmdmiss/mechanisms.hpp"
#include "mmdmiss/model.hpp"

namespace mmdmiss {

// ---------------------------------------------------------------------------
// Seeds

/// splitmix64 finaliser; a bijection on 64-bit words.
inline std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of replicate `index` within stream `stream`; distinct indices give distinct seeds.
inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(master ^ mix_seed(stream)) + index);
}

// ---------------------------------------------------------------------------
// Estimators under comparison

enum class BandwidthRule { median_heuristic, fixed };

struct MmdEstimatorSpec {
  SgdConfig sgd;
  BandwidthRule bandwidth = BandwidthRule::median_heuristic;
  double gamma = std::sqrt(2.0);  ///< used when bandwidth == fixed
  double box_radius = GaussianMeanModel::default_box_radius;
};

struct EstimatorSpec {
  std::string name;
  std::variant<MmdEstimatorSpec, BaselineKind> method;

  static EstimatorSpec mmd(MmdEstimatorSpec spec, std::string name = "MMD") { return {std::move(name), std::move(spec)}; }
  static EstimatorSpec baseline(BaselineKind kind) {
    switch (kind) {
      case BaselineKind::ignoring_mle_gaussian:
        return {"MLE", kind};
      case BaselineKind::coordinate_median:
        return {"Median", kind};
      case BaselineKind::average_of_extremes:
        return {"AvgExtremes", kind};
    }
    throw ConfigError("unknown baseline");
  }
};

/// Runs one estimator on a masked dataset. The Gaussian mean model is the only model shipped.
inline Vector run_estimator(const EstimatorSpec& estimator, const Dataset& dataset, std::uint64_t seed) {
  if (const auto* kind = std::get_if<BaselineKind>(&estimator.method)) return run_baseline(*kind, dataset);
  const auto& spec = std::get<MmdEstimatorSpec>(estimator.method);
  const double gamma = spec.bandwidth == BandwidthRule::fixed ? spec.gamma : median_heuristic_bandwidth(dataset);
  SgdConfig sgd = spec.sgd;
  sgd.seed = seed;
  return fit(sgd, dataset, KernelSpec::gaussian(gamma), GaussianMeanModel(dataset.dim(), spec.box_radius)).theta_hat;
}

// ---------------------------------------------------------------------------
// Replications

/// One cell of an experiment grid: data law plus missingness mechanism.
struct Scenario {
  std::string name;
  DataContamination contamination;
  MechanismSpec mechanism;
};

struct ExperimentConfig {
  std::size_t n = 500;
  Vector theta_star;
  Scenario scenario;
  std::vector<EstimatorSpec> estimators;
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  /// Stream tag separating scenarios that share a master seed.
  std::uint64_t stream = 0;
  /// Also estimate the mechanism's deviation to MCAR in every replicate.
  bool report_deviation = false;
  std::size_t deviation_draws = 10000;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(theta_star.size()); }

  void validate() const {
    if (theta_star.size() == 0) throw ConfigError("experiment: theta* is empty");
    if (n == 0) throw ConfigError("experiment: n must be >= 1");
    if (replications < 1) throw ConfigError("experiment: replications must be >= 1");
    if (estimators.empty()) throw ConfigError("experiment: no estimators");
    scenario.contamination.validate(dim());
    scenario.mechanism.validate(dim());
  }
};

struct ReplicationRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t observed_rows = 0;
  std::size_t excluded_rows = 0;
  /// Per estimator, in config order. Failed estimators have NaN errors and a message.
  std::vector<Vector> estimates;
  std::vector<double> errors;
  std::vector<std::string> failures;
  std::optional<DeviationReport> deviation;
  std::string deviation_error;
};

/// Draws data, masks it, and records |theta_hat - theta*|_2 for every estimator.
inline ReplicationRecord run_replication(const ExperimentConfig& config, std::size_t replicate_index) {
  ReplicationRecord record;
  record.index = replicate_index;
  record.seed = child_seed(config.seed, config.stream, replicate_index);
  Rng rng(record.seed);

  const Matrix rows = draw_complete(config.n, config.theta_star, config.scenario.contamination, rng);
  const MaskedData masked = apply_mechanism(rows, config.scenario.mechanism, rng);
  record.observed_rows = masked.dataset.size();
  record.excluded_rows = masked.excluded_rows;

  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    try {
      if (masked.dataset.empty()) throw UndefinedCoordinateError("no observed rows", 0);
      Vector estimate = run_estimator(config.estimators[e], masked.dataset, mix_seed(record.seed + 1 + e));
      const double error = (estimate - config.theta_star).norm();
      if (!std::isfinite(error)) throw NumericalError("non-finite estimate");
      record.estimates.push_back(std::move(estimate));
      record.errors.push_back(error);
      record.failures.emplace_back();
    } catch (const std::exception& ex) {
      record.estimates.push_back(Vector::Constant(config.theta_star.size(), std::numeric_limits<double>::quiet_NaN()));
      record.errors.push_back(std::numeric_limits<double>::quiet_NaN());
      record.failures.emplace_back(ex.what());
    }
  }

  if (config.report_deviation) {
    try {
      Rng dev_rng(mix_seed(record.seed ^ 0xd1b54a32d192ed03ULL));
      record.deviation = deviation_to_mcar(config.scenario.mechanism, config.theta_star, config.deviation_draws, dev_rng,
                                           config.scenario.contamination);
    } catch (const std::exception& ex) {
      record.deviation_error = ex.what();
    }
  }
  return record;
}

/// Runs job(k) for k in [0, count) on `workers` threads. Results are written by index, so the
/// outcome does not depend on the worker count.
template <class Job>
void parallel_for(std::size_t count, std::size_t workers, Job&& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          job(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::vector<ReplicationRecord> run_replications(const ExperimentConfig& config, std::size_t workers = 1) {
  config.validate();
  std::vector<ReplicationRecord> records(config.replications);
  parallel_for(config.replications, workers, [&](std::size_t k) { records[k] = run_replication(config, k); });
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation

struct ErrorSummary {
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  std::size_t failed = 0;
};

/// rmse = sqrt(mean e^2) and the sample standard deviation of e over finite errors, in input order.
inline ErrorSummary summarize_errors(const std::vector<double>& errors) {
  ErrorSummary s;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double e : errors) {
    if (!std::isfinite(e)) {
      ++s.failed;
      continue;
    }
    ++s.used;
    sum += e;
    sum_sq += e * e;
  }
  if (s.used == 0) return s;
  const double n = static_cast<double>(s.used);
  s.rmse = std::sqrt(sum_sq / n);
  if (s.used > 1) {
    const double mean = sum / n;
    double ss = 0.0;
    for (double e : errors)
      if (std::isfinite(e)) ss += (e - mean) * (e - mean);
    s.std = std::sqrt(ss / (n - 1.0));
  } else {
    s.std = 0.0;
  }
  return s;
}

/// Linear-interpolation sample quantile (R type 7) of the finite values.
inline double quantile(std::vector<double> values, double p) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }), values.end());
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline std::string format_number(double v, int decimals = 6) {
  if (!std::isfinite(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Tables

struct TableConfig {
  std::size_t n = 500;
  Vector theta_star;
  std::vector<Scenario> scenarios;
  std::vector<EstimatorSpec> estimators;
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  bool report_deviation = false;

  ExperimentConfig experiment(std::size_t scenario_index) const {
    ExperimentConfig c;
    c.n = n;
    c.theta_star = theta_star;
    c.scenario = scenarios.at(scenario_index);
    c.estimators = estimators;
    c.replications = replications;
    c.seed = seed;
    c.stream = scenario_index;
    c.report_deviation = report_deviation;
    return c;
  }
};

struct TableCell {
  std::string scenario;
  std::string estimator;
  ErrorSummary summary;
  std::vector<double> replicate_errors;
};

struct ResultTable {
  std::vector<std::string> scenarios;
  std::vector<std::string> estimators;
  std::vector<TableCell> cells;  ///< scenario-major
  std::vector<std::uint64_t> replicate_seeds;  ///< scenario-major
  std::vector<std::string> deviation_errors;   ///< distinct messages, if any
  double wall_seconds = 0.0;

  const TableCell& cell(const std::string& scenario, const std::string& estimator) const {
    for (const auto& c : cells)
      if (c.scenario == scenario && c.estimator == estimator) return c;
    throw std::out_of_range("no table cell " + scenario + " / " + estimator);
  }

  void write_csv(std::ostream& out) const {
    out << "scenario,estimator,rmse,std,n_replications\n";
    for (const auto& c : cells)
      out << c.scenario << ',' << c.estimator << ',' << format_number(c.summary.rmse) << ','
          << format_number(c.summary.std) << ',' << c.summary.used << '\n';
  }

  /// Estimators as rows, scenarios as columns, standard deviations in parentheses underneath.
  void write_text(std::ostream& out) const {
    constexpr int width = 12;
    out << std::setw(width) << "";
    for (const auto& s : scenarios) out << std::setw(width) << s;
    out << '\n';
    for (const auto& e : estimators) {
      out << std::setw(width) << e;
      for (const auto& s : scenarios) out << std::setw(width) << format_number(cell(s, e).summary.rmse, 2);
      out << '\n' << std::setw(width) << "";
      for (const auto& s : scenarios) out << std::setw(width) << ("(" + format_number(cell(s, e).summary.std, 2) + ")");
      out << '\n';
    }
  }
};

inline ResultTable run_table(const TableConfig& config, std::size_t workers = 1) {
  if (config.scenarios.empty()) throw ConfigError("table: no scenarios");
  const auto start = std::chrono::steady_clock::now();
  std::vector<ExperimentConfig> experiments;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    experiments.push_back(config.experiment(s));
    experiments.back().validate();
  }

  const std::size_t reps = config.replications;
  std::vector<ReplicationRecord> records(experiments.size() * reps);
  parallel_for(records.size(), workers, [&](std::size_t k) { records[k] = run_replication(experiments[k / reps], k % reps); });

  ResultTable table;
  for (const auto& s : config.scenarios) table.scenarios.push_back(s.name);
  for (const auto& e : config.estimators) table.estimators.push_back(e.name);
  for (std::size_t s = 0; s < experiments.size(); ++s) {
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
      TableCell cell{config.scenarios[s].name, config.estimators[e].name, {}, {}};
      for (std::size_t r = 0; r < reps; ++r) cell.replicate_errors.push_back(records[s * reps + r].errors[e]);
      cell.summary = summarize_errors(cell.replicate_errors);
      table.cells.push_back(std::move(cell));
    }
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& rec = records[s * reps + r];
      table.replicate_seeds.push_back(rec.seed);
      if (!rec.deviation_error.empty() &&
          std::find(table.deviation_errors.begin(), table.deviation_errors.end(), rec.deviation_error) ==
              table.deviation_errors.end())
        table.deviation_errors.push_back(rec.deviation_error);
    }
  }
  table.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return table;
}

// ---------------------------------------------------------------------------
// Univariate estimator curves over a grid of sample sizes.

struct Figure1Config {
  std::vector<std::size_t> n_grid{100, 300, 1000, 3000, 10000};
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  double alpha = 0.5;        ///< MCAR observation probability
  double mechanism_epsilon = 0.1;
  double theta_star = 0.0;
  MmdEstimatorSpec mmd = [] {
    MmdEstimatorSpec spec;
    spec.bandwidth = BandwidthRule::fixed;
    spec.gamma = std::sqrt(2.0);
    return spec;
  }();

  /// Huber: MCAR(alpha) mixed with "observed iff X > 0". Adversarial: hide the smallest observed values, reveal the maximum.
  std::vector<Scenario> mechanisms() const {
    return {
        {"huber", DataContamination::none(),
         MechanismSpec::huber_mixture(MechanismSpec::univariate_mcar(alpha), MechanismSpec::truncation(0.0), mechanism_epsilon)},
        {"adversarial", DataContamination::none(), MechanismSpec::adversarial(alpha, mechanism_epsilon)},
    };
  }

  std::vector<EstimatorSpec> estimators() const {
    return {EstimatorSpec::mmd(mmd), EstimatorSpec::baseline(BaselineKind::ignoring_mle_gaussian),
            EstimatorSpec::baseline(BaselineKind::average_of_extremes)};
  }
};

struct CurvePoint {
  std::string mechanism;
  std::string estimator;
  std::size_t n = 0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  /// Median and quartiles of |theta_hat - theta*|.
  double median_abs_error = 0.0;
  double abs_error_q25 = 0.0;
  double abs_error_q75 = 0.0;
  std::vector<double> estimates;
};

struct FigureCurves {
  std::vector<CurvePoint> points;

  const CurvePoint& at(const std::string& mechanism, const std::string& estimator, std::size_t n) const {
    for (const auto& p : points)
      if (p.mechanism == mechanism && p.estimator == estimator && p.n == n) return p;
    throw std::out_of_range("no curve point " + mechanism + " / " + estimator + " / " + std::to_string(n));
  }

  void write_csv(std::ostream& out) const {
    out << "mechanism,estimator,n,q25,median,q75\n";
    for (const auto& p : points)
      out << p.mechanism << ',' << p.estimator << ',' << p.n << ',' << format_number(p.q25) << ','
          << format_number(p.median) << ',' << format_number(p.q75) << '\n';
  }

  void write_text(std::ostream& out) const {
    out << std::left << std::setw(12) << "mechanism" << std::setw(12) << "estimator" << std::right << std::setw(8) << "n"
        << std::setw(11) << "q25" << std::setw(11) << "median" << std::setw(11) << "q75" << '\n';
    for (const auto& p : points)
      out << std::left << std::setw(12) << p.mechanism << std::setw(12) << p.estimator << std::right << std::setw(8) << p.n
          << std::setw(11) << format_number(p.q25, 4) << std::setw(11) << format_number(p.median, 4) << std::setw(11)
          << format_number(p.q75, 4) << '\n';
  }
};

inline FigureCurves run_figure1(const Figure1Config& config, std::size_t workers = 1) {
  if (config.n_grid.empty()) throw ConfigError("figure1: empty n grid");
  const auto mechanisms = config.mechanisms();
  const auto estimators = config.estimators();
  Vector theta_star(1);
  theta_star << config.theta_star;

  std::vector<ExperimentConfig> experiments;
  for (std::size_t m = 0; m < mechanisms.size(); ++m) {
    for (std::size_t g = 0; g < config.n_grid.size(); ++g) {
      ExperimentConfig c;
      c.n = config.n_grid[g];
      c.theta_star = theta_star;
      c.scenario = mechanisms[m];
      c.estimators = estimators;
      c.replications = config.replications;
      c.seed = config.seed;
      c.stream = m * config.n_grid.size() + g;
      c.validate();
      experiments.push_back(std::move(c));
    }
  }
  const std::size_t reps = config.replications;
  std::vector<ReplicationRecord> records(experiments.size() * reps);
  parallel_for(records.size(), workers, [&](std::size_t k) { records[k] = run_replication(experiments[k / reps], k % reps); });

  FigureCurves curves;
  for (std::size_t x = 0; x < experiments.size(); ++x) {
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      CurvePoint p;
      p.mechanism = experiments[x].scenario.name;
      p.estimator = estimators[e].name;
      p.n = experiments[x].n;
      std::vector<double> abs_errors;
      for (std::size_t r = 0; r < reps; ++r) {
        const double est = records[x * reps + r].estimates[e][0];
        p.estimates.push_back(est);
        abs_errors.push_back(std::abs(est - config.theta_star));
      }
      p.q25 = quantile(p.estimates, 0.25);
      p.median = quantile(p.estimates, 0.5);
      p.q75 = quantile(p.estimates, 0.75);
      p.abs_error_q25 = quantile(abs_errors, 0.25);
      p.median_abs_error = quantile(abs_errors, 0.5);
      p.abs_error_q75 = quantile(abs_errors, 0.75);
      curves.points.push_back(std::move(p));
    }
  }
  return curves;
}

}  // namespace mmdmiss
