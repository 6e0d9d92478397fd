#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mmdmiss/error.hpp"
#include "mmdmiss/experiments.hpp"

namespace mmdmiss {

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored; keys must be unique.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string text = trim(line);
      if (text.empty()) continue;
      const auto eq = text.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(text.substr(0, eq));
      std::string value = trim(text.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      if (!config.values_.emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return config;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  /// Throws on the first key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_)
      if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double real(const std::string& key, double fallback) const {
    return has(key) ? parse_real(values_.at(key), key) : fallback;
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? parse_integer(values_.at(key), key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = values_.at(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
  }

  std::vector<std::string> list(const std::string& key, const std::string& fallback) const {
    return split_list(text(key, fallback));
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(values_.at(key))) out.push_back(parse_real(item, key));
    return out;
  }

  /// Order-independent FNV-1a hash of the key/value pairs.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [key, value] : values_)
      for (char c : key + '=' + value + '\n') {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
    return h;
  }

  static std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
  }

  static std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  static double parse_real(const std::string& text, const std::string& key) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
      throw ConfigError("config key '" + key + "': expected a finite number, got '" + text + "'");
    return v;
  }

  static std::uint64_t parse_integer(const std::string& text, const std::string& key) {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end)
      throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
    return v;
  }

 private:
  std::map<std::string, std::string> values_;
};

inline const std::set<std::string>& experiment_config_keys() {
  static const std::set<std::string> keys{
      "n",         "d",          "theta_star",    "replications",      "seed",          "data_epsilon",
      "scenarios", "mechanism",  "mechanism_epsilon", "pattern_probabilities", "alpha", "lower",
      "upper",     "flip_budget", "estimators",   "bandwidth",         "steps",         "samples",
      "step_schedule", "step_size", "averaging",  "box_radius",        "init",          "report_deviation",
      "output"};
  return keys;
}

/// `N(v)`: Gaussian contaminant N(v 1, I). `delta(v)`: point mass at v 1. `none`: clean data.
inline DataContamination parse_contaminant(const std::string& name, double epsilon, std::size_t d) {
  if (name == "none") return DataContamination::none();
  const auto open = name.find('(');
  if (open == std::string::npos || name.back() != ')') throw ConfigError("unrecognised scenario '" + name + "'");
  const std::string family = name.substr(0, open);
  const double v = KeyValueConfig::parse_real(name.substr(open + 1, name.size() - open - 2), "scenarios");
  const Vector location = Vector::Constant(static_cast<Eigen::Index>(d), v);
  if (family == "N") return DataContamination::gaussian(epsilon, location);
  if (family == "delta") return DataContamination::point_mass(epsilon, location);
  throw ConfigError("unrecognised scenario family '" + family + "'");
}

/// Builds the missingness mechanism named by `mechanism`. Self-censoring depends on the data law,
/// so each scenario gets its own spec.
inline MechanismSpec parse_mechanism(const KeyValueConfig& cfg, const DataContamination& data_law, const Vector& theta_star) {
  const std::string kind = cfg.text("mechanism", "blockwise_self_censoring");
  const double eps = cfg.real("mechanism_epsilon", 0.0);
  const double alpha = cfg.real("alpha", 0.5);
  std::array<double, 4> probs{0.25, 0.25, 0.25, 0.25};
  if (cfg.has("pattern_probabilities")) {
    const auto p = cfg.reals("pattern_probabilities");
    if (p.size() != 4) throw ConfigError("pattern_probabilities: expected 4 values");
    std::copy(p.begin(), p.end(), probs.begin());
  }
  const double inf = std::numeric_limits<double>::infinity();

  if (kind == "blockwise_mcar") return MechanismSpec::blockwise_mcar(probs);
  if (kind == "blockwise_self_censoring")
    return MechanismSpec::huber_mixture(MechanismSpec::blockwise_mcar(probs),
                                        MechanismSpec::self_censoring(data_law, theta_star), eps);
  if (kind == "mcar") return MechanismSpec::univariate_mcar(alpha);
  if (kind == "truncation") return MechanismSpec::truncation(cfg.real("lower", -inf), cfg.real("upper", inf));
  if (kind == "huber_truncation")
    return MechanismSpec::huber_mixture(MechanismSpec::univariate_mcar(alpha),
                                        MechanismSpec::truncation(cfg.real("lower", 0.0), cfg.real("upper", inf)), eps);
  if (kind == "adversarial") {
    const std::string budget = cfg.text("flip_budget", "caption");
    if (budget != "caption" && budget != "ratio") throw ConfigError("flip_budget must be caption or ratio");
    return MechanismSpec::adversarial(alpha, eps,
                                      budget == "caption" ? mechanism::FlipBudget::caption : mechanism::FlipBudget::ratio);
  }
  throw ConfigError("unknown mechanism '" + kind + "'");
}

inline std::vector<EstimatorSpec> parse_estimators(const KeyValueConfig& cfg, std::size_t d) {
  MmdEstimatorSpec mmd;
  const std::string bandwidth = cfg.text("bandwidth", "median");
  if (bandwidth != "median") {
    mmd.bandwidth = BandwidthRule::fixed;
    mmd.gamma = KeyValueConfig::parse_real(bandwidth, "bandwidth");
    if (!(mmd.gamma > 0.0)) throw ConfigError("bandwidth must be positive");
  }
  mmd.sgd.steps = cfg.integer("steps", mmd.sgd.steps);
  mmd.sgd.model_samples = cfg.integer("samples", mmd.sgd.model_samples);
  const std::string schedule = cfg.text("step_schedule", "inverse_sqrt");
  if (schedule == "constant")
    mmd.sgd.schedule = StepSchedule::constant;
  else if (schedule != "inverse_sqrt")
    throw ConfigError("step_schedule must be inverse_sqrt or constant");
  if (const std::string step = cfg.text("step_size", "auto"); step != "auto")
    mmd.sgd.step_size = KeyValueConfig::parse_real(step, "step_size");
  mmd.sgd.averaging = cfg.boolean("averaging", true);
  mmd.box_radius = cfg.real("box_radius", mmd.box_radius);
  if (const std::string init = cfg.text("init", "data"); init != "data") {
    auto values = cfg.reals("init");
    if (values.size() == 1) values.assign(d, values[0]);
    if (values.size() != d) throw ConfigError("init: expected 1 or d values");
    mmd.sgd.theta_init = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(d));
  }
  mmd.sgd.validate();

  std::vector<EstimatorSpec> out;
  for (const auto& name : cfg.list("estimators", "mmd, mle, median")) {
    if (name == "mmd")
      out.push_back(EstimatorSpec::mmd(mmd));
    else if (name == "mle")
      out.push_back(EstimatorSpec::baseline(BaselineKind::ignoring_mle_gaussian));
    else if (name == "median")
      out.push_back(EstimatorSpec::baseline(BaselineKind::coordinate_median));
    else if (name == "extremes")
      out.push_back(EstimatorSpec::baseline(BaselineKind::average_of_extremes));
    else
      throw ConfigError("unknown estimator '" + name + "'");
  }
  if (out.empty()) throw ConfigError("estimators: list is empty");
  return out;
}

/// Builds a table grid from a parsed config; see the README for the schema.
inline TableConfig table_config_from(const KeyValueConfig& cfg) {
  cfg.require_known(experiment_config_keys());
  TableConfig table;
  const auto d = static_cast<std::size_t>(cfg.integer("d", 10));
  if (d == 0) throw ConfigError("d must be >= 1");
  table.n = cfg.integer("n", 500);
  table.replications = cfg.integer("replications", 200);
  table.seed = cfg.integer("seed", 1);
  table.report_deviation = cfg.boolean("report_deviation", false);

  std::vector<double> theta = cfg.has("theta_star") ? cfg.reals("theta_star") : std::vector<double>{0.0};
  if (theta.size() == 1) theta.assign(d, theta[0]);
  if (theta.size() != d) throw ConfigError("theta_star: expected 1 or d values");
  table.theta_star = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(d));

  const double data_epsilon = cfg.real("data_epsilon", 0.0);
  for (const auto& name : cfg.list("scenarios", "none")) {
    Scenario s;
    s.name = name;
    s.contamination = parse_contaminant(name, data_epsilon, d);
    s.mechanism = parse_mechanism(cfg, s.contamination, table.theta_star);
    table.scenarios.push_back(std::move(s));
  }
  if (table.scenarios.empty()) throw ConfigError("scenarios: list is empty");
  table.estimators = parse_estimators(cfg, d);
  for (std::size_t s = 0; s < table.scenarios.size(); ++s) table.experiment(s).validate();
  return table;
}

}  // namespace mmdmiss
