// Command-line front end: fit, table, figure1, check-bounds, simulate.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure,
// 3 bound-check violation.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmdmiss/mmdmiss.hpp"

namespace fs = std::filesystem;
using namespace mmdmiss;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;
constexpr int exit_bound_violation = 3;

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<double> parse_reals(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : KeyValueConfig::split_list(text)) out.push_back(KeyValueConfig::parse_real(item, what));
  return out;
}

struct FitOptions {
  std::string input;
  std::string na_token = "NA";
  std::string model = "gaussian-mean";
  std::string bandwidth = "median";
  std::size_t steps = 2000;
  std::size_t samples = 50;
  std::string step_size = "auto";
  std::string schedule = "inverse_sqrt";
  std::uint64_t seed = 0;
  std::string init = "data";
  double box_radius = GaussianMeanModel::default_box_radius;
  std::string output;
  bool drop_missing_rows = false;
};

int run_fit(const FitOptions& o) {
  if (o.model != "gaussian-mean") throw ConfigError("unknown model '" + o.model + "' (only gaussian-mean is available)");
  CsvReadOptions read_options;
  read_options.na_token = o.na_token;
  read_options.drop_fully_missing = o.drop_missing_rows;
  CsvReadReport read_report;
  const Dataset data = load_csv(o.input, read_options, &read_report);
  if (data.empty()) throw InputShapeError("input has no data rows");

  const double gamma =
      o.bandwidth == "median" ? median_heuristic_bandwidth(data) : KeyValueConfig::parse_real(o.bandwidth, "bandwidth");
  SgdConfig sgd;
  sgd.steps = o.steps;
  sgd.model_samples = o.samples;
  sgd.seed = o.seed;
  if (o.schedule == "constant")
    sgd.schedule = StepSchedule::constant;
  else if (o.schedule != "inverse_sqrt")
    throw ConfigError("schedule must be inverse_sqrt or constant");
  if (o.step_size != "auto") sgd.step_size = KeyValueConfig::parse_real(o.step_size, "step-size");
  if (o.init != "data") {
    auto values = parse_reals(o.init, "init");
    if (values.size() == 1) values.assign(data.dim(), values[0]);
    if (values.size() != data.dim()) throw ConfigError("--init needs 1 or d values");
    sgd.theta_init = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  }

  const FitResult result = fit(sgd, data, KernelSpec::gaussian(gamma), GaussianMeanModel(data.dim(), o.box_radius));

  nlohmann::json out;
  out["theta_hat"] = std::vector<double>(result.theta_hat.data(), result.theta_hat.data() + result.theta_hat.size());
  out["bandwidth"] = result.bandwidth_used;
  out["final_gradient_norm"] = result.final_gradient_norm;
  out["rows"] = data.size();
  out["dropped_rows"] = read_report.dropped_rows;
  out["patterns"] = data.blocks().size();
  auto& trace = out["criterion_trace"] = nlohmann::json::array();
  for (const auto& [t, value] : result.criterion_trace) trace.push_back({{"step", t}, {"criterion", value}});

  if (o.output.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    auto file = open_output(o.output);
    file << out.dump(2) << '\n';
  }
  return exit_ok;
}

struct TableOptions {
  std::string config;
  std::optional<std::size_t> replications;
  std::size_t workers = 1;
  std::string out_dir;
};

int run_table_command(const TableOptions& o) {
  const KeyValueConfig cfg = KeyValueConfig::load(o.config);
  TableConfig table = table_config_from(cfg);
  if (o.replications) {
    if (*o.replications < 1) throw ConfigError("--replications must be >= 1");
    table.replications = *o.replications;
  }
  const fs::path dir = o.out_dir.empty() ? fs::path(cfg.text("output", ".")) : fs::path(o.out_dir);
  const std::string stem = fs::path(o.config).stem().string();

  const ResultTable result = run_table(table, o.workers);
  {
    auto csv = open_output(dir / (stem + ".csv"));
    result.write_csv(csv);
    auto txt = open_output(dir / (stem + ".txt"));
    result.write_text(txt);
  }
  nlohmann::json meta;
  std::ostringstream hash;
  hash << std::hex << cfg.hash();
  meta["config"] = o.config;
  meta["config_hash"] = hash.str();
  meta["seed"] = table.seed;
  meta["replications"] = table.replications;
  meta["workers"] = o.workers;
  meta["wall_seconds"] = result.wall_seconds;
  meta["replicate_seeds"] = result.replicate_seeds;
  meta["deviation_errors"] = result.deviation_errors;
  auto& failed = meta["failed_replicates"] = nlohmann::json::object();
  for (const auto& c : result.cells)
    if (c.summary.failed > 0) failed[c.scenario + "/" + c.estimator] = c.summary.failed;
  {
    auto file = open_output(dir / (stem + "_meta.json"));
    file << meta.dump(2) << '\n';
  }

  result.write_text(std::cout);
  for (const auto& c : result.cells)
    if (c.summary.failed > 0)
      std::cerr << "warning: " << c.summary.failed << " failed replicates in " << c.scenario << " / " << c.estimator << '\n';
  return exit_ok;
}

struct FigureOptions {
  std::string n_grid = "100,300,1000,3000,10000";
  std::size_t replications = 1000;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t steps = 2000;
  std::size_t samples = 50;
};

int run_figure_command(const FigureOptions& o) {
  Figure1Config config;
  config.n_grid.clear();
  for (double v : parse_reals(o.n_grid, "n-grid")) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("--n-grid entries must be positive integers");
    config.n_grid.push_back(static_cast<std::size_t>(v));
  }
  config.replications = o.replications;
  config.seed = o.seed;
  config.mmd.sgd.steps = o.steps;
  config.mmd.sgd.model_samples = o.samples;
  const FigureCurves curves = run_figure1(config, o.workers);
  auto csv = open_output(fs::path(o.out_dir) / "figure1.csv");
  curves.write_csv(csv);
  auto txt = open_output(fs::path(o.out_dir) / "figure1.txt");
  curves.write_text(txt);
  curves.write_text(std::cout);
  return exit_ok;
}

struct BoundOptions {
  std::string scenario_set = "standard";
  std::string out_dir;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
};

int run_bounds_command(const BoundOptions& o) {
  BoundSuiteConfig config = BoundSuiteConfig::named(o.scenario_set);
  if (o.seed) config.seed = *o.seed;
  const BoundReport report = check_bounds(config, o.workers);
  report.write_text(std::cout);
  if (!o.out_dir.empty()) {
    auto csv = open_output(fs::path(o.out_dir) / "bounds.csv");
    report.write_csv(csv);
  }
  return report.any_violated() ? exit_bound_violation : exit_ok;
}

struct SimulateOptions {
  std::string config;
  std::string scenario;
  std::uint64_t seed = 1;
  std::string output;
  std::string na_token = "NA";
};

int run_simulate_command(const SimulateOptions& o) {
  const TableConfig table = table_config_from(KeyValueConfig::load(o.config));
  std::size_t index = 0;
  if (!o.scenario.empty()) {
    while (index < table.scenarios.size() && table.scenarios[index].name != o.scenario) ++index;
    if (index == table.scenarios.size()) throw ConfigError("no scenario named '" + o.scenario + "' in " + o.config);
  }
  const Scenario& s = table.scenarios[index];
  Rng rng(o.seed);
  const Matrix rows = draw_complete(table.n, table.theta_star, s.contamination, rng);
  const MaskedData masked = apply_mechanism(rows, s.mechanism, rng);
  if (masked.excluded_rows > 0) std::cerr << "dropped " << masked.excluded_rows << " fully missing rows\n";
  if (o.output.empty()) {
    write_csv(std::cout, masked.dataset, o.na_token);
  } else {
    auto out = open_output(o.output);
    write_csv(out, masked.dataset, o.na_token);
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-MMD estimation with missing data"};
  app.require_subcommand(1);

  FitOptions fit_o;
  auto* fit_cmd = app.add_subcommand("fit", "Estimate model parameters from a CSV with missing entries");
  fit_cmd->add_option("--input", fit_o.input, "CSV file")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--na-token", fit_o.na_token, "Cell text marking a missing entry")->capture_default_str();
  fit_cmd->add_option("--model", fit_o.model, "Model family")->capture_default_str();
  fit_cmd->add_option("--bandwidth", fit_o.bandwidth, "median, or a positive kernel bandwidth gamma")->capture_default_str();
  fit_cmd->add_option("--steps", fit_o.steps, "SGD iterations T")->capture_default_str();
  fit_cmd->add_option("--samples", fit_o.samples, "Model draws per step S")->capture_default_str();
  fit_cmd->add_option("--step-size", fit_o.step_size, "auto (0.1 gamma^2) or a number")->capture_default_str();
  fit_cmd->add_option("--schedule", fit_o.schedule, "inverse_sqrt or constant")->capture_default_str();
  fit_cmd->add_option("--seed", fit_o.seed, "Random seed")->capture_default_str();
  fit_cmd->add_option("--init", fit_o.init, "data, or comma-separated initial parameter")->capture_default_str();
  fit_cmd->add_option("--box-radius", fit_o.box_radius, "Parameter box half-width")->capture_default_str();
  fit_cmd->add_option("--output", fit_o.output, "JSON result path (stdout when omitted)");
  fit_cmd->add_flag("--drop-missing-rows", fit_o.drop_missing_rows, "Skip fully missing rows instead of failing");

  TableOptions table_o;
  auto* table_cmd = app.add_subcommand("table", "Replicated RMSE table from a config file");
  table_cmd->add_option("--config", table_o.config, "Experiment config")->required()->check(CLI::ExistingFile);
  table_cmd->add_option("--replications", table_o.replications, "Override the config's replication count");
  table_cmd->add_option("--workers", table_o.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  table_cmd->add_option("--out-dir", table_o.out_dir, "Output directory (config 'output' when omitted)");

  FigureOptions fig_o;
  auto* fig_cmd = app.add_subcommand("figure1", "Univariate estimator curves over sample size");
  fig_cmd->add_option("--n-grid", fig_o.n_grid, "Comma-separated sample sizes")->capture_default_str();
  fig_cmd->add_option("--replications", fig_o.replications, "Replications per point")->capture_default_str();
  fig_cmd->add_option("--out-dir", fig_o.out_dir, "Output directory")->capture_default_str();
  fig_cmd->add_option("--seed", fig_o.seed, "Master seed")->capture_default_str();
  fig_cmd->add_option("--workers", fig_o.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  fig_cmd->add_option("--steps", fig_o.steps, "SGD iterations for the MMD fit")->capture_default_str();
  fig_cmd->add_option("--samples", fig_o.samples, "Model draws per step")->capture_default_str();

  BoundOptions bound_o;
  auto* bound_cmd = app.add_subcommand("check-bounds", "Compare empirical errors with the robustness bounds");
  bound_cmd->add_option("--scenario-set", bound_o.scenario_set, "standard or smoke")->capture_default_str();
  bound_cmd->add_option("--out-dir", bound_o.out_dir, "Write bounds.csv here");
  bound_cmd->add_option("--workers", bound_o.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  bound_cmd->add_option("--seed", bound_o.seed, "Master seed");

  SimulateOptions sim_o;
  auto* sim_cmd = app.add_subcommand("simulate", "Emit one synthetic masked CSV from a config scenario");
  sim_cmd->add_option("--config", sim_o.config, "Experiment config")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--scenario", sim_o.scenario, "Scenario name (first when omitted)");
  sim_cmd->add_option("--seed", sim_o.seed, "Random seed")->capture_default_str();
  sim_cmd->add_option("--output", sim_o.output, "CSV path (stdout when omitted)");
  sim_cmd->add_option("--na-token", sim_o.na_token, "Missing-entry token")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*fit_cmd) return run_fit(fit_o);
    if (*table_cmd) return run_table_command(table_o);
    if (*fig_cmd) return run_figure_command(fig_o);
    if (*bound_cmd) return run_bounds_command(bound_o);
    if (*sim_cmd) return run_simulate_command(sim_o);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_usage;
  }
  return exit_usage;
}
