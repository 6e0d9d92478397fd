#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "mmdmiss/experiments.hpp"

using namespace mmdmiss;

namespace {

ExperimentConfig mcar_experiment(std::size_t n, std::size_t reps) {
  ExperimentConfig c;
  c.n = n;
  c.theta_star = Vector::Zero(1);
  c.scenario = {"clean", DataContamination::none(), MechanismSpec::univariate_mcar(0.5)};
  c.estimators = {EstimatorSpec::baseline(BaselineKind::ignoring_mle_gaussian)};
  c.replications = reps;
  c.seed = 42;
  return c;
}

TableConfig small_table() {
  TableConfig t;
  t.n = 200;
  t.theta_star = Vector::Zero(10);
  for (const auto& [name, law] :
       {std::pair{"N(0)", DataContamination::gaussian(0.2, Vector::Zero(10))},
        std::pair{"delta(10)", DataContamination::point_mass(0.2, Vector::Constant(10, 10.0))}})
    t.scenarios.push_back({name, law,
                           MechanismSpec::huber_mixture(MechanismSpec::blockwise_mcar(),
                                                        MechanismSpec::self_censoring(law), 0.2)});
  MmdEstimatorSpec mmd;
  mmd.sgd.steps = 100;
  mmd.sgd.model_samples = 10;
  t.estimators = {EstimatorSpec::mmd(mmd), EstimatorSpec::baseline(BaselineKind::ignoring_mle_gaussian),
                  EstimatorSpec::baseline(BaselineKind::coordinate_median)};
  t.replications = 6;
  t.seed = 5;
  return t;
}

}  // namespace

TEST(Seeds, ChildSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t stream = 0; stream < 20; ++stream)
    for (std::uint64_t i = 0; i < 500; ++i) seen.insert(child_seed(7, stream, i));
  EXPECT_EQ(seen.size(), 20u * 500u);
  EXPECT_NE(child_seed(7, 0, 0), child_seed(8, 0, 0));
  EXPECT_EQ(child_seed(7, 3, 4), child_seed(7, 3, 4));
}

TEST(Replication, Deterministic) {
  const auto c = mcar_experiment(300, 3);
  const auto a = run_replication(c, 1);
  const auto b = run_replication(c, 1);
  EXPECT_EQ(a.seed, b.seed);
  EXPECT_EQ(a.estimates[0], b.estimates[0]);
  EXPECT_EQ(a.observed_rows + a.excluded_rows, 300u);
  EXPECT_NE(run_replication(c, 2).estimates[0], a.estimates[0]);
}

TEST(Replication, McarMleIsAccurate) {
  const auto records = run_replications(mcar_experiment(10000, 200), 1);
  std::size_t good = 0;
  for (const auto& r : records) good += r.errors[0] < 0.05;
  EXPECT_GE(good, 190u);
}

TEST(Replication, EstimatorFailureIsRecordedAsNaN) {
  auto c = mcar_experiment(50, 1);
  c.theta_star = Vector::Zero(2);
  c.scenario.mechanism = MechanismSpec::mcar({{Mask{false, true}, 1.0}});
  const auto r = run_replication(c, 0);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_TRUE(std::isnan(r.errors[0]));
  EXPECT_FALSE(r.failures[0].empty());
}

TEST(Replication, DeviationErrorIsSurfaced) {
  auto c = mcar_experiment(100, 1);
  c.scenario.mechanism = MechanismSpec::adversarial(0.5, 0.1);
  c.report_deviation = true;
  const auto r = run_replication(c, 0);
  EXPECT_FALSE(r.deviation.has_value());
  EXPECT_FALSE(r.deviation_error.empty());
  EXPECT_TRUE(std::isfinite(r.errors[0]));
}

TEST(SummarizeErrors, RmseAndSampleStd) {
  const auto s = summarize_errors({1.0, 2.0, 3.0, std::nan("")});
  EXPECT_NEAR(s.rmse, std::sqrt(14.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.std, 1.0, 1e-15);
  EXPECT_EQ(s.used, 3u);
  EXPECT_EQ(s.failed, 1u);
  const auto none = summarize_errors({std::nan("")});
  EXPECT_TRUE(std::isnan(none.rmse));
}

TEST(SummarizeErrors, RmseSquaredIsBiasSquaredPlusVariance) {
  std::vector<double> e;
  for (int i = 0; i < 37; ++i) e.push_back(0.1 + 0.03 * std::sin(i));
  const auto s = summarize_errors(e);
  double mean = 0.0;
  for (double v : e) mean += v / e.size();
  const double n = static_cast<double>(e.size());
  EXPECT_NEAR(s.rmse * s.rmse, mean * mean + s.std * s.std * (n - 1) / n, 1e-14);
}

TEST(Quantile, TypeSevenInterpolation) {
  EXPECT_EQ(quantile({3, 1, 2, 4}, 0.5), 2.5);
  EXPECT_EQ(quantile({3, 1, 2, 4}, 0.25), 1.75);
  EXPECT_EQ(quantile({5}, 0.9), 5.0);
  EXPECT_EQ(quantile({1, std::nan(""), 3}, 0.5), 2.0);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
  EXPECT_EQ(format_number(std::nan("")), "NaN");
  EXPECT_EQ(format_number(0.125, 2), "0.12");
}

TEST(Table, WorkerCountDoesNotChangeResults) {
  const auto t = small_table();
  const auto serial = run_table(t, 1);
  const auto parallel = run_table(t, 3);
  std::ostringstream a, b;
  serial.write_csv(a);
  parallel.write_csv(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(serial.replicate_seeds, parallel.replicate_seeds);
  EXPECT_EQ(serial.cells.size(), 6u);
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "scenario,estimator,rmse,std,n_replications");
  EXPECT_EQ(serial.cell("delta(10)", "MLE").replicate_errors.size(), 6u);
}

TEST(Table, ContaminationSeparatesEstimators) {
  auto t = small_table();
  t.replications = 4;
  t.estimators[0] = EstimatorSpec::mmd(MmdEstimatorSpec{});  // default step budget
  const auto r = run_table(t, 1);
  EXPECT_GT(r.cell("delta(10)", "MLE").summary.rmse, 4.0);
  EXPECT_LT(r.cell("delta(10)", "MMD").summary.rmse, 1.5);
  std::ostringstream text;
  r.write_text(text);
  EXPECT_NE(text.str().find("Median"), std::string::npos);
}

TEST(Table, ConfigErrors) {
  auto t = small_table();
  t.scenarios.clear();
  EXPECT_THROW(run_table(t), ConfigError);
  auto c = mcar_experiment(10, 1);
  c.estimators.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = mcar_experiment(0, 1);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Figure1, SmallGridShape) {
  Figure1Config f;
  f.n_grid = {50, 100};
  f.replications = 5;
  f.mmd.sgd.steps = 50;
  f.mmd.sgd.model_samples = 5;
  const auto curves = run_figure1(f, 2);
  EXPECT_EQ(curves.points.size(), 2u * 3u * 2u);
  const auto& p = curves.at("adversarial", "AvgExtremes", 100);
  EXPECT_EQ(p.estimates.size(), 5u);
  EXPECT_LE(p.q25, p.median);
  EXPECT_LE(p.median, p.q75);
  std::ostringstream csv;
  curves.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "mechanism,estimator,n,q25,median,q75");
}
