#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "mmdmiss/data.hpp"
#include "mmdmiss/model.hpp"

using namespace mmdmiss;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Dataset parse(const std::string& text, const CsvReadOptions& options = {}, CsvReadReport* report = nullptr) {
  std::istringstream in(text);
  return read_csv(in, options, report);
}

const double NA = not_available();

}  // namespace

TEST(Pattern, RejectsEmptyPattern) {
  EXPECT_THROW(Pattern(Mask{true, true}), InputShapeError);
  EXPECT_THROW(Pattern(Mask{}), InputShapeError);
  EXPECT_EQ(Pattern(Mask{true, false, true}).n_observed(), 1u);
  EXPECT_EQ(Pattern(Mask{false, true}), Pattern::observing(2, {0}));
  EXPECT_EQ(Pattern(Mask{false, true, false}).to_string(), "010");
}

TEST(Project, ObservedPartInCoordinateOrder) {
  EXPECT_EQ(project(Observation(vec({1, 2, 3}), Mask{false, false, false})), vec({1, 2, 3}));
  EXPECT_EQ(project(Observation(vec({1, NA, 3}), Mask{false, true, false})), vec({1, 3}));
  EXPECT_EQ(project(Observation(vec({NA, NA, 7}), Mask{true, true, false})), vec({7}));
}

TEST(Project, MaskedSlotsAreOverwritten) {
  const Observation obs(vec({1, 99, 3}), Mask{false, true, false});
  EXPECT_TRUE(std::isnan(obs.values()[1]));
  EXPECT_EQ(project(obs), project_to_pattern(vec({1, -5, 3}), obs.pattern()));
}

TEST(ProjectToPattern, Examples) {
  EXPECT_EQ(project_to_pattern(vec({4, 5, 6}), Pattern::observing(3, {0, 2})), vec({4, 6}));
  EXPECT_EQ(project_to_pattern(vec({4, 5, 6}), Pattern::complete(3)), vec({4, 5, 6}));
  EXPECT_THROW(project_to_pattern(vec({4, 5}), Pattern::complete(3)), InputShapeError);
}

TEST(Dataset, BlocksPartitionRows) {
  const Dataset data(2, {Observation(vec({1, NA}), Mask{false, true}), Observation(vec({2, 3}), Mask{false, false}),
                         Observation(vec({4, NA}), Mask{false, true})});
  ASSERT_EQ(data.blocks().size(), 2u);
  EXPECT_EQ(data.blocks()[0].rows, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(data.blocks()[1].rows, (std::vector<std::size_t>{1}));
  EXPECT_EQ(data.blocks()[0].values, Matrix(vec({1, 4})));
  EXPECT_THROW(Dataset(3, {Observation(vec({1, 2}), Mask{false, false})}), InputShapeError);
}

TEST(GroupByPattern, Examples) {
  const Dataset data(2, {Observation(vec({1, NA}), Mask{false, true}), Observation(vec({2, NA}), Mask{false, true}),
                         Observation(vec({5, 6}), Mask{false, false})});
  const auto groups = group_by_pattern(data);
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].observations.size(), 2u);
  EXPECT_EQ(groups[0].observations[1].values()[0], 2.0);
  EXPECT_EQ(groups[1].observations.size(), 1u);

  Rng rng(1);
  const Matrix x = GaussianMeanModel(3).sample(Vector::Zero(3), 10, rng);
  EXPECT_EQ(group_by_pattern(Dataset::complete(x)).size(), 1u);
  EXPECT_TRUE(group_by_pattern(Dataset(4)).empty());
}

TEST(Csv, ReadsMasksAndValues) {
  const Dataset data = parse("1.0,NA\n2.0,3.0\n");
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].mask(), (Mask{false, true}));
  EXPECT_EQ(data[1].mask(), (Mask{false, false}));
  EXPECT_EQ(data[1].values(), vec({2, 3}));
}

TEST(Csv, HeaderIsDetected) {
  CsvReadReport report;
  const Dataset data = parse("a,b\n1,2\n", {}, &report);
  EXPECT_EQ(data.size(), 1u);
  EXPECT_TRUE(report.had_header);
  EXPECT_EQ(report.column_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, FullyMissingRowIsRejectedWithRowIndex) {
  try {
    parse("NA,NA\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(Csv, FullyMissingRowsCanBeDropped) {
  CsvReadOptions options;
  options.drop_fully_missing = true;
  CsvReadReport report;
  const Dataset data = parse("1,2\nNA,NA\n3,NA\n", options, &report);
  EXPECT_EQ(data.size(), 2u);
  EXPECT_EQ(report.dropped_rows, 1u);
}

TEST(Csv, MalformedInputNamesRowAndColumn) {
  try {
    parse("1,2\n3,x\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), 2u);
  }
  try {
    parse("1,2\n3\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(Csv, CustomNaTokenAndWhitespace) {
  CsvReadOptions options;
  options.na_token = "?";
  const Dataset data = parse(" 1.5 , ?\r\n-2e-3,4\n", options);
  ASSERT_EQ(data.size(), 2u);
  EXPECT_EQ(data[0].mask(), (Mask{false, true}));
  EXPECT_DOUBLE_EQ(data[1].values()[0], -2e-3);
}

TEST(Csv, RoundTripPreservesValuesAndMasks) {
  Rng rng(77);
  const Matrix x = GaussianMeanModel(4).sample(Vector::Constant(4, 1e3), 200, rng);
  std::vector<Mask> masks;
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < 200; ++i) {
    Mask m{coin(rng), coin(rng), coin(rng), false};
    masks.push_back(m);
  }
  const Dataset original = Dataset::from_rows(x, masks);
  std::stringstream buffer;
  write_csv(buffer, original, "NA", {"w", "x", "y", "z"});
  const Dataset reloaded = read_csv(buffer);
  ASSERT_EQ(reloaded.size(), original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    EXPECT_EQ(reloaded[i].mask(), original[i].mask());
    const Vector a = project(original[i]);
    const Vector b = project(reloaded[i]);
    for (Eigen::Index c = 0; c < a.size(); ++c) EXPECT_NEAR(b[c], a[c], 1e-15 * std::abs(a[c]));
  }
}
