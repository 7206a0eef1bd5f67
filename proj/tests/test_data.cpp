#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "support.hpp"
#include "tmach/data.hpp"
#include "tmach/errors.hpp"

namespace {

using namespace tmach;
using tmach::testing::gaussian;

Dataset parse_svm(const std::string& text) {
  std::istringstream in(text);
  return parse_sparse_text(in);
}

Dataset parse_csv_text(const std::string& text, int label) {
  std::istringstream in(text);
  return parse_csv(in, label);
}

double row_norm(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

TEST(SparseText, ParsesRowsAndPadsAbsentIndices) {
  const Dataset a = parse_svm("1 1:0.5 3:2.0\n");
  EXPECT_EQ(a.y, (std::vector<double>{1.0}));
  EXPECT_EQ(a.x.values, (std::vector<double>{0.5, 0.0, 2.0}));

  const Dataset b = parse_svm("-1 2:1\r\n# comment\n\n1 1:1\n");
  EXPECT_EQ(b.size(), 2u);
  EXPECT_EQ(b.dim(), 2u);
  EXPECT_EQ(b.x.values, (std::vector<double>{0.0, 1.0, 1.0, 0.0}));
  EXPECT_EQ(b.y, (std::vector<double>{-1.0, 1.0}));
}

TEST(SparseText, ErrorsReportLineAndColumn) {
  try {
    parse_svm("1 1:1\n2 1:0.5 x:3\n");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("column 9"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_svm("1 3:1 2:1\n"), DataError);
  EXPECT_THROW(parse_svm("1 2:1 2:1\n"), DataError);
  EXPECT_THROW(parse_svm("1 0:1\n"), DataError);
  EXPECT_THROW(parse_svm(""), DataError);
  EXPECT_THROW(parse_svm("abc 1:1\n"), DataError);
}

TEST(SparseText, RoundTripIsExact) {
  std::mt19937_64 rng(1);
  Dataset d;
  d.x = Matrix(5, 4);
  d.x.values = gaussian(20, rng);
  d.x(2, 1) = 0.0;
  d.x(4, 3) = 1.0 / 3.0;
  d.y = gaussian(5, rng);
  std::stringstream s;
  write_sparse_text(s, d);
  const Dataset back = parse_sparse_text(s);
  EXPECT_EQ(back.x, d.x);
  EXPECT_EQ(back.y, d.y);
}

TEST(Csv, HeaderLabelPositionAndSingleRow) {
  const Dataset h = parse_csv_text("y,a,b\n1,2,3\n4,5,6\n", 0);
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.y, (std::vector<double>{1, 4}));
  EXPECT_EQ(h.x.values, (std::vector<double>{2, 3, 5, 6}));

  const Dataset last = parse_csv_text("2,3,1\n5,6,4\n", -1);
  EXPECT_EQ(last.x, h.x);
  EXPECT_EQ(last.y, h.y);

  const Dataset one = parse_csv_text("7,8\n", 1);
  EXPECT_EQ(one.size(), 1u);
  EXPECT_EQ(one.y, (std::vector<double>{8}));
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv_text("1,2\n3\n", 0), DataError);
  EXPECT_THROW(parse_csv_text("1,2\n3,x\n", 0), DataError);
  EXPECT_THROW(parse_csv_text("1,2\n", 5), DataError);
  EXPECT_THROW(parse_csv_text("", 0), DataError);
}

TEST(Labels, ZeroOneRemap) {
  Dataset d = parse_svm("0 1:1\n1 1:2\n");
  EXPECT_TRUE(normalize_binary_labels(d));
  EXPECT_EQ(d.y, (std::vector<double>{-1, 1}));
  EXPECT_EQ(d.task, Task::binary);
  EXPECT_FALSE(normalize_binary_labels(d));
  Dataset bad = parse_svm("2 1:1\n");
  EXPECT_THROW(normalize_binary_labels(bad), DataError);
}

TEST(Preprocess, HandExample) {
  Dataset train = parse_csv_text("0,3,0\n0,4,0\n", 0);
  const auto [tr, te] = preprocess(train, train);
  EXPECT_EQ(tr.x.values, (std::vector<double>{1, 0, 1, 0}));
  EXPECT_EQ(tr.column_divisors, (std::vector<double>{5, 1}));
  EXPECT_EQ(tr.state, PrepState::row_normalized);
}

TEST(Preprocess, RowNormsAndZeroRows) {
  std::mt19937_64 rng(2);
  Dataset d;
  d.x = Matrix(30, 6);
  d.x.values = gaussian(180, rng, 3.0);
  std::fill(d.x.row(4).begin(), d.x.row(4).end(), 0.0);
  d.y.assign(30, 0.0);
  const auto [tr, te] = preprocess(d, d);
  for (std::size_t i = 0; i < 30; ++i) {
    const double n = row_norm(tr.row(i));
    if (i == 4) {
      EXPECT_EQ(n, 0.0);
    } else {
      EXPECT_NEAR(n, 1.0, 1e-12);
    }
  }
}

TEST(Preprocess, IdempotentAndFixedPointOnUnitData) {
  std::mt19937_64 rng(3);
  Dataset d;
  d.x = Matrix(10, 3);
  d.x.values = gaussian(30, rng);
  d.y.assign(10, 1.0);
  const auto once = preprocess(d, d);
  const auto twice = preprocess(once.first, once.second);
  EXPECT_EQ(twice.first.x, once.first.x);
  EXPECT_EQ(twice.second.x, once.second.x);

  // Orthonormal rows already have unit columns and unit rows.
  const Dataset unit = parse_csv_text("0,1,0\n0,0,1\n", 0);
  EXPECT_EQ(preprocess(unit, unit).first.x, unit.x);
}

TEST(Preprocess, TestUsesTrainStatisticsOnly) {
  std::mt19937_64 rng(4);
  Dataset train, test;
  train.x = Matrix(8, 3);
  train.x.values = gaussian(24, rng);
  train.y.assign(8, 0.0);
  test.x = Matrix(5, 3);
  test.x.values = gaussian(15, rng);
  test.y = {0, 1, 2, 3, 4};
  const Dataset processed = preprocess(train, test).second;

  const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  const Dataset permuted_after = processed.subset(perm);
  const Dataset permuted_before = preprocess(train, test.subset(perm)).second;
  EXPECT_EQ(permuted_before.x, permuted_after.x);
  Dataset narrow;
  narrow.x = Matrix(1, 2);
  narrow.y = {0.0};
  EXPECT_THROW(preprocess(train, narrow), DimensionError);
}

TEST(Kfold, CoverAndDeterminism) {
  const auto singles = kfold(10, 10, 1);
  for (const auto& f : singles) EXPECT_EQ(f.size(), 1u);

  const auto folds = kfold(23, 5, 7);
  std::set<std::size_t> seen;
  std::size_t total = 0;
  for (const auto& f : folds) {
    EXPECT_TRUE(f.size() == 4 || f.size() == 5);
    total += f.size();
    seen.insert(f.begin(), f.end());
  }
  EXPECT_EQ(total, 23u);
  EXPECT_EQ(seen.size(), 23u);
  EXPECT_EQ(*seen.rbegin(), 22u);
  EXPECT_EQ(folds, kfold(23, 5, 7));
  EXPECT_NE(folds, kfold(23, 5, 8));
  EXPECT_THROW(kfold(3, 4, 0), std::invalid_argument);
  EXPECT_THROW(kfold(3, 0, 0), std::invalid_argument);
}

TEST(Metric, RegressionAndClassification) {
  const std::vector<double> truth{1.0, -2.0, 2.0};
  EXPECT_EQ(metric(truth, truth, Task::regression).value, 0.0);
  const std::vector<double> doubled{2.0, -4.0, 4.0};
  EXPECT_DOUBLE_EQ(metric(doubled, truth, Task::regression).value, 1.0);

  const std::vector<double> f{0.3, -0.1, 0.0}, labels{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(metric(f, labels, Task::binary).value, 1.0 / 3.0);
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  EXPECT_THROW(metric(truth, zeros, Task::regression), std::invalid_argument);
  EXPECT_THROW(metric(f, std::vector<double>{1.0}, Task::binary), DimensionError);
}

TEST(Synth, NoiselessTargetsAreExact) {
  const SynthTask t = synth_tm_task(5, 4, 3, 2, 50, 20, 0.0);
  EXPECT_EQ(predict(t.truth, t.train), t.train.y);
  for (std::size_t i = 0; i < t.train.size(); ++i) EXPECT_NEAR(row_norm(t.train.row(i)), 1.0, 1e-14);
  EXPECT_EQ(metric(predict(t.truth, t.test), t.test.y, Task::regression).value, 0.0);
  EXPECT_EQ(t.truth.shape(), (TmShape{4, 3, 2}));
  EXPECT_THROW(synth_tm_task(1, 0, 2, 1, 5, 5, 0.0), std::invalid_argument);
}

TEST(Synth, NoiseFloorMatchesDirectComputation) {
  const double sd = 0.1;
  const SynthTask t = synth_tm_task(6, 5, 2, 1, 4000, 10, sd);
  const auto clean = predict(t.truth, t.train);
  double noise2 = 0.0, signal2 = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    noise2 += (t.train.y[i] - clean[i]) * (t.train.y[i] - clean[i]);
    signal2 += t.train.y[i] * t.train.y[i];
  }
  EXPECT_NEAR(noise2 / clean.size(), sd * sd, 0.1 * sd * sd);
  EXPECT_NEAR(metric(clean, t.train.y, Task::regression).value, std::sqrt(noise2 / signal2), 1e-12);
}

}  // namespace
