//
// Copyright 2026 The dpwo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <gtest/gtest.h>

#include <set>
#include <string>

#include "dpwo/workload.hpp"
#include "test_support.hpp"

namespace dpwo {
namespace {

using testing::TempDir;

std::string LoadError(const std::string& text) {
  try {
    ParseMatrixCsv(text);
  } catch (const IoError& e) {
    return e.what();
  }
  return "";
}

TEST(LoadMatrix, IdentityCsv) {
  const QueryMatrix a = ParseMatrixCsv("1,0\n0,1");
  EXPECT_EQ(a.num_queries(), 2);
  EXPECT_EQ(a.universe_size(), 2);
  EXPECT_TRUE(a.entries().isIdentity());
}

TEST(LoadMatrix, EmptyInputHasNoRows) {
  EXPECT_EQ(LoadError(""), "no rows");
  EXPECT_EQ(LoadError("\n\n"), "no rows");
}

TEST(LoadMatrix, NonNumericReportsPosition) {
  EXPECT_EQ(LoadError("1,a"), "non-numeric at (1,2)");
  EXPECT_EQ(LoadError("1,2\n3,"), "non-numeric at (2,2)");
}

TEST(LoadMatrix, RaggedRowsRejected) {
  EXPECT_NE(LoadError("1,2\n3").find("ragged"), std::string::npos);
}

TEST(LoadMatrix, NonFiniteRejected) {
  EXPECT_NE(LoadError("1,inf").find("non-finite"), std::string::npos);
  EXPECT_NE(LoadError("nan").find("non-finite"), std::string::npos);
}

TEST(LoadMatrix, MissingFileIsIoError) {
  EXPECT_THROW(LoadMatrix("/nonexistent/dir/w.csv", MatrixFormat::kCsv), IoError);
}

TEST(LoadMatrix, JsonLayout) {
  const QueryMatrix a = ParseMatrixJson(R"({"rows":2,"cols":3,"data":[1,2,3,4,5,6]})");
  EXPECT_EQ(a.entries()(1, 0), 4.0);
  EXPECT_EQ(a.entries()(0, 2), 3.0);
  EXPECT_THROW(ParseMatrixJson(R"({"rows":2,"cols":3,"data":[1,2]})"), IoError);
  EXPECT_THROW(ParseMatrixJson("{not json"), IoError);
}

TEST(SaveMatrix, IdentityRoundTrip) {
  TempDir dir;
  const QueryMatrix a(Eigen::MatrixXd::Identity(3, 3));
  for (MatrixFormat f : {MatrixFormat::kCsv, MatrixFormat::kJson}) {
    const std::string path = dir.File(f == MatrixFormat::kCsv ? "i.csv" : "i.json");
    SaveMatrix(a, path, f);
    EXPECT_EQ(LoadMatrix(path, f), a);
  }
}

TEST(SaveMatrix, RowVectorRoundTrip) {
  TempDir dir;
  Eigen::MatrixXd row(1, 3);
  row << 1, 2, 3;
  const QueryMatrix a(row);
  SaveMatrix(a, dir.File("r.csv"), MatrixFormat::kCsv);
  EXPECT_EQ(LoadMatrix(dir.File("r.csv"), MatrixFormat::kCsv), a);
}

TEST(SaveMatrix, BitExactForArbitraryDoubles) {
  TempDir dir;
  std::mt19937_64 rng(11);
  const QueryMatrix a(testing::RandomGaussianMatrix(5, 7, rng) * 1e-3);
  for (MatrixFormat f : {MatrixFormat::kCsv, MatrixFormat::kJson}) {
    const std::string path = dir.File("g");
    SaveMatrix(a, path, f);
    const QueryMatrix b = LoadMatrix(path, f);
    EXPECT_TRUE((b.entries().array() == a.entries().array()).all());
  }
}

TEST(SaveMatrix, GeneratorsRoundTrip) {
  TempDir dir;
  for (const QueryMatrix& a : {GenRandomCounting(6, 5, 0.4, 3), GenIntervalQueries(4)}) {
    for (MatrixFormat f : {MatrixFormat::kCsv, MatrixFormat::kJson}) {
      SaveMatrix(a, dir.File("m"), f);
      EXPECT_EQ(LoadMatrix(dir.File("m"), f), a);
    }
  }
}

TEST(SaveMatrix, UnwritablePathIsIoError) {
  const QueryMatrix a(Eigen::MatrixXd::Identity(2, 2));
  EXPECT_THROW(SaveMatrix(a, "/nonexistent/dir/out.csv", MatrixFormat::kCsv), IoError);
}

TEST(QueryMatrixInvariants, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(QueryMatrix(Eigen::MatrixXd(0, 3)), InvalidArgument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(QueryMatrix{bad}, InvalidArgument);
}

TEST(QueryMatrixInvariants, RankFlag) {
  const QueryMatrix a(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_FALSE(a.verified_rank().has_value());
  EXPECT_FALSE(a.has_full_row_rank());
  EXPECT_TRUE(a.WithVerifiedRank(3).has_full_row_rank());
  EXPECT_FALSE(a.WithVerifiedRank(2).has_full_row_rank());
}

TEST(GenRandomCounting, DensityOneIsAllOnes) {
  EXPECT_TRUE(GenRandomCounting(4, 6, 1.0, 99).entries().isOnes());
}

TEST(GenRandomCounting, DeterministicGivenSeed) {
  EXPECT_EQ(GenRandomCounting(3, 4, 0.5, 7), GenRandomCounting(3, 4, 0.5, 7));
  EXPECT_FALSE(GenRandomCounting(30, 40, 0.5, 7) == GenRandomCounting(30, 40, 0.5, 8));
}

TEST(GenRandomCounting, FractionOfOnesConcentrates) {
  const QueryMatrix a = GenRandomCounting(100, 100, 0.5, 2024);
  const double fraction = a.entries().sum() / 1e4;
  EXPECT_GE(fraction, 0.45);
  EXPECT_LE(fraction, 0.55);
  EXPECT_TRUE((a.entries().array() == 0.0 || a.entries().array() == 1.0).all());
}

TEST(GenRandomCounting, InvalidDensity) {
  EXPECT_THROW(GenRandomCounting(2, 2, 0.0, 1), InvalidArgument);
  EXPECT_THROW(GenRandomCounting(2, 2, 1.5, 1), InvalidArgument);
  EXPECT_THROW(GenRandomCounting(0, 2, 0.5, 1), InvalidArgument);
}

TEST(GenIntervalQueries, SingleElement) {
  const QueryMatrix a = GenIntervalQueries(1);
  EXPECT_EQ(a.num_queries(), 1);
  EXPECT_EQ(a.entries()(0, 0), 1.0);
}

TEST(GenIntervalQueries, UniverseTwo) {
  const QueryMatrix a = GenIntervalQueries(2);
  std::set<std::vector<double>> rows;
  for (int r = 0; r < a.num_queries(); ++r) rows.insert({a.entries()(r, 0), a.entries()(r, 1)});
  EXPECT_EQ(rows, (std::set<std::vector<double>>{{1, 0}, {0, 1}, {1, 1}}));
}

TEST(GenIntervalQueries, UniverseThreeContainsFullInterval) {
  const QueryMatrix a = GenIntervalQueries(3);
  ASSERT_EQ(a.num_queries(), 6);
  bool found = false;
  for (int r = 0; r < 6; ++r) found |= a.entries().row(r).isOnes();
  EXPECT_TRUE(found);
  EXPECT_EQ(a.row_labels().back(), "[1,3]");
}

TEST(GenIntervalQueries, DistinctContiguousRows) {
  for (int u = 1; u <= 9; ++u) {
    const QueryMatrix a = GenIntervalQueries(u);
    ASSERT_EQ(a.num_queries(), u * (u + 1) / 2);
    std::set<std::pair<int, int>> intervals;
    for (int r = 0; r < a.num_queries(); ++r) {
      int first = -1, last = -1, ones = 0;
      for (int c = 0; c < u; ++c) {
        if (a.entries()(r, c) == 1.0) {
          if (first < 0) first = c;
          last = c;
          ++ones;
        } else {
          EXPECT_EQ(a.entries()(r, c), 0.0);
        }
      }
      ASSERT_GE(first, 0);
      EXPECT_EQ(ones, last - first + 1);
      intervals.insert({first, last});
    }
    EXPECT_EQ(static_cast<int>(intervals.size()), a.num_queries());
  }
}

TEST(GenHistogram, PointMass) {
  const Histogram x = GenHistogram(3, 5, HistogramMode::PointMass(2), 0);
  EXPECT_EQ(x.counts(), (std::vector<std::int64_t>{0, 5, 0}));
}

TEST(GenHistogram, EmptyDatabase) {
  const Histogram x = GenHistogram(4, 0, HistogramMode::UniformRandom(), 3);
  EXPECT_EQ(x.counts(), (std::vector<std::int64_t>{0, 0, 0, 0}));
}

TEST(GenHistogram, UniformIsReproducibleAndSumsToN) {
  const Histogram x = GenHistogram(4, 8, HistogramMode::UniformRandom(), 17);
  EXPECT_EQ(x, GenHistogram(4, 8, HistogramMode::UniformRandom(), 17));
  EXPECT_EQ(x.l1_norm(), 8);
}

TEST(GenHistogram, ElementOutOfRange) {
  EXPECT_THROW(GenHistogram(3, 5, HistogramMode::PointMass(0), 0), InvalidArgument);
  EXPECT_THROW(GenHistogram(3, 5, HistogramMode::PointMass(4), 0), InvalidArgument);
}

TEST(HistogramIo, RejectsRealValuedAndOversized) {
  EXPECT_THROW(ParseHistogramCsv("1,2.5,0", 10), IoError);
  EXPECT_THROW(ParseHistogramCsv("1,-1", 10), IoError);
  EXPECT_THROW(ParseHistogramCsv("4,4", 7), IoError);
  EXPECT_EQ(ParseHistogramCsv("4,3\n", 7).counts(), (std::vector<std::int64_t>{4, 3}));
}

TEST(HistogramIo, RoundTrip) {
  TempDir dir;
  const Histogram x = GenHistogram(6, 20, HistogramMode::UniformRandom(), 5);
  SaveHistogram(x, dir.File("x.csv"));
  EXPECT_EQ(LoadHistogram(dir.File("x.csv"), 20), x);
}

TEST(SensitivityPolytope, VerticesAreSignedColumns) {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const QueryMatrix a(m);
  const SensitivityPolytopeView view(a);
  EXPECT_EQ(view.Vertex(2), m.col(1));
  EXPECT_EQ(view.Vertex(-3), -m.col(2));
  EXPECT_THROW(view.Vertex(0), InvalidArgument);
  EXPECT_THROW(view.Vertex(4), InvalidArgument);

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(2, 2);
  p(0, 0) = 1.0;
  const SensitivityPolytopeView projected(a, p);
  EXPECT_EQ(projected.Vertex(1), Eigen::Vector2d(1, 0));
  EXPECT_TRUE(projected.gram().isApprox(projected.projected_columns().transpose() *
                                        projected.projected_columns()));
}

}  // namespace
}  // namespace dpwo
