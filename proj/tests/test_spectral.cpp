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

#include <algorithm>
#include <cmath>
#include <random>

#include "dpwo/spectral.hpp"
#include "test_support.hpp"

namespace dpwo {
namespace {

double MaxAbs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

void ExpectValidDecomposition(const Eigen::MatrixXd& s, const EigenDecomposition& eig) {
  const int n = static_cast<int>(s.rows());
  EXPECT_LE(MaxAbs(eig.eigenvectors.transpose() * eig.eigenvectors -
                   Eigen::MatrixXd::Identity(n, n)),
            1e-10);
  EXPECT_LE(MaxAbs(eig.Reconstruct() - s), 1e-8 * (1.0 + MaxAbs(s)));
  for (int i = 1; i < n; ++i) EXPECT_GE(eig.eigenvalues(i - 1), eig.eigenvalues(i));
}

TEST(SymEig, Diagonal) {
  const EigenDecomposition eig = SymEig(Eigen::Vector2d(2, 1).asDiagonal());
  EXPECT_EQ(eig.eigenvalues, Eigen::Vector2d(2, 1));
  EXPECT_TRUE(eig.eigenvectors.isIdentity());
}

TEST(SymEig, TwoByTwoByHand) {
  Eigen::Matrix2d s;
  s << 2, 1, 1, 2;
  const EigenDecomposition eig = SymEig(s);
  EXPECT_NEAR(eig.eigenvalues(0), 3.0, 1e-12);
  EXPECT_NEAR(eig.eigenvalues(1), 1.0, 1e-12);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(eig.eigenvectors.col(0).dot(Eigen::Vector2d(r, r))), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(eig.eigenvectors.col(1).dot(Eigen::Vector2d(r, -r))), 1.0, 1e-12);
}

TEST(SymEig, ZeroMatrix) {
  const EigenDecomposition eig = SymEig(Eigen::MatrixXd::Zero(4, 4));
  EXPECT_TRUE(eig.eigenvalues.isZero());
  EXPECT_TRUE((eig.eigenvectors.transpose() * eig.eigenvectors).isIdentity(1e-12));
}

TEST(SymEig, RandomMatchesReferenceSolver) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + trial % 20;
    const Eigen::MatrixXd s = testing::RandomSymmetric(dim, rng);
    const EigenDecomposition eig = SymEig(s);
    ExpectValidDecomposition(s, eig);
    EXPECT_LE((eig.eigenvalues - testing::OracleEigenvalues(s)).cwiseAbs().maxCoeff(),
              1e-9 * (1.0 + MaxAbs(s)));
  }
}

TEST(SymEig, SignConventionFirstNonzeroPositive) {
  std::mt19937_64 rng(6);
  const EigenDecomposition eig = SymEig(testing::RandomSymmetric(7, rng));
  for (int c = 0; c < 7; ++c) {
    for (int r = 0; r < 7; ++r) {
      if (std::abs(eig.eigenvectors(r, c)) > 1e-12) {
        EXPECT_GT(eig.eigenvectors(r, c), 0.0);
        break;
      }
    }
  }
}

TEST(SymEig, RepeatedEigenvalues) {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd q = testing::RandomGaussianMatrix(6, 6, rng).householderQr().householderQ();
  Eigen::VectorXd d(6);
  d << 5, 5, 5, 1, 1, 0;
  const Eigen::MatrixXd s = q * d.asDiagonal() * q.transpose();
  const EigenDecomposition eig = SymEig(s);
  ExpectValidDecomposition(s, eig);
  EXPECT_LE((eig.eigenvalues - d).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SymEig, RejectsAsymmetricInput) {
  Eigen::Matrix2d s;
  s << 1, 2, 0, 1;
  EXPECT_THROW(SymEig(s), InvalidArgument);
}

TEST(SymEig, Deterministic) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd s = testing::RandomSymmetric(9, rng);
  const EigenDecomposition a = SymEig(s);
  const EigenDecomposition b = SymEig(s);
  EXPECT_TRUE((a.eigenvalues.array() == b.eigenvalues.array()).all());
  EXPECT_TRUE((a.eigenvectors.array() == b.eigenvectors.array()).all());
}

TEST(KyFanNorm, Examples) {
  EXPECT_DOUBLE_EQ(KyFanNorm(Eigen::Vector3d(3, 2, 1).asDiagonal(), 2), 5.0);
  Eigen::Matrix2d s;
  s << 2, 1, 1, 2;
  EXPECT_NEAR(KyFanNorm(s, 1), 3.0, 1e-12);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd p = testing::RandomPsd(6, rng);
  EXPECT_NEAR(KyFanNorm(p, 6), p.trace(), 1e-10 * p.trace());
}

TEST(KyFanNorm, RangeChecks) {
  EXPECT_THROW(KyFanNorm(Eigen::MatrixXd::Identity(3, 3), 0), InvalidArgument);
  EXPECT_THROW(KyFanNorm(Eigen::MatrixXd::Identity(3, 3), 4), InvalidArgument);
  EXPECT_THROW(KyFanNorm(-Eigen::MatrixXd::Identity(3, 3), 1), InvalidArgument);
}

TEST(KyFanNorm, EqualsBestSubsetOfEigenvalues) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + trial % 6;
    const Eigen::MatrixXd p = testing::RandomPsd(dim, rng);
    const Eigen::VectorXd values = testing::OracleEigenvalues(p);
    for (int k = 1; k <= dim; ++k) {
      double best = -1.0;
      for (unsigned mask = 0; mask < (1u << dim); ++mask) {
        if (std::popcount(mask) != k) continue;
        double sum = 0.0;
        for (int i = 0; i < dim; ++i) {
          if (mask & (1u << i)) sum += values(i);
        }
        best = std::max(best, sum);
      }
      EXPECT_NEAR(KyFanNorm(p, k), best, 1e-9 * (1.0 + best));
    }
  }
}

TEST(KyFanNorm, FanVariationalIdentity) {
  std::mt19937_64 rng(3);
  for (int dim = 2; dim <= 6; ++dim) {
    const Eigen::MatrixXd p = testing::RandomPsd(dim, rng);
    const EigenDecomposition eig = SymEig(p);
    for (int k = 1; k <= dim; ++k) {
      const double norm = KyFanNorm(p, k);
      for (int frame = 0; frame < 100; ++frame) {
        const Eigen::MatrixXd q =
            testing::RandomGaussianMatrix(dim, dim, rng).householderQr().householderQ();
        const Eigen::MatrixXd u = q.leftCols(k);
        EXPECT_GE(norm + 1e-9, (u.transpose() * p * u).trace());
      }
      const Eigen::MatrixXd top = eig.eigenvectors.leftCols(k);
      EXPECT_NEAR((top.transpose() * p * top).trace(), norm, 1e-8);
    }
  }
}

TEST(TraceNorm, Examples) {
  EXPECT_NEAR(TraceNorm(Eigen::Vector2d(3, 2).asDiagonal()), 5.0, 1e-12);
  const Eigen::Vector3d v(0, 2, 0);
  EXPECT_NEAR(TraceNorm(v * v.transpose()), 4.0, 1e-9);
  EXPECT_EQ(TraceNorm(Eigen::MatrixXd::Zero(3, 2)), 0.0);
}

TEST(TraceNorm, MatchesReferenceSvd) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd m = testing::RandomGaussianMatrix(5, 3, rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  EXPECT_NEAR(TraceNorm(m), svd.singularValues().sum(), 1e-9);
}

TEST(SigmaMin, Examples) {
  EXPECT_NEAR(SigmaMin(Eigen::MatrixXd::Identity(4, 4)), 1.0, 1e-12);
  Eigen::Matrix2d m;
  m << 1, 1, 0, 0;
  EXPECT_NEAR(SigmaMin(m), 0.0, 1e-7);
  EXPECT_NEAR(SigmaMin(Eigen::Vector2d(3, 4)), 5.0, 1e-12);
}

TEST(PsdPower, Examples) {
  EXPECT_TRUE(PsdPower(Eigen::MatrixXd::Identity(3, 3), -0.5).isIdentity(1e-12));
  EXPECT_TRUE(PsdPower(Eigen::Vector2d(4, 9).asDiagonal(), 0.5)
                  .isApprox(Eigen::Matrix2d(Eigen::Vector2d(2, 3).asDiagonal()), 1e-12));
  Eigen::MatrixXd four(1, 1);
  four << 4.0;
  EXPECT_NEAR(PsdPower(four, -1.0)(0, 0), 0.25, 1e-15);
}

TEST(PsdPower, SingularInputRejectedForNegativePowers) {
  EXPECT_THROW(PsdPower(Eigen::Vector2d(1, 0).asDiagonal(), -1.0), NumericalError);
  EXPECT_THROW(PsdPower(Eigen::Vector2d(1, 1e-13).asDiagonal(), -0.5), NumericalError);
  EXPECT_NO_THROW(PsdPower(Eigen::Vector2d(1, 0).asDiagonal(), 0.5));
}

TEST(PsdPower, SquareRootSquaredReconstructs) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd p = testing::RandomPsd(2 + trial % 8, rng);
    const Eigen::MatrixXd root = PsdPower(p, 0.5);
    EXPECT_LE(MaxAbs(root * root - p), 1e-8 * MaxAbs(p));
    const Eigen::MatrixXd inv = PsdPower(p, -1.0);
    EXPECT_LE(MaxAbs(inv * p - Eigen::MatrixXd::Identity(p.rows(), p.rows())), 1e-6);
  }
}

TEST(ClampPsd, ToleratesRoundoffOnly) {
  EXPECT_EQ(ClampPsdEigenvalues(Eigen::Vector2d(1.0, -1e-12))(1), 0.0);
  EXPECT_THROW(ClampPsdEigenvalues(Eigen::Vector2d(1.0, -1e-6)), InvalidArgument);
}

}  // namespace
}  // namespace dpwo
