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

#ifndef DPWO_TESTS_TEST_SUPPORT_HPP_
#define DPWO_TESTS_TEST_SUPPORT_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "dpwo/covariance.hpp"
#include "dpwo/spectral.hpp"
#include "dpwo/workload.hpp"

namespace dpwo::testing {

// Test-side randomness uses the standard library engine so that fixtures do
// not share code with the generators under test.
inline Eigen::MatrixXd RandomGaussianMatrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  }
  return m;
}

inline Eigen::MatrixXd RandomSymmetric(int dim, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = RandomGaussianMatrix(dim, dim, rng);
  return 0.5 * (g + g.transpose());
}

inline Eigen::MatrixXd RandomPsd(int dim, std::mt19937_64& rng) {
  const Eigen::MatrixXd g = RandomGaussianMatrix(dim, dim, rng);
  return g * g.transpose();
}

inline Eigen::MatrixXd RandomZeroOne(int rows, int cols, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution bit(density);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = bit(rng) ? 1.0 : 0.0;
  }
  return m;
}

// Random simplex point with all coordinates bounded away from zero.
inline Eigen::VectorXd RandomSimplexPoint(int u, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.2, 1.0);
  Eigen::VectorXd q(u);
  for (int e = 0; e < u; ++e) q(e) = uniform(rng);
  return q / q.sum();
}

// Reference spectrum from Eigen's solver, sorted descending.
inline Eigen::VectorXd OracleEigenvalues(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s, Eigen::EigenvaluesOnly);
  Eigen::VectorXd values = solver.eigenvalues().reverse();
  return values;
}

// h_k evaluated straight from its definition, scanning every t in [0, k).
inline double OracleHk(const Eigen::VectorXd& descending, int k) {
  const int m = static_cast<int>(descending.size());
  for (int t = 0; t < k; ++t) {
    double tail = 0.0;
    for (int i = t; i < m; ++i) tail += std::max(descending(i), 0.0);
    const double avg = tail / (k - t);
    const bool upper = t == 0 || descending(t - 1) > avg;
    const bool lower = avg >= descending(t);
    if (upper && lower) {
      double head = 0.0;
      for (int i = 0; i < t; ++i) head += std::sqrt(descending(i));
      return head + std::sqrt(static_cast<double>(k - t)) * std::sqrt(tail);
    }
  }
  return -1.0;
}

inline double OracleHkOfWeights(const Eigen::MatrixXd& a, const Eigen::VectorXd& q, int k) {
  return OracleHk(OracleEigenvalues(a * q.asDiagonal() * a.transpose()), k);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dpwo_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace dpwo::testing

#endif  // DPWO_TESTS_TEST_SUPPORT_HPP_
