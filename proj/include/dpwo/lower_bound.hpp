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

#ifndef DPWO_LOWER_BOUND_HPP_
#define DPWO_LOWER_BOUND_HPP_

// Spectral lower bound
//
//     specLB(k, A) = max_{S subset U, |S| <= k} sqrt(k / |Q|) sigma_min(A_S)
//
// and the certificate values implied by a dual solution of the Ky Fan
// program.

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpwo/covariance.hpp"
#include "dpwo/error.hpp"
#include "dpwo/spectral.hpp"
#include "dpwo/workload.hpp"
#include "json.hpp"

namespace dpwo {

enum class LowerBoundMethod { kBruteForce, kGreedy, kNone };
enum class CertificateCase { kCase1, kCase2 };

inline const char* ToString(LowerBoundMethod method) {
  switch (method) {
    case LowerBoundMethod::kBruteForce: return "bruteforce";
    case LowerBoundMethod::kGreedy: return "greedy";
    case LowerBoundMethod::kNone: return "none";
  }
  return "none";
}

inline const char* ToString(CertificateCase c) {
  return c == CertificateCase::kCase1 ? "case1" : "case2";
}

struct CertificateReport {
  double spec_lb_value = 0.0;
  std::vector<int> subset;  // 0-based column indices
  // sqrt(|S| / |Q|) sigma_min(A_S) for the returned subset.
  double subset_weighted_value = 0.0;
  LowerBoundMethod method = LowerBoundMethod::kNone;
  double case2_bound = 0.0;      // ||Sigma||_(k) / (8 sqrt|Q|)
  double case1_bound_raw = 0.0;  // ||Sigma||_(k) / (2 log(eps n) sqrt|Q|), constant dropped
  CertificateCase active_case = CertificateCase::kCase2;
  int k = 0;
};

namespace internal {

inline double SigmaMinOfGramSubset(const Eigen::MatrixXd& gram, const std::vector<int>& subset) {
  const Eigen::Index s = static_cast<Eigen::Index>(subset.size());
  if (s == 1) return std::sqrt(std::max(gram(subset[0], subset[0]), 0.0));
  Eigen::MatrixXd sub(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) sub(i, j) = gram(subset[i], subset[j]);
  }
  return std::sqrt(std::max(SymEig(sub).eigenvalues(s - 1), 0.0));
}

inline bool SameValue(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace internal

// Exhaustive search over all nonempty subsets of size at most k. Among
// subsets with equal value the larger one wins, then the first in bitmask
// order.
inline CertificateReport SpecLbBruteforce(const QueryMatrix& a, int k, int max_universe = 16) {
  const int u = a.universe_size();
  const int m = a.num_queries();
  if (u > max_universe) {
    throw InvalidArgument("universe too large for brute force: u=" + std::to_string(u) +
                          " > " + std::to_string(max_universe));
  }
  if (u > 30) throw InvalidArgument("universe too large for brute force");
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const Eigen::MatrixXd gram = a.entries().transpose() * a.entries();
  const double factor = std::sqrt(static_cast<double>(k) / m);
  // Subsets with more columns than rows have sigma_min = 0.
  const int max_size = std::min({k, u, m});

  CertificateReport best;
  best.method = LowerBoundMethod::kBruteForce;
  best.k = k;
  double best_sigma = -1.0;
  std::vector<int> subset;
  for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << u); ++mask) {
    const int size = std::popcount(mask);
    if (size > max_size) continue;
    subset.clear();
    for (int e = 0; e < u; ++e) {
      if (mask & (std::uint32_t{1} << e)) subset.push_back(e);
    }
    const double sigma = internal::SigmaMinOfGramSubset(gram, subset);
    const bool tie = internal::SameValue(sigma, best_sigma);
    if ((!tie && sigma > best_sigma) ||
        (tie && subset.size() > best.subset.size())) {
      best_sigma = sigma;
      best.subset = subset;
    }
  }
  if (best.subset.empty()) {
    best_sigma = 0.0;
    best.subset = {0};
  }
  best.spec_lb_value = factor * best_sigma;
  best.subset_weighted_value =
      std::sqrt(static_cast<double>(best.subset.size()) / m) * best_sigma;
  return best;
}

// Backward elimination: drop the column whose removal leaves the largest
// sigma_min until k columns remain. Ties go to the column with the smaller
// norm, then the smaller index, so zero columns are dropped first.
inline CertificateReport SpecLbGreedy(const QueryMatrix& a, int k) {
  const int u = a.universe_size();
  const int m = a.num_queries();
  if (k < 1 || k > u) {
    throw InvalidArgument("greedy specLB: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(u) + "]");
  }
  const Eigen::MatrixXd gram = a.entries().transpose() * a.entries();
  std::vector<int> current(u);
  for (int e = 0; e < u; ++e) current[e] = e;

  std::vector<int> remainder;
  while (static_cast<int>(current.size()) > k) {
    int drop = -1;
    double drop_sigma = -1.0;
    for (std::size_t pos = 0; pos < current.size(); ++pos) {
      remainder.clear();
      for (std::size_t other = 0; other < current.size(); ++other) {
        if (other != pos) remainder.push_back(current[other]);
      }
      const double sigma = static_cast<int>(remainder.size()) > m
                               ? 0.0
                               : internal::SigmaMinOfGramSubset(gram, remainder);
      bool better = false;
      if (drop < 0) {
        better = true;
      } else if (internal::SameValue(sigma, drop_sigma)) {
        const double norm = gram(current[pos], current[pos]);
        const double drop_norm = gram(current[drop], current[drop]);
        better = norm < drop_norm && !internal::SameValue(norm, drop_norm);
      } else {
        better = sigma > drop_sigma;
      }
      if (better) {
        drop = static_cast<int>(pos);
        drop_sigma = sigma;
      }
    }
    current.erase(current.begin() + drop);
  }

  CertificateReport report;
  report.method = LowerBoundMethod::kGreedy;
  report.k = k;
  report.subset = current;
  const double sigma = static_cast<int>(current.size()) > m
                           ? 0.0
                           : internal::SigmaMinOfGramSubset(gram, current);
  report.spec_lb_value = std::sqrt(static_cast<double>(k) / m) * sigma;
  report.subset_weighted_value =
      std::sqrt(static_cast<double>(current.size()) / m) * sigma;
  return report;
}

// Certificate values from the optimized design. The active case is the
// larger of the two summands of h_k at the dual point (ties go to case 2);
// it is at least half of h_k.
inline CertificateReport DualCertificateBound(const CovarianceDesign& design, double epsilon,
                                              std::int64_t n) {
  CertificateReport report;
  report.k = design.k;
  const double sqrt_m = std::sqrt(static_cast<double>(design.sigma.rows()));
  report.case2_bound = design.kyfan_value / (8.0 * sqrt_m);
  const double log_term = std::log(epsilon * static_cast<double>(n));
  // Undefined for eps * n <= 1; reported as 0.
  report.case1_bound_raw = log_term > 0.0 ? design.kyfan_value / (2.0 * log_term * sqrt_m) : 0.0;
  const int tail_count = design.k - design.dual.threshold_t;
  const double tail = tail_count * std::sqrt(std::max(design.dual.alpha, 0.0));
  const double head = design.dual.hk_value - tail;
  report.active_case = tail >= head ? CertificateCase::kCase2 : CertificateCase::kCase1;
  return report;
}

// Lower bound search (exhaustive when u <= max_universe, greedy otherwise)
// combined with the certificate values of the design.
inline CertificateReport Certify(const QueryMatrix& a, const CovarianceDesign& design,
                                 double epsilon, std::int64_t n, int max_universe = 16) {
  const int k = design.k;
  CertificateReport report = a.universe_size() <= max_universe
                                 ? SpecLbBruteforce(a, k, max_universe)
                                 : SpecLbGreedy(a, std::min(k, a.universe_size()));
  const CertificateReport bounds = DualCertificateBound(design, epsilon, n);
  report.k = k;
  report.case2_bound = bounds.case2_bound;
  report.case1_bound_raw = bounds.case1_bound_raw;
  report.active_case = bounds.active_case;
  return report;
}

inline nlohmann::json CertificateToJson(const CertificateReport& report) {
  return {
      {"value", report.spec_lb_value},
      {"subset", report.subset},
      {"subset_weighted_value", report.subset_weighted_value},
      {"method", ToString(report.method)},
      {"case", ToString(report.active_case)},
      {"case1_raw", report.case1_bound_raw},
      {"case2", report.case2_bound},
      {"k", report.k},
  };
}

inline CertificateReport CertificateFromJson(const nlohmann::json& j) {
  CertificateReport report;
  report.spec_lb_value = j.at("value").get<double>();
  report.subset = j.at("subset").get<std::vector<int>>();
  report.subset_weighted_value = j.value("subset_weighted_value", 0.0);
  const std::string method = j.at("method").get<std::string>();
  report.method = method == "bruteforce" ? LowerBoundMethod::kBruteForce
                  : method == "greedy"   ? LowerBoundMethod::kGreedy
                                         : LowerBoundMethod::kNone;
  report.active_case =
      j.at("case").get<std::string>() == "case1" ? CertificateCase::kCase1 : CertificateCase::kCase2;
  report.case1_bound_raw = j.at("case1_raw").get<double>();
  report.case2_bound = j.at("case2").get<double>();
  report.k = j.at("k").get<int>();
  return report;
}

}  // namespace dpwo

#endif  // DPWO_LOWER_BOUND_HPP_
