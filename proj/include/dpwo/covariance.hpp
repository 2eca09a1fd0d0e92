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

#ifndef DPWO_COVARIANCE_HPP_
#define DPWO_COVARIANCE_HPP_

// Noise covariance design. The covariance minimizes the Ky Fan k-norm
// ||Sigma||_(k) subject to a_e^T Sigma^{-1} a_e <= 1 for every column a_e.
// We solve the dual
//
//     maximize h_k(A Q A^T)^2   over diagonal Q >= 0 with tr(Q) = 1
//
// by Frank-Wolfe ascent on the simplex, then rebuild the primal covariance
// from the spectrum of A Q A^T. The optimal values agree, so the difference
// between the two is a certificate of suboptimality.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpwo/error.hpp"
#include "dpwo/spectral.hpp"
#include "dpwo/workload.hpp"
#include "json.hpp"

namespace dpwo {

// The unique t in [0, k-1] with
//     sigma_t > (sum_{i>t} sigma_i) / (k - t) >= sigma_{t+1},
// using 1-based sigma and sigma_0 = +infinity. `sigmas` must be
// non-increasing and nonnegative.
inline int FindThresholdT(std::span<const double> sigmas, int k) {
  const int len = static_cast<int>(sigmas.size());
  if (k < 1 || k > len) {
    throw InvalidArgument("threshold: k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(len) + "]");
  }
  for (int i = 0; i < len; ++i) {
    if (sigmas[i] < 0.0) throw InvalidArgument("threshold: negative value in spectrum");
    if (i > 0 && sigmas[i] > sigmas[i - 1]) {
      throw InvalidArgument("threshold: spectrum is not sorted in non-increasing order");
    }
  }
  // suffix[t] = sum of sigmas[t..], accumulated smallest first.
  std::vector<double> suffix(len + 1, 0.0);
  for (int i = len - 1; i >= 0; --i) suffix[i] = suffix[i + 1] + sigmas[i];

  int best_t = 0;
  double best_violation = std::numeric_limits<double>::infinity();
  for (int t = 0; t < k; ++t) {
    const double alpha = suffix[t] / (k - t);
    const double left = t == 0 ? std::numeric_limits<double>::infinity() : sigmas[t - 1];
    const double right = sigmas[t];
    if (left > alpha && alpha >= right) return t;
    // Only reachable through roundoff: keep the least violated candidate.
    const double violation =
        std::max(alpha - left, 0.0) + std::max(right - alpha, 0.0);
    if (violation < best_violation) {
      best_violation = violation;
      best_t = t;
    }
  }
  return best_t;
}

struct HkValue {
  double value = 0.0;
  int t = 0;
  double alpha = 0.0;  // tail average (sum_{i>t} sigma_i) / (k - t)
  double head = 0.0;   // sum_{i<=t} sigma_i^{1/2}
  double tail = 0.0;   // sqrt(k - t) * (sum_{i>t} sigma_i)^{1/2}
};

inline HkValue HkFromSpectrum(const Eigen::VectorXd& sorted_spectrum, int k) {
  const Eigen::VectorXd sigmas = ClampPsdEigenvalues(sorted_spectrum);
  HkValue h;
  h.t = FindThresholdT(std::span<const double>(sigmas.data(), sigmas.size()), k);
  double tail_sum = 0.0;
  for (Eigen::Index i = sigmas.size() - 1; i >= h.t; --i) tail_sum += sigmas(i);
  for (int i = 0; i < h.t; ++i) h.head += std::sqrt(sigmas(i));
  h.alpha = tail_sum / (k - h.t);
  h.tail = std::sqrt(static_cast<double>(k - h.t)) * std::sqrt(tail_sum);
  h.value = h.head + h.tail;
  return h;
}

// h_k(S) = sum_{i<=t} sigma_i^{1/2} + sqrt(k-t) (sum_{i>t} sigma_i)^{1/2}.
inline HkValue Hk(const Eigen::MatrixXd& s, int k) {
  return HkFromSpectrum(SymEig(s).eigenvalues, k);
}

struct Supergradient {
  Eigen::VectorXd g;  // g_e = a_e^T G a_e
  HkValue hk;
  // Set when eigenvalues on either side of the threshold agree within 1e-8
  // (relative); the coefficients of that cluster are then averaged.
  bool boundary_tie = false;
};

namespace internal {

inline Eigen::MatrixXd WeightedGram(const Eigen::MatrixXd& columns, const Eigen::VectorXd& q) {
  Eigen::MatrixXd s = columns * q.asDiagonal() * columns.transpose();
  return 0.5 * (s + s.transpose());
}

// Gradient of q -> h_k(C diag(q) C^T) for the columns C.
inline Supergradient SupergradientOfColumns(const Eigen::MatrixXd& columns,
                                            const Eigen::VectorXd& q, int k) {
  if (q.size() != columns.cols()) {
    throw InvalidArgument("supergradient: weight vector length does not match column count");
  }
  const EigenDecomposition eig = SymEig(WeightedGram(columns, q));
  const Eigen::VectorXd sigmas = ClampPsdEigenvalues(eig.eigenvalues);
  if (sigmas.size() == 0 || sigmas(0) <= 0.0) {
    throw InvalidArgument("supergradient: A Q A^T is the zero matrix");
  }
  Supergradient out;
  out.hk = HkFromSpectrum(sigmas, k);
  if (!(out.hk.alpha > 0.0)) {
    throw NumericalError("supergradient: A Q A^T has rank below k; h_k is not differentiable here");
  }
  const Eigen::Index d = sigmas.size();
  Eigen::VectorXd coeff(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    coeff(i) = i < out.hk.t ? 0.5 / std::sqrt(sigmas(i)) : 0.5 / std::sqrt(out.hk.alpha);
  }
  if (out.hk.t > 0) {
    const double tie_tol = 1e-8 * sigmas(0);
    const Eigen::Index boundary = out.hk.t;
    if (std::abs(sigmas(boundary - 1) - sigmas(boundary)) <= tie_tol) {
      out.boundary_tie = true;
      Eigen::Index lo = boundary - 1;
      Eigen::Index hi = boundary;
      while (lo > 0 && std::abs(sigmas(lo - 1) - sigmas(boundary)) <= tie_tol) --lo;
      while (hi + 1 < d && std::abs(sigmas(hi + 1) - sigmas(boundary - 1)) <= tie_tol) ++hi;
      const double mean = coeff.segment(lo, hi - lo + 1).mean();
      coeff.segment(lo, hi - lo + 1).setConstant(mean);
    }
  }
  const Eigen::MatrixXd projected = eig.eigenvectors.transpose() * columns;
  out.g = (projected.array().square().colwise() * coeff.array()).colwise().sum().transpose();
  return out;
}

}  // namespace internal

inline Supergradient HkSupergradient(const QueryMatrix& a, const Eigen::VectorXd& q, int k) {
  return internal::SupergradientOfColumns(a.entries(), q, k);
}

// Coordinates of the columns of A in an orthonormal basis of its range:
// `coords` is rank x u and has the same Gram matrix as A.
struct RangeReduction {
  Eigen::MatrixXd coords;
  int rank = 0;
};

inline RangeReduction ReduceToRange(const QueryMatrix& a) {
  const Eigen::MatrixXd& entries = a.entries();
  RangeReduction out;
  const bool via_columns = entries.cols() <= entries.rows();
  const EigenDecomposition eig = via_columns ? SymEig(entries.transpose() * entries)
                                             : SymEig(entries * entries.transpose());
  const double top = std::max(eig.eigenvalues(0), 0.0);
  int rank = 0;
  while (rank < eig.eigenvalues.size() && eig.eigenvalues(rank) > 1e-10 * top) ++rank;
  out.rank = rank;
  if (via_columns) {
    // A = B diag(sqrt(lambda)) V^T with B orthonormal, so B^T A = diag(sqrt(lambda)) V^T.
    out.coords = eig.eigenvalues.head(rank).cwiseSqrt().asDiagonal() *
                 eig.eigenvectors.leftCols(rank).transpose();
  } else {
    out.coords = eig.eigenvectors.leftCols(rank).transpose() * entries;
  }
  return out;
}

// Numerical rank of A, recorded on a copy of the matrix.
inline QueryMatrix VerifyRank(const QueryMatrix& a) {
  return a.WithVerifiedRank(ReduceToRange(a).rank);
}

struct DualSolution {
  Eigen::VectorXd q;        // diagonal of Q, on the simplex
  double hk_value = 0.0;    // h_k(A Q A^T)
  int threshold_t = 0;
  double alpha = 0.0;
  int k = 0;
  int iterations_used = 0;
  double fw_gap = 0.0;      // max_e g_e - <q, g> at the returned q
  bool regularized = false; // q was mixed with the uniform vector
  std::vector<double> trace;  // h_k after every iteration, non-decreasing
};

namespace internal {

// Mixes q with the uniform vector so that a rank-deficient A Q A^T regains
// rank, as in the limit P(lambda) = lambda P + (1 - lambda) I.
inline Eigen::VectorXd MixWithUniform(const Eigen::VectorXd& q, double gamma) {
  const double uniform = 1.0 / static_cast<double>(q.size());
  Eigen::VectorXd mixed = (1.0 - gamma) * q.array() + gamma * uniform;
  return mixed / mixed.sum();
}

inline Eigen::Index ArgMaxFirst(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

}  // namespace internal

// Frank-Wolfe ascent for the dual program. The linear step puts all mass on
// the coordinate with the largest supergradient (smallest index on ties) and
// moves with step 2/(iter+2), iter counted from 1. A step that would lower
// h_k is halved until it does not, so the recorded values never decrease.
// Stops once 2 * gap / h_k, which bounds the relative duality gap of the
// squared objective, is at most tol.
inline DualSolution DualAscent(const QueryMatrix& a, int k, int max_iters, double tol) {
  if (k < 1) throw InvalidArgument("dual ascent: k must be >= 1");
  if (max_iters < 1) throw InvalidArgument("dual ascent: max_iters must be >= 1");
  const RangeReduction reduced = ReduceToRange(a);
  if (reduced.rank < k) {
    throw NumericalError("dual ascent: workload rank " + std::to_string(reduced.rank) +
                         " is smaller than k=" + std::to_string(k));
  }
  const Eigen::MatrixXd& columns = reduced.coords;
  const Eigen::Index u = columns.cols();

  DualSolution out;
  out.k = k;
  out.q = Eigen::VectorXd::Constant(u, 1.0 / static_cast<double>(u));
  Supergradient current = internal::SupergradientOfColumns(columns, out.q, k);

  int iter = 1;
  for (; iter <= max_iters; ++iter) {
    out.trace.push_back(current.hk.value);
    const Eigen::Index j = internal::ArgMaxFirst(current.g);
    out.fw_gap = current.g(j) - out.q.dot(current.g);
    // 2 * fw_gap / h bounds the relative gap of the squared objective.
    if (2.0 * out.fw_gap <= tol * current.hk.value) break;

    double gamma = 2.0 / (iter + 2.0);
    bool moved = false;
    for (int halving = 0; halving < 60; ++halving, gamma *= 0.5) {
      Eigen::VectorXd candidate = (1.0 - gamma) * out.q;
      candidate(j) += gamma;
      candidate /= candidate.sum();
      Supergradient next = internal::SupergradientOfColumns(columns, candidate, k);
      if (next.hk.value >= current.hk.value) {
        out.q = std::move(candidate);
        current = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) break;  // no ascent at machine precision
  }
  out.iterations_used = std::min(iter, max_iters);

  // Final certificate at the returned point.
  const Eigen::Index j = internal::ArgMaxFirst(current.g);
  out.fw_gap = current.g(j) - out.q.dot(current.g);
  out.hk_value = current.hk.value;
  out.threshold_t = current.hk.t;
  out.alpha = current.hk.alpha;
  return out;
}

struct CovarianceDesign {
  Eigen::MatrixXd sigma;          // noise covariance, |Q| x |Q|
  int k = 0;
  double kyfan_value = 0.0;       // ||sigma||_(k)
  double feasibility_slack = 0.0; // max_e a_e^T sigma^{-1} a_e
  double rescale_factor = 1.0;
  EigenDecomposition eig;         // of sigma
  DualSolution dual;
};

// max_e a_e^T Sigma^{-1} a_e given the eigendecomposition of Sigma.
inline double FeasibilitySlack(const QueryMatrix& a, const EigenDecomposition& eig) {
  const Eigen::MatrixXd coords = eig.eigenvectors.transpose() * a.entries();
  const Eigen::VectorXd inverse = eig.eigenvalues.cwiseInverse();
  return (coords.array().square().colwise() * inverse.array()).colwise().sum().maxCoeff();
}

// Primal covariance from a dual point. With c = h_k(A Q A^T)^2 and
// U D U^T = c A Q A^T of rank r, the diagonal D' keeps the eigenvalues above
// the threshold, flattens positions t < i <= r to alpha and sets positions
// beyond r to alpha / 2; Sigma = (U D' U^T)^{1/2}. Sigma is then multiplied by
// the feasibility slack when that exceeds one.
inline CovarianceDesign PrimalFromDual(const QueryMatrix& a, const DualSolution& dual) {
  const int k = dual.k;
  const int m = a.num_queries();
  if (dual.q.size() != a.universe_size()) {
    throw InvalidArgument("primal_from_dual: dual weights do not match the workload");
  }
  if (k < 1 || k > m) throw InvalidArgument("primal_from_dual: k out of range");

  CovarianceDesign design;
  design.k = k;
  design.dual = dual;

  EigenDecomposition spectrum;
  Eigen::VectorXd sigmas;
  int rank = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    spectrum = SymEig(internal::WeightedGram(a.entries(), design.dual.q));
    sigmas = ClampPsdEigenvalues(spectrum.eigenvalues);
    rank = 0;
    while (rank < m && sigmas(rank) > 1e-12 * sigmas(0)) ++rank;
    if (rank >= k) break;
    if (attempt == 1) {
      throw NumericalError("primal_from_dual: A Q A^T has rank " + std::to_string(rank) +
                           " < k=" + std::to_string(k) + " even after regularization");
    }
    design.dual.q = internal::MixWithUniform(design.dual.q, 1e-6);
    design.dual.regularized = true;
  }
  const HkValue h = HkFromSpectrum(sigmas, k);
  design.dual.hk_value = h.value;
  design.dual.threshold_t = h.t;
  design.dual.alpha = h.alpha;

  const double c = h.value * h.value;
  Eigen::VectorXd values(m);
  for (int i = 0; i < m; ++i) {
    const double flattened = i < h.t ? sigmas(i) : (i < rank ? h.alpha : 0.5 * h.alpha);
    values(i) = std::sqrt(c * flattened);
  }
  design.eig.eigenvectors = spectrum.eigenvectors;
  design.eig.eigenvalues = values;
  design.eig.source_dim = m;

  const double slack = FeasibilitySlack(a, design.eig);
  if (slack > 1.0) {
    design.rescale_factor = slack;
    design.eig.eigenvalues *= slack;
  }
  design.feasibility_slack = FeasibilitySlack(a, design.eig);
  design.kyfan_value = KyFanFromSpectrum(design.eig.eigenvalues, k);
  design.sigma = design.eig.Reconstruct();
  design.sigma = 0.5 * (design.sigma + design.sigma.transpose());
  return design;
}

// Relative duality gap (||Sigma||_(k) - h_k^2) / h_k^2; nonnegative up to
// roundoff by weak duality.
inline double DualityGap(const QueryMatrix&, const CovarianceDesign& design) {
  const double dual_value = design.dual.hk_value * design.dual.hk_value;
  return (design.kyfan_value - dual_value) / dual_value;
}

// k = floor(epsilon * n), guarded against products like 0.29 * 100.
inline int PrivacyK(std::int64_t n, double epsilon) {
  return static_cast<int>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
}

struct OptimizeOptions {
  int max_iters = 2000;
  double tol = 1e-4;
};

inline CovarianceDesign OptimizeCovariance(const QueryMatrix& a, std::int64_t n, double epsilon,
                                           const OptimizeOptions& options = {}) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
  const int k = PrivacyK(n, epsilon);
  if (k < 1) {
    throw InvalidArgument("k must be >= 1 (epsilon * n = " +
                          FormatDouble(epsilon * static_cast<double>(n)) + ")");
  }
  if (k > a.num_queries()) {
    throw InvalidArgument("k=" + std::to_string(k) + " exceeds the number of queries " +
                          std::to_string(a.num_queries()));
  }
  return PrimalFromDual(a, DualAscent(a, k, options.max_iters, options.tol));
}

inline nlohmann::json DesignToJson(const QueryMatrix& a, const CovarianceDesign& design) {
  nlohmann::json sigma = nlohmann::json::array();
  for (Eigen::Index r = 0; r < design.sigma.rows(); ++r) {
    for (Eigen::Index c = 0; c < design.sigma.cols(); ++c) sigma.push_back(design.sigma(r, c));
  }
  return {
      {"k", design.k},
      {"kyfan_value", design.kyfan_value},
      {"hk_value", design.dual.hk_value},
      {"gap", DualityGap(a, design)},
      {"rescale_factor", design.rescale_factor},
      {"feasibility_slack", design.feasibility_slack},
      {"threshold_t", design.dual.threshold_t},
      {"iterations_used", design.dual.iterations_used},
      {"fw_gap", design.dual.fw_gap},
      {"q", std::vector<double>(design.dual.q.data(), design.dual.q.data() + design.dual.q.size())},
      {"sigma", std::move(sigma)},
  };
}

// Rebuilds a design written by DesignToJson for the same workload. The
// eigendecomposition and threshold are recomputed.
inline CovarianceDesign DesignFromJson(const QueryMatrix& a, const nlohmann::json& j) {
  try {
    CovarianceDesign design;
    const int m = a.num_queries();
    design.k = j.at("k").get<int>();
    design.kyfan_value = j.at("kyfan_value").get<double>();
    design.rescale_factor = j.at("rescale_factor").get<double>();
    const auto q = j.at("q").get<std::vector<double>>();
    const auto sigma = j.at("sigma").get<std::vector<double>>();
    if (q.size() != static_cast<std::size_t>(a.universe_size()) ||
        sigma.size() != static_cast<std::size_t>(m) * m) {
      throw IoError("design JSON dimensions do not match the workload");
    }
    design.dual.q = Eigen::Map<const Eigen::VectorXd>(q.data(), q.size());
    design.dual.k = design.k;
    design.dual.hk_value = j.at("hk_value").get<double>();
    design.dual.iterations_used = j.value("iterations_used", 0);
    design.dual.fw_gap = j.value("fw_gap", 0.0);
    const HkValue h = Hk(internal::WeightedGram(a.entries(), design.dual.q), design.k);
    design.dual.threshold_t = h.t;
    design.dual.alpha = h.alpha;
    design.sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(sigma.data(), m, m);
    design.eig = SymEig(design.sigma);
    design.feasibility_slack = FeasibilitySlack(a, design.eig);
    return design;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed design JSON: ") + e.what());
  }
}

}  // namespace dpwo

#endif  // DPWO_COVARIANCE_HPP_
