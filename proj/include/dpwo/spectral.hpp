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

#ifndef DPWO_SPECTRAL_HPP_
#define DPWO_SPECTRAL_HPP_

// Dense symmetric eigenvalue kernels. Everything here is a pure function of
// its arguments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "dpwo/error.hpp"

namespace dpwo {

// Eigenvalues sorted non-increasing; column i of `eigenvectors` pairs with
// eigenvalue i. Each eigenvector has its first nonzero coordinate positive.
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
  int source_dim = 0;

  Eigen::MatrixXd Reconstruct() const {
    return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
  }
};

struct JacobiOptions {
  // Stop once the off-diagonal Frobenius norm is below this times ||S||_F.
  double relative_threshold = 1e-12;
  int max_sweeps = 100;
  // Accepted asymmetry max|S - S^T|, relative to max(1, max|S|).
  double symmetry_tolerance = 1e-12;
};

namespace internal {

inline void SortAndNormalizeSigns(Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values(a) > values(b);
  });
  Eigen::VectorXd sorted_values(n);
  Eigen::MatrixXd sorted_vectors(vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted_values(i) = values(order[i]);
    sorted_vectors.col(i) = vectors.col(order[i]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < sorted_vectors.rows(); ++r) {
      const double v = sorted_vectors(r, i);
      if (std::abs(v) > 1e-12) {
        if (v < 0) sorted_vectors.col(i) *= -1.0;
        break;
      }
    }
  }
  values = std::move(sorted_values);
  vectors = std::move(sorted_vectors);
}

}  // namespace internal

// Cyclic Jacobi eigensolver for a real symmetric matrix.
inline EigenDecomposition SymEig(const Eigen::MatrixXd& s, const JacobiOptions& options = {}) {
  if (s.rows() != s.cols()) throw InvalidArgument("SymEig: matrix is not square");
  const Eigen::Index n = s.rows();
  EigenDecomposition result;
  result.source_dim = static_cast<int>(n);
  if (n == 0) return result;
  if (!s.allFinite()) throw InvalidArgument("SymEig: non-finite entry");

  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  const double asymmetry = (s - s.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > options.symmetry_tolerance * scale) {
    throw InvalidArgument("SymEig: matrix is not symmetric (max asymmetry " +
                          std::to_string(asymmetry) + ")");
  }

  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double threshold = options.relative_threshold * a.norm();

  bool converged = false;
  for (int sweep = 0; sweep <= options.max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 1; q < n; ++q) {
      off += a.col(q).head(q).squaredNorm();
    }
    if (std::sqrt(2.0 * off) <= threshold) {
      converged = true;
      break;
    }
    if (sweep == options.max_sweeps) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        double* col_p = a.col(p).data();
        double* col_q = a.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = col_p[k];
          const double akq = col_q[k];
          col_p[k] = c * akp - sn * akq;
          col_q[k] = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        double* vp = v.col(p).data();
        double* vq = v.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = vp[k];
          const double vkq = vq[k];
          vp[k] = c * vkp - sn * vkq;
          vq[k] = sn * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw NumericalError("SymEig: Jacobi iteration did not converge in " +
                         std::to_string(options.max_sweeps) + " sweeps");
  }
  result.eigenvalues = a.diagonal();
  result.eigenvectors = std::move(v);
  internal::SortAndNormalizeSigns(result.eigenvalues, result.eigenvectors);
  return result;
}

// Clamps roundoff-negative eigenvalues (>= -1e-9 * lambda_max) to zero and
// rejects anything more negative.
inline Eigen::VectorXd ClampPsdEigenvalues(Eigen::VectorXd values) {
  if (values.size() == 0) return values;
  const double top = std::max(values.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < 0.0) {
      if (values(i) < -1e-9 * top && values(i) < -1e-300) {
        throw InvalidArgument("matrix is not positive semidefinite (eigenvalue " +
                              std::to_string(values(i)) + ")");
      }
      values(i) = 0.0;
    }
  }
  return values;
}

// Sum of the k largest entries of a non-increasing vector.
inline double KyFanFromSpectrum(const Eigen::VectorXd& sorted_values, int k) {
  if (k < 1 || k > sorted_values.size()) {
    throw InvalidArgument("Ky Fan index k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(sorted_values.size()) + "]");
  }
  return sorted_values.head(k).sum();
}

// ||S||_(k): the sum of the k largest eigenvalues of a PSD matrix.
inline double KyFanNorm(const Eigen::MatrixXd& s, int k) {
  if (k < 1 || k > s.rows()) {
    throw InvalidArgument("Ky Fan index k=" + std::to_string(k) + " out of range [1, " +
                          std::to_string(s.rows()) + "]");
  }
  return KyFanFromSpectrum(ClampPsdEigenvalues(SymEig(s).eigenvalues), k);
}

// Singular values of M, non-increasing, from the eigenvalues of M^T M.
inline Eigen::VectorXd SingularValues(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.transpose() * m;
  Eigen::VectorXd values = SymEig(gram).eigenvalues;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values(i) = std::sqrt(std::max(values(i), 0.0));
  }
  return values;
}

// Nuclear norm: sum of singular values.
inline double TraceNorm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return SingularValues(m).sum();
}

// min_x ||Mx|| / ||x||; zero whenever M has more columns than rows.
inline double SigmaMin(const Eigen::MatrixXd& m) {
  if (m.cols() < 1) throw InvalidArgument("SigmaMin: matrix has no columns");
  return SingularValues(m).minCoeff();
}

// V diag(lambda^p) V^T. Negative powers require lambda_min >= 1e-12 lambda_max.
inline Eigen::MatrixXd PsdPowerFromEig(const EigenDecomposition& eig, double p) {
  Eigen::VectorXd values = ClampPsdEigenvalues(eig.eigenvalues);
  if (p < 0.0) {
    const double top = values.size() ? values.maxCoeff() : 0.0;
    const double bottom = values.size() ? values.minCoeff() : 0.0;
    if (!(top > 0.0) || bottom < 1e-12 * top) {
      throw NumericalError("PsdPower: matrix is too close to singular for a negative power");
    }
  }
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values(i) = values(i) == 0.0 ? 0.0 : std::pow(values(i), p);
  }
  return eig.eigenvectors * values.asDiagonal() * eig.eigenvectors.transpose();
}

inline Eigen::MatrixXd PsdPower(const Eigen::MatrixXd& s, double p) {
  return PsdPowerFromEig(SymEig(s), p);
}

}  // namespace dpwo

#endif  // DPWO_SPECTRAL_HPP_
