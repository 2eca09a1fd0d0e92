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

#ifndef DPWO_MECHANISM_HPP_
#define DPWO_MECHANISM_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpwo/covariance.hpp"
#include "dpwo/error.hpp"
#include "dpwo/rng.hpp"
#include "dpwo/spectral.hpp"
#include "dpwo/workload.hpp"
#include "json.hpp"

namespace dpwo {

// c_{eps,delta} = (0.5 sqrt(eps) + sqrt(2 ln(1/delta))) / eps.
inline double NoiseMultiplier(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("epsilon must be a finite positive number");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  return (0.5 * std::sqrt(epsilon) + std::sqrt(2.0 * std::log(1.0 / delta))) / epsilon;
}

struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 1e-6;
  double c = 0.0;

  static PrivacyParams Make(double epsilon, double delta) {
    return {epsilon, delta, NoiseMultiplier(epsilon, delta)};
  }
};

// w = scale_c * V diag(sqrt(lambda)) z with z standard normal, i.e.
// w ~ N(0, scale_c^2 Sigma).
inline Eigen::VectorXd SampleGaussian(const EigenDecomposition& sigma_eig, double scale_c,
                                      std::uint64_t seed) {
  const Eigen::Index m = sigma_eig.eigenvalues.size();
  if (scale_c == 0.0) return Eigen::VectorXd::Zero(m);
  CounterRng rng(seed);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    z(i) = rng.NextGaussian() * std::sqrt(std::max(sigma_eig.eigenvalues(i), 0.0));
  }
  return scale_c * (sigma_eig.eigenvectors * z);
}

inline Eigen::VectorXd SampleGaussian(const Eigen::MatrixXd& sigma, double scale_c,
                                      std::uint64_t seed) {
  EigenDecomposition eig = SymEig(sigma);
  eig.eigenvalues = ClampPsdEigenvalues(eig.eigenvalues);
  return SampleGaussian(eig, scale_c, seed);
}

// Orthogonal projector onto the span of the top-k eigenvectors of Sigma.
inline Eigen::MatrixXd TopKProjector(const EigenDecomposition& sigma_eig, int k) {
  const Eigen::Index m = sigma_eig.eigenvectors.rows();
  if (k < 0 || k > m) throw InvalidArgument("projector rank k out of range");
  const auto top = sigma_eig.eigenvectors.leftCols(k);
  return top * top.transpose();
}

inline Eigen::MatrixXd TopKProjector(const CovarianceDesign& design, int k) {
  return TopKProjector(design.eig, k);
}

struct LmoResult {
  Eigen::VectorXd vertex;
  double value = 0.0;
  int index = 1;  // signed, 1-based column id
};

// Maximizes <g, v> over the vertices v = n * s * P a_e of n * P K_A.
inline LmoResult LmoPolytope(const SensitivityPolytopeView& view, const Eigen::VectorXd& g,
                             std::int64_t n) {
  if (g.size() != view.dimension()) throw InvalidArgument("LMO: direction has wrong length");
  const Eigen::VectorXd scores = view.projected_columns().transpose() * g;
  int best = 0;
  for (int e = 1; e < view.num_columns(); ++e) {
    if (std::abs(scores(e)) > std::abs(scores(best))) best = e;
  }
  LmoResult out;
  out.index = scores(best) >= 0.0 ? best + 1 : -(best + 1);
  out.value = static_cast<double>(n) * std::abs(scores(best));
  out.vertex = static_cast<double>(n) * view.Vertex(out.index);
  return out;
}

inline LmoResult LmoPolytope(const QueryMatrix& a, const Eigen::MatrixXd& proj_complement,
                             const Eigen::VectorXd& g, std::int64_t n) {
  return LmoPolytope(SensitivityPolytopeView(a, proj_complement), g, n);
}

// max_e |<(I - Pi) w, a_e>|: the support function of (I - Pi) K_A at w.
inline double SupportFunctionResidual(const Eigen::VectorXd& w, const QueryMatrix& a,
                                      const Eigen::MatrixXd& proj_complement) {
  const Eigen::VectorXd projected = proj_complement * w;
  return (a.entries().transpose() * projected).cwiseAbs().maxCoeff();
}

enum class FwStepRule {
  kPairwise,  // pairwise steps with exact line search
  kClassic,   // toward the LMO vertex with step 2/(iter+2)
};

struct FrankWolfeOptions {
  int max_iters = 2000;
  // Stop once the duality gap is at most this. Negative selects the default
  // 1e-6 * n^2 * max_e ||a_e||^2.
  double tol = -1.0;
  FwStepRule rule = FwStepRule::kPairwise;
};

struct FrankWolfeResult {
  Eigen::VectorXd ybar;
  // Upper bound on ||ybar - b||^2 - min_z ||z - b||^2, and hence on
  // ||ybar - z*||^2.
  double residual_gap = 0.0;
  int iterations = 0;
  // Convex combination over signed vertex ids (see SensitivityPolytopeView).
  std::vector<std::pair<int, double>> weights;
};

// Least-squares projection of `target` onto n * P K_A, parametrized as
// z = n * P_cols * lambda with lambda a signed combination of vertex weights.
// Every step costs O(u) once the Gram matrix of the projected columns is known.
inline FrankWolfeResult FrankWolfeProject(const Eigen::VectorXd& target,
                                          const SensitivityPolytopeView& view, std::int64_t n,
                                          double tol, const FrankWolfeOptions& options = {}) {
  const int u = view.num_columns();
  if (target.size() != view.dimension()) {
    throw InvalidArgument("Frank-Wolfe: target has wrong length");
  }
  if (n < 0) throw InvalidArgument("Frank-Wolfe: n must be >= 0");
  const double scale = static_cast<double>(n);
  const Eigen::MatrixXd& gram = view.gram();
  const Eigen::VectorXd c = view.projected_columns().transpose() * target;

  // Vertex slot 2e is +P a_e, slot 2e+1 is -P a_e.
  std::vector<double> weight(2 * static_cast<std::size_t>(u), 0.0);
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(u);
  auto slot_id = [](int slot) { return slot % 2 == 0 ? slot / 2 + 1 : -(slot / 2 + 1); };

  int start = 0;
  for (int e = 1; e < u; ++e) {
    if (std::abs(c(e)) > std::abs(c(start))) start = e;
  }
  const int start_slot = c(start) >= 0.0 ? 2 * start : 2 * start + 1;
  weight[start_slot] = 1.0;
  lambda(start) = c(start) >= 0.0 ? 1.0 : -1.0;
  Eigen::VectorXd gram_lambda = lambda(start) * gram.col(start);

  FrankWolfeResult out;
  double gap = 0.0;
  int iter = 0;
  for (;; ++iter) {
    // score_e = <target - z, P a_e>
    const Eigen::VectorXd score = c - scale * gram_lambda;
    int fw = 0;
    for (int e = 1; e < u; ++e) {
      if (std::abs(score(e)) > std::abs(score(fw))) fw = e;
    }
    const double fw_sign = score(fw) >= 0.0 ? 1.0 : -1.0;
    const int fw_slot = fw_sign > 0 ? 2 * fw : 2 * fw + 1;
    const double fw_value = scale * std::abs(score(fw));
    const double z_value = scale * lambda.dot(score);
    gap = std::max(2.0 * (fw_value - z_value), 0.0);
    if (gap <= tol || iter >= options.max_iters || n == 0) break;

    int away_slot = -1;
    double away_value = 0.0;
    if (options.rule == FwStepRule::kPairwise) {
      for (int slot = 0; slot < 2 * u; ++slot) {
        if (weight[slot] <= 0.0) continue;
        const double v = (slot % 2 == 0 ? 1.0 : -1.0) * score(slot / 2);
        if (away_slot < 0 || v < away_value) {
          away_slot = slot;
          away_value = v;
        }
      }
    }
    double direction_sq = 0.0;
    if (away_slot >= 0 && away_slot != fw_slot) {
      const int ea = away_slot / 2;
      const double sa = away_slot % 2 == 0 ? 1.0 : -1.0;
      direction_sq = scale * scale *
                     (gram(fw, fw) + gram(ea, ea) - 2.0 * fw_sign * sa * gram(fw, ea));
    }
    if (direction_sq > 1e-300) {
      const int ea = away_slot / 2;
      const double sa = away_slot % 2 == 0 ? 1.0 : -1.0;
      const double slope = scale * (fw_sign * score(fw) - sa * score(ea));
      const double max_step = weight[away_slot];
      double step = std::clamp(slope / direction_sq, 0.0, max_step);
      weight[fw_slot] += step;
      if (step >= max_step) {
        step = max_step;
        weight[away_slot] = 0.0;
      } else {
        weight[away_slot] -= step;
      }
      lambda(fw) += fw_sign * step;
      lambda(ea) -= sa * step;
      gram_lambda += step * (fw_sign * gram.col(fw) - sa * gram.col(ea));
    } else {
      double step;
      if (options.rule == FwStepRule::kClassic) {
        step = 2.0 / (iter + 2.0);
      } else {
        const double lgl = lambda.dot(gram_lambda);
        const double sq =
            scale * scale * (gram(fw, fw) - 2.0 * fw_sign * gram_lambda(fw) + lgl);
        step = sq > 1e-300 ? std::clamp((fw_value - z_value) / sq, 0.0, 1.0) : 0.0;
        if (step == 0.0) break;
      }
      for (double& w : weight) w *= (1.0 - step);
      weight[fw_slot] += step;
      lambda *= (1.0 - step);
      lambda(fw) += fw_sign * step;
      gram_lambda = (1.0 - step) * gram_lambda + (step * fw_sign) * gram.col(fw);
    }
  }
  out.iterations = iter;
  out.residual_gap = gap;
  out.ybar = scale * (view.projected_columns() * lambda);
  for (int slot = 0; slot < 2 * u; ++slot) {
    if (weight[slot] > 0.0) out.weights.emplace_back(slot_id(slot), weight[slot]);
  }
  return out;
}

inline double DefaultFrankWolfeTol(const QueryMatrix& a, std::int64_t n) {
  const double scale = static_cast<double>(n);
  return 1e-6 * scale * scale * a.max_column_norm_sq();
}

inline FrankWolfeResult FrankWolfeProject(const Eigen::VectorXd& target, const QueryMatrix& a,
                                          const Eigen::MatrixXd& proj_complement,
                                          std::int64_t n, int max_iters, double tol) {
  FrankWolfeOptions options;
  options.max_iters = max_iters;
  return FrankWolfeProject(target, SensitivityPolytopeView(a, proj_complement), n,
                           tol < 0.0 ? DefaultFrankWolfeTol(a, n) : tol, options);
}

struct MechanismOptions {
  FrankWolfeOptions fw;
#ifdef DPWO_DIAGNOSTICS
  // Replaces c_{eps,delta}. Breaks privacy; only present in diagnostics
  // builds for calibration and zero-noise tests.
  std::optional<double> scale_c_override;
#endif
};

struct MechanismOutput {
  Eigen::VectorXd noisy;      // A x + w
  Eigen::VectorXd projected;  // ybar
  Eigen::VectorXd final;      // Pi * noisy + ybar
  Eigen::VectorXd noise;      // w
  int projector_rank = 0;
  double fw_residual = 0.0;
  int fw_iterations = 0;
  std::uint64_t seed = 0;
  bool degenerate_k0 = false;  // floor(eps * n) == 0, so Pi = 0
};

// Algorithm state that does not depend on the histogram: the projector, the
// projected polytope and the noise factor. Reused across Monte Carlo trials.
class ProjectionMechanism {
 public:
  ProjectionMechanism(const QueryMatrix& a, const CovarianceDesign& design,
                      const PrivacyParams& privacy, std::int64_t n,
                      MechanismOptions options = {})
      : a_(a), design_(design), privacy_(privacy), n_(n), options_(std::move(options)) {
    const int m = a.num_queries();
    if (design.sigma.rows() != m) {
      throw InvalidArgument("design dimension does not match the workload");
    }
    if (design.feasibility_slack > 1.0 + 1e-9) {
      throw InvalidArgument("design is infeasible: max_e a_e^T Sigma^-1 a_e = " +
                            FormatDouble(design.feasibility_slack));
    }
    k_ = std::min(PrivacyK(n, privacy.epsilon), m);
    projector_ = TopKProjector(design.eig, k_);
    complement_ = Eigen::MatrixXd::Identity(m, m) - projector_;
    view_.emplace(a, complement_);
    tol_ = options_.fw.tol < 0.0 ? DefaultFrankWolfeTol(a, n) : options_.fw.tol;
  }

  int k() const { return k_; }
  const Eigen::MatrixXd& projector() const { return projector_; }
  const Eigen::MatrixXd& complement() const { return complement_; }
  const SensitivityPolytopeView& view() const { return *view_; }
  double fw_tol() const { return tol_; }

  double scale_c() const {
#ifdef DPWO_DIAGNOSTICS
    if (options_.scale_c_override) return *options_.scale_c_override;
#endif
    return privacy_.c;
  }

  MechanismOutput Run(const Histogram& x, std::uint64_t seed) const {
    if (x.universe_size() != a_.universe_size()) {
      throw InvalidArgument("histogram length does not match the universe size");
    }
    if (x.l1_norm() > n_) {
      throw InvalidArgument("histogram violates the size bound n=" + std::to_string(n_));
    }
    MechanismOutput out;
    out.seed = seed;
    out.projector_rank = k_;
    out.degenerate_k0 = k_ == 0;
    out.noise = SampleGaussian(design_.eig, scale_c(), seed);
    out.noisy = a_.entries() * x.AsVector() + out.noise;
    const FrankWolfeResult fw =
        FrankWolfeProject(complement_ * out.noisy, *view_, n_, tol_, options_.fw);
    out.projected = fw.ybar;
    out.fw_residual = fw.residual_gap;
    out.fw_iterations = fw.iterations;
    out.final = projector_ * out.noisy + out.projected;
    return out;
  }

 private:
  QueryMatrix a_;
  CovarianceDesign design_;
  PrivacyParams privacy_;
  std::int64_t n_;
  MechanismOptions options_;
  int k_ = 0;
  Eigen::MatrixXd projector_;
  Eigen::MatrixXd complement_;
  std::optional<SensitivityPolytopeView> view_;
  double tol_ = 0.0;
};

inline MechanismOutput RunProjectionMechanism(const QueryMatrix& a, const Histogram& x,
                                              const CovarianceDesign& design,
                                              const PrivacyParams& privacy, std::uint64_t seed,
                                              const MechanismOptions& options = {}) {
  return ProjectionMechanism(a, design, privacy, x.size_bound(), options).Run(x, seed);
}

// Independent noise on every query, calibrated by Sigma = (max_e ||a_e||^2) I.
class PlainGaussianMechanism {
 public:
  PlainGaussianMechanism(const QueryMatrix& a, const PrivacyParams& privacy,
                         MechanismOptions options = {})
      : a_(a), privacy_(privacy), options_(std::move(options)) {
    const int m = a.num_queries();
    isotropic_.eigenvalues = Eigen::VectorXd::Constant(m, a.max_column_norm_sq());
    isotropic_.eigenvectors = Eigen::MatrixXd::Identity(m, m);
    isotropic_.source_dim = m;
  }

  double scale_c() const {
#ifdef DPWO_DIAGNOSTICS
    if (options_.scale_c_override) return *options_.scale_c_override;
#endif
    return privacy_.c;
  }

  // Per-query noise standard deviation.
  double noise_std() const { return scale_c() * std::sqrt(a_.max_column_norm_sq()); }

  MechanismOutput Run(const Histogram& x, std::uint64_t seed) const {
    if (x.universe_size() != a_.universe_size()) {
      throw InvalidArgument("histogram length does not match the universe size");
    }
    MechanismOutput out;
    out.seed = seed;
    out.noise = SampleGaussian(isotropic_, scale_c(), seed);
    out.noisy = a_.entries() * x.AsVector() + out.noise;
    out.projected = Eigen::VectorXd::Zero(a_.num_queries());
    out.final = out.noisy;
    return out;
  }

 private:
  QueryMatrix a_;
  PrivacyParams privacy_;
  MechanismOptions options_;
  EigenDecomposition isotropic_;
};

inline MechanismOutput RunPlainGaussian(const QueryMatrix& a, const Histogram& x,
                                        const PrivacyParams& privacy, std::uint64_t seed,
                                        const MechanismOptions& options = {}) {
  return PlainGaussianMechanism(a, privacy, options).Run(x, seed);
}

inline nlohmann::json MechanismOutputToJson(const MechanismOutput& out, const QueryMatrix& a,
                                            const Histogram& x, bool emit_intermediates) {
  const Eigen::VectorXd exact = a.entries() * x.AsVector();
  const double m = static_cast<double>(a.num_queries());
  auto as_vector = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  nlohmann::json j = {
      {"final", as_vector(out.final)},
      {"noisy_rmse", std::sqrt((out.noisy - exact).squaredNorm() / m)},
      {"projected_rmse", std::sqrt((out.final - exact).squaredNorm() / m)},
      {"projector_rank", out.projector_rank},
      {"fw_residual", out.fw_residual},
      {"seed", out.seed},
  };
  if (emit_intermediates) {
    j["w"] = as_vector(out.noise);
    j["ybar"] = as_vector(out.projected);
  }
  return j;
}

}  // namespace dpwo

#endif  // DPWO_MECHANISM_HPP_
