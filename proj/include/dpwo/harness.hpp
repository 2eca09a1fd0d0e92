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

#ifndef DPWO_HARNESS_HPP_
#define DPWO_HARNESS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dpwo/covariance.hpp"
#include "dpwo/error.hpp"
#include "dpwo/lower_bound.hpp"
#include "dpwo/mechanism.hpp"
#include "dpwo/rng.hpp"
#include "dpwo/workload.hpp"
#include "json.hpp"

namespace dpwo {

// Worker count from DPWO_THREADS, else the hardware concurrency.
inline int ThreadsFromEnv() {
  if (const char* value = std::getenv("DPWO_THREADS")) {
    const int parsed = std::atoi(value);
    if (parsed >= 1) return parsed;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by any task is rethrown on the calling thread.
inline void ParallelFor(std::size_t count, int threads,
                        const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

using MechanismFn = std::function<MechanismOutput(const Histogram&, std::uint64_t)>;

struct ErrorEstimate {
  double rmse_per_query = 0.0;  // max over per_histogram
  int trials = 0;
  std::vector<std::pair<int, double>> per_histogram;  // (histogram id, rmse)
  int worst_histogram_id = 0;
  double ci_halfwidth = 0.0;  // 95% normal approximation for the worst histogram
  // squared_errors[h][t] = ||A x_h - M(A, x_h)||^2 / |Q| for trial t.
  std::vector<std::vector<double>> squared_errors;
};

// Summary statistics of one histogram's per-trial squared errors.
struct TrialSummary {
  double rmse = 0.0;
  double ci_halfwidth = 0.0;
};

inline TrialSummary SummarizeTrials(const std::vector<double>& squared_errors) {
  TrialSummary s;
  const double count = static_cast<double>(squared_errors.size());
  if (squared_errors.empty()) return s;
  const double mean = std::accumulate(squared_errors.begin(), squared_errors.end(), 0.0) / count;
  s.rmse = std::sqrt(mean);
  if (squared_errors.size() > 1 && mean > 0.0) {
    double ss = 0.0;
    for (double v : squared_errors) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (count - 1.0));
    // Delta method for sqrt of the mean.
    s.ci_halfwidth = 1.96 * sd / std::sqrt(count) / (2.0 * s.rmse);
  }
  return s;
}

// Monte Carlo estimate of sup_x (E ||Ax - M(A, x)||^2 / |Q|)^{1/2} over a
// finite histogram set. Trial t of histogram h uses the stream seed
// DeriveStreamSeed(seed, h * trials + t), so the result does not depend on
// the number of threads.
inline ErrorEstimate EstimateError(const MechanismFn& mechanism, const QueryMatrix& a,
                                   std::int64_t n, int trials,
                                   const std::vector<Histogram>& histograms, std::uint64_t seed,
                                   int threads = ThreadsFromEnv()) {
  if (trials < 1) throw InvalidArgument("trials must be >= 1");
  if (histograms.empty()) throw InvalidArgument("histogram set is empty");
  for (const Histogram& x : histograms) {
    if (x.l1_norm() > n) throw InvalidArgument("histogram exceeds the size bound n");
  }
  const std::size_t h_count = histograms.size();
  const double m = static_cast<double>(a.num_queries());
  std::vector<Eigen::VectorXd> exact(h_count);
  for (std::size_t h = 0; h < h_count; ++h) exact[h] = a.entries() * histograms[h].AsVector();

  ErrorEstimate out;
  out.trials = trials;
  out.squared_errors.assign(h_count, std::vector<double>(trials, 0.0));
  ParallelFor(h_count * trials, threads, [&](std::size_t task) {
    const std::size_t h = task / trials;
    const std::size_t t = task % trials;
    const MechanismOutput result = mechanism(histograms[h], DeriveStreamSeed(seed, task));
    out.squared_errors[h][t] = (result.final - exact[h]).squaredNorm() / m;
  });

  double worst_half = 0.0;
  for (std::size_t h = 0; h < h_count; ++h) {
    const TrialSummary s = SummarizeTrials(out.squared_errors[h]);
    out.per_histogram.emplace_back(static_cast<int>(h), s.rmse);
    if (h == 0 || s.rmse > out.rmse_per_query) {
      out.rmse_per_query = s.rmse;
      out.worst_histogram_id = static_cast<int>(h);
      worst_half = s.ci_halfwidth;
    }
  }
  out.ci_halfwidth = worst_half;
  return out;
}

// All point masses n e_j when u <= 64; otherwise 64 distinct seeded point
// masses followed by 16 uniformly random histograms.
inline std::vector<Histogram> DefaultHistogramSet(int u, std::int64_t n, std::uint64_t seed) {
  std::vector<Histogram> set;
  if (u <= 64) {
    for (int j = 1; j <= u; ++j) set.push_back(GenHistogram(u, n, HistogramMode::PointMass(j), 0));
    return set;
  }
  CounterRng rng(seed);
  std::vector<int> elements(u);
  std::iota(elements.begin(), elements.end(), 1);
  for (int i = 0; i < 64; ++i) {
    const int pick = i + static_cast<int>(rng.NextBelow(static_cast<std::uint64_t>(u - i)));
    std::swap(elements[i], elements[pick]);
    set.push_back(GenHistogram(u, n, HistogramMode::PointMass(elements[i]), 0));
  }
  for (int i = 0; i < 16; ++i) {
    set.push_back(GenHistogram(u, n, HistogramMode::UniformRandom(), Mix64(seed + 1 + i)));
  }
  return set;
}

struct BenchmarkConfig {
  QueryMatrix workload;
  std::int64_t n = 1;
  double epsilon = 1.0;
  double delta = 1e-6;
  std::uint64_t seed = 0;
  int trials = 1000;
  OptimizeOptions optimize;
  MechanismOptions mechanism;
  int threads = ThreadsFromEnv();
  int max_bruteforce_universe = 16;
};

struct BenchmarkReport {
  int m = 0;
  int u = 0;
  std::int64_t n = 0;
  double epsilon = 0.0;
  double delta = 0.0;
  int k = 0;
  std::uint64_t seed = 0;
  int trials = 0;
  ErrorEstimate projection_error;
  ErrorEstimate plain_gaussian_error;
  // sqrt((c^2 / m) sum_{i<=k} sigma_i) (1 + sqrt(log u) / sqrt(log 1/delta))^{1/2},
  // without the hidden constant.
  double theory_bound = 0.0;
  double empirical_constant = 0.0;  // projection rmse / theory_bound
  double kyfan_value = 0.0;
  double hk_value = 0.0;
  double gap = 0.0;
  double rescale_factor = 1.0;
  CertificateReport certificate;
  std::map<std::string, double> wall_times;  // seconds per stage
};

inline double TheoryBound(double c, int m, double kyfan_value, int u, double delta) {
  const double log_ratio = std::sqrt(std::log(static_cast<double>(u))) /
                           std::sqrt(std::log(1.0 / delta));
  return std::sqrt(c * c / m * kyfan_value) * std::sqrt(1.0 + log_ratio);
}

namespace internal {

template <typename F>
auto RunStage(const char* stage, std::map<std::string, double>& times, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  try {
    auto result = body();
    times[stage] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("stage ") + stage + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(std::string("stage ") + stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(std::string("stage ") + stage + ": " + e.what());
  }
}

}  // namespace internal

inline BenchmarkReport RunBenchmark(const BenchmarkConfig& config) {
  const QueryMatrix& a = config.workload;
  const PrivacyParams privacy = PrivacyParams::Make(config.epsilon, config.delta);
  BenchmarkReport report;
  report.m = a.num_queries();
  report.u = a.universe_size();
  report.n = config.n;
  report.epsilon = config.epsilon;
  report.delta = config.delta;
  report.seed = config.seed;
  report.trials = config.trials;

  const CovarianceDesign design = internal::RunStage("optimize", report.wall_times, [&] {
    return OptimizeCovariance(a, config.n, config.epsilon, config.optimize);
  });
  report.k = design.k;
  report.kyfan_value = design.kyfan_value;
  report.hk_value = design.dual.hk_value;
  report.gap = DualityGap(a, design);
  report.rescale_factor = design.rescale_factor;

  const std::vector<Histogram> histograms =
      DefaultHistogramSet(a.universe_size(), config.n, Mix64(config.seed));

  report.projection_error = internal::RunStage("projection", report.wall_times, [&] {
    const ProjectionMechanism mechanism(a, design, privacy, config.n, config.mechanism);
    return EstimateError(
        [&](const Histogram& x, std::uint64_t s) { return mechanism.Run(x, s); }, a, config.n,
        config.trials, histograms, config.seed, config.threads);
  });
  report.plain_gaussian_error = internal::RunStage("plain_gaussian", report.wall_times, [&] {
    const PlainGaussianMechanism mechanism(a, privacy, config.mechanism);
    return EstimateError(
        [&](const Histogram& x, std::uint64_t s) { return mechanism.Run(x, s); }, a, config.n,
        config.trials, histograms, config.seed, config.threads);
  });
  report.certificate = internal::RunStage("certificate", report.wall_times, [&] {
    return Certify(a, design, config.epsilon, config.n, config.max_bruteforce_universe);
  });
  report.theory_bound =
      TheoryBound(privacy.c, report.m, design.kyfan_value, report.u, config.delta);
  report.empirical_constant =
      report.theory_bound > 0.0 ? report.projection_error.rmse_per_query / report.theory_bound
                                : 0.0;
  return report;
}

inline nlohmann::json ErrorEstimateToJson(const ErrorEstimate& e) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [id, rmse] : e.per_histogram) per.push_back({id, rmse});
  return {{"rmse_per_query", e.rmse_per_query},
          {"trials", e.trials},
          {"worst_histogram_id", e.worst_histogram_id},
          {"ci_halfwidth", e.ci_halfwidth},
          {"per_histogram", std::move(per)}};
}

inline ErrorEstimate ErrorEstimateFromJson(const nlohmann::json& j) {
  ErrorEstimate e;
  e.rmse_per_query = j.at("rmse_per_query").get<double>();
  e.trials = j.at("trials").get<int>();
  e.worst_histogram_id = j.at("worst_histogram_id").get<int>();
  e.ci_halfwidth = j.at("ci_halfwidth").get<double>();
  for (const auto& item : j.at("per_histogram")) {
    e.per_histogram.emplace_back(item.at(0).get<int>(), item.at(1).get<double>());
  }
  return e;
}

// Wall times are left out unless asked for, so that identical configurations
// produce byte-identical reports.
inline nlohmann::json ReportToJson(const BenchmarkReport& r, bool include_timings = false) {
  nlohmann::json j = {
      {"instance",
       {{"m", r.m}, {"u", r.u}, {"n", r.n}, {"epsilon", r.epsilon}, {"delta", r.delta},
        {"k", r.k}, {"seed", r.seed}, {"trials", r.trials}}},
      {"projection_error", ErrorEstimateToJson(r.projection_error)},
      {"plain_gaussian_error", ErrorEstimateToJson(r.plain_gaussian_error)},
      {"theory_bound", r.theory_bound},
      {"empirical_constant", r.empirical_constant},
      {"kyfan_value", r.kyfan_value},
      {"hk_value", r.hk_value},
      {"gap", r.gap},
      {"rescale_factor", r.rescale_factor},
      {"certificate", CertificateToJson(r.certificate)},
  };
  if (include_timings) j["wall_times"] = r.wall_times;
  return j;
}

inline BenchmarkReport ReportFromJson(const nlohmann::json& j) {
  try {
    BenchmarkReport r;
    const auto& inst = j.at("instance");
    r.m = inst.at("m").get<int>();
    r.u = inst.at("u").get<int>();
    r.n = inst.at("n").get<std::int64_t>();
    r.epsilon = inst.at("epsilon").get<double>();
    r.delta = inst.at("delta").get<double>();
    r.k = inst.at("k").get<int>();
    r.seed = inst.at("seed").get<std::uint64_t>();
    r.trials = inst.at("trials").get<int>();
    r.projection_error = ErrorEstimateFromJson(j.at("projection_error"));
    r.plain_gaussian_error = ErrorEstimateFromJson(j.at("plain_gaussian_error"));
    r.theory_bound = j.at("theory_bound").get<double>();
    r.empirical_constant = j.at("empirical_constant").get<double>();
    r.kyfan_value = j.at("kyfan_value").get<double>();
    r.hk_value = j.at("hk_value").get<double>();
    r.gap = j.at("gap").get<double>();
    r.rescale_factor = j.at("rescale_factor").get<double>();
    r.certificate = CertificateFromJson(j.at("certificate"));
    if (j.contains("wall_times")) r.wall_times = j.at("wall_times").get<std::map<std::string, double>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed report JSON: ") + e.what());
  }
}

inline constexpr const char* kReportCsvHeader =
    "m,u,n,epsilon,delta,k,seed,trials,projection_rmse,projection_ci,plain_rmse,plain_ci,"
    "theory_bound,empirical_constant,kyfan_value,hk_value,gap,rescale_factor,spec_lb,"
    "spec_lb_method,case2_bound,case1_bound_raw,active_case";

inline std::string ReportToCsv(const BenchmarkReport& r) {
  const std::vector<std::string> fields = {
      std::to_string(r.m), std::to_string(r.u), std::to_string(r.n),
      FormatDouble(r.epsilon), FormatDouble(r.delta), std::to_string(r.k),
      std::to_string(r.seed), std::to_string(r.trials),
      FormatDouble(r.projection_error.rmse_per_query),
      FormatDouble(r.projection_error.ci_halfwidth),
      FormatDouble(r.plain_gaussian_error.rmse_per_query),
      FormatDouble(r.plain_gaussian_error.ci_halfwidth), FormatDouble(r.theory_bound),
      FormatDouble(r.empirical_constant), FormatDouble(r.kyfan_value),
      FormatDouble(r.hk_value), FormatDouble(r.gap), FormatDouble(r.rescale_factor),
      FormatDouble(r.certificate.spec_lb_value), ToString(r.certificate.method),
      FormatDouble(r.certificate.case2_bound), FormatDouble(r.certificate.case1_bound_raw),
      ToString(r.certificate.active_case)};
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) row += ',';
    row += fields[i];
  }
  return std::string(kReportCsvHeader) + "\n" + row + "\n";
}

enum class ReportFormat { kJson, kCsv };

inline ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw InvalidArgument("unknown report format '" + std::string(name) + "'");
}

inline std::string FormatReport(const BenchmarkReport& report, ReportFormat format,
                                bool include_timings = false) {
  return format == ReportFormat::kJson ? ReportToJson(report, include_timings).dump(2) + "\n"
                                       : ReportToCsv(report);
}

inline void WriteReport(const BenchmarkReport& report, const std::string& path,
                        ReportFormat format, bool include_timings = false) {
  internal::WriteFile(path, FormatReport(report, format, include_timings));
}

}  // namespace dpwo

#endif  // DPWO_HARNESS_HPP_
