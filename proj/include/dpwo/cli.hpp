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

#ifndef DPWO_CLI_HPP_
#define DPWO_CLI_HPP_

#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>

#include "CLI11.hpp"
#include "dpwo/covariance.hpp"
#include "dpwo/error.hpp"
#include "dpwo/harness.hpp"
#include "dpwo/lower_bound.hpp"
#include "dpwo/mechanism.hpp"
#include "dpwo/workload.hpp"
#include "json.hpp"

namespace dpwo {

namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

inline bool EndsWith(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Explicit format wins; otherwise ".json" selects JSON and anything else CSV.
inline MatrixFormat MatrixFormatFor(const std::string& path, const std::string& format) {
  if (!format.empty()) return ParseMatrixFormat(format);
  return EndsWith(path, ".json") ? MatrixFormat::kJson : MatrixFormat::kCsv;
}

// Writes to `path`, or to `out` when the path is empty or "-".
inline void Emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    internal::WriteFile(path, text);
  }
}

struct Args {
  std::string workload;
  std::string workload_format;
  std::string histogram;
  std::string design;
  std::string out;
  std::string format;
  std::int64_t n = 0;
  double epsilon = 1.0;
  double delta = 1e-6;
  std::uint64_t seed = 0;
  int trials = 1000;
  int max_iters = 2000;
  double tol = 1e-4;
  int fw_max_iters = 2000;
  double fw_tol = -1.0;
  bool emit_intermediates = false;
  bool timings = false;
  std::string mechanism = "projection";
  // gen
  std::string kind;
  int rows = 0;
  int universe = 0;
  double density = 0.5;
  std::string mode = "uniform";
  int element = 1;
  // lowerbound
  int k = 0;
  std::string method = "auto";
  int max_universe = 16;
};

inline QueryMatrix LoadWorkload(const Args& args) {
  return LoadMatrix(args.workload, MatrixFormatFor(args.workload, args.workload_format));
}

inline CovarianceDesign LoadOrOptimizeDesign(const QueryMatrix& a, const Args& args) {
  if (!args.design.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(internal::ReadFile(args.design));
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError("cannot parse design '" + args.design + "': " + e.what());
    }
    return DesignFromJson(a, j);
  }
  return OptimizeCovariance(a, args.n, args.epsilon, {args.max_iters, args.tol});
}

inline MechanismOptions MechanismOptionsFor(const Args& args) {
  MechanismOptions options;
  options.fw.max_iters = args.fw_max_iters;
  options.fw.tol = args.fw_tol;
  return options;
}

inline void RunGen(const Args& args, std::ostream& out) {
  if (args.kind == "histogram") {
    if (args.universe < 1) throw InvalidArgument("--universe is required for histograms");
    const HistogramMode mode = args.mode == "point" ? HistogramMode::PointMass(args.element)
                                                    : HistogramMode::UniformRandom();
    const Histogram x = GenHistogram(args.universe, args.n, mode, args.seed);
    std::string line;
    for (std::size_t i = 0; i < x.counts().size(); ++i) {
      if (i > 0) line += ',';
      line += std::to_string(x.counts()[i]);
    }
    Emit(args.out, line + "\n", out);
    return;
  }
  QueryMatrix a = args.kind == "intervals"
                      ? GenIntervalQueries(args.universe)
                      : GenRandomCounting(args.rows, args.universe, args.density, args.seed);
  const MatrixFormat format = MatrixFormatFor(args.out, args.format);
  if (args.out.empty() || args.out == "-") {
    out << (format == MatrixFormat::kCsv ? MatrixToCsv(a.entries())
                                         : MatrixToJson(a.entries()).dump() + "\n");
  } else {
    SaveMatrix(a, args.out, format);
  }
}

inline void RunOptimize(const Args& args, std::ostream& out) {
  const QueryMatrix a = LoadWorkload(args);
  const CovarianceDesign design =
      OptimizeCovariance(a, args.n, args.epsilon, {args.max_iters, args.tol});
  Emit(args.out, DesignToJson(a, design).dump(2) + "\n", out);
}

inline void RunMechanism(const Args& args, std::ostream& out) {
  const QueryMatrix a = LoadWorkload(args);
  const Histogram x = LoadHistogram(args.histogram, args.n);
  const PrivacyParams privacy = PrivacyParams::Make(args.epsilon, args.delta);
  MechanismOutput result;
  if (args.mechanism == "plain") {
    result = RunPlainGaussian(a, x, privacy, args.seed, MechanismOptionsFor(args));
  } else {
    const CovarianceDesign design = LoadOrOptimizeDesign(a, args);
    result = ProjectionMechanism(a, design, privacy, args.n, MechanismOptionsFor(args))
                 .Run(x, args.seed);
  }
  Emit(args.out, MechanismOutputToJson(result, a, x, args.emit_intermediates).dump(2) + "\n",
       out);
}

inline void RunBench(const Args& args, std::ostream& out) {
  BenchmarkConfig config;
  config.workload = LoadWorkload(args);
  config.n = args.n;
  config.epsilon = args.epsilon;
  config.delta = args.delta;
  config.seed = args.seed;
  config.trials = args.trials;
  config.optimize = {args.max_iters, args.tol};
  config.mechanism = MechanismOptionsFor(args);
  config.max_bruteforce_universe = args.max_universe;
  const BenchmarkReport report = RunBenchmark(config);
  const ReportFormat format = ParseReportFormat(args.format.empty() ? "json" : args.format);
  Emit(args.out, FormatReport(report, format, args.timings), out);
}

inline void RunLowerBound(const Args& args, std::ostream& out) {
  const QueryMatrix a = LoadWorkload(args);
  CertificateReport report;
  if (args.k > 0) {
    const bool brute = args.method == "bruteforce" ||
                       (args.method == "auto" && a.universe_size() <= args.max_universe);
    report = brute ? SpecLbBruteforce(a, args.k, std::max(args.max_universe, a.universe_size()))
                   : SpecLbGreedy(a, std::min(args.k, a.universe_size()));
    report.k = args.k;
    nlohmann::json j = CertificateToJson(report);
    for (const char* key : {"case", "case1_raw", "case2"}) j.erase(key);
    Emit(args.out, j.dump(2) + "\n", out);
    return;
  } else {
    const CovarianceDesign design = LoadOrOptimizeDesign(a, args);
    report = Certify(a, design, args.epsilon, args.n, args.max_universe);
  }
  Emit(args.out, CertificateToJson(report).dump(2) + "\n", out);
}

}  // namespace cli

// Entry point of the dpwo tool. Returns 0 on success, 1 on a usage error and
// 2 when a command fails at run time.
inline int CliMain(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using cli::Args;
  Args args;
  CLI::App app{"Linear query release under (epsilon, delta)-differential privacy", "dpwo"};
  app.require_subcommand(1, 1);

  auto add_instance = [&](CLI::App* sub, bool need_n) {
    sub->add_option("--workload", args.workload, "query matrix (CSV or JSON)")
        ->required();
    sub->add_option("--workload-format", args.workload_format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    auto* n = sub->add_option("--n", args.n, "database size bound")->check(CLI::NonNegativeNumber);
    if (need_n) n->required();
    sub->add_option("--epsilon", args.epsilon, "privacy parameter epsilon")
        ->check(CLI::PositiveNumber);
    sub->add_option("--max-iters", args.max_iters, "covariance optimizer iterations")
        ->check(CLI::PositiveNumber);
    sub->add_option("--tol", args.tol, "covariance optimizer relative gap tolerance");
    sub->add_option("--out", args.out, "output path (stdout if omitted)");
  };
  auto add_mechanism = [&](CLI::App* sub) {
    sub->add_option("--delta", args.delta, "privacy parameter delta");
    sub->add_option("--seed", args.seed, "random seed");
    sub->add_option("--fw-max-iters", args.fw_max_iters, "projection solver iterations")
        ->check(CLI::PositiveNumber);
    sub->add_option("--fw-tol", args.fw_tol, "projection solver gap tolerance");
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a workload or histogram");
  gen->add_option("--kind", args.kind, "counting, intervals or histogram")
      ->required()
      ->check(CLI::IsMember({"counting", "intervals", "histogram"}));
  gen->add_option("--rows", args.rows, "number of queries (counting)");
  gen->add_option("--universe", args.universe, "universe size")->required();
  gen->add_option("--density", args.density, "probability of a 1 entry (counting)");
  gen->add_option("--n", args.n, "histogram size");
  gen->add_option("--mode", args.mode, "uniform or point (histogram)")
      ->check(CLI::IsMember({"uniform", "point"}));
  gen->add_option("--element", args.element, "1-based point mass element");
  gen->add_option("--seed", args.seed, "random seed");
  gen->add_option("--format", args.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  gen->add_option("--out", args.out, "output path (stdout if omitted)");

  CLI::App* optimize = app.add_subcommand("optimize", "optimize the noise covariance");
  add_instance(optimize, true);

  CLI::App* run = app.add_subcommand("run", "run a mechanism on one histogram");
  add_instance(run, true);
  add_mechanism(run);
  run->add_option("--histogram", args.histogram, "histogram CSV")->required();
  run->add_option("--design", args.design, "design JSON from optimize");
  run->add_option("--mechanism", args.mechanism, "projection or plain")
      ->check(CLI::IsMember({"projection", "plain"}));
  run->add_flag("--emit-intermediates", args.emit_intermediates, "include w and ybar");

  CLI::App* bench = app.add_subcommand("bench", "estimate and compare mechanism errors");
  add_instance(bench, true);
  add_mechanism(bench);
  bench->add_option("--trials", args.trials, "trials per histogram")->check(CLI::PositiveNumber);
  bench->add_option("--format", args.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  bench->add_option("--max-universe", args.max_universe, "largest u for exhaustive search");
  bench->add_flag("--timings", args.timings, "include per-stage wall times");

  CLI::App* lowerbound = app.add_subcommand("lowerbound", "lower bound certificate");
  add_instance(lowerbound, false);
  lowerbound->add_option("--design", args.design, "design JSON from optimize");
  lowerbound->add_option("--k", args.k, "subset size; skips the design when given");
  lowerbound->add_option("--method", args.method, "auto, bruteforce or greedy")
      ->check(CLI::IsMember({"auto", "bruteforce", "greedy"}));
  lowerbound->add_option("--max-universe", args.max_universe, "largest u for exhaustive search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* failing = &app;
    for (const CLI::App* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return cli::kExitUsage;
  }

  try {
    if (gen->parsed()) {
      if (args.kind == "counting" && args.rows < 1) {
        err << "error: --rows is required for counting workloads\n" << gen->help();
        return cli::kExitUsage;
      }
      cli::RunGen(args, out);
    } else if (optimize->parsed()) {
      cli::RunOptimize(args, out);
    } else if (run->parsed()) {
      cli::RunMechanism(args, out);
    } else if (bench->parsed()) {
      cli::RunBench(args, out);
    } else if (lowerbound->parsed()) {
      if (args.k <= 0 && args.design.empty() && args.n <= 0) {
        err << "error: lowerbound needs --k, --design or --n\n" << lowerbound->help();
        return cli::kExitUsage;
      }
      cli::RunLowerBound(args, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return cli::kExitRuntime;
  }
  return cli::kExitOk;
}

}  // namespace dpwo

#endif  // DPWO_CLI_HPP_
