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

#ifndef DPWO_WORKLOAD_HPP_
#define DPWO_WORKLOAD_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "dpwo/error.hpp"
#include "dpwo/rng.hpp"
#include "json.hpp"

namespace dpwo {

enum class MatrixFormat { kCsv, kJson };

// Parses "csv" / "json". Throws InvalidArgument on anything else.
inline MatrixFormat ParseMatrixFormat(std::string_view name) {
  if (name == "csv") return MatrixFormat::kCsv;
  if (name == "json") return MatrixFormat::kJson;
  throw InvalidArgument("unknown matrix format '" + std::string(name) +
                        "' (expected csv or json)");
}

// Shortest decimal string that parses back to the same double.
inline std::string FormatDouble(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

// A workload of linear queries: row q, column e holds q(e). Columns are the
// per-element answer vectors a_e.
class QueryMatrix {
 public:
  QueryMatrix() = default;

  explicit QueryMatrix(Eigen::MatrixXd entries,
                       std::vector<std::string> row_labels = {},
                       std::vector<std::string> col_labels = {})
      : entries_(std::move(entries)),
        row_labels_(std::move(row_labels)),
        col_labels_(std::move(col_labels)) {
    if (entries_.rows() < 1 || entries_.cols() < 1) {
      throw InvalidArgument("query matrix must have at least one row and one column");
    }
    if (!entries_.allFinite()) {
      throw InvalidArgument("query matrix has a non-finite entry");
    }
    if (!row_labels_.empty() &&
        row_labels_.size() != static_cast<std::size_t>(entries_.rows())) {
      throw InvalidArgument("row label count does not match row count");
    }
    if (!col_labels_.empty() &&
        col_labels_.size() != static_cast<std::size_t>(entries_.cols())) {
      throw InvalidArgument("column label count does not match column count");
    }
  }

  const Eigen::MatrixXd& entries() const { return entries_; }
  int num_queries() const { return static_cast<int>(entries_.rows()); }
  int universe_size() const { return static_cast<int>(entries_.cols()); }
  auto column(int e) const { return entries_.col(e); }
  const std::vector<std::string>& row_labels() const { return row_labels_; }
  const std::vector<std::string>& col_labels() const { return col_labels_; }

  // Largest squared column norm, max_e ||a_e||^2.
  double max_column_norm_sq() const {
    return entries_.colwise().squaredNorm().maxCoeff();
  }

  // Rank as recorded by WithVerifiedRank(); empty if never checked.
  std::optional<int> verified_rank() const { return rank_; }
  bool has_full_row_rank() const { return rank_ && *rank_ == num_queries(); }

  // Copy of this matrix carrying the numerically determined rank.
  QueryMatrix WithVerifiedRank(int rank) const {
    QueryMatrix copy = *this;
    copy.rank_ = rank;
    return copy;
  }

  friend bool operator==(const QueryMatrix& a, const QueryMatrix& b) {
    return a.entries_.rows() == b.entries_.rows() &&
           a.entries_.cols() == b.entries_.cols() &&
           a.entries_ == b.entries_;
  }

 private:
  Eigen::MatrixXd entries_;
  std::vector<std::string> row_labels_;
  std::vector<std::string> col_labels_;
  std::optional<int> rank_;
};

// A database over the universe, stored as per-element multiplicities.
class Histogram {
 public:
  Histogram(std::vector<std::int64_t> counts, std::int64_t size_bound)
      : counts_(std::move(counts)), size_bound_(size_bound) {
    if (size_bound_ < 0) throw InvalidArgument("size bound n must be >= 0");
    std::int64_t total = 0;
    for (std::int64_t c : counts_) {
      if (c < 0) throw InvalidArgument("histogram counts must be nonnegative");
      total += c;
    }
    if (total > size_bound_) {
      throw InvalidArgument("histogram has " + std::to_string(total) +
                            " elements, exceeding size bound " +
                            std::to_string(size_bound_));
    }
  }

  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t size_bound() const { return size_bound_; }
  int universe_size() const { return static_cast<int>(counts_.size()); }

  std::int64_t l1_norm() const {
    std::int64_t total = 0;
    for (std::int64_t c : counts_) total += c;
    return total;
  }

  Eigen::VectorXd AsVector() const {
    Eigen::VectorXd x(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      x(static_cast<Eigen::Index>(i)) = static_cast<double>(counts_[i]);
    }
    return x;
  }

  friend bool operator==(const Histogram&, const Histogram&) = default;

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t size_bound_;
};

// The symmetric convex hull of the (optionally projected) columns of a
// workload. Vertices are +/- P a_e where P is the projector, or the identity
// when none is given. The Gram matrix of the projected columns is cached
// because every linear optimization step over the polytope reduces to it.
class SensitivityPolytopeView {
 public:
  explicit SensitivityPolytopeView(const QueryMatrix& workload)
      : projected_(workload.entries()) {
    Finish();
  }

  SensitivityPolytopeView(const QueryMatrix& workload,
                          const Eigen::MatrixXd& projector)
      : projected_(projector * workload.entries()), has_projector_(true) {
    if (projector.rows() != workload.num_queries() ||
        projector.cols() != workload.num_queries()) {
      throw InvalidArgument("projector dimensions do not match the workload");
    }
    Finish();
  }

  // Columns P a_e.
  const Eigen::MatrixXd& projected_columns() const { return projected_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  int dimension() const { return static_cast<int>(projected_.rows()); }
  int num_columns() const { return static_cast<int>(projected_.cols()); }
  bool has_projector() const { return has_projector_; }

  // Signed vertex ids are 1-based: +(e+1) is P a_e and -(e+1) is -P a_e.
  Eigen::VectorXd Vertex(int signed_id) const {
    const int e = std::abs(signed_id) - 1;
    if (signed_id == 0 || e >= num_columns()) {
      throw InvalidArgument("vertex id out of range");
    }
    return signed_id > 0 ? Eigen::VectorXd(projected_.col(e))
                         : Eigen::VectorXd(-projected_.col(e));
  }

 private:
  void Finish() { gram_ = projected_.transpose() * projected_; }

  Eigen::MatrixXd projected_;
  Eigen::MatrixXd gram_;
  bool has_projector_ = false;
};

namespace internal {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      break;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

inline std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

// Non-empty lines of a text file; a trailing newline does not add a row.
inline std::vector<std::string_view> Lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = Trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

inline std::string Position(std::size_t row, std::size_t col) {
  return "(" + std::to_string(row + 1) + "," + std::to_string(col + 1) + ")";
}

}  // namespace internal

// Dense CSV: one query per line, comma separated, no header.
inline QueryMatrix ParseMatrixCsv(std::string_view text) {
  const auto lines = internal::Lines(text);
  if (lines.empty()) throw IoError("no rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto fields = internal::SplitCommas(lines[r]);
    if (!rows.empty() && fields.size() != rows.front().size()) {
      throw IoError("ragged rows: row " + std::to_string(r + 1) + " has " +
                    std::to_string(fields.size()) + " columns, expected " +
                    std::to_string(rows.front().size()));
    }
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string_view f = fields[c];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), values[c]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw IoError("non-numeric at " + internal::Position(r, c));
      }
      if (!std::isfinite(values[c])) {
        throw IoError("non-finite at " + internal::Position(r, c));
      }
    }
    rows.push_back(std::move(values));
  }
  Eigen::MatrixXd entries(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) entries(r, c) = rows[r][c];
  }
  return QueryMatrix(std::move(entries));
}

inline std::string MatrixToCsv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += FormatDouble(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::json MatrixToJson(const Eigen::MatrixXd& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Eigen::MatrixXd MatrixFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") ||
      !j.contains("data")) {
    throw IoError("matrix JSON must be an object with rows, cols and data");
  }
  const auto rows = j.at("rows").get<std::int64_t>();
  const auto cols = j.at("cols").get<std::int64_t>();
  const auto& data = j.at("data");
  if (rows < 1) throw IoError("no rows");
  if (cols < 1 || !data.is_array() ||
      data.size() != static_cast<std::size_t>(rows * cols)) {
    throw IoError("matrix JSON data length does not equal rows*cols");
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t c = 0; c < cols; ++c) {
      const auto& v = data[static_cast<std::size_t>(r * cols + c)];
      if (!v.is_number()) {
        throw IoError("non-numeric at " + internal::Position(r, c));
      }
      m(r, c) = v.get<double>();
      if (!std::isfinite(m(r, c))) {
        throw IoError("non-finite at " + internal::Position(r, c));
      }
    }
  }
  return m;
}

inline QueryMatrix ParseMatrixJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed matrix JSON: ") + e.what());
  }
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  try {
    if (j.contains("row_labels")) row_labels = j.at("row_labels").get<std::vector<std::string>>();
    if (j.contains("col_labels")) col_labels = j.at("col_labels").get<std::vector<std::string>>();
    return QueryMatrix(MatrixFromJson(j), std::move(row_labels), std::move(col_labels));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed matrix JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

inline QueryMatrix LoadMatrix(const std::string& path, MatrixFormat format) {
  const std::string text = internal::ReadFile(path);
  return format == MatrixFormat::kCsv ? ParseMatrixCsv(text)
                                      : ParseMatrixJson(text);
}

inline void SaveMatrix(const QueryMatrix& a, const std::string& path,
                       MatrixFormat format) {
  if (format == MatrixFormat::kCsv) {
    internal::WriteFile(path, MatrixToCsv(a.entries()));
    return;
  }
  nlohmann::json j = MatrixToJson(a.entries());
  if (!a.row_labels().empty()) j["row_labels"] = a.row_labels();
  if (!a.col_labels().empty()) j["col_labels"] = a.col_labels();
  internal::WriteFile(path, j.dump() + "\n");
}

// One line of u nonnegative integers. Real-valued entries are rejected.
inline Histogram ParseHistogramCsv(std::string_view text, std::int64_t size_bound) {
  const auto lines = internal::Lines(text);
  if (lines.empty()) throw IoError("no rows");
  if (lines.size() > 1) throw IoError("histogram CSV must have exactly one line");
  const auto fields = internal::SplitCommas(lines.front());
  std::vector<std::int64_t> counts(fields.size());
  for (std::size_t c = 0; c < fields.size(); ++c) {
    const std::string_view f = fields[c];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), counts[c]);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
      throw IoError("histogram entry at position " + std::to_string(c + 1) +
                    " is not an integer");
    }
    if (counts[c] < 0) {
      throw IoError("negative histogram count at position " + std::to_string(c + 1));
    }
  }
  try {
    return Histogram(std::move(counts), size_bound);
  } catch (const InvalidArgument& e) {
    throw IoError(e.what());
  }
}

inline Histogram LoadHistogram(const std::string& path, std::int64_t size_bound) {
  return ParseHistogramCsv(internal::ReadFile(path), size_bound);
}

inline void SaveHistogram(const Histogram& x, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < x.counts().size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(x.counts()[i]);
  }
  internal::WriteFile(path, out + "\n");
}

// Random counting queries: every entry is 1 with probability `density`.
inline QueryMatrix GenRandomCounting(int m, int u, double density,
                                     std::uint64_t seed) {
  if (m < 1 || u < 1) throw InvalidArgument("m and u must be >= 1");
  if (!(density > 0.0 && density <= 1.0)) {
    throw InvalidArgument("density must lie in (0, 1]");
  }
  CounterRng rng(seed);
  Eigen::MatrixXd a(m, u);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < u; ++c) a(r, c) = rng.NextUniform() < density ? 1.0 : 0.0;
  }
  return QueryMatrix(std::move(a));
}

// All u(u+1)/2 interval queries [i, j] over an ordered universe, listed by
// interval length and then by left endpoint.
inline QueryMatrix GenIntervalQueries(int u) {
  if (u < 1) throw InvalidArgument("u must be >= 1");
  const int m = u * (u + 1) / 2;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, u);
  std::vector<std::string> labels;
  labels.reserve(m);
  int row = 0;
  for (int length = 1; length <= u; ++length) {
    for (int left = 0; left + length <= u; ++left, ++row) {
      a.block(row, left, 1, length).setOnes();
      labels.push_back("[" + std::to_string(left + 1) + "," +
                       std::to_string(left + length) + "]");
    }
  }
  return QueryMatrix(std::move(a), std::move(labels));
}

struct HistogramMode {
  enum class Kind { kUniformRandom, kPointMass };
  Kind kind = Kind::kUniformRandom;
  int element = 1;  // 1-based, used by kPointMass

  static HistogramMode UniformRandom() { return {}; }
  static HistogramMode PointMass(int element) {
    return {Kind::kPointMass, element};
  }
};

// Size-n histogram: all mass on one element, or n independent uniform draws.
inline Histogram GenHistogram(int u, std::int64_t n, HistogramMode mode,
                              std::uint64_t seed) {
  if (u < 1) throw InvalidArgument("u must be >= 1");
  if (n < 0) throw InvalidArgument("n must be >= 0");
  std::vector<std::int64_t> counts(u, 0);
  if (mode.kind == HistogramMode::Kind::kPointMass) {
    if (mode.element < 1 || mode.element > u) {
      throw InvalidArgument("point mass element " + std::to_string(mode.element) +
                            " out of range [1, " + std::to_string(u) + "]");
    }
    counts[mode.element - 1] = n;
  } else {
    CounterRng rng(seed);
    for (std::int64_t i = 0; i < n; ++i) ++counts[rng.NextBelow(u)];
  }
  return Histogram(std::move(counts), n);
}

}  // namespace dpwo

#endif  // DPWO_WORKLOAD_HPP_
