#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mmdmiss/error.hpp"

namespace mmdmiss {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Fill value stored at unobserved coordinates. Never read by any computation.
inline double not_available() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

/// Raw missingness mask: bit j set means coordinate j is missing. May be all-missing.
using Mask = std::vector<bool>;

/// A missingness pattern with at least one observed coordinate.
class Pattern {
 public:
  explicit Pattern(Mask missing) : missing_(std::move(missing)) {
    if (missing_.empty()) throw InputShapeError("pattern: dimension must be >= 1");
    for (std::size_t j = 0; j < missing_.size(); ++j)
      if (!missing_[j]) observed_.push_back(static_cast<Eigen::Index>(j));
    if (observed_.empty()) throw InputShapeError("pattern: every coordinate is missing");
  }

  static Pattern complete(std::size_t d) { return Pattern(Mask(d, false)); }

  /// Pattern observing exactly the listed (0-based) coordinates.
  static Pattern observing(std::size_t d, std::initializer_list<std::size_t> coords) {
    Mask m(d, true);
    for (auto c : coords) {
      if (c >= d) throw InputShapeError("pattern: coordinate out of range");
      m[c] = false;
    }
    return Pattern(std::move(m));
  }

  std::size_t dim() const noexcept { return missing_.size(); }
  std::size_t n_observed() const noexcept { return observed_.size(); }
  bool is_missing(std::size_t j) const { return missing_.at(j); }
  bool is_complete() const noexcept { return observed_.size() == missing_.size(); }
  const Mask& mask() const noexcept { return missing_; }

  /// Observed coordinates in ascending order.
  const std::vector<Eigen::Index>& observed() const noexcept { return observed_; }

  friend bool operator==(const Pattern& a, const Pattern& b) { return a.missing_ == b.missing_; }

  std::string to_string() const {
    std::string s;
    s.reserve(missing_.size());
    for (bool b : missing_) s.push_back(b ? '1' : '0');
    return s;
  }

 private:
  Mask missing_;
  std::vector<Eigen::Index> observed_;
};

struct PatternHash {
  std::size_t operator()(const Pattern& p) const noexcept { return std::hash<Mask>{}(p.mask()); }
};

/// Subvector of `x` at the observed coordinates of `pattern`.
inline Vector project_to_pattern(const Eigen::Ref<const Vector>& x, const Pattern& pattern) {
  if (static_cast<std::size_t>(x.size()) != pattern.dim())
    throw InputShapeError("project_to_pattern: vector length " + std::to_string(x.size()) +
                          " does not match pattern dimension " + std::to_string(pattern.dim()));
  return x(pattern.observed());
}

/// Row-wise projection of a sample matrix (one draw per row).
inline Matrix project_rows_to_pattern(const Matrix& rows, const Pattern& pattern) {
  if (static_cast<std::size_t>(rows.cols()) != pattern.dim())
    throw InputShapeError("project_rows_to_pattern: column count does not match pattern dimension");
  return rows(Eigen::all, pattern.observed());
}

/// One data vector together with its missingness pattern.
class Observation {
 public:
  Observation(Vector values, Pattern pattern) : values_(std::move(values)), pattern_(std::move(pattern)) {
    if (static_cast<std::size_t>(values_.size()) != pattern_.dim())
      throw InputShapeError("observation: values and mask lengths differ");
    for (std::size_t j = 0; j < pattern_.dim(); ++j)
      if (pattern_.is_missing(j)) values_[static_cast<Eigen::Index>(j)] = not_available();
  }

  Observation(Vector values, Mask missing) : Observation(std::move(values), Pattern(std::move(missing))) {}

  std::size_t dim() const noexcept { return pattern_.dim(); }
  const Pattern& pattern() const noexcept { return pattern_; }
  const Mask& mask() const noexcept { return pattern_.mask(); }

  /// Raw storage; masked slots hold not_available().
  const Vector& values() const noexcept { return values_; }

 private:
  Vector values_;
  Pattern pattern_;
};

/// Observed part of an observation, ascending coordinate order.
inline Vector project(const Observation& obs) { return obs.values()(obs.pattern().observed()); }

/// Observations sharing one pattern, with their observed values packed column-major
/// (rows.size() x n_observed) for the estimator's inner loops.
struct PatternBlock {
  Pattern pattern;
  std::vector<std::size_t> rows;
  Matrix values;
};

/// Immutable collection of observations of a common dimension, indexed by pattern.
class Dataset {
 public:
  explicit Dataset(std::size_t d, std::vector<Observation> observations = {})
      : d_(d), observations_(std::move(observations)) {
    if (d_ == 0) throw InputShapeError("dataset: dimension must be >= 1");
    std::unordered_map<Pattern, std::size_t, PatternHash> slot;
    for (std::size_t i = 0; i < observations_.size(); ++i) {
      const auto& obs = observations_[i];
      if (obs.dim() != d_)
        throw InputShapeError("dataset: observation " + std::to_string(i) + " has dimension " +
                              std::to_string(obs.dim()) + ", expected " + std::to_string(d_));
      auto [it, inserted] = slot.try_emplace(obs.pattern(), blocks_.size());
      if (inserted) blocks_.push_back(PatternBlock{obs.pattern(), {}, {}});
      blocks_[it->second].rows.push_back(i);
    }
    for (auto& block : blocks_) {
      const auto& coords = block.pattern.observed();
      block.values.resize(static_cast<Eigen::Index>(block.rows.size()), static_cast<Eigen::Index>(coords.size()));
      for (std::size_t r = 0; r < block.rows.size(); ++r)
        block.values.row(static_cast<Eigen::Index>(r)) = observations_[block.rows[r]].values()(coords).transpose();
    }
  }

  std::size_t size() const noexcept { return observations_.size(); }
  bool empty() const noexcept { return observations_.empty(); }
  std::size_t dim() const noexcept { return d_; }
  const Observation& operator[](std::size_t i) const { return observations_.at(i); }
  const std::vector<Observation>& observations() const noexcept { return observations_; }

  /// Pattern blocks in order of first occurrence; their row lists partition [0, size()).
  const std::vector<PatternBlock>& blocks() const noexcept { return blocks_; }

  /// Dataset from complete rows (one row per observation) and per-row masks.
  static Dataset from_rows(const Matrix& rows, const std::vector<Mask>& masks) {
    if (static_cast<std::size_t>(rows.rows()) != masks.size())
      throw InputShapeError("dataset: row count and mask count differ");
    std::vector<Observation> obs;
    obs.reserve(masks.size());
    for (Eigen::Index i = 0; i < rows.rows(); ++i)
      obs.emplace_back(Vector(rows.row(i).transpose()), masks[static_cast<std::size_t>(i)]);
    return Dataset(static_cast<std::size_t>(rows.cols()), std::move(obs));
  }

  static Dataset complete(const Matrix& rows) {
    return from_rows(rows, std::vector<Mask>(static_cast<std::size_t>(rows.rows()),
                                             Mask(static_cast<std::size_t>(rows.cols()), false)));
  }

 private:
  std::size_t d_;
  std::vector<Observation> observations_;
  std::vector<PatternBlock> blocks_;
};

struct PatternGroup {
  Pattern pattern;
  std::vector<Observation> observations;
};

/// Partition of the dataset by pattern; groups in order of first occurrence, rows in original order.
inline std::vector<PatternGroup> group_by_pattern(const Dataset& dataset) {
  std::vector<PatternGroup> groups;
  groups.reserve(dataset.blocks().size());
  for (const auto& block : dataset.blocks()) {
    PatternGroup g{block.pattern, {}};
    g.observations.reserve(block.rows.size());
    for (auto r : block.rows) g.observations.push_back(dataset[r]);
    groups.push_back(std::move(g));
  }
  return groups;
}

// ---------------------------------------------------------------------------
// CSV

struct CsvReadOptions {
  std::string na_token = "NA";
  bool drop_fully_missing = false;
};

struct CsvReadReport {
  bool had_header = false;
  std::size_t dropped_rows = 0;
  std::vector<std::string> column_names;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

/// Locale-independent decimal parse of the whole cell.
inline bool parse_double(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a numeric CSV with optional header. Rows are 1-based in error messages, counting the header.
inline Dataset read_csv(std::istream& in, const CsvReadOptions& options = {}, CsvReadReport* report = nullptr) {
  CsvReadReport local;
  CsvReadReport& rep = report ? *report : local;
  rep = CsvReadReport{};

  std::vector<Observation> observations;
  std::size_t d = 0;
  std::size_t line_no = 0;
  bool first_content_row = true;
  std::string line;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_commas(line);

    if (first_content_row) {
      first_content_row = false;
      bool any_numeric = false;
      bool all_na = true;
      for (auto c : cells) {
        double v;
        if (detail::parse_double(c, v)) any_numeric = true;
        if (c != options.na_token) all_na = false;
      }
      d = cells.size();
      if (!any_numeric && !all_na) {
        rep.had_header = true;
        for (auto c : cells) rep.column_names.emplace_back(c);
        continue;
      }
    }

    if (cells.size() != d)
      throw DataError("csv row " + std::to_string(line_no) + ": expected " + std::to_string(d) +
                          " cells, found " + std::to_string(cells.size()),
                      line_no);

    Vector values(static_cast<Eigen::Index>(d));
    Mask missing(d, false);
    std::size_t n_missing = 0;
    for (std::size_t j = 0; j < d; ++j) {
      if (cells[j] == options.na_token) {
        missing[j] = true;
        values[static_cast<Eigen::Index>(j)] = not_available();
        ++n_missing;
        continue;
      }
      double v;
      if (!detail::parse_double(cells[j], v))
        throw DataError("csv row " + std::to_string(line_no) + ", column " + std::to_string(j + 1) +
                            ": cannot parse '" + std::string(cells[j]) + "' as a number",
                        line_no, j + 1);
      values[static_cast<Eigen::Index>(j)] = v;
    }
    if (n_missing == d) {
      if (options.drop_fully_missing) {
        ++rep.dropped_rows;
        continue;
      }
      throw DataError("csv row " + std::to_string(line_no) + ": every value is missing", line_no);
    }
    observations.emplace_back(std::move(values), std::move(missing));
  }

  if (d == 0) throw DataError("csv: no data", 0);
  return Dataset(d, std::move(observations));
}

inline Dataset load_csv(const std::string& path, const CsvReadOptions& options, CsvReadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_csv(in, options, report);
}

inline Dataset load_csv(const std::string& path, const std::string& na_token = "NA") {
  return load_csv(path, CsvReadOptions{na_token, false});
}

/// Writes with 17 significant digits, so that reading back reproduces every value exactly.
inline void write_csv(std::ostream& out, const Dataset& dataset, const std::string& na_token = "NA",
                      const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    if (header.size() != dataset.dim()) throw InputShapeError("write_csv: header length differs from dimension");
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
    out << '\n';
  }
  std::ostringstream cell;
  cell.imbue(std::locale::classic());
  cell << std::setprecision(17);
  for (const auto& obs : dataset.observations()) {
    for (std::size_t j = 0; j < dataset.dim(); ++j) {
      if (j) out << ',';
      if (obs.pattern().is_missing(j)) {
        out << na_token;
      } else {
        cell.str({});
        cell << obs.values()[static_cast<Eigen::Index>(j)];
        out << cell.str();
      }
    }
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& dataset, const std::string& na_token = "NA",
                     const std::vector<std::string>& header = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(out, dataset, na_token, header);
}

}  // namespace mmdmiss
