#pragma once

#include <stdexcept>
#include <string>

namespace mmdmiss {

/// Vectors or samples whose shapes do not agree, or are empty.
class InputShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid numeric parameter (non-positive bandwidth, probability outside [0,1], ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid estimator / experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file. Row and column indices are 1-based and part of the message.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t row, std::size_t column = 0)
      : std::runtime_error(what), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class BandwidthUndefinedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A coordinate that is never observed, so per-coordinate estimators are undefined.
class UndefinedCoordinateError : public std::runtime_error {
 public:
  UndefinedCoordinateError(const std::string& what, std::size_t coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}

  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite iterate or other numerical breakdown at run time.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmdmiss
