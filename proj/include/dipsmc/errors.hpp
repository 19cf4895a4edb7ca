#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dipsmc {

/// Invalid geometry: empty grid, sensor inside the conductor, singular field evaluation.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration. Raised before any compute starts.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A particle system lost all of its mass at a given (0-based) time index.
class DegenerateError : public std::runtime_error {
 public:
  DegenerateError(const std::string& what, std::size_t time_index)
      : std::runtime_error(what + " at t=" + std::to_string(time_index + 1)),
        time_index_(time_index) {}

  std::size_t time_index() const noexcept { return time_index_; }

  /// Same error with a prefix such as "run 3: " prepended to the message.
  static DegenerateError prefixed(const std::string& prefix, const DegenerateError& e) {
    return DegenerateError(Raw{}, prefix + e.what(), e.time_index());
  }

 private:
  struct Raw {};
  DegenerateError(Raw, const std::string& message, std::size_t time_index)
      : std::runtime_error(message), time_index_(time_index) {}

  std::size_t time_index_;
};

/// Smoothing weights are all zero because the two supports cannot reach each other.
class IncompatibleSupportsError : public DegenerateError {
 public:
  explicit IncompatibleSupportsError(std::size_t time_index)
      : DegenerateError("incompatible supports", time_index) {}
};

}  // namespace dipsmc
