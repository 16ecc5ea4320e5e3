#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace amc {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/frame/batch dimensions do not match what an operation expects.
class InputShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-range label, class id, or similar value-level input problem.
class InputError : public Error {
 public:
  using Error::Error;
};

// The operation is not defined for the given kind of input (e.g. mapping bits
// for an analog modulation).
class UnsupportedOperationError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A binary file failed validation. offset() is the byte position at which
// the problem was detected.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Numerical failure during a numerical procedure (e.g. rank-0 gradient
// matrix for the universal perturbation).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss). last_finite() holds the last
// parameter vector whose loss was finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> last_finite)
      : Error(what), last_finite_(std::move(last_finite)) {}
  const std::vector<double>& last_finite() const noexcept { return last_finite_; }

 private:
  std::vector<double> last_finite_;
};

}  // namespace amc
