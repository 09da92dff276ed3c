#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ld3 {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A time or log-SNR argument outside the schedule's support.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input values (non-finite vectors, mismatched shapes).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A time grid that is not strictly decreasing or has the wrong endpoints.
class GridError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// The solver state became non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// A non-finite value or adjoint was met during a backward sweep.
class GradientError : public Error {
 public:
  GradientError(const std::string& what, std::size_t op_index)
      : Error(what + " (tape op " + std::to_string(op_index) + ")"), op_index_(op_index) {}
  std::size_t op_index() const noexcept { return op_index_; }

 private:
  std::size_t op_index_;
};

/// Stochastic training produced a non-finite loss.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, std::size_t step)
      : Error(what + " (training step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

}  // namespace ld3
