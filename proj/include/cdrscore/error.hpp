#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cdrscore {

// Process exit codes used by the command line tool.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, convergence = 3 };

// Bad arguments or configuration supplied by the caller.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data is malformed, inconsistent, or does not satisfy a precondition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A single malformed input row. Carries the 1-based row number.
class RowError : public DataError {
 public:
  RowError(std::size_t row, const std::string& reason)
      : DataError("row " + std::to_string(row) + ": " + reason), row_(row), reason_(reason) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t row_;
  std::string reason_;
};

// An iterative method ran out of iterations.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what + " (iterations=" + std::to_string(iterations) +
                           ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

}  // namespace cdrscore
