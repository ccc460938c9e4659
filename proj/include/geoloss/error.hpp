#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace geoloss {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (dimension mismatch, negative
// weight, empty support, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed textual input. `row` and `column` are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int row = 0, int column = 0)
      : Error(Format(what, row, column)), row_(row), column_(column) {}

  int row() const { return row_; }
  int column() const { return column_; }

 private:
  static std::string Format(const std::string& what, int row, int column) {
    std::string out = what;
    if (row > 0) out += " (row " + std::to_string(row);
    if (row > 0 && column > 0) out += ", column " + std::to_string(column);
    if (row > 0) out += ")";
    return out;
  }

  int row_;
  int column_;
};

// An iterative solver stopped before reaching its tolerance. Carries the last
// residual and the residual history so callers can inspect what happened.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations,
                   std::vector<double> trace = {})
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations),
        trace_(std::move(trace)) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }
  const std::vector<double>& trace() const { return trace_; }

 private:
  double residual_;
  int iterations_;
  std::vector<double> trace_;
};

// Numerical failure that is not a convergence issue (NaN loss, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace geoloss
