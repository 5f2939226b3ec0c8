#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sgspde {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite symbol value or field entry.
struct EvaluationError : Error {
  using Error::Error;
};

// Grid, dimension or shape mismatch between inputs.
struct ShapeError : Error {
  using Error::Error;
};

// Precondition on a scalar argument not met.
struct ArgumentError : Error {
  using Error::Error;
};

struct HorizonError : Error {
  HorizonError(const std::string& what, double admissible)
      : Error(what), admissible_t(admissible) {}
  double admissible_t;
};

struct AccuracyError : Error {
  AccuracyError(const std::string& what, double r) : Error(what), residual(r) {}
  double residual;
};

// Operation declined because a certification or separation precondition failed.
struct RefusalError : Error {
  using Error::Error;
};

struct NotHyperbolicError : Error {
  using Error::Error;
};

struct UnsupportedError : Error {
  using Error::Error;
};

struct InstabilityError : Error {
  using Error::Error;
};

struct ContractViolation : Error {
  ContractViolation(const std::string& what, double ratio, double bound)
      : Error(what), observed(ratio), envelope(bound) {}
  double observed;
  double envelope;
};

struct NoContractionError : Error {
  NoContractionError(const std::string& what, double k) : Error(what), kappa(k) {}
  double kappa;
};

struct NonConvergenceError : Error {
  NonConvergenceError(const std::string& what, std::vector<double> d)
      : Error(what), differences(std::move(d)) {}
  std::vector<double> differences;
};

struct ParseError : Error {
  ParseError(const std::string& what, int ln, int col)
      : Error(what + " (line " + std::to_string(ln) + ", column " + std::to_string(col) + ")"),
        line(ln),
        column(col) {}
  int line;
  int column;
};

}  // namespace sgspde
