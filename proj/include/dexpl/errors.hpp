#pragma once

#include <stdexcept>
#include <string>

namespace dexpl {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes do not line up.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// An input contains NaN or infinity where a finite value is required.
class NonFiniteInput : public Error {
public:
  using Error::Error;
};

/// Malformed model, dataset, stats or grouping file.
/// The message carries the offending position.
class ParseError : public Error {
public:
  using Error::Error;
};

/// The requested level lies outside the attainable range of the link
/// function over the given domain.
class InfeasibleTarget : public Error {
public:
  using Error::Error;
};

/// Grid refinement hit its ceiling before the reconstruction error fell
/// below tolerance.
class ToleranceNotReached : public Error {
public:
  ToleranceNotReached(long grid_points, double error, const std::string& context)
      : Error(context + ": reconstruction error " + std::to_string(error) +
              " still above tolerance at " + std::to_string(grid_points) +
              " grid points"),
        grid_points_(grid_points),
        error_(error) {}

  long grid_points() const { return grid_points_; }
  double error() const { return error_; }

private:
  long grid_points_;
  double error_;
};

/// All weights are zero while a nonzero baseline has to be redistributed.
class DegenerateWeights : public Error {
public:
  using Error::Error;
};

/// A column has zero variance and cannot be standardized.
class ZeroVariance : public Error {
public:
  explicit ZeroVariance(std::size_t column)
      : Error("column " + std::to_string(column + 1) + " has zero variance"),
        column_(column) {}

  /// Zero-based column index.
  std::size_t column() const { return column_; }

private:
  std::size_t column_;
};

/// Model shape or link combination the explainer does not support.
class UnsupportedModel : public Error {
public:
  using Error::Error;
};

/// Exact chaining would exceed the configured branch budget.
class ChainBudgetExceeded : public Error {
public:
  using Error::Error;
};

}  // namespace dexpl
