#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>

namespace synthctl {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that violate a documented precondition (shapes, ranges, unknown keys).
class InvalidSpecification : public Error {
 public:
  using Error::Error;
};

/// NaN or infinite values reached a numeric routine.
class NumericInputError : public Error {
 public:
  using Error::Error;
};

/// The simplex solver hit its iteration cap. Carries the best iterate found
/// and its Frank-Wolfe duality gap so callers can decide whether to accept it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd best, double gap)
      : Error(what), best_(std::move(best)), gap_(gap) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
  double gap() const noexcept { return gap_; }

 private:
  Eigen::VectorXd best_;
  double gap_;
};

/// A Monte Carlo cell could not be completed (too many failed replications).
class HarnessError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Line and column are 1-based; column 0 means the
/// whole line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line, long column)
      : Error(what), line_(line), column_(column) {}

  long line() const noexcept { return line_; }
  long column() const noexcept { return column_; }

 private:
  long line_;
  long column_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.size() == 0 || x.allFinite();
}

}  // namespace synthctl
