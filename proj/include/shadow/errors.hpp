#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace shadow {

/// Caller broke a precondition (wrong dimension, misaligned window, bad config value).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures that come out of the numerics rather than the inputs.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationDiverged : public NumericalError {
 public:
  IntegrationDiverged(const std::string& what, std::size_t step)
      : NumericalError(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class RankDeficient : public NumericalError {
 public:
  explicit RankDeficient(std::size_t column)
      : NumericalError("rank-deficient matrix at column " + std::to_string(column)), column_(column) {}
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class SingularSystem : public NumericalError {
 public:
  explicit SingularSystem(std::size_t index)
      : NumericalError("near-singular triangular diagonal at index " + std::to_string(index)), index_(index) {}
  [[nodiscard]] std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// ||f(u)|| too small to build the terminal particular solution.
class NearEquilibrium : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Every tracked exponent is unstable; more homogeneous solutions are needed.
class SubspaceOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace shadow
