#pragma once

#include <stdexcept>
#include <string>

namespace panellp {

// Two families: bad input (exit code 1) and numerical failure (exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : ValidationError("parse error at row " + std::to_string(row) + ", column '" + column +
                        "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class DuplicateKey : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonMonotoneTime : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownVariable : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidParameter : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnstableSystem : public ValidationError {
 public:
  UnstableSystem(const std::string& what, double spectral_radius)
      : ValidationError(what), spectral_radius_(spectral_radius) {}
  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  double spectral_radius_;
};

class EmptySample : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class RankDeficient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoWithinVariation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace panellp
