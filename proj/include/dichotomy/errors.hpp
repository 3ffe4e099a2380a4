#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace dichotomy {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Base for failures of a numerical procedure (as opposed to bad input).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IntegrationFailure : public NumericalError {
 public:
  IntegrationFailure(double t, std::optional<std::size_t> step = std::nullopt)
      : NumericalError(message(t, step)), time_(t), step_(step) {}

  double time() const noexcept { return time_; }
  std::optional<std::size_t> step() const noexcept { return step_; }

 private:
  static std::string message(double t, std::optional<std::size_t> step) {
    std::string m = "non-finite derivative at t=" + std::to_string(t);
    if (step) m += " (step " + std::to_string(*step) + ")";
    return m;
  }

  double time_;
  std::optional<std::size_t> step_;
};

class SingularMatrix : public NumericalError {
 public:
  explicit SingularMatrix(long column)
      : NumericalError("rank deficiency at column " + std::to_string(column)), column_(column) {}
  long column() const noexcept { return column_; }

 private:
  long column_;
};

class FrameCollapse : public NumericalError {
 public:
  FrameCollapse(double t, long column)
      : NumericalError("subspace frame lost rank at t=" + std::to_string(t) + " (column " +
                       std::to_string(column) + ")"),
        time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class DefinitenessLoss : public NumericalError {
 public:
  explicit DefinitenessLoss(double t)
      : NumericalError("Riccati matrix lost positive definiteness at t=" + std::to_string(t)),
        time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class Divergence : public NumericalError {
 public:
  Divergence(double t, double norm)
      : NumericalError("estimation error diverged at t=" + std::to_string(t) +
                       " (norm " + std::to_string(norm) + ")"),
        time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace dichotomy
