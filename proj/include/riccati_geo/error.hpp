#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace riccati_geo {

enum class ErrorCode {
  InvalidInput = 1,
  DimensionMismatch,
  OutOfRange,
  IntegrationFailure,
  NoConvergence,
  DegenerateAlignment,
  DegenerateGap,
  Precondition,
  FitFailure,
  StepFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when an integrated iterate leaves the manifold (loses positive
/// definiteness); carries the time of the failing step.
class IntegrationError : public Error {
 public:
  IntegrationError(double time, const std::string& what)
      : Error(ErrorCode::IntegrationFailure, what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, const std::string& what)
      : Error(ErrorCode::NoConvergence, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Non-fatal diagnostics (ill-conditioned congruence, marginal
/// observability). Defaults to stderr; a null handler silences them.
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace riccati_geo
