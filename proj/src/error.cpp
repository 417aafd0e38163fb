#include "riccati_geo/error.hpp"

#include <iostream>
#include <mutex>

namespace riccati_geo {

namespace {

std::mutex& handler_mutex() {
  static std::mutex m;
  return m;
}

WarningHandler& handler() {
  static WarningHandler h = [](std::string_view msg) {
    std::cerr << "riccati-geo warning: " << msg << '\n';
  };
  return h;
}

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid input";
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::OutOfRange: return "out of range";
    case ErrorCode::IntegrationFailure: return "integration failure";
    case ErrorCode::NoConvergence: return "no convergence";
    case ErrorCode::DegenerateAlignment: return "degenerate alignment";
    case ErrorCode::DegenerateGap: return "degenerate eigen-gap";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::FitFailure: return "fit failure";
    case ErrorCode::StepFailure: return "step failure";
  }
  return "unknown error";
}

void set_warning_handler(WarningHandler h) {
  std::lock_guard lock(handler_mutex());
  handler() = std::move(h);
}

void warn(std::string_view message) {
  std::lock_guard lock(handler_mutex());
  if (handler()) handler()(message);
}

}  // namespace riccati_geo
