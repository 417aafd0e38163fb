#pragma once

// Built-in system generators and the synthetic truth/measurement simulator
// used by the experiment CLI.

#include "riccati_geo/riccati_full.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace riccati_geo {

/// Generator parameters by name; scalars are one-element vectors.
using ParamMap = std::map<std::string, std::vector<double>>;

/// heat1d: second-difference Laplacian on the unit interval with n interior
/// nodes, A = kappa (n+1)^2 tridiag(1, -2, 1) + source I, `sensors` evenly
/// spaced point sensors, G = g I, H = sigma I.
///   params: n (required), kappa = 1, sensors = 2, sigma = 1, g = 1, source = 0
/// random-observable: A = Q diag(spectrum) Q' + skew part, random C, G = I,
/// H = sigma I; redrawn until (A, C) is observable.
///   params: n (required), p = 1, spectrum = {-1, ..., -n}, skew = 0.5,
///   sigma = 1, seed = 0
/// skew: block-rotation A with C = 0, G = 0, H = 1.
///   params: n = 3, omega (3-vector, n = 3 only) or rates (one per 2x2 block)
LtiSystem generate_scenario(const std::string& name, const ParamMap& params);

std::vector<std::string> scenario_names();

struct TruthOptions {
  bool process_noise = true;
  bool measurement_noise = true;
};

struct TruthTrace {
  std::vector<double> times;
  std::vector<Vector> states;
  std::vector<Vector> measurements;
};

/// Euler-Maruyama for dx = A x dt + G dw with y = C x + H eta sampled at
/// every step: x+ = x + dt A x + sqrt(dt) G w, y = C x + H v / sqrt(dt),
/// w, v ~ N(0, I). Deterministic for a given seed. Throws
/// IntegrationFailure on overflow.
TruthTrace simulate_truth(const LtiSystem& sys, const Vector& x0, double t_end, double dt,
                          std::uint64_t seed, const TruthOptions& opts = {});

}  // namespace riccati_geo
