#pragma once

namespace riccati_geo {

/// One classical fourth-order Runge-Kutta step. `State` needs
/// `State + State` and `double * State`.
template <class State, class Rhs>
State rk4_step(const Rhs& rhs, double t, const State& y, double h) {
  const State k1 = rhs(t, y);
  const State k2 = rhs(t + 0.5 * h, State(y + (0.5 * h) * k1));
  const State k3 = rhs(t + 0.5 * h, State(y + (0.5 * h) * k2));
  const State k4 = rhs(t + h, State(y + h * k3));
  return State(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Number of steps of size at most `dt` covering [0, span].
long step_count(double span, double dt);

}  // namespace riccati_geo
