#pragma once

// Full-rank continuous-time Kalman-Bucy filter: the Riccati flow
//   dP/dt = A P + P A' + G G' - P C' (H H')^-1 C P
// its fixed-step RK4 integration, the stationary solution reached by
// integrating the flow to a residual, and the state-estimate filter.

#include "riccati_geo/spd_geometry.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace riccati_geo {

/// dx = A x dt + G dw,  y = C x + H eta.
class LtiSystem {
 public:
  using Provider = std::function<LtiSystem(double)>;

  /// Throws DimensionMismatch for inconsistent shapes and InvalidInput when
  /// H H' is not invertible (smallest eigenvalue <= 1e-12 largest).
  LtiSystem(Matrix a, Matrix c, Matrix g, Matrix h);

  /// Coefficients that vary in time. `nominal` fixes the dimensions; every
  /// system returned by `provider` must match them.
  static LtiSystem time_varying(LtiSystem nominal, Provider provider);

  const Matrix& A() const noexcept { return a_; }
  const Matrix& C() const noexcept { return c_; }
  const Matrix& G() const noexcept { return g_; }
  const Matrix& H() const noexcept { return h_; }
  Index n() const noexcept { return a_.rows(); }
  Index m() const noexcept { return g_.cols(); }
  Index p() const noexcept { return c_.rows(); }

  const Matrix& process_noise() const noexcept { return gg_; }
  /// H H'
  const Matrix& measurement_covariance() const noexcept { return hh_; }
  /// (H H')^-1
  const Matrix& measurement_precision() const noexcept { return r_inv_; }
  /// C' (H H')^-1 C
  const Matrix& output_weight() const noexcept { return w_; }

  bool is_time_varying() const noexcept { return static_cast<bool>(provider_); }
  /// Coefficients frozen at time t (a copy of *this when time-invariant).
  LtiSystem at(double t) const;

 private:
  Matrix a_, c_, g_, h_;
  Matrix gg_, hh_, r_inv_, w_;
  std::shared_ptr<const Provider> provider_;
};

/// Calls `f` with the coefficients in force at time t, copying only for
/// time-varying systems.
template <class F>
decltype(auto) with_system_at(const LtiSystem& sys, double t, F&& f) {
  if (!sys.is_time_varying()) return f(sys);
  const LtiSystem frozen = sys.at(t);
  return f(frozen);
}

struct MeasurementRecord {
  double t = 0.0;
  Vector y;
};

struct FilterState {
  Vector x_hat;
  SpdMatrix P;
  double t = 0.0;
};

struct CovarianceSample {
  double t;
  SpdMatrix P;
};

/// Phi_t(P), symmetrized.
SymmetricMatrix riccati_rhs(const LtiSystem& sys, const SpdMatrix& p, double t);
/// Same map on a raw symmetric matrix (RK stages need not be SPD).
Matrix riccati_rhs_raw(const LtiSystem& sys, const Matrix& p, double t);

/// One RK4 step of the Riccati flow; the result is symmetrized but not
/// validated.
Matrix riccati_rk4_step(const LtiSystem& sys, const Matrix& p, double t, double h);

/// Fixed-step RK4 from t0 to t_end. Returns the initial sample and one sample
/// per step; the final step is shortened to land on t_end. Every iterate is
/// symmetrized and SPD-checked; failure throws IntegrationError with the time.
std::vector<CovarianceSample> integrate_riccati(const LtiSystem& sys, const SpdMatrix& p0,
                                                double t_end, double dt, double t0 = 0.0);

struct AreOptions {
  /// Step size; <= 0 picks 1 / (2 ||A - P C'(HH')^-1 C||_F), capped at
  /// max_dt, re-evaluated every step.
  double dt = 0.0;
  double max_dt = 0.1;
  long max_steps = 2'000'000;
  bool record_history = true;
};

struct AreSolution {
  SpdMatrix Q;
  double residual;
  double time;
  long steps;
  /// ||Phi(P_k)||_F for every iterate, including the start.
  std::vector<double> residual_history;
};

/// Stationary solution of the Riccati flow, reached by integrating from the
/// identity until ||Phi(P)||_F <= tol. Warns (does not fail) when (A, C) is
/// numerically unobservable or G is rank deficient. Throws ConvergenceError
/// when the step budget runs out.
AreSolution solve_are(const LtiSystem& sys, double tol, const AreOptions& opts = {});

/// One step of the filter. x_hat advances by RK4 on
///   dx/dt = (A - K C) x + K y,  K = P C' (H H')^-1
/// with K frozen at the start of the step and y held constant; P advances by
/// one RK4 step of the Riccati flow. Without a measurement only the
/// covariance is propagated and x_hat follows dx/dt = A x.
FilterState filter_step(const LtiSystem& sys, const FilterState& state,
                        const std::optional<MeasurementRecord>& y, double dt);

/// Linearized Riccati flow along a trajectory:
///   d(dP)/dt = (A - P W) dP + dP (A - P W)',  W = C' (H H')^-1 C.
struct VariationSample {
  double t;
  SpdMatrix P;
  Matrix dP;
};

std::vector<VariationSample> integrate_variation(const LtiSystem& sys, const SpdMatrix& p0,
                                                 const SymmetricMatrix& dp0, double t_end,
                                                 double dt);

/// Dimension of the observable subspace of (A, C), grown as an orthonormal
/// Krylov basis of span{C', A'C', ...}; directions shorter than
/// rel_tol * max(1, ||A||) after orthogonalization are dropped.
Index observable_dimension(const Matrix& a, const Matrix& c, double rel_tol = 1e-10);
bool is_observable(const Matrix& a, const Matrix& c, double rel_tol = 1e-10);

}  // namespace riccati_geo
