#pragma once

// Rank-preserving low-rank Kalman filter on P = U S U'.
//
// Continuous flow (triangular: U does not see S):
//   dU/dt = (I - U U') A U                                   (Oja flow)
//   dS/dt = A_U S + S A_U' + mu^2 I - S C_U' (H H')^-1 C_U S
// with A_U = U' A U and C_U = C U. The frame is retracted to the Stiefel
// manifold with the sign-fixed QR factor after every step, in both the RK4
// integrator and the discrete-time filter.

#include "riccati_geo/fixed_rank_geometry.hpp"
#include "riccati_geo/riccati_full.hpp"

#include <optional>
#include <vector>

namespace riccati_geo {

struct LowRankConfig {
  double mu = 0.0;  ///< isotropic process-noise scale (noise mu^2 U U')
  double dt = 1e-3;
  Index r = 1;
};

struct LowRankFilterState {
  FixedRankPsd X;
  Vector x_hat;
  double t = 0.0;
};

struct LowRankSample {
  double t;
  FixedRankPsd X;
};

/// (I - U U') A U.
Matrix oja_rhs(const Matrix& a, const StiefelFrame& u);

/// A_U S + S A_U' + mu^2 I - S C_U' (H H')^-1 C_U S, symmetrized.
Matrix lowrank_riccati_rhs(const LtiSystem& sys, const FixedRankPsd& x, double mu, double t = 0.0);

/// Ambient right-hand side of the rank-preserving equation:
/// A P + P A' + mu^2 U U' - P C' (H H')^-1 C P with P = U S U'.
Matrix lowrank_ambient_rhs(const LtiSystem& sys, const FixedRankPsd& x, double mu, double t = 0.0);

/// Diagnostic only: the full Riccati right-hand side Phi(U S U') evaluated on
/// the low-rank point, and the Frobenius norm of its component outside the
/// tangent space of the rank-r manifold (what a rank-preserving flow has to
/// discard). Never integrated.
struct NormalComponent {
  Matrix ambient_rhs;
  double normal_norm;
};
NormalComponent full_rhs_normal_component(const LtiSystem& sys, const FixedRankPsd& x,
                                          double t = 0.0);

/// Coupled RK4 on (U, S) with QR retraction of U and symmetrization of S
/// after every step. Returns the initial sample plus one per step. Throws
/// IntegrationError (with time) when S loses positive definiteness.
std::vector<LowRankSample> integrate_lowrank(const LtiSystem& sys, const FixedRankPsd& x0,
                                             const LowRankConfig& cfg, double t_end);

/// Same integrator with the frame held fixed (only the S equation moves).
std::vector<LowRankSample> integrate_fixed_span(const LtiSystem& sys, const FixedRankPsd& x0,
                                                const LowRankConfig& cfg, double t_end);

/// Oja flow alone, RK4 with retraction.
std::vector<std::pair<double, StiefelFrame>> integrate_oja(const Matrix& a, const StiefelFrame& u0,
                                                           double t_end, double dt);

/// One step of the discrete-time filter:
///   U+ = qf(U + dt (I - U U') A U)
///   S+ = F S F' - F S C_U' (C_U S C_U' + H H'/dt)^-1 C_U S F' + dt mu^2 I,
///        F = I + dt A_U
///   x+ = x + dt ((A - K C) x + K y),  K = U S U' C' (H H')^-1
/// Without a measurement x_hat is left untouched. Throws StepFailure when the
/// innovation matrix cannot be factored or S+ is not SPD.
LowRankFilterState discrete_step(const LtiSystem& sys, const LowRankFilterState& state,
                                 const LowRankConfig& cfg,
                                 const std::optional<MeasurementRecord>& y = std::nullopt);

struct DominantSubspace {
  StiefelFrame U;
  Vector eigenvalues;  ///< symmetric-part spectrum, descending
  double gap;          ///< lambda_r - lambda_{r+1}
};

/// Top-r eigenspace of (A + A')/2, columns in descending eigenvalue order,
/// each column's first non-negligible entry positive. Throws DegenerateGap
/// when the gap is not strictly positive (<= 1e-8 max(1, |lambda|max)).
DominantSubspace dominant_subspace(const Matrix& a, Index r);

/// ||A_U S + S A_U' + mu^2 I - S C_U'(HH')^-1 C_U S||_F at a point.
double projected_are_residual(const LtiSystem& sys, const FixedRankPsd& x, double mu);

}  // namespace riccati_geo
