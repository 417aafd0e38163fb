#pragma once

// Quotient geometry of rank-r PSD matrices P = U S U' with U an n x r
// orthonormal frame and S an r x r SPD factor, defined up to the gauge
// (U, S) ~ (U O, O' S O) for orthogonal O.
//
// Convention: the stored factor S is the full r x r covariance block (what
// the flow equations evolve). The invariant metric
//   g((D1, Delta1), (D2, Delta2)) = tr(Delta1' Delta2) + tr(S^-1 D1 S^-1 D2)
// is the square-root form tr(R^-1 D1 R^-2 D2 R^-1) with R = S^1/2 collapsed.

#include "riccati_geo/spd_geometry.hpp"

namespace riccati_geo {

/// n x r matrix with orthonormal columns, 0 < r < n.
class StiefelFrame {
 public:
  /// Throws InvalidInput unless U'U = I to 1e-10 and 0 < r < n.
  explicit StiefelFrame(Matrix u);
  /// Orthonormalizes `m` with the sign-fixed QR factor.
  static StiefelFrame orthonormalize(const Matrix& m);
  /// First r columns of the n x n identity.
  static StiefelFrame canonical(Index n, Index r);

  const Matrix& matrix() const noexcept { return u_; }
  Index n() const noexcept { return u_.rows(); }
  Index r() const noexcept { return u_.cols(); }

  /// Some orthonormal basis of the orthogonal complement (n x (n-r)).
  Matrix complement() const;

 private:
  Matrix u_;
};

struct FixedRankPsd {
  FixedRankPsd(StiefelFrame u, SpdMatrix s);

  StiefelFrame U;
  SpdMatrix S;

  Index n() const noexcept { return U.n(); }
  Index r() const noexcept { return U.r(); }
};

/// Tangent vector (Delta, D) in the horizontal space at a base point:
/// U' Delta = 0, D symmetric.
struct HorizontalTangent {
  Matrix delta;
  Matrix D;
};

/// U S U'.
Matrix to_matrix(const FixedRankPsd& x);

/// Representative of the same point in another gauge: (U O, O' S O).
FixedRankPsd regauge(const FixedRankPsd& x, const Matrix& o);

/// Strips the vertical component of (Udot, Sdot):
/// Delta = (I - U U') Udot, D = (Sdot + Sdot') / 2.
HorizontalTangent horizontal_project(const FixedRankPsd& x, const Matrix& u_dot,
                                     const Matrix& s_dot);

/// Ambient n x n velocity of P = U S U' along (Delta, D):
/// Delta S U' + U S Delta' + U D U'.
Matrix ambient_tangent(const FixedRankPsd& x, const HorizontalTangent& v);

/// tr(Delta1' Delta2) + tr(S^-1 D1 S^-1 D2). Throws InvalidInput when either
/// tangent is not horizontal at `x` (base-point mismatch).
double metric_fixed_rank(const FixedRankPsd& x, const HorizontalTangent& t1,
                         const HorizontalTangent& t2);

/// Orthogonal r x r matrix O maximizing tr(O' U1' U2) (orthogonal
/// Procrustes: the polar factor of U1'U2). When U2 = U1 O, returns O.
/// Throws DegenerateAlignment when U1'U2 is numerically singular.
Matrix align(const FixedRankPsd& x1, const FixedRankPsd& x2);

/// Principal angles between span(U1) and span(U2), ascending.
Vector principal_angles(const StiefelFrame& u1, const StiefelFrame& u2);

/// Euclidean norm of the principal angles.
double grassmann_distance(const StiefelFrame& u1, const StiefelFrame& u2);

struct ApproxDistance {
  double total;
  double grassmann;
  double cone;
};

/// APPROXIMATE distance on the fixed-rank manifold:
///   sqrt(grassmann_distance(U1, U2)^2 + distance_spd(S1, O S2 O')^2)
/// with O = align(x1, x2). Exact on each factor separately (same span, or
/// same aligned S); the true geodesic distance of the quotient metric is not
/// known in closed form, and no triangle inequality is claimed.
ApproxDistance approx_distance_parts(const FixedRankPsd& x1, const FixedRankPsd& x2);
double approx_distance(const FixedRankPsd& x1, const FixedRankPsd& x2);

}  // namespace riccati_geo
