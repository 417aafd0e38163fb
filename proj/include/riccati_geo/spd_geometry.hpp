#pragma once

// Affine-invariant (natural) Riemannian geometry of the cone of symmetric
// positive definite matrices.
//
// Every spectral quantity (square roots, powers, logs, the distance) goes
// through a symmetric eigendecomposition. A matrix is accepted as SPD when it
// is symmetric to 1e-12 (relative) and its smallest eigenvalue exceeds
// 1e-12 times its largest. Nothing is ever clamped: a spectrum that fails
// these tests is an InvalidInput error.

#include "riccati_geo/linalg.hpp"

namespace riccati_geo {

inline constexpr double kSpdEigenFloor = 1e-12;

struct SpdAccess;

/// Symmetric matrix; the tangent space of the SPD cone at any point.
class SymmetricMatrix {
 public:
  /// Throws InvalidInput when `m` is not square or not symmetric.
  explicit SymmetricMatrix(Matrix m);
  static SymmetricMatrix zero(Index n) { return SymmetricMatrix(Matrix::Zero(n, n)); }
  static SymmetricMatrix identity(Index n) { return SymmetricMatrix(Matrix::Identity(n, n)); }

  const Matrix& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }

 private:
  Matrix m_;
};

using SpdTangent = SymmetricMatrix;

class SpdMatrix {
 public:
  /// Validates symmetry and positive definiteness; throws InvalidInput.
  explicit SpdMatrix(Matrix m);
  static SpdMatrix identity(Index n);
  static SpdMatrix diagonal(const Vector& d);
  /// Symmetrizes before validating. Used on integrator output.
  static SpdMatrix from_symmetrized(const Matrix& m);

  const Matrix& matrix() const noexcept { return m_; }
  Index dim() const noexcept { return m_.rows(); }

  /// Ascending eigenvalues.
  Vector eigenvalues() const;
  double min_eigenvalue() const;
  double max_eigenvalue() const;
  SpdMatrix inverse() const;

 private:
  struct Unchecked {};
  SpdMatrix(Matrix m, Unchecked) : m_(std::move(m)) {}
  Matrix m_;

  friend struct SpdAccess;
};

/// True when `m` passes the SPD acceptance test (no throw).
bool is_spd(const Matrix& m);

/// g_P(Y1, Y2) = tr(P^-1 Y1 P^-1 Y2).
double metric_spd(const SpdMatrix& p, const SpdTangent& y1, const SpdTangent& y2);

/// Geodesic distance: sqrt(sum log^2 lambda_i), lambda_i the eigenvalues of
/// Q^-1/2 P Q^-1/2 (equivalently of P Q^-1).
double distance_spd(const SpdMatrix& p, const SpdMatrix& q);

/// A P A'. Throws InvalidInput for singular A; warns when cond(A) > 1e12.
SpdMatrix congruence(const Matrix& a, const SpdMatrix& p);

SpdMatrix sqrt_spd(const SpdMatrix& p);
SpdMatrix inv_sqrt_spd(const SpdMatrix& p);
/// Real power through the eigendecomposition.
SpdMatrix pow_spd(const SpdMatrix& p, double exponent);
/// Matrix logarithm (symmetric, not SPD).
SymmetricMatrix log_spd(const SpdMatrix& p);

/// Point at parameter s in [0, 1] on the natural-metric geodesic from P to Q:
/// P^1/2 (P^-1/2 Q P^-1/2)^s P^1/2. Throws OutOfRange outside [0, 1].
SpdMatrix geodesic_spd(const SpdMatrix& p, const SpdMatrix& q, double s);

}  // namespace riccati_geo
