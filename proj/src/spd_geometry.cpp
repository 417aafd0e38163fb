#include "riccati_geo/spd_geometry.hpp"

#include "riccati_geo/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace riccati_geo {

struct SpdAccess {
  static SpdMatrix unchecked(Matrix m) { return SpdMatrix(std::move(m), SpdMatrix::Unchecked{}); }
};

namespace {

using EigenSolver = Eigen::SelfAdjointEigenSolver<Matrix>;

void validate_spectrum(const Vector& eig, const char* what) {
  const double lo = eig.minCoeff();
  const double hi = eig.maxCoeff();
  if (!(hi > 0.0) || !(lo > kSpdEigenFloor * hi)) {
    std::ostringstream os;
    os << what << ": not positive definite (eigenvalues in [" << lo << ", " << hi << "])";
    throw Error(ErrorCode::InvalidInput, os.str());
  }
}

// V f(Lambda) V' for an already validated SPD matrix.
template <class F>
Matrix spectral_map(const Matrix& m, F f) {
  EigenSolver es(m);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "eigendecomposition failed");
  }
  Vector mapped = es.eigenvalues().unaryExpr(f);
  return symmetrize(es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().transpose());
}

void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimensions " << a << " and " << b << " differ";
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(Matrix m) : m_(std::move(m)) {
  require_square(m_, "symmetric matrix");
  if (!m_.allFinite()) throw Error(ErrorCode::InvalidInput, "symmetric matrix: non-finite entries");
  if (!is_symmetric(m_)) throw Error(ErrorCode::InvalidInput, "matrix is not symmetric");
}

SpdMatrix::SpdMatrix(Matrix m) : m_(std::move(m)) {
  require_square(m_, "SPD matrix");
  if (!m_.allFinite()) throw Error(ErrorCode::InvalidInput, "SPD matrix: non-finite entries");
  if (!is_symmetric(m_)) throw Error(ErrorCode::InvalidInput, "SPD matrix: not symmetric");
  EigenSolver es(m_, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "SPD matrix: eigenvalue computation failed");
  }
  validate_spectrum(es.eigenvalues(), "SPD matrix");
}

SpdMatrix SpdMatrix::identity(Index n) { return SpdAccess::unchecked(Matrix::Identity(n, n)); }

SpdMatrix SpdMatrix::diagonal(const Vector& d) { return SpdMatrix(Matrix(d.asDiagonal())); }

SpdMatrix SpdMatrix::from_symmetrized(const Matrix& m) { return SpdMatrix(symmetrize(m)); }

Vector SpdMatrix::eigenvalues() const {
  return EigenSolver(m_, Eigen::EigenvaluesOnly).eigenvalues();
}

double SpdMatrix::min_eigenvalue() const { return eigenvalues()(0); }

double SpdMatrix::max_eigenvalue() const { return eigenvalues()(dim() - 1); }

SpdMatrix SpdMatrix::inverse() const {
  return SpdAccess::unchecked(spectral_map(m_, [](double x) { return 1.0 / x; }));
}

bool is_spd(const Matrix& m) {
  try {
    SpdMatrix p(m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

double metric_spd(const SpdMatrix& p, const SpdTangent& y1, const SpdTangent& y2) {
  require_same_dim(p.dim(), y1.dim(), "metric_spd");
  require_same_dim(p.dim(), y2.dim(), "metric_spd");
  Eigen::LLT<Matrix> llt(p.matrix());
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidInput, "metric_spd: Cholesky factorization failed");
  }
  const Matrix x1 = llt.solve(y1.matrix());
  const Matrix x2 = llt.solve(y2.matrix());
  // tr(X1 X2) without forming the product.
  return (x1.array() * x2.transpose().array()).sum();
}

double distance_spd(const SpdMatrix& p, const SpdMatrix& q) {
  require_same_dim(p.dim(), q.dim(), "distance_spd");
  if (p.matrix() == q.matrix()) return 0.0;
  const Matrix q_ih = inv_sqrt_spd(q).matrix();
  const Matrix m = symmetrize(q_ih * p.matrix() * q_ih);
  EigenSolver es(m, Eigen::EigenvaluesOnly);
  const Vector& lambda = es.eigenvalues();
  if (es.info() != Eigen::Success || !(lambda.minCoeff() > 0.0)) {
    throw Error(ErrorCode::InvalidInput,
                "distance_spd: relative spectrum has a non-positive eigenvalue");
  }
  return std::sqrt(lambda.array().log().square().sum());
}

SpdMatrix congruence(const Matrix& a, const SpdMatrix& p) {
  require_shape(a, p.dim(), p.dim(), "congruence");
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  const double hi = sv(0);
  const double lo = sv(sv.size() - 1);
  const double eps = std::numeric_limits<double>::epsilon();
  if (!(hi > 0.0) || lo <= static_cast<double>(a.rows()) * eps * hi) {
    throw Error(ErrorCode::InvalidInput, "congruence: transformation is singular");
  }
  if (hi / lo > 1e12) {
    std::ostringstream os;
    os << "congruence: ill-conditioned transformation (cond = " << hi / lo << ")";
    warn(os.str());
  }
  return SpdMatrix::from_symmetrized(a * p.matrix() * a.transpose());
}

SpdMatrix sqrt_spd(const SpdMatrix& p) {
  return SpdAccess::unchecked(spectral_map(p.matrix(), [](double x) { return std::sqrt(x); }));
}

SpdMatrix inv_sqrt_spd(const SpdMatrix& p) {
  return SpdAccess::unchecked(
      spectral_map(p.matrix(), [](double x) { return 1.0 / std::sqrt(x); }));
}

SpdMatrix pow_spd(const SpdMatrix& p, double exponent) {
  return SpdAccess::unchecked(
      spectral_map(p.matrix(), [exponent](double x) { return std::pow(x, exponent); }));
}

SymmetricMatrix log_spd(const SpdMatrix& p) {
  return SymmetricMatrix(spectral_map(p.matrix(), [](double x) { return std::log(x); }));
}

SpdMatrix geodesic_spd(const SpdMatrix& p, const SpdMatrix& q, double s) {
  require_same_dim(p.dim(), q.dim(), "geodesic_spd");
  if (!(s >= 0.0 && s <= 1.0)) {
    std::ostringstream os;
    os << "geodesic_spd: parameter " << s << " outside [0, 1]";
    throw Error(ErrorCode::OutOfRange, os.str());
  }
  if (s == 0.0) return p;
  if (s == 1.0) return q;
  const Matrix p_h = sqrt_spd(p).matrix();
  const Matrix p_ih = inv_sqrt_spd(p).matrix();
  const SpdMatrix rel = SpdMatrix::from_symmetrized(p_ih * q.matrix() * p_ih);
  return SpdMatrix::from_symmetrized(p_h * pow_spd(rel, s).matrix() * p_h);
}

}  // namespace riccati_geo
