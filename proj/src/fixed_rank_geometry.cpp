#include "riccati_geo/fixed_rank_geometry.hpp"

#include "riccati_geo/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace riccati_geo {

namespace {

constexpr double kFrameTol = 1e-10;
constexpr double kHorizontalTol = 1e-10;
constexpr double kAlignTol = 1e-12;

void require_compatible(const StiefelFrame& a, const StiefelFrame& b, const char* what) {
  if (a.n() != b.n() || a.r() != b.r()) {
    std::ostringstream os;
    os << what << ": frames are " << a.n() << "x" << a.r() << " and " << b.n() << "x" << b.r();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void require_horizontal(const FixedRankPsd& x, const HorizontalTangent& v) {
  require_shape(v.delta, x.n(), x.r(), "horizontal tangent Delta");
  require_shape(v.D, x.r(), x.r(), "horizontal tangent D");
  const double scale = 1.0 + v.delta.cwiseAbs().maxCoeff();
  if ((x.U.matrix().transpose() * v.delta).cwiseAbs().maxCoeff() > kHorizontalTol * scale) {
    throw Error(ErrorCode::InvalidInput, "tangent is not horizontal at this base point");
  }
  if (!is_symmetric(v.D, 1e-10)) {
    throw Error(ErrorCode::InvalidInput, "tangent D component is not symmetric");
  }
}

}  // namespace

StiefelFrame::StiefelFrame(Matrix u) : u_(std::move(u)) {
  if (u_.cols() <= 0 || u_.cols() >= u_.rows()) {
    std::ostringstream os;
    os << "Stiefel frame needs 0 < r < n, got " << shape_string(u_);
    throw Error(ErrorCode::InvalidInput, os.str());
  }
  if (!u_.allFinite()) throw Error(ErrorCode::InvalidInput, "Stiefel frame has non-finite entries");
  const Matrix gram = u_.transpose() * u_;
  if ((gram - Matrix::Identity(u_.cols(), u_.cols())).cwiseAbs().maxCoeff() > kFrameTol) {
    throw Error(ErrorCode::InvalidInput, "frame columns are not orthonormal (U'U != I)");
  }
}

StiefelFrame StiefelFrame::orthonormalize(const Matrix& m) { return StiefelFrame(qf(m)); }

StiefelFrame StiefelFrame::canonical(Index n, Index r) {
  return StiefelFrame(Matrix::Identity(n, r));
}

Matrix StiefelFrame::complement() const {
  const Index n = u_.rows();
  Eigen::HouseholderQR<Matrix> qr(u_);
  const Matrix full = qr.householderQ() * Matrix::Identity(n, n);
  return full.rightCols(n - u_.cols());
}

FixedRankPsd::FixedRankPsd(StiefelFrame u, SpdMatrix s) : U(std::move(u)), S(std::move(s)) {
  if (S.dim() != U.r()) {
    std::ostringstream os;
    os << "fixed-rank point: S is " << S.dim() << "x" << S.dim() << " but rank is " << U.r();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

Matrix to_matrix(const FixedRankPsd& x) {
  const Matrix& u = x.U.matrix();
  return symmetrize(u * x.S.matrix() * u.transpose());
}

FixedRankPsd regauge(const FixedRankPsd& x, const Matrix& o) {
  require_shape(o, x.r(), x.r(), "regauge");
  return {StiefelFrame(x.U.matrix() * o),
          SpdMatrix::from_symmetrized(o.transpose() * x.S.matrix() * o)};
}

HorizontalTangent horizontal_project(const FixedRankPsd& x, const Matrix& u_dot,
                                     const Matrix& s_dot) {
  require_shape(u_dot, x.n(), x.r(), "horizontal_project Udot");
  require_shape(s_dot, x.r(), x.r(), "horizontal_project Sdot");
  const Matrix& u = x.U.matrix();
  return {u_dot - u * (u.transpose() * u_dot), symmetrize(s_dot)};
}

Matrix ambient_tangent(const FixedRankPsd& x, const HorizontalTangent& v) {
  require_horizontal(x, v);
  const Matrix& u = x.U.matrix();
  const Matrix ds_ut = v.delta * x.S.matrix() * u.transpose();
  return symmetrize(ds_ut + ds_ut.transpose() + u * v.D * u.transpose());
}

double metric_fixed_rank(const FixedRankPsd& x, const HorizontalTangent& t1,
                         const HorizontalTangent& t2) {
  require_horizontal(x, t1);
  require_horizontal(x, t2);
  const double subspace = (t1.delta.array() * t2.delta.array()).sum();
  const double cone = metric_spd(x.S, SymmetricMatrix(symmetrize(t1.D)),
                                 SymmetricMatrix(symmetrize(t2.D)));
  return subspace + cone;
}

Matrix align(const FixedRankPsd& x1, const FixedRankPsd& x2) {
  require_compatible(x1.U, x2.U, "align");
  const Matrix m = x1.U.matrix().transpose() * x2.U.matrix();
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > kAlignTol)) {
    throw Error(ErrorCode::DegenerateAlignment,
                "align: spans are (numerically) orthogonal in some direction; U1'U2 is singular");
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

Vector principal_angles(const StiefelFrame& u1, const StiefelFrame& u2) {
  require_compatible(u1, u2, "principal_angles");
  const Index r = u1.r();
  const Matrix& a = u1.matrix();
  const Matrix& b = u2.matrix();
  if (a == b) return Vector::Zero(r);
  // Cosines (descending) from U1'U2, sines (ascending) from the part of U2
  // outside span(U1). Small angles come from the sines, where arccos is
  // ill-conditioned.
  const Vector cosines = Eigen::JacobiSVD<Matrix>(a.transpose() * b).singularValues();
  const Matrix outside = b - a * (a.transpose() * b);
  Vector sines = Eigen::JacobiSVD<Matrix>(outside).singularValues().reverse();
  Vector angles(r);
  for (Index i = 0; i < r; ++i) {
    const double c = std::clamp(cosines(i), 0.0, 1.0);
    if (c * c >= 0.5) {
      angles(i) = std::asin(std::clamp(sines(i), 0.0, 1.0));
    } else {
      angles(i) = std::acos(c);
    }
  }
  std::sort(angles.data(), angles.data() + r);
  return angles;
}

double grassmann_distance(const StiefelFrame& u1, const StiefelFrame& u2) {
  return principal_angles(u1, u2).norm();
}

ApproxDistance approx_distance_parts(const FixedRankPsd& x1, const FixedRankPsd& x2) {
  if (x1.U.matrix() == x2.U.matrix()) {
    require_compatible(x1.U, x2.U, "approx_distance");
    const double cone = distance_spd(x1.S, x2.S);
    return {cone, 0.0, cone};
  }
  const Matrix o = align(x1, x2);
  const double subspace = grassmann_distance(x1.U, x2.U);
  const SpdMatrix s2_aligned = SpdMatrix::from_symmetrized(o * x2.S.matrix() * o.transpose());
  const double cone = distance_spd(x1.S, s2_aligned);
  return {std::hypot(subspace, cone), subspace, cone};
}

double approx_distance(const FixedRankPsd& x1, const FixedRankPsd& x2) {
  return approx_distance_parts(x1, x2).total;
}

}  // namespace riccati_geo
