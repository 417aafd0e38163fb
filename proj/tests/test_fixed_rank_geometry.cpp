#include "riccati_geo/error.hpp"
#include "riccati_geo/fixed_rank_geometry.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace riccati_geo;
using namespace riccati_geo::testing;

namespace {

StiefelFrame unit_vector(double angle) {
  Matrix u(2, 1);
  u << std::cos(angle), std::sin(angle);
  return StiefelFrame(u);
}

HorizontalTangent random_tangent(std::mt19937_64& rng, const FixedRankPsd& x) {
  return horizontal_project(x, gaussian(rng, x.n(), x.r()), gaussian(rng, x.r(), x.r()));
}

}  // namespace

TEST_CASE("StiefelFrame validation") {
  CHECK_NOTHROW(StiefelFrame::canonical(4, 2));
  CHECK_THROWS_AS(StiefelFrame(Matrix::Identity(3, 3)), Error);
  CHECK_THROWS_AS(StiefelFrame(2.0 * Matrix::Identity(3, 1)), Error);
  std::mt19937_64 rng(1);
  const StiefelFrame u = random_frame(rng, 6, 2);
  const Matrix comp = u.complement();
  CHECK(comp.cols() == 4);
  CHECK(max_abs(u.matrix().transpose() * comp) < 1e-12);
  CHECK(max_abs(comp.transpose() * comp - Matrix::Identity(4, 4)) < 1e-12);
}

TEST_CASE("to_matrix") {
  const FixedRankPsd canon(StiefelFrame::canonical(4, 2), SpdMatrix::identity(2));
  Matrix expect = Matrix::Zero(4, 4);
  expect.topLeftCorner(2, 2).setIdentity();
  CHECK(max_abs(to_matrix(canon) - expect) == 0.0);

  const FixedRankPsd spike(StiefelFrame::canonical(3, 1), SpdMatrix(Matrix::Constant(1, 1, 4.0)));
  Matrix e1 = Matrix::Zero(3, 3);
  e1(0, 0) = 4.0;
  CHECK(max_abs(to_matrix(spike) - e1) == 0.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const FixedRankPsd x = random_point(rng, 6, 3);
    const Matrix o = random_orthogonal(rng, 3);
    CHECK(max_abs(to_matrix(x) - to_matrix(regauge(x, o))) < 1e-12);
    // Spectrum is eig(S) padded with zeros.
    Eigen::SelfAdjointEigenSolver<Matrix> es(to_matrix(x));
    const Vector ev = es.eigenvalues();
    const Vector sev = x.S.eigenvalues();
    CHECK(ev.head(3).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ev.tail(3) - sev).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("horizontal_project") {
  std::mt19937_64 rng(3);
  const FixedRankPsd x = random_point(rng, 5, 2);
  const Matrix& u = x.U.matrix();
  const HorizontalTangent vert = horizontal_project(x, u * gaussian(rng, 2, 2), Matrix::Zero(2, 2));
  CHECK(max_abs(vert.delta) < 1e-14);

  const HorizontalTangent t = random_tangent(rng, x);
  CHECK(max_abs(u.transpose() * t.delta) < 1e-12);
  CHECK(max_abs(t.D - t.D.transpose()) == 0.0);
  const HorizontalTangent again = horizontal_project(x, t.delta, t.D);
  CHECK(max_abs(again.delta - t.delta) < 1e-15);
  CHECK(max_abs(again.D - t.D) == 0.0);
}

TEST_CASE("ambient_tangent is the derivative of U S U'") {
  std::mt19937_64 rng(4);
  const FixedRankPsd x = random_point(rng, 5, 2);
  const HorizontalTangent v = random_tangent(rng, x);
  const double eps = 1e-6;
  const Matrix plus = (x.U.matrix() + eps * v.delta) * (x.S.matrix() + eps * v.D) *
                      (x.U.matrix() + eps * v.delta).transpose();
  const Matrix minus = (x.U.matrix() - eps * v.delta) * (x.S.matrix() - eps * v.D) *
                       (x.U.matrix() - eps * v.delta).transpose();
  CHECK(max_abs((plus - minus) / (2 * eps) - ambient_tangent(x, v)) < 1e-8);
}

TEST_CASE("metric_fixed_rank") {
  const FixedRankPsd canon(StiefelFrame::canonical(4, 2), SpdMatrix::identity(2));
  const HorizontalTangent cone_only{Matrix::Zero(4, 2), Matrix::Identity(2, 2)};
  CHECK(metric_fixed_rank(canon, cone_only, cone_only) == doctest::Approx(2.0));

  std::mt19937_64 rng(5);
  const FixedRankPsd x = random_point(rng, 6, 2);
  HorizontalTangent a = random_tangent(rng, x);
  HorizontalTangent b = random_tangent(rng, x);
  a.D.setZero();
  b.D.setZero();
  CHECK(metric_fixed_rank(x, a, b) == doctest::Approx((a.delta.transpose() * b.delta).trace()));

  const HorizontalTangent bad{gaussian(rng, 6, 2), Matrix::Zero(2, 2)};
  try {
    metric_fixed_rank(x, bad, bad);
    FAIL("non-horizontal tangent accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidInput);
  }
}

TEST_CASE("metric_fixed_rank gauge invariance") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 1 + trial % 3;
    const Index n = r + 2 + trial % 4;
    const FixedRankPsd x = random_point(rng, n, r);
    const HorizontalTangent t1 = random_tangent(rng, x);
    const HorizontalTangent t2 = random_tangent(rng, x);
    const Matrix o = random_orthogonal(rng, r);
    const FixedRankPsd y = regauge(x, o);
    const HorizontalTangent s1{t1.delta * o, symmetrize(o.transpose() * t1.D * o)};
    const HorizontalTangent s2{t2.delta * o, symmetrize(o.transpose() * t2.D * o)};
    CHECK(std::abs(metric_fixed_rank(x, t1, t2) - metric_fixed_rank(y, s1, s2)) < 1e-9);
  }
}

TEST_CASE("align") {
  std::mt19937_64 rng(7);
  const FixedRankPsd x = random_point(rng, 6, 3);
  CHECK(max_abs(align(x, x) - Matrix::Identity(3, 3)) < 1e-12);
  const Matrix o = random_orthogonal(rng, 3);
  CHECK(max_abs(align(x, regauge(x, o)) - o) < 1e-10);

  for (int trial = 0; trial < 20; ++trial) {
    const FixedRankPsd a = random_point(rng, 7, 3);
    const FixedRankPsd b = random_point(rng, 7, 3);
    const Matrix opt = align(a, b);
    CHECK(max_abs(opt.transpose() * opt - Matrix::Identity(3, 3)) < 1e-12);
    const Matrix m = a.U.matrix().transpose() * b.U.matrix() * opt.transpose();
    CHECK(max_abs(m - m.transpose()) < 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(m)).eigenvalues().minCoeff() > -1e-12);
  }

  const FixedRankPsd e1(unit_vector(0.0), SpdMatrix::identity(1));
  const FixedRankPsd e2(unit_vector(std::numbers::pi / 2), SpdMatrix::identity(1));
  try {
    align(e1, e2);
    FAIL("orthogonal spans aligned");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateAlignment);
  }
}

TEST_CASE("grassmann_distance") {
  std::mt19937_64 rng(8);
  const StiefelFrame u = random_frame(rng, 6, 2);
  CHECK(grassmann_distance(u, StiefelFrame(u.matrix() * random_orthogonal(rng, 2))) < 1e-12);
  CHECK(grassmann_distance(unit_vector(0.0), unit_vector(std::numbers::pi / 2)) ==
        doctest::Approx(std::numbers::pi / 2));
  for (double alpha : {0.0, 1e-9, 1e-5, 0.3, 1.0, 1.5, std::numbers::pi / 2}) {
    CHECK(std::abs(grassmann_distance(unit_vector(0.0), unit_vector(alpha)) - alpha) <
          1e-14 + 1e-12 * alpha);
  }
  // Symmetric and orthogonally invariant.
  for (int trial = 0; trial < 20; ++trial) {
    const StiefelFrame a = random_frame(rng, 6, 2);
    const StiefelFrame b = random_frame(rng, 6, 2);
    const Matrix q = random_orthogonal(rng, 6);
    const double d = grassmann_distance(a, b);
    CHECK(std::abs(grassmann_distance(b, a) - d) < 1e-12);
    CHECK(std::abs(grassmann_distance(StiefelFrame(q * a.matrix()), StiefelFrame(q * b.matrix())) -
                   d) < 1e-12);
  }
}

TEST_CASE("approx_distance examples") {
  std::mt19937_64 rng(9);
  const FixedRankPsd x = random_point(rng, 5, 2);
  CHECK(approx_distance(x, x) < 1e-12);

  const FixedRankPsd a(unit_vector(0.4), SpdMatrix(Matrix::Constant(1, 1, 1.7)));
  const FixedRankPsd b(unit_vector(0.4), SpdMatrix(Matrix::Constant(1, 1, 1.7 * std::exp(2.0))));
  CHECK(approx_distance(a, b) == doctest::Approx(2.0));

  const FixedRankPsd c(unit_vector(0.0), SpdMatrix::identity(1));
  const FixedRankPsd d(unit_vector(0.7), SpdMatrix::identity(1));
  const ApproxDistance parts = approx_distance_parts(c, d);
  CHECK(parts.total == doctest::Approx(0.7));
  CHECK(parts.grassmann == doctest::Approx(0.7));
  CHECK(parts.cone < 1e-14);
}

TEST_CASE("approx_distance invariances") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const Index r = 1 + trial % 3;
    const Index n = r + 2 + trial % 4;
    const FixedRankPsd x1 = random_point(rng, n, r);
    // Keep the second span close enough that alignment is well posed.
    const FixedRankPsd x2(StiefelFrame::orthonormalize(x1.U.matrix() + 0.3 * gaussian(rng, n, r)),
                          random_spd(rng, r));
    const double d = approx_distance(x1, x2);
    const FixedRankPsd g1 = regauge(x1, random_orthogonal(rng, r));
    const FixedRankPsd g2 = regauge(x2, random_orthogonal(rng, r));
    CHECK(std::abs(approx_distance(g1, g2) - d) < 1e-9);
    CHECK(std::abs(approx_distance(x2, x1) - d) < 1e-10);

    const Matrix q = random_orthogonal(rng, n);
    const FixedRankPsd q1(StiefelFrame(q * x1.U.matrix()), x1.S);
    const FixedRankPsd q2(StiefelFrame(q * x2.U.matrix()), x2.S);
    CHECK(std::abs(approx_distance(q1, q2) - d) < 1e-9);

    const double c = 0.1 + 5.0 * (trial % 7);
    const FixedRankPsd c1(x1.U, SpdMatrix(c * x1.S.matrix()));
    const FixedRankPsd c2(x2.U, SpdMatrix(c * x2.S.matrix()));
    CHECK(std::abs(approx_distance(c1, c2) - d) < 1e-9);

    const FixedRankPsd i1(x1.U, x1.S.inverse());
    const FixedRankPsd i2(x2.U, x2.S.inverse());
    CHECK(std::abs(approx_distance(i1, i2) - d) < 1e-9);
  }
}

TEST_CASE("approx_distance agrees with the metric in each factor") {
  std::mt19937_64 rng(11);
  const double eps = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const FixedRankPsd x = random_point(rng, 6, 2);
    const HorizontalTangent t = random_tangent(rng, x);

    const HorizontalTangent cone{Matrix::Zero(6, 2), t.D};
    const FixedRankPsd moved_s(x.U, SpdMatrix::from_symmetrized(x.S.matrix() + eps * t.D));
    const double gc = metric_fixed_rank(x, cone, cone);
    const double dc = approx_distance(x, moved_s);
    CHECK(std::abs(dc * dc / (eps * eps) - gc) / gc < 1e-3);

    const HorizontalTangent span{t.delta, Matrix::Zero(2, 2)};
    const FixedRankPsd moved_u(StiefelFrame::orthonormalize(x.U.matrix() + eps * t.delta), x.S);
    const double gs = metric_fixed_rank(x, span, span);
    const double ds = approx_distance(x, moved_u);
    CHECK(std::abs(ds * ds / (eps * eps) - gs) / gs < 1e-3);
  }
}
