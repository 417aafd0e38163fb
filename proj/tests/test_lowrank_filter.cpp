#include "riccati_geo/error.hpp"
#include "riccati_geo/lowrank_filter.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace riccati_geo;
using namespace riccati_geo::testing;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Index>(d.size()));
  Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

LtiSystem blind(const Matrix& a) {
  const Index n = a.rows();
  return LtiSystem(a, Matrix::Zero(1, n), Matrix::Zero(n, n), Matrix::Identity(1, 1));
}

LtiSystem random_system(std::mt19937_64& rng, Index n, Index p) {
  return LtiSystem(gaussian(rng, n, n) - Matrix::Identity(n, n), gaussian(rng, p, n),
                   Matrix::Identity(n, n), Matrix::Identity(p, p));
}

double stiefel_defect(const Matrix& u) {
  return max_abs(u.transpose() * u - Matrix::Identity(u.cols(), u.cols()));
}

}  // namespace

TEST_CASE("oja_rhs examples") {
  std::mt19937_64 rng(1);
  const StiefelFrame u = random_frame(rng, 5, 2);
  CHECK(max_abs(oja_rhs(Matrix::Identity(5, 5), u)) < 1e-15);
  CHECK(max_abs(oja_rhs(diag({3, 2, 1}), StiefelFrame::canonical(3, 1))) == 0.0);

  Matrix v(2, 1);
  v << 1.0, 1.0;
  const Matrix got = oja_rhs(diag({2, 1}), StiefelFrame(v / std::sqrt(2.0)));
  Matrix expect(2, 1);
  expect << 1.0, -1.0;
  expect /= 2.0 * std::sqrt(2.0);
  CHECK(max_abs(got - expect) < 1e-15);

  const Matrix a = gaussian(rng, 5, 5);
  CHECK(max_abs(u.matrix().transpose() * oja_rhs(a, u)) < 1e-13);
}

TEST_CASE("lowrank_riccati_rhs examples") {
  std::mt19937_64 rng(2);
  const FixedRankPsd x = random_point(rng, 4, 2);
  const LtiSystem zero(Matrix::Zero(4, 4), Matrix::Zero(1, 4), Matrix::Identity(4, 4),
                       Matrix::Identity(1, 1));
  CHECK(max_abs(lowrank_riccati_rhs(zero, x, 1.0) - Matrix::Identity(2, 2)) < 1e-15);

  Matrix c = Matrix::Zero(1, 3);
  c(0, 0) = 1.0;
  const LtiSystem e1(Matrix::Zero(3, 3), c, Matrix::Identity(3, 3), Matrix::Identity(1, 1));
  const FixedRankPsd unit(StiefelFrame::canonical(3, 1), SpdMatrix::identity(1));
  CHECK(lowrank_riccati_rhs(e1, unit, 1.0)(0, 0) == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    const LtiSystem sys = random_system(rng, 6, 2);
    const FixedRankPsd p = random_point(rng, 6, 3);
    const double mu = 0.3 * trial;
    const Matrix& u = p.U.matrix();
    const Matrix projected = u.transpose() * lowrank_ambient_rhs(sys, p, mu) * u;
    CHECK(max_abs(projected - lowrank_riccati_rhs(sys, p, mu)) < 1e-12);
  }
}

TEST_CASE("the normal component is what the projection discards") {
  std::mt19937_64 rng(3);
  const LtiSystem sys = random_system(rng, 6, 2);
  const FixedRankPsd p = random_point(rng, 6, 2);
  const NormalComponent nc = full_rhs_normal_component(sys, p);
  const Matrix& u = p.U.matrix();
  const Matrix perp = Matrix::Identity(6, 6) - u * u.transpose();
  CHECK(nc.normal_norm == doctest::Approx((perp * nc.ambient_rhs * perp).norm()));
  // Full rhs at U S U' equals A P + P A' + GG' - P W P.
  const Matrix pm = to_matrix(p);
  CHECK(max_abs(nc.ambient_rhs - riccati_rhs_raw(sys, pm, 0.0)) < 1e-12);
  // With G = 0 the only normal contribution is GG', so it vanishes.
  const LtiSystem quiet(sys.A(), sys.C(), Matrix::Zero(6, 6), sys.H());
  CHECK(full_rhs_normal_component(quiet, p).normal_norm < 1e-12);
}

TEST_CASE("integrate_lowrank decoupled growth") {
  const LtiSystem sys(Matrix::Zero(5, 5), Matrix::Zero(1, 5), Matrix::Identity(5, 5),
                      Matrix::Identity(1, 1));
  std::mt19937_64 rng(4);
  const FixedRankPsd x0(random_frame(rng, 5, 2), SpdMatrix::identity(2));
  const auto run = integrate_lowrank(sys, x0, {1.0, 0.05, 2}, 2.0);
  for (const auto& s : run) {
    CHECK(max_abs(s.X.S.matrix() - (1.0 + s.t) * Matrix::Identity(2, 2)) < 1e-12);
    CHECK(max_abs(s.X.U.matrix() - x0.U.matrix()) < 1e-14);
  }
}

TEST_CASE("integrate_lowrank finds the dominant subspace") {
  const Matrix a = diag({3, 2, 1});
  Matrix u0(3, 1);
  u0 << 0.3, 0.8, 0.52;
  const FixedRankPsd x0(StiefelFrame::orthonormalize(u0), SpdMatrix::identity(1));
  const LtiSystem sys(a, Matrix::Zero(1, 3), Matrix::Identity(3, 3), Matrix::Identity(1, 1));
  const auto coarse = integrate_lowrank(sys, x0, {0.5, 1e-2, 1}, 3.0);
  const auto fine = integrate_lowrank(sys, x0, {0.5, 1e-4, 1}, 3.0);
  CHECK(grassmann_distance(coarse.back().X.U, fine.back().X.U) < 1e-8);
  // Oja converges at rate gap = 1.
  const auto long_run = integrate_lowrank(sys, x0, {0.5, 1e-2, 1}, 30.0);
  CHECK(grassmann_distance(long_run.back().X.U, StiefelFrame::canonical(3, 1)) < 1e-10);
}

TEST_CASE("integrate_lowrank keeps the invariants and is triangular") {
  std::mt19937_64 rng(5);
  const LtiSystem sys = random_system(rng, 7, 2);
  const FixedRankPsd x0 = random_point(rng, 7, 3);
  const FixedRankPsd x0b(x0.U, random_spd(rng, 3, 2.0));
  const auto a = integrate_lowrank(sys, x0, {0.5, 1e-2, 3}, 2.0);
  const auto b = integrate_lowrank(sys, x0b, {1.5, 1e-2, 3}, 2.0);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(stiefel_defect(a[k].X.U.matrix()) < 1e-10);
    CHECK(a[k].X.S.min_eigenvalue() > 0.0);
    CHECK((a[k].X.U.matrix().array() == b[k].X.U.matrix().array()).all());
  }
}

TEST_CASE("trace of S grows at most exponentially") {
  std::mt19937_64 rng(6);
  const Index n = 6, r = 2;
  const LtiSystem sys(gaussian(rng, n, n), gaussian(rng, 1, n), Matrix::Identity(n, n),
                      Matrix::Identity(1, 1));
  const double mu = 0.7;
  const FixedRankPsd x0 = random_point(rng, n, r);
  const double a2 = Eigen::JacobiSVD<Matrix>(sys.A()).singularValues()(0);
  const double tr0 = x0.S.matrix().trace();
  // d tr(S)/dt <= 2 ||A|| tr(S) + mu^2 r.
  for (const auto& s : integrate_lowrank(sys, x0, {mu, 1e-2, r}, 2.0)) {
    const double growth = std::exp(2.0 * a2 * s.t);
    const double bound = tr0 * growth + mu * mu * static_cast<double>(r) * (growth - 1.0) / (2.0 * a2);
    CHECK(s.X.S.matrix().trace() <= bound * (1.0 + 1e-9));
  }
}

TEST_CASE("skew dynamics without output keep S and the distance") {
  Matrix a(3, 3);
  a << 0, -1, 0.5, 1, 0, -0.2, -0.5, 0.2, 0;
  const LtiSystem sys = blind(a);
  Matrix u1(3, 1), u2(3, 1);
  u1 << 1, 0, 0;
  u2 << std::cos(0.3), std::sin(0.3), 0;
  const FixedRankPsd x1(StiefelFrame(u1), SpdMatrix(Matrix::Constant(1, 1, 2.0)));
  const FixedRankPsd x2(StiefelFrame(u2), SpdMatrix(Matrix::Constant(1, 1, 2.0)));
  const auto ra = integrate_lowrank(sys, x1, {0.0, 1e-2, 1}, 5.0);
  const auto rb = integrate_lowrank(sys, x2, {0.0, 1e-2, 1}, 5.0);
  for (std::size_t k = 0; k < ra.size(); ++k) {
    CHECK(std::abs(ra[k].X.S.matrix()(0, 0) - 2.0) < 1e-14);
    CHECK(std::abs(grassmann_distance(ra[k].X.U, rb[k].X.U) - 0.3) < 1e-9);
  }
  CHECK(grassmann_distance(ra.front().X.U, ra.back().X.U) > 0.1);
}

TEST_CASE("integrate_fixed_span and integrate_oja") {
  std::mt19937_64 rng(7);
  const LtiSystem sys = random_system(rng, 5, 1);
  const FixedRankPsd x0 = random_point(rng, 5, 2);
  for (const auto& s : integrate_fixed_span(sys, x0, {0.3, 1e-2, 2}, 1.0)) {
    CHECK((s.X.U.matrix().array() == x0.U.matrix().array()).all());
  }
  const auto full = integrate_lowrank(sys, x0, {0.3, 1e-2, 2}, 1.0);
  const auto oja = integrate_oja(sys.A(), x0.U, 1.0, 1e-2);
  REQUIRE(oja.size() == full.size());
  for (std::size_t k = 0; k < oja.size(); ++k) {
    CHECK((oja[k].second.matrix().array() == full[k].X.U.matrix().array()).all());
  }
}

TEST_CASE("Oja perturbations decay at least at twice the gap") {
  const Matrix a = diag({4, 2, 1});
  const double gap = 2.0;
  const DominantSubspace dom = dominant_subspace(a, 1);
  Matrix u0(3, 1);
  u0 << 1.0, 1e-3, -5e-4;
  const auto run = integrate_oja(a, StiefelFrame::orthonormalize(u0), 3.0, 1e-3);
  const Matrix proj = Matrix::Identity(3, 3) - dom.U.matrix() * dom.U.matrix().transpose();
  auto sq = [&](const StiefelFrame& u) { return (proj * u.matrix()).squaredNorm(); };
  for (std::size_t k = 1; k + 1 < run.size(); k += 100) {
    const double deriv = (sq(run[k + 1].second) - sq(run[k - 1].second)) /
                         (run[k + 1].first - run[k - 1].first);
    CHECK(deriv <= -2.0 * gap * 0.9 * sq(run[k].second));
  }
}

TEST_CASE("discrete_step fixed point and orthonormality") {
  std::mt19937_64 rng(8);
  const LtiSystem still(Matrix::Zero(5, 5), Matrix::Zero(1, 5), Matrix::Identity(5, 5),
                        Matrix::Identity(1, 1));
  const LowRankFilterState st{random_point(rng, 5, 2), gaussian(rng, 5, 1), 0.0};
  const LowRankFilterState next =
      discrete_step(still, st, {0.0, 0.1, 2}, MeasurementRecord{0.0, Vector::Ones(1)});
  CHECK(max_abs(next.X.U.matrix() - st.X.U.matrix()) < 1e-15);
  CHECK(max_abs(next.X.S.matrix() - st.X.S.matrix()) < 1e-15);
  CHECK(max_abs(next.x_hat - st.x_hat) == 0.0);
  CHECK(next.t == doctest::Approx(0.1));

  const LtiSystem sys = random_system(rng, 8, 2);
  LowRankFilterState cur{random_point(rng, 8, 3), Vector::Zero(8), 0.0};
  for (int k = 0; k < 200; ++k) {
    cur = discrete_step(sys, cur, {0.5, 1e-2, 3}, MeasurementRecord{cur.t, gaussian(rng, 2, 1)});
    CHECK(stiefel_defect(cur.X.U.matrix()) < 1e-12);
    CHECK(cur.X.S.min_eigenvalue() > 0.0);
  }
}

TEST_CASE("discrete_step is consistent with the continuous right-hand sides") {
  std::mt19937_64 rng(9);
  const LtiSystem sys = random_system(rng, 6, 2);
  const FixedRankPsd x = random_point(rng, 6, 2);
  const double mu = 0.4;
  const LowRankFilterState st{x, Vector::Zero(6), 0.0};
  auto defect = [&](double dt) {
    const LowRankFilterState nx = discrete_step(sys, st, {mu, dt, 2});
    const double du = ((nx.X.U.matrix() - x.U.matrix()) / dt - oja_rhs(sys.A(), x.U)).norm();
    const double ds = ((nx.X.S.matrix() - x.S.matrix()) / dt - lowrank_riccati_rhs(sys, x, mu)).norm();
    return std::hypot(du, ds);
  };
  const double e1 = defect(1e-2), e2 = defect(5e-3), e3 = defect(2.5e-3);
  CHECK(e1 / e2 > 1.6);
  CHECK(e2 / e3 > 1.6);
  CHECK(e1 / e2 < 2.4);
  CHECK(e2 / e3 < 2.4);
}

TEST_CASE("discrete_step state update") {
  std::mt19937_64 rng(10);
  const LtiSystem sys = random_system(rng, 5, 2);
  const LowRankFilterState st{random_point(rng, 5, 2), gaussian(rng, 5, 1), 0.0};
  const Vector y = gaussian(rng, 2, 1);
  const double dt = 1e-2;
  const LowRankFilterState next = discrete_step(sys, st, {0.1, dt, 2}, MeasurementRecord{0.0, y});
  const Matrix k = to_matrix(st.X) * sys.C().transpose() * sys.measurement_precision();
  const Vector expect = st.x_hat + dt * ((sys.A() - k * sys.C()) * st.x_hat + k * y);
  CHECK((next.x_hat - expect).norm() < 1e-14);
  const LowRankFilterState silent = discrete_step(sys, st, {0.1, dt, 2});
  CHECK((silent.x_hat - st.x_hat).norm() == 0.0);
}

TEST_CASE("discrete_step input checks") {
  std::mt19937_64 rng(11);
  const LtiSystem sys = random_system(rng, 5, 2);
  const LowRankFilterState st{random_point(rng, 5, 2), Vector::Zero(5), 0.0};
  CHECK_THROWS_AS(discrete_step(sys, st, {0.1, 0.0, 2}), Error);
  CHECK_THROWS_AS(discrete_step(sys, st, {0.1, 1e-2, 3}), Error);
  CHECK_THROWS_AS(discrete_step(sys, st, {-1.0, 1e-2, 2}), Error);
}

TEST_CASE("dominant_subspace") {
  const DominantSubspace d = dominant_subspace(diag({3, 2, 1}), 1);
  CHECK(max_abs(d.U.matrix() - Matrix::Identity(3, 1)) < 1e-15);
  CHECK(d.gap == doctest::Approx(1.0));
  CHECK(d.eigenvalues(0) == doctest::Approx(3.0));

  Matrix skew(3, 3);
  skew << 0, -1, 2, 1, 0, -3, -2, 3, 0;
  try {
    dominant_subspace(skew, 1);
    FAIL("zero gap accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateGap);
  }

  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + trial % 4;
    const Index r = 1 + trial % 3;
    const Matrix a = random_symmetric(rng, n);
    const DominantSubspace ds = dominant_subspace(a, r);
    CHECK(max_abs(oja_rhs(a, ds.U)) < 1e-10);
    for (Index j = 0; j < r; ++j) {
      Index first = 0;
      while (std::abs(ds.U.matrix()(first, j)) <= 1e-10) ++first;
      CHECK(ds.U.matrix()(first, j) > 0.0);
    }
    // Non-symmetric A: only its symmetric part matters.
    const Matrix z = gaussian(rng, n, n);
    const DominantSubspace shifted = dominant_subspace(a + (z - z.transpose()), r);
    CHECK(max_abs(shifted.U.matrix() - ds.U.matrix()) < 1e-10);
  }
}

TEST_CASE("projected_are_residual") {
  Matrix c = Matrix::Zero(1, 3);
  c(0, 0) = 1.0;
  const LtiSystem e1(Matrix::Zero(3, 3), c, Matrix::Identity(3, 3), Matrix::Identity(1, 1));
  const FixedRankPsd unit(StiefelFrame::canonical(3, 1), SpdMatrix::identity(1));
  CHECK(projected_are_residual(e1, unit, 1.0) == 0.0);
  CHECK(projected_are_residual(e1, unit, 2.0) == doctest::Approx(3.0));
}
