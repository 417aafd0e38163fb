#include "riccati_geo/riccati_full.hpp"

#include "riccati_geo/error.hpp"
#include "riccati_geo/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riccati_geo {

long step_count(double span, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw Error(ErrorCode::InvalidInput, "step size must be positive and finite");
  }
  if (!(span >= 0.0) || !std::isfinite(span)) {
    throw Error(ErrorCode::InvalidInput, "integration span must be non-negative");
  }
  // Absorb round-off in span / dt so that e.g. 1.0 / 0.1 gives 10 steps.
  return static_cast<long>(std::ceil(span / dt - 1e-9));
}

LtiSystem::LtiSystem(Matrix a, Matrix c, Matrix g, Matrix h)
    : a_(std::move(a)), c_(std::move(c)), g_(std::move(g)), h_(std::move(h)) {
  require_square(a_, "A");
  const Index n = a_.rows();
  if (c_.cols() != n || c_.rows() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "C must be p x " + std::to_string(n) +
                                                  ", got " + shape_string(c_));
  }
  if (g_.rows() != n || g_.cols() == 0) {
    throw Error(ErrorCode::DimensionMismatch, "G must be " + std::to_string(n) +
                                                  " x m, got " + shape_string(g_));
  }
  require_shape(h_, c_.rows(), c_.rows(), "H");
  if (!a_.allFinite() || !c_.allFinite() || !g_.allFinite() || !h_.allFinite()) {
    throw Error(ErrorCode::InvalidInput, "system matrices contain non-finite entries");
  }
  hh_ = symmetrize(h_ * h_.transpose());
  if (!is_spd(hh_)) throw Error(ErrorCode::InvalidInput, "H H' is not invertible");
  gg_ = symmetrize(g_ * g_.transpose());
  r_inv_ = symmetrize(hh_.llt().solve(Matrix::Identity(hh_.rows(), hh_.cols())));
  w_ = symmetrize(c_.transpose() * r_inv_ * c_);
}

LtiSystem LtiSystem::time_varying(LtiSystem nominal, Provider provider) {
  if (!provider) throw Error(ErrorCode::InvalidInput, "time-varying system needs a provider");
  nominal.provider_ = std::make_shared<const Provider>(std::move(provider));
  return nominal;
}

LtiSystem LtiSystem::at(double t) const {
  if (!provider_) return *this;
  LtiSystem frozen = (*provider_)(t);
  if (frozen.n() != n() || frozen.m() != m() || frozen.p() != p()) {
    throw Error(ErrorCode::DimensionMismatch, "time-varying provider changed dimensions");
  }
  frozen.provider_.reset();
  return frozen;
}

namespace {

void require_dim(const LtiSystem& sys, Index dim, const char* what) {
  if (dim != sys.n()) {
    std::ostringstream os;
    os << what << ": state dimension " << dim << " does not match system dimension " << sys.n();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

Matrix rhs_frozen(const LtiSystem& s, const Matrix& p) {
  const Matrix ap = s.A() * p;
  const Matrix pct = p * s.C().transpose();
  return symmetrize(ap + ap.transpose() + s.process_noise() -
                    pct * s.measurement_precision() * pct.transpose());
}

// Covariance and its first variation, stepped together.
struct Pair {
  Matrix p, dp;
  Pair operator+(const Pair& o) const { return {p + o.p, dp + o.dp}; }
};

Pair operator*(double a, const Pair& x) { return {a * x.p, a * x.dp}; }

SpdMatrix checked_iterate(const Matrix& p, double t) {
  try {
    return SpdMatrix::from_symmetrized(p);
  } catch (const Error& e) {
    std::ostringstream os;
    os << "covariance iterate lost positive definiteness at t = " << t << " (" << e.what() << ")";
    throw IntegrationError(t, os.str());
  }
}

}  // namespace

Matrix riccati_rhs_raw(const LtiSystem& sys, const Matrix& p, double t) {
  require_shape(p, sys.n(), sys.n(), "riccati_rhs");
  return with_system_at(sys, t, [&](const LtiSystem& s) { return rhs_frozen(s, p); });
}

SymmetricMatrix riccati_rhs(const LtiSystem& sys, const SpdMatrix& p, double t) {
  return SymmetricMatrix(riccati_rhs_raw(sys, p.matrix(), t));
}

Matrix riccati_rk4_step(const LtiSystem& sys, const Matrix& p, double t, double h) {
  const auto rhs = [&](double tau, const Matrix& x) { return riccati_rhs_raw(sys, x, tau); };
  return symmetrize(rk4_step<Matrix>(rhs, t, p, h));
}

std::vector<CovarianceSample> integrate_riccati(const LtiSystem& sys, const SpdMatrix& p0,
                                                double t_end, double dt, double t0) {
  require_dim(sys, p0.dim(), "integrate_riccati");
  const long steps = step_count(t_end - t0, dt);
  std::vector<CovarianceSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({t0, p0});
  Matrix p = p0.matrix();
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    const double t_next = (k + 1 == steps) ? t_end : t0 + static_cast<double>(k + 1) * dt;
    p = riccati_rk4_step(sys, p, t, t_next - t);
    out.push_back({t_next, checked_iterate(p, t_next)});
  }
  return out;
}

AreSolution solve_are(const LtiSystem& sys, double tol, const AreOptions& opts) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidInput, "solve_are: tolerance must be positive");
  if (sys.is_time_varying()) {
    throw Error(ErrorCode::Precondition, "solve_are: system must be time-invariant");
  }
  if (!is_observable(sys.A(), sys.C())) {
    warn("solve_are: (A, C) is not numerically observable; the limit may not be unique");
  }
  {
    Eigen::JacobiSVD<Matrix> svd(sys.G());
    const Vector& sv = svd.singularValues();
    if (sys.G().cols() < sys.n() || sv(sv.size() - 1) <= 1e-10 * std::max(1.0, sv(0))) {
      warn("solve_are: G is not numerically full rank");
    }
  }

  Matrix p = Matrix::Identity(sys.n(), sys.n());
  double t = 0.0;
  std::vector<double> history;
  double residual = riccati_rhs_raw(sys, p, t).norm();
  if (opts.record_history) history.push_back(residual);
  long k = 0;
  while (residual > tol) {
    if (k >= opts.max_steps) {
      std::ostringstream os;
      os << "solve_are: no convergence after " << k << " steps (residual " << residual << ")";
      throw ConvergenceError(residual, os.str());
    }
    double h = opts.dt;
    if (!(h > 0.0)) {
      const double stiffness =
          2.0 * (sys.A() - p * sys.output_weight()).norm();
      h = stiffness > 0.0 ? std::min(opts.max_dt, 1.0 / stiffness) : opts.max_dt;
    }
    p = riccati_rk4_step(sys, p, t, h);
    t += h;
    ++k;
    if (!p.allFinite()) {
      throw IntegrationError(t, "solve_are: iterate diverged (non-finite entries)");
    }
    residual = riccati_rhs_raw(sys, p, t).norm();
    if (opts.record_history) history.push_back(residual);
  }
  return {checked_iterate(p, t), residual, t, k, std::move(history)};
}

FilterState filter_step(const LtiSystem& sys, const FilterState& state,
                        const std::optional<MeasurementRecord>& y, double dt) {
  require_dim(sys, state.P.dim(), "filter_step");
  if (state.x_hat.size() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "filter_step: estimate has wrong dimension");
  }
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidInput, "filter_step: dt must be positive");
  if (y && y->y.size() != sys.p()) {
    throw Error(ErrorCode::DimensionMismatch, "filter_step: measurement has wrong dimension");
  }

  const double t = state.t;
  Vector x_next = with_system_at(sys, t, [&](const LtiSystem& s) -> Vector {
    if (!y) {
      const auto rhs = [&](double, const Vector& x) -> Vector { return s.A() * x; };
      return rk4_step<Vector>(rhs, t, state.x_hat, dt);
    }
    const Matrix gain = state.P.matrix() * s.C().transpose() * s.measurement_precision();
    const Matrix closed = s.A() - gain * s.C();
    const Vector forcing = gain * y->y;
    const auto rhs = [&](double, const Vector& x) -> Vector { return closed * x + forcing; };
    return rk4_step<Vector>(rhs, t, state.x_hat, dt);
  });

  const Matrix p_next = riccati_rk4_step(sys, state.P.matrix(), t, dt);
  return {std::move(x_next), checked_iterate(p_next, t + dt), t + dt};
}

std::vector<VariationSample> integrate_variation(const LtiSystem& sys, const SpdMatrix& p0,
                                                 const SymmetricMatrix& dp0, double t_end,
                                                 double dt) {
  require_dim(sys, p0.dim(), "integrate_variation");
  require_dim(sys, dp0.dim(), "integrate_variation");

  const auto rhs = [&](double t, const Pair& x) -> Pair {
    return with_system_at(sys, t, [&](const LtiSystem& s) -> Pair {
      const Matrix closed = s.A() - x.p * s.output_weight();
      const Matrix cdp = closed * x.dp;
      return {rhs_frozen(s, x.p), symmetrize(cdp + cdp.transpose())};
    });
  };

  const long steps = step_count(t_end, dt);
  std::vector<VariationSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({0.0, p0, dp0.matrix()});
  Pair x{p0.matrix(), dp0.matrix()};
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double t_next = (k + 1 == steps) ? t_end : static_cast<double>(k + 1) * dt;
    x = rk4_step<Pair>(rhs, t, x, t_next - t);
    x.p = symmetrize(x.p);
    x.dp = symmetrize(x.dp);
    out.push_back({t_next, checked_iterate(x.p, t_next), x.dp});
  }
  return out;
}

Index observable_dimension(const Matrix& a, const Matrix& c, double rel_tol) {
  require_square(a, "observable_dimension");
  if (c.cols() != a.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "observable_dimension: C has wrong column count");
  }
  const Index n = a.rows();
  Matrix basis(n, 0);
  Matrix candidates = c.transpose();
  const Matrix at = a.transpose();
  for (Index sweep = 0; sweep <= n && candidates.cols() > 0 && basis.cols() < n; ++sweep) {
    Matrix accepted(n, 0);
    for (Index j = 0; j < candidates.cols(); ++j) {
      Vector v = candidates.col(j);
      const double original = v.norm();
      if (original == 0.0) continue;
      for (int pass = 0; pass < 2; ++pass) {
        if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
        if (accepted.cols() > 0) v -= accepted * (accepted.transpose() * v);
      }
      if (v.norm() > rel_tol * original) {
        accepted.conservativeResize(n, accepted.cols() + 1);
        accepted.col(accepted.cols() - 1) = v.normalized();
      }
    }
    if (accepted.cols() == 0) break;
    basis.conservativeResize(n, basis.cols() + accepted.cols());
    basis.rightCols(accepted.cols()) = accepted;
    candidates = at * accepted;
  }
  return std::min(basis.cols(), n);
}

bool is_observable(const Matrix& a, const Matrix& c, double rel_tol) {
  return observable_dimension(a, c, rel_tol) == a.rows();
}

}  // namespace riccati_geo
