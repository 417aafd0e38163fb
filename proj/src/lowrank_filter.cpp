#include "riccati_geo/lowrank_filter.hpp"

#include "riccati_geo/error.hpp"
#include "riccati_geo/rk4.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace riccati_geo {

namespace {

Matrix oja_raw(const Matrix& a, const Matrix& u) {
  const Matrix au = a * u;
  return au - u * (u.transpose() * au);
}

Matrix lowrank_rhs_raw(const LtiSystem& s, const Matrix& u, const Matrix& sf, double mu) {
  const Matrix a_u = u.transpose() * (s.A() * u);
  const Matrix c_u = s.C() * u;
  const Matrix s_ct = sf * c_u.transpose();
  const Matrix as = a_u * sf;
  const Index r = sf.rows();
  return symmetrize(as + as.transpose() + (mu * mu) * Matrix::Identity(r, r) -
                    s_ct * s.measurement_precision() * s_ct.transpose());
}

struct Factors {
  Matrix u, s;
  Factors operator+(const Factors& o) const { return {u + o.u, s + o.s}; }
};

Factors operator*(double a, const Factors& x) { return {a * x.u, a * x.s}; }

void require_system(const LtiSystem& sys, const FixedRankPsd& x, const char* what) {
  if (sys.n() != x.n()) {
    std::ostringstream os;
    os << what << ": point lives in dimension " << x.n() << ", system in " << sys.n();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

void require_config(const LowRankConfig& cfg, const FixedRankPsd& x, const char* what) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidInput, std::string(what) + ": dt must be positive");
  if (!(cfg.mu >= 0.0)) throw Error(ErrorCode::InvalidInput, std::string(what) + ": mu must be >= 0");
  if (cfg.r != x.r()) {
    std::ostringstream os;
    os << what << ": configured rank " << cfg.r << " does not match point rank " << x.r();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

FixedRankPsd retract(const Matrix& u, const Matrix& s, double t) {
  try {
    return {StiefelFrame::orthonormalize(u), SpdMatrix::from_symmetrized(s)};
  } catch (const Error& e) {
    std::ostringstream os;
    os << "low-rank iterate left the manifold at t = " << t << " (" << e.what() << ")";
    throw IntegrationError(t, os.str());
  }
}

template <class Step>
std::vector<LowRankSample> run(const FixedRankPsd& x0, double dt, double t_end, Step step) {
  const long steps = step_count(t_end, dt);
  std::vector<LowRankSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.push_back({0.0, x0});
  Factors f{x0.U.matrix(), x0.S.matrix()};
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double t_next = (k + 1 == steps) ? t_end : static_cast<double>(k + 1) * dt;
    f = step(t, f, t_next - t);
    FixedRankPsd x = retract(f.u, f.s, t_next);
    f.u = x.U.matrix();
    f.s = x.S.matrix();
    out.push_back({t_next, std::move(x)});
  }
  return out;
}

}  // namespace

Matrix oja_rhs(const Matrix& a, const StiefelFrame& u) {
  require_shape(a, u.n(), u.n(), "oja_rhs");
  return oja_raw(a, u.matrix());
}

Matrix lowrank_riccati_rhs(const LtiSystem& sys, const FixedRankPsd& x, double mu, double t) {
  require_system(sys, x, "lowrank_riccati_rhs");
  return with_system_at(sys, t, [&](const LtiSystem& s) {
    return lowrank_rhs_raw(s, x.U.matrix(), x.S.matrix(), mu);
  });
}

Matrix lowrank_ambient_rhs(const LtiSystem& sys, const FixedRankPsd& x, double mu, double t) {
  require_system(sys, x, "lowrank_ambient_rhs");
  return with_system_at(sys, t, [&](const LtiSystem& s) -> Matrix {
    const Matrix p = to_matrix(x);
    const Matrix& u = x.U.matrix();
    const Matrix ap = s.A() * p;
    const Matrix pct = p * s.C().transpose();
    return symmetrize(ap + ap.transpose() + (mu * mu) * u * u.transpose() -
                      pct * s.measurement_precision() * pct.transpose());
  });
}

NormalComponent full_rhs_normal_component(const LtiSystem& sys, const FixedRankPsd& x,
                                          double t) {
  require_system(sys, x, "full_rhs_normal_component");
  Matrix phi = riccati_rhs_raw(sys, to_matrix(x), t);
  const Matrix& u = x.U.matrix();
  const Matrix left = phi - u * (u.transpose() * phi);
  const Matrix normal = left - (left * u) * u.transpose();
  return {std::move(phi), normal.norm()};
}

std::vector<LowRankSample> integrate_lowrank(const LtiSystem& sys, const FixedRankPsd& x0,
                                             const LowRankConfig& cfg, double t_end) {
  require_system(sys, x0, "integrate_lowrank");
  require_config(cfg, x0, "integrate_lowrank");
  const double mu = cfg.mu;
  const auto rhs = [&](double t, const Factors& f) -> Factors {
    return with_system_at(sys, t, [&](const LtiSystem& s) -> Factors {
      return {oja_raw(s.A(), f.u), lowrank_rhs_raw(s, f.u, f.s, mu)};
    });
  };
  return run(x0, cfg.dt, t_end, [&](double t, const Factors& f, double h) {
    return rk4_step<Factors>(rhs, t, f, h);
  });
}

std::vector<LowRankSample> integrate_fixed_span(const LtiSystem& sys, const FixedRankPsd& x0,
                                                const LowRankConfig& cfg, double t_end) {
  require_system(sys, x0, "integrate_fixed_span");
  require_config(cfg, x0, "integrate_fixed_span");
  const double mu = cfg.mu;
  const Matrix zero_u = Matrix::Zero(x0.n(), x0.r());
  const auto rhs = [&](double t, const Factors& f) -> Factors {
    return with_system_at(sys, t, [&](const LtiSystem& s) -> Factors {
      return {zero_u, lowrank_rhs_raw(s, f.u, f.s, mu)};
    });
  };
  return run(x0, cfg.dt, t_end, [&](double t, const Factors& f, double h) {
    Factors next = rk4_step<Factors>(rhs, t, f, h);
    next.u = f.u;
    return next;
  });
}

std::vector<std::pair<double, StiefelFrame>> integrate_oja(const Matrix& a, const StiefelFrame& u0,
                                                           double t_end, double dt) {
  require_shape(a, u0.n(), u0.n(), "integrate_oja");
  const long steps = step_count(t_end, dt);
  std::vector<std::pair<double, StiefelFrame>> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  out.emplace_back(0.0, u0);
  const auto rhs = [&](double, const Matrix& u) -> Matrix { return oja_raw(a, u); };
  Matrix u = u0.matrix();
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double t_next = (k + 1 == steps) ? t_end : static_cast<double>(k + 1) * dt;
    StiefelFrame next = StiefelFrame::orthonormalize(rk4_step<Matrix>(rhs, t, u, t_next - t));
    u = next.matrix();
    out.emplace_back(t_next, std::move(next));
  }
  return out;
}

LowRankFilterState discrete_step(const LtiSystem& sys, const LowRankFilterState& state,
                                 const LowRankConfig& cfg,
                                 const std::optional<MeasurementRecord>& y) {
  const FixedRankPsd& x = state.X;
  require_system(sys, x, "discrete_step");
  require_config(cfg, x, "discrete_step");
  if (state.x_hat.size() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "discrete_step: estimate has wrong dimension");
  }
  if (y && y->y.size() != sys.p()) {
    throw Error(ErrorCode::DimensionMismatch, "discrete_step: measurement has wrong dimension");
  }
  const double dt = cfg.dt;
  const double t = state.t;
  const Index r = x.r();

  return with_system_at(sys, t, [&](const LtiSystem& s) -> LowRankFilterState {
    const Matrix& u = x.U.matrix();
    const Matrix& sf = x.S.matrix();
    const Matrix au = s.A() * u;
    const Matrix a_u = u.transpose() * au;
    const Matrix u_next = qf(u + dt * (au - u * a_u));

    const Matrix c_u = s.C() * u;
    const Matrix f = Matrix::Identity(r, r) + dt * a_u;
    const Matrix fs = f * sf;
    const Matrix innovation = symmetrize(c_u * sf * c_u.transpose() + s.measurement_covariance() / dt);
    Eigen::LLT<Matrix> llt(innovation);
    if (llt.info() != Eigen::Success) {
      std::ostringstream os;
      os << "discrete_step: innovation matrix is singular at t = " << t;
      throw Error(ErrorCode::StepFailure, os.str());
    }
    const Matrix m = fs * c_u.transpose();
    const Matrix s_next = symmetrize(fs * f.transpose() - m * llt.solve(m.transpose()) +
                                     (dt * cfg.mu * cfg.mu) * Matrix::Identity(r, r));

    Vector x_next = state.x_hat;
    if (y) {
      // K = U S U' C' (HH')^-1, applied to the innovation without forming K.
      const Vector innov = y->y - s.C() * state.x_hat;
      const Vector k_innov = u * (sf * (c_u.transpose() * (s.measurement_precision() * innov)));
      x_next = state.x_hat + dt * (s.A() * state.x_hat + k_innov);
    }

    try {
      return {FixedRankPsd(StiefelFrame(u_next), SpdMatrix(s_next)), std::move(x_next), t + dt};
    } catch (const Error& e) {
      std::ostringstream os;
      os << "discrete_step: updated factors invalid at t = " << t + dt << " (" << e.what() << ")";
      throw Error(ErrorCode::StepFailure, os.str());
    }
  });
}

DominantSubspace dominant_subspace(const Matrix& a, Index r) {
  require_square(a, "dominant_subspace");
  const Index n = a.rows();
  if (r <= 0 || r >= n) {
    throw Error(ErrorCode::InvalidInput, "dominant_subspace: need 0 < r < n");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  const Vector desc = es.eigenvalues().reverse();
  const double gap = desc(r - 1) - desc(r);
  const double scale = std::max(1.0, desc.cwiseAbs().maxCoeff());
  if (!(gap > 1e-8 * scale)) {
    std::ostringstream os;
    os.precision(17);
    os << "dominant_subspace: no eigen-gap between eigenvalue " << r << " (" << desc(r - 1)
       << ") and eigenvalue " << r + 1 << " (" << desc(r) << ")";
    throw Error(ErrorCode::DegenerateGap, os.str());
  }
  Matrix u = es.eigenvectors().rowwise().reverse().leftCols(r);
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (std::abs(u(i, j)) > 1e-10) {
        if (u(i, j) < 0.0) u.col(j) = -u.col(j);
        break;
      }
    }
  }
  return {StiefelFrame(std::move(u)), desc, gap};
}

double projected_are_residual(const LtiSystem& sys, const FixedRankPsd& x, double mu) {
  return lowrank_riccati_rhs(sys, x, mu).norm();
}

}  // namespace riccati_geo
