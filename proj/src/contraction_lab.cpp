#include "riccati_geo/contraction_lab.hpp"

#include "riccati_geo/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace riccati_geo {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

std::string pass_fail(bool ok) { return ok ? "PASS" : "FAIL"; }

void require_positive_options(const StepOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.t_end > 0.0)) {
    throw Error(ErrorCode::InvalidInput, "step options need dt > 0 and t_end > 0");
  }
}

DistanceSeries lowrank_series(const std::vector<LowRankSample>& a,
                              const std::vector<LowRankSample>& b, DistanceMetric metric) {
  DistanceSeries s;
  s.metric_name = std::string(to_string(metric));
  const std::size_t n = a.size();
  s.times.reserve(n);
  s.values.reserve(n);
  s.grassmann_component.reserve(n);
  s.cone_component.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const ApproxDistance d = approx_distance_parts(a[k].X, b[k].X);
    s.times.push_back(a[k].t);
    s.values.push_back(metric == DistanceMetric::Grassmann ? d.grassmann : d.total);
    s.grassmann_component.push_back(d.grassmann);
    s.cone_component.push_back(d.cone);
  }
  return s;
}

std::vector<LowRankSample> run_lowrank(const LowRankFlow& flow, const FixedRankPsd& x0,
                                       const StepOptions& opts) {
  const LowRankConfig cfg{flow.mu, opts.dt, x0.r()};
  return flow.fixed_span ? integrate_fixed_span(flow.sys, x0, cfg, opts.t_end)
                         : integrate_lowrank(flow.sys, x0, cfg, opts.t_end);
}

}  // namespace

std::string_view to_string(DistanceMetric metric) noexcept {
  switch (metric) {
    case DistanceMetric::Spd: return "spd";
    case DistanceMetric::ApproxFixedRank: return "approx";
    case DistanceMetric::Grassmann: return "grassmann";
  }
  return "unknown";
}

DistanceMetric parse_metric(std::string_view name) {
  if (name == "spd") return DistanceMetric::Spd;
  if (name == "approx") return DistanceMetric::ApproxFixedRank;
  if (name == "grassmann") return DistanceMetric::Grassmann;
  throw Error(ErrorCode::InvalidInput, "unknown metric '" + std::string(name) + "'");
}

void validate_series(const DistanceSeries& s) {
  const std::size_t n = s.times.size();
  if (s.values.size() != n) throw Error(ErrorCode::InvalidInput, "series: length mismatch");
  if (!s.grassmann_component.empty() && s.grassmann_component.size() != n) {
    throw Error(ErrorCode::InvalidInput, "series: grassmann component length mismatch");
  }
  if (!s.cone_component.empty() && s.cone_component.size() != n) {
    throw Error(ErrorCode::InvalidInput, "series: cone component length mismatch");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0 && !(s.times[k] > s.times[k - 1])) {
      throw Error(ErrorCode::InvalidInput, "series: times are not strictly increasing");
    }
    if (!std::isfinite(s.values[k]) || s.values[k] < 0.0) {
      throw Error(ErrorCode::InvalidInput, "series: values must be finite and non-negative");
    }
  }
}

FitWindow tail_window(const DistanceSeries& series, double fraction) {
  if (series.times.empty()) throw Error(ErrorCode::FitFailure, "tail_window: empty series");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "tail_window: fraction must lie in (0, 1]");
  }
  const std::size_t n = series.times.size();
  const auto skip = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - fraction)));
  return {series.times[std::min(skip, n - 1)], series.times.back()};
}

DecayFit fit_exponential_rate(const std::vector<double>& times, const std::vector<double>& values,
                              FitWindow window) {
  if (times.size() != values.size()) {
    throw Error(ErrorCode::FitFailure, "fit: times and values differ in length");
  }
  if (!(window.t_end >= window.t_start)) {
    throw Error(ErrorCode::FitFailure, "fit: window end precedes its start");
  }
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < window.t_start || times[k] > window.t_end) continue;
    if (!(values[k] > 0.0) || !std::isfinite(values[k])) {
      std::ostringstream os;
      os << "fit: non-positive value " << values[k] << " at t = " << times[k];
      throw Error(ErrorCode::FitFailure, os.str());
    }
    xs.push_back(times[k]);
    ys.push_back(std::log(values[k]));
  }
  if (xs.size() < 5) {
    std::ostringstream os;
    os << "fit: " << xs.size() << " samples in window, need at least 5";
    throw Error(ErrorCode::FitFailure, os.str());
  }
  const double m = static_cast<double>(xs.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    x_mean += xs[k];
    y_mean += ys[k];
  }
  x_mean /= m;
  y_mean /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const double dx = xs[k] - x_mean;
    const double dy = ys[k] - y_mean;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
  if (*hi - *lo <= 1e-14 * std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)))) {
    return {0.0, y_mean, 1.0, {xs.front(), xs.back()}, xs.size()};
  }
  const double slope = sxy / sxx;
  const double r2 = (sxy * sxy) / (sxx * syy);
  return {-slope, y_mean - slope * x_mean, std::clamp(r2, 0.0, 1.0), {xs.front(), xs.back()},
          xs.size()};
}

DecayFit fit_exponential_rate(const DistanceSeries& series, FitWindow window) {
  return fit_exponential_rate(series.times, series.values, window);
}

DistanceSeries pairwise_distance_series(const FullRiccatiFlow& flow, const SpdMatrix& start1,
                                        const SpdMatrix& start2, DistanceMetric metric,
                                        const StepOptions& opts) {
  if (metric != DistanceMetric::Spd) {
    throw Error(ErrorCode::InvalidInput, "full Riccati flow is measured with the spd metric only");
  }
  require_positive_options(opts);
  const auto a = integrate_riccati(flow.sys, start1, opts.t_end, opts.dt);
  const auto b = integrate_riccati(flow.sys, start2, opts.t_end, opts.dt);
  DistanceSeries s;
  s.metric_name = "spd";
  s.times.reserve(a.size());
  s.values.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    s.times.push_back(a[k].t);
    s.values.push_back(distance_spd(a[k].P, b[k].P));
  }
  return s;
}

DistanceSeries pairwise_distance_series(const LowRankFlow& flow, const FixedRankPsd& start1,
                                        const FixedRankPsd& start2, DistanceMetric metric,
                                        const StepOptions& opts) {
  if (metric == DistanceMetric::Spd) {
    throw Error(ErrorCode::InvalidInput,
                "low-rank flows are measured with the approx or grassmann metric");
  }
  require_positive_options(opts);
  if (start1.n() != start2.n() || start1.r() != start2.r()) {
    throw Error(ErrorCode::DimensionMismatch, "pairwise_distance_series: starts differ in shape");
  }
  return lowrank_series(run_lowrank(flow, start1, opts), run_lowrank(flow, start2, opts), metric);
}

SummaryLines Lemma1Report::summary() const {
  return {{"lemma1", pass_fail(passed)},
          {"lemma1.mu", fmt(mu)},
          {"lemma1.slack", fmt(slack)},
          {"lemma1.worst_ratio", fmt(worst_ratio)},
          {"lemma1.floor", fmt(floor)},
          {"lemma1.d0", fmt(series.values.front())},
          {"lemma1.d_end", fmt(series.values.back())},
          {"lemma1.bound_end", fmt(bound.back())}};
}

Lemma1Report check_lemma1(const LtiSystem& sys, const SpdMatrix& start1, const SpdMatrix& start2,
                          const StepOptions& opts, double slack) {
  require_positive_options(opts);
  if (sys.is_time_varying()) {
    throw Error(ErrorCode::Precondition, "check_lemma1: system must be time-invariant");
  }
  const Vector gg_eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(sys.process_noise(), Eigen::EigenvaluesOnly)
          .eigenvalues();
  const double mu = gg_eig(0);
  if (!(mu > 1e-12 * std::max(1.0, gg_eig(gg_eig.size() - 1)))) {
    throw Error(ErrorCode::Precondition, "check_lemma1: GG' must be positive definite (mu > 0)");
  }

  const auto a = integrate_riccati(sys, start1, opts.t_end, opts.dt);
  const auto b = integrate_riccati(sys, start2, opts.t_end, opts.dt);

  Lemma1Report rep{{}, {}, {}, mu, slack, 0.0, true, 0.0};
  rep.series.metric_name = "spd";
  const std::size_t n = a.size();
  // Below this the two trajectories agree to round-off and d carries no signal.
  rep.floor = 100.0 * std::numeric_limits<double>::epsilon() *
              std::sqrt(static_cast<double>(sys.n()));
  double integral = 0.0;
  double d0 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = distance_spd(a[k].P, b[k].P);
    const double pmax = std::max(a[k].P.max_eigenvalue(), b[k].P.max_eigenvalue());
    if (k == 0) {
      d0 = d;
    } else {
      const double h = a[k].t - a[k - 1].t;
      integral += 0.5 * h * (mu / rep.p_max.back() + mu / pmax);
    }
    const double bound = d0 * std::exp(-integral);
    rep.series.times.push_back(a[k].t);
    rep.series.values.push_back(d);
    rep.p_max.push_back(pmax);
    rep.bound.push_back(bound);
    if (d <= rep.floor) continue;
    if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, d / bound);
    if (d > bound * (1.0 + slack)) rep.passed = false;
  }
  return rep;
}

SummaryLines Lemma2Report::summary() const {
  return {{"lemma2", pass_fail(passed)},
          {"lemma2.gap", fmt(gap)},
          {"lemma2.delta", fmt(delta)},
          {"lemma2.rate", fmt(fit.rate)},
          {"lemma2.ratio", fmt(ratio)},
          {"lemma2.r_squared", fmt(fit.r_squared)}};
}

Lemma2Report check_lemma2(const Matrix& a, Index r, double delta, const StepOptions& opts,
                          std::uint64_t seed) {
  require_positive_options(opts);
  if (!(delta > 0.0)) throw Error(ErrorCode::InvalidInput, "check_lemma2: delta must be positive");
  const DominantSubspace dom = dominant_subspace(a, r);
  const Matrix& ur = dom.U.matrix();
  const Index n = ur.rows();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) z(i, j) = normal(rng);
  Matrix du = z - ur * (ur.transpose() * z);
  du *= delta / du.norm();
  const StiefelFrame u0 = StiefelFrame::orthonormalize(ur + du);

  const auto traj = integrate_oja(a, u0, opts.t_end, opts.dt);
  Lemma2Report rep{{}, dom.gap, delta, {}, 0.0, false};
  rep.series.metric_name = "grassmann";
  for (const auto& [t, u] : traj) {
    const double d = grassmann_distance(u, dom.U);
    rep.series.times.push_back(t);
    rep.series.values.push_back(d);
    rep.series.grassmann_component.push_back(d);
    rep.series.cone_component.push_back(0.0);
  }
  rep.fit = fit_exponential_rate(rep.series, tail_window(rep.series));
  rep.ratio = rep.fit.rate / dom.gap;
  rep.passed = rep.ratio >= 0.9;
  return rep;
}

SummaryLines ConstantDistanceReport::summary() const {
  return {{"constant-distance", pass_fail(passed)},
          {"constant-distance.d0", fmt(series.values.front())},
          {"constant-distance.max_deviation", fmt(max_deviation)},
          {"constant-distance.tolerance", fmt(tolerance)}};
}

ConstantDistanceReport check_constant_distance(const LtiSystem& sys, const FixedRankPsd& start1,
                                               const FixedRankPsd& start2, double mu,
                                               const StepOptions& opts, double tolerance) {
  const LowRankFlow flow{sys, mu, false};
  ConstantDistanceReport rep{
      pairwise_distance_series(flow, start1, start2, DistanceMetric::ApproxFixedRank, opts), 0.0,
      tolerance, false};
  const double d0 = rep.series.values.front();
  for (double d : rep.series.values) rep.max_deviation = std::max(rep.max_deviation, std::abs(d - d0));
  rep.passed = rep.max_deviation < tolerance;
  return rep;
}

SummaryLines FixedSpanReport::summary() const {
  return {{"fixed-span-contraction", pass_fail(passed)},
          {"fixed-span-contraction.d0", fmt(series.values.front())},
          {"fixed-span-contraction.d_end", fmt(series.values.back())}};
}

FixedSpanReport check_fixed_span_contraction(const LtiSystem& sys, const FixedRankPsd& start1,
                                             const FixedRankPsd& start2, double mu,
                                             const StepOptions& opts) {
  if (grassmann_distance(start1.U, start2.U) > 1e-10) {
    throw Error(ErrorCode::Precondition, "fixed-span check: starts must share the same span");
  }
  const LowRankFlow flow{sys, mu, true};
  FixedSpanReport rep{
      pairwise_distance_series(flow, start1, start2, DistanceMetric::ApproxFixedRank, opts), true,
      false};
  const auto& v = rep.series.values;
  const double floor = 1e-12 * std::max(v.front(), 1e-300);
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k - 1] <= floor) break;
    if (!(v[k] < v[k - 1])) {
      rep.strictly_decreasing = false;
      break;
    }
  }
  rep.passed = rep.strictly_decreasing && v.front() > 0.0;
  return rep;
}

SummaryLines EventualContractionReport::summary() const {
  SummaryLines out{{"eventual-contraction", pass_fail(passed)},
                   {"eventual-contraction.final_angle1", fmt(final_angle1)},
                   {"eventual-contraction.final_angle2", fmt(final_angle2)},
                   {"eventual-contraction.are_residual", fmt(are_residual)},
                   {"eventual-contraction.limit_observable", limit_observable ? "true" : "false"}};
  if (cone_fit) {
    out.emplace_back("eventual-contraction.cone_rate", fmt(cone_fit->rate));
    out.emplace_back("eventual-contraction.cone_r_squared", fmt(cone_fit->r_squared));
  } else {
    out.emplace_back("eventual-contraction.cone_rate", "n/a");
  }
  return out;
}

EventualContractionReport check_eventual_contraction(const LtiSystem& sys, Index r, double mu,
                                                     const FixedRankPsd& start1,
                                                     const FixedRankPsd& start2,
                                                     const StepOptions& opts,
                                                     const EventualContractionThresholds& th) {
  require_positive_options(opts);
  if (sys.is_time_varying() || !is_symmetric(sys.A())) {
    throw Error(ErrorCode::Precondition, "eventual contraction: A must be constant and symmetric");
  }
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(sys.A()),
                                                           Eigen::EigenvaluesOnly)
                         .eigenvalues();
  const double scale = std::max(1.0, eig.cwiseAbs().maxCoeff());
  for (Index i = 1; i < eig.size(); ++i) {
    if (!(eig(i) - eig(i - 1) > 1e-8 * scale)) {
      throw Error(ErrorCode::Precondition, "eventual contraction: eigenvalues of A must be distinct");
    }
  }
  if (start1.r() != r || start2.r() != r) {
    throw Error(ErrorCode::DimensionMismatch, "eventual contraction: starts have the wrong rank");
  }
  const DominantSubspace dom = dominant_subspace(sys.A(), r);

  const LowRankFlow flow{sys, mu, false};
  const auto a = run_lowrank(flow, start1, opts);
  const auto b = run_lowrank(flow, start2, opts);

  EventualContractionReport rep{lowrank_series(a, b, DistanceMetric::ApproxFixedRank),
                                grassmann_distance(a.back().X.U, dom.U),
                                grassmann_distance(b.back().X.U, dom.U),
                                std::nullopt,
                                std::max(projected_are_residual(sys, a.back().X, mu),
                                         projected_are_residual(sys, b.back().X, mu)),
                                false,
                                false,
                                th};

  const Matrix& u_inf = a.back().X.U.matrix();
  const Matrix a_u = u_inf.transpose() * sys.A() * u_inf;
  rep.limit_observable = is_observable(a_u, sys.C() * u_inf);

  const auto& cone = rep.series.cone_component;
  const double cone_max = *std::max_element(cone.begin(), cone.end());
  bool cone_ok = true;
  if (cone_max > 0.0) {
    // Fit the tail of the part of the series above the round-off floor.
    std::size_t last = 0;
    for (std::size_t k = 0; k < cone.size(); ++k) {
      if (cone[k] > th.noise_floor * cone_max) last = k;
    }
    const auto first = static_cast<std::size_t>(
        std::floor(static_cast<double>(last) * (1.0 - th.tail_fraction)));
    const FitWindow w{rep.series.times[first], rep.series.times[last]};
    rep.cone_fit = fit_exponential_rate(rep.series.times, cone, w);
    cone_ok = rep.cone_fit->rate > 0.0 && rep.cone_fit->r_squared >= th.min_r_squared;
  }
  rep.passed = rep.final_angle1 < th.angle_tol && rep.final_angle2 < th.angle_tol && cone_ok &&
               rep.are_residual < th.residual_tol && rep.limit_observable;
  return rep;
}

}  // namespace riccati_geo
