#pragma once

// Experiment harness: propagate pairs of solutions, record their distance over
// time, fit exponential rates, and compare them with analytic bounds.

#include "riccati_geo/lowrank_filter.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace riccati_geo {

enum class DistanceMetric { Spd, ApproxFixedRank, Grassmann };

std::string_view to_string(DistanceMetric metric) noexcept;
/// "spd", "approx", "grassmann"; throws InvalidInput otherwise.
DistanceMetric parse_metric(std::string_view name);

struct DistanceSeries {
  std::vector<double> times;
  std::vector<double> values;
  /// Populated for low-rank flows only; same length as `values`.
  std::vector<double> grassmann_component;
  std::vector<double> cone_component;
  std::string metric_name;

  std::size_t size() const noexcept { return times.size(); }
};

/// Throws InvalidInput unless lengths agree, times strictly increase and
/// values are finite and non-negative.
void validate_series(const DistanceSeries& series);

struct FitWindow {
  double t_start;
  double t_end;
};

struct DecayFit {
  double rate;       ///< negated least-squares slope of log(value) on t
  double intercept;  ///< of log(value)
  double r_squared;
  FitWindow window;
  std::size_t samples;
};

/// Last `fraction` of the samples (by index), as a time window.
FitWindow tail_window(const DistanceSeries& series, double fraction = 0.5);

/// Ordinary least squares of log(value) against t over the samples whose
/// times fall in `window`. Throws FitFailure with fewer than five samples or
/// any non-positive value in the window. A constant series has rate 0 and
/// r_squared 1.
DecayFit fit_exponential_rate(const DistanceSeries& series, FitWindow window);
DecayFit fit_exponential_rate(const std::vector<double>& times, const std::vector<double>& values,
                              FitWindow window);

struct StepOptions {
  double t_end = 10.0;
  double dt = 1e-3;
};

struct FullRiccatiFlow {
  LtiSystem sys;
};

struct LowRankFlow {
  LtiSystem sys;
  double mu = 0.0;
  /// Hold the frame fixed and evolve S only.
  bool fixed_span = false;
};

/// Integrates both starts with identical steppers and records the metric at
/// every sample. SPD flows accept DistanceMetric::Spd only; low-rank flows
/// accept ApproxFixedRank or Grassmann and always record both components.
DistanceSeries pairwise_distance_series(const FullRiccatiFlow& flow, const SpdMatrix& start1,
                                        const SpdMatrix& start2, DistanceMetric metric,
                                        const StepOptions& opts);
DistanceSeries pairwise_distance_series(const LowRankFlow& flow, const FixedRankPsd& start1,
                                        const FixedRankPsd& start2, DistanceMetric metric,
                                        const StepOptions& opts);

using SummaryLines = std::vector<std::pair<std::string, std::string>>;

/// d(t) <= B(t) = d(0) exp(-int_0^t mu / p_max(s) ds), with mu the smallest
/// eigenvalue of GG' and p_max(t) the largest eigenvalue over both
/// trajectories at t. Samples with d at or below `floor` (round-off level)
/// are not compared.
struct Lemma1Report {
  DistanceSeries series;
  std::vector<double> p_max;
  std::vector<double> bound;
  double mu;
  double slack;
  /// max_t d(t) / B(t) over samples above the floor
  double worst_ratio;
  bool passed;
  double floor;

  SummaryLines summary() const;
};

/// Throws Precondition when GG' is not positive definite.
Lemma1Report check_lemma1(const LtiSystem& sys, const SpdMatrix& start1, const SpdMatrix& start2,
                          const StepOptions& opts, double slack = 0.05);

/// Local rate of the subspace flow around the dominant eigenspace of the
/// symmetric part of A, measured against the eigen-gap.
struct Lemma2Report {
  DistanceSeries series;  ///< grassmann distance to the equilibrium
  double gap;
  double delta;
  DecayFit fit;
  double ratio;  ///< fitted rate / gap
  bool passed;   ///< ratio >= 0.9

  SummaryLines summary() const;
};

/// Throws DegenerateGap when the gap vanishes.
Lemma2Report check_lemma2(const Matrix& a, Index r, double delta, const StepOptions& opts,
                          std::uint64_t seed);

/// Distance between two solutions stays constant (the rotating-subspace
/// counter-example: A skew-symmetric, no output, no noise).
struct ConstantDistanceReport {
  DistanceSeries series;
  double max_deviation;
  double tolerance;
  bool passed;

  SummaryLines summary() const;
};

ConstantDistanceReport check_constant_distance(const LtiSystem& sys, const FixedRankPsd& start1,
                                               const FixedRankPsd& start2, double mu,
                                               const StepOptions& opts, double tolerance = 1e-9);

/// Contraction of the S equation with the span frozen: the distance between
/// the two S-trajectories strictly decreases.
struct FixedSpanReport {
  DistanceSeries series;
  bool strictly_decreasing;
  bool passed;

  SummaryLines summary() const;
};

/// Both starts must share the same frame (up to gauge).
FixedSpanReport check_fixed_span_contraction(const LtiSystem& sys, const FixedRankPsd& start1,
                                             const FixedRankPsd& start2, double mu,
                                             const StepOptions& opts);

struct EventualContractionThresholds {
  double angle_tol = 1e-6;
  double min_r_squared = 0.99;
  double residual_tol = 1e-6;
  double tail_fraction = 0.5;
  /// Samples whose cone distance is below noise_floor * max(cone distance)
  /// are excluded from the tail window (round-off regime).
  double noise_floor = 1e-10;
};

struct EventualContractionReport {
  DistanceSeries series;
  double final_angle1;
  double final_angle2;
  std::optional<DecayFit> cone_fit;  ///< empty when the series is identically zero
  double are_residual;               ///< max over both limits
  bool limit_observable;
  bool passed;
  EventualContractionThresholds thresholds;

  SummaryLines summary() const;
};

/// Requires A symmetric with distinct eigenvalues (Precondition otherwise).
EventualContractionReport check_eventual_contraction(
    const LtiSystem& sys, Index r, double mu, const FixedRankPsd& start1,
    const FixedRankPsd& start2, const StepOptions& opts,
    const EventualContractionThresholds& thresholds = {});

}  // namespace riccati_geo
