#include "riccati_geo/riccati_geo.h"

#include "riccati_geo/contraction_lab.hpp"
#include "riccati_geo/error.hpp"
#include "riccati_geo/scenario.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

namespace rg = riccati_geo;

struct rg_system {
  rg::LtiSystem sys;
};

struct rg_full_filter {
  rg::LtiSystem sys;
  rg::FilterState state;
};

struct rg_lowrank_filter {
  rg::LtiSystem sys;
  rg::LowRankConfig cfg;
  rg::LowRankFilterState state;
};

struct rg_truth {
  rg::TruthTrace trace;
};

struct rg_report {
  std::string name;
  bool passed = false;
  std::vector<std::array<double, 5>> rows;
  rg::SummaryLines summary;
};

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

thread_local std::string g_last_error;
thread_local double g_last_error_time = kNaN;

struct NullArgument {
  const char* what;
};

template <class T>
T* require(T* p, const char* what) {
  if (!p) throw NullArgument{what};
  return p;
}

rg::Matrix load(const double* data, size_t rows, size_t cols, const char* what) {
  require(data, what);
  return Eigen::Map<const RowMajor>(data, static_cast<Eigen::Index>(rows),
                                    static_cast<Eigen::Index>(cols));
}

rg::Vector load_vector(const double* data, size_t size, const char* what) {
  require(data, what);
  return Eigen::Map<const rg::Vector>(data, static_cast<Eigen::Index>(size));
}

void store(const rg::Matrix& m, double* out) {
  if (!out) return;
  Eigen::Map<RowMajor>(out, m.rows(), m.cols()) = m;
}

void store_vector(const rg::Vector& v, double* out) {
  if (!out) return;
  Eigen::Map<rg::Vector>(out, v.size()) = v;
}

rg_status to_status(rg::ErrorCode code) {
  switch (code) {
    case rg::ErrorCode::InvalidInput: return RG_ERR_INVALID_INPUT;
    case rg::ErrorCode::DimensionMismatch: return RG_ERR_DIMENSION;
    case rg::ErrorCode::OutOfRange: return RG_ERR_RANGE;
    case rg::ErrorCode::IntegrationFailure: return RG_ERR_INTEGRATION;
    case rg::ErrorCode::NoConvergence: return RG_ERR_CONVERGENCE;
    case rg::ErrorCode::DegenerateAlignment: return RG_ERR_DEGENERATE_ALIGNMENT;
    case rg::ErrorCode::DegenerateGap: return RG_ERR_DEGENERATE_GAP;
    case rg::ErrorCode::Precondition: return RG_ERR_PRECONDITION;
    case rg::ErrorCode::FitFailure: return RG_ERR_FIT;
    case rg::ErrorCode::StepFailure: return RG_ERR_STEP;
  }
  return RG_ERR_INTERNAL;
}

template <class F>
rg_status guarded(F&& body) {
  g_last_error.clear();
  g_last_error_time = kNaN;
  try {
    body();
    return RG_OK;
  } catch (const NullArgument& e) {
    g_last_error = std::string("null argument: ") + e.what;
    return RG_ERR_NULL_ARGUMENT;
  } catch (const rg::IntegrationError& e) {
    g_last_error = e.what();
    g_last_error_time = e.time();
    return RG_ERR_INTEGRATION;
  } catch (const rg::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("parameter JSON: ") + e.what();
    return RG_ERR_INVALID_INPUT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return RG_ERR_INTERNAL;
  }
}

rg::ParamMap parse_params(const char* json_text) {
  rg::ParamMap params;
  if (!json_text || !*json_text) return params;
  const auto doc = nlohmann::json::parse(json_text);
  if (!doc.is_object()) {
    throw rg::Error(rg::ErrorCode::InvalidInput, "generator params must be a JSON object");
  }
  for (const auto& [key, value] : doc.items()) {
    if (value.is_number()) {
      params[key] = {value.get<double>()};
    } else if (value.is_array()) {
      params[key] = value.get<std::vector<double>>();
    } else {
      throw rg::Error(rg::ErrorCode::InvalidInput,
                      "generator param '" + key + "' must be a number or an array of numbers");
    }
  }
  return params;
}

rg::FixedRankPsd load_point(size_t n, size_t r, const double* u, const double* s) {
  return {rg::StiefelFrame(load(u, n, r, "U")), rg::SpdMatrix(load(s, r, r, "S"))};
}

void fill_rows(rg_report& rep, const rg::DistanceSeries& s, const std::vector<double>* bound) {
  rep.rows.reserve(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    rep.rows.push_back({s.times[k], s.values[k],
                        s.grassmann_component.empty() ? kNaN : s.grassmann_component[k],
                        s.cone_component.empty() ? kNaN : s.cone_component[k],
                        bound ? (*bound)[k] : kNaN});
  }
}

template <class Report>
rg_report* make_report(const char* name, const Report& r, const std::vector<double>* bound) {
  auto rep = std::make_unique<rg_report>();
  rep->name = name;
  rep->passed = r.passed;
  fill_rows(*rep, r.series, bound);
  rep->summary = r.summary();
  return rep.release();
}

}  // namespace

extern "C" {

const char* rg_status_string(rg_status status) {
  switch (status) {
    case RG_OK: return "ok";
    case RG_ERR_INVALID_INPUT: return "invalid input";
    case RG_ERR_DIMENSION: return "dimension mismatch";
    case RG_ERR_RANGE: return "out of range";
    case RG_ERR_INTEGRATION: return "integration failure";
    case RG_ERR_CONVERGENCE: return "no convergence";
    case RG_ERR_DEGENERATE_ALIGNMENT: return "degenerate alignment";
    case RG_ERR_DEGENERATE_GAP: return "degenerate eigen-gap";
    case RG_ERR_PRECONDITION: return "precondition violated";
    case RG_ERR_FIT: return "fit failure";
    case RG_ERR_STEP: return "step failure";
    case RG_ERR_NULL_ARGUMENT: return "null argument";
    case RG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* rg_last_error(void) { return g_last_error.c_str(); }

double rg_last_error_time(void) { return g_last_error_time; }

const char* rg_version(void) { return "0.1.0"; }

void rg_set_warnings_enabled(int enabled) {
  if (enabled) {
    rg::set_warning_handler(
        [](std::string_view msg) { std::cerr << "riccati-geo warning: " << msg << '\n'; });
  } else {
    rg::set_warning_handler(nullptr);
  }
}

rg_status rg_system_create(size_t n, size_t m, size_t p, const double* a, const double* c,
                           const double* g, const double* h, rg_system** out) {
  return guarded([&] {
    require(out, "out");
    *out = new rg_system{rg::LtiSystem(load(a, n, n, "A"), load(c, p, n, "C"),
                                       load(g, n, m, "G"), load(h, p, p, "H"))};
  });
}

rg_status rg_system_generate(const char* name, const char* params_json, rg_system** out) {
  return guarded([&] {
    require(out, "out");
    require(name, "name");
    *out = new rg_system{rg::generate_scenario(name, parse_params(params_json))};
  });
}

void rg_system_destroy(rg_system* sys) { delete sys; }

rg_status rg_system_dims(const rg_system* sys, size_t* n, size_t* m, size_t* p) {
  return guarded([&] {
    require(sys, "sys");
    if (n) *n = static_cast<size_t>(sys->sys.n());
    if (m) *m = static_cast<size_t>(sys->sys.m());
    if (p) *p = static_cast<size_t>(sys->sys.p());
  });
}

rg_status rg_system_matrix(const rg_system* sys, char which, double* out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    switch (which) {
      case 'A': store(sys->sys.A(), out); break;
      case 'C': store(sys->sys.C(), out); break;
      case 'G': store(sys->sys.G(), out); break;
      case 'H': store(sys->sys.H(), out); break;
      default:
        throw rg::Error(rg::ErrorCode::InvalidInput, "matrix selector must be A, C, G or H");
    }
  });
}

rg_status rg_spd_metric(size_t n, const double* p, const double* y1, const double* y2,
                        double* out) {
  return guarded([&] {
    require(out, "out");
    *out = rg::metric_spd(rg::SpdMatrix(load(p, n, n, "P")),
                          rg::SymmetricMatrix(load(y1, n, n, "Y1")),
                          rg::SymmetricMatrix(load(y2, n, n, "Y2")));
  });
}

rg_status rg_spd_distance(size_t n, const double* p, const double* q, double* out) {
  return guarded([&] {
    require(out, "out");
    *out = rg::distance_spd(rg::SpdMatrix(load(p, n, n, "P")), rg::SpdMatrix(load(q, n, n, "Q")));
  });
}

rg_status rg_spd_congruence(size_t n, const double* a, const double* p, double* out) {
  return guarded([&] {
    require(out, "out");
    store(rg::congruence(load(a, n, n, "A"), rg::SpdMatrix(load(p, n, n, "P"))).matrix(), out);
  });
}

rg_status rg_spd_sqrt(size_t n, const double* p, double* out) {
  return guarded([&] {
    require(out, "out");
    store(rg::sqrt_spd(rg::SpdMatrix(load(p, n, n, "P"))).matrix(), out);
  });
}

rg_status rg_spd_geodesic(size_t n, const double* p, const double* q, double s, double* out) {
  return guarded([&] {
    require(out, "out");
    store(rg::geodesic_spd(rg::SpdMatrix(load(p, n, n, "P")), rg::SpdMatrix(load(q, n, n, "Q")), s)
              .matrix(),
          out);
  });
}

rg_status rg_riccati_rhs(const rg_system* sys, const double* p, double t, double* out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    store(rg::riccati_rhs(sys->sys, rg::SpdMatrix(load(p, n, n, "P")), t).matrix(), out);
  });
}

rg_status rg_solve_are(const rg_system* sys, double tol, double* q_out, double* residual,
                       double* time, long* steps) {
  return guarded([&] {
    require(sys, "sys");
    require(q_out, "q_out");
    rg::AreOptions opts;
    opts.record_history = false;
    const rg::AreSolution sol = rg::solve_are(sys->sys, tol, opts);
    store(sol.Q.matrix(), q_out);
    if (residual) *residual = sol.residual;
    if (time) *time = sol.time;
    if (steps) *steps = sol.steps;
  });
}

rg_status rg_full_filter_create(const rg_system* sys, const double* x0, const double* p0,
                                double t0, rg_full_filter** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    *out = new rg_full_filter{
        sys->sys, {load_vector(x0, n, "x0"), rg::SpdMatrix(load(p0, n, n, "P0")), t0}};
  });
}

void rg_full_filter_destroy(rg_full_filter* f) { delete f; }

rg_status rg_full_filter_step(rg_full_filter* f, const double* y, double dt) {
  return guarded([&] {
    require(f, "filter");
    std::optional<rg::MeasurementRecord> meas;
    if (y) meas = rg::MeasurementRecord{f->state.t, load_vector(y, static_cast<size_t>(f->sys.p()), "y")};
    f->state = rg::filter_step(f->sys, f->state, meas, dt);
  });
}

rg_status rg_full_filter_state(const rg_full_filter* f, double* x, double* p, double* t) {
  return guarded([&] {
    require(f, "filter");
    store_vector(f->state.x_hat, x);
    store(f->state.P.matrix(), p);
    if (t) *t = f->state.t;
  });
}

rg_status rg_full_filter_trace(const rg_full_filter* f, double* out) {
  return guarded([&] {
    require(f, "filter");
    require(out, "out");
    *out = f->state.P.matrix().trace();
  });
}

rg_status rg_grassmann_distance(size_t n, size_t r, const double* u1, const double* u2,
                                double* out) {
  return guarded([&] {
    require(out, "out");
    *out = rg::grassmann_distance(rg::StiefelFrame(load(u1, n, r, "U1")),
                                  rg::StiefelFrame(load(u2, n, r, "U2")));
  });
}

rg_status rg_fixed_rank_distance(size_t n, size_t r, const double* u1, const double* s1,
                                 const double* u2, const double* s2, double* total,
                                 double* grassmann, double* cone) {
  return guarded([&] {
    require(total, "total");
    const rg::ApproxDistance d =
        rg::approx_distance_parts(load_point(n, r, u1, s1), load_point(n, r, u2, s2));
    *total = d.total;
    if (grassmann) *grassmann = d.grassmann;
    if (cone) *cone = d.cone;
  });
}

rg_status rg_dominant_subspace(size_t n, const double* a, size_t r, double* u_out, double* gap) {
  return guarded([&] {
    require(u_out, "u_out");
    const rg::DominantSubspace dom =
        rg::dominant_subspace(load(a, n, n, "A"), static_cast<rg::Index>(r));
    store(dom.U.matrix(), u_out);
    if (gap) *gap = dom.gap;
  });
}

rg_status rg_orthonormalize(size_t n, size_t r, const double* m, double* out) {
  return guarded([&] {
    require(out, "out");
    store(rg::StiefelFrame::orthonormalize(load(m, n, r, "M")).matrix(), out);
  });
}

rg_status rg_lowrank_filter_create(const rg_system* sys, size_t r, double mu, double dt,
                                   const double* x0, const double* u0, const double* s0,
                                   double t0, rg_lowrank_filter** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    rg::LowRankConfig cfg{mu, dt, static_cast<rg::Index>(r)};
    if (!(dt > 0.0)) throw rg::Error(rg::ErrorCode::InvalidInput, "dt must be positive");
    if (!(mu >= 0.0)) throw rg::Error(rg::ErrorCode::InvalidInput, "mu must be >= 0");
    *out = new rg_lowrank_filter{
        sys->sys, cfg, {load_point(n, r, u0, s0), load_vector(x0, n, "x0"), t0}};
  });
}

void rg_lowrank_filter_destroy(rg_lowrank_filter* f) { delete f; }

rg_status rg_lowrank_filter_step(rg_lowrank_filter* f, const double* y) {
  return guarded([&] {
    require(f, "filter");
    std::optional<rg::MeasurementRecord> meas;
    if (y) meas = rg::MeasurementRecord{f->state.t, load_vector(y, static_cast<size_t>(f->sys.p()), "y")};
    f->state = rg::discrete_step(f->sys, f->state, f->cfg, meas);
  });
}

rg_status rg_lowrank_filter_state(const rg_lowrank_filter* f, double* x, double* u, double* s,
                                  double* t) {
  return guarded([&] {
    require(f, "filter");
    store_vector(f->state.x_hat, x);
    store(f->state.X.U.matrix(), u);
    store(f->state.X.S.matrix(), s);
    if (t) *t = f->state.t;
  });
}

rg_status rg_simulate_truth(const rg_system* sys, const double* x0, double t_end, double dt,
                            uint64_t seed, rg_truth** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    *out = new rg_truth{rg::simulate_truth(sys->sys, load_vector(x0, n, "x0"), t_end, dt, seed)};
  });
}

void rg_truth_destroy(rg_truth* tr) { delete tr; }

size_t rg_truth_length(const rg_truth* tr) { return tr ? tr->trace.times.size() : 0; }

rg_status rg_truth_sample(const rg_truth* tr, size_t k, double* t, double* x, double* y) {
  return guarded([&] {
    require(tr, "truth");
    if (k >= tr->trace.times.size()) {
      throw rg::Error(rg::ErrorCode::OutOfRange, "truth sample index out of range");
    }
    if (t) *t = tr->trace.times[k];
    store_vector(tr->trace.states[k], x);
    store_vector(tr->trace.measurements[k], y);
  });
}

rg_status rg_check_lemma1(const rg_system* sys, const double* p1, const double* p2, double t_end,
                          double dt, rg_report** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    const rg::Lemma1Report r =
        rg::check_lemma1(sys->sys, rg::SpdMatrix(load(p1, n, n, "P1")),
                         rg::SpdMatrix(load(p2, n, n, "P2")), {t_end, dt});
    *out = make_report("lemma1", r, &r.bound);
  });
}

rg_status rg_check_lemma2(size_t n, const double* a, size_t r, double delta, double t_end,
                          double dt, uint64_t seed, rg_report** out) {
  return guarded([&] {
    require(out, "out");
    const rg::Lemma2Report rep = rg::check_lemma2(load(a, n, n, "A"), static_cast<rg::Index>(r),
                                                  delta, {t_end, dt}, seed);
    *out = make_report("lemma2", rep, nullptr);
  });
}

rg_status rg_check_constant_distance(const rg_system* sys, size_t r, double mu, const double* u1,
                                     const double* s1, const double* u2, const double* s2,
                                     double t_end, double dt, rg_report** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    const rg::ConstantDistanceReport rep = rg::check_constant_distance(
        sys->sys, load_point(n, r, u1, s1), load_point(n, r, u2, s2), mu, {t_end, dt});
    *out = make_report("constant-distance", rep, nullptr);
  });
}

rg_status rg_check_fixed_span(const rg_system* sys, size_t r, double mu, const double* u1,
                              const double* s1, const double* u2, const double* s2, double t_end,
                              double dt, rg_report** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    const rg::FixedSpanReport rep = rg::check_fixed_span_contraction(
        sys->sys, load_point(n, r, u1, s1), load_point(n, r, u2, s2), mu, {t_end, dt});
    *out = make_report("fixed-span-contraction", rep, nullptr);
  });
}

rg_status rg_check_eventual_contraction(const rg_system* sys, size_t r, double mu,
                                        const double* u1, const double* s1, const double* u2,
                                        const double* s2, double t_end, double dt,
                                        rg_report** out) {
  return guarded([&] {
    require(sys, "sys");
    require(out, "out");
    const auto n = static_cast<size_t>(sys->sys.n());
    const rg::EventualContractionReport rep = rg::check_eventual_contraction(
        sys->sys, static_cast<rg::Index>(r), mu, load_point(n, r, u1, s1),
        load_point(n, r, u2, s2), {t_end, dt});
    *out = make_report("eventual-contraction", rep, nullptr);
  });
}

void rg_report_destroy(rg_report* rep) { delete rep; }

int rg_report_passed(const rg_report* rep) { return rep && rep->passed ? 1 : 0; }

const char* rg_report_name(const rg_report* rep) { return rep ? rep->name.c_str() : ""; }

size_t rg_report_length(const rg_report* rep) { return rep ? rep->rows.size() : 0; }

rg_status rg_report_row(const rg_report* rep, size_t k, double row[5]) {
  return guarded([&] {
    require(rep, "report");
    require(row, "row");
    if (k >= rep->rows.size()) throw rg::Error(rg::ErrorCode::OutOfRange, "report row out of range");
    for (std::size_t i = 0; i < 5; ++i) row[i] = rep->rows[k][i];
  });
}

size_t rg_report_summary_count(const rg_report* rep) { return rep ? rep->summary.size() : 0; }

rg_status rg_report_summary_entry(const rg_report* rep, size_t k, const char** key,
                                  const char** value) {
  return guarded([&] {
    require(rep, "report");
    if (k >= rep->summary.size()) {
      throw rg::Error(rg::ErrorCode::OutOfRange, "summary index out of range");
    }
    if (key) *key = rep->summary[k].first.c_str();
    if (value) *value = rep->summary[k].second.c_str();
  });
}

}  // extern "C"
