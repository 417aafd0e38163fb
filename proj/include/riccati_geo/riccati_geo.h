/*
 * riccati_geo C API.
 *
 * Matrices cross the boundary as dense row-major arrays of double. Every
 * function returns an rg_status; on failure rg_last_error() returns a message
 * for the calling thread, valid until that thread's next API call. Output
 * buffers are caller-allocated with the documented sizes. Handles are opaque
 * and must be released with the matching *_destroy function (NULL is
 * accepted and ignored).
 */
#ifndef RICCATI_GEO_H
#define RICCATI_GEO_H

#include <stddef.h>
#include <stdint.h>

#if defined(RICCATI_GEO_BUILDING)
#define RG_API __attribute__((visibility("default")))
#else
#define RG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rg_status {
  RG_OK = 0,
  RG_ERR_INVALID_INPUT = 1,
  RG_ERR_DIMENSION = 2,
  RG_ERR_RANGE = 3,
  RG_ERR_INTEGRATION = 4,
  RG_ERR_CONVERGENCE = 5,
  RG_ERR_DEGENERATE_ALIGNMENT = 6,
  RG_ERR_DEGENERATE_GAP = 7,
  RG_ERR_PRECONDITION = 8,
  RG_ERR_FIT = 9,
  RG_ERR_STEP = 10,
  RG_ERR_NULL_ARGUMENT = 11,
  RG_ERR_INTERNAL = 12
} rg_status;

RG_API const char* rg_status_string(rg_status status);
RG_API const char* rg_last_error(void);
/* Time at which the last RG_ERR_INTEGRATION occurred (NaN otherwise). */
RG_API double rg_last_error_time(void);
RG_API const char* rg_version(void);

/* Warnings are forwarded to stderr unless silenced. */
RG_API void rg_set_warnings_enabled(int enabled);

/* ---------------------------------------------------------------- systems */

typedef struct rg_system rg_system;

/* A: n x n, C: p x n, G: n x m, H: p x p. */
RG_API rg_status rg_system_create(size_t n, size_t m, size_t p, const double* a, const double* c,
                                  const double* g, const double* h, rg_system** out);
/* Built-in generator ("heat1d", "random-observable", "skew"); params is a
 * JSON object of numbers or arrays of numbers (may be NULL). */
RG_API rg_status rg_system_generate(const char* name, const char* params_json, rg_system** out);
RG_API void rg_system_destroy(rg_system* sys);
RG_API rg_status rg_system_dims(const rg_system* sys, size_t* n, size_t* m, size_t* p);
/* which: 'A', 'C', 'G' or 'H'; out sized to that matrix. */
RG_API rg_status rg_system_matrix(const rg_system* sys, char which, double* out);

/* ------------------------------------------------------------ SPD geometry */

RG_API rg_status rg_spd_metric(size_t n, const double* p, const double* y1, const double* y2,
                               double* out);
RG_API rg_status rg_spd_distance(size_t n, const double* p, const double* q, double* out);
RG_API rg_status rg_spd_congruence(size_t n, const double* a, const double* p, double* out);
RG_API rg_status rg_spd_sqrt(size_t n, const double* p, double* out);
RG_API rg_status rg_spd_geodesic(size_t n, const double* p, const double* q, double s, double* out);

/* ------------------------------------------------------- full Riccati flow */

/* out: n x n. */
RG_API rg_status rg_riccati_rhs(const rg_system* sys, const double* p, double t, double* out);
/* Stationary solution from P0 = I. q_out: n x n; residual/time/steps may be NULL. */
RG_API rg_status rg_solve_are(const rg_system* sys, double tol, double* q_out, double* residual,
                              double* time, long* steps);

typedef struct rg_full_filter rg_full_filter;

RG_API rg_status rg_full_filter_create(const rg_system* sys, const double* x0, const double* p0,
                                       double t0, rg_full_filter** out);
RG_API void rg_full_filter_destroy(rg_full_filter* f);
/* y: p entries, or NULL to propagate the covariance only. */
RG_API rg_status rg_full_filter_step(rg_full_filter* f, const double* y, double dt);
/* Any output pointer may be NULL. x: n, p: n x n. */
RG_API rg_status rg_full_filter_state(const rg_full_filter* f, double* x, double* p, double* t);
RG_API rg_status rg_full_filter_trace(const rg_full_filter* f, double* out);

/* ------------------------------------------------------ low-rank geometry */

/* Frames u1, u2: n x r with orthonormal columns. */
RG_API rg_status rg_grassmann_distance(size_t n, size_t r, const double* u1, const double* u2,
                                       double* out);
/* Approximate distance between (U1, S1) and (U2, S2); the two components
 * may be NULL. */
RG_API rg_status rg_fixed_rank_distance(size_t n, size_t r, const double* u1, const double* s1,
                                        const double* u2, const double* s2, double* total,
                                        double* grassmann, double* cone);
/* Top-r eigenspace of (A + A')/2. u_out: n x r; gap may be NULL. */
RG_API rg_status rg_dominant_subspace(size_t n, const double* a, size_t r, double* u_out,
                                      double* gap);
/* Sign-fixed QR orthonormal factor. m, out: n x r. */
RG_API rg_status rg_orthonormalize(size_t n, size_t r, const double* m, double* out);

/* ------------------------------------------------------ low-rank filter */

typedef struct rg_lowrank_filter rg_lowrank_filter;

RG_API rg_status rg_lowrank_filter_create(const rg_system* sys, size_t r, double mu, double dt,
                                          const double* x0, const double* u0, const double* s0,
                                          double t0, rg_lowrank_filter** out);
RG_API void rg_lowrank_filter_destroy(rg_lowrank_filter* f);
/* Discrete-time step; y: p entries or NULL (covariance only). */
RG_API rg_status rg_lowrank_filter_step(rg_lowrank_filter* f, const double* y);
/* Any output may be NULL. x: n, u: n x r, s: r x r. */
RG_API rg_status rg_lowrank_filter_state(const rg_lowrank_filter* f, double* x, double* u,
                                         double* s, double* t);

/* ------------------------------------------------------ truth simulation */

typedef struct rg_truth rg_truth;

RG_API rg_status rg_simulate_truth(const rg_system* sys, const double* x0, double t_end,
                                   double dt, uint64_t seed, rg_truth** out);
RG_API void rg_truth_destroy(rg_truth* tr);
RG_API size_t rg_truth_length(const rg_truth* tr);
/* x: n entries, y: p entries; either may be NULL. */
RG_API rg_status rg_truth_sample(const rg_truth* tr, size_t k, double* t, double* x, double* y);

/* ------------------------------------------------------ contraction checks */

typedef struct rg_report rg_report;

RG_API rg_status rg_check_lemma1(const rg_system* sys, const double* p1, const double* p2,
                                 double t_end, double dt, rg_report** out);
RG_API rg_status rg_check_lemma2(size_t n, const double* a, size_t r, double delta, double t_end,
                                 double dt, uint64_t seed, rg_report** out);
/* Distance between two low-rank solutions must stay constant. */
RG_API rg_status rg_check_constant_distance(const rg_system* sys, size_t r, double mu,
                                            const double* u1, const double* s1, const double* u2,
                                            const double* s2, double t_end, double dt,
                                            rg_report** out);
RG_API rg_status rg_check_fixed_span(const rg_system* sys, size_t r, double mu, const double* u1,
                                     const double* s1, const double* u2, const double* s2,
                                     double t_end, double dt, rg_report** out);
RG_API rg_status rg_check_eventual_contraction(const rg_system* sys, size_t r, double mu,
                                               const double* u1, const double* s1,
                                               const double* u2, const double* s2, double t_end,
                                               double dt, rg_report** out);
RG_API void rg_report_destroy(rg_report* rep);
RG_API int rg_report_passed(const rg_report* rep);
RG_API const char* rg_report_name(const rg_report* rep);
RG_API size_t rg_report_length(const rg_report* rep);
/* row: t, distance, grassmann_component, cone_component, bound (NaN where a
 * column does not apply). */
RG_API rg_status rg_report_row(const rg_report* rep, size_t k, double row[5]);
RG_API size_t rg_report_summary_count(const rg_report* rep);
RG_API rg_status rg_report_summary_entry(const rg_report* rep, size_t k, const char** key,
                                         const char** value);

#ifdef __cplusplus
}
#endif

#endif /* RICCATI_GEO_H */
