#include "commands.hpp"

#include "capi_handles.hpp"
#include "config.hpp"
#include "output.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <thread>

namespace riccati_geo::cli {

void check(rg_status status, const std::string& context) {
  if (status == RG_OK) return;
  std::string msg = context + ": " + rg_last_error();
  switch (status) {
    case RG_ERR_INVALID_INPUT:
    case RG_ERR_DIMENSION:
    case RG_ERR_RANGE:
    case RG_ERR_PRECONDITION:
    case RG_ERR_DEGENERATE_GAP:
    case RG_ERR_NULL_ARGUMENT:
      throw ConfigError(msg);
    case RG_ERR_INTEGRATION: {
      const double t = rg_last_error_time();
      if (std::isfinite(t)) msg += " (at t = " + format_number(t) + ")";
      throw NumericError(msg);
    }
    default:
      throw NumericError(msg + " [" + rg_status_string(status) + "]");
  }
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ------------------------------------------------------------ dense helpers

Dense transpose(const Dense& a) {
  Dense t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

Dense multiply(const Dense& a, const Dense& b) {
  Dense c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

// U' v for an n x r frame.
std::vector<double> project(const Dense& u, const std::vector<double>& v) {
  std::vector<double> out(u.cols, 0.0);
  for (std::size_t i = 0; i < u.rows; ++i)
    for (std::size_t j = 0; j < u.cols; ++j) out[j] += u(i, j) * v[i];
  return out;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double frobenius(const Dense& a) { return norm(a.data); }

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

double rms(const std::vector<double>& v) {
  return v.empty() ? 0.0 : norm(v) / std::sqrt(static_cast<double>(v.size()));
}

Dense random_spd(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dense z(n, n);
  for (double& x : z.data) x = normal(rng);
  Dense p = multiply(z, transpose(z));
  for (double& x : p.data) x /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) p(i, i) += 0.5;
  return p;
}

Dense orthonormalize(const Dense& m, const std::string& context) {
  Dense out(m.rows, m.cols);
  check(rg_orthonormalize(m.rows, m.cols, m.ptr(), out.ptr()), context);
  return out;
}

Dense random_frame(std::size_t n, std::size_t r, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Dense z(n, r);
  for (double& x : z.data) x = normal(rng);
  return orthonormalize(z, "random frame");
}

Dense canonical_frame(std::size_t n, std::size_t r) {
  Dense u(n, r);
  for (std::size_t j = 0; j < r; ++j) u(j, j) = 1.0;
  return u;
}

double grassmann(const Dense& u1, const Dense& u2) {
  double d = 0.0;
  check(rg_grassmann_distance(u1.rows, u1.cols, u1.ptr(), u2.ptr(), &d), "grassmann distance");
  return d;
}

// Top-r eigenspace of a symmetric matrix; nullopt when the gap is degenerate.
std::optional<Dense> top_subspace(const Dense& a, std::size_t r, const std::string& context) {
  Dense u(a.rows, r);
  const rg_status st = rg_dominant_subspace(a.rows, a.ptr(), r, u.ptr(), nullptr);
  if (st == RG_ERR_DEGENERATE_GAP) return std::nullopt;
  check(st, context);
  return u;
}

// ------------------------------------------------------------- systems

struct System {
  SystemHandle handle;
  std::size_t n = 0, m = 0, p = 0;

  const rg_system* get() const { return handle.get(); }
  Dense matrix(char which) const {
    const std::size_t rows = which == 'C' || which == 'H' ? p : n;
    const std::size_t cols = which == 'G' ? m : which == 'H' ? p : n;
    Dense out(rows, cols);
    check(rg_system_matrix(handle.get(), which, out.ptr()), "system matrix");
    return out;
  }
};

System finish_system(rg_system* raw, const std::string& context) {
  System s;
  s.handle.reset(raw);
  check(rg_system_dims(raw, &s.n, &s.m, &s.p), context);
  return s;
}

System generate_system(const std::string& generator, const nlohmann::json& params,
                       const std::string& context) {
  rg_system* raw = nullptr;
  const std::string text = params.dump();
  check(rg_system_generate(generator.c_str(), text.c_str(), &raw), context);
  return finish_system(raw, context);
}

System load_system(const Node& node) {
  if (node.has("generator")) {
    node.allow({"generator", "params"});
    const nlohmann::json empty = nlohmann::json::object();
    const nlohmann::json& params = node.has("params") ? node.at("params").json() : empty;
    if (!params.is_object()) node.fail("params", "expected an object");
    return generate_system(node.string("generator"), params, node.path());
  }
  node.allow({"A", "C", "G", "H"});
  const Dense a = node.matrix("A");
  const Dense c = node.matrix("C");
  if (a.rows != a.cols) node.fail("A", "must be square");
  if (c.cols != a.rows) node.fail("C", "must have as many columns as A");
  const Dense g = node.has("G") ? node.matrix("G") : Dense::identity(a.rows);
  const Dense h = node.has("H") ? node.matrix("H") : Dense::identity(c.rows);
  if (g.rows != a.rows) node.fail("G", "must have as many rows as A");
  if (h.rows != c.rows || h.cols != c.rows) node.fail("H", "must be p x p with p the rows of C");
  rg_system* raw = nullptr;
  check(rg_system_create(a.rows, g.cols, c.rows, a.ptr(), c.ptr(), g.ptr(), h.ptr(), &raw),
        node.path());
  return finish_system(raw, node.path());
}

// --------------------------------------------------------- run plumbing

struct Run {
  const RunContext& ctx;
  Node root;
  std::uint64_t seed;
  bool plots;

  Run(const nlohmann::json& config, const RunContext& c, std::initializer_list<const char*> keys)
      : ctx(c), root(config, "") {
    root.allow(keys);
    seed = ctx.seed ? *ctx.seed : root.seed("seed", 0);
    plots = root.boolean("plots", false);
    std::error_code ec;
    std::filesystem::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + ctx.out_dir.string());
  }

  std::filesystem::path file(const std::string& name) const { return ctx.out_dir / name; }

  void log(const std::string& line) const {
    if (ctx.log) *ctx.log << line << '\n';
  }
};

std::size_t step_count(const Node& node, double t_end, double dt) {
  const double ratio = t_end / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio) || steps < 1.0) {
    node.fail("t_end", "must be a positive multiple of dt");
  }
  return static_cast<std::size_t>(steps);
}

std::vector<double> vector_or(const Node& node, const std::string& key, std::size_t n,
                              double fill) {
  if (!node.has(key)) return std::vector<double>(n, fill);
  auto v = node.numbers(key);
  if (v.size() != n) node.fail(key, "expected " + std::to_string(n) + " entries");
  return v;
}

Dense square_or_scaled(const Node& node, const std::string& key, std::size_t n, double scale) {
  if (!node.has(key)) return Dense::identity(n, scale);
  if (node.json().at(key).is_number()) return Dense::identity(n, node.positive(key));
  Dense m = node.matrix(key);
  if (m.rows != n || m.cols != n) node.fail(key, "expected an " + std::to_string(n) + " x " +
                                                     std::to_string(n) + " matrix or a scale");
  return m;
}

std::size_t rank_field(const Node& node, const std::string& key, std::size_t n,
                       std::optional<long> fallback) {
  const long r = node.integer(key, fallback);
  if (r < 1 || static_cast<std::size_t>(r) >= n) {
    node.fail(key, "rank must satisfy 1 <= r < n (n = " + std::to_string(n) + ")");
  }
  return static_cast<std::size_t>(r);
}

struct Truth {
  TruthHandle handle;
  std::size_t length = 0;
};

Truth simulate(const System& sys, const std::vector<double>& x0, double t_end, double dt,
               std::uint64_t seed) {
  rg_truth* raw = nullptr;
  check(rg_simulate_truth(sys.get(), x0.data(), t_end, dt, seed, &raw), "truth simulation");
  Truth t;
  t.handle.reset(raw);
  t.length = rg_truth_length(raw);
  return t;
}

struct Sample {
  double t = 0.0;
  std::vector<double> x, y;
};

Sample sample(const Truth& tr, const System& sys, std::size_t k) {
  Sample s;
  s.x.resize(sys.n);
  s.y.resize(sys.p);
  check(rg_truth_sample(tr.handle.get(), k, &s.t, s.x.data(), s.y.data()), "truth sample");
  return s;
}

bool record_row(std::size_t k, std::size_t steps, std::size_t every) {
  return k % every == 0 || k == steps;
}

const std::vector<std::string> kFilterHeader = {"t", "rmse", "rmse_projected", "trace_cov",
                                                "subspace_angle"};

// One recorded filter row before the final-subspace projection is known.
struct FilterRow {
  double t;
  std::vector<double> error;
  double trace;
  double angle;
};

void write_filter_csv(const Run& run, const std::string& name, const std::vector<FilterRow>& rows,
                      const std::function<double(const FilterRow&)>& projected) {
  CsvWriter csv(run.file(name + ".csv"), kFilterHeader);
  std::vector<double> t, rmse_col, proj_col;
  for (const auto& row : rows) {
    const double p = projected(row);
    csv.row({row.t, rms(row.error), p, row.trace, row.angle});
    t.push_back(row.t);
    rmse_col.push_back(rms(row.error));
    proj_col.push_back(p);
  }
  csv.save();
  if (run.plots) {
    write_svg_plot(run.file(name + ".svg"), name, t,
                   {{"rmse", rmse_col}, {"rmse_projected", proj_col}}, true);
  }
}

void write_estimates(const Run& run, const std::vector<FilterRow>& rows,
                     const std::vector<std::vector<double>>& estimates) {
  if (rows.empty()) return;
  const std::size_t n = rows.front().error.size();
  std::vector<std::string> header{"t"};
  for (std::size_t i = 0; i < n; ++i) header.push_back("x_hat_" + std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) header.push_back("error_" + std::to_string(i));
  CsvWriter csv(run.file("estimates.csv"), header);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::vector<double> line{rows[k].t};
    line.insert(line.end(), estimates[k].begin(), estimates[k].end());
    line.insert(line.end(), rows[k].error.begin(), rows[k].error.end());
    csv.row(line);
  }
  csv.save();
}

// ------------------------------------------------------------ are-solve

int cmd_are_solve(const nlohmann::json& config, const RunContext& ctx) {
  Run run(config, ctx, {"system", "tol", "seed", "plots"});
  const System sys = load_system(run.root.at("system"));
  const double tol = run.root.positive("tol", 1e-10);
  Dense q(sys.n, sys.n);
  double residual = 0.0, time = 0.0;
  long steps = 0;
  check(rg_solve_are(sys.get(), tol, q.ptr(), &residual, &time, &steps), "are-solve");

  CsvWriter csv(run.file("are_Q.csv"), {"i", "j", "value"});
  for (std::size_t i = 0; i < sys.n; ++i)
    for (std::size_t j = 0; j < sys.n; ++j)
      csv.row({static_cast<double>(i), static_cast<double>(j), q(i, j)});
  csv.save();

  const bool passed = residual < tol;
  const std::vector<std::string> lines{
      std::string("are-solve=") + (passed ? "PASS" : "FAIL"),
      "are-solve.residual=" + format_number(residual),
      "are-solve.tol=" + format_number(tol),
      "are-solve.time=" + format_number(time),
      "are-solve.steps=" + std::to_string(steps),
      "are-solve.trace=" + format_number([&] {
        double s = 0.0;
        for (std::size_t i = 0; i < sys.n; ++i) s += q(i, i);
        return s;
      }())};
  write_lines(run.file("summary.txt"), lines);
  std::cout << "are-solve: " << (passed ? "PASS" : "FAIL") << " (residual "
            << format_number(residual) << ")\n";
  return passed ? kExitOk : kExitCheckFailed;
}

// -------------------------------------------------------- simulate-full

int cmd_simulate_full(const nlohmann::json& config, const RunContext& ctx) {
  Run run(config, ctx,
          {"system", "t_end", "dt", "seed", "x0", "x_hat0", "p0", "r", "record_every", "plots"});
  const System sys = load_system(run.root.at("system"));
  const double t_end = run.root.positive("t_end");
  const double dt = run.root.positive("dt");
  const std::size_t steps = step_count(run.root, t_end, dt);
  const std::size_t r = rank_field(run.root, "r", sys.n, std::min<long>(2, sys.n - 1));
  const auto every = static_cast<std::size_t>(std::max<long>(1, run.root.integer("record_every", 1)));
  const auto x0 = vector_or(run.root, "x0", sys.n, 0.0);
  const auto xh0 = vector_or(run.root, "x_hat0", sys.n, 0.0);
  const Dense p0 = square_or_scaled(run.root, "p0", sys.n, 1.0);

  const Truth truth = simulate(sys, x0, t_end, dt, run.seed);
  const auto dominant = top_subspace(sys.matrix('A'), r, "dominant subspace of A");

  rg_full_filter* raw = nullptr;
  check(rg_full_filter_create(sys.get(), xh0.data(), p0.ptr(), 0.0, &raw), "full filter");
  FullFilterHandle filter(raw);

  std::vector<FilterRow> rows;
  std::vector<std::vector<double>> estimates;
  std::vector<double> x(sys.n);
  Dense p(sys.n, sys.n);
  for (std::size_t k = 0;; ++k) {
    const Sample s = sample(truth, sys, k);
    if (record_row(k, steps, every)) {
      double t = 0.0, trace = 0.0;
      check(rg_full_filter_state(filter.get(), x.data(), p.ptr(), &t), "full filter state");
      check(rg_full_filter_trace(filter.get(), &trace), "full filter trace");
      double angle = kNaN;
      if (dominant) {
        if (auto top = top_subspace(p, r, "covariance eigenspace")) angle = grassmann(*top, *dominant);
      }
      rows.push_back({t, difference(x, s.x), trace, angle});
      estimates.push_back(x);
    }
    if (k == steps) break;
    const Sample next = sample(truth, sys, k + 1);
    check(rg_full_filter_step(filter.get(), s.y.data(), next.t - s.t), "full filter step");
  }

  check(rg_full_filter_state(filter.get(), nullptr, p.ptr(), nullptr), "full filter state");
  const auto final_top = top_subspace(p, r, "final covariance eigenspace");
  write_filter_csv(run, "filter", rows, [&](const FilterRow& row) {
    return final_top ? rms(project(*final_top, row.error)) : kNaN;
  });
  write_estimates(run, rows, estimates);
  write_lines(run.file("summary.txt"),
              {"simulate-full.steps=" + std::to_string(steps),
               "simulate-full.final_rmse=" + format_number(rms(rows.back().error)),
               "simulate-full.final_trace_cov=" + format_number(rows.back().trace)});
  std::cout << "simulate-full: " << steps << " steps, final rmse "
            << format_number(rms(rows.back().error)) << "\n";
  return kExitOk;
}

// ----------------------------------------------------- simulate-lowrank

Dense initial_frame(const Node& node, const System& sys, std::size_t r, std::mt19937_64& rng) {
  const std::string init = node.string("init", std::string("dominant"));
  if (init == "dominant") {
    auto u = top_subspace(sys.matrix('A'), r, node.path() + "/init");
    if (!u) node.fail("init", "A has no eigen-gap at rank " + std::to_string(r));
    return *u;
  }
  if (init == "random") return random_frame(sys.n, r, rng);
  if (init == "canonical") return canonical_frame(sys.n, r);
  node.fail("init", "expected dominant, random or canonical");
}

struct LowRankSnapshot {
  std::vector<double> x;
  Dense u, s;
  double t;
};

LowRankSnapshot lowrank_state(const rg_lowrank_filter* f, std::size_t n, std::size_t r) {
  LowRankSnapshot snap{std::vector<double>(n), Dense(n, r), Dense(r, r), 0.0};
  check(rg_lowrank_filter_state(f, snap.x.data(), snap.u.ptr(), snap.s.ptr(), &snap.t),
        "low-rank filter state");
  return snap;
}

double trace(const Dense& s) {
  double t = 0.0;
  for (std::size_t i = 0; i < s.rows; ++i) t += s(i, i);
  return t;
}

double orthonormality_error(const Dense& u) {
  Dense g = multiply(transpose(u), u);
  for (std::size_t i = 0; i < g.rows; ++i) g(i, i) -= 1.0;
  return frobenius(g);
}

int cmd_simulate_lowrank(const nlohmann::json& config, const RunContext& ctx) {
  Run run(config, ctx,
          {"system", "t_end", "dt", "seed", "x0", "x_hat0", "r", "mu", "init", "s0",
           "record_every", "plots"});
  const System sys = load_system(run.root.at("system"));
  const double t_end = run.root.positive("t_end");
  const double dt = run.root.positive("dt");
  const std::size_t steps = step_count(run.root, t_end, dt);
  const std::size_t r = rank_field(run.root, "r", sys.n, std::nullopt);
  const double mu = run.root.number("mu", 1.0);
  if (mu < 0.0) run.root.fail("mu", "must be non-negative");
  const auto every = static_cast<std::size_t>(std::max<long>(1, run.root.integer("record_every", 1)));
  const auto x0 = vector_or(run.root, "x0", sys.n, 0.0);
  const auto xh0 = vector_or(run.root, "x_hat0", sys.n, 0.0);
  const Dense s0 = square_or_scaled(run.root, "s0", r, 1.0);

  std::mt19937_64 rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  const Dense u0 = initial_frame(run.root, sys, r, rng);
  const Truth truth = simulate(sys, x0, t_end, dt, run.seed);
  const auto dominant = top_subspace(sys.matrix('A'), r, "dominant subspace of A");

  rg_lowrank_filter* raw = nullptr;
  check(rg_lowrank_filter_create(sys.get(), r, mu, dt, xh0.data(), u0.ptr(), s0.ptr(), 0.0, &raw),
        "low-rank filter");
  LowRankFilterHandle filter(raw);

  std::vector<FilterRow> rows;
  std::vector<std::vector<double>> estimates;
  std::vector<double> projected;
  double worst_orth = 0.0;
  for (std::size_t k = 0;; ++k) {
    const Sample s = sample(truth, sys, k);
    if (record_row(k, steps, every)) {
      const LowRankSnapshot snap = lowrank_state(filter.get(), sys.n, r);
      worst_orth = std::max(worst_orth, orthonormality_error(snap.u));
      const auto err = difference(snap.x, s.x);
      rows.push_back({snap.t, err, trace(snap.s), dominant ? grassmann(snap.u, *dominant) : kNaN});
      projected.push_back(rms(project(snap.u, err)));
      estimates.push_back(snap.x);
    }
    if (k == steps) break;
    check(rg_lowrank_filter_step(filter.get(), s.y.data()), "low-rank filter step");
  }

  std::size_t idx = 0;
  write_filter_csv(run, "filter", rows, [&](const FilterRow&) { return projected[idx++]; });
  write_estimates(run, rows, estimates);
  write_lines(run.file("summary.txt"),
              {"simulate-lowrank.steps=" + std::to_string(steps),
               "simulate-lowrank.final_rmse=" + format_number(rms(rows.back().error)),
               "simulate-lowrank.final_rmse_projected=" + format_number(projected.back()),
               "simulate-lowrank.final_subspace_angle=" + format_number(rows.back().angle),
               "simulate-lowrank.max_orthonormality_error=" + format_number(worst_orth)});
  std::cout << "simulate-lowrank: " << steps << " steps, final projected rmse "
            << format_number(projected.back()) << "\n";
  return kExitOk;
}

// ----------------------------------------------------------- contraction

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::vector<std::array<double, 5>> rows;
  std::vector<std::pair<std::string, std::string>> summary;
};

CheckOutcome collect(const std::string& name, const rg_report* rep) {
  CheckOutcome out;
  out.name = name;
  out.passed = rg_report_passed(rep) != 0;
  const std::string prefix = rg_report_name(rep);
  const std::size_t len = rg_report_length(rep);
  out.rows.resize(len);
  for (std::size_t k = 0; k < len; ++k) check(rg_report_row(rep, k, out.rows[k].data()), name);
  for (std::size_t k = 0; k < rg_report_summary_count(rep); ++k) {
    const char* key = nullptr;
    const char* value = nullptr;
    check(rg_report_summary_entry(rep, k, &key, &value), name);
    std::string renamed = key;
    if (renamed.compare(0, prefix.size(), prefix) == 0) renamed = name + renamed.substr(prefix.size());
    out.summary.emplace_back(renamed, value);
  }
  return out;
}

struct CheckEntry {
  Node node;
  std::string type;
  std::string name;
  std::uint64_t seed;
};

System check_system(const CheckEntry& entry, const Node& root) {
  if (entry.node.has("system")) return load_system(entry.node.at("system"));
  if (root.has("system")) return load_system(root.at("system"));
  entry.node.fail("system", "missing (no top-level system either)");
}

Dense frame_field(const Node& node, const std::string& key, std::size_t n, std::size_t r,
                  std::mt19937_64& rng) {
  if (!node.has(key)) return random_frame(n, r, rng);
  const Dense m = node.matrix(key);
  if (m.rows != n || m.cols != r) {
    node.fail(key, "expected an " + std::to_string(n) + " x " + std::to_string(r) + " frame");
  }
  return orthonormalize(m, node.path() + "/" + key);
}

struct PairSetup {
  System sys;
  std::size_t r;
  double mu, t_end, dt;
  Dense u1, s1, u2, s2;
};

PairSetup pair_setup(const CheckEntry& entry, const Node& root, bool same_span,
                     double default_t_end) {
  const Node& node = entry.node;
  PairSetup ps{check_system(entry, root), 0, 0, 0, 0, {}, {}, {}, {}};
  ps.r = rank_field(node, "r", ps.sys.n, 1);
  ps.mu = node.number("mu", 1.0);
  if (ps.mu < 0.0) node.fail("mu", "must be non-negative");
  ps.t_end = node.positive("t_end", default_t_end);
  ps.dt = node.positive("dt", 1e-3);
  std::mt19937_64 rng(entry.seed);
  ps.u1 = frame_field(node, "u1", ps.sys.n, ps.r, rng);
  ps.u2 = same_span ? ps.u1 : frame_field(node, "u2", ps.sys.n, ps.r, rng);
  ps.s1 = node.has("s1") ? square_or_scaled(node, "s1", ps.r, 1.0) : random_spd(ps.r, rng);
  ps.s2 = node.has("s2") ? square_or_scaled(node, "s2", ps.r, 1.0) : random_spd(ps.r, rng);
  return ps;
}

CheckOutcome run_check(const CheckEntry& entry, const Node& root) {
  const Node& node = entry.node;
  rg_report* raw = nullptr;
  if (entry.type == "lemma1") {
    node.allow({"type", "name", "seed", "system", "p1", "p2", "t_end", "dt"});
    const System sys = check_system(entry, root);
    std::mt19937_64 rng(entry.seed);
    const Dense p1 = node.has("p1") ? square_or_scaled(node, "p1", sys.n, 1.0) : random_spd(sys.n, rng);
    const Dense p2 = node.has("p2") ? square_or_scaled(node, "p2", sys.n, 1.0) : random_spd(sys.n, rng);
    check(rg_check_lemma1(sys.get(), p1.ptr(), p2.ptr(), node.positive("t_end", 20.0),
                          node.positive("dt", 1e-3), &raw),
          node.path());
  } else if (entry.type == "lemma2") {
    node.allow({"type", "name", "seed", "A", "r", "delta", "t_end", "dt"});
    const Dense a = node.matrix("A");
    if (a.rows != a.cols) node.fail("A", "must be square");
    const std::size_t r = rank_field(node, "r", a.rows, 1);
    check(rg_check_lemma2(a.rows, a.ptr(), r, node.positive("delta", 1e-3),
                          node.positive("t_end", 5.0), node.positive("dt", 1e-3), entry.seed, &raw),
          node.path());
  } else if (entry.type == "counter-example") {
    node.allow({"type", "name", "seed", "system", "r", "mu", "angle", "u1", "u2", "s1", "s2",
                "t_end", "dt"});
    System sys = node.has("system") ? load_system(node.at("system"))
                                    : generate_system("skew", {{"omega", {0.0, 0.0, 1.0}}},
                                                      node.path() + "/system");
    const std::size_t r = rank_field(node, "r", sys.n, 1);
    const double mu = node.number("mu", 0.0);
    Dense u1 = canonical_frame(sys.n, r);
    Dense u2 = u1;
    const double angle = node.number("angle", 0.3);
    if (node.has("u1")) u1 = orthonormalize(node.matrix("u1"), node.path() + "/u1");
    if (node.has("u2")) {
      u2 = orthonormalize(node.matrix("u2"), node.path() + "/u2");
    } else {
      // Rotate the first column towards the last coordinate.
      u2 = u1;
      u2(0, 0) = std::cos(angle);
      u2(sys.n - 1, 0) = std::sin(angle);
      u2 = orthonormalize(u2, node.path() + "/angle");
    }
    const Dense s1 = square_or_scaled(node, "s1", r, 1.0);
    const Dense s2 = square_or_scaled(node, "s2", r, 1.0);
    if (u1.rows != sys.n || u2.rows != sys.n || u1.cols != r || u2.cols != r) {
      node.fail("u1", "frames must be n x r");
    }
    check(rg_check_constant_distance(sys.get(), r, mu, u1.ptr(), s1.ptr(), u2.ptr(), s2.ptr(),
                                     node.positive("t_end", 10.0), node.positive("dt", 1e-3), &raw),
          node.path());
  } else if (entry.type == "fixed-span") {
    node.allow({"type", "name", "seed", "system", "r", "mu", "u1", "s1", "s2", "t_end", "dt"});
    const PairSetup ps = pair_setup(entry, root, true, 10.0);
    check(rg_check_fixed_span(ps.sys.get(), ps.r, ps.mu, ps.u1.ptr(), ps.s1.ptr(), ps.u2.ptr(),
                              ps.s2.ptr(), ps.t_end, ps.dt, &raw),
          node.path());
  } else if (entry.type == "eventual") {
    node.allow({"type", "name", "seed", "system", "r", "mu", "u1", "u2", "s1", "s2", "t_end",
                "dt"});
    const PairSetup ps = pair_setup(entry, root, false, 30.0);
    check(rg_check_eventual_contraction(ps.sys.get(), ps.r, ps.mu, ps.u1.ptr(), ps.s1.ptr(),
                                        ps.u2.ptr(), ps.s2.ptr(), ps.t_end, ps.dt, &raw),
          node.path());
  } else {
    node.fail("type", "unknown check type '" + entry.type +
                          "' (expected lemma1, lemma2, counter-example, fixed-span or eventual)");
  }
  ReportHandle rep(raw);
  return collect(entry.name, rep.get());
}

// Runs jobs on up to `threads` workers; results keep the input order and
// the first exception (in input order) is rethrown.
template <class T>
std::vector<T> run_parallel(const std::vector<std::function<T()>>& jobs, unsigned threads) {
  std::vector<T> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = jobs[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < count; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

int cmd_contraction(const nlohmann::json& config, const RunContext& ctx) {
  Run run(config, ctx, {"system", "checks", "seed", "plots"});
  const Node checks = run.root.at("checks");
  if (!checks.json().is_array() || checks.json().empty()) {
    run.root.fail("checks", "expected a non-empty array");
  }
  std::vector<CheckEntry> entries;
  std::map<std::string, int> used;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const Node c = checks.at(i);
    const std::string type = c.string("type");
    std::string name = c.string("name", type == "counter-example" ? std::string("constant-distance") : type);
    if (name.empty() || name.find_first_of("/\\=: \t") != std::string::npos) {
      c.fail("name", "must be non-empty without spaces, '/', '=' or ':'");
    }
    if (used[name]++) c.fail("name", "duplicate check name '" + name + "'");
    const std::uint64_t seed = ctx.seed ? *ctx.seed + i : c.seed("seed", run.seed + i);
    entries.push_back({c, type, name, seed});
  }

  std::vector<std::function<CheckOutcome()>> jobs;
  for (const auto& entry : entries) jobs.push_back([&entry, &run] { return run_check(entry, run.root); });
  const auto outcomes = run_parallel(jobs, ctx.threads);

  std::vector<std::string> summary;
  bool all = true;
  for (const auto& o : outcomes) {
    CsvWriter csv(run.file(o.name + ".csv"),
                  {"t", "distance", "grassmann_component", "cone_component", "bound"});
    std::vector<double> t, d, b;
    for (const auto& row : o.rows) {
      csv.row({row[0], row[1], row[2], row[3], row[4]});
      t.push_back(row[0]);
      d.push_back(row[1]);
      b.push_back(row[4]);
    }
    csv.save();
    if (run.plots) {
      std::vector<PlotSeries> series{{"distance", d}};
      if (std::any_of(b.begin(), b.end(), [](double v) { return std::isfinite(v); })) {
        series.push_back({"bound", b});
      }
      write_svg_plot(run.file(o.name + ".svg"), o.name, t, series, true);
    }
    for (const auto& [k, v] : o.summary) summary.push_back(k + "=" + v);
    std::cout << o.name << ": " << (o.passed ? "PASS" : "FAIL") << "\n";
    all = all && o.passed;
  }
  write_lines(run.file("summary.txt"), summary);
  return all ? kExitOk : kExitCheckFailed;
}

// --------------------------------------------------------------- compare

struct CompareRun {
  std::vector<FilterRow> full_rows;
  std::vector<FilterRow> lowrank_rows;
  Dense final_u;
  double range_condition = kNaN;
};

struct CompareParams {
  long r;
  double kappa, sigma, g, dt, t_end, mu, s0, p0;
  long sensors;
  std::size_t record_every;
  long timing_steps, timing_repeats;
};

System heat_system(long n, const CompareParams& cp) {
  const nlohmann::json params = {{"n", n}, {"kappa", cp.kappa}, {"sensors", cp.sensors},
                                 {"sigma", cp.sigma}, {"g", cp.g}};
  return generate_system("heat1d", params, "/n");
}

CompareRun compare_one(long n, const CompareParams& cp, std::uint64_t seed, unsigned threads) {
  const System sys = heat_system(n, cp);
  const auto r = static_cast<std::size_t>(cp.r);
  const std::size_t steps = static_cast<std::size_t>(std::llround(cp.t_end / cp.dt));
  const Truth truth = simulate(sys, std::vector<double>(sys.n, 0.0), cp.t_end, cp.dt, seed);
  const auto dominant = top_subspace(sys.matrix('A'), r, "dominant subspace of A");
  if (!dominant) throw ConfigError("/r: heat1d has no eigen-gap at this rank");
  const std::vector<double> zero(sys.n, 0.0);

  std::vector<Sample> samples;
  samples.reserve(truth.length);
  for (std::size_t k = 0; k < truth.length; ++k) samples.push_back(sample(truth, sys, k));

  CompareRun out;
  auto run_full = [&] {
    const Dense p0 = Dense::identity(sys.n, cp.p0);
    rg_full_filter* raw = nullptr;
    check(rg_full_filter_create(sys.get(), zero.data(), p0.ptr(), 0.0, &raw), "full filter");
    FullFilterHandle f(raw);
    std::vector<double> x(sys.n);
    Dense p(sys.n, sys.n);
    for (std::size_t k = 0;; ++k) {
      if (record_row(k, steps, cp.record_every)) {
        double t = 0.0;
        check(rg_full_filter_state(f.get(), x.data(), p.ptr(), &t), "full filter state");
        const auto top = top_subspace(p, r, "covariance eigenspace");
        out.full_rows.push_back({t, difference(x, samples[k].x), trace(p),
                                 top ? grassmann(*top, *dominant) : kNaN});
      }
      if (k == steps) break;
      check(rg_full_filter_step(f.get(), samples[k].y.data(), samples[k + 1].t - samples[k].t),
            "full filter step");
    }
  };
  auto run_lowrank = [&] {
    const Dense s0 = Dense::identity(r, cp.s0);
    rg_lowrank_filter* raw = nullptr;
    check(rg_lowrank_filter_create(sys.get(), r, cp.mu, cp.dt, zero.data(), dominant->ptr(),
                                   s0.ptr(), 0.0, &raw),
          "low-rank filter");
    LowRankFilterHandle f(raw);
    for (std::size_t k = 0;; ++k) {
      if (record_row(k, steps, cp.record_every)) {
        const LowRankSnapshot snap = lowrank_state(f.get(), sys.n, r);
        out.lowrank_rows.push_back({snap.t, difference(snap.x, samples[k].x), trace(snap.s),
                                    grassmann(snap.u, *dominant)});
        if (k == steps) out.final_u = snap.u;
      }
      if (k == steps) break;
      check(rg_lowrank_filter_step(f.get(), samples[k].y.data()), "low-rank filter step");
    }
  };

  if (threads >= 2) {
    std::vector<std::function<int()>> jobs{[&] { run_full(); return 0; },
                                           [&] { run_lowrank(); return 0; }};
    run_parallel(jobs, 2);
  } else {
    run_full();
    run_lowrank();
  }

  // How far C U U' is from C at the final frame.
  const Dense c = sys.matrix('C');
  const Dense cuu = multiply(multiply(c, out.final_u), transpose(out.final_u));
  Dense diff = cuu;
  for (std::size_t i = 0; i < diff.data.size(); ++i) diff.data[i] -= c.data[i];
  out.range_condition = frobenius(diff) / std::max(frobenius(c), 1e-300);
  return out;
}

// Mean seconds per step, best over repeats.
template <class Step>
double time_steps(long steps, long repeats, Step&& step, const std::function<void()>& reset) {
  double best = std::numeric_limits<double>::infinity();
  for (long rep = 0; rep < repeats; ++rep) {
    reset();
    const auto start = std::chrono::steady_clock::now();
    for (long k = 0; k < steps; ++k) step(k);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    best = std::min(best, elapsed.count() / static_cast<double>(steps));
  }
  return best;
}

CompareTiming time_one(long n, const CompareParams& cp, std::uint64_t seed) {
  const System sys = heat_system(n, cp);
  const auto r = static_cast<std::size_t>(cp.r);
  const double t_end = cp.dt * static_cast<double>(cp.timing_steps);
  const Truth truth = simulate(sys, std::vector<double>(sys.n, 0.0), t_end, cp.dt, seed);
  std::vector<Sample> samples;
  for (std::size_t k = 0; k < truth.length; ++k) samples.push_back(sample(truth, sys, k));
  const std::vector<double> zero(sys.n, 0.0);
  const auto dominant = top_subspace(sys.matrix('A'), r, "dominant subspace of A");
  if (!dominant) throw ConfigError("/r: heat1d has no eigen-gap at this rank");

  const Dense p0 = Dense::identity(sys.n, cp.p0);
  FullFilterHandle full;
  const double full_sec = time_steps(
      cp.timing_steps, cp.timing_repeats,
      [&](long k) {
        check(rg_full_filter_step(full.get(), samples[k].y.data(), cp.dt), "full filter step");
      },
      [&] {
        rg_full_filter* raw = nullptr;
        check(rg_full_filter_create(sys.get(), zero.data(), p0.ptr(), 0.0, &raw), "full filter");
        full.reset(raw);
      });

  const Dense s0 = Dense::identity(r, cp.s0);
  LowRankFilterHandle low;
  const double low_sec = time_steps(
      cp.timing_steps, cp.timing_repeats,
      [&](long k) { check(rg_lowrank_filter_step(low.get(), samples[k].y.data()), "low-rank step"); },
      [&] {
        rg_lowrank_filter* raw = nullptr;
        check(rg_lowrank_filter_create(sys.get(), r, cp.mu, cp.dt, zero.data(), dominant->ptr(),
                                       s0.ptr(), 0.0, &raw),
              "low-rank filter");
        low.reset(raw);
      });
  return {n, cp.r, full_sec, low_sec, full_sec / low_sec};
}

}  // namespace

CompareResult run_compare(const nlohmann::json& config, const RunContext& ctx) {
  Run run(config, ctx,
          {"n", "r", "kappa", "sensors", "sigma", "g", "dt", "t_end", "mu", "s0", "p0", "seed",
           "record_every", "timing_steps", "timing_repeats", "plots"});
  const Node& root = run.root;

  std::vector<long> ns;
  if (!root.has("n")) root.fail("n", "missing required field");
  if (root.json().at("n").is_array()) {
    const auto values = root.numbers("n");
    for (double v : values) {
      if (v != std::floor(v)) root.fail("n", "entries must be integers");
      ns.push_back(static_cast<long>(v));
    }
    if (ns.empty()) root.fail("n", "expected at least one size");
  } else {
    ns.push_back(root.integer("n"));
  }
  for (long n : ns) {
    if (n < 100 || n > 1000) root.fail("n", "each n must lie in [100, 1000], got " + std::to_string(n));
  }
  if (std::adjacent_find(ns.begin(), ns.end(), [](long a, long b) { return a >= b; }) != ns.end()) {
    root.fail("n", "sizes must be strictly increasing");
  }

  CompareParams cp{};
  cp.r = root.integer("r", 10);
  for (long n : ns) {
    if (cp.r >= n) {
      root.fail("r", "r = " + std::to_string(cp.r) + " is not below n = " + std::to_string(n) +
                         "; the rank must satisfy r < n");
    }
    if (2 * cp.r > n) {
      root.fail("r", "r = " + std::to_string(cp.r) + " exceeds n/2 for n = " + std::to_string(n) +
                         "; compare requires r <= n/2");
    }
  }
  if (cp.r < 5 || cp.r > 20) root.fail("r", "r must lie in [5, 20], got " + std::to_string(cp.r));
  cp.kappa = root.positive("kappa", 1e-4);
  cp.sensors = root.integer("sensors", 4);
  if (cp.sensors < 1) root.fail("sensors", "must be at least 1");
  cp.sigma = root.positive("sigma", 0.1);
  cp.g = root.positive("g", 1.0);
  cp.dt = root.positive("dt", 0.01);
  cp.t_end = root.positive("t_end", 0.5);
  step_count(root, cp.t_end, cp.dt);
  cp.mu = root.number("mu", cp.g);
  if (cp.mu < 0.0) root.fail("mu", "must be non-negative");
  cp.s0 = root.positive("s0", 1.0);
  cp.p0 = root.positive("p0", 1.0);
  cp.record_every = static_cast<std::size_t>(root.integer("record_every", 5));
  if (cp.record_every < 1) root.fail("record_every", "must be at least 1");
  cp.timing_steps = root.integer("timing_steps", 5);
  cp.timing_repeats = root.integer("timing_repeats", 3);
  if (cp.timing_steps < 1) root.fail("timing_steps", "must be at least 1");
  if (cp.timing_repeats < 1) root.fail("timing_repeats", "must be at least 1");

  std::vector<std::string> summary;
  for (long n : ns) {
    run.log("compare: accuracy run n = " + std::to_string(n));
    const CompareRun cr = compare_one(n, cp, run.seed, ctx.threads);
    const auto projected = [&](const FilterRow& row) { return rms(project(cr.final_u, row.error)); };
    write_filter_csv(run, "full_n" + std::to_string(n), cr.full_rows, projected);
    write_filter_csv(run, "lowrank_n" + std::to_string(n), cr.lowrank_rows, projected);
    const std::string key = "compare.n" + std::to_string(n);
    summary.push_back(key + ".full_final_rmse=" + format_number(rms(cr.full_rows.back().error)));
    summary.push_back(key + ".lowrank_final_rmse=" + format_number(rms(cr.lowrank_rows.back().error)));
    summary.push_back(key + ".full_final_rmse_projected=" + format_number(projected(cr.full_rows.back())));
    summary.push_back(key + ".lowrank_final_rmse_projected=" +
                      format_number(projected(cr.lowrank_rows.back())));
    summary.push_back(key + ".range_condition=" + format_number(cr.range_condition));
  }

  CompareResult result;
  CsvWriter timing(run.file("timing.csv"),
                   {"n", "r", "full_step_seconds", "lowrank_step_seconds", "ratio"});
  for (long n : ns) {
    run.log("compare: timing n = " + std::to_string(n));
    const CompareTiming t = time_one(n, cp, run.seed);
    timing.row({static_cast<double>(t.n), static_cast<double>(t.r), t.full_step_seconds,
                t.lowrank_step_seconds, t.ratio});
    result.timings.push_back(t);
  }
  timing.save();

  result.ratio_increasing = true;
  for (std::size_t i = 1; i < result.timings.size(); ++i) {
    if (!(result.timings[i].ratio > result.timings[i - 1].ratio)) result.ratio_increasing = false;
  }
  summary.insert(summary.begin(),
                 std::string("compare=") + (result.ratio_increasing ? "PASS" : "FAIL"));
  for (const auto& t : result.timings) {
    summary.push_back("compare.n" + std::to_string(t.n) + ".ratio=" + format_number(t.ratio));
  }
  write_lines(run.file("summary.txt"), summary);

  if (run.plots && !result.timings.empty()) {
    std::vector<double> x, full, low;
    for (const auto& t : result.timings) {
      x.push_back(static_cast<double>(t.n));
      full.push_back(t.full_step_seconds);
      low.push_back(t.lowrank_step_seconds);
    }
    write_svg_plot(run.file("timing.svg"), "seconds per step vs n", x,
                   {{"full", full}, {"low-rank", low}}, true);
  }
  return result;
}

namespace {

int cmd_compare(const nlohmann::json& config, const RunContext& ctx) {
  const CompareResult res = run_compare(config, ctx);
  for (const auto& t : res.timings) {
    std::cout << "n=" << t.n << " full=" << format_number(t.full_step_seconds)
              << "s lowrank=" << format_number(t.lowrank_step_seconds)
              << "s ratio=" << format_number(t.ratio) << "\n";
  }
  std::cout << "compare: " << (res.ratio_increasing ? "PASS" : "FAIL") << "\n";
  return res.ratio_increasing ? kExitOk : kExitCheckFailed;
}

using Command = int (*)(const nlohmann::json&, const RunContext&);

const std::vector<std::pair<std::string, Command>>& command_table() {
  static const std::vector<std::pair<std::string, Command>> table{
      {"are-solve", cmd_are_solve},
      {"simulate-full", cmd_simulate_full},
      {"simulate-lowrank", cmd_simulate_lowrank},
      {"contraction", cmd_contraction},
      {"compare", cmd_compare}};
  return table;
}

}  // namespace

std::vector<std::string> subcommands() {
  std::vector<std::string> names;
  for (const auto& entry : command_table()) names.push_back(entry.first);
  return names;
}

int run_subcommand(const std::string& name, const nlohmann::json& config, const RunContext& ctx) {
  for (const auto& [key, fn] : command_table()) {
    if (key == name) {
      if (!config.is_object()) throw ConfigError("/: the config must be a JSON object");
      return fn(config, ctx);
    }
  }
  throw ConfigError("unknown subcommand '" + name + "'");
}

unsigned thread_cap() {
  const char* env = std::getenv("RICCATI_GEO_THREADS");
  if (env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0' || errno != 0 || v == 0 || v > 4096 || env[0] == '-') {
      throw ConfigError(std::string("RICCATI_GEO_THREADS must be a positive integer, got '") + env +
                        "'");
    }
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Riccati flow geometry experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  for (const auto& name : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->required();
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    RunContext ctx;
    ctx.out_dir = out_dir;
    ctx.seed = seed;
    ctx.threads = thread_cap();
    ctx.config_name = config_path;
    ctx.log = &std::cerr;

    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file");
    nlohmann::json config;
    try {
      config = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    return run_subcommand(name, config, ctx);
  } catch (const ConfigError& e) {
    std::cerr << "riccati-geo " << name << ": " << config_path << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "riccati-geo " << name << ": numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "riccati-geo " << name << ": " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace riccati_geo::cli
