#include "riccati_geo/scenario.hpp"

#include "riccati_geo/error.hpp"
#include "riccati_geo/rk4.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <sstream>

namespace riccati_geo {

namespace {

class Params {
 public:
  Params(const std::string& generator, const ParamMap& map, std::set<std::string> known)
      : generator_(generator), map_(map) {
    for (const auto& [key, value] : map_) {
      if (!known.count(key)) {
        throw Error(ErrorCode::InvalidInput,
                    generator_ + ": unknown parameter '" + key + "'");
      }
    }
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  double scalar(const std::string& key, double fallback) const {
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    if (it->second.size() != 1) {
      throw Error(ErrorCode::InvalidInput, generator_ + ": parameter '" + key + "' must be a scalar");
    }
    return it->second.front();
  }

  Index count(const std::string& key, std::optional<Index> fallback) const {
    if (!has(key)) {
      if (!fallback) throw Error(ErrorCode::InvalidInput, generator_ + ": missing parameter '" + key + "'");
      return *fallback;
    }
    const double v = scalar(key, 0.0);
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw Error(ErrorCode::InvalidInput,
                  generator_ + ": parameter '" + key + "' must be a positive integer");
    }
    return static_cast<Index>(v);
  }

  const std::vector<double>& vec(const std::string& key) const { return map_.at(key); }

 private:
  std::string generator_;
  const ParamMap& map_;
};

LtiSystem heat1d(const ParamMap& map) {
  const Params p("heat1d", map, {"n", "kappa", "sensors", "sigma", "g", "source"});
  const Index n = p.count("n", std::nullopt);
  const double kappa = p.scalar("kappa", 1.0);
  const Index sensors = p.count("sensors", Index{2});
  const double sigma = p.scalar("sigma", 1.0);
  const double g = p.scalar("g", 1.0);
  const double source = p.scalar("source", 0.0);
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidInput, "heat1d: kappa must be positive");
  if (sensors > n) throw Error(ErrorCode::InvalidInput, "heat1d: more sensors than nodes");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidInput, "heat1d: sigma must be positive");

  const double scale = kappa * static_cast<double>((n + 1) * (n + 1));
  Matrix a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    a(i, i) = -2.0 * scale + source;
    if (i > 0) a(i, i - 1) = scale;
    if (i + 1 < n) a(i, i + 1) = scale;
  }
  Matrix c = Matrix::Zero(sensors, n);
  // Sensor 0 sits on the end node, which alone makes the chain observable.
  for (Index k = 0; k < sensors; ++k) {
    c(k, (k * n) / sensors) = 1.0;
  }
  return LtiSystem(std::move(a), std::move(c), g * Matrix::Identity(n, n),
                   sigma * Matrix::Identity(sensors, sensors));
}

LtiSystem random_observable(const ParamMap& map) {
  const Params p("random-observable", map, {"n", "p", "spectrum", "skew", "sigma", "seed"});
  const Index n = p.count("n", std::nullopt);
  const Index outputs = p.count("p", Index{1});
  const double skew = p.scalar("skew", 0.5);
  const double sigma = p.scalar("sigma", 1.0);
  const double seed = p.scalar("seed", 0.0);
  if (!(seed >= 0.0)) throw Error(ErrorCode::InvalidInput, "random-observable: seed must be >= 0");
  Vector spectrum(n);
  if (p.has("spectrum")) {
    const auto& s = p.vec("spectrum");
    if (static_cast<Index>(s.size()) != n) {
      throw Error(ErrorCode::InvalidInput, "random-observable: spectrum must have n entries");
    }
    for (Index i = 0; i < n; ++i) spectrum(i) = s[static_cast<std::size_t>(i)];
  } else {
    for (Index i = 0; i < n; ++i) spectrum(i) = -static_cast<double>(i + 1);
  }

  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto draw = [&](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
  };
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Matrix q = qf(draw(n, n));
    const Matrix z = draw(n, n);
    Matrix a = q * spectrum.asDiagonal() * q.transpose();
    a = symmetrize(a) + skew * 0.5 * (z - z.transpose());
    Matrix c = draw(outputs, n);
    if (is_observable(a, c, 1e-8)) {
      return LtiSystem(std::move(a), std::move(c), Matrix::Identity(n, n),
                       sigma * Matrix::Identity(outputs, outputs));
    }
  }
  throw Error(ErrorCode::InvalidInput, "random-observable: could not draw an observable pair");
}

LtiSystem skew_system(const ParamMap& map) {
  const Params p("skew", map, {"n", "omega", "rates"});
  const Index n = p.count("n", Index{3});
  Matrix a = Matrix::Zero(n, n);
  if (p.has("omega")) {
    const auto& w = p.vec("omega");
    if (n != 3 || w.size() != 3) {
      throw Error(ErrorCode::InvalidInput, "skew: omega needs n = 3 and three entries");
    }
    a << 0.0, -w[2], w[1],
         w[2], 0.0, -w[0],
         -w[1], w[0], 0.0;
  } else {
    std::vector<double> rates(static_cast<std::size_t>(n / 2), 1.0);
    if (p.has("rates")) rates = p.vec("rates");
    if (static_cast<Index>(rates.size()) != n / 2) {
      throw Error(ErrorCode::InvalidInput, "skew: rates needs floor(n/2) entries");
    }
    for (Index b = 0; b < n / 2; ++b) {
      a(2 * b, 2 * b + 1) = -rates[static_cast<std::size_t>(b)];
      a(2 * b + 1, 2 * b) = rates[static_cast<std::size_t>(b)];
    }
  }
  return LtiSystem(std::move(a), Matrix::Zero(1, n), Matrix::Zero(n, n), Matrix::Identity(1, 1));
}

}  // namespace

std::vector<std::string> scenario_names() { return {"heat1d", "random-observable", "skew"}; }

LtiSystem generate_scenario(const std::string& name, const ParamMap& params) {
  if (name == "heat1d") return heat1d(params);
  if (name == "random-observable") return random_observable(params);
  if (name == "skew") return skew_system(params);
  throw Error(ErrorCode::InvalidInput, "unknown scenario generator '" + name + "'");
}

TruthTrace simulate_truth(const LtiSystem& sys, const Vector& x0, double t_end, double dt,
                          std::uint64_t seed, const TruthOptions& opts) {
  if (x0.size() != sys.n()) {
    throw Error(ErrorCode::DimensionMismatch, "simulate_truth: initial state has wrong dimension");
  }
  const long steps = step_count(t_end, dt);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto draw = [&](Index size) {
    Vector v(size);
    for (Index i = 0; i < size; ++i) v(i) = normal(rng);
    return v;
  };

  TruthTrace trace;
  trace.times.reserve(static_cast<std::size_t>(steps) + 1);
  trace.states.reserve(static_cast<std::size_t>(steps) + 1);
  trace.measurements.reserve(static_cast<std::size_t>(steps) + 1);
  Vector x = x0;
  const double sqrt_dt = std::sqrt(dt);
  for (long k = 0;; ++k) {
    const double t = k == steps ? t_end : static_cast<double>(k) * dt;
    std::optional<LtiSystem> frozen;
    if (sys.is_time_varying()) frozen = sys.at(t);
    const LtiSystem& s = frozen ? *frozen : sys;
    Vector y = s.C() * x;
    if (opts.measurement_noise) y += s.H() * draw(s.p()) / sqrt_dt;
    if (!x.allFinite() || !y.allFinite()) {
      std::ostringstream os;
      os << "simulate_truth: numeric overflow at t = " << t;
      throw IntegrationError(t, os.str());
    }
    trace.times.push_back(t);
    trace.states.push_back(x);
    trace.measurements.push_back(std::move(y));
    if (k == steps) break;
    const double h = (k + 1 == steps) ? t_end - t : dt;
    Vector next = x + h * (s.A() * x);
    if (opts.process_noise) next += std::sqrt(h) * (s.G() * draw(s.m()));
    x = std::move(next);
  }
  return trace;
}

}  // namespace riccati_geo
