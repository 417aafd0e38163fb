#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "commands.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace riccati_geo::cli;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "riccati_geo_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Invocation {
  int code;
  std::string out;
  std::string err;
};

Invocation invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "riccati-geo");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = main_entry(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str(), err.str()};
}

Invocation run_config(const std::string& cmd, const fs::path& dir, const std::string& config,
                      const std::string& out_name = "out") {
  const fs::path cfg = write_config(dir, config);
  return invoke({cmd, "--config", cfg.string(), "--out", (dir / out_name).string()});
}

const char* kSkew = R"({"checks": [{"type": "counter-example"}]})";

const char* kLowRank = R"({
  "system": {"generator": "heat1d", "params": {"n": 30, "kappa": 0.001, "sensors": 3, "sigma": 0.1}},
  "t_end": 1.0, "dt": 0.01, "r": 4, "mu": 1.0, "init": "random", "seed": 5, "plots": true
})";

}  // namespace

TEST_CASE("contraction on the skew scenario prints constant-distance: PASS") {
  const fs::path dir = scratch("skew");
  const Invocation inv = run_config("contraction", dir, kSkew);
  CHECK(inv.code == kExitOk);
  CHECK(inv.out.find("constant-distance: PASS") != std::string::npos);
  const std::string csv = slurp(dir / "out" / "constant-distance.csv");
  CHECK(csv.rfind("t,distance,grassmann_component,cone_component,bound\n", 0) == 0);
  CHECK(slurp(dir / "out" / "summary.txt").find("constant-distance=PASS\n") != std::string::npos);
}

TEST_CASE("are-solve on heat1d(n=5) reports a small residual") {
  const fs::path dir = scratch("are");
  const Invocation inv = run_config(
      "are-solve", dir, R"({"system": {"generator": "heat1d", "params": {"n": 5}}, "tol": 1e-10})");
  CHECK(inv.code == kExitOk);
  const std::string summary = slurp(dir / "out" / "summary.txt");
  const auto pos = summary.find("are-solve.residual=");
  REQUIRE(pos != std::string::npos);
  CHECK(std::stod(summary.substr(pos + 19)) < 1e-8);
  const std::string q = slurp(dir / "out" / "are_Q.csv");
  CHECK(q.rfind("i,j,value\n", 0) == 0);
  CHECK(std::count(q.begin(), q.end(), '\n') == 26);
}

TEST_CASE("identical config and seed give byte-identical CSVs") {
  const fs::path dir = scratch("determinism");
  REQUIRE(run_config("simulate-lowrank", dir, kLowRank, "a").code == kExitOk);
  REQUIRE(run_config("simulate-lowrank", dir, kLowRank, "b").code == kExitOk);
  for (const char* f : {"filter.csv", "estimates.csv", "summary.txt", "filter.svg"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  CHECK(slurp(dir / "a" / "filter.csv").rfind("t,rmse,rmse_projected,trace_cov,subspace_angle\n", 0) == 0);

  const fs::path cfg = write_config(dir, kLowRank);
  REQUIRE(invoke({"simulate-lowrank", "--config", cfg.string(), "--out", (dir / "c").string(),
                  "--seed", "6"})
              .code == kExitOk);
  CHECK(slurp(dir / "a" / "filter.csv") != slurp(dir / "c" / "filter.csv"));
}

TEST_CASE("simulate-full writes the filter schema") {
  const fs::path dir = scratch("full");
  const Invocation inv = run_config("simulate-full", dir, R"({
    "system": {"generator": "heat1d", "params": {"n": 10, "kappa": 0.01, "sensors": 2, "sigma": 0.2}},
    "t_end": 0.5, "dt": 0.01, "r": 3, "seed": 2, "record_every": 10})");
  CHECK(inv.code == kExitOk);
  const std::string csv = slurp(dir / "out" / "filter.csv");
  CHECK(csv.rfind("t,rmse,rmse_projected,trace_cov,subspace_angle\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("compare enforces r <= n/2 with a clear message") {
  const fs::path dir = scratch("compare_rank");
  const Invocation ok = run_config("compare", dir, R"({"n": [100, 120], "r": 20, "t_end": 0.1})");
  CHECK(ok.code == kExitOk);
  CHECK(fs::exists(dir / "out" / "full_n120.csv"));
  CHECK(fs::exists(dir / "out" / "lowrank_n100.csv"));
  CHECK(slurp(dir / "out" / "timing.csv").rfind("n,r,full_step_seconds,lowrank_step_seconds,ratio\n", 0) == 0);

  const Invocation bad = run_config("compare", dir, R"({"n": 100, "r": 99})");
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find("/r: r = 99 exceeds n/2") != std::string::npos);

  RunContext ctx;
  ctx.out_dir = dir / "ctx";
  CHECK_THROWS_WITH_AS(run_compare({{"n", 100}, {"r", 100}}, ctx), doctest::Contains("r < n"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(run_compare({{"n", 30}, {"r", 5}}, ctx), doctest::Contains("[100, 1000]"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(run_compare({{"n", 400}, {"r", 30}}, ctx), doctest::Contains("[5, 20]"),
                       ConfigError);
}

TEST_CASE("config errors name the offending field and exit 2") {
  const fs::path dir = scratch("config_errors");
  Invocation inv = run_config("contraction", dir, R"({"checks": [{"type": "counter-example", "colour": 1}]})");
  CHECK(inv.code == kExitUsage);
  CHECK(inv.err.find("/checks/0/colour: unknown field") != std::string::npos);

  inv = run_config("are-solve", dir, R"({"system": {"generator": "wave"}})");
  CHECK(inv.code == kExitUsage);
  CHECK(inv.err.find("/system") != std::string::npos);

  inv = run_config("are-solve", dir, "{ not json");
  CHECK(inv.code == kExitUsage);

  inv = run_config("simulate-lowrank", dir, R"({
    "system": {"generator": "heat1d", "params": {"n": 4}}, "t_end": 1, "dt": 0.3, "r": 2})");
  CHECK(inv.code == kExitUsage);
  CHECK(inv.err.find("/t_end") != std::string::npos);

  inv = run_config("contraction", dir, R"({"checks": [{"type": "lemma3"}]})");
  CHECK(inv.code == kExitUsage);
  CHECK(inv.err.find("/checks/0/type") != std::string::npos);

  CHECK(invoke({"are-solve"}).code == kExitUsage);
  CHECK(invoke({"frobnicate", "--config", "x"}).code == kExitUsage);
  CHECK(invoke({"are-solve", "--config", (dir / "missing.json").string()}).code == kExitUsage);
}

TEST_CASE("a failed check exits 1") {
  const fs::path dir = scratch("failed_check");
  // Far too short for the frames to reach the dominant plane.
  const Invocation inv = run_config("contraction", dir, R"({"seed": 4, "checks": [{
    "type": "eventual", "r": 2, "t_end": 0.5, "dt": 0.01,
    "system": {"A": [[5,0,0,0,0],[0,4,0,0,0],[0,0,3,0,0],[0,0,0,2,0],[0,0,0,0,1]],
               "C": [[1,0,0,0,0],[0,1,0,0,0]]}}]})");
  CHECK(inv.code == kExitCheckFailed);
  CHECK(inv.out.find("eventual: FAIL") != std::string::npos);
}

TEST_CASE("numerical failures exit 3") {
  const fs::path dir = scratch("numeric");
  const Invocation inv = run_config("simulate-full", dir, R"({
    "system": {"A": [[10000.0]], "C": [[1.0]]}, "t_end": 10.0, "dt": 0.01, "r": 1})");
  CHECK(inv.code == kExitUsage);  // r must be < n

  const Invocation blow = run_config("simulate-full", dir, R"({
    "system": {"A": [[10000.0, 0], [0, 1]], "C": [[1.0, 1.0]]}, "t_end": 10.0, "dt": 0.01, "r": 1})");
  CHECK(blow.code == kExitNumeric);
  CHECK(blow.err.find("at t =") != std::string::npos);
}

TEST_CASE("RICCATI_GEO_THREADS must be a positive integer") {
  const fs::path dir = scratch("threads");
  setenv("RICCATI_GEO_THREADS", "zero", 1);
  CHECK_THROWS_AS(thread_cap(), ConfigError);
  CHECK(run_config("contraction", dir, kSkew).code == kExitUsage);
  setenv("RICCATI_GEO_THREADS", "0", 1);
  CHECK_THROWS_AS(thread_cap(), ConfigError);
  setenv("RICCATI_GEO_THREADS", "3", 1);
  CHECK(thread_cap() == 3u);
  unsetenv("RICCATI_GEO_THREADS");
  CHECK(thread_cap() >= 1u);
}

TEST_CASE("parallel checks match a sequential run byte for byte") {
  const fs::path dir = scratch("parallel");
  const std::string cfg = R"({"seed": 8, "checks": [
    {"type": "counter-example"},
    {"type": "lemma2", "A": [[4,0,0],[0,2,0],[0,0,1]], "r": 1, "t_end": 3.0, "dt": 0.001},
    {"type": "fixed-span", "name": "span", "r": 1, "t_end": 2.0, "dt": 0.001,
     "system": {"generator": "random-observable", "params": {"n": 3, "seed": 2}}}]})";
  setenv("RICCATI_GEO_THREADS", "1", 1);
  REQUIRE(run_config("contraction", dir, cfg, "seq").code == kExitOk);
  setenv("RICCATI_GEO_THREADS", "3", 1);
  REQUIRE(run_config("contraction", dir, cfg, "par").code == kExitOk);
  unsetenv("RICCATI_GEO_THREADS");
  for (const char* f : {"constant-distance.csv", "lemma2.csv", "span.csv", "summary.txt"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "seq" / f) == slurp(dir / "par" / f));
  }
}
