#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qlab/cli/cache.hpp"
#include "qlab/cli/config.hpp"
#include "qlab/cli/report.hpp"
#include "qlab/cli/run.hpp"

using namespace qlab;
using namespace qlab::cli;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("qlab_test_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_error(const std::string& text) {
  try {
    (void)parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "(accepted)";
}

// Mixed config: an exact check, a Monte Carlo norm and a sweep.
const char* kMixed = R"j({
  "seed": 11,
  "checks": [
    {"check": "thm3", "id": "ind", "function": ["indicator(0,1)", "indicator(0,3)"], "p": [1, 2],
     "expect": [{"metric": "ratio", "op": "<=", "value": 1, "tol": 1e-9}]},
    {"check": "norms", "id": "mcnorm", "function": "hat(0,1)", "beta": 1, "method": "mc", "samples": 20000,
     "points": 24, "weak": [2]},
    {"check": "divergence", "id": "div", "p": 2, "q": 2, "Lambda": [10, 100, 1000],
     "expect": [{"metric": "fit.value^q.gamma", "op": "~", "value": 4, "tol": 1e-9}]}
  ]
})j";

}  // namespace

TEST_CASE("config errors name the offending key") {
  CHECK_THAT(config_error(R"j({"checks": []})j"), ContainsSubstring("empty check list"));
  CHECK_THAT(config_error(R"j({"seed": 1})j"), ContainsSubstring("config.checks: required"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "function": "hat(0,1)", "pp": 2}]})j"),
             ContainsSubstring("checks[0].pp"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm5", "function": "hat(0,1)", "s1": 0.25, "p1": 2, "theta": 0.5}]})j"),
             ContainsSubstring("s1*p1 >= 1"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "nosuch"}]})j"), ContainsSubstring("checks[0].check"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "p": 2}]})j"), ContainsSubstring("checks[0].function"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "function": "hat(0", "p": 2}]})j"),
             ContainsSubstring("checks[0].function"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "function": "hat(0,1)", "p": 2, "method": "fast"}]})j"),
             ContainsSubstring("checks[0].method"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "id": "../x", "function": "hat(0,1)", "p": 2}]})j"),
             ContainsSubstring("checks[0].id"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "id": "a", "function": "hat(0,1)", "p": 2},
                                         {"check": "thm3", "id": "a", "function": "hat(0,1)", "p": 1}]})j"),
             ContainsSubstring("a"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "thm3", "function": "hat(0,1)", "p": 2,
                                          "expect": [{"metric": "ratio", "op": "<", "value": 1}]}]})j"),
             ContainsSubstring("checks[0].expect"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "rate-wjk", "s1": 0.5, "p1": 2, "theta": 0.5, "q": 4, "j": [1, 2, 3]}]})j"),
             ContainsSubstring("s1*p1"));
  CHECK_THAT(config_error(R"j({"checks": [{"check": "divergence", "p": 2, "q": 2, "Lambda": [100, 10]}]})j"),
             ContainsSubstring("checks[0].Lambda"));
  CHECK_THAT(config_error(R"j({"workers": 0, "checks": [{"check": "thm3", "function": "hat(0,1)", "p": 2}]})j"),
             ContainsSubstring("config.workers"));
  CHECK_THAT(config_error("{not json"), ContainsSubstring("config"));
  CHECK_THROWS_AS(load_config("/nonexistent/qlab.json"), ConfigError);
}

TEST_CASE("kinds round-trip through their names") {
  for (Kind k : {Kind::bvy, Kind::thm3, Kind::thm4, Kind::thm5, Kind::thm6, Kind::rho, Kind::divergence, Kind::rate_uk,
                 Kind::rate_wjk, Kind::norms})
    CHECK(parse_kind(to_string(k)) == k);
  CHECK_FALSE(parse_kind("thm-3"));
}

TEST_CASE("running the exact indicator check") {
  const auto cfg = parse_config_text(slurp(fs::path(QLAB_SOURCE_DIR) / "configs" / "thm3_indicator.json"));
  const auto r = run_config(cfg, RunOptions{});
  REQUIRE(r.entries.size() == 1);
  REQUIRE(r.entries[0].reports.size() == 1);
  CHECK(r.entries[0].reports[0].ratio.value() == Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK(r.pass());
  const std::string text = render_text(r);
  CHECK_THAT(text, ContainsSubstring("overall: pass"));
}

TEST_CASE("failed assertions fail the run; unknown metrics are config errors") {
  auto cfg = parse_config_text(R"j({"checks": [{"check": "thm3", "id": "t", "function": "indicator(0,1)", "p": 2,
    "expect": [{"metric": "ratio", "op": ">=", "value": 0.8}]}]})j");
  const auto r = run_config(cfg, RunOptions{});
  CHECK_FALSE(r.pass());
  CHECK_THAT(render_text(r), ContainsSubstring("FAIL"));
  cfg = parse_config_text(R"j({"checks": [{"check": "thm3", "id": "t", "function": "indicator(0,1)", "p": 2,
    "expect": [{"metric": "extra.nosuch", "op": ">=", "value": 0}]}]})j");
  CHECK_THROWS_AS(run_config(cfg, RunOptions{}), ConfigError);
}

TEST_CASE("job seeds depend on the job identity only") {
  CHECK(job_seed(1, "a", 0) == job_seed(1, "a", 0));
  CHECK(job_seed(1, "a", 0) != job_seed(1, "a", 1));
  CHECK(job_seed(1, "a", 0) != job_seed(1, "b", 0));
  CHECK(job_seed(1, "a", 0) != job_seed(2, "a", 0));
}

TEST_CASE("cache identity") {
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.0);
  const auto g = log_grid(0.1, 10, 16);
  const auto id = cache_identity(q, g, Method::monte_carlo, 1000, 7);
  CHECK(cache_key(id) == cache_key(cache_identity(q, g, Method::monte_carlo, 1000, 7)));
  CHECK(cache_key(id) != cache_key(cache_identity(q, g, Method::monte_carlo, 1000, 8)));
  CHECK(cache_key(id) != cache_key(cache_identity(q, g, Method::monte_carlo, 2000, 7)));
  CHECK(cache_key(id) != cache_key(cache_identity(q, g, Method::grid, 1000, 7)));
  CHECK(cache_key(id) != cache_key(cache_identity(QuotientSpec(FunctionSpec::hat(0, 1), 1.5), g, Method::monte_carlo, 1000, 7)));
  CHECK(cache_key(id) != cache_key(cache_identity(q, log_grid(0.1, 10, 17), Method::monte_carlo, 1000, 7)));
  CHECK(cache_key(id).size() == 16);
}

TEST_CASE("second run is served from the cache; output path is not part of the key") {
  const fs::path dir = scratch("hits");
  const auto cfg = parse_config_text(kMixed);
  std::ostringstream warn;
  RunResult first, second;
  {
    DiskCache c(dir / "cache", &warn);
    RunOptions ro;
    ro.seed = cfg.seed;
    ro.store = &c;
    first = run_config(cfg, ro);
    CHECK(c.misses() > 0);
    CHECK(c.hits() == 0);
    write_outputs(first, {"t", ro.seed, 1, "run"}, dir / "out1");
  }
  {
    DiskCache c(dir / "cache", &warn);
    RunOptions ro;
    ro.seed = cfg.seed;
    ro.store = &c;
    second = run_config(cfg, ro);
    CHECK(c.misses() == 0);
    CHECK(c.hits() > 0);
    write_outputs(second, {"t", ro.seed, 1, "run"}, dir / "out2");
  }
  CHECK(warn.str().empty());
  CHECK(slurp(dir / "out1" / "report.json") == slurp(dir / "out2" / "report.json"));
  {
    DiskCache c(dir / "cache", &warn);
    RunOptions ro;
    ro.seed = cfg.seed + 1;
    ro.store = &c;
    (void)run_config(cfg, ro);
    CHECK(c.misses() > 0);  // the Monte Carlo entry follows the seed
  }
  fs::remove_all(dir);
}

TEST_CASE("cached distribution functions match a fresh computation") {
  const fs::path dir = scratch("sound");
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.0);
  const auto g = log_grid(0.05, 2, 24);
  HarnessOptions o;
  o.method = Method::grid;
  const auto fresh = compute_distribution(q, g, o);
  DiskCache c(dir);
  o.store = &c;
  (void)compute_distribution(q, g, o);
  const auto cached = compute_distribution(q, g, o);
  CHECK(c.hits() == 1);
  CHECK(cached.mu() == fresh.mu());
  CHECK(cached.lambdas() == fresh.lambdas());
  fs::remove_all(dir);
}

TEST_CASE("corrupt cache entries are recomputed with a warning") {
  const fs::path dir = scratch("corrupt");
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.0);
  const auto g = log_grid(0.05, 2, 24);
  HarnessOptions o;
  o.method = Method::grid;
  std::ostringstream warn;
  DiskCache c(dir, &warn);
  o.store = &c;
  const auto good = compute_distribution(q, g, o);
  const fs::path csv = dir / (cache_key(cache_identity(q, g, Method::grid, 0, 0)) + ".csv");
  REQUIRE(fs::exists(csv));
  { std::ofstream(csv, std::ios::trunc) << "lambda,mu,stderr\n0.1,garbage,0\n"; }
  const auto again = compute_distribution(q, g, o);
  CHECK_THAT(warn.str(), ContainsSubstring("corrupt cache entry"));
  CHECK(again.mu() == good.mu());
  CHECK(c.misses() == 2);
  // overwritten: the next lookup is a clean hit
  warn.str("");
  (void)compute_distribution(q, g, o);
  CHECK(c.hits() == 1);
  CHECK(warn.str().empty());
  fs::remove_all(dir);
}

TEST_CASE("cache gc removes temporaries and half entries") {
  const fs::path dir = scratch("gc");
  DiskCache c(dir);
  HarnessOptions o;
  o.store = &c;
  (void)compute_distribution(QuotientSpec(FunctionSpec::indicator(0, 1), 1.0), log_grid(0.1, 10, 20), o);
  { std::ofstream(dir / "abc.csv.tmp12_0") << "x"; }
  { std::ofstream(dir / "0000000000000000.csv") << "lambda,mu,stderr\n"; }
  CHECK(c.gc() == 2);
  std::size_t left = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++left;
  CHECK(left == 2);
  CHECK(c.gc(true) == 2);
  fs::remove_all(dir);
}

TEST_CASE("identical config and seed give identical reports") {
  const auto cfg = parse_config_text(kMixed);
  RunOptions ro;
  ro.seed = 5;
  const ReportHeader h{"fixed", 5, 1, "run"};
  const std::string a = to_json(run_config(cfg, ro), h).dump(2);
  const std::string b = to_json(run_config(cfg, ro), h).dump(2);
  CHECK(a == b);
  ro.seed = 6;
  CHECK(to_json(run_config(cfg, ro), h).dump(2) != a);
}

TEST_CASE("report formats") {
  const auto cfg = parse_config_text(kMixed);
  const auto r = run_config(cfg, RunOptions{});
  CHECK(r.pass());
  const auto j = to_json(r, {"2026-01-01T00:00:00Z", 0, 1, "run"});
  CHECK(j["tool"] == "qlab");
  CHECK(j["format"] == 1);
  CHECK(j["pass"] == true);
  CHECK(j["entries"].size() == 3);
  const std::string csv = reports_csv(r);
  CHECK(csv.rfind("id,check,function,params,method,lhs,rhs,ratio\n", 0) == 0);
  CHECK_THAT(csv, ContainsSubstring("indicator(0,3)"));
  CHECK_THAT(csv, ContainsSubstring("weak(2)"));
  REQUIRE(r.entries[2].sweep);
  const std::string sw = sweep_csv(*r.entries[2].sweep);
  CHECK(sw.rfind("Lambda,value,value^q\n", 0) == 0);
  const fs::path dir = scratch("out");
  write_outputs(r, {"t", 0, 1, "run"}, dir);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "reports.csv"));
  CHECK(slurp(dir / "div.csv") == sw);
  fs::remove_all(dir);
}
