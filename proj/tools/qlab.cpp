// qlab command line: run experiment configs, evaluate single norms, dump
// distribution functions, maintain the cache.
//
// Exit codes: 0 all assertions hold, 2 some assertion failed, 1 usage,
// config or parameter error.

#include <chrono>
#include <ctime>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qlab/cli/cache.hpp"
#include "qlab/cli/config.hpp"
#include "qlab/cli/report.hpp"
#include "qlab/cli/run.hpp"
#include "qlab/dfio.hpp"

namespace {

using namespace qlab;
using namespace qlab::cli;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string format = "text";
  std::string cache;
  bool no_cache = false;
};

struct AdHoc {
  std::string function;
  std::optional<double> beta, s, p;
  std::vector<std::string> lorentz;  // "p,q"
  std::vector<double> weak;
  std::string method;
  std::optional<std::uint64_t> samples;
  std::optional<std::size_t> points;
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "experiment config (JSON)");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "root seed, overrides the config");
  app->add_option("--workers", c.workers, "worker threads, overrides the config")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "output directory, overrides the config");
  app->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv", "text"}));
  app->add_option("--cache", c.cache, "cache directory, overrides the config");
  app->add_flag("--no-cache", c.no_cache, "do not read or write the cache");
}

void add_adhoc(CLI::App* app, AdHoc& a) {
  app->add_option("--function", a.function, "function spec, e.g. hat(0,1)");
  app->add_option("--beta", a.beta, "quotient exponent");
  app->add_option("--s", a.s, "smoothness; beta = N/p + s");
  app->add_option("--p", a.p, "integrability paired with --s");
  app->add_option("--lorentz", a.lorentz, "Lorentz pair p,q (q may be inf); repeatable");
  app->add_option("--weak", a.weak, "weak-type exponent; repeatable");
  app->add_option("--method", a.method, "exact | grid | mc");
  app->add_option("--samples", a.samples, "Monte Carlo samples");
  app->add_option("--points", a.points, "lambda grid size");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// A norms entry built from flags goes through the same validation as a config.
ExperimentConfig adhoc_config(const AdHoc& a) {
  if (a.function.empty()) throw ConfigError("--function or --config is required");
  json e = {{"check", "norms"}, {"id", "norm"}, {"function", a.function}};
  if (a.beta) e["beta"] = *a.beta;
  if (a.s) e["s"] = *a.s;
  if (a.p) e["p"] = *a.p;
  if (!a.method.empty()) e["method"] = a.method;
  if (a.samples) e["samples"] = *a.samples;
  if (a.points) e["points"] = *a.points;
  if (!a.lorentz.empty()) {
    json l = json::array();
    for (const std::string& pq : a.lorentz) {
      const auto comma = pq.find(',');
      if (comma == std::string::npos) throw ConfigError("--lorentz: expected p,q (got '" + pq + "')");
      const std::string qs = pq.substr(comma + 1);
      try {
        l.push_back({std::stod(pq.substr(0, comma)), qs == "inf" ? json("inf") : json(std::stod(qs))});
      } catch (const std::exception&) {
        throw ConfigError("--lorentz: expected p,q (got '" + pq + "')");
      }
    }
    e["lorentz"] = l;
  }
  if (!a.weak.empty()) e["weak"] = a.weak;
  if (a.lorentz.empty() && a.weak.empty()) e["weak"] = std::vector<double>{a.p.value_or(1.0)};
  return parse_config(json{{"checks", json::array({e})}});
}

struct Session {
  ExperimentConfig cfg;
  RunOptions ro;
  std::unique_ptr<DiskCache> cache;
  std::string out;
};

Session open_session(const Common& c, ExperimentConfig cfg) {
  Session s;
  s.cfg = std::move(cfg);
  s.ro.seed = c.seed.value_or(s.cfg.seed);
  s.ro.workers = c.workers.value_or(s.cfg.workers);
  s.out = c.out.empty() ? s.cfg.output : c.out;
  const std::string dir = c.cache.empty() ? s.cfg.cache : c.cache;
  if (!c.no_cache && !dir.empty()) {
    s.cache = std::make_unique<DiskCache>(dir);
    s.ro.store = s.cache.get();
  }
  return s;
}

int emit(const RunResult& r, const Session& s, const Common& c, const std::string& command) {
  const ReportHeader h{utc_now(), s.ro.seed, s.ro.workers, command};
  if (!s.out.empty()) write_outputs(r, h, s.out);
  if (c.format == "json")
    std::cout << to_json(r, h).dump(2) << "\n";
  else if (c.format == "csv") {
    std::cout << reports_csv(r);
    for (const auto& e : r.entries)
      if (e.sweep) std::cout << "\n" << sweep_csv(*e.sweep);
  } else {
    std::cout << render_text(r);
  }
  if (s.cache)
    std::cerr << "cache: " << s.cache->hits() << " hits, " << s.cache->misses() << " misses\n";
  return r.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlab: difference-quotient distribution functions, Lorentz quasinorms and inequality checks"};
  app.require_subcommand(1);

  Common common;
  AdHoc adhoc;
  std::string name;
  bool gc_all = false;

  auto* run = app.add_subcommand("run", "run every entry of a config");
  add_common(run, common, true);
  auto* check = app.add_subcommand("check", "run the config entries of one check");
  check->add_option("name", name, "bvy | thm3 | thm4 | thm5 | thm6 | rho")->required();
  add_common(check, common, true);
  auto* sweep = app.add_subcommand("sweep", "run the config sweeps of one kind");
  sweep->add_option("name", name, "divergence | rate-uk | rate-wjk | thm6")->required();
  add_common(sweep, common, true);
  auto* norm = app.add_subcommand("norm", "quasinorms of one quotient (flags) or of config norms entries");
  add_common(norm, common, false);
  add_adhoc(norm, adhoc);
  auto* distfn = app.add_subcommand("distfn", "write distribution functions as CSV + JSON");
  add_common(distfn, common, false);
  add_adhoc(distfn, adhoc);
  auto* cache = app.add_subcommand("cache", "cache maintenance");
  auto* gc = cache->add_subcommand("gc", "remove temporaries, half-written and unreadable entries");
  cache->require_subcommand(1);
  add_common(gc, common, false);
  gc->add_flag("--all", gc_all, "remove every entry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    auto load = [&] { return common.config.empty() ? adhoc_config(adhoc) : load_config(common.config); };
    if (run->parsed()) {
      Session s = open_session(common, load_config(common.config));
      return emit(run_config(s.cfg, s.ro), s, common, "run");
    }
    if (check->parsed() || sweep->parsed()) {
      const bool want_sweep = sweep->parsed();
      const auto kind = parse_kind(name);
      if (!kind || (!want_sweep && (*kind == Kind::divergence || *kind == Kind::rate_uk || *kind == Kind::rate_wjk ||
                                    *kind == Kind::norms)) ||
          (want_sweep && *kind != Kind::divergence && *kind != Kind::rate_uk && *kind != Kind::rate_wjk &&
           *kind != Kind::thm6))
        throw ConfigError(std::string(want_sweep ? "sweep" : "check") + ": unknown name '" + name + "'");
      Session s = open_session(common, load_config(common.config));
      auto select = [&](const CheckEntry& c) { return c.kind == *kind && c.is_sweep() == want_sweep; };
      if (std::none_of(s.cfg.checks.begin(), s.cfg.checks.end(), select))
        throw ConfigError("config has no " + std::string(want_sweep ? "sweep" : "check") + " entries named '" + name + "'");
      return emit(run_config(s.cfg, s.ro, select), s, common, (want_sweep ? "sweep " : "check ") + name);
    }
    if (norm->parsed() || distfn->parsed()) {
      Session s = open_session(common, load());
      auto select = [](const CheckEntry& c) { return c.kind == Kind::norms; };
      if (std::none_of(s.cfg.checks.begin(), s.cfg.checks.end(), select))
        throw ConfigError("config has no norms entries");
      if (distfn->parsed()) {
        if (s.out.empty()) throw ConfigError("distfn: --out is required");
        s.ro.keep_dfs = true;
      }
      RunResult r = run_config(s.cfg, s.ro, select);
      if (distfn->parsed()) {
        std::filesystem::create_directories(s.out);
        for (const auto& e : r.entries)
          for (std::size_t i = 0; i < e.norms.size(); ++i) {
            const auto path = std::filesystem::path(s.out) / (e.id + "_" + std::to_string(i) + ".csv");
            write_df(*e.norms[i].df, path);
            std::cerr << "wrote " << path.string() << "\n";
          }
      }
      return emit(r, s, common, norm->parsed() ? "norm" : "distfn");
    }
    if (gc->parsed()) {
      std::string dir = common.cache;
      if (dir.empty() && !common.config.empty()) dir = load_config(common.config).cache;
      if (dir.empty()) throw ConfigError("cache gc: give --cache or a config with a cache directory");
      const DiskCache c(dir);
      std::cout << "removed " << c.gc(gc_all) << " files from " << dir << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
