#pragma once

// Executes config entries against the harness and evaluates their
// assertions. Nothing here prints; see report.hpp for the output formats.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qlab/cli/config.hpp"
#include "qlab/harness.hpp"

namespace qlab::cli {

struct AssertionResult {
  Assertion assertion;
  std::string subject;  // which report or norm the metric was read from
  Extended actual;
  bool pass = false;
};

struct NormValue {
  std::string label;  // lorentz(p,q) or weak(p)
  Extended value;
};

struct NormResult {
  std::string function;
  double beta = 0.0;
  std::string method;
  std::vector<NormValue> values;
  std::optional<DistributionFunction> df;
};

struct EntryResult {
  std::string id;
  Kind kind = Kind::norms;
  std::vector<InequalityReport> reports;
  std::vector<std::string> subjects;  // function per report
  std::optional<SweepResult> sweep;
  std::vector<NormResult> norms;
  std::vector<AssertionResult> assertions;

  [[nodiscard]] bool pass() const {
    for (const auto& a : assertions)
      if (!a.pass) return false;
    return true;
  }
};

struct RunResult {
  std::vector<EntryResult> entries;
  [[nodiscard]] bool pass() const {
    for (const auto& e : entries)
      if (!e.pass()) return false;
    return true;
  }
};

namespace detail {

inline bool compare(const Assertion& a, const Extended& v) {
  const double x = v.value_or(std::numeric_limits<double>::infinity());
  if (a.op == "<=") return x <= a.value + a.tol;
  if (a.op == ">=") return x >= a.value - a.tol;
  return v.is_finite() && std::abs(x - a.value) <= a.tol;
}

inline std::optional<Extended> report_metric(const InequalityReport& r, const std::string& m) {
  if (m == "ratio") return r.ratio;
  if (m == "lhs") return r.lhs;
  if (m == "rhs") return Extended(r.rhs);
  if (m == "lhs_error") return Extended(r.lhs_error);
  auto lookup = [&](const std::vector<NamedValue>& xs, const std::string& prefix) -> std::optional<Extended> {
    if (m.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string key = m.substr(prefix.size());
    for (const auto& x : xs)
      if (x.name == key) return Extended(x.value);
    return std::nullopt;
  };
  if (auto v = lookup(r.extra, "extra.")) return v;
  if (auto v = lookup(r.params, "param.")) return v;
  if (auto v = lookup(r.rhs_factors, "factor.")) return v;
  return std::nullopt;
}

inline std::optional<Extended> sweep_metric(const SweepResult& s, const std::string& m) {
  if (m.rfind("summary.", 0) == 0) {
    const std::string key = m.substr(8);
    for (const auto& x : s.summary)
      if (x.name == key) return Extended(x.value);
    return std::nullopt;
  }
  if (m.rfind("param.", 0) == 0) {
    const std::string key = m.substr(6);
    for (const auto& x : s.params)
      if (x.name == key) return Extended(x.value);
    return std::nullopt;
  }
  if (m.rfind("fit.", 0) == 0) {
    const auto dot = m.rfind('.');
    if (dot <= 4) return std::nullopt;
    const std::string name = m.substr(4, dot - 4), field = m.substr(dot + 1);
    for (const auto& [n, f] : s.fits)
      if (n == name) {
        if (field == "gamma") return Extended(f.gamma);
        if (field == "C") return Extended(f.C);
        if (field == "r2") return Extended(f.r_squared);
      }
    return std::nullopt;
  }
  return std::nullopt;
}

inline void evaluate(EntryResult& r, const CheckEntry& c) {
  for (const Assertion& a : c.expect) {
    bool matched = false;
    auto add = [&](const std::string& subject, const Extended& v) {
      matched = true;
      r.assertions.push_back({a, subject, v, compare(a, v)});
    };
    if (r.sweep)
      if (auto v = sweep_metric(*r.sweep, a.metric)) add(r.id, *v);
    if (!matched) {
      // a report metric holds for every report of the entry
      for (std::size_t i = 0; i < r.reports.size(); ++i)
        if (auto v = report_metric(r.reports[i], a.metric)) add(r.subjects[i], *v);
    }
    if (!matched && a.metric.rfind("value.", 0) == 0) {
      const std::string label = a.metric.substr(6);
      for (const auto& n : r.norms)
        for (const auto& v : n.values)
          if (v.label == label) add(n.function, v.value);
    }
    if (!matched) throw ConfigError(c.id + ".expect: metric '" + a.metric + "' not produced by this check");
  }
}

inline std::string lorentz_label(double p, double q) {
  return "lorentz(" + format_double(p) + "," + (std::isinf(q) ? std::string("inf") : format_double(q)) + ")";
}

}  // namespace detail

struct RunOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  DfStore* store = nullptr;
  bool keep_dfs = false;  // norms entries retain their df (distfn)
};

/// Seed of one job: the entry id and the function index, hashed under the root.
inline std::uint64_t job_seed(std::uint64_t root, const std::string& id, std::size_t index) {
  return derive_seed(root, fnv1a64(id + "#" + std::to_string(index)));
}

inline EntryResult run_entry(const CheckEntry& c, const ExperimentConfig& cfg, const RunOptions& ro) {
  EntryResult r;
  r.id = c.id;
  r.kind = c.kind;
  HarnessOptions o;
  o.method = c.method;
  o.samples = c.samples.value_or(cfg.samples);
  o.workers = ro.workers;
  o.store = ro.store;
  if (c.points) o.points = *c.points;
  auto seeded = [&](std::size_t i) {
    HarnessOptions x = o;
    x.seed = job_seed(ro.seed, c.id, i);
    return x;
  };
  auto each_function = [&](const std::function<void(const FunctionSpec&, const HarnessOptions&, const std::string&)>& fn) {
    for (std::size_t i = 0; i < c.functions.size(); ++i)
      fn(parse_function_spec(c.functions[i]), seeded(i), c.functions[i]);
  };
  auto push = [&](InequalityReport rep, const std::string& subject) {
    r.reports.push_back(std::move(rep));
    r.subjects.push_back(subject);
  };

  try {
    switch (c.kind) {
      case Kind::bvy:
        each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
          for (double p : c.p) push(check_bvy(f, p, x), t);
        });
        break;
      case Kind::thm3:
        each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
          for (double p : c.p) push(check_thm3(f, p, x), t);
        });
        break;
      case Kind::thm4:
        each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
          for (double p : c.p) push(check_thm4(f, p, x), t);
        });
        break;
      case Kind::thm5:
        each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
          push(check_thm5(f, c.s1, c.p1, c.theta, x), t);
        });
        break;
      case Kind::thm6:
        if (!c.Ms.empty()) {
          r.sweep = sweep_thm6(c.p[0], c.q, c.Ms, job_seed(ro.seed, c.id, 0));
          for (std::size_t i = 0; i < r.sweep->reports.size(); ++i)
            push(r.sweep->reports[i], "sine_bump(" + format_double(r.sweep->controls[i]) + ")");
        } else {
          each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
            push(check_thm6(f, c.p[0], c.q, x.seed), t);
          });
        }
        break;
      case Kind::rho:
        each_function([&](const FunctionSpec& f, const HarnessOptions&, const std::string& t) {
          for (double d : c.delta)
            for (double rr : c.r) push(check_rho_lemma(f, d, rr), t);
        });
        break;
      case Kind::divergence:
        r.sweep = probe_divergence(c.p[0], c.q, c.Lambda);
        break;
      case Kind::rate_uk:
        r.sweep = sweep_rate_uk(c.s1, c.p1, c.theta, c.q, c.ks, seeded(0));
        break;
      case Kind::rate_wjk:
        r.sweep = sweep_rate_wjk(c.s1, c.p1, c.theta, c.q, c.js, c.k, seeded(0));
        break;
      case Kind::norms:
        each_function([&](const FunctionSpec& f, const HarnessOptions& x, const std::string& t) {
          const double beta = c.beta ? *c.beta : f.dimension() / c.p[0] + *c.s;
          const QuotientSpec q(f, beta);
          DistributionFunction df = compute_distribution(q, x);
          NormResult n{t, beta, to_string(df.method()), {}, std::nullopt};
          for (const auto& lp : c.lorentz)
            n.values.push_back({detail::lorentz_label(lp.p, lp.q), lorentz_quasinorm(df, LorentzParams(lp.p, lp.q))});
          for (double p : c.weak) n.values.push_back({"weak(" + format_double(p) + ")", weak_quasinorm(df, p)});
          if (ro.keep_dfs) n.df = std::move(df);
          r.norms.push_back(std::move(n));
        });
        break;
    }
  } catch (const DomainError& e) {
    throw ConfigError(c.id + " (" + to_string(c.kind) + "): infeasible parameters: " + e.what());
  }
  detail::evaluate(r, c);
  return r;
}

/// Runs the entries accepted by `select` (all when empty), in config order.
inline RunResult run_config(const ExperimentConfig& cfg, const RunOptions& ro,
                            const std::function<bool(const CheckEntry&)>& select = {}) {
  RunResult out;
  for (const CheckEntry& c : cfg.checks)
    if (!select || select(c)) out.entries.push_back(run_entry(c, cfg, ro));
  return out;
}

}  // namespace qlab::cli
