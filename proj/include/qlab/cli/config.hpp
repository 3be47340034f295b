#pragma once

// Experiment configs: one JSON document with global settings and a list of
// check entries. Everything is validated before any computation starts and
// unknown keys are rejected, so a typo never silently falls back to a default.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlab/core.hpp"
#include "qlab/functions.hpp"
#include "qlab/quotient.hpp"

namespace qlab::cli {

using json = nlohmann::json;

/// Bad config or usage; maps to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Kind { bvy, thm3, thm4, thm5, thm6, rho, divergence, rate_uk, rate_wjk, norms };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::bvy: return "bvy";
    case Kind::thm3: return "thm3";
    case Kind::thm4: return "thm4";
    case Kind::thm5: return "thm5";
    case Kind::thm6: return "thm6";
    case Kind::rho: return "rho";
    case Kind::divergence: return "divergence";
    case Kind::rate_uk: return "rate-uk";
    case Kind::rate_wjk: return "rate-wjk";
    case Kind::norms: return "norms";
  }
  return "?";
}

inline std::optional<Kind> parse_kind(const std::string& s) {
  for (Kind k : {Kind::bvy, Kind::thm3, Kind::thm4, Kind::thm5, Kind::thm6, Kind::rho, Kind::divergence,
                 Kind::rate_uk, Kind::rate_wjk, Kind::norms})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

/// metric op value; `~` means |actual - value| <= tol, the others compare
/// against value with tol of slack.
struct Assertion {
  std::string metric;
  std::string op;
  double value = 0.0;
  double tol = 0.0;
};

struct LorentzPair {
  double p = 1.0, q = 1.0;
};

struct CheckEntry {
  Kind kind = Kind::norms;
  std::string id;
  std::vector<std::string> functions;  // canonical text, parsed on use
  std::optional<Method> method;
  std::optional<std::uint64_t> samples;
  std::optional<std::size_t> points;
  std::vector<double> p;
  double q = std::numeric_limits<double>::infinity();
  double s1 = 0.0, p1 = 0.0, theta = 0.0;
  std::vector<double> delta, r, Lambda, ks, js, Ms;
  int k = 16;
  std::optional<double> beta, s;
  std::vector<LorentzPair> lorentz;
  std::vector<double> weak;
  std::vector<Assertion> expect;

  /// Entries whose result is a sweep (controls, fits) rather than reports.
  [[nodiscard]] bool is_sweep() const {
    return kind == Kind::divergence || kind == Kind::rate_uk || kind == Kind::rate_wjk ||
           (kind == Kind::thm6 && !Ms.empty());
  }
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  std::uint64_t samples = 1000000;
  std::string output;  // empty: no files
  std::string cache;   // empty: no cache
  std::vector<CheckEntry> checks;
};

namespace detail {

inline double number(const json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError(where + ": expected a number");
}

inline double finite(const json& v, const std::string& where) {
  const double x = number(v, where);
  if (!std::isfinite(x)) throw ConfigError(where + ": must be finite");
  return x;
}

inline std::vector<double> numbers(const json& v, const std::string& where) {
  std::vector<double> out;
  if (v.is_array()) {
    if (v.empty()) throw ConfigError(where + ": empty list");
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(finite(v[i], where + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(finite(v, where));
  }
  return out;
}

inline std::vector<double> increasing(const json& v, const std::string& where) {
  auto xs = numbers(v, where);
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ConfigError(where + ": values must be strictly increasing");
  return xs;
}

inline std::uint64_t unsigned_int(const json& v, const std::string& where) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0))
    throw ConfigError(where + ": expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

inline void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(where + "." + it.key() + ": unknown key");
}

inline const std::set<std::string>& kind_keys(Kind k) {
  static const std::map<Kind, std::set<std::string>> keys = {
      {Kind::bvy, {"function", "p"}},
      {Kind::thm3, {"function", "p"}},
      {Kind::thm4, {"function", "p"}},
      {Kind::thm5, {"function", "s1", "p1", "theta"}},
      {Kind::thm6, {"function", "p", "q", "M"}},
      {Kind::rho, {"function", "delta", "r"}},
      {Kind::divergence, {"p", "q", "Lambda"}},
      {Kind::rate_uk, {"s1", "p1", "theta", "q", "k"}},
      {Kind::rate_wjk, {"s1", "p1", "theta", "q", "j", "k"}},
      {Kind::norms, {"function", "beta", "s", "p", "lorentz", "weak"}},
  };
  return keys.at(k);
}

inline Assertion parse_assertion(const json& a, const std::string& where) {
  if (!a.is_object()) throw ConfigError(where + ": expected an object");
  only_keys(a, {"metric", "op", "value", "tol"}, where);
  for (const char* req : {"metric", "op", "value"})
    if (!a.contains(req)) throw ConfigError(where + "." + req + ": required");
  Assertion out;
  out.metric = text(a["metric"], where + ".metric");
  out.op = text(a["op"], where + ".op");
  if (out.op != "<=" && out.op != ">=" && out.op != "~") throw ConfigError(where + ".op: must be <=, >= or ~");
  out.value = number(a["value"], where + ".value");
  if (a.contains("tol")) {
    out.tol = finite(a["tol"], where + ".tol");
    if (out.tol < 0.0) throw ConfigError(where + ".tol: must be nonnegative");
  }
  return out;
}

inline void require(const json& e, std::initializer_list<const char*> keys, const std::string& where) {
  for (const char* k : keys)
    if (!e.contains(k)) throw ConfigError(where + "." + k + ": required");
}

inline CheckEntry parse_entry(const json& e, std::size_t index) {
  const std::string where = "checks[" + std::to_string(index) + "]";
  if (!e.is_object()) throw ConfigError(where + ": expected an object");
  if (!e.contains("check")) throw ConfigError(where + ".check: required");
  const std::string name = text(e["check"], where + ".check");
  const auto kind = parse_kind(name);
  if (!kind) throw ConfigError(where + ".check: unknown check '" + name + "'");
  CheckEntry c;
  c.kind = *kind;
  std::set<std::string> allowed = kind_keys(c.kind);
  allowed.insert({"check", "id", "method", "samples", "points", "expect"});
  only_keys(e, allowed, where);

  c.id = e.contains("id") ? text(e["id"], where + ".id") : name + "-" + std::to_string(index);
  // ids name output files
  if (c.id.empty() || c.id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
                          std::string::npos || c.id[0] == '.')
    throw ConfigError(where + ".id: use letters, digits, '_', '-' and '.' only");
  if (e.contains("method")) {
    try {
      c.method = parse_method(text(e["method"], where + ".method"));
    } catch (const DomainError& err) {
      throw ConfigError(where + ".method: " + err.what());
    }
  }
  if (e.contains("samples")) {
    c.samples = unsigned_int(e["samples"], where + ".samples");
    if (*c.samples < 1000) throw ConfigError(where + ".samples: need at least 1000");
  }
  if (e.contains("points")) {
    c.points = unsigned_int(e["points"], where + ".points");
    if (*c.points < 8) throw ConfigError(where + ".points: need at least 8");
  }
  if (e.contains("function")) {
    const json& f = e["function"];
    std::vector<json> items = f.is_array() ? std::vector<json>(f.begin(), f.end()) : std::vector<json>{f};
    if (items.empty()) throw ConfigError(where + ".function: empty list");
    for (std::size_t i = 0; i < items.size(); ++i) {
      const std::string w = where + ".function" + (f.is_array() ? "[" + std::to_string(i) + "]" : "");
      const std::string t = text(items[i], w);
      try {
        c.functions.push_back(qlab::to_string(parse_function_spec(t)));
      } catch (const Error& err) {
        throw ConfigError(w + ": " + err.what());
      }
    }
  }

  auto need_functions = [&] {
    if (c.functions.empty()) throw ConfigError(where + ".function: required");
  };
  auto positives = [&](const char* key) {
    auto xs = numbers(e[key], where + "." + key);
    for (double x : xs)
      if (!(x > 0.0)) throw ConfigError(where + "." + key + ": values must be positive");
    return xs;
  };
  auto exponents = [&](const char* key) {
    auto xs = numbers(e[key], where + "." + key);
    for (double x : xs)
      if (!(x >= 1.0)) throw ConfigError(where + "." + key + ": exponents must be >= 1");
    return xs;
  };
  auto interpolation = [&](bool strict) {
    require(e, {"s1", "p1", "theta"}, where);
    c.s1 = finite(e["s1"], where + ".s1");
    c.p1 = finite(e["p1"], where + ".p1");
    c.theta = finite(e["theta"], where + ".theta");
    if (!(c.s1 > 0.0 && c.s1 < 1.0)) throw ConfigError(where + ".s1: must lie in (0, 1)");
    if (!(c.p1 > 1.0)) throw ConfigError(where + ".p1: must exceed 1");
    if (!(c.theta > 0.0 && c.theta < 1.0)) throw ConfigError(where + ".theta: must lie in (0, 1)");
    const double sp = c.s1 * c.p1;
    if (strict ? !(sp > 1.0) : !(sp >= 1.0 - 1e-12))
      throw ConfigError(where + ".s1, " + where + ".p1: regime needs s1*p1 " + (strict ? ">" : ">=") +
                        " 1 (got s1*p1 = " + format_double(sp) + ")");
  };
  auto q_value = [&](bool required) {
    if (!e.contains("q")) {
      if (required) throw ConfigError(where + ".q: required");
      return;
    }
    c.q = number(e["q"], where + ".q");
    if (!(c.q >= 1.0)) throw ConfigError(where + ".q: must be >= 1 or \"inf\"");
  };

  switch (c.kind) {
    case Kind::bvy:
      need_functions();
      c.p = e.contains("p") ? exponents("p") : std::vector<double>{1.0};
      break;
    case Kind::thm3:
    case Kind::thm4:
      need_functions();
      require(e, {"p"}, where);
      c.p = exponents("p");
      break;
    case Kind::thm5:
      need_functions();
      interpolation(false);
      break;
    case Kind::thm6:
      require(e, {"p"}, where);
      c.p = exponents("p");
      if (c.p.size() != 1) throw ConfigError(where + ".p: thm6 takes a single p");
      if (!(c.p[0] > 1.0)) throw ConfigError(where + ".p: thm6 needs p > 1");
      q_value(false);
      if (!(c.q > 1.0)) throw ConfigError(where + ".q: thm6 needs q > N = 1");
      if (e.contains("M")) {
        if (!c.functions.empty()) throw ConfigError(where + ".M: give either function or M, not both");
        c.Ms = increasing(e["M"], where + ".M");
        for (double m : c.Ms)
          if (m < 1 || m != std::floor(m)) throw ConfigError(where + ".M: values must be positive integers");
        if (c.Ms.size() < 3) throw ConfigError(where + ".M: a sweep needs at least 3 values");
      } else {
        need_functions();
      }
      break;
    case Kind::rho:
      need_functions();
      require(e, {"delta", "r"}, where);
      c.delta = positives("delta");
      for (double d : c.delta)
        if (d > 1.0) throw ConfigError(where + ".delta: values must lie in (0, 1]");
      c.r = positives("r");
      break;
    case Kind::divergence:
      require(e, {"p", "q", "Lambda"}, where);
      c.p = exponents("p");
      if (c.p.size() != 1) throw ConfigError(where + ".p: divergence takes a single p");
      q_value(true);
      if (!std::isfinite(c.q)) throw ConfigError(where + ".q: divergence needs finite q");
      c.Lambda = increasing(e["Lambda"], where + ".Lambda");
      if (c.Lambda.front() <= 1.0) throw ConfigError(where + ".Lambda: values must exceed 1");
      if (c.Lambda.size() < 3) throw ConfigError(where + ".Lambda: a sweep needs at least 3 values");
      break;
    case Kind::rate_uk:
      interpolation(false);
      q_value(true);
      require(e, {"k"}, where);
      c.ks = increasing(e["k"], where + ".k");
      if (c.ks.size() < 4) throw ConfigError(where + ".k: a sweep needs at least 4 values");
      if (c.ks.front() <= 4.0) throw ConfigError(where + ".k: values must exceed 4");
      break;
    case Kind::rate_wjk:
      interpolation(true);
      q_value(true);
      require(e, {"j"}, where);
      c.js = increasing(e["j"], where + ".j");
      for (double j : c.js)
        if (j < 1 || j != std::floor(j)) throw ConfigError(where + ".j: values must be positive integers");
      if (c.js.size() < 3) throw ConfigError(where + ".j: a sweep needs at least 3 values");
      if (e.contains("k")) {
        const auto k = unsigned_int(e["k"], where + ".k");
        if (k < 2) throw ConfigError(where + ".k: must be >= 2");
        c.k = static_cast<int>(k);
      }
      break;
    case Kind::norms:
      need_functions();
      if (e.contains("beta") == (e.contains("s") || e.contains("p")))
        throw ConfigError(where + ".beta: give either beta or (s, p)");
      if (e.contains("beta")) {
        c.beta = finite(e["beta"], where + ".beta");
        if (!(*c.beta > 0.0)) throw ConfigError(where + ".beta: must be positive");
      } else {
        require(e, {"s", "p"}, where);
        c.s = finite(e["s"], where + ".s");
        c.p = exponents("p");
        if (c.p.size() != 1) throw ConfigError(where + ".p: norms take a single p");
      }
      if (e.contains("lorentz")) {
        const json& l = e["lorentz"];
        if (!l.is_array() || l.empty()) throw ConfigError(where + ".lorentz: expected a list of [p, q]");
        for (std::size_t i = 0; i < l.size(); ++i) {
          const std::string w = where + ".lorentz[" + std::to_string(i) + "]";
          if (!l[i].is_array() || l[i].size() != 2) throw ConfigError(w + ": expected [p, q]");
          LorentzPair lp{finite(l[i][0], w + "[0]"), number(l[i][1], w + "[1]")};
          if (!(lp.p >= 1.0) || !(lp.q >= 1.0)) throw ConfigError(w + ": exponents must be >= 1");
          c.lorentz.push_back(lp);
        }
      }
      if (e.contains("weak")) c.weak = exponents("weak");
      if (c.lorentz.empty() && c.weak.empty()) throw ConfigError(where + ".lorentz: norms need lorentz or weak");
      break;
  }

  if (e.contains("expect")) {
    const json& x = e["expect"];
    if (!x.is_array()) throw ConfigError(where + ".expect: expected a list");
    for (std::size_t i = 0; i < x.size(); ++i)
      c.expect.push_back(parse_assertion(x[i], where + ".expect[" + std::to_string(i) + "]"));
  }
  return c;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  detail::only_keys(j, {"seed", "workers", "samples", "output", "cache", "checks"}, "config");
  ExperimentConfig c;
  if (j.contains("seed")) c.seed = detail::unsigned_int(j["seed"], "config.seed");
  if (j.contains("workers")) {
    c.workers = static_cast<int>(detail::unsigned_int(j["workers"], "config.workers"));
    if (c.workers < 1) throw ConfigError("config.workers: must be >= 1");
  }
  if (j.contains("samples")) {
    c.samples = detail::unsigned_int(j["samples"], "config.samples");
    if (c.samples < 1000) throw ConfigError("config.samples: need at least 1000");
  }
  if (j.contains("output")) c.output = detail::text(j["output"], "config.output");
  if (j.contains("cache")) c.cache = detail::text(j["cache"], "config.cache");
  if (!j.contains("checks")) throw ConfigError("config.checks: required");
  const json& list = j["checks"];
  if (!list.is_array()) throw ConfigError("config.checks: expected a list");
  if (list.empty()) throw ConfigError("config.checks: empty check list, nothing to do");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < list.size(); ++i) {
    c.checks.push_back(detail::parse_entry(list[i], i));
    if (!ids.insert(c.checks.back().id).second)
      throw ConfigError("checks[" + std::to_string(i) + "].id: duplicate id '" + c.checks.back().id + "'");
  }
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config_text(s.str());
}

}  // namespace qlab::cli
