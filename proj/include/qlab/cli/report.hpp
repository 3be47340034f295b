#pragma once

// Report formats. JSON is the machine format (divergent values appear as the
// string "+inf"), text is aligned columns for people, CSV carries sweeps.
// Field and column names are part of the file contract; see README.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qlab/cli/run.hpp"

namespace qlab::cli {

using ojson = nlohmann::ordered_json;

inline ojson to_json(const Extended& v) {
  if (v.is_infinite()) return "+inf";
  const double x = v.value();
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline ojson to_json(double x) { return to_json(Extended(x)); }

inline ojson named(const std::vector<NamedValue>& xs) {
  ojson o = ojson::object();
  for (const auto& x : xs) o[x.name] = to_json(x.value);
  return o;
}

inline ojson to_json(const InequalityReport& r, const std::string& subject) {
  ojson o;
  o["name"] = r.name;
  o["function"] = subject;
  o["params"] = named(r.params);
  o["method"] = r.method;
  o["lhs"] = to_json(r.lhs);
  o["lhs_error"] = to_json(r.lhs_error);
  o["rhs"] = to_json(r.rhs);
  o["rhs_factors"] = named(r.rhs_factors);
  o["ratio"] = to_json(r.ratio);
  o["extra"] = named(r.extra);
  return o;
}

inline ojson to_json(const RateFit& f) {
  ojson o;
  o["model"] = to_string(f.model);
  o["gamma"] = to_json(f.gamma);
  o["C"] = to_json(f.C);
  o["r2"] = to_json(f.r_squared);
  return o;
}

inline ojson to_json(const SweepResult& s) {
  ojson o;
  o["name"] = s.name;
  o["control"] = s.control;
  o["params"] = named(s.params);
  o["columns"] = s.columns;
  ojson rows = ojson::array();
  for (const auto& row : s.rows) {
    ojson r = ojson::array();
    for (double v : row) r.push_back(to_json(v));
    rows.push_back(r);
  }
  o["rows"] = rows;
  ojson fits = ojson::object();
  for (const auto& [n, f] : s.fits) fits[n] = to_json(f);
  o["fits"] = fits;
  o["summary"] = named(s.summary);
  return o;
}

inline ojson to_json(const EntryResult& e) {
  ojson o;
  o["id"] = e.id;
  o["check"] = to_string(e.kind);
  o["pass"] = e.pass();
  if (!e.reports.empty()) {
    ojson rs = ojson::array();
    for (std::size_t i = 0; i < e.reports.size(); ++i) rs.push_back(to_json(e.reports[i], e.subjects[i]));
    o["reports"] = rs;
  }
  if (e.sweep) o["sweep"] = to_json(*e.sweep);
  if (!e.norms.empty()) {
    ojson ns = ojson::array();
    for (const auto& n : e.norms) {
      ojson v = ojson::object();
      for (const auto& x : n.values) v[x.label] = to_json(x.value);
      ns.push_back({{"function", n.function}, {"beta", to_json(n.beta)}, {"method", n.method}, {"values", v}});
    }
    o["norms"] = ns;
  }
  ojson as = ojson::array();
  for (const auto& a : e.assertions)
    as.push_back({{"metric", a.assertion.metric},
                  {"op", a.assertion.op},
                  {"value", to_json(a.assertion.value)},
                  {"tol", to_json(a.assertion.tol)},
                  {"subject", a.subject},
                  {"actual", to_json(a.actual)},
                  {"pass", a.pass}});
  o["assertions"] = as;
  return o;
}

struct ReportHeader {
  std::string timestamp;  // the only field allowed to differ between identical runs
  std::uint64_t seed = 0;
  int workers = 1;
  std::string command;
};

inline ojson to_json(const RunResult& r, const ReportHeader& h) {
  ojson o;
  o["tool"] = "qlab";
  o["format"] = 1;
  o["timestamp"] = h.timestamp;
  o["command"] = h.command;
  o["seed"] = h.seed;
  o["workers"] = h.workers;
  o["pass"] = r.pass();
  ojson es = ojson::array();
  for (const auto& e : r.entries) es.push_back(to_json(e));
  o["entries"] = es;
  return o;
}

namespace detail {

inline std::string cell(const Extended& v) { return v.is_infinite() ? "+inf" : format_double(v.value()); }

inline std::string short_num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline std::string short_cell(const Extended& v) { return v.is_infinite() ? "+inf" : short_num(v.value()); }

inline std::string params_text(const std::vector<NamedValue>& ps) {
  std::string s;
  for (const auto& p : ps) s += (s.empty() ? "" : " ") + p.name + "=" + short_num(p.value);
  return s;
}

/// Left-aligned columns separated by two spaces.
inline std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> w;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (w.size() <= i) w.push_back(0);
      w[i] = std::max(w[i], r[i].size());
    }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(w[i] - r[i].size() + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

}  // namespace detail

inline std::string render_text(const RunResult& r) {
  std::string out;
  for (const auto& e : r.entries) {
    out += "== " + e.id + " [" + to_string(e.kind) + "] " + (e.pass() ? "pass" : "FAIL") + "\n";
    if (!e.reports.empty()) {
      std::vector<std::vector<std::string>> rows{{"function", "params", "method", "lhs", "rhs", "ratio"}};
      for (std::size_t i = 0; i < e.reports.size(); ++i) {
        const auto& rep = e.reports[i];
        rows.push_back({e.subjects[i], detail::params_text(rep.params), rep.method, detail::short_cell(rep.lhs),
                        detail::short_num(rep.rhs), detail::short_cell(rep.ratio)});
      }
      out += detail::table(rows);
    }
    if (e.sweep) {
      const auto& s = *e.sweep;
      std::vector<std::vector<std::string>> rows{s.columns};
      for (const auto& row : s.rows) {
        std::vector<std::string> cells;
        for (double v : row) cells.push_back(detail::short_num(v));
        rows.push_back(cells);
      }
      out += detail::table(rows);
      for (const auto& [n, f] : s.fits)
        out += "fit " + n + ": " + to_string(f.model) + " gamma=" + detail::short_num(f.gamma) +
               " C=" + detail::short_num(f.C) + " r2=" + detail::short_num(f.r_squared) + "\n";
      for (const auto& x : s.summary) out += x.name + " = " + detail::short_num(x.value) + "\n";
    }
    if (!e.norms.empty()) {
      std::vector<std::vector<std::string>> rows{{"function", "beta", "method", "norm", "value"}};
      for (const auto& n : e.norms)
        for (const auto& v : n.values)
          rows.push_back({n.function, detail::short_num(n.beta), n.method, v.label, detail::short_cell(v.value)});
      out += detail::table(rows);
    }
    for (const auto& a : e.assertions)
      out += std::string(a.pass ? "  ok   " : "  FAIL ") + a.subject + ": " + a.assertion.metric + " " + a.assertion.op +
             " " + detail::short_num(a.assertion.value) + (a.assertion.tol > 0 ? " (tol " + detail::short_num(a.assertion.tol) + ")" : "") +
             ", got " + detail::short_cell(a.actual) + "\n";
  }
  out += std::string("overall: ") + (r.pass() ? "pass" : "FAIL") + "\n";
  return out;
}

/// Sweep as CSV: one row per control value, full precision.
inline std::string sweep_csv(const SweepResult& s) {
  std::string out;
  for (std::size_t i = 0; i < s.columns.size(); ++i) out += (i ? "," : "") + detail::csv_field(s.columns[i]);
  out += "\n";
  for (const auto& row : s.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::cell(Extended(row[i]));
    out += "\n";
  }
  return out;
}

/// Every report and norm of the run, one per row.
inline std::string reports_csv(const RunResult& r) {
  std::string out = "id,check,function,params,method,lhs,rhs,ratio\n";
  for (const auto& e : r.entries) {
    for (std::size_t i = 0; i < e.reports.size(); ++i) {
      const auto& rep = e.reports[i];
      out += detail::csv_field(e.id) + "," + to_string(e.kind) + "," + detail::csv_field(e.subjects[i]) + "," +
             detail::csv_field(detail::params_text(rep.params)) + "," + rep.method + "," + detail::cell(rep.lhs) + "," +
             detail::cell(Extended(rep.rhs)) + "," + detail::cell(rep.ratio) + "\n";
    }
    for (const auto& n : e.norms)
      for (const auto& v : n.values)
        out += detail::csv_field(e.id) + ",norms," + detail::csv_field(n.function) + "," +
               detail::csv_field("beta=" + detail::short_num(n.beta) + " " + v.label) + "," + n.method + "," +
               detail::cell(v.value) + ",,\n";
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  const std::filesystem::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DomainError("cannot write " + p.string());
    out << text;
    if (!out) throw DomainError("write failed: " + p.string());
  }
  std::filesystem::rename(tmp, p);
}

/// report.json, reports.csv and one <id>.csv per sweep under `dir`.
inline void write_outputs(const RunResult& r, const ReportHeader& h, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.json", to_json(r, h).dump(2) + "\n");
  write_text_file(dir / "reports.csv", reports_csv(r));
  for (const auto& e : r.entries)
    if (e.sweep) write_text_file(dir / (e.id + ".csv"), sweep_csv(*e.sweep));
}

}  // namespace qlab::cli
