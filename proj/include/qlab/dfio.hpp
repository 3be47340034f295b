#pragma once

// Distribution functions on disk: a CSV table (lambda, mu, stderr) and a JSON
// sidecar with the metadata. Doubles are printed with 17 significant digits,
// so reading back reproduces every bit.

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "qlab/quotient.hpp"

namespace qlab {

namespace fs = std::filesystem;

/// Sidecar path belonging to a CSV path (same stem, .json).
inline fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

inline nlohmann::ordered_json df_metadata(const DistributionFunction& df) {
  const DfMeta& m = df.meta();
  nlohmann::ordered_json j;
  j["method"] = to_string(df.method());
  j["seed"] = m.seed;
  j["samples"] = m.samples;
  j["beta"] = format_double(m.beta);
  j["N"] = m.dimension;
  j["resolution"] = m.resolution;
  j["power"] = format_double(m.power);
  j["function"] = m.function;
  j["local"] = m.local_mode;
  j["points"] = df.size();
  return j;
}

inline std::string df_csv(const DistributionFunction& df) {
  std::string out = "lambda,mu,stderr\n";
  for (std::size_t i = 0; i < df.size(); ++i)
    out += format_double(df.lambdas()[i]) + "," + format_double(df.mu()[i]) + "," + format_double(df.stderrs()[i]) + "\n";
  return out;
}

namespace detail {

inline double parse_double_strict(const std::string& s, const std::string& what) {
  if (s.empty()) throw DomainError(what + ": empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw DomainError(what + ": bad number '" + s + "'");
  return v;
}

inline double json_double(const nlohmann::ordered_json& j, const char* key) {
  if (!j.contains(key)) throw DomainError(std::string("metadata: missing '") + key + "'");
  const auto& v = j.at(key);
  if (v.is_string()) return parse_double_strict(v.get<std::string>(), key);
  if (v.is_number()) return v.get<double>();
  throw DomainError(std::string("metadata: '") + key + "' is not a number");
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DomainError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace detail

inline DistributionFunction parse_df(const std::string& csv, const std::string& sidecar) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(sidecar);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("metadata: ") + e.what());
  }
  DfMeta m;
  Method method;
  try {
    method = parse_method(j.at("method").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.samples = j.at("samples").get<std::uint64_t>();
    m.dimension = j.at("N").get<int>();
    m.resolution = j.at("resolution").get<int>();
    m.function = j.at("function").get<std::string>();
    m.local_mode = j.at("local").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("metadata: ") + e.what());
  }
  m.beta = detail::json_double(j, "beta");
  m.power = detail::json_double(j, "power");

  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "lambda,mu,stderr") throw DomainError("csv: expected header lambda,mu,stderr");
  std::vector<double> lam, mu, se;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.find(',', a == std::string::npos ? a : a + 1);
    if (a == std::string::npos || b == std::string::npos) throw DomainError("csv: row " + std::to_string(row) + " needs 3 fields");
    const std::string where = "csv row " + std::to_string(row);
    lam.push_back(detail::parse_double_strict(line.substr(0, a), where));
    mu.push_back(detail::parse_double_strict(line.substr(a + 1, b - a - 1), where));
    se.push_back(detail::parse_double_strict(line.substr(b + 1), where));
  }
  if (j.contains("points") && j["points"].get<std::size_t>() != lam.size())
    throw DomainError("csv has " + std::to_string(lam.size()) + " rows, metadata says " + j["points"].dump());
  return {std::move(lam), std::move(mu), std::move(se), method, std::move(m)};
}

/// Writes `csv` and its sidecar. Not atomic; the cache layer adds that.
inline void write_df(const DistributionFunction& df, const fs::path& csv) {
  auto put = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DomainError("cannot write " + p.string());
    out << text;
    if (!out) throw DomainError("write failed: " + p.string());
  };
  put(csv, df_csv(df));
  put(sidecar_path(csv), df_metadata(df).dump(2) + "\n");
}

inline DistributionFunction read_df(const fs::path& csv) {
  return parse_df(detail::slurp(csv), detail::slurp(sidecar_path(csv)));
}

}  // namespace qlab
