#pragma once

// Content-addressed store of distribution functions under a directory. An
// entry is <key>.csv plus <key>.json, both written to temporaries and renamed
// into place, so a concurrent reader sees either nothing or a whole file.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <unistd.h>

#include "qlab/dfio.hpp"
#include "qlab/harness.hpp"

namespace qlab::cli {

namespace fs = std::filesystem;

/// Canonical identity of a distribution-function computation. The output
/// location is deliberately not part of it.
inline std::string cache_identity(const QuotientSpec& q, const std::vector<double>& lambdas, Method m,
                                  std::uint64_t samples, std::uint64_t seed, int resolution = 0) {
  std::string grid;
  for (double l : lambdas) grid += format_double(l) + ",";
  std::string box;
  for (const Interval& iv : q.box) box += format_double(iv.lo) + ":" + format_double(iv.hi) + ";";
  return std::string("qlab-df-v1") + "|f=" + to_string(q.f) + "|beta=" + format_double(q.beta) +
         "|N=" + std::to_string(q.dimension) + "|local=" + (q.local_mode ? "1" : "0") + "|box=" + box +
         "|method=" + to_string(m) + "|resolution=" + std::to_string(resolution) + "|samples=" + std::to_string(samples) +
         "|seed=" + std::to_string(seed) + "|grid=" + std::to_string(lambdas.size()) + "@" +
         std::to_string(fnv1a64(grid));
}

inline std::string cache_key(const std::string& identity) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(identity)));
  return buf;
}

class DiskCache : public DfStore {
 public:
  explicit DiskCache(fs::path dir, std::ostream* warn = &std::cerr) : dir_(std::move(dir)), warn_(warn) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw DomainError("cache directory '" + dir_.string() + "' is not writable");
  }

  DistributionFunction get_or_compute(const QuotientSpec& q, const std::vector<double>& lambdas, Method m,
                                      std::uint64_t samples, std::uint64_t seed,
                                      const std::function<DistributionFunction()>& compute) override {
    const std::string id = cache_identity(q, lambdas, m, samples, seed);
    const fs::path csv = dir_ / (cache_key(id) + ".csv");
    if (fs::exists(csv) || fs::exists(sidecar_path(csv))) {
      try {
        auto df = load(csv, id, lambdas);
        ++hits_;
        return df;
      } catch (const std::exception& e) {
        if (warn_) *warn_ << "warning: corrupt cache entry " << csv.string() << " (" << e.what() << "), recomputing\n";
      }
    }
    ++misses_;
    DistributionFunction df = compute();
    store(df, csv, id);
    return df;
  }

  [[nodiscard]] std::size_t hits() const { return hits_; }
  [[nodiscard]] std::size_t misses() const { return misses_; }
  [[nodiscard]] const fs::path& dir() const { return dir_; }

  /// Removes temporaries, half entries and entries that do not parse; with
  /// `all`, every entry. Returns the number of files deleted.
  std::size_t gc(bool all = false) const {
    std::size_t removed = 0;
    std::vector<fs::path> doomed;
    for (const auto& ent : fs::directory_iterator(dir_)) {
      if (!ent.is_regular_file()) continue;
      const fs::path p = ent.path();
      const std::string name = p.filename().string();
      if (name.find(".tmp") != std::string::npos) {
        doomed.push_back(p);
        continue;
      }
      if (p.extension() == ".csv" || p.extension() == ".json") {
        fs::path csv = p;
        csv.replace_extension(".csv");
        bool ok = !all && fs::exists(csv) && fs::exists(sidecar_path(csv));
        if (ok) {
          try {
            (void)read_df(csv);
          } catch (const std::exception&) {
            ok = false;
          }
        }
        if (!ok) doomed.push_back(p);
      }
    }
    for (const fs::path& p : doomed) {
      std::error_code ec;
      if (fs::remove(p, ec)) ++removed;
    }
    return removed;
  }

 private:
  static DistributionFunction load(const fs::path& csv, const std::string& id, const std::vector<double>& lambdas) {
    const std::string meta = detail::slurp(sidecar_path(csv));
    const auto j = nlohmann::ordered_json::parse(meta);
    if (!j.contains("cache_key") || j["cache_key"] != id) throw DomainError("identity mismatch");
    DistributionFunction df = parse_df(detail::slurp(csv), meta);
    if (df.lambdas() != lambdas) throw DomainError("lambda grid mismatch");
    return df;
  }

  void store(const DistributionFunction& df, const fs::path& csv, const std::string& id) {
    static std::atomic<unsigned> counter{0};
    const std::string tag = ".tmp" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
    auto meta = df_metadata(df);
    meta["cache_key"] = id;
    const fs::path json = sidecar_path(csv);
    const fs::path tj = json.string() + tag, tc = csv.string() + tag;
    try {
      for (const auto& [path, text] : {std::pair{tj, meta.dump(2) + "\n"}, std::pair{tc, df_csv(df)}}) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw DomainError("write failed: " + path.string());
      }
      fs::rename(tj, json);
      fs::rename(tc, csv);
    } catch (const std::exception& e) {
      std::error_code ec;
      fs::remove(tj, ec);
      fs::remove(tc, ec);
      if (warn_) *warn_ << "warning: could not store cache entry " << csv.string() << " (" << e.what() << ")\n";
    }
  }

  fs::path dir_;
  std::ostream* warn_;
  std::size_t hits_ = 0, misses_ = 0;
};

}  // namespace qlab::cli
