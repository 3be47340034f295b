#pragma once

// Distribution function of the difference quotient
//   F(x, y) = |u(x) - u(y)| / |x - y|^beta  on R^N x R^N,
//   mu(lambda) = L^{2N}{F >= lambda},
// computed through the h-decomposition
//   mu(lambda) = integral over h of m(h, lambda |h|^beta),
//   m(h, tau)  = L^N{x : |u(x + h) - u(x)| >= tau}.

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "qlab/core.hpp"
#include "qlab/functions.hpp"
#include "qlab/quadrature.hpp"

namespace qlab {

struct QuotientSpec {
  FunctionSpec f;
  double beta = 1.0;
  int dimension = 1;
  Box box;  // empty: derived from the support
  bool local_mode = false;

  QuotientSpec() = default;
  QuotientSpec(FunctionSpec fn, double b, Box bx = {}, bool local = false)
      : f(std::move(fn)), beta(b), dimension(f.dimension()), box(std::move(bx)), local_mode(local) {}

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive and finite");
    if (dimension != f.dimension())
      throw DomainError("quotient dimension " + std::to_string(dimension) + " differs from the function's R^" +
                        std::to_string(f.dimension()));
    if (dimension < 1 || dimension > 2) throw DomainError("only N = 1 and N = 2 are supported");
    if (local_mode && box.empty()) throw DomainError("local mode needs an explicit box");
    if (!box.empty()) {
      if (static_cast<int>(box.size()) != dimension) throw DomainError("box dimension differs from N");
      for (const Interval& iv : box)
        if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi)) throw DomainError("box must be nonempty and finite");
    }
  }
};

enum class Method { exact_piecewise, grid, monte_carlo };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::exact_piecewise: return "exact-piecewise";
    case Method::grid: return "grid";
    case Method::monte_carlo: return "monte-carlo";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "exact-piecewise" || s == "exact") return Method::exact_piecewise;
  if (s == "grid") return Method::grid;
  if (s == "monte-carlo" || s == "mc") return Method::monte_carlo;
  throw DomainError("unknown method '" + std::string(s) + "'");
}

struct DfMeta {
  int dimension = 1;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;
  int resolution = 0;
  double power = 1.0;  // the df describes F^power
  std::string function;
  bool local_mode = false;
};

/// Tabulated lambda -> mu(lambda). Immutable once built.
class DistributionFunction {
 public:
  DistributionFunction() = default;
  DistributionFunction(std::vector<double> lambdas, std::vector<double> mu, std::vector<double> stderr_,
                       Method method, DfMeta meta)
      : lambdas_(std::move(lambdas)), mu_(std::move(mu)), stderr_(std::move(stderr_)), method_(method),
        meta_(std::move(meta)) {
    validate();
  }

  // by value on temporaries, so `for (double m : f().mu())` does not dangle
  [[nodiscard]] const std::vector<double>& lambdas() const& { return lambdas_; }
  [[nodiscard]] const std::vector<double>& mu() const& { return mu_; }
  [[nodiscard]] const std::vector<double>& stderrs() const& { return stderr_; }
  [[nodiscard]] std::vector<double> lambdas() && { return std::move(lambdas_); }
  [[nodiscard]] std::vector<double> mu() && { return std::move(mu_); }
  [[nodiscard]] std::vector<double> stderrs() && { return std::move(stderr_); }
  [[nodiscard]] Method method() const { return method_; }
  [[nodiscard]] const DfMeta& meta() const { return meta_; }
  [[nodiscard]] std::size_t size() const { return lambdas_.size(); }
  [[nodiscard]] bool all_zero() const {
    return std::all_of(mu_.begin(), mu_.end(), [](double v) { return v == 0.0; });
  }

 private:
  void validate() const {
    const std::size_t n = lambdas_.size();
    if (mu_.size() != n || stderr_.size() != n) throw DomainError("distribution function columns differ in length");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(lambdas_[i] > 0.0) || !std::isfinite(lambdas_[i])) throw DomainError("lambda grid must be positive and finite");
      if (i > 0 && !(lambdas_[i] > lambdas_[i - 1])) throw DomainError("lambda grid must be strictly increasing");
      if (!(mu_[i] >= 0.0) || !std::isfinite(mu_[i])) throw NumericalError("mu must be finite and nonnegative");
      if (!(stderr_[i] >= 0.0)) throw NumericalError("stderr must be nonnegative");
      if (i > 0) {
        const double slack = 3.0 * (stderr_[i] + stderr_[i - 1]) + 1e-12 * mu_[i - 1];
        if (mu_[i] > mu_[i - 1] + slack)
          throw NumericalError("mu increases at lambda = " + format_double(lambdas_[i]));
      }
    }
  }

  std::vector<double> lambdas_;
  std::vector<double> mu_;
  std::vector<double> stderr_;
  Method method_ = Method::grid;
  DfMeta meta_;
};

// ---------------------------------------------------------------------------
// Lambda grids.

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DomainError("log_grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

/// lambda_i = 2^(i / per_octave) for i in [first, last]. Shifts by powers of
/// 2^(1/per_octave) map grid points onto grid points exactly.
inline std::vector<double> octave_grid(int first, int last, int per_octave) {
  if (last <= first || per_octave < 1) throw DomainError("octave_grid needs first < last and per_octave >= 1");
  std::vector<double> g;
  for (int i = first; i <= last; ++i) g.push_back(std::exp2(static_cast<double>(i) / per_octave));
  return g;
}

namespace detail {

inline double osc(const FunctionSpec& f) {
  if (f.is_constant()) return 0.0;
  double lo = std::min(f.left_value(), f.right_value()), hi = std::max(f.left_value(), f.right_value());
  if (f.dimension() == 1 && f.pieces_available()) {
    for (const Piece& p : f.pieces()) {
      lo = std::min({lo, p.v_lo, p.v_hi});
      hi = std::max({hi, p.v_lo, p.v_hi});
    }
  } else if (f.dimension() == 1) {
    lo = std::min(lo, f(f.variation_interval().lo));
    hi = std::max(hi, f(f.variation_interval().hi));
  } else {
    const double s = sup_norm(f);
    return 2.0 * s;
  }
  return hi - lo;
}

// Largest |h| for which F >= lambda is possible.
inline double h_upper(const QuotientSpec& q, double lambda, double oscillation, double lip) {
  double h = std::pow(oscillation / lambda, 1.0 / q.beta);
  if (std::isfinite(lip) && q.beta > 1.0) h = std::min(h, std::pow(lip / lambda, 1.0 / (q.beta - 1.0)));
  if (q.local_mode) {
    double diam2 = 0.0;
    for (const Interval& iv : q.box) diam2 += iv.length() * iv.length();
    h = std::min(h, std::sqrt(diam2));
  }
  return h;
}

// Smallest |h| for which F >= lambda is possible (only binding when beta < 1).
inline double h_lower(const QuotientSpec& q, double lambda, double lip) {
  if (std::isfinite(lip) && q.beta < 1.0) return std::pow(lambda / lip, 1.0 / (1.0 - q.beta));
  if (std::isfinite(lip) && q.beta == 1.0 && lip < lambda) return std::numeric_limits<double>::infinity();
  return 0.0;
}

inline Interval clip_window(const QuotientSpec& q) {
  if (q.local_mode) return q.box[0];
  const double inf = std::numeric_limits<double>::infinity();
  return {-inf, inf};
}

// Pieces of u covering the real line (global) or the box (local); exterior
// half-lines are flat pieces with infinite ends.
inline std::vector<Piece> covering_pieces(const QuotientSpec& q) {
  const FunctionSpec& f = q.f;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Piece> out;
  if (f.is_constant()) {
    out.push_back({-inf, inf, PieceShape::flat, f.left_value(), f.left_value()});
  } else {
    const auto& ps = f.pieces();
    out.push_back({-inf, ps.front().lo, PieceShape::flat, f.left_value(), f.left_value()});
    for (const Piece& p : ps) out.push_back(p);
    out.push_back({ps.back().hi, inf, PieceShape::flat, f.right_value(), f.right_value()});
  }
  const Interval w = clip_window(q);
  std::vector<Piece> clipped;
  for (Piece p : out) {
    const double lo = std::max(p.lo, w.lo), hi = std::min(p.hi, w.hi);
    if (!(hi > lo)) continue;
    if (p.shape != PieceShape::flat) {
      const double vlo = lo == p.lo ? p.v_lo : f.piece_value(p, lo);
      const double vhi = hi == p.hi ? p.v_hi : f.piece_value(p, hi);
      p.v_lo = vlo;
      p.v_hi = vhi;
    }
    p.lo = lo;
    p.hi = hi;
    clipped.push_back(p);
  }
  return clipped;
}

inline void isotonic_nonincreasing(std::vector<double>& y, const std::vector<double>& w) {
  // pool adjacent violators for a nonincreasing fit
  struct Block {
    double mean, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i], w[i], 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean < blocks.back().mean) {
      Block b = blocks.back();
      blocks.pop_back();
      Block& a = blocks.back();
      const double tw = a.weight + b.weight;
      a.mean = tw > 0.0 ? (a.mean * a.weight + b.mean * b.weight) / tw : 0.5 * (a.mean + b.mean);
      a.weight = tw;
      a.count += b.count;
    }
  }
  std::size_t i = 0;
  for (const Block& b : blocks)
    for (std::size_t c = 0; c < b.count; ++c) y[i++] = b.mean;
}

// Runs job(i) for i in [0, n) on `workers` threads; each i writes its own slot.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& job) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  const int w = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        if (failed) return;
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

inline DfMeta make_meta(const QuotientSpec& q) {
  DfMeta m;
  m.dimension = q.dimension;
  m.beta = q.beta;
  m.function = to_string(q.f);
  m.local_mode = q.local_mode;
  return m;
}

inline void check_lambdas(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw DomainError("empty lambda grid");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || !std::isfinite(lambdas[i])) throw DomainError("lambda grid must be positive and finite");
    if (i && !(lambdas[i] > lambdas[i - 1])) throw DomainError("lambda grid must be strictly increasing");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Exact path: piecewise-constant u on the line.

namespace detail {

// Measure of {(x, y) in [a,b] x [c,d] : |x - y| <= r}, finite intervals,
// given in coordinates relative to c: u = a - c, v = b - c, w = d - c.
inline double band_area(double u, double v, double w, double r) {
  const double L = w;
  auto F = [L](double z) {
    if (z <= 0.0) return 0.0;
    if (z <= L) return 0.5 * z * z;
    return 0.5 * L * L + L * (z - L);
  };
  // H(t) = measure{y - x <= t}
  auto H = [&](double t) { return F(v + t) - F(u + t); };
  return H(r) - H(-r);
}

inline double exact_mu(const std::vector<Piece>& ps, double beta, double lambda) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    for (std::size_t j = i + 1; j < ps.size(); ++j) {
      const double gap = std::abs(ps[j].v_lo - ps[i].v_lo);
      if (gap == 0.0) continue;
      const double r = std::pow(gap / lambda, 1.0 / beta);
      if (ps[j].lo - ps[i].hi >= r) {
        // contiguous sorted pieces: later j are farther still, but may have larger gaps
        continue;
      }
      // offsets from the start of the right piece keep small bands exact;
      // infinite ends are clipped to within r of the other piece
      const double c = ps[j].lo;
      const double v = ps[i].hi - c;
      const double u = std::max(ps[i].lo - c, -r);
      const double w = std::min(ps[j].hi - c, v + r);
      if (!(v > u) || !(w > 0.0)) continue;
      total += 2.0L * band_area(u, v, w, r);
    }
  }
  return static_cast<double>(total);
}

}  // namespace detail

inline DistributionFunction distribution_exact_piecewise(const QuotientSpec& spec, const std::vector<double>& lambdas) {
  spec.validate();
  detail::check_lambdas(lambdas);
  if (spec.dimension != 1) throw DomainError("exact path requires N = 1");
  if (!spec.f.piecewise_constant()) throw DomainError("exact path requires a piecewise-constant function");
  const auto ps = detail::covering_pieces(spec);
  std::vector<double> mu(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) mu[i] = detail::exact_mu(ps, spec.beta, lambdas[i]);
  detail::isotonic_nonincreasing(mu, std::vector<double>(mu.size(), 1.0));
  return {lambdas, mu, std::vector<double>(mu.size(), 0.0), Method::exact_piecewise, detail::make_meta(spec)};
}

// ---------------------------------------------------------------------------
// Grid path.

namespace detail {

// a + b h + c h^beta
struct LinPow {
  double a = 0.0, b = 0.0, c = 0.0;
  [[nodiscard]] double at(double h, double beta) const { return a + b * h + c * pow_nonneg(h, beta); }
  [[nodiscard]] double integral(double h1, double h2, double beta) const {
    return a * (h2 - h1) + 0.5 * b * (h2 * h2 - h1 * h1) +
           c * (pow_nonneg(h2, beta + 1.0) - pow_nonneg(h1, beta + 1.0)) / (beta + 1.0);
  }
  friend LinPow operator-(const LinPow& x, const LinPow& y) { return {x.a - y.a, x.b - y.b, x.c - y.c}; }
  friend LinPow operator+(const LinPow& x, const LinPow& y) { return {x.a + y.a, x.b + y.b, x.c + y.c}; }
};

template <class G>
double bracket_root(G g, double lo, double hi, double glo, double ghi) {
  (void)ghi;
  std::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)); };
  try {
    auto r = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, tol, iters);
    return 0.5 * (r.first + r.second);
  } catch (const std::exception&) {
    // fall back to bisection
    for (int i = 0; i < 200; ++i) {
      const double m = 0.5 * (lo + hi);
      if (m <= lo || m >= hi) break;
      const double gm = g(m);
      if ((gm < 0.0) == (glo < 0.0)) {
        lo = m;
        glo = gm;
      } else {
        hi = m;
      }
    }
    return 0.5 * (lo + hi);
  }
}

inline void linpow_roots(const LinPow& g, double beta, double h1, double h2, std::vector<double>& out) {
  if (g.c == 0.0 || beta == 1.0) {
    const double slope = g.b + (beta == 1.0 ? g.c : 0.0);
    if (slope != 0.0) {
      const double r = -g.a / slope;
      if (r > h1 && r < h2) out.push_back(r);
    }
    return;
  }
  std::vector<double> cuts{h1};
  const double t = -g.b / (g.c * beta);
  if (t > 0.0) {
    const double he = std::pow(t, 1.0 / (beta - 1.0));
    if (he > h1 && he < h2) cuts.push_back(he);
  }
  cuts.push_back(h2);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double u = cuts[i], v = cuts[i + 1];
    const double gu = g.at(u, beta), gv = g.at(v, beta);
    if ((gu < 0.0 && gv > 0.0) || (gu > 0.0 && gv < 0.0))
      out.push_back(bracket_root([&](double h) { return g.at(h, beta); }, u, v, gu, gv));
  }
}

inline double slope_of(const Piece& p) {
  if (p.shape == PieceShape::flat || !std::isfinite(p.lo) || !std::isfinite(p.hi)) return 0.0;
  return (p.v_hi - p.v_lo) / (p.hi - p.lo);
}

// Integral over h > 0 of L^1{x in P, x + h in Q : |u(x+h) - u(x)| >= lambda h^beta}
// for flat/affine P, Q with finite ends. Closed form between kinks.
inline double pair_integral(const Piece& P, const Piece& Q, double beta, double lambda, double h_cap) {
  const double LP = P.hi - P.lo, LQ = Q.hi - Q.lo, D = Q.lo - P.lo;
  const double ha = std::max(0.0, D - LP);
  const double hb = std::min(D + LQ, h_cap);
  if (!(hb > ha)) return 0.0;
  const double pb = slope_of(P), qb = slope_of(Q);
  const double c0 = Q.v_lo - P.v_lo - qb * D;
  double cx = qb - pb;
  const double ch = qb;
  if (std::abs(cx) <= 1e-12 * std::max(std::abs(pb), std::abs(qb))) cx = 0.0;

  // x measured from P.lo: admissible x in [max(0, D - h), min(LP, D + LQ - h)]
  const LinPow lo1{0.0, 0.0, 0.0}, lo2{D, -1.0, 0.0};
  const LinPow hi1{LP, 0.0, 0.0}, hi2{D + LQ, -1.0, 0.0};
  std::vector<LinPow> curves{lo1, lo2, hi1, hi2};
  LinPow band_lo, band_hi;
  if (cx != 0.0) {
    const LinPow center{-c0 / cx, -ch / cx, 0.0};
    const LinPow half{0.0, 0.0, lambda / std::abs(cx)};
    band_lo = center - half;
    band_hi = center + half;
    curves.push_back(band_lo);
    curves.push_back(band_hi);
  }
  std::vector<double> kinks{ha, hb};
  for (std::size_t i = 0; i < curves.size(); ++i)
    for (std::size_t j = i + 1; j < curves.size(); ++j) linpow_roots(curves[i] - curves[j], beta, ha, hb, kinks);
  if (cx == 0.0) {
    linpow_roots(LinPow{c0, ch, -lambda}, beta, ha, hb, kinks);
    linpow_roots(LinPow{c0, ch, lambda}, beta, ha, hb, kinks);
  }
  std::sort(kinks.begin(), kinks.end());

  long double total = 0.0L;
  for (std::size_t k = 0; k + 1 < kinks.size(); ++k) {
    const double u = kinks[k], v = kinks[k + 1];
    if (!(v > u)) continue;
    const double m = 0.5 * (u + v);
    const LinPow& lo = lo1.at(m, beta) >= lo2.at(m, beta) ? lo1 : lo2;
    const LinPow& hi = hi1.at(m, beta) <= hi2.at(m, beta) ? hi1 : hi2;
    const double len = hi.at(m, beta) - lo.at(m, beta);
    if (!(len > 0.0)) continue;
    if (cx == 0.0) {
      if (std::abs(c0 + ch * m) >= lambda * std::pow(m, beta)) total += (hi - lo).integral(u, v, beta);
      continue;
    }
    total += (hi - lo).integral(u, v, beta);
    const LinPow& blo = lo.at(m, beta) >= band_lo.at(m, beta) ? lo : band_lo;
    const LinPow& bhi = hi.at(m, beta) <= band_hi.at(m, beta) ? hi : band_hi;
    if (bhi.at(m, beta) > blo.at(m, beta)) total -= (bhi - blo).integral(u, v, beta);
  }
  return static_cast<double>(std::max(0.0L, total));
}

inline void value_range(const Piece& p, double& lo, double& hi) {
  lo = std::min(p.v_lo, p.v_hi);
  hi = std::max(p.v_lo, p.v_hi);
}

// Twice the sum of pair_integral over ordered pairs (P <= Q) of non-smooth pieces.
inline double exact_pairs_mu(const std::vector<Piece>& ps, double beta, double lambda, double global_cap) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i].shape == PieceShape::smooth) continue;
    double plo, phi;
    value_range(ps[i], plo, phi);
    for (std::size_t j = i; j < ps.size(); ++j) {
      const Piece& Q = ps[j];
      if (j > i && Q.lo - ps[i].hi >= global_cap) break;
      if (Q.shape == PieceShape::smooth) continue;
      double qlo, qhi;
      value_range(Q, qlo, qhi);
      const double dmax = std::max(qhi - plo, phi - qlo);
      if (!(dmax > 0.0)) continue;
      if (j == i && ps[i].shape == PieceShape::flat) continue;
      const double cap = std::pow(dmax / lambda, 1.0 / beta);
      if (j > i && Q.lo - ps[i].hi >= cap) continue;
      Piece P = ps[i];
      Piece R = Q;
      if (!std::isfinite(P.lo)) P.lo = R.lo - cap;
      if (!std::isfinite(R.hi)) R.hi = P.hi + cap;
      if (!std::isfinite(P.hi) || !std::isfinite(R.lo)) continue;  // both on one exterior
      if (j == i && (!std::isfinite(ps[i].lo) || !std::isfinite(ps[i].hi))) continue;
      total += pair_integral(P, R, beta, lambda, cap);
    }
  }
  return static_cast<double>(2.0L * total);
}

// Measure of {x in [s, e] : |g(x)| >= tau} for continuous g, by sampling,
// bracketing and extremum refinement.
template <class G>
double level_length(G g, double s, double e, double tau, int n) {
  if (!(e > s)) return 0.0;
  n = std::max(n, 4);
  std::vector<double> xs(n + 1), vs(n + 1);
  for (int i = 0; i <= n; ++i) {
    xs[i] = i == n ? e : s + (e - s) * i / n;
    vs[i] = std::abs(g(xs[i]));
  }
  // refine local extrema that might hide a pair of crossings
  std::vector<std::pair<double, double>> extra;
  for (int i = 0; i <= n; ++i) {
    const bool left = i == 0 || vs[i] >= vs[i - 1];
    const bool right = i == n || vs[i] >= vs[i + 1];
    const bool leftm = i == 0 || vs[i] <= vs[i - 1];
    const bool rightm = i == n || vs[i] <= vs[i + 1];
    const double a = xs[std::max(0, i - 1)], b = xs[std::min(n, i + 1)];
    // generous bound on how far the true extremum can sit from the sample
    const double bend = i == 0 || i == n ? std::abs(vs[i] - vs[i == 0 ? 1 : n - 1])
                                         : std::abs(vs[i - 1] - 2.0 * vs[i] + vs[i + 1]);
    if (std::abs(vs[i] - tau) > 2.0 * bend) continue;
    if (left && right && vs[i] < tau) {
      auto r = boost::math::tools::brent_find_minima([&](double x) { return -std::abs(g(x)); }, a, b, 40);
      if (-r.second >= tau) extra.emplace_back(r.first, -r.second);
    } else if (leftm && rightm && vs[i] >= tau) {
      auto r = boost::math::tools::brent_find_minima([&](double x) { return std::abs(g(x)); }, a, b, 40);
      if (r.second < tau) extra.emplace_back(r.first, r.second);
    }
  }
  if (!extra.empty()) {
    std::vector<std::pair<double, double>> all;
    for (int i = 0; i <= n; ++i) all.emplace_back(xs[i], vs[i]);
    for (auto& p : extra) all.push_back(p);
    std::sort(all.begin(), all.end());
    xs.clear();
    vs.clear();
    for (auto& p : all) {
      if (!xs.empty() && p.first == xs.back()) continue;
      xs.push_back(p.first);
      vs.push_back(p.second);
    }
  }
  double total = 0.0;
  auto h = [&](double x) { return std::abs(g(x)) - tau; };
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i], b = xs[i + 1];
    const double ga = vs[i] - tau, gb = vs[i + 1] - tau;
    if (ga >= 0.0 && gb >= 0.0) {
      total += b - a;
    } else if (ga < 0.0 && gb < 0.0) {
      continue;
    } else {
      const double r = bracket_root(h, a, b, ga, gb);
      total += ga >= 0.0 ? r - a : b - r;
    }
  }
  return total;
}

// m(h, tau) restricted to x where u near x or x + h is on a smooth piece.
inline double smooth_level_measure(const FunctionSpec& f, const std::vector<Piece>& ps, double h, double tau,
                                   double step, const Interval& window) {
  double total = 0.0;
  auto find = [&](double x) {  // piece containing x
    auto it = std::upper_bound(ps.begin(), ps.end(), x, [](double v, const Piece& p) { return v < p.lo; });
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - ps.begin()) - 1));
  };
  auto g = [&](double x) { return f.difference(x, h); };
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Piece& P = ps[i];
    const double s0 = std::max(P.lo, window.lo), e0 = std::min(P.hi, window.hi);
    if (!(e0 > s0)) continue;
    // walk the pieces hit by x + h
    std::size_t j = find(s0 + h);
    double s = s0;
    while (s < e0 && j < ps.size()) {
      const double e = std::min(e0, ps[j].hi - h);
      if (e > s && (P.shape == PieceShape::smooth || ps[j].shape == PieceShape::smooth)) {
        const int n = static_cast<int>(std::min(1e6, std::ceil((e - s) / step)));
        total += level_length(g, s, e, tau, std::max(n, 8));
      }
      s = std::max(s, e);
      ++j;
    }
  }
  return total;
}

inline bool has_smooth(const std::vector<Piece>& ps) {
  return std::any_of(ps.begin(), ps.end(), [](const Piece& p) { return p.shape == PieceShape::smooth; });
}

struct GridContext {
  const QuotientSpec* spec;
  std::vector<Piece> pieces;
  double oscillation;
  double lip;
  Interval var;
  bool smooth;
  std::vector<double> kinks;  // h where a smooth piece end meets another piece end
};

inline std::vector<double> smooth_kinks(const std::vector<Piece>& ps) {
  std::vector<double> ends, out;
  for (const Piece& p : ps)
    if (p.shape == PieceShape::smooth) {
      ends.push_back(p.lo);
      ends.push_back(p.hi);
    }
  std::vector<double> all;
  for (const Piece& p : ps) {
    if (std::isfinite(p.lo)) all.push_back(p.lo);
    if (std::isfinite(p.hi)) all.push_back(p.hi);
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (ends.size() * all.size() > 200000) return out;
  for (double a : ends)
    for (double b : all)
      if (b != a) out.push_back(std::abs(b - a));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline double grid_smooth_part(const GridContext& c, double lambda, int resolution, int depth, double tol,
                               double* quad_err = nullptr) {
  if (!c.smooth) return 0.0;
  const QuotientSpec& q = *c.spec;
  const double h_hi = h_upper(q, lambda, c.oscillation, c.lip);
  const double h_lo = h_lower(q, lambda, c.lip);
  if (!(h_hi > h_lo)) return 0.0;
  const double step = c.var.length() / resolution;
  auto window = [&](double h) -> Interval {
    if (q.local_mode) return {q.box[0].lo, q.box[0].hi - h};
    return {c.var.lo - h, c.var.hi};
  };
  auto integrand = [&](double h) {
    if (!(h > 0.0)) return 0.0;
    return smooth_level_measure(q.f, c.pieces, h, lambda * std::pow(h, q.beta), step, window(h));
  };
  // octave panels, further split where the segment structure changes
  std::vector<double> cuts;
  double hi = h_hi;
  for (int octave = 0; octave < 56 && hi > h_lo; ++octave) {
    cuts.push_back(hi);
    hi = std::max(h_lo, 0.5 * hi);
  }
  cuts.push_back(hi);
  for (double k : c.kinks)
    if (k > cuts.back() && k < h_hi) cuts.push_back(k);
  std::sort(cuts.begin(), cuts.end());
  const quad::Estimate e = quad::integrate_panels<15>(integrand, cuts, tol, depth);
  if (quad_err) *quad_err = 2.0 * e.error;
  return 2.0 * e.value;
}

}  // namespace detail

struct GridOptions {
  int resolution = 0;  // 0: the minimum that resolves the smallest feature
  bool estimate_error = true;
  int workers = 1;
  // adaptive h-quadrature over the smooth pieces
  int quad_depth = 24;
  double quad_tol = 1e-9;
};

/// Minimum resolution for which each smallest feature gets one x-sample.
inline int required_resolution(const FunctionSpec& f) {
  if (f.is_constant()) return 64;
  const double need = std::ceil(f.variation_interval().length() / f.min_feature());
  return static_cast<int>(std::max(64.0, std::min(need, 1e9)));
}

namespace detail {

// N = 2, radial piecewise-constant: exact lens areas and a 1-D radius integral.
inline double lens_area(double a, double b, double d) {
  // area of disk(0, a) intersect disk(d e, b)
  if (a <= 0.0 || b <= 0.0) return 0.0;
  if (d >= a + b) return 0.0;
  if (d <= std::abs(a - b)) return M_PI * std::min(a, b) * std::min(a, b);
  const double ca = std::clamp((d * d + a * a - b * b) / (2.0 * d * a), -1.0, 1.0);
  const double cb = std::clamp((d * d + b * b - a * a) / (2.0 * d * b), -1.0, 1.0);
  const double k = (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b);
  return a * a * std::acos(ca) + b * b * std::acos(cb) - 0.5 * std::sqrt(std::max(0.0, k));
}

struct Annulus {
  double r_in, r_out;  // r_out may be +inf for the exterior
  double value;
};

inline std::vector<Annulus> radial_annuli(const FunctionSpec& f) {
  const FunctionSpec& base = f.radial_base();
  const double s = f.transform().scale, amp = f.transform().amplitude;
  std::vector<Annulus> out;
  double r = 0.0;
  for (const Piece& p : base.pieces()) {
    if (p.hi <= 0.0) continue;
    const double lo = std::max(0.0, p.lo) / s, hi = p.hi / s;
    if (lo > r) out.push_back({r, lo, amp * base.left_value()});
    out.push_back({lo, hi, amp * p.v_lo});
    r = hi;
  }
  out.push_back({r, std::numeric_limits<double>::infinity(), amp * base.right_value()});
  return out;
}

// Area of {x in A : x + d e in B}.
inline double annulus_overlap(const Annulus& A, const Annulus& B, double d) {
  auto disk = [&](double ra, double rb) {
    if (std::isinf(ra) && std::isinf(rb)) return std::numeric_limits<double>::infinity();
    if (std::isinf(ra)) return M_PI * rb * rb;
    if (std::isinf(rb)) return M_PI * ra * ra;
    return lens_area(ra, rb, d);
  };
  return disk(A.r_out, B.r_out) - disk(A.r_in, B.r_out) - disk(A.r_out, B.r_in) + disk(A.r_in, B.r_in);
}

inline double radial_grid_mu(const std::vector<Annulus>& an, double beta, double lambda) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < an.size(); ++i) {
    for (std::size_t j = 0; j < an.size(); ++j) {
      if (i == j) continue;
      const double gap = std::abs(an[i].value - an[j].value);
      if (gap == 0.0) continue;
      const double rho_max = std::pow(gap / lambda, 1.0 / beta);
      // kinks of the overlap area in d
      std::vector<double> cuts{0.0, rho_max};
      for (double a : {an[i].r_in, an[i].r_out})
        for (double b : {an[j].r_in, an[j].r_out}) {
          if (!std::isfinite(a) || !std::isfinite(b)) continue;
          for (double k : {a + b, std::abs(a - b)})
            if (k > 0.0 && k < rho_max) cuts.push_back(k);
        }
      std::sort(cuts.begin(), cuts.end());
      auto g = [&](double d) { return d * annulus_overlap(an[i], an[j], d); };
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (!(cuts[k + 1] > cuts[k])) continue;
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, cuts[k], cuts[k + 1], 15, 1e-13, &err);
      }
    }
  }
  return static_cast<double>(2.0L * M_PI * total);
}

}  // namespace detail

namespace detail {

// Sine bump in closed form. In base coordinates the difference at step k is a
// single sinusoid on each of three y-ranges (only y + k inside the support,
// both inside, only y inside), so the level measure is a count of periods.

// |{t in [0, x] : |sin t| >= c}| extended to all real x, for c in [0, 1].
inline double sine_level_cdf(double x, double c) {
  const double as = std::asin(c), per = M_PI - 2.0 * as;
  const double n = std::floor(x / M_PI);
  return n * per + std::clamp(x - n * M_PI - as, 0.0, per);
}

// |{y in [y0, y1] : |amp sin(a y + phase)| >= tau}|.
inline double sine_interval_measure(double y0, double y1, double a, double phase, double amp, double tau) {
  if (!(y1 > y0)) return 0.0;
  amp = std::abs(amp);
  if (tau <= 0.0) return y1 - y0;
  if (!(amp >= tau)) return 0.0;
  const double c = tau / amp;
  return (sine_level_cdf(a * y1 + phase, c) - sine_level_cdf(a * y0 + phase, c)) / a;
}

// Level measure of the base difference at step k > 0 over the window [w0, w1].
inline double sine_level_measure(int m, double k, double tau, double w0, double w1) {
  const double a = m * M_PI;
  double total = 0.0;
  // only y + k in [-1, 1]
  total += sine_interval_measure(std::max(w0, -1.0 - k), std::min({w1, -1.0, 1.0 - k}), a, a * k, 1.0, tau);
  // both inside
  if (k < 2.0)
    total += sine_interval_measure(std::max(w0, -1.0), std::min(w1, 1.0 - k), a, a * k / 2.0 + M_PI / 2.0,
                                   2.0 * std::sin(a * k / 2.0), tau);
  // only y inside
  total += sine_interval_measure(std::max({w0, -1.0, 1.0 - k}), std::min(w1, 1.0), a, 0.0, 1.0, tau);
  return total;
}

struct SineGrid {
  double value, error;
};

inline SineGrid sine_grid_mu(const QuotientSpec& q, double lambda, int depth, double tol) {
  const auto& fam = std::get<family::SineBump>(q.f.family());
  const Transform& t = q.f.transform();
  const int m = fam.m;
  const double s = t.scale, amp = std::abs(t.amplitude);
  const double h_hi = h_upper(q, lambda, 2.0 * amp, amp * s * m * M_PI);
  const double h_lo = h_lower(q, lambda, amp * s * m * M_PI);
  if (!(h_hi > h_lo)) return {0.0, 0.0};
  const double k_hi = s * h_hi, k_lo = s * h_lo;
  // threshold in base units as a function of k
  auto thr = [&](double k) { return lambda * std::pow(k / s, q.beta) / amp; };
  const double inf = std::numeric_limits<double>::infinity();
  const double w0 = q.local_mode ? s * (q.box[0].lo - t.shift) : -inf;
  const double w1_0 = q.local_mode ? s * (q.box[0].hi - t.shift) : inf;
  auto integrand = [&](double k) {
    if (!(k > 0.0)) return 0.0;
    return sine_level_measure(m, k, thr(k), w0, w1_0 - (q.local_mode ? k : 0.0));
  };

  std::vector<double> cuts;
  double hi = k_hi;
  for (int octave = 0; octave < 56 && hi > k_lo; ++octave) {
    cuts.push_back(hi);
    hi = std::max(k_lo, 0.5 * hi);
  }
  cuts.push_back(hi);
  auto add = [&](double k) {
    if (k > k_lo && k < k_hi) cuts.push_back(k);
  };
  add(2.0);
  if (thr(k_hi) > 0.0) add(s * std::pow(amp / lambda, 1.0 / q.beta));  // edge sinusoids lose their crests
  if (q.local_mode)
    for (double k : {-1.0 - w0, 1.0 - w0, w1_0 + 1.0, w1_0 - 1.0}) add(k);
  // crests of the interior sinusoid meet the threshold: square-root kinks
  const double halfp = 2.0 / m;
  auto gap = [&](double k) { return 2.0 * std::abs(std::sin(m * M_PI * k / 2.0)) - thr(k); };
  for (int j = 0; j * halfp < std::min(2.0, k_hi); ++j) {
    const double a = j * halfp, b = std::min((j + 1) * halfp, 2.0);
    add(a);
    constexpr int probes = 16;
    double u = a, gu = gap(u);
    for (int i = 1; i <= probes; ++i) {
      const double v = a + (b - a) * i / probes, gv = gap(v);
      if ((gu < 0.0) != (gv < 0.0) && u > 0.0) add(bracket_root(gap, u, v, gu, gv));
      u = v;
      gu = gv;
    }
  }
  std::sort(cuts.begin(), cuts.end());
  const quad::Estimate e = quad::integrate_panels<15>(integrand, cuts, tol, depth);
  return {2.0 * e.value / (s * s), 2.0 * e.error / (s * s)};
}

}  // namespace detail

inline DistributionFunction distribution_grid(const QuotientSpec& spec, const std::vector<double>& lambdas,
                                              const GridOptions& opt = {}) {
  spec.validate();
  detail::check_lambdas(lambdas);
  if (opt.resolution != 0 && opt.resolution < 64) throw DomainError("grid resolution must be at least 64");
  DfMeta meta = detail::make_meta(spec);
  meta.resolution = opt.resolution;
  std::vector<double> mu(lambdas.size(), 0.0), err(lambdas.size(), 0.0);

  if (spec.f.is_constant()) return {lambdas, mu, err, Method::grid, meta};

  if (spec.dimension == 2) {
    if (spec.local_mode) throw DomainError("grid path in N = 2 supports global mode only");
    if (!spec.f.radial_base().pieces_available() || !spec.f.piecewise_constant())
      throw DomainError("grid path in N = 2 supports radial extensions of piecewise-constant profiles only");
    const auto an = detail::radial_annuli(spec.f);
    detail::parallel_for(lambdas.size(), opt.workers,
                         [&](std::size_t i) { mu[i] = detail::radial_grid_mu(an, spec.beta, lambdas[i]); });
    detail::isotonic_nonincreasing(mu, std::vector<double>(mu.size(), 1.0));
    return {lambdas, mu, err, Method::grid, meta};
  }

  if (std::holds_alternative<family::SineBump>(spec.f.family())) {
    detail::parallel_for(lambdas.size(), opt.workers, [&](std::size_t i) {
      const auto r = detail::sine_grid_mu(spec, lambdas[i], opt.quad_depth, opt.quad_tol);
      mu[i] = r.value;
      if (opt.estimate_error) err[i] = r.error;
    });
    return {lambdas, mu, err, Method::grid, meta};
  }

  if (!spec.f.pieces_available())
    throw DomainError("grid path needs the piece structure; use Monte Carlo for this function");
  const int need = required_resolution(spec.f);
  const int resolution = opt.resolution == 0 ? need : opt.resolution;
  if (resolution < need)
    throw DomainError("grid resolution " + std::to_string(resolution) + " does not resolve the smallest feature; need at least " +
                      std::to_string(need));
  meta.resolution = resolution;

  detail::GridContext ctx{&spec, detail::covering_pieces(spec), detail::osc(spec.f), spec.f.lipschitz(),
                          spec.f.variation_interval(), false, {}};
  ctx.smooth = detail::has_smooth(ctx.pieces);
  if (ctx.smooth) ctx.kinks = detail::smooth_kinks(ctx.pieces);
  if (spec.local_mode) ctx.var = spec.box[0];

  detail::parallel_for(lambdas.size(), opt.workers, [&](std::size_t i) {
    const double lambda = lambdas[i];
    const double cap = detail::h_upper(spec, lambda, ctx.oscillation, std::numeric_limits<double>::infinity());
    const double exact = detail::exact_pairs_mu(ctx.pieces, spec.beta, lambda, cap);
    double quad_err = 0.0;
    const double smooth = detail::grid_smooth_part(ctx, lambda, resolution, opt.quad_depth, opt.quad_tol, &quad_err);
    mu[i] = exact + smooth;
    if (opt.estimate_error && ctx.smooth) {
      const double coarse =
          detail::grid_smooth_part(ctx, lambda, std::max(32, resolution / 2), opt.quad_depth, opt.quad_tol);
      err[i] = std::max(std::abs(smooth - coarse), quad_err);
    }
  });
  std::vector<double> w(mu.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / (err[i] * err[i] + 1e-300);
  detail::isotonic_nonincreasing(mu, w);
  return {lambdas, mu, err, Method::grid, meta};
}

inline DistributionFunction distribution_grid(const QuotientSpec& spec, const std::vector<double>& lambdas, int resolution) {
  GridOptions o;
  o.resolution = resolution;
  return distribution_grid(spec, lambdas, o);
}

// ---------------------------------------------------------------------------
// Monte Carlo path.

struct McOptions {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::uint64_t chunk = 4096;
  /// Lower h limit as a fraction of the largest admissible h at lambda_max.
  double r_min_fraction = 1e-6;
};

namespace detail {

inline double canonical(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Proposal for the x coordinate in N = 1: a defensive mixture of the uniform
// law on the window and either uniform laws on [b - h, b] around the jumps b,
// or, for the staircase, a uniform mixture over the depths of the uniform law
// on the union of that depth's ramps.
struct LineProposal {
  std::vector<double> jumps;  // sorted
  std::optional<family::Staircase> stair;
  double shift = 0.0, scale = 1.0;  // x = shift + x_base / scale

  [[nodiscard]] double stair_density(double x) const {
    const auto g = staircase_geometry(*stair);
    const long double xb = scale * (static_cast<long double>(x) - shift);
    if (xb < 0.0L || xb > 1.0L) return 0.0;
    const long double k = stair->k;
    long double pos = xb, inv_measure = 1.0L, sum = 1.0L;
    for (int level = 0; level < stair->j; ++level) {
      const long double scaled = pos * k;
      long double cell = std::floor(scaled);
      if (cell > k - 1) cell = k - 1;
      const long double t = scaled - cell;
      if (t < g.cell_ramp_lo || t >= g.cell_ramp_lo + g.cell_ramp_len) break;
      pos = (t - g.cell_ramp_lo) / g.cell_ramp_len;
      inv_measure /= g.cell_ramp_len;
      sum += inv_measure;
    }
    return static_cast<double>(scale * sum / (stair->j + 1));
  }

  [[nodiscard]] double density(double x, double h, const Interval& w) const {
    const double uni = 1.0 / w.length();
    if (stair) return 0.5 * uni + 0.5 * stair_density(x);
    if (jumps.empty()) return uni;
    const auto lo = std::lower_bound(jumps.begin(), jumps.end(), x);
    const auto hi = std::upper_bound(jumps.begin(), jumps.end(), x + h);
    const double cover = static_cast<double>(hi - lo);
    return 0.5 * uni + 0.5 * cover / (static_cast<double>(jumps.size()) * h);
  }

  double draw(std::mt19937_64& rng, double h, const Interval& w) const {
    const bool mixed = stair || !jumps.empty();
    if (!mixed || canonical(rng) < 0.5) return w.lo + w.length() * canonical(rng);
    if (stair) {
      const auto g = staircase_geometry(*stair);
      const int depth = std::min(stair->j, static_cast<int>(canonical(rng) * (stair->j + 1)));
      long double x0 = 0.0L, width = 1.0L;
      for (int level = 0; level < depth; ++level) {
        const long double cell = std::min<long double>(stair->k - 1, std::floor(canonical(rng) * stair->k));
        x0 += width * (cell + g.cell_ramp_lo) / stair->k;
        width *= g.width;
      }
      return static_cast<double>(shift + (x0 + width * canonical(rng)) / scale);
    }
    const std::size_t k = std::min<std::size_t>(jumps.size() - 1, static_cast<std::size_t>(canonical(rng) * jumps.size()));
    return jumps[k] - h * canonical(rng);
  }
};

inline LineProposal line_proposal(const QuotientSpec& q, std::vector<double> jumps) {
  LineProposal out;
  if (const auto* s = std::get_if<family::Staircase>(&q.f.family()); s && s->j > 0) {
    out.stair = *s;
    out.shift = q.f.transform().shift;
    out.scale = q.f.transform().scale;
    return out;
  }
  out.jumps = std::move(jumps);
  return out;
}

inline std::vector<double> jump_points(const QuotientSpec& q) {
  std::vector<double> out;
  const FunctionSpec& f = q.f;
  if (q.dimension != 1 || !f.pieces_available() || f.is_constant()) return out;
  const auto& ps = f.pieces();
  if (ps.front().v_lo != f.left_value()) out.push_back(ps.front().lo);
  for (std::size_t i = 0; i + 1 < ps.size(); ++i)
    if (ps[i].v_hi != ps[i + 1].v_lo) out.push_back(ps[i].hi);
  if (ps.back().v_hi != f.right_value()) out.push_back(ps.back().hi);
  if (q.local_mode) {
    std::vector<double> in;
    for (double b : out)
      if (b > q.box[0].lo && b < q.box[0].hi) in.push_back(b);
    out.swap(in);
  }
  return out;
}

}  // namespace detail

inline DistributionFunction distribution_mc(const QuotientSpec& spec, const std::vector<double>& lambdas,
                                            const McOptions& opt) {
  spec.validate();
  detail::check_lambdas(lambdas);
  if (opt.samples < 10000) throw DomainError("Monte Carlo needs at least 10^4 samples");
  if (opt.chunk == 0) throw DomainError("chunk size must be positive");
  DfMeta meta = detail::make_meta(spec);
  meta.seed = opt.seed;
  meta.samples = opt.samples;
  const std::size_t nl = lambdas.size();
  std::vector<double> mu(nl, 0.0), se(nl, 0.0);
  if (spec.f.is_constant()) return {lambdas, mu, se, Method::monte_carlo, meta};

  const int N = spec.dimension;
  const double oscill = detail::osc(spec.f);
  const double lip = spec.f.lipschitz();
  double r_max = detail::h_upper(spec, lambdas.front(), oscill, lip);
  double r_min = opt.r_min_fraction * detail::h_upper(spec, lambdas.back(), oscill, lip);
  r_min = std::max(r_min, detail::h_lower(spec, lambdas.front(), lip));
  if (!(r_min < r_max) || !std::isfinite(r_max)) throw NumericalError("degenerate Monte Carlo sampling window (r_min >= r_max)");

  const int panels = std::max(1, static_cast<int>(std::ceil(std::log2(r_max / r_min))));
  const double log_width = std::log(r_max / r_min) / panels;
  const double log_lo = std::log(r_min);
  const Interval var = spec.local_mode ? spec.box[0] : (N == 1 ? spec.f.variation_interval() : Interval{});
  const double R = spec.f.support_radius();
  const detail::LineProposal proposal = detail::line_proposal(spec, detail::jump_points(spec));

  const std::uint64_t chunks = (opt.samples + opt.chunk - 1) / opt.chunk;
  const std::size_t stride = nl + 1;
  struct Acc {
    std::vector<double> s, s2;
    std::vector<std::uint64_t> n;
  };
  auto fresh = [&] {
    return Acc{std::vector<double>(static_cast<std::size_t>(panels) * stride, 0.0),
               std::vector<double>(static_cast<std::size_t>(panels) * stride, 0.0),
               std::vector<std::uint64_t>(static_cast<std::size_t>(panels), 0)};
  };
  Acc total = fresh();

  auto run_chunk = [&](std::uint64_t c, Acc& acc) {
    std::mt19937_64 rng(derive_seed(opt.seed, c));
    const std::uint64_t begin = c * opt.chunk, end = std::min(opt.samples, begin + opt.chunk);
    for (std::uint64_t sidx = begin; sidx < end; ++sidx) {
      const int p = static_cast<int>(sidx % static_cast<std::uint64_t>(panels));
      const double h = std::exp(log_lo + log_width * (p + detail::canonical(rng)));
      double weight, F;
      if (N == 1) {
        const Interval w = spec.local_mode ? Interval{var.lo, var.hi - h} : Interval{var.lo - h, var.hi};
        if (!(w.hi > w.lo)) {
          acc.n[p] += 1;
          continue;
        }
        const double x = proposal.draw(rng, h, w);
        if (x < w.lo || x > w.hi) {
          acc.n[p] += 1;
          continue;
        }
        weight = 2.0 * log_width * h / proposal.density(x, h, w);
        F = std::abs(spec.f.difference(x, h)) / std::pow(h, spec.beta);
      } else {
        const double phi = M_PI * detail::canonical(rng);
        const double side = 2.0 * (R + h);
        const double x[2] = {-R - h + side * detail::canonical(rng), -R - h + side * detail::canonical(rng)};
        const double y[2] = {x[0] + h * std::cos(phi), x[1] + h * std::sin(phi)};
        weight = 2.0 * M_PI * log_width * h * h * side * side;
        F = std::abs(spec.f.evaluate(y) - spec.f.evaluate(x)) / std::pow(h, spec.beta);
      }
      acc.n[p] += 1;
      const std::size_t idx = static_cast<std::size_t>(std::upper_bound(lambdas.begin(), lambdas.end(), F) - lambdas.begin());
      if (idx == 0) continue;
      acc.s[p * stride + idx] += weight;
      acc.s2[p * stride + idx] += weight * weight;
    }
  };

  // batches of chunks, reduced in chunk order so the result does not depend on workers
  const std::uint64_t batch = 64;
  for (std::uint64_t b0 = 0; b0 < chunks; b0 += batch) {
    const std::uint64_t bn = std::min(batch, chunks - b0);
    std::vector<Acc> parts(bn);
    detail::parallel_for(bn, opt.workers, [&](std::size_t k) {
      parts[k] = fresh();
      run_chunk(b0 + k, parts[k]);
    });
    for (const Acc& a : parts) {
      for (std::size_t i = 0; i < total.s.size(); ++i) {
        total.s[i] += a.s[i];
        total.s2[i] += a.s2[i];
      }
      for (int p = 0; p < panels; ++p) total.n[p] += a.n[p];
    }
  }

  std::vector<long double> var_acc(nl, 0.0L), mu_acc(nl, 0.0L);
  for (int p = 0; p < panels; ++p) {
    const double n = static_cast<double>(total.n[p]);
    if (n < 2) continue;
    long double s = 0.0L, s2 = 0.0L;
    for (std::size_t i = nl; i-- > 0;) {
      s += total.s[p * stride + i + 1];
      s2 += total.s2[p * stride + i + 1];
      const long double mean = s / n;
      const long double v = std::max(0.0L, (s2 / n - mean * mean) / (n - 1));
      mu_acc[i] += mean;
      var_acc[i] += v;
    }
  }
  for (std::size_t i = 0; i < nl; ++i) {
    mu[i] = static_cast<double>(mu_acc[i]);
    se[i] = std::sqrt(static_cast<double>(var_acc[i]));
  }
  return {lambdas, mu, se, Method::monte_carlo, meta};
}

inline DistributionFunction distribution_mc(const QuotientSpec& spec, const std::vector<double>& lambdas,
                                            std::uint64_t samples, std::uint64_t seed) {
  McOptions o;
  o.samples = samples;
  o.seed = seed;
  return distribution_mc(spec, lambdas, o);
}

// ---------------------------------------------------------------------------

struct LevelMeasure {
  double measure;
  double stderr_;
  Method method;
};

/// mu at a single lambda by the most accurate path available for the family.
inline LevelMeasure level_measure(const QuotientSpec& spec, double lambda, std::uint64_t seed = 0) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("lambda must be positive");
  const std::vector<double> grid{lambda};
  if (spec.dimension == 1 && spec.f.piecewise_constant()) {
    const auto df = distribution_exact_piecewise(spec, grid);
    return {df.mu()[0], 0.0, df.method()};
  }
  const bool radial_pc = spec.dimension == 2 && spec.f.piecewise_constant() && !spec.local_mode;
  if ((spec.dimension == 1 && spec.f.pieces_available()) || radial_pc) {
    GridOptions o;
    o.resolution = std::max(4096, spec.dimension == 1 ? required_resolution(spec.f) : 64);
    const auto df = distribution_grid(spec, grid, o);
    return {df.mu()[0], df.stderrs()[0], df.method()};
  }
  McOptions o;
  o.seed = seed;
  const auto df = distribution_mc(spec, grid, o);
  return {df.mu()[0], df.stderrs()[0], df.method()};
}

/// Log-spaced grid whose top end is where the support cap forces mu below
/// 1e-12 of the squared box measure.
inline std::vector<double> auto_grid(const QuotientSpec& spec, std::size_t n = 128) {
  spec.validate();
  if (spec.f.is_constant()) return log_grid(1e-2, 1e2, n);
  const double o = detail::osc(spec.f);
  const double diam = spec.dimension == 1 ? spec.f.variation_interval().length() : 2.0 * spec.f.support_radius();
  const double vol = std::pow(diam, spec.dimension);
  // mu <= c_N (diam + r)^N r^N with r the cap; solve c_N diam^N r^N = 1e-12 vol^2
  const double cN = spec.dimension == 1 ? 4.0 : 4.0 * M_PI * M_PI;
  const double r = std::pow(1e-12 * vol * vol / (cN * vol), 1.0 / spec.dimension);
  double hi = o / std::pow(r, spec.beta);
  const double lip = spec.f.lipschitz();
  if (std::isfinite(lip) && spec.beta > 1.0) {
    // Lipschitz cap: h <= (lip/lambda)^(1/(beta-1)) gives mu <~ c diam h
    const double hr = 1e-12 * vol / cN;
    hi = std::min(hi, lip / std::pow(hr, spec.beta - 1.0));
  }
  const double lo = 1e-2 * o / std::pow(std::max(diam, 1e-300), spec.beta);
  return log_grid(lo, std::max(hi, lo * 10.0), n);
}

}  // namespace qlab
