#pragma once

// Quasinorms and seminorms computed from distribution functions, plus direct
// difference-energy integrals used for Gagliardo seminorms and the kernel
// estimates of the harness.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "qlab/core.hpp"
#include "qlab/functions.hpp"
#include "qlab/quadrature.hpp"
#include "qlab/quotient.hpp"
#include "qlab/ratefit.hpp"

namespace qlab {

struct LorentzParams {
  double p = 1.0;
  double q = std::numeric_limits<double>::infinity();

  LorentzParams() = default;
  LorentzParams(double p_, double q_) : p(p_), q(q_) { validate(); }

  [[nodiscard]] bool weak() const { return std::isinf(q); }
  void validate() const {
    if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("Lorentz exponent p must lie in [1, inf)");
    if (!(q >= 1.0)) throw DomainError("Lorentz exponent q must lie in [1, inf]");
  }
};

/// s = theta s1 + (1 - theta), 1/p = theta/p1 + (1 - theta).
struct InterpolationParams {
  double s1, p1, theta;
  double s, p;
  double alpha;     // (s - 1/p) / (1 - 1/p)
  double q_target;  // p1 / theta

  [[nodiscard]] bool critical() const { return s1 * p1 >= 1.0; }
  [[nodiscard]] bool borderline() const { return std::abs(s1 * p1 - 1.0) <= 1e-12; }
  [[nodiscard]] const char* regime() const {
    return borderline() ? "critical" : (critical() ? "supercritical" : "subcritical");
  }
  /// Quotient exponent N/p + s.
  [[nodiscard]] double beta(int n = 1) const { return n / p + s; }
};

inline InterpolationParams interpolation_params(double s1, double p1, double theta) {
  if (!(s1 > 0.0 && s1 < 1.0)) throw DomainError("s1 must lie in (0, 1)");
  if (!(p1 > 1.0) || !std::isfinite(p1)) throw DomainError("p1 must lie in (1, inf)");
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("theta must lie in (0, 1)");
  InterpolationParams ip{s1, p1, theta, 0, 0, 0, 0};
  ip.s = theta * s1 + (1.0 - theta);
  ip.p = 1.0 / (theta / p1 + (1.0 - theta));
  ip.alpha = (ip.s - 1.0 / ip.p) / (1.0 - 1.0 / ip.p);
  ip.q_target = p1 / theta;
  if (std::abs(ip.s - (theta * s1 + 1.0 - theta)) > 1e-14 || std::abs(1.0 / ip.p - theta / p1 - (1.0 - theta)) > 1e-14)
    throw NumericalError("interpolation identities failed to reproduce");
  return ip;
}

namespace detail {

// Slope margin for classifying a tail as divergent.
inline constexpr double kTailMargin = 0.05;

// Integral of g over one log-cell of length len (in log lambda), with g
// interpolated as a power law between the end values.
inline double log_cell(double g0, double g1, double len) {
  if (g0 > 0.0 && g1 > 0.0) {
    const double r = std::log(g1 / g0);
    if (std::abs(r) < 1e-9) return len * 0.5 * (g0 + g1);
    return len * (g1 - g0) / r;
  }
  return len * 0.5 * (g0 + g1);
}

// Power-law interpolation of g at t in [t0, t1] (log lambda coordinates).
inline double log_interp(double t0, double g0, double t1, double g1, double t) {
  if (t1 == t0) return g0;
  const double w = (t - t0) / (t1 - t0);
  if (g0 > 0.0 && g1 > 0.0) return std::exp((1.0 - w) * std::log(g0) + w * std::log(g1));
  return (1.0 - w) * g0 + w * g1;
}

/// lambda^a mu(lambda)^b on the grid.
inline std::vector<double> lambda_moment(const DistributionFunction& df, double a, double b) {
  std::vector<double> g(df.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = df.mu()[i] > 0.0 ? std::pow(df.lambdas()[i], a) * std::pow(df.mu()[i], b) : 0.0;
  return g;
}

struct TailFit {
  bool vanishes = false;  // the end value is exactly 0
  double slope = 0.0;     // d log g / d log lambda
  double native = 0.0;    // the same slope against the untransformed lambda
  double end_value = 0.0;
};

// Least-squares log-log slope of g over the decade at one end of the grid.
// `power` is the exponent of a power transform already applied to lambda;
// the window and the classification use the untransformed scale, so that
// reindexing a df does not change which points are fitted.
inline TailFit end_fit(const std::vector<double>& lambdas, const std::vector<double>& g, bool top, double power = 1.0) {
  TailFit t;
  const std::size_t n = g.size();
  t.end_value = top ? g.back() : g.front();
  if (t.end_value == 0.0) {
    t.vanishes = true;
    return t;
  }
  std::vector<double> xs, ys;
  const double decade = std::pow(10.0, power);
  const double edge = top ? lambdas.back() / decade : lambdas.front() * decade;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = top ? n - 1 - k : k;
    const bool inside = top ? lambdas[i] >= edge : lambdas[i] <= edge;
    if ((!inside && xs.size() >= 3) || !(g[i] > 0.0)) break;
    xs.push_back(lambdas[i]);
    ys.push_back(g[i]);
  }
  if (xs.size() < 2) {
    // a single positive end point next to zeros: the decay is faster than any power
    t.slope = t.native = top ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return t;
  }
  if (top) {
    std::reverse(xs.begin(), xs.end());
    std::reverse(ys.begin(), ys.end());
  }
  if (xs.size() == 2) {
    t.slope = std::log(ys[1] / ys[0]) / std::log(xs[1] / xs[0]);
  } else {
    t.slope = fit_power_law(xs, ys).gamma;
  }
  t.native = t.slope * power;
  return t;
}

// int_0^inf g dlambda/lambda from grid values plus power-law extensions at
// both ends; returns +inf when either extension diverges.
inline Extended log_integral(const std::vector<double>& lambdas, const std::vector<double>& g, bool extend_low = true,
                             double power = 1.0) {
  long double total = 0.0L;
  for (std::size_t i = 0; i + 1 < g.size(); ++i)
    total += log_cell(g[i], g[i + 1], std::log(lambdas[i + 1] / lambdas[i]));
  const TailFit hi = end_fit(lambdas, g, true, power);
  if (!hi.vanishes) {
    if (hi.native >= -kTailMargin) return Extended::infinity();
    if (std::isfinite(hi.slope)) total += hi.end_value / -hi.slope;
  }
  if (extend_low) {
    const TailFit lo = end_fit(lambdas, g, false, power);
    if (!lo.vanishes) {
      if (lo.native <= kTailMargin) return Extended::infinity();
      if (std::isfinite(lo.slope)) total += lo.end_value / lo.slope;
    }
  }
  return Extended(static_cast<double>(total));
}

inline std::size_t mass_points(const std::vector<double>& g) {
  const double top = *std::max_element(g.begin(), g.end());
  return static_cast<std::size_t>(std::count_if(g.begin(), g.end(), [&](double v) { return v >= 1e-6 * top; }));
}

}  // namespace detail

/// (p int lambda^q mu^{q/p} dlambda/lambda)^{1/q}; for q = inf,
/// sup lambda mu^{1/p}. Divergent tails give the +inf sentinel.
inline Extended lorentz_quasinorm(const DistributionFunction& df, const LorentzParams& lp) {
  lp.validate();
  if (df.size() < 2) throw DomainError("distribution function needs at least two grid points");
  if (df.all_zero()) return Extended(0.0);
  const double p = lp.p;
  if (lp.weak()) {
    const auto g = detail::lambda_moment(df, p, 1.0);  // lambda^p mu
    const double pw = df.meta().power;
    const auto hi = detail::end_fit(df.lambdas(), g, true, pw);
    const auto lo = detail::end_fit(df.lambdas(), g, false, pw);
    if ((!hi.vanishes && hi.native > detail::kTailMargin) || (!lo.vanishes && lo.native < -detail::kTailMargin))
      return Extended::infinity();
    return Extended(std::pow(*std::max_element(g.begin(), g.end()), 1.0 / p));
  }
  const double q = lp.q;
  const auto g = detail::lambda_moment(df, q, q / p);
  if (detail::mass_points(g) < 16)
    throw NumericalError("distribution grid too coarse: fewer than 16 points span the mass of the integrand");
  const Extended integral = detail::log_integral(df.lambdas(), g, true, df.meta().power);
  if (integral.is_infinite()) return integral;
  return Extended(std::pow(p * integral.value(), 1.0 / q));
}

inline Extended weak_quasinorm(const DistributionFunction& df, double p) {
  return lorentz_quasinorm(df, LorentzParams(p, std::numeric_limits<double>::infinity()));
}

/// The Lorentz integrand restricted to [lambda_min, lambda_max] (no tail
/// extension); q = inf gives the windowed supremum.
inline double truncated_quasinorm(const DistributionFunction& df, const LorentzParams& lp, double lambda_min,
                                  double lambda_max) {
  lp.validate();
  if (!(lambda_max > lambda_min) || !(lambda_min > 0.0)) throw DomainError("truncation window is empty");
  const auto& ls = df.lambdas();
  const double tol = 1e-12;
  if (lambda_min < ls.front() * (1 - tol) || lambda_max > ls.back() * (1 + tol))
    throw DomainError("truncation window [" + format_double(lambda_min) + ", " + format_double(lambda_max) +
                      "] leaves the distribution grid");
  lambda_min = std::max(lambda_min, ls.front());
  lambda_max = std::min(lambda_max, ls.back());
  const double p = lp.p, q = lp.weak() ? p : lp.q;
  const auto g = lp.weak() ? detail::lambda_moment(df, p, 1.0) : detail::lambda_moment(df, q, q / p);
  // windowed samples: interpolated end points plus interior grid points
  std::vector<double> ts, gs;
  auto at = [&](double lam) {
    const auto it = std::upper_bound(ls.begin(), ls.end(), lam);
    const std::size_t i = std::min<std::size_t>(ls.size() - 1, std::max<std::ptrdiff_t>(1, it - ls.begin())) - 1;
    return detail::log_interp(std::log(ls[i]), g[i], std::log(ls[i + 1]), g[i + 1], std::log(lam));
  };
  ts.push_back(std::log(lambda_min));
  gs.push_back(at(lambda_min));
  for (std::size_t i = 0; i < ls.size(); ++i)
    if (ls[i] > lambda_min && ls[i] < lambda_max) {
      ts.push_back(std::log(ls[i]));
      gs.push_back(g[i]);
    }
  ts.push_back(std::log(lambda_max));
  gs.push_back(at(lambda_max));
  if (lp.weak()) return std::pow(*std::max_element(gs.begin(), gs.end()), 1.0 / p);
  long double total = 0.0L;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) total += detail::log_cell(gs[i], gs[i + 1], ts[i + 1] - ts[i]);
  return std::pow(p * static_cast<double>(total), 1.0 / q);
}

/// int_lambda^inf mu(t) dt.
inline Extended excess_integral(const DistributionFunction& df, double lambda) {
  const auto& ls = df.lambdas();
  if (!(lambda > 0.0)) throw DomainError("excess integral needs lambda > 0");
  if (lambda < ls.front() * (1 - 1e-12)) throw DomainError("lambda " + format_double(lambda) + " lies below the grid");
  if (df.all_zero()) return Extended(0.0);
  const auto g = detail::lambda_moment(df, 1.0, 1.0);  // t mu(t), integrated against dt/t
  const auto tail = detail::end_fit(ls, g, true, df.meta().power);
  double tail_value = 0.0;
  if (!tail.vanishes) {
    if (tail.native >= -detail::kTailMargin) return Extended::infinity();
    if (std::isfinite(tail.slope)) tail_value = tail.end_value / -tail.slope;
  }
  if (lambda >= ls.back()) {
    // inside the fitted tail: g(t) = g_end (t / lambda_end)^slope
    if (tail.vanishes || !std::isfinite(tail.slope)) return Extended(0.0);
    return Extended(tail_value * std::pow(lambda / ls.back(), tail.slope));
  }
  const auto it = std::upper_bound(ls.begin(), ls.end(), lambda);
  const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - ls.begin())) - 1;
  const double t = std::log(std::max(lambda, ls.front()));
  const double g_at = detail::log_interp(std::log(ls[i]), g[i], std::log(ls[i + 1]), g[i + 1], t);
  long double total = detail::log_cell(g_at, g[i + 1], std::log(ls[i + 1]) - t);
  for (std::size_t k = i + 1; k + 1 < ls.size(); ++k) total += detail::log_cell(g[k], g[k + 1], std::log(ls[k + 1] / ls[k]));
  return Extended(static_cast<double>(total) + tail_value);
}

struct TailFunctional {
  std::vector<double> lambdas;
  std::vector<double> values;  // lambda^p mu(lambda)
  double top_slope = 0.0;      // log-log slope over the top decade
  Extended limit;              // 0 when decaying, plateau mean when flat, +inf when growing

  /// values at lambda_max * 10^-decades over the value at lambda_max.
  [[nodiscard]] double decay_factor(double decades) const {
    const double lam = lambdas.back() * std::pow(10.0, -decades);
    if (lam < lambdas.front()) throw DomainError("decay window leaves the grid");
    const auto it = std::upper_bound(lambdas.begin(), lambdas.end(), lam);
    const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - lambdas.begin())) - 1;
    const std::size_t j = std::min(i + 1, lambdas.size() - 1);
    const double v = detail::log_interp(std::log(lambdas[i]), values[i], std::log(lambdas[j]), values[j], std::log(lam));
    return values.back() > 0.0 ? v / values.back() : std::numeric_limits<double>::infinity();
  }
};

inline TailFunctional tail_functional(const DistributionFunction& df, double p) {
  TailFunctional t;
  t.lambdas = df.lambdas();
  t.values = detail::lambda_moment(df, p, 1.0);
  if (df.all_zero()) {
    t.limit = Extended(0.0);
    return t;
  }
  const auto fit = detail::end_fit(t.lambdas, t.values, true);
  t.top_slope = fit.vanishes ? -std::numeric_limits<double>::infinity() : fit.slope;
  if (t.top_slope < -detail::kTailMargin) {
    t.limit = Extended(0.0);
  } else if (t.top_slope > detail::kTailMargin) {
    t.limit = Extended::infinity();
  } else {
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < t.lambdas.size(); ++i)
      if (t.lambdas[i] >= t.lambdas.back() / 10.0) {
        s += t.values[i];
        ++n;
      }
    t.limit = Extended(s / n);
  }
  return t;
}

/// Distribution function of F^theta: lambda -> lambda^theta, mu unchanged.
inline DistributionFunction power_transform(const DistributionFunction& df, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw DomainError("power transform needs theta in (0, 1]");
  std::vector<double> ls(df.lambdas());
  if (theta != 1.0)
    for (double& l : ls) l = std::pow(l, theta);
  DfMeta meta = df.meta();
  meta.power *= theta;
  return {ls, df.mu(), df.stderrs(), df.method(), meta};
}

// ---------------------------------------------------------------------------
// Difference energies  2 int_0^{h_max} h^{-kernel} int |u(x+h) - u(x)|^p dx dh
// in N = 1, over R (global) or with x, x + h in a box (local).

struct EnergyOptions {
  double rel_tol = 1e-11;
  int max_octaves = 400;
};

namespace detail {

inline double abs_pow(double y, double p) { return p == 1.0 ? std::abs(y) : std::pow(std::abs(y), p); }

// int over [x0, x1] of |y(x)|^p with y affine from y0 to y1.
inline double affine_power_integral(double y0, double y1, double len, double p) {
  const double scale = std::max(std::abs(y0), std::abs(y1));
  if (scale == 0.0) return 0.0;
  if (std::abs(y1 - y0) <= 1e-9 * scale) return len * abs_pow(0.5 * (y0 + y1), p);
  auto G = [p](double y) { return std::copysign(std::pow(std::abs(y), p + 1.0), y) / (p + 1.0); };
  return len * (G(y1) - G(y0)) / (y1 - y0);
}

struct EnergyContext {
  const FunctionSpec* f;
  std::vector<Piece> pieces;  // covering R or the box
  Interval window0;           // x-range at h = 0 (grows left by h in global mode)
  bool local;
  std::vector<double> kinks;  // h where the piece pairing changes
};

// int_0^t |sin s|^p ds for p in {1, 2}, any real t.
inline double sine_power_primitive(double t, double p) {
  if (p == 2.0) return 0.5 * t - 0.25 * std::sin(2.0 * t);
  const double n = std::floor(t / M_PI);
  return 2.0 * n + 1.0 - std::cos(t - n * M_PI);
}

// I_p(h) for sin(M pi x) on [-1, 1] over all of R, p in {1, 2}. With a = M pi,
// the overlap part is |2 sin(ah/2)|^p int |cos(a(x + h/2))|^p, the rest are
// the two uncovered ends.
inline double sine_difference_power(int m, double h, double p) {
  const double a = m * M_PI;
  auto sin_part = [&](double lo, double hi) {
    return hi > lo ? (sine_power_primitive(a * hi, p) - sine_power_primitive(a * lo, p)) / a : 0.0;
  };
  double total = sin_part(-1.0, std::min(-1.0 + h, 1.0)) + sin_part(std::max(1.0 - h, -1.0), 1.0);
  if (h < 2.0) {
    // cos(a y) = sin(a y + pi/2); y = x + h/2 runs over [-1 + h/2, 1 - h/2]
    const double lo = a * (-1.0 + 0.5 * h) + 0.5 * M_PI, hi = a * (1.0 - 0.5 * h) + 0.5 * M_PI;
    total += std::pow(std::abs(2.0 * std::sin(0.5 * a * h)), p) * (sine_power_primitive(hi, p) - sine_power_primitive(lo, p)) / a;
  }
  return total;
}

// I_p(h) = int |u(x+h) - u(x)|^p dx over the admissible x.
inline double difference_power(const EnergyContext& c, double h, double p) {
  if (const auto* sb = std::get_if<family::SineBump>(&c.f->family()); sb && !c.local && (p == 1.0 || p == 2.0)) {
    const Transform& t = c.f->transform();  // u(x) = A base(s (x - shift))
    return std::pow(std::abs(t.amplitude), p) / t.scale * sine_difference_power(sb->m, t.scale * h, p);
  }
  const Interval w = c.local ? Interval{c.window0.lo, c.window0.hi - h} : Interval{c.window0.lo - h, c.window0.hi};
  if (!(w.hi > w.lo)) return 0.0;
  const auto& ps = c.pieces;
  auto find = [&](double x) {
    auto it = std::upper_bound(ps.begin(), ps.end(), x, [](double v, const Piece& q) { return v < q.lo; });
    return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - ps.begin()) - 1));
  };
  const FunctionSpec& f = *c.f;
  long double total = 0.0L;
  std::vector<std::pair<double, double>> smooth_parts;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Piece& P = ps[i];
    const double s0 = std::max(P.lo, w.lo), e0 = std::min(P.hi, w.hi);
    if (!(e0 > s0)) continue;
    std::size_t j = find(s0 + h);
    double s = s0;
    while (s < e0 && j < ps.size()) {
      const Piece& Q = ps[j];
      const double e = std::min(e0, Q.hi - h);
      if (e > s) {
        const bool smooth = P.shape == PieceShape::smooth || Q.shape == PieceShape::smooth;
        if (!smooth) {
          double y0, y1;
          if (i == j) {
            y0 = y1 = P.shape == PieceShape::flat ? 0.0 : (P.v_hi - P.v_lo) / (P.hi - P.lo) * h;
          } else {
            y0 = f.piece_value(Q, s + h) - f.piece_value(P, s);
            y1 = f.piece_value(Q, e + h) - f.piece_value(P, e);
          }
          total += affine_power_integral(y0, y1, e - s, p);
        } else {
          smooth_parts.emplace_back(s, e);
        }
      }
      s = std::max(s, e);
      ++j;
    }
  }
  if (!smooth_parts.empty()) {
    auto g = [&](double x) { return abs_pow(f.difference(x, h), p); };
    // segments far below the total carry only rounding noise
    const double floor = 1e-13 * static_cast<double>(total);
    total += quad::integrate_intervals<15>(g, smooth_parts, 1e-12, 20, floor).value;
  }
  return static_cast<double>(total);
}

inline EnergyContext energy_context(const FunctionSpec& f, const std::optional<Interval>& domain) {
  if (f.dimension() != 1) throw DomainError("difference energies are implemented for N = 1 only");
  if (!f.is_constant() && !f.pieces_available())
    throw DomainError("difference energy needs the piece structure of " + to_string(f));
  QuotientSpec q(f, 1.0, domain ? Box{*domain} : Box{}, domain.has_value());
  EnergyContext c{&f, covering_pieces(q), domain ? *domain : f.variation_interval(), domain.has_value(), {}};
  std::vector<double> ends;
  for (const Piece& p : c.pieces) {
    if (std::isfinite(p.lo)) ends.push_back(p.lo);
    if (std::isfinite(p.hi)) ends.push_back(p.hi);
  }
  std::sort(ends.begin(), ends.end());
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
  if (ends.size() <= 400) {
    for (std::size_t a = 0; a < ends.size(); ++a)
      for (std::size_t b = a + 1; b < ends.size(); ++b) c.kinks.push_back(ends[b] - ends[a]);
    std::sort(c.kinks.begin(), c.kinks.end());
    c.kinks.erase(std::unique(c.kinks.begin(), c.kinks.end()), c.kinks.end());
  }
  return c;
}

// int_a^b h^{-kernel} I_p(h) dh, split at pairing kinks.
inline quad::Estimate energy_panel(const EnergyContext& c, double p, double kernel, double a, double b, double rel_tol) {
  std::vector<double> cuts{a};
  auto lo = std::upper_bound(c.kinks.begin(), c.kinks.end(), a);
  for (; lo != c.kinks.end() && *lo < b; ++lo) cuts.push_back(*lo);
  cuts.push_back(b);
  auto g = [&](double h) { return std::pow(h, -kernel) * difference_power(c, h, p); };
  return quad::integrate_panels<15>(g, cuts, rel_tol, 30);
}

}  // namespace detail

/// 2 int_0^{h_max} h^{-kernel} I_p(h) dh (h_max may be +inf in global mode).
/// Divergence at h -> 0 or h -> inf yields +inf.
inline Extended difference_energy(const FunctionSpec& f, double p, double kernel, double h_max,
                                  const std::optional<Interval>& domain = std::nullopt, const EnergyOptions& opt = {}) {
  if (!(p >= 1.0)) throw DomainError("difference energy needs p >= 1");
  if (!(h_max > 0.0)) throw DomainError("difference energy needs h_max > 0");
  if (f.is_constant()) return Extended(0.0);
  const auto c = detail::energy_context(f, domain);
  // H: beyond it the pairing no longer changes (global) or nothing is left (local)
  const double H = c.window0.length();
  const double top = std::min(h_max, H);
  long double total = 0.0L;

  if (h_max > H && !c.local) {
    // I_p(h) = C0 + D (h - H) for h >= H
    const double i0 = detail::difference_power(c, H, p);
    const double i1 = detail::difference_power(c, 2.0 * H, p);
    const double D = (i1 - i0) / H;
    const double C0 = i0;
    auto tail = [&](double e, double upper) {  // int_H^upper h^{-e} dh
      if (std::isinf(upper)) return e > 1.0 ? std::pow(H, 1.0 - e) / (e - 1.0) : std::numeric_limits<double>::infinity();
      return std::abs(e - 1.0) < 1e-14 ? std::log(upper / H) : (std::pow(upper, 1.0 - e) - std::pow(H, 1.0 - e)) / (1.0 - e);
    };
    const double slope_part = D > 1e-14 * std::max(1.0, C0) ? D : 0.0;
    const double t0 = tail(kernel, h_max), t1 = slope_part > 0.0 ? tail(kernel - 1.0, h_max) : 0.0;
    if (C0 > 0.0 && std::isinf(t0)) return Extended::infinity();
    if (slope_part > 0.0 && std::isinf(t1)) return Extended::infinity();
    total += C0 * t0 + slope_part * (t1 - H * t0);
  }

  // octave descent from the top, with a geometric tail once the ratio
  // settles; below ~1e-12 H the window arithmetic itself loses h
  double hi = top;
  double prev = -1.0, prev_rate = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k < opt.max_octaves && hi > 1e-12 * top; ++k) {
    const double lo = 0.5 * hi;
    const double J = detail::energy_panel(c, p, kernel, lo, hi, opt.rel_tol).value;
    total += J;
    if (prev > 0.0 && J > 0.0) {
      const double rate = std::log2(prev / J);  // J_k ~ 2^{-k rate}
      const bool settled = std::isfinite(prev_rate) && std::abs(rate - prev_rate) < 1e-3 * std::max(1.0, std::abs(rate));
      if (settled && k >= 12) {
        if (rate <= 0.02) return Extended::infinity();
        const double remaining = J / (std::pow(2.0, rate) - 1.0);
        if (remaining < opt.rel_tol * static_cast<double>(total) || k >= 30) {
          total += remaining;
          return Extended(static_cast<double>(2.0L * total));
        }
      }
      prev_rate = rate;
    } else if (J == 0.0 && prev == 0.0 && k >= 12) {
      return Extended(static_cast<double>(2.0L * total));
    }
    prev = J;
    hi = lo;
  }
  if (prev > 0.0 && std::isfinite(prev_rate)) {
    if (prev_rate <= 0.02) return Extended::infinity();
    total += prev / (std::pow(2.0, prev_rate) - 1.0);
  }
  return Extended(static_cast<double>(2.0L * total));
}

/// |u|_{W^{s,p}} = (iint |u(x) - u(y)|^p / |x - y|^{N + sp})^{1/p}, N = 1.
inline Extended gagliardo_seminorm(const FunctionSpec& f, double s, double p,
                                   const std::optional<Interval>& domain = std::nullopt) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("Gagliardo seminorm needs 0 < s < 1");
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("Gagliardo seminorm needs 1 <= p < inf");
  const Extended e = difference_energy(f, p, 1.0 + s * p, std::numeric_limits<double>::infinity(), domain);
  if (e.is_infinite()) return e;
  return Extended(std::pow(e.value(), 1.0 / p));
}

}  // namespace qlab
