#pragma once

// Inequality checks with empirical constants, divergence probes and rate
// sweeps. Every check returns lhs, the named rhs factors and their ratio;
// nothing here asserts a bound, callers decide what a pass means.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qlab/core.hpp"
#include "qlab/functions.hpp"
#include "qlab/lorentz.hpp"
#include "qlab/quotient.hpp"
#include "qlab/ratefit.hpp"

namespace qlab {

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct InequalityReport {
  std::string name;
  Extended lhs;
  std::vector<NamedValue> rhs_factors;
  double rhs = 0.0;
  Extended ratio;
  std::vector<NamedValue> params;
  std::string method;      // how lhs was computed
  double lhs_error = 0.0;  // absolute error bar on lhs (0 when exact)
  /// Secondary quantities: alternative ratios, consistency residuals.
  std::vector<NamedValue> extra;

  [[nodiscard]] double param(const std::string& key) const {
    for (const auto& p : params)
      if (p.name == key) return p.value;
    throw DomainError("report '" + name + "' has no parameter '" + key + "'");
  }
  [[nodiscard]] double extra_value(const std::string& key) const {
    for (const auto& p : extra)
      if (p.name == key) return p.value;
    throw DomainError("report '" + name + "' has no entry '" + key + "'");
  }
};

struct SweepResult {
  std::string name;
  std::string control;            // k, j, Lambda, M, p, delta
  std::vector<double> controls;   // strictly increasing
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;  // rows[i][c] belongs to controls[i]
  std::vector<InequalityReport> reports;  // per control value, when the sweep is a check
  std::vector<std::pair<std::string, RateFit>> fits;
  std::vector<NamedValue> summary;
  std::vector<NamedValue> params;

  [[nodiscard]] std::vector<double> column(const std::string& key) const {
    const auto it = std::find(columns.begin(), columns.end(), key);
    if (it == columns.end()) throw DomainError("sweep '" + name + "' has no column '" + key + "'");
    const auto c = static_cast<std::size_t>(it - columns.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
  }
  [[nodiscard]] const RateFit& fit(const std::string& key) const {
    for (const auto& f : fits)
      if (f.first == key) return f.second;
    throw DomainError("sweep '" + name + "' has no fit '" + key + "'");
  }
  [[nodiscard]] double summary_value(const std::string& key) const {
    for (const auto& s : summary)
      if (s.name == key) return s.value;
    throw DomainError("sweep '" + name + "' has no summary '" + key + "'");
  }
};

/// Memoizes distribution functions; `compute` runs only on a miss.
class DfStore {
 public:
  virtual ~DfStore() = default;
  virtual DistributionFunction get_or_compute(const QuotientSpec& q, const std::vector<double>& lambdas, Method m,
                                              std::uint64_t samples, std::uint64_t seed,
                                              const std::function<DistributionFunction()>& compute) = 0;
};

struct HarnessOptions {
  std::optional<Method> method;  // forced estimator; default picks the most accurate available
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::size_t points = 96;  // lambda grid size for automatic grids
  DfStore* store = nullptr;  // memoizes distribution functions when set
};

namespace detail {

inline void check_controls(const std::vector<double>& xs, const char* what) {
  if (xs.empty()) throw DomainError(std::string(what) + " list is empty");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw DomainError(std::string(what) + " values must be strictly increasing");
}

inline Extended ratio_of(const Extended& lhs, double rhs, const std::string& name) {
  if (lhs.is_finite() && lhs.value() == 0.0) return Extended(0.0);
  if (!(rhs > 0.0)) throw NumericalError(name + ": rhs vanishes while lhs is positive");
  if (lhs.is_infinite()) return Extended::infinity();
  return Extended(lhs.value() / rhs);
}

inline InequalityReport make_report(std::string name, Extended lhs, std::vector<NamedValue> factors,
                                    std::vector<NamedValue> params) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  double rhs = 1.0;
  for (const auto& f : factors) rhs *= f.value;
  r.rhs_factors = std::move(factors);
  r.rhs = rhs;
  r.ratio = ratio_of(lhs, rhs, r.name);
  r.params = std::move(params);
  return r;
}

/// Weak quasinorm with the error bar propagated from the argmax point.
inline std::pair<Extended, double> weak_with_error(const DistributionFunction& df, double p) {
  const Extended w = weak_quasinorm(df, p);
  if (w.is_infinite() || w.value() == 0.0) return {w, 0.0};
  const auto& ls = df.lambdas();
  std::size_t best = 0;
  double top = -1.0;
  for (std::size_t i = 0; i < ls.size(); ++i) {
    const double g = std::pow(ls[i], p) * df.mu()[i];
    if (g > top) {
      top = g;
      best = i;
    }
  }
  // d(g^{1/p}) = g^{1/p - 1} dg / p
  const double dg = std::pow(ls[best], p) * df.stderrs()[best];
  return {w, std::pow(top, 1.0 / p - 1.0) * dg / p};
}

inline double max_rel_stderr(const DistributionFunction& df) {
  double m = 0.0;
  for (std::size_t i = 0; i < df.size(); ++i)
    if (df.mu()[i] > 0.0) m = std::max(m, df.stderrs()[i] / df.mu()[i]);
  return m;
}

/// sup |u| over an interval of the line.
inline double sup_on(const FunctionSpec& f, const Interval& w) {
  double m = std::max(std::abs(f(w.lo)), std::abs(f(w.hi)));
  if (!f.pieces_available()) return std::max(m, sup_norm(f));
  for (const Piece& p : f.pieces()) {
    const double a = std::max(w.lo, p.lo), b = std::min(w.hi, p.hi);
    if (!(b > a)) continue;
    m = std::max({m, std::abs(f(a)), std::abs(f(b))});
    if (p.shape == PieceShape::smooth) m = std::max(m, detail::maximize([&](double x) { return std::abs(f(x)); }, a, b, 256));
  }
  return m;
}

inline void require_line(const FunctionSpec& f, const char* check) {
  if (f.dimension() != 1) throw DomainError(std::string(check) + " is implemented in N = 1 only");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimator selection.

inline Method pick_method(const QuotientSpec& q, const HarnessOptions& o = {}) {
  if (o.method) return *o.method;
  if (q.dimension == 1 && q.f.piecewise_constant()) return Method::exact_piecewise;
  if (q.dimension == 1 && q.f.pieces_available()) return Method::grid;
  if (q.dimension == 2 && q.f.piecewise_constant() && !q.local_mode) return Method::grid;
  return Method::monte_carlo;
}

inline DistributionFunction compute_distribution(const QuotientSpec& q, const std::vector<double>& lambdas,
                                                 const HarnessOptions& o = {}) {
  const Method m = pick_method(q, o);
  const bool mc = m == Method::monte_carlo;
  auto compute = [&]() -> DistributionFunction {
    switch (m) {
      case Method::exact_piecewise: return distribution_exact_piecewise(q, lambdas);
      case Method::grid: {
        GridOptions g;
        g.workers = o.workers;
        return distribution_grid(q, lambdas, g);
      }
      case Method::monte_carlo: {
        McOptions mo;
        mo.samples = o.samples;
        mo.seed = o.seed;
        mo.workers = o.workers;
        return distribution_mc(q, lambdas, mo);
      }
    }
    throw DomainError("unknown method");
  };
  if (!o.store) return compute();
  return o.store->get_or_compute(q, lambdas, m, mc ? o.samples : 0, mc ? o.seed : 0, compute);
}

inline DistributionFunction compute_distribution(const QuotientSpec& q, const HarnessOptions& o = {}) {
  return compute_distribution(q, auto_grid(q, o.points), o);
}

// ---------------------------------------------------------------------------
// Inequality checks.

/// Weak-type bound for the quotient with exponent N/p + 1 against ||grad u||_p.
inline InequalityReport check_bvy(const FunctionSpec& f, double p = 1.0, const HarnessOptions& o = {}) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("bvy check needs 1 <= p < inf");
  const int N = f.dimension();
  const QuotientSpec q(f, N / p + 1.0);
  const auto df = compute_distribution(q, o);
  const auto [lhs, err] = detail::weak_with_error(df, p);
  const double g = p == 1.0 ? grad_l1_norm(f) : grad_lq_norm(f, p).value_or(std::numeric_limits<double>::infinity());
  if (!std::isfinite(g)) throw DomainError("bvy check needs grad u in L^p (u jumps)");
  auto r = detail::make_report("bvy", lhs, {{p == 1.0 ? "grad_l1" : "grad_lp", g}},
                               {{"N", double(N)}, {"p", p}, {"beta", q.beta}});
  r.method = to_string(df.method());
  r.lhs_error = err;
  return r;
}

/// Weak quasinorm at exponent 2/p against ||u'||_1 in N = 1.
inline InequalityReport check_thm3(const FunctionSpec& f, double p, const HarnessOptions& o = {}) {
  detail::require_line(f, "thm3");
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("thm3 needs 1 <= p < inf");
  const QuotientSpec q(f, 2.0 / p);
  const auto df = compute_distribution(q, o);
  const auto [lhs, err] = detail::weak_with_error(df, p);
  auto r = detail::make_report("thm3", lhs, {{"grad_l1", grad_l1_norm(f)}}, {{"N", 1}, {"p", p}, {"beta", q.beta}});
  r.method = to_string(df.method());
  r.lhs_error = err;
  return r;
}

/// Weak quasinorm at exponent (N+1)/p against ||u||_inf^{1-1/p} ||grad u||_1^{1/p},
/// plus the level-set inclusion that reduces p > 1 to p = 1.
inline InequalityReport check_thm4(const FunctionSpec& f, double p, const HarnessOptions& o = {}) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("thm4 needs 1 <= p < inf");
  const int N = f.dimension();
  const double sup = sup_norm(f), tv = grad_l1_norm(f);
  const QuotientSpec qa(f, (N + 1.0) / p), qb(f, N + 1.0);
  const auto grid = auto_grid(qa, o.points);
  const auto dfa = compute_distribution(qa, grid, o);
  const auto [lhs, err] = detail::weak_with_error(dfa, p);
  auto r = detail::make_report("thm4", lhs, {{"sup_norm^(1-1/p)", std::pow(sup, 1.0 - 1.0 / p)}, {"grad_l1^(1/p)", std::pow(tv, 1.0 / p)}},
                               {{"N", double(N)}, {"p", p}, {"beta", qa.beta}});
  r.method = to_string(dfa.method());
  r.lhs_error = err;
  if (f.is_constant()) return r;

  // mu_{(N+1)/p}(lambda) <= mu_{N+1}(lambda^p / (2 sup)^{p-1}), gridwise
  const double scale = std::pow(2.0 * sup, p - 1.0);
  std::vector<double> mapped;
  for (double l : grid) mapped.push_back(std::pow(l, p) / scale);
  HarnessOptions ob = o;
  ob.seed = derive_seed(o.seed, 1);
  const auto dfb = compute_distribution(qb, mapped, ob);
  double worst = -std::numeric_limits<double>::infinity(), top = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double slack = 3.0 * (dfa.stderrs()[i] + dfb.stderrs()[i]);
    worst = std::max(worst, dfa.mu()[i] - dfb.mu()[i] - slack);
    top = std::max(top, dfa.mu()[i]);
  }
  const auto [m1, e1] = detail::weak_with_error(dfb, 1.0);
  r.extra.push_back({"inclusion_excess", top > 0.0 ? worst / top : 0.0});  // <= 0 when the inclusion holds
  if (lhs.is_finite() && m1.is_finite() && m1.value() > 0.0)
    r.extra.push_back({"reduction_ratio", std::pow(lhs.value(), p) / (scale * m1.value())});  // <= 1
  return r;
}

/// Kernel estimate: int int_{|x-y|<=r} |u(x)-u(y)| / |x-y|^{N+1-delta} against
/// (r^delta / delta) ||grad u||_1; the ratio is at most 2 in N = 1.
inline InequalityReport check_rho_lemma(const FunctionSpec& f, double delta, double r) {
  detail::require_line(f, "kernel estimate");
  if (!(delta > 0.0)) throw DomainError("kernel estimate needs delta > 0 (the truncated kernel is not integrable otherwise)");
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("kernel estimate needs 0 < r < inf");
  const Extended lhs = difference_energy(f, 1.0, 2.0 - delta, r);
  auto rep = detail::make_report("rho", lhs, {{"r^delta/delta", std::pow(r, delta) / delta}, {"grad_l1", grad_l1_norm(f)}},
                                 {{"N", 1}, {"delta", delta}, {"r", r}});
  rep.method = "quadrature";
  return rep;
}

/// Interpolation estimate in the regime s1 p1 >= 1: the L^{p, p1/theta}
/// quasinorm of the quotient with exponent N/p + s against
/// |u|_{W^{s1,p1}}^theta ||grad u||_1^{1-theta}; the weak variant and the
/// product-property factorization are reported as extras.
inline InequalityReport check_thm5(const FunctionSpec& f, double s1, double p1, double theta, const HarnessOptions& o = {}) {
  detail::require_line(f, "thm5");
  const auto ip = interpolation_params(s1, p1, theta);
  if (!ip.critical())
    throw DomainError("thm5 needs s1*p1 >= 1 (got " + format_double(s1 * p1) + "); below it the plain estimate holds");
  const QuotientSpec q(f, ip.beta(1));
  const auto df = compute_distribution(q, o);
  const Extended lhs = lorentz_quasinorm(df, {ip.p, ip.q_target});
  const Extended frac = gagliardo_seminorm(f, s1, p1);
  if (frac.is_infinite()) throw DomainError("thm5 needs a finite W^{s1,p1} seminorm (u must not jump)");
  const double tv = grad_l1_norm(f);
  auto r = detail::make_report("thm5", lhs,
                               {{"gagliardo^theta", std::pow(frac.value(), theta)}, {"grad_l1^(1-theta)", std::pow(tv, 1.0 - theta)}},
                               {{"N", 1}, {"s1", s1}, {"p1", p1}, {"theta", theta}, {"s", ip.s}, {"p", ip.p}, {"q", ip.q_target}, {"beta", q.beta}});
  r.method = to_string(df.method());
  r.lhs_error = detail::max_rel_stderr(df) * lhs.value_or(0.0);
  if (f.is_constant()) return r;
  const auto weak = weak_quasinorm(df, ip.p);
  r.extra.push_back({"weak_lhs", weak.value_or(std::numeric_limits<double>::infinity())});
  r.extra.push_back({"weak_ratio", detail::ratio_of(weak, r.rhs, "thm5 weak").value_or(std::numeric_limits<double>::infinity())});

  // product property: |F| = F0^{1-theta} F1^theta with F0 at N+1, F1 at 1/p1 + s1
  const QuotientSpec q0(f, 2.0);
  const auto df0 = compute_distribution(q0, o);
  const auto f0 = lorentz_quasinorm(power_transform(df0, 1.0 - theta), {1.0 / (1.0 - theta), std::numeric_limits<double>::infinity()});
  const double product = f0.value_or(std::numeric_limits<double>::infinity()) * std::pow(frac.value(), theta);
  if (lhs.is_finite() && std::isfinite(product) && product > 0.0) r.extra.push_back({"factorization_ratio", lhs.value() / product});
  return r;
}

/// Pointwise Hoelder-Morrey bound used by the logarithmic estimate: on sampled
/// pairs in [-1, 1], max |u(x) - u(y)| / min{sup, |x-y|^alpha ||u'||_q}.
inline double morrey_constant(const FunctionSpec& f, double q, double sup, double grad_q, std::uint64_t seed,
                              int pairs = 4096) {
  if (!(sup > 0.0) || !(grad_q > 0.0)) return 0.0;
  const double alpha = std::isinf(q) ? 1.0 : 1.0 - 1.0 / q;
  std::mt19937_64 rng(derive_seed(seed, 0x6d6f72));
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < pairs; ++i) {
    const double x = U(rng);
    // half the pairs at small separations, where the Hoelder arm is active
    const double y = i % 2 == 0 ? U(rng) : std::clamp(x + std::ldexp(U(rng), -static_cast<int>(rng() % 20)), -1.0, 1.0);
    const double d = std::abs(x - y);
    if (d == 0.0) continue;
    const double bound = std::min(sup, std::pow(d, alpha) * grad_q);
    worst = std::max(worst, std::abs(f(x) - f(y)) / bound);
  }
  return worst;
}

/// Logarithmic interpolation on the unit ball: int int_{B1 x B1}
/// |u(x)-u(y)|^p / |x-y|^{N+1} against
/// ||u||_inf^{p-1} ||grad u||_{L1(B1)} (1 + log max{||grad u||_q / ||u||_inf, 1}).
inline InequalityReport check_thm6(const FunctionSpec& f, double p, double q, std::uint64_t seed = 0) {
  detail::require_line(f, "thm6");
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("thm6 needs 1 < p < inf");
  if (!(q > 1.0)) throw DomainError("thm6 needs q > N");
  const Interval ball{-1.0, 1.0};
  const Box b1{ball};
  const Extended lhs = difference_energy(f, p, 2.0, std::numeric_limits<double>::infinity(), ball);
  const double sup = detail::sup_on(f, ball);
  const double tv = grad_l1_norm(f, b1);
  const Extended gq = f.is_constant() ? Extended(0.0) : grad_lq_norm(f, q, b1);
  if (gq.is_infinite()) throw DomainError("thm6 needs u in C^1 on the ball (grad u not in L^q)");
  const double log_factor = sup > 0.0 ? 1.0 + std::log(std::max(gq.value() / sup, 1.0)) : 1.0;
  auto r = detail::make_report("thm6", lhs,
                               {{"sup_norm^(p-1)", std::pow(sup, p - 1.0)}, {"grad_l1", tv}, {"log_factor", log_factor}},
                               {{"N", 1}, {"p", p}, {"q", q}});
  r.method = "quadrature";
  if (!f.is_constant()) r.extra.push_back({"morrey_constant", morrey_constant(f, q, sup, gq.value(), seed)});
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps.

/// Truncated L^{p,q} norm of the indicator quotient (exponent 2/p) over
/// [1, Lambda]; value^q is affine in log Lambda.
inline SweepResult probe_divergence(double p, double q, const std::vector<double>& Lambdas) {
  if (!(q < std::numeric_limits<double>::infinity())) throw DomainError("divergence probe needs q < inf");
  LorentzParams(p, q).validate();
  detail::check_controls(Lambdas, "Lambda");
  if (!(Lambdas.front() > 1.0)) throw DomainError("Lambda values must exceed 1");
  SweepResult s;
  s.name = "divergence";
  s.control = "Lambda";
  s.controls = Lambdas;
  s.columns = {"Lambda", "value", "value^q"};
  s.params = {{"p", p}, {"q", q}};
  // grid through 1 and every Lambda so no window end is interpolated across a kink
  std::vector<double> grid = log_grid(1e-2, 1.0, 33);
  const auto upper = log_grid(1.0, Lambdas.back(), 16 * static_cast<std::size_t>(std::ceil(std::log10(Lambdas.back()))) + 2);
  grid.insert(grid.end(), upper.begin() + 1, upper.end());
  grid.insert(grid.end(), Lambdas.begin(), Lambdas.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(), [](double a, double b) { return std::abs(a - b) <= 1e-14 * b; }), grid.end());
  const auto df = distribution_exact_piecewise(QuotientSpec(FunctionSpec::indicator(0.0, 1.0), 2.0 / p), grid);
  std::vector<double> ys;
  for (double L : Lambdas) {
    const double v = truncated_quasinorm(df, {p, q}, 1.0, L);
    s.rows.push_back({L, v, std::pow(v, q)});
    ys.push_back(std::pow(v, q));
  }
  if (Lambdas.size() >= 3) s.fits.emplace_back("value^q", fit_affine_log(Lambdas, ys));
  s.summary.push_back({"slope_oracle", p * std::pow(2.0, q / p)});
  s.summary.push_back({"weak", weak_quasinorm(df, p).value()});
  return s;
}

/// Critical regime s1 p1 = 1 with u_k(x) = phi(k(|x| - 1/2)).
inline SweepResult sweep_rate_uk(double s1, double p1, double theta, double q, const std::vector<double>& ks,
                                 const HarnessOptions& o = {}) {
  const auto ip = interpolation_params(s1, p1, theta);
  if (!ip.borderline()) throw DomainError("u_k sweep needs the critical regime s1*p1 = 1 (got " + format_double(s1 * p1) + ")");
  LorentzParams(ip.p, q).validate();
  detail::check_controls(ks, "k");
  if (ks.size() < 4) throw DomainError("u_k sweep needs at least 4 values of k");
  SweepResult s;
  s.name = "rate-uk";
  s.control = "k";
  s.controls = ks;
  s.columns = {"k", "gagliardo", "grad_l1", "truncated", "rhs", "ratio"};
  s.params = {{"s1", s1}, {"p1", p1}, {"theta", theta}, {"q", q}, {"p", ip.p}, {"s", ip.s}, {"beta", ip.beta(1)}};
  std::vector<double> gag, trunc, ratio;
  for (double kd : ks) {
    const int k = static_cast<int>(std::lround(kd));
    if (k < 4 || k != kd) throw DomainError("k must be an integer >= 4");
    const auto f = FunctionSpec::smoothed_step(k);
    const double top = std::pow(k / 4.0, 2.0 / ip.p);
    const QuotientSpec qs(f, ip.beta(1));
    const auto grid = log_grid(1.0, top, std::max<std::size_t>(24, static_cast<std::size_t>(12 * std::log10(top)) + 2));
    const auto df = compute_distribution(qs, grid, o);
    const double t = truncated_quasinorm(df, {ip.p, q}, 1.0, top);
    const double g = gagliardo_seminorm(f, s1, p1).value();
    const double tv = grad_l1_norm(f);
    const double rhs = std::pow(g, theta) * std::pow(tv, 1.0 - theta);
    s.rows.push_back({kd, g, tv, t, rhs, t / rhs});
    gag.push_back(g);
    trunc.push_back(t);
    ratio.push_back(t / rhs);
  }
  s.fits.emplace_back("gagliardo", fit_log_power(ks, gag));
  s.fits.emplace_back("truncated", fit_log_power(ks, trunc));
  s.fits.emplace_back("ratio", fit_log_power(ks, ratio));
  s.summary.push_back({"gamma_gagliardo_expected", 1.0 / p1});
  s.summary.push_back({"gamma_lhs_expected", 1.0 / q});
  s.summary.push_back({"gamma_rhs_expected", theta / p1});
  return s;
}

/// Supercritical regime s1 p1 > 1 with the self-similar staircases w_j^k on
/// [0, 1], ramp width k^{-1/alpha}, alpha = (s1 - 1/p1) / (1 - 1/p1).
/// All distribution functions come from the same Monte Carlo estimator.
inline SweepResult sweep_rate_wjk(double s1, double p1, double theta, double q, const std::vector<double>& js, int k,
                                  const HarnessOptions& o = {}) {
  const auto ip = interpolation_params(s1, p1, theta);
  if (!(s1 * p1 > 1.0)) throw DomainError("w_j^k sweep needs s1*p1 > 1 (got " + format_double(s1 * p1) + ")");
  LorentzParams(ip.p, q).validate();
  detail::check_controls(js, "j");
  if (k < 2) throw DomainError("w_j^k sweep needs k >= 2");
  const double alpha = (s1 - 1.0 / p1) / (1.0 - 1.0 / p1);
  const double beta = ip.beta(1), beta1 = 1.0 / p1 + s1;
  const double expo = (2.0 / alpha - 1.0);
  const double mass_factor = std::pow(k, -expo);         // k^{1 - 2/alpha}
  const double lambda_factor = std::pow(k, expo / ip.p);  // k^{(1/p)(2/alpha - 1)}
  SweepResult s;
  s.name = "rate-wjk";
  s.control = "j";
  s.controls = js;
  s.columns = {"j", "grad_l1", "lorentz", "weak", "fractional_sp", "fractional_s1p1", "scaling_residual"};
  s.params = {{"s1", s1}, {"p1", p1}, {"theta", theta}, {"q", q}, {"k", double(k)}, {"alpha", alpha},
              {"p", ip.p}, {"s", ip.s}, {"beta", beta}};
  const double top_j = js.back();
  const auto grid = log_grid(1e-3, 1e3 * std::pow(lambda_factor, top_j + 1.0), 72);
  std::vector<double> shifted;
  for (double l : grid) shifted.push_back(l / lambda_factor);
  const Box unit{{0.0, 1.0}};
  auto run = [&](int j, double b, const std::vector<double>& g, std::uint64_t tag) {
    HarnessOptions jo = o;
    jo.method = Method::monte_carlo;
    jo.seed = derive_seed(o.seed, static_cast<std::uint64_t>(j) * 4 + tag);
    return compute_distribution(QuotientSpec(build_staircase(j, k, alpha), b, unit, true), g, jo);
  };
  std::vector<double> lor, frac;
  double worst_scaling = std::numeric_limits<double>::infinity();
  for (double jd : js) {
    const int j = static_cast<int>(std::lround(jd));
    if (j < 1 || j != jd) throw DomainError("j must be an integer >= 1");
    const auto f = build_staircase(j, k, alpha);
    const auto df = run(j, beta, grid, 0);
    const auto df1 = run(j, beta1, grid, 1);
    const auto prev = run(j - 1, beta, shifted, 2);
    // mu_j(lambda) >= k^{1-2/alpha} mu_{j-1}(lambda / lambda_factor) within the error bars
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double rhs = mass_factor * prev.mu()[i];
      if (!(rhs > 0.0)) continue;
      const double tol = 3.0 * (df.stderrs()[i] + mass_factor * prev.stderrs()[i]) + 1e-12;
      residual = std::min(residual, (df.mu()[i] - rhs + tol) / rhs);
    }
    worst_scaling = std::min(worst_scaling, residual);
    const double l = lorentz_quasinorm(df, {ip.p, q}).value_or(std::numeric_limits<double>::infinity());
    const double w = weak_quasinorm(df, ip.p).value_or(std::numeric_limits<double>::infinity());
    const double fsp = lorentz_quasinorm(df, {ip.p, ip.p}).value_or(std::numeric_limits<double>::infinity());
    const double fs1 = lorentz_quasinorm(df1, {p1, p1}).value_or(std::numeric_limits<double>::infinity());
    s.rows.push_back({jd, grad_l1_norm(f), l, w, fsp, fs1, residual});
    lor.push_back(l);
    frac.push_back(fs1);
  }
  if (js.size() >= 3) {
    s.fits.emplace_back("lorentz", fit_power_law(js, lor));
    s.fits.emplace_back("fractional_s1p1", fit_power_law(js, frac));
    // the lower bound makes lorentz^q grow at least linearly in j
    std::vector<double> lq;
    for (double v : lor) lq.push_back(std::pow(v, q));
    const auto line = detail::least_squares(js, lq);
    s.summary.push_back({"lorentz^q_slope_per_j", line.slope});
    s.summary.push_back({"lorentz^q_intercept", line.intercept});
    s.summary.push_back({"lorentz^q_r2", line.r2});
  }
  s.summary.push_back({"scaling_residual_min", worst_scaling});
  s.summary.push_back({"gamma_lorentz_lower", 1.0 / q});
  s.summary.push_back({"gamma_fractional_upper", 1.0 / p1});
  return s;
}

/// Logarithmic interpolation across an oscillation sweep of sin(M pi x).
inline SweepResult sweep_thm6(double p, double q, const std::vector<double>& Ms, std::uint64_t seed = 0) {
  detail::check_controls(Ms, "M");
  SweepResult s;
  s.name = "thm6";
  s.control = "M";
  s.controls = Ms;
  s.columns = {"M", "lhs", "rhs", "ratio"};
  s.params = {{"p", p}, {"q", q}};
  std::vector<double> ratios;
  for (double m : Ms) {
    const int M = static_cast<int>(std::lround(m));
    if (M < 1 || M != m) throw DomainError("M must be a positive integer");
    auto r = check_thm6(FunctionSpec::sine_bump(M), p, q, derive_seed(seed, static_cast<std::uint64_t>(M)));
    s.rows.push_back({m, r.lhs.value(), r.rhs, r.ratio.value()});
    ratios.push_back(r.ratio.value());
    s.reports.push_back(std::move(r));
  }
  if (Ms.size() >= 3) s.fits.emplace_back("ratio", fit_power_law(Ms, ratios));
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  s.summary.push_back({"ratio_spread", *hi / *lo});
  return s;
}

/// Any check repeated over p.
template <class Check>
SweepResult sweep_over_p(const std::string& name, const std::vector<double>& ps, Check&& check) {
  detail::check_controls(ps, "p");
  SweepResult s;
  s.name = name;
  s.control = "p";
  s.controls = ps;
  s.columns = {"p", "lhs", "rhs", "ratio"};
  double top = 0.0;
  for (double p : ps) {
    auto r = check(p);
    s.rows.push_back({p, r.lhs.value_or(std::numeric_limits<double>::infinity()), r.rhs,
                      r.ratio.value_or(std::numeric_limits<double>::infinity())});
    top = std::max(top, r.ratio.value_or(std::numeric_limits<double>::infinity()));
    s.reports.push_back(std::move(r));
  }
  s.summary.push_back({"max_ratio", top});
  return s;
}

}  // namespace qlab
