#pragma once

// Globally adaptive Gauss-Kronrod over a set of panels. Boost's adaptive
// driver compares an unscaled error estimate with a scaled tolerance, which
// never terminates on very narrow panels; this driver only borrows its nodes
// and weights.

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace qlab::quad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

/// One Kronrod rule on [a, b] with the embedded Gauss rule as error proxy.
template <unsigned Points, class F>
Estimate gk_rule(F& f, double a, double b) {
  using K = boost::math::quadrature::gauss_kronrod<double, Points>;
  const auto& x = K::abscissa();
  const auto& wk = K::weights();
  const auto& wg = boost::math::quadrature::gauss<double, (Points - 1) / 2>::weights();
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  constexpr unsigned order = (Points - 1) / 2;
  constexpr bool centred = order % 2 == 1;  // the Gauss rule uses the centre node
  const double fc = f(mid);
  double kron = fc * wk[0];
  double gauss = centred ? fc * wg[0] : 0.0;
  for (unsigned i = 1; i < x.size(); ++i) {
    const double fs = f(mid - half * x[i]) + f(mid + half * x[i]);
    kron += wk[i] * fs;
    if ((i % 2 == 0) == centred) gauss += wg[i / 2] * fs;
  }
  return {half * kron, half * std::abs(kron - gauss)};
}

/// Integral over a set of intervals to a relative accuracy `rel_tol` of the
/// summed magnitude (or `abs_floor`, if larger). The panel with the largest
/// error estimate is bisected next; no panel is split more than `depth` times
/// and panels already at the rounding floor are left alone.
template <unsigned Points, class F>
Estimate integrate_intervals(F&& f, const std::vector<std::pair<double, double>>& parts, double rel_tol, int depth,
                             double abs_floor = 0.0) {
  struct Panel {
    double a, b;
    Estimate e;
    int level;
  };
  auto smaller = [](const Panel& x, const Panel& y) { return x.e.error < y.e.error; };
  const double noise = 64.0 * std::numeric_limits<double>::epsilon();
  std::vector<Panel> heap;
  Estimate done;         // panels that will not be split again
  double open_err = 0.0;  // error summed over the heap
  double magnitude = 0.0;
  auto admit = [&](const Panel& p) {
    magnitude += std::abs(p.e.value);
    const double m = 0.5 * (p.a + p.b);
    if (p.level >= depth || p.e.error <= noise * std::abs(p.e.value) || !(m > p.a && m < p.b)) {
      done.value += p.e.value;
      done.error += p.e.error;
      return;
    }
    heap.push_back(p);
    std::push_heap(heap.begin(), heap.end(), smaller);
    open_err += p.e.error;
  };
  for (const auto& [a, b] : parts)
    if (b > a) admit({a, b, gk_rule<Points>(f, a, b), 0});
  std::size_t splits = 0;
  while (!heap.empty()) {
    if (done.error + open_err <= std::max(rel_tol * magnitude, abs_floor)) break;
    std::pop_heap(heap.begin(), heap.end(), smaller);
    const Panel p = heap.back();
    heap.pop_back();
    open_err -= p.e.error;
    magnitude -= std::abs(p.e.value);
    const double m = 0.5 * (p.a + p.b);
    admit({p.a, m, gk_rule<Points>(f, p.a, m), p.level + 1});
    admit({m, p.b, gk_rule<Points>(f, m, p.b), p.level + 1});
    if (++splits % 512 == 0) {  // the running sum drifts under subtraction
      open_err = 0.0;
      for (const Panel& q : heap) open_err += q.e.error;
    }
  }
  Estimate out = done;
  for (const Panel& p : heap) {
    out.value += p.e.value;
    out.error += p.e.error;
  }
  return out;
}

/// Same over the consecutive panels [cuts[i], cuts[i+1]].
template <unsigned Points, class F>
Estimate integrate_panels(F&& f, const std::vector<double>& cuts, double rel_tol, int depth, double abs_floor = 0.0) {
  std::vector<std::pair<double, double>> parts;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) parts.emplace_back(cuts[i], cuts[i + 1]);
  return integrate_intervals<Points>(f, parts, rel_tol, depth, abs_floor);
}

}  // namespace qlab::quad
