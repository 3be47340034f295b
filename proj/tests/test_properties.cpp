// Randomized invariants across modules. Each case draws its inputs from a
// fixed seed so failures reproduce.

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <random>

#include "qlab/harness.hpp"
#include "qlab/lorentz.hpp"
#include "qlab/ratefit.hpp"

using namespace qlab;
using Catch::Approx;

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& g, double a, double b) { return std::uniform_real_distribution<double>(a, b)(g); }

// Compactly supported step function with 1..4 steps.
FunctionSpec random_steps(Rng& g) {
  const int n = 1 + static_cast<int>(g() % 4);
  std::vector<Knot> ks;
  double x = uniform(g, -1.0, 0.0);
  ks.push_back({x, 0.0});
  for (int i = 0; i < n; ++i) {
    const double v = uniform(g, -2.0, 2.0);
    ks.push_back({x, v});
    x += uniform(g, 0.1, 0.8);
    ks.push_back({x, v});
  }
  ks.push_back({x, 0.0});
  return FunctionSpec::piecewise_linear(ks);
}

// Compactly supported continuous piecewise-linear function.
FunctionSpec random_tent(Rng& g) {
  const int n = 1 + static_cast<int>(g() % 4);
  std::vector<Knot> ks;
  double x = uniform(g, -1.0, 0.0);
  ks.push_back({x, 0.0});
  for (int i = 0; i < n; ++i) {
    x += uniform(g, 0.1, 0.6);
    ks.push_back({x, uniform(g, -1.5, 1.5)});
  }
  x += uniform(g, 0.1, 0.6);
  ks.push_back({x, 0.0});
  return FunctionSpec::piecewise_linear(ks);
}

}  // namespace

TEST_CASE("evaluation is bit-identical on repeat") {
  Rng g(1);
  for (int t = 0; t < 20; ++t) {
    const auto f = t % 2 ? random_tent(g) : random_steps(g);
    for (int i = 0; i < 50; ++i) {
      const double x = uniform(g, -2, 3);
      const double a = f(x), b = f(x);
      REQUIRE(std::memcmp(&a, &b, sizeof a) == 0);
      const double d1 = f.difference(x, 0.3), d2 = f.difference(x, 0.3);
      REQUIRE(std::memcmp(&d1, &d2, sizeof d1) == 0);
    }
  }
}

TEST_CASE("sup norm and total variation are absolutely homogeneous") {
  Rng g(2);
  for (int t = 0; t < 40; ++t) {
    const auto f = t % 2 ? random_tent(g) : random_steps(g);
    const double c = uniform(g, -5, 5);
    CHECK(sup_norm(f.scaled(c)) == Approx(std::abs(c) * sup_norm(f)).epsilon(1e-12).margin(1e-15));
    CHECK(grad_l1_norm(f.scaled(c)) == Approx(std::abs(c) * grad_l1_norm(f)).epsilon(1e-12).margin(1e-15));
  }
}

TEST_CASE("staircases are monotone on dense grids") {
  Rng g(3);
  for (int t = 0; t < 6; ++t) {
    const int j = 1 + static_cast<int>(g() % 3), k = 2 + static_cast<int>(g() % 5);
    const double alpha = uniform(g, 0.3, 0.9);
    const auto w = build_staircase(j, k, alpha, uniform(g, 0, 1));
    double prev = w(-0.01);
    for (int i = 0; i <= 5000; ++i) {
      const double v = w(-0.01 + 1.02 * i / 5000.0);
      REQUIRE(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("distribution functions are nonincreasing") {
  Rng g(4);
  const auto lambdas = log_grid(0.05, 50, 40);
  for (int t = 0; t < 8; ++t) {
    const auto steps = random_steps(g);
    const auto df = distribution_exact_piecewise(QuotientSpec(steps, uniform(g, 0.3, 2.0)), lambdas);
    for (std::size_t i = 1; i < df.size(); ++i) REQUIRE(df.mu()[i] <= df.mu()[i - 1]);
    const auto tent = random_tent(g);
    const auto dg = distribution_grid(QuotientSpec(tent, uniform(g, 0.3, 2.0)), lambdas);
    for (std::size_t i = 1; i < dg.size(); ++i) REQUIRE(dg.mu()[i] <= dg.mu()[i - 1] * (1 + 1e-12));
  }
  const auto mc = distribution_mc(QuotientSpec(random_tent(g), 1.0), lambdas, 50000, 9);
  for (std::size_t i = 1; i < mc.size(); ++i)
    CHECK(mc.mu()[i] <= mc.mu()[i - 1] + 3.0 * (mc.stderrs()[i] + mc.stderrs()[i - 1]));
}

TEST_CASE("dilation covariance and translation invariance of mu") {
  Rng g(5);
  const auto lambdas = log_grid(0.1, 20, 24);
  for (int t = 0; t < 10; ++t) {
    const auto f = random_steps(g);
    const double beta = uniform(g, 0.3, 2.0), a = uniform(g, 0.2, 5.0), s = uniform(g, -3, 3);
    const auto base = distribution_exact_piecewise(QuotientSpec(f, beta), lambdas);
    const auto moved = distribution_exact_piecewise(QuotientSpec(f.translated(s), beta), lambdas);
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      CHECK(moved.mu()[i] == Approx(base.mu()[i]).epsilon(1e-10).margin(1e-14));
    std::vector<double> scaled;
    for (double l : lambdas) scaled.push_back(l * std::pow(a, -beta));
    const auto ref = distribution_exact_piecewise(QuotientSpec(f, beta), scaled);
    const auto dil = distribution_exact_piecewise(QuotientSpec(f.dilated(a), beta), lambdas);
    for (std::size_t i = 0; i < lambdas.size(); ++i)
      CHECK(dil.mu()[i] == Approx(ref.mu()[i] / (a * a)).epsilon(1e-10).margin(1e-14));
  }
}

TEST_CASE("exact and Monte Carlo agree on random step functions") {
  Rng g(6);
  const auto lambdas = log_grid(0.2, 10, 12);
  int inside = 0, total = 0;
  for (int t = 0; t < 6; ++t) {
    const QuotientSpec q(random_steps(g), uniform(g, 0.5, 1.5));
    const auto ex = distribution_exact_piecewise(q, lambdas);
    const auto mc = distribution_mc(q, lambdas, 40000, g());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      ++total;
      if (std::abs(mc.mu()[i] - ex.mu()[i]) <= 3.0 * mc.stderrs()[i] + 1e-12) ++inside;
    }
  }
  CHECK(inside >= 0.97 * total);
}

TEST_CASE("power identity on random distribution functions") {
  Rng g(7);
  for (int t = 0; t < 6; ++t) {
    const double beta = uniform(g, 0.5, 0.95);
    const QuotientSpec q(random_tent(g), beta);
    const auto df = distribution_grid(q, auto_grid(q, 96));
    // p beta > 1 keeps the small-lambda end integrable
    const double p = 1.0 / beta + uniform(g, 0.3, 1.5), qq = uniform(g, 1.0, 6.0), theta = uniform(g, 0.2, 1.0);
    const Extended base = lorentz_quasinorm(df, LorentzParams(p, qq));
    const Extended moved = lorentz_quasinorm(power_transform(df, theta), LorentzParams(p / theta, qq / theta));
    REQUIRE(base.is_finite() == moved.is_finite());
    if (base.is_finite()) CHECK(moved.value() == Approx(std::pow(base.value(), theta)).epsilon(1e-10));
    const double w = weak_quasinorm(df, p).value();
    CHECK(lorentz_quasinorm(power_transform(df, theta), LorentzParams(p / theta, std::numeric_limits<double>::infinity())).value() ==
          Approx(std::pow(w, theta)).epsilon(1e-12));
  }
}

TEST_CASE("weak quasinorm is controlled by every strong one") {
  Rng g(8);
  for (int t = 0; t < 6; ++t) {
    const double beta = uniform(g, 0.5, 0.95);
    const QuotientSpec q(random_tent(g), beta);
    const auto df = distribution_grid(q, auto_grid(q, 128));
    const double p = 1.0 / beta + uniform(g, 0.3, 1.5);
    const double w = weak_quasinorm(df, p).value();
    for (double qq : {1.0, 2.0, 4.0, 8.0}) {
      const Extended s = lorentz_quasinorm(df, LorentzParams(p, qq));
      REQUIRE(s.is_finite());
      // sup_t t mu(t)^{1/p} <= (q/p)^{1/q} ||.||_{p,q}, up to the grid resolution of the sup
      CHECK(w <= std::pow(qq / p, 1.0 / qq) * s.value() * 1.02);
    }
  }
}

TEST_CASE("excess integral chain and midpoint splitting") {
  Rng g(9);
  for (int t = 0; t < 6; ++t) {
    // Lipschitz, so t^p mu(t) stays bounded at this exponent
    const auto f = random_tent(g);
    for (double p : {2.0, 4.0}) {
      const QuotientSpec q(f, 1.0 / p + 1.0);
      const auto df = distribution_grid(q, octave_grid(-40, 60, 4));
      const auto g_moment = detail::lambda_moment(df, p, 1.0);
      const auto& ls = df.lambdas();
      for (std::size_t i = 0; i < ls.size(); i += 3) {
        const Extended e = excess_integral(df, ls[i]);
        if (e.is_infinite()) continue;
        const double sup_tail = *std::max_element(g_moment.begin() + static_cast<std::ptrdiff_t>(i), g_moment.end());
        // near equality where t^p mu is flat; the slack covers the cell quadrature
        CHECK(std::pow(ls[i], p - 1.0) * e.value() <= sup_tail / (p - 1.0) * (1 + 1e-4) + 1e-300);
        const double up = std::pow(2.0, 1.0 / p) * ls[i];
        if (up > ls.back()) continue;
        const Extended e2 = excess_integral(df, up);
        CHECK(e.value() <= std::pow(2.0, (p - 1.0) / p) * e2.value() + 1e-9);
      }
    }
  }
}

TEST_CASE("ratios are invariant under amplitude and translation") {
  Rng g(10);
  for (int t = 0; t < 6; ++t) {
    const auto f = random_steps(g);
    const double c = uniform(g, 0.2, 4.0) * (g() % 2 ? 1 : -1), s = uniform(g, -5, 5);
    const double base = check_thm3(f, 2.0).ratio.value();
    CHECK(check_thm3(f.scaled(c), 2.0).ratio.value() == Approx(base).epsilon(1e-9));
    CHECK(check_thm3(f.translated(s), 2.0).ratio.value() == Approx(base).epsilon(1e-9));
    CHECK(check_thm3(f.dilated(std::abs(c)), 2.0).ratio.value() == Approx(base).epsilon(1e-9));
    const auto r4 = check_thm4(f, 2.0);
    CHECK(r4.extra_value("inclusion_excess") <= 1e-12);
    CHECK(check_thm4(f.scaled(c), 2.0).ratio.value() == Approx(r4.ratio.value()).epsilon(1e-2));
  }
}

TEST_CASE("rate fits: response scaling and abscissa powers") {
  Rng g(11);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> xs, ys;
    double x = uniform(g, 1.0, 2.0);
    for (int i = 0; i < 8; ++i) {
      x *= uniform(g, 1.2, 3.0);
      xs.push_back(x);
      ys.push_back(uniform(g, 0.5, 2.0) * std::pow(x, uniform(g, -1, 1)));
    }
    const auto f = fit_power_law(xs, ys);
    const double c = uniform(g, 0.1, 10.0), m = uniform(g, 0.5, 3.0);
    std::vector<double> cys, mxs;
    for (double y : ys) cys.push_back(c * y);
    for (double v : xs) mxs.push_back(std::pow(v, m));
    const auto fc = fit_power_law(xs, cys);
    CHECK(fc.gamma == Approx(f.gamma).margin(1e-12));
    CHECK(fc.C == Approx(c * f.C).epsilon(1e-10));
    CHECK(fit_power_law(mxs, ys).gamma == Approx(f.gamma / m).margin(1e-12));
  }
}
