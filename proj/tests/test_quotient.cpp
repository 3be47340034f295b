#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "qlab/dfio.hpp"
#include "qlab/quotient.hpp"

using namespace qlab;
using Catch::Approx;

namespace {

// Independent oracle: midpoint rule in h over (0, h_max], and in x over
// [lo - h, hi], counting |u(x + h) - u(x)| >= lambda h^beta. Factor 2 for h < 0.
double brute_mu(const FunctionSpec& f, double beta, double lambda, double lo, double hi, double h_max, int nh, int nx) {
  double total = 0.0;
  const double dh = h_max / nh;
  for (int i = 0; i < nh; ++i) {
    const double h = (i + 0.5) * dh;
    const double tau = lambda * std::pow(h, beta);
    const double a = lo - h, b = hi, dx = (b - a) / nx;
    int hits = 0;
    for (int j = 0; j < nx; ++j) {
      const double x = a + (j + 0.5) * dx;
      if (std::abs(f(x + h) - f(x)) >= tau) ++hits;
    }
    total += hits * dx * dh;
  }
  return 2.0 * total;
}

double indicator_mu(double p, double lambda) {
  return lambda >= 1.0 ? 2.0 * std::pow(lambda, -p) : 4.0 * std::pow(lambda, -p / 2.0) - 2.0;
}

}  // namespace

TEST_CASE("exact path reproduces the indicator closed form") {
  for (double p : {1.0, 1.5, 2.0, 4.0}) {
    const QuotientSpec q(FunctionSpec::indicator(0, 1), 2.0 / p);
    const auto g = log_grid(0.05, 50, 41);
    const auto df = distribution_exact_piecewise(q, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(df.mu()[i] == Approx(indicator_mu(p, g[i])).epsilon(1e-13));
      CHECK(df.stderrs()[i] == 0.0);
    }
    CHECK(df.method() == Method::exact_piecewise);
  }
}

TEST_CASE("constant functions have zero distribution under every path") {
  const QuotientSpec q(FunctionSpec::constant(3), 1.0);
  const auto g = log_grid(0.1, 10, 8);
  for (const auto& df : {distribution_exact_piecewise(q, g), distribution_grid(q, g), distribution_mc(q, g, 10000, 1)}) {
    CHECK(df.all_zero());
    for (double s : df.stderrs()) CHECK(s == 0.0);
  }
  CHECK(level_measure(q, 2.0).measure == 0.0);
}

TEST_CASE("exact path rejects functions that are not piecewise constant") {
  CHECK_THROWS_AS(distribution_exact_piecewise(QuotientSpec(FunctionSpec::hat(0, 1), 1.0), {1.0}), DomainError);
}

TEST_CASE("grid path matches the exact indicator within 1 percent") {
  const QuotientSpec q(FunctionSpec::indicator(0, 1), 1.0);
  const auto df = distribution_grid(q, {2.0}, 4096);
  CHECK(df.mu()[0] == Approx(0.5).epsilon(0.01));
}

TEST_CASE("grid path against the brute-force oracle") {
  struct Case {
    FunctionSpec f;
    double beta, lo, hi;
  };
  const std::vector<Case> cases = {{FunctionSpec::hat(0, 1), 1.0, -1, 1},
                                   {FunctionSpec::hat(0, 1), 1.5, -1, 1},
                                   {FunctionSpec::smoothed_step(8), 1.5, -0.75, 0.75},
                                   {FunctionSpec::sine_bump(3), 1.0, -1, 1},
                                   {FunctionSpec::sine_bump(2).scaled(1.5).translated(0.3), 0.8, -0.7, 1.3},
                                   {build_staircase(2, 4, 0.5), 1.2, 0, 1}};
  for (const auto& c : cases) {
    const QuotientSpec q(c.f, c.beta);
    const std::vector<double> g = {0.3, 0.9, 3.0};  // hat at beta = 1 has |u(x+h) - u(x)| = h on a set of positive measure
    const auto df = distribution_grid(q, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double h_max = std::pow(2.0 * sup_norm(c.f) / g[i], 1.0 / c.beta);
      const double oracle = brute_mu(c.f, c.beta, g[i], c.lo, c.hi, h_max, 2000, 2000);
      INFO(to_string(c.f) << " beta=" << c.beta << " lambda=" << g[i]);
      CHECK(df.mu()[i] == Approx(oracle).epsilon(5e-3).margin(1e-4));
    }
  }
}

TEST_CASE("grid path refuses under-resolved grids with the required minimum") {
  const QuotientSpec q(FunctionSpec::smoothed_step(512), 1.0);
  CHECK_THROWS_WITH(distribution_grid(q, {1.0}, 128), Catch::Matchers::ContainsSubstring("need at least 257"));
  CHECK_THROWS_AS(distribution_grid(q, {1.0}, 32), DomainError);
}

TEST_CASE("grid tail of a Lipschitz function vanishes") {
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.0);
  const auto df = distribution_grid(q, {10.0, 100.0, 1000.0});
  CHECK(df.mu()[2] == 0.0);
}

TEST_CASE("Monte Carlo on the indicator matches the closed form") {
  const QuotientSpec q(FunctionSpec::indicator(0, 1), 1.0);
  const auto g = log_grid(1, 100, 12);
  const auto df = distribution_mc(q, g, 1000000, 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    INFO("lambda=" << g[i]);
    CHECK(std::abs(g[i] * g[i] * df.mu()[i] - 2.0) <= 3.0 * g[i] * g[i] * df.stderrs()[i]);
    CHECK(df.stderrs()[i] > 0.0);
  }
}

TEST_CASE("Monte Carlo is reproducible for a fixed seed and worker count") {
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.5);
  const auto g = log_grid(0.5, 5, 6);
  McOptions o;
  o.samples = 50000;
  o.seed = 9;
  o.workers = 2;
  const auto a = distribution_mc(q, g, o), b = distribution_mc(q, g, o);
  CHECK(a.mu() == b.mu());
  CHECK(a.stderrs() == b.stderrs());
  o.seed = 10;
  CHECK(distribution_mc(q, g, o).mu() != a.mu());
  CHECK_THROWS_AS(distribution_mc(q, g, 100, 1), DomainError);
}

TEST_CASE("Monte Carlo and grid agree on a Lipschitz function") {
  const QuotientSpec q(FunctionSpec::hat(0, 1), 1.0);
  const auto g = log_grid(0.2, 0.95, 10);
  const auto mc = distribution_mc(q, g, 1000000, 4);
  const auto gr = distribution_grid(q, g);
  int inside = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(mc.mu()[i] - gr.mu()[i]) <= 3.0 * mc.stderrs()[i]) ++inside;
  CHECK(inside >= 9);
}

TEST_CASE("radial indicator in the plane: Monte Carlo against the grid path") {
  const QuotientSpec q(FunctionSpec::radial(FunctionSpec::indicator(0, 1), 2), 1.5);
  const auto g = log_grid(0.5, 20, 8);
  const auto gr = distribution_grid(q, g);
  const auto mc = distribution_mc(q, g, 1000000, 5);
  int inside = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::abs(mc.mu()[i] - gr.mu()[i]) <= 3.0 * mc.stderrs()[i]) ++inside;
  CHECK(inside >= 7);
}

TEST_CASE("exact and Monte Carlo agree on piecewise-constant inputs across seeds") {
  const std::vector<FunctionSpec> fs = {FunctionSpec::indicator(0, 1),
                                        FunctionSpec::piecewise_linear({{0, 0}, {0, 1}, {1, 1}, {1, 0.25}, {2, 0.25}, {2, 0}})};
  for (const auto& f : fs) {
    const QuotientSpec q(f, 1.0);
    const auto g = log_grid(0.3, 30, 16);
    const auto ex = distribution_exact_piecewise(q, g);
    int inside = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto mc = distribution_mc(q, g, 20000, seed);
      for (std::size_t i = 0; i < g.size(); ++i, ++total)
        if (std::abs(mc.mu()[i] - ex.mu()[i]) <= 3.0 * mc.stderrs()[i] + 1e-15) ++inside;
    }
    CHECK(inside >= 0.99 * total);
  }
}

TEST_CASE("dilation covariance and translation invariance on the indicator") {
  const double beta = 1.3, a = 2.5;
  const auto g = log_grid(0.1, 10, 9);
  const auto base = distribution_exact_piecewise(QuotientSpec(FunctionSpec::indicator(0, 1), beta), g);
  const auto moved = distribution_exact_piecewise(QuotientSpec(FunctionSpec::indicator(0, 1).translated(7.25), beta), g);
  std::vector<double> scaled_l;
  for (double l : g) scaled_l.push_back(l * std::pow(a, -beta));
  const auto ref = distribution_exact_piecewise(QuotientSpec(FunctionSpec::indicator(0, 1), beta), scaled_l);
  const auto dil = distribution_exact_piecewise(QuotientSpec(FunctionSpec::indicator(0, 1).dilated(a), beta), g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(moved.mu()[i] == Approx(base.mu()[i]).epsilon(1e-13));
    CHECK(dil.mu()[i] == Approx(ref.mu()[i] / (a * a)).epsilon(1e-12));
  }
}

TEST_CASE("support cap bounds the measure") {
  // band |x - y| <= r around a neighbourhood of the support
  for (const auto& f : {FunctionSpec::hat(0, 1), FunctionSpec::indicator(0, 1), FunctionSpec::sine_bump(4)}) {
    const QuotientSpec q(f, 1.5);
    const auto g = auto_grid(q, 24);
    const auto df = distribution_grid(q, g);
    const double len = f.variation_interval().length();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = std::pow(2.0 * sup_norm(f) / g[i], 1.0 / q.beta);
      CHECK(df.mu()[i] <= 2.0 * r * (len + 2.0 * r) * (1 + 1e-12));
      if (i) CHECK(df.mu()[i] <= df.mu()[i - 1]);
    }
  }
}

TEST_CASE("single-lambda wrapper") {
  const auto e = level_measure(QuotientSpec(FunctionSpec::indicator(0, 1), 1.0), 2.0);
  CHECK(e.measure == Approx(0.5).epsilon(1e-14));
  CHECK(e.method == Method::exact_piecewise);
  const QuotientSpec h(FunctionSpec::hat(0, 1), 1.2);
  const auto grid = level_measure(h, 0.7);
  const auto mc = distribution_mc(h, {0.7}, 1000000, 2);
  CHECK(grid.method == Method::grid);
  CHECK(std::abs(grid.measure - mc.mu()[0]) <= 3.0 * mc.stderrs()[0]);
}

TEST_CASE("distribution functions reject invalid tables") {
  DfMeta m;
  CHECK_THROWS_AS(DistributionFunction({1, 2}, {1, 2}, {0, 0}, Method::grid, m), NumericalError);
  CHECK_THROWS_AS(DistributionFunction({2, 1}, {1, 1}, {0, 0}, Method::grid, m), DomainError);
  CHECK_THROWS_AS(DistributionFunction({1, 2}, {1}, {0, 0}, Method::grid, m), DomainError);
  CHECK_NOTHROW(DistributionFunction({1, 2}, {1, 1.01}, {0.01, 0.01}, Method::monte_carlo, m));
}

TEST_CASE("file round trip is bit exact") {
  const auto dir = std::filesystem::temp_directory_path() / "qlab_test_dfio";
  std::filesystem::create_directories(dir);
  const QuotientSpec q(FunctionSpec::hat(0.1, 0.7), 1.37);
  const auto g = auto_grid(q, 20);
  for (const auto& df : {distribution_grid(q, g), distribution_mc(q, g, 20000, 77)}) {
    const auto path = dir / "df.csv";
    write_df(df, path);
    const auto back = read_df(path);
    CHECK(back.lambdas() == df.lambdas());
    CHECK(back.mu() == df.mu());
    CHECK(back.stderrs() == df.stderrs());
    CHECK(back.method() == df.method());
    CHECK(back.meta().beta == df.meta().beta);
    CHECK(back.meta().seed == df.meta().seed);
    CHECK(back.meta().samples == df.meta().samples);
    CHECK(back.meta().function == df.meta().function);
    CHECK(df_csv(back) == df_csv(df));
  }
  CHECK_THROWS_AS(parse_df("lambda,mu\n1,2\n", "{}"), DomainError);
  std::filesystem::remove_all(dir);
}
