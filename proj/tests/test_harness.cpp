#include <catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "qlab/harness.hpp"

using namespace qlab;
using Catch::Approx;

namespace {

// Counts calls and serves repeats from memory, keyed on what a store is given.
class CountingStore : public DfStore {
 public:
  DistributionFunction get_or_compute(const QuotientSpec& q, const std::vector<double>& lambdas, Method m,
                                      std::uint64_t samples, std::uint64_t seed,
                                      const std::function<DistributionFunction()>& compute) override {
    const std::string key = to_string(q.f) + "|" + std::to_string(q.beta) + "|" + to_string(m) + "|" +
                            std::to_string(samples) + "|" + std::to_string(seed) + "|" + std::to_string(lambdas.size()) +
                            "|" + std::to_string(lambdas.front());
    ++calls;
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    ++computed;
    return memo.emplace(key, compute()).first->second;
  }
  int calls = 0, computed = 0;
  std::map<std::string, DistributionFunction> memo;
};

}  // namespace

TEST_CASE("weak estimate for the indicator is attained at sqrt(2)/2") {
  const auto r = check_thm3(FunctionSpec::indicator(0, 1), 2.0);
  CHECK(r.method == "exact-piecewise");
  CHECK(r.lhs.value() == Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(r.rhs == 2.0);
  CHECK(r.ratio.value() == Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK(r.lhs_error == 0.0);
  CHECK(r.param("beta") == 1.0);
}

TEST_CASE("weak estimate holds on smooth and oscillating examples") {
  const std::vector<FunctionSpec> fs = {FunctionSpec::hat(0, 1), FunctionSpec::smoothed_step(16), FunctionSpec::sine_bump(4),
                                        build_staircase(2, 4, 0.5)};
  for (const auto& f : fs)
    for (double p : {1.0, 2.0, 3.0}) {
      const auto r = check_thm3(f, p);
      INFO(to_string(f) << " p=" << p);
      REQUIRE(r.ratio.is_finite());
      // 2 is the largest ratio any of these reach (at p = 1, from the lower tail)
      CHECK(r.ratio.value() <= 2.0 * (1.0 + 1e-6));
      CHECK(r.ratio.value() > 0.0);
    }
}

TEST_CASE("ratios are invariant under scaling, translation and dilation") {
  const auto f = FunctionSpec::hat(0, 1);
  const double base = check_thm3(f, 2.0).ratio.value();
  CHECK(check_thm3(f.scaled(3.5), 2.0).ratio.value() == Approx(base).epsilon(1e-2));
  CHECK(check_thm3(f.scaled(-0.2), 2.0).ratio.value() == Approx(base).epsilon(1e-2));
  CHECK(check_thm3(f.translated(7.25), 2.0).ratio.value() == Approx(base).epsilon(1e-2));
  CHECK(check_thm3(f.dilated(4.0), 2.0).ratio.value() == Approx(base).epsilon(1e-2));
  // exact path: the indicator ratio does not see the dilation at all
  for (double L : {0.25, 3.0, 40.0})
    CHECK(check_thm3(FunctionSpec::indicator(0, L), 1.5).ratio.value() ==
          Approx(check_thm3(FunctionSpec::indicator(0, 1), 1.5).ratio.value()).epsilon(1e-12));
}

TEST_CASE("constants give zero left-hand sides") {
  const auto c = FunctionSpec::constant(1.5);
  CHECK(check_thm3(c, 2.0).lhs.value() == 0.0);
  CHECK(check_thm4(c, 2.0).lhs.value() == 0.0);
  CHECK(check_rho_lemma(c, 0.5, 1.0).lhs.value() == 0.0);
}

TEST_CASE("strong-type estimate on a Lipschitz function") {
  const auto r = check_bvy(FunctionSpec::hat(0, 1), 1.0);
  REQUIRE(r.ratio.is_finite());
  CHECK(r.ratio.value() > 0.0);
  CHECK(r.rhs == Approx(2.0));
  const auto r2 = check_bvy(FunctionSpec::hat(0, 1), 2.0);
  CHECK(r2.rhs_factors.front().name == "grad_lp");
  CHECK_THROWS_AS(check_bvy(FunctionSpec::indicator(0, 1), 2.0), DomainError);
  for (double L : {0.5, 2.0, 8.0}) {
    CHECK(check_bvy(FunctionSpec::hat(0, 1).dilated(L), 1.0).ratio.value() == Approx(r.ratio.value()).epsilon(1e-2));
    CHECK(check_bvy(FunctionSpec::hat(0, 1).translated(L), 1.0).ratio.value() == Approx(r.ratio.value()).epsilon(1e-2));
  }
}

TEST_CASE("level-set inclusion and its reduction hold") {
  for (const auto& f : {FunctionSpec::hat(0, 1), FunctionSpec::smoothed_step(8)}) {
    std::vector<double> ratios;
    for (double p : {1.5, 2.0, 4.0}) {
      const auto r = check_thm4(f, p);
      INFO(to_string(f) << " p=" << p);
      CHECK(r.extra_value("inclusion_excess") <= 0.0);
      CHECK(r.extra_value("reduction_ratio") <= 1.0 + 1e-9);
      REQUIRE(r.ratio.is_finite());
      ratios.push_back(r.ratio.value());
    }
    // one constant serves every p
    CHECK(*std::max_element(ratios.begin(), ratios.end()) / *std::min_element(ratios.begin(), ratios.end()) < 2.0);
  }
  const auto ind = check_thm4(FunctionSpec::indicator(0, 1), 2.0);
  CHECK(ind.ratio.is_finite());
  CHECK(ind.extra_value("inclusion_excess") <= 0.0);
}

TEST_CASE("kernel estimate stays below 2") {
  for (const auto& f : {FunctionSpec::hat(0, 1), FunctionSpec::indicator(0, 1), FunctionSpec::smoothed_step(16)})
    for (double delta : {0.25, 0.5, 0.9})
      for (double r : {0.1, 1.0, 10.0}) {
        const auto rep = check_rho_lemma(f, delta, r);
        INFO(to_string(f) << " delta=" << delta << " r=" << r);
        REQUIRE(rep.ratio.is_finite());
        CHECK(rep.ratio.value() <= 2.0 * (1.0 + 1e-9));
      }
  const auto hat = check_rho_lemma(FunctionSpec::hat(0, 1), 1.0, 1.0);
  CHECK(hat.lhs.value() <= 4.0);
  CHECK(hat.rhs == Approx(2.0));
  CHECK_THROWS_AS(check_rho_lemma(FunctionSpec::hat(0, 1), 0.0, 1.0), DomainError);
}

TEST_CASE("interpolation estimate reports its variants") {
  const auto r = check_thm5(FunctionSpec::hat(0, 1), 0.5, 2.0, 0.5);
  REQUIRE(r.ratio.is_finite());
  CHECK(r.param("q") == 4.0);
  CHECK(r.param("p") == Approx(4.0 / 3.0));
  CHECK(std::isfinite(r.extra_value("weak_ratio")));
  // weak <= (q/p)^{1/q} strong at the same p
  CHECK(r.extra_value("weak_lhs") <= r.lhs.value() * (1.0 + 1e-9) * std::pow(4.0 / (4.0 / 3.0), 0.25));
  CHECK(std::isfinite(r.extra_value("factorization_ratio")));
  CHECK_THROWS_AS(check_thm5(FunctionSpec::hat(0, 1), 0.25, 2.0, 0.5), DomainError);
  CHECK_THROWS_AS(check_thm5(FunctionSpec::indicator(0, 1), 0.5, 2.0, 0.5), DomainError);
}

TEST_CASE("logarithmic estimate on a low-frequency bump") {
  const auto r = check_thm6(FunctionSpec::sine_bump(4), 2.0, 2.0);
  REQUIRE(r.ratio.is_finite());
  CHECK(r.ratio.value() > 0.0);
  CHECK_THROWS_AS(check_thm6(FunctionSpec::sine_bump(4), 1.0, 2.0), DomainError);
}

TEST_CASE("divergence probe grows linearly in log Lambda") {
  const auto s = probe_divergence(2.0, 2.0, {10.0, 100.0, 1e3, 1e4});
  const auto vq = s.column("value^q");
  for (std::size_t i = 1; i < vq.size(); ++i) CHECK(vq[i] >= vq[i - 1]);
  const auto& fit = s.fit("value^q");
  CHECK(fit.gamma == Approx(s.summary_value("slope_oracle")).epsilon(1e-9));
  CHECK(fit.r_squared == Approx(1.0).epsilon(1e-12));
  CHECK(s.summary_value("weak") == Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(probe_divergence(2.0, std::numeric_limits<double>::infinity(), {10.0, 100.0}), DomainError);
  CHECK_THROWS_AS(probe_divergence(2.0, 2.0, {100.0, 10.0}), DomainError);
}

TEST_CASE("critical sweep: truncated quasinorm grows with k") {
  const auto s = sweep_rate_uk(0.5, 2.0, 0.5, 4.0, {8, 16, 32, 64});
  const auto t = s.column("truncated");
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] >= t[i - 1]);
  const auto g = s.column("gagliardo");
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(s.summary_value("gamma_lhs_expected") == 0.25);
  CHECK_THROWS_AS(sweep_rate_uk(0.6, 2.0, 0.5, 4.0, {8, 16, 32, 64}), DomainError);
  CHECK_THROWS_AS(sweep_rate_uk(0.5, 2.0, 0.5, 4.0, {8, 16, 32}), DomainError);
  CHECK_THROWS_AS(sweep_rate_uk(0.5, 2.0, 0.5, 4.0, {8, 12.5, 32, 64}), DomainError);
}

TEST_CASE("method selection") {
  CHECK(pick_method(QuotientSpec(FunctionSpec::indicator(0, 1), 1.0)) == Method::exact_piecewise);
  CHECK(pick_method(QuotientSpec(FunctionSpec::hat(0, 1), 1.0)) == Method::grid);
  HarnessOptions o;
  o.method = Method::monte_carlo;
  CHECK(pick_method(QuotientSpec(FunctionSpec::indicator(0, 1), 1.0), o) == Method::monte_carlo);
}

TEST_CASE("distribution store is consulted and reused") {
  CountingStore store;
  HarnessOptions o;
  o.store = &store;
  const auto a = check_thm3(FunctionSpec::hat(0, 1), 2.0, o);
  CHECK(store.calls == 1);
  CHECK(store.computed == 1);
  const auto b = check_thm3(FunctionSpec::hat(0, 1), 2.0, o);
  CHECK(store.calls == 2);
  CHECK(store.computed == 1);
  CHECK(a.lhs.value() == b.lhs.value());
  CHECK(a.lhs.value() == check_thm3(FunctionSpec::hat(0, 1), 2.0).lhs.value());
  // Monte Carlo requests carry their seed
  o.method = Method::monte_carlo;
  o.samples = 20000;
  o.seed = 3;
  (void)check_thm3(FunctionSpec::hat(0, 1), 2.0, o);
  o.seed = 4;
  (void)check_thm3(FunctionSpec::hat(0, 1), 2.0, o);
  CHECK(store.computed == 3);
}

TEST_CASE("sweeps over p collect one report per exponent") {
  const auto s = sweep_over_p("thm3", {1.0, 2.0, 4.0}, [](double p) { return check_thm3(FunctionSpec::indicator(0, 1), p); });
  REQUIRE(s.reports.size() == 3);
  CHECK(s.summary_value("max_ratio") == Approx(1.0).epsilon(1e-12));  // p = 1: 2 / 2
  CHECK_THROWS_AS(s.column("nosuch"), DomainError);
}
