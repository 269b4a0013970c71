#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ctmove/diagnostics.hpp"
#include "ctmove/rng.hpp"

using namespace ctmove;

TEST_CASE("quantile_summary: linear interpolation between order statistics") {
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 1.0);
  const SummaryRow row = quantile_summary(x, "x");
  CHECK(row.q05 == doctest::Approx(5.95).epsilon(1e-12));
  CHECK(row.q50 == doctest::Approx(50.5).epsilon(1e-12));
  CHECK(row.q95 == doctest::Approx(95.05).epsilon(1e-12));

  const std::vector<double> c(10, 3.25);
  const SummaryRow rc = quantile_summary(c);
  CHECK(rc.q05 == 3.25);
  CHECK(rc.q50 == 3.25);
  CHECK(rc.q95 == 3.25);
}

TEST_CASE("quantile_summary: adding a sample above the maximum never lowers quantiles") {
  Rng rng(3);
  std::vector<double> x;
  for (int i = 0; i < 501; ++i) x.push_back(rng.normal(0.0, 2.0));
  const SummaryRow before = quantile_summary(x);
  x.push_back(*std::max_element(x.begin(), x.end()) + 1.0);
  const SummaryRow after = quantile_summary(x);
  CHECK(after.q05 >= before.q05 - 1e-12);
  CHECK(after.q50 >= before.q50 - 1e-12);
  CHECK(after.q95 >= before.q95 - 1e-12);
}

TEST_CASE("effective_sample_size: iid chain reports close to N") {
  Rng rng(5);
  std::vector<double> x(10000);
  for (double& v : x) v = rng.normal();
  const double ess = effective_sample_size(x);
  CHECK(ess >= 9000.0);
  CHECK(ess <= 10000.0);
}

TEST_CASE("effective_sample_size: AR(1) chain matches the analytic rate") {
  const double rho = 0.9;
  Rng rng(7);
  const std::size_t n = 100000;
  std::vector<double> x(n);
  x[0] = rng.normal();
  for (std::size_t i = 1; i < n; ++i) x[i] = rho * x[i - 1] + std::sqrt(1 - rho * rho) * rng.normal();
  const double expect = static_cast<double>(n) * (1 - rho) / (1 + rho);
  const double ess = effective_sample_size(x);
  CHECK(std::abs(ess - expect) <= 0.1 * expect);
}

TEST_CASE("effective_sample_size: constant chain reports 1") {
  const std::vector<double> x(500, 42.0);
  CHECK(effective_sample_size(x) == 1.0);
}

TEST_CASE("heidelberger_welch: iid chains usually pass untrimmed") {
  Rng rng(11);
  int passed_at_zero = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(2000);
    for (double& v : x) v = rng.normal();
    const HeidelbergerWelch hw = heidelberger_welch(x, 0.01);
    if (hw.stationary && hw.trim == 0.0) ++passed_at_zero;
  }
  CHECK(passed_at_zero >= 90);
}

TEST_CASE("heidelberger_welch: a strong linear trend fails every trim") {
  Rng rng(13);
  int rejected = 0;
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<double> x(2000);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = 5.0 * static_cast<double>(i) / x.size() + rng.normal();
    if (!heidelberger_welch(x, 0.01).stationary) ++rejected;
  }
  CHECK(rejected >= 57);  // > 95 %
}

TEST_CASE("heidelberger_welch: a step change passes only after trimming it away") {
  Rng rng(17);
  std::vector<double> x(3000);
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = (i < 900 ? 8.0 : 0.0) + rng.normal();
  const HeidelbergerWelch hw = heidelberger_welch(x, 0.01);
  CHECK(hw.stationary);
  CHECK(hw.trim >= 0.3 - 1e-12);
}

TEST_CASE("state_probability_series: degenerate and disagreeing snapshot sets") {
  RefinedPath a;
  a.times = {0.0, 1.0, 2.0};
  a.behaviour = {0, 1};
  a.bearings = {0.0, 0.0};
  a.steps = {1.0, 1.0};
  RefinedPath b = a;
  b.behaviour = {1, 0};

  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
  {
    const std::vector<RefinedPath> snaps{a, a, a, a};
    const StateProbabilitySeries s = state_probability_series(snaps, grid, 2);
    CHECK(s.probs(0, 0) == 1.0);
    CHECK(s.probs(2, 1) == 1.0);
    for (int g = 0; g < 5; ++g) CHECK(s.probs(g, 0) + s.probs(g, 1) == 1.0);
  }
  {
    const std::vector<RefinedPath> snaps{a, b};
    const StateProbabilitySeries s = state_probability_series(snaps, grid, 2);
    for (int g = 0; g < 5; ++g) {
      CHECK(s.probs(g, 0) == 0.5);
      CHECK(s.probs(g, 0) + s.probs(g, 1) == 1.0);
    }
  }
}

TEST_CASE("state_probability_series: equals a direct counting oracle") {
  Rng rng(19);
  std::vector<RefinedPath> snaps;
  for (int s = 0; s < 16; ++s) {
    RefinedPath p;
    p.times = {0.0};
    for (int i = 0; i < 20; ++i) p.times.push_back(p.times.back() + 0.3 + rng.uniform());
    p.behaviour.resize(20);
    for (auto& st : p.behaviour) st = rng.uniform() < 0.5 ? 0 : (rng.uniform() < 0.5 ? 1 : 2);
    p.bearings.assign(20, 0.0);
    p.steps.assign(20, 1.0);
    snaps.push_back(std::move(p));
  }
  std::vector<double> grid;
  for (double t = 0.0; t <= 6.0; t += 0.37) grid.push_back(t);
  const StateProbabilitySeries s = state_probability_series(snaps, grid, 3);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    int counts[3] = {0, 0, 0};
    for (const auto& p : snaps) {
      std::size_t i = 0;
      while (i + 1 < p.behaviour.size() && p.times[i + 1] <= grid[g]) ++i;
      counts[p.behaviour[i]] += 1;
    }
    for (int st = 0; st < 3; ++st)
      CHECK(s.probs(static_cast<Eigen::Index>(g), st) ==
            doctest::Approx(counts[st] / 16.0).epsilon(1e-15));
    CHECK(s.probs(static_cast<Eigen::Index>(g), 0) + s.probs(static_cast<Eigen::Index>(g), 1) +
              s.probs(static_cast<Eigen::Index>(g), 2) ==
          1.0);
  }
}
