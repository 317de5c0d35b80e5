#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "btw/rng.hpp"
#include "btw/stats.hpp"

using namespace btw;

namespace {

std::vector<double> pareto_sample(double alpha, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = std::pow(1.0 - rng.u01(), -1.0 / alpha);
  return xs;
}

}  // namespace

TEST_CASE("hill recovers a synthetic Pareto index") {
  auto xs = pareto_sample(2.0, 100000, 42);
  auto est = stats::hill(xs, 1000);
  CHECK(est.alpha == doctest::Approx(2.0).epsilon(0.1));
  CHECK(est.se == doctest::Approx(est.alpha / std::sqrt(1000.0)));
  CHECK(est.k_order == 1000);
}

TEST_CASE("hill is scale invariant") {
  auto xs = pareto_sample(1.5, 20000, 7);
  auto base = stats::hill(xs, 400);
  std::vector<double> scaled(xs);
  for (auto& x : scaled) x *= 4.0;  // power of two: ratios are bit-exact
  auto s4 = stats::hill(scaled, 400);
  CHECK(s4.alpha == base.alpha);
  for (auto& x : scaled) x *= 0.75;
  auto s3 = stats::hill(scaled, 400);
  CHECK(s3.alpha == doctest::Approx(base.alpha).epsilon(1e-12));
}

TEST_CASE("hill rejects degenerate input") {
  std::vector<double> constant(5000, 3.0);
  CHECK_THROWS_AS((void)stats::hill(constant, 100), stats::StatsError);
  std::vector<double> tiny(50, 1.0);
  CHECK_THROWS_AS((void)stats::hill(tiny, 20), stats::StatsError);
}

TEST_CASE("hill_auto flags a light tail as drifting") {
  RngStream rng(11);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = -std::log(1.0 - rng.u01());  // exponential
  auto est = stats::hill_auto(xs);
  CHECK(est.flag == stats::TailFlag::no_plateau);

  auto ys = pareto_sample(2.0, 100000, 12);
  auto good = stats::hill_auto(ys);
  CHECK(good.flag == stats::TailFlag::ok);
  CHECK(good.alpha == doctest::Approx(2.0).epsilon(0.12));
}

TEST_CASE("loglog_fit slope matches synthetic Pareto tails") {
  for (double alpha : {1.5, 3.0}) {
    auto xs = pareto_sample(alpha, 200000, 99 + static_cast<std::uint64_t>(alpha * 10));
    std::vector<double> grid;
    for (double x = 1.5; x <= 30.0; x *= 1.25) grid.push_back(x);
    auto curve = stats::survival_curve(xs, grid);
    auto fit = stats::loglog_fit(curve, 1.5, 30.0, 100);
    double tol = alpha < 2.0 ? 0.1 : 0.2;
    CHECK(fit.slope == doctest::Approx(-alpha).epsilon(tol / alpha));
    CHECK(fit.r2 > 0.99);
  }
}

TEST_CASE("loglog_fit reports an empty range") {
  RngStream rng(5);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.u01();
  std::vector<double> grid{2.0, 3.0, 4.0, 5.0, 6.0};
  auto curve = stats::survival_curve(xs, grid);
  CHECK_THROWS_AS((void)stats::loglog_fit(curve, 2.0, 6.0, 100), stats::StatsError);
}

TEST_CASE("survival curve basics") {
  std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  std::vector<double> grid{0.5, 1.0, 2.5, 4.0, 9.0};
  auto curve = stats::survival_curve(xs, grid);
  CHECK(curve[0].survival == 1.0);  // nothing below the grid minimum
  for (std::size_t i = 1; i < curve.size(); ++i)
    CHECK(curve[i].survival <= curve[i - 1].survival);
  CHECK(curve.back().survival == doctest::Approx(0.0));
}

TEST_CASE("survival curve treats censored values as right-censored") {
  // censored observation at 2 only reduces the at-risk set
  std::vector<double> xs{1.0, 2.0, 3.0};
  std::vector<std::uint8_t> cens{0, 1, 0};
  std::vector<double> grid{1.0, 2.0, 3.0};
  auto curve = stats::survival_curve(xs, cens, grid);
  CHECK(curve[0].survival == doctest::Approx(2.0 / 3.0));
  CHECK(curve[1].survival == doctest::Approx(2.0 / 3.0));
  CHECK(curve[2].survival == doctest::Approx(0.0));
}

TEST_CASE("ks statistic is zero for identical samples") {
  auto xs = pareto_sample(2.0, 1000, 3);
  auto r = stats::ks_two_sample(xs, xs);
  CHECK(r.value == 0.0);
  CHECK(r.p_value == 1.0);
}

TEST_CASE("ks detects a clear shift") {
  auto xs = pareto_sample(2.0, 5000, 3);
  std::vector<double> ys(xs);
  for (auto& y : ys) y += 0.5;
  auto r = stats::ks_two_sample(xs, ys);
  CHECK(r.p_value < 1e-6);
}

TEST_CASE("chi-square p-values are roughly uniform for a fair die") {
  RngStream rng(17);
  std::vector<double> expected(6, 100.0);
  int low = 0;
  std::vector<double> ps;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> counts(6, 0.0);
    for (int i = 0; i < 600; ++i) counts[rng.below(6)] += 1.0;
    auto r = stats::chi_square_gof(counts, expected);
    ps.push_back(r.p_value);
    if (r.p_value < 0.001) ++low;
  }
  CHECK(low <= 2);
  double mean = 0.0;
  for (double p : ps) mean += p;
  mean /= static_cast<double>(ps.size());
  CHECK(mean > 0.35);
  CHECK(mean < 0.65);
}

TEST_CASE("chi2_sf matches pinned reference values") {
  CHECK(stats::chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chi2_sf(0.0, 4) == 1.0);
  CHECK(stats::chi2_sf(9.487729036781154, 4) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("two-sample chi-square accepts equal laws and rejects different ones") {
  RngStream rng(23);
  std::vector<double> a(10, 0.0), b(10, 0.0), c(10, 0.0);
  for (int i = 0; i < 20000; ++i) {
    a[rng.below(10)] += 1.0;
    b[rng.below(10)] += 1.0;
    c[rng.below(5)] += 1.0;  // different support
  }
  CHECK(stats::chi_square_two_sample(a, b).p_value > 0.001);
  CHECK(stats::chi_square_two_sample(a, c).p_value < 1e-9);
}

TEST_CASE("ks_distance against the true cdf of a uniform sample") {
  RngStream rng(31);
  std::vector<double> xs(20000);
  for (auto& x : xs) x = rng.u01();
  double d = stats::ks_distance(xs, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(d < 0.02);
}
