#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "btw/law.hpp"
#include "btw/rng.hpp"
#include "btw/rw1d.hpp"
#include "btw/stats.hpp"

using namespace btw;

namespace {
const std::string kLaws = BTW_LAWS_DIR;
ReproductionLaw env_a() { return ReproductionLaw::from_json_file(kLaws + "/env_a.json"); }
ReproductionLaw env_b() { return ReproductionLaw::from_json_file(kLaws + "/env_b.json"); }
ReproductionLaw env_c() { return ReproductionLaw::from_json_file(kLaws + "/env_c.json"); }
}  // namespace

TEST_CASE("tilted increment laws at the reference exponents") {
  auto a = env_a();
  auto s1 = rw1d::tilt(a, 1.0);
  REQUIRE(s1.values.size() == 4);
  CHECK(s1.probs[0] == doctest::Approx(0.625).epsilon(1e-14));
  CHECK(s1.values[0] == doctest::Approx(-std::log(1.25)).epsilon(1e-14));
  CHECK(s1.probs[1] + s1.probs[2] + s1.probs[3] == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(s1.values[1] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  CHECK(s1.mean == doctest::Approx(0.38040).epsilon(1e-4));
  CHECK(s1.mean > 0.0);

  auto s3 = rw1d::tilt(a, 3.0);
  CHECK(s3.probs[0] == doctest::Approx(0.9765625).epsilon(1e-12));
  CHECK(s3.mean == doctest::Approx(-0.18543).epsilon(1e-4));
  CHECK(s3.mean < 0.0);

  auto c1 = rw1d::tilt(env_c(), 1.0);
  CHECK(c1.probs[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(c1.values[0] == doctest::Approx(std::log(5.0 / 3.0)).epsilon(1e-12));
  CHECK(c1.values[1] == doctest::Approx(std::log(2.5)).epsilon(1e-12));

  // drift signs for ENV-B as well (finite kappa)
  auto b = env_b();
  auto kb = b.solve_kappa();
  CHECK(rw1d::tilt(b, 1.0).mean > 0.0);
  CHECK(rw1d::tilt(b, kb.value).mean < 0.0);

  CHECK_THROWS_AS((void)rw1d::tilt(a, 2.0), rw1d::NotNormalized);
}

TEST_CASE("paths are empty at n=0 and obey the law of large numbers") {
  auto s1 = rw1d::tilt(env_a(), 1.0);
  RngStream rng(1);
  CHECK(rw1d::sample_path(s1, 0, rng).empty());
  const int n = 1000, reps = 200;
  std::vector<double> means;
  for (int r = 0; r < reps; ++r)
    means.push_back(rw1d::sample_path(s1, n, rng).back() / n);
  auto ms = stats::mean_se(means);
  CHECK(std::fabs(ms.mean - s1.mean) < 4.0 * ms.se);
}

TEST_CASE("many-to-one with the constant functional is exact on both sides") {
  auto law = env_a();
  auto rep = rw1d::many_to_one_check(
      law, 1, [](std::span<const double>) { return 1.0; }, 200000, 7);
  CHECK(std::fabs(rep.env_mean - 2.0) < 4.0 * rep.env_se);
  CHECK(std::fabs(rep.tilt_mean - 2.0) < 4.0 * rep.tilt_se);
  CHECK(rep.z_many_to_one < 4.0);
  CHECK(rep.z_change_of_measure < 4.0);
}

TEST_CASE("many-to-one on a path box") {
  auto law = env_a();
  auto g = [](std::span<const double> path) {
    for (double v : path)
      if (v <= -0.1) return 0.0;
    return 1.0;
  };
  auto rep = rw1d::many_to_one_check(law, 3, g, 300000, 11);
  CHECK(rep.z_many_to_one < 4.0);
  CHECK(rep.z_change_of_measure < 4.0);
  CHECK(rep.env_mean > 0.0);
}

TEST_CASE("ladder renewal estimates behave") {
  auto law = env_a();
  auto kr = law.solve_kappa();
  auto sk = rw1d::tilt(law, kr.value);
  std::vector<double> grid;
  for (double x = 0.0; x <= 10.0; x += 0.5) grid.push_back(x);
  auto est = rw1d::ladder_renewal(sk, grid, 40000, 13);

  // R_s(0) = 1 exactly: the k=0 term alone
  CHECK(est.r_plus[0] == 1.0);
  CHECK(est.r_plus_se[0] == 0.0);
  CHECK(est.r_minus[0] == 1.0);

  // monotone in x
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(est.r_plus[i] >= est.r_plus[i - 1]);
    CHECK(est.r_minus[i] >= est.r_minus[i - 1]);
    CHECK(est.u_w_plus[i] >= est.u_w_plus[i - 1]);
  }

  // the ascending renewal function stabilizes (negative drift)
  std::size_t last = grid.size() - 1;
  std::size_t mid = grid.size() / 2;
  CHECK(std::fabs(est.r_plus[last] - est.r_plus[mid]) <
        4.0 * (est.r_plus_se[last] + est.r_plus_se[mid]) + 0.05);
  // the descending one keeps growing roughly linearly
  CHECK(est.r_minus[last] > est.r_minus[mid] + 0.5);

  CHECK(!est.first_descent_epochs.empty());

  CHECK_THROWS_AS(
      (void)rw1d::ladder_renewal(rw1d::tilt(law, 1.0), grid, 10, 1),
      std::invalid_argument);
}

TEST_CASE("change of measure identity on a bounded functional") {
  auto law = env_b();
  auto g = [](std::span<const double> path) {
    return path.back() < 0.9 ? 1.0 : 0.0;
  };
  auto rep = rw1d::many_to_one_check(law, 2, g, 200000, 17);
  CHECK(rep.z_change_of_measure < 4.0);
}
