#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "btw/law.hpp"
#include "btw/rng.hpp"

using namespace btw;

namespace {
const std::string kLaws = BTW_LAWS_DIR;
ReproductionLaw env_a() { return ReproductionLaw::from_json_file(kLaws + "/env_a.json"); }
ReproductionLaw env_b() { return ReproductionLaw::from_json_file(kLaws + "/env_b.json"); }
ReproductionLaw env_c() { return ReproductionLaw::from_json_file(kLaws + "/env_c.json"); }
}  // namespace

TEST_CASE("decimal strings parse to exact rationals") {
  auto r = parse_decimal_rational("1.25");
  REQUIRE(r.has_value());
  CHECK(*r == Rational(5, 4));
  CHECK(*parse_decimal_rational("0.2925") == Rational(117, 400));
  CHECK(*parse_decimal_rational("1") == Rational(1));
  CHECK(!parse_decimal_rational("1e-3").has_value());
  CHECK(!parse_decimal_rational("").has_value());
}

TEST_CASE("psi at the reference points, exactly where possible") {
  auto a = env_a();
  REQUIRE(a.exact_available());
  CHECK(a.psi_exact(1) == Rational(1));
  CHECK(a.psi_exact(3) == Rational(1));  // 125/128 + 3/128
  CHECK(a.psi(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.psi(3.0) == doctest::Approx(1.0).epsilon(1e-12));

  auto c = env_c();
  CHECK(c.psi_exact(2) == Rational(13, 25));  // 0.36 + 0.16
  CHECK(c.psi(2.0) == doctest::Approx(0.52).epsilon(1e-14));

  auto b = env_b();
  CHECK(b.psi(1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(b.psi(1.5) == doctest::Approx(0.99979).epsilon(1e-4));
}

TEST_CASE("solve_kappa on the reference environments") {
  auto ka = env_a().solve_kappa();
  REQUIRE(!ka.infinite);
  CHECK(std::fabs(ka.value - 3.0) < 1e-9);
  CHECK(ka.residual < 1e-9);

  auto kb = env_b().solve_kappa();
  REQUIRE(!kb.infinite);
  CHECK(kb.value == doctest::Approx(1.497).epsilon(0.005));
  CHECK(std::fabs(env_b().psi(kb.value) - 1.0) < 1e-9);

  auto kc = env_c().solve_kappa();
  CHECK(kc.infinite);
}

TEST_CASE("validate reports the conditions") {
  auto rep = env_a().validate();
  CHECK(rep.supercritical);
  CHECK(rep.normalized);
  CHECK(rep.negative_slope);
  CHECK(rep.kappa_ok);
  CHECK(rep.non_lattice);
  CHECK(rep.all_required());

  // constructed violation: psi(1) = 0.9
  auto bad = ReproductionLaw::from_json_text(
      R"({"branches":[{"prob":"1","weights":["0.9"]}]})");
  auto brep = bad.validate();
  CHECK(!brep.normalized);

  // lattice-like law: identical displacements, warning only
  auto lat = ReproductionLaw::from_json_text(
      R"({"branches":[{"prob":"1","weights":["0.5","0.5"]}]})");
  auto lrep = lat.validate();
  CHECK(!lrep.non_lattice);
  CHECK(lrep.normalized);
}

TEST_CASE("law construction rejects bad inputs") {
  CHECK_THROWS_AS(ReproductionLaw::from_json_text(
                      R"({"branches":[{"prob":"0.7","weights":["1"]}]})"),
                  LawError);
  CHECK_THROWS_AS(ReproductionLaw::from_json_text(
                      R"({"branches":[{"prob":"1","weights":["-0.5"]}]})"),
                  LawError);
  CHECK_THROWS_AS(ReproductionLaw::from_json_text(R"({"branches":[]})"), LawError);
  CHECK_THROWS_AS(ReproductionLaw::from_json_text("not json"), LawError);
}

TEST_CASE("psi is convex on random evaluation pairs") {
  RngStream rng(2024);
  for (const auto& law : {env_a(), env_b(), env_c()}) {
    for (int i = 0; i < 200; ++i) {
      double a = rng.u01() * 4.0;
      double b = rng.u01() * 4.0;
      double mid = law.psi(0.5 * (a + b));
      CHECK(mid <= 0.5 * (law.psi(a) + law.psi(b)) + 1e-12);
    }
  }
}

TEST_CASE("branch draws follow the branch probabilities") {
  auto a = env_a();
  RngStream rng(55);
  int n1 = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i)
    if (a.draw_branch(rng) == 0) ++n1;
  // p = 1/2, 3 sigma band
  double sd = std::sqrt(0.25 * N);
  CHECK(std::fabs(n1 - N / 2) < 3.5 * sd);

  // q* tilt: 0.625 / 0.375
  int q1 = 0;
  for (int i = 0; i < N; ++i)
    if (a.draw_branch_qstar(rng) == 0) ++q1;
  double p = 0.625;
  CHECK(std::fabs(q1 - p * N) < 4.0 * std::sqrt(p * (1 - p) * N));
}
