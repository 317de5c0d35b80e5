#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "btw/env_tree.hpp"
#include "btw/law.hpp"
#include "btw/ltgw.hpp"
#include "btw/rng.hpp"
#include "btw/stats.hpp"
#include "btw/walk.hpp"

using namespace btw;

namespace {
const std::string kLaws = BTW_LAWS_DIR;
ReproductionLaw env_a() { return ReproductionLaw::from_json_file(kLaws + "/env_a.json"); }
ReproductionLaw env_b() { return ReproductionLaw::from_json_file(kLaws + "/env_b.json"); }
ReproductionLaw env_c() { return ReproductionLaw::from_json_file(kLaws + "/env_c.json"); }
}  // namespace

TEST_CASE("the artificial parent returns to the root with probability 1") {
  auto star = env::EnvTree::quenched_star(std::vector<double>{1.0});
  walk::WalkTrace trace;
  trace.current = walk::kParentOfRoot;
  trace.local_times.assign(star.size(), 0);
  RngStream rng(1);
  walk::WalkCaps caps;
  for (int i = 0; i < 50; ++i) {
    trace.current = walk::kParentOfRoot;
    CHECK(walk::step(star, trace, caps, rng) == star.root());
    CHECK(trace.at_boundary);
  }
}

TEST_CASE("one-step kernel frequencies from a fixed vertex") {
  // single child of weight 1: P(child) = 1/2
  auto star = env::EnvTree::quenched_star(std::vector<double>{1.0});
  RngStream rng(2);
  walk::WalkCaps caps;
  int down = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    walk::WalkTrace trace;
    trace.current = star.root();
    trace.local_times.assign(star.size(), 0);
    if (walk::step(star, trace, caps, rng) != walk::kParentOfRoot) ++down;
  }
  CHECK(std::fabs(down - N / 2) < 4.0 * std::sqrt(0.25 * N));

  // ENV-C root: P(parent) = 0.5, P(c1) = 0.3, P(c2) = 0.2
  auto law = env_c();
  env::EnvTree tree(&law, 3);
  REQUIRE(tree.try_expand(tree.root(), 1 << 20));
  auto [first, n] = tree.children(tree.root());
  REQUIRE(n == 2);
  std::vector<double> counts(3, 0.0);
  for (int i = 0; i < N; ++i) {
    walk::WalkTrace trace;
    trace.current = tree.root();
    trace.local_times.assign(tree.size(), 0);
    auto to = walk::step(tree, trace, caps, rng);
    if (to == walk::kParentOfRoot)
      counts[0] += 1;
    else if (to == first)
      counts[1] += 1;
    else
      counts[2] += 1;
  }
  std::vector<double> expected{0.5 * N, 0.3 * N, 0.2 * N};
  auto gof = stats::chi_square_gof(counts, expected);
  CHECK(gof.p_value > 0.001);
}

TEST_CASE("immediate-exit probability of the first excursion") {
  // quenched star with W_1 = 1: P(max edge local time = 0) = 1/(1+W_1) = 1/2
  RngStream rng(5);
  walk::WalkCaps caps;
  int zero = 0;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    auto star = env::EnvTree::quenched_star(std::vector<double>{1.0});
    auto stats_ = walk::run_excursions(star, 1, caps, rng);
    REQUIRE(!stats_.censored);
    if (stats_.max_edge_lt == 0) ++zero;
  }
  CHECK(std::fabs(zero - N / 2) < 4.0 * std::sqrt(0.25 * N));
}

TEST_CASE("step identity holds exactly at every boundary") {
  walk::WalkCaps caps;
  for (const auto& law : {env_a(), env_b(), env_c()}) {
    for (std::uint64_t s = 0; s < 300; ++s) {
      std::uint32_t n = 1 + static_cast<std::uint32_t>(s % 4);
      env::EnvTree tree(&law, mix64(100, s));
      RngStream rng(100, s);
      auto st = walk::run_excursions(tree, n, caps, rng);
      if (st.censored) continue;
      CHECK(st.excursions_done == n);
      CHECK(st.tau.size() == n);
      CHECK(st.tau.back() == st.steps);
      CHECK(st.tau.back() == 2 * static_cast<std::uint64_t>(n) + 2 * st.sum_local_times);
      for (std::size_t k = 1; k < st.tau.size(); ++k) CHECK(st.tau[k] > st.tau[k - 1]);
    }
  }
}

TEST_CASE("recurrence smoke test: excursions complete within the default cap") {
  walk::WalkCaps caps;
  for (const auto& law : {env_a(), env_b(), env_c()}) {
    int censored = 0;
    const int N = 1000;
    for (int i = 0; i < N; ++i) {
      env::EnvTree tree(&law, mix64(200, static_cast<std::uint64_t>(i)));
      RngStream rng(200, static_cast<std::uint64_t>(i));
      auto st = walk::run_excursions(tree, 1, caps, rng);
      if (st.censored) ++censored;
    }
    CHECK(censored <= N / 100);
  }
}

TEST_CASE("local_time_tree of an immediate exit is a bare root") {
  RngStream rng(7);
  walk::WalkCaps caps;
  for (int i = 0; i < 2000; ++i) {
    auto star = env::EnvTree::quenched_star(std::vector<double>{1.0});
    walk::WalkTrace trace;
    auto st = walk::run_excursions(star, 1, caps, rng, &trace);
    if (st.max_edge_lt != 0) continue;
    auto bt = walk::local_time_tree(star, trace);
    CHECK(bt.root_type == 1);
    for (const auto& node : bt.nodes)
      if (node.depth > 0) CHECK(node.beta == 0);
    return;
  }
  FAIL("no immediate exit observed");
}

TEST_CASE("local_time_tree demands an excursion boundary") {
  auto star = env::EnvTree::quenched_star(std::vector<double>{1.0});
  walk::WalkTrace trace;
  trace.current = star.root();
  CHECK_THROWS_AS((void)walk::local_time_tree(star, trace), walk::NotAtBoundary);
}

TEST_CASE("annealed equivalence of walk-derived and direct typed trees") {
  auto law = env_a();
  walk::WalkCaps caps;
  ltgw::TreeCaps tcaps;
  const int N = 30000;
  // joint statistic (root child count, Z1) encoded as count * 64 + min(Z1, 63)
  std::vector<double> walk_counts(4 * 64, 0.0), gw_counts(4 * 64, 0.0);
  std::vector<double> z1_walk;
  RngStream wrng(42), grng(43);
  for (int i = 0; i < N; ++i) {
    env::EnvTree tree(&law, mix64(300, static_cast<std::uint64_t>(i)));
    walk::WalkTrace trace;
    auto st = walk::run_excursions(tree, 1, caps, wrng, &trace);
    if (!st.censored) {  // censored runs are excluded from chi-square tests
      auto bt = walk::local_time_tree(tree, trace);
      auto z1 = bt.z_at(1);
      z1_walk.push_back(static_cast<double>(z1));
      std::size_t cell = static_cast<std::size_t>(std::min(bt.root_child_count(), 3)) * 64 +
                         static_cast<std::size_t>(std::min<std::uint64_t>(z1, 63));
      walk_counts[cell] += 1.0;
    }
    auto gt = ltgw::sample_tree(1, law, tcaps, grng);
    if (gt.censored) continue;
    auto gz1 = gt.z_at(1);
    std::size_t cell = static_cast<std::size_t>(std::min(gt.root_child_count(), 3)) * 64 +
                       static_cast<std::size_t>(std::min<std::uint64_t>(gz1, 63));
    gw_counts[cell] += 1.0;
  }
  auto r = stats::chi_square_two_sample(walk_counts, gw_counts);
  CHECK(r.p_value > 0.001);

  auto ms = stats::mean_se(z1_walk);
  CHECK(std::fabs(ms.mean - 1.0) < 4.0 * ms.se);
}

TEST_CASE("max_over_excursions wraps run_excursions deterministically") {
  auto law = env_b();
  walk::WalkCaps caps;
  env::EnvCaps ecaps;
  for (std::uint64_t s = 0; s < 30; ++s) {
    env::EnvTree t1(&law, mix64(400, s));
    RngStream w1(400, s), tie1(401, s);
    auto joint = walk::max_over_excursions(t1, 5, caps, ecaps, w1, tie1);

    env::EnvTree t2(&law, mix64(400, s));
    RngStream w2(400, s);
    auto st = walk::run_excursions(t2, 5, caps, w2);
    CHECK(joint.max_lt == st.max_beta());
    CHECK(joint.max_lt >= st.excursions_done);
    CHECK(joint.M_e >= 1.0);
  }
}
