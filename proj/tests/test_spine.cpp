#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "btw/law.hpp"
#include "btw/rng.hpp"
#include "btw/rw1d.hpp"
#include "btw/spine.hpp"
#include "btw/stats.hpp"

using namespace btw;

namespace {
const std::string kLaws = BTW_LAWS_DIR;
ReproductionLaw env_a() { return ReproductionLaw::from_json_file(kLaws + "/env_a.json"); }
ReproductionLaw env_c() { return ReproductionLaw::from_json_file(kLaws + "/env_c.json"); }
}  // namespace

TEST_CASE("p_ij closed forms at the reference points") {
  auto c = env_c();
  CHECK(spine::compute_pij(c, 1, 1) ==
        doctest::Approx(0.6 / 2.56 + 0.4 / 1.96).epsilon(1e-12));
  auto a = env_a();
  CHECK(spine::compute_pij(a, 1, 1) ==
        doctest::Approx(0.5 * (1.25 / 5.0625) + 0.5 * (0.75 / 1.5625)).epsilon(1e-12));
  CHECK_THROWS_AS((void)spine::compute_pij(a, 9000, 2000), spine::OverflowGuard);
}

TEST_CASE("single unit-weight child rows sum to one by the geometric identity") {
  auto unit = ReproductionLaw::from_json_text(R"({"branches":[{"prob":"1","weights":["1"]}]})");
  spine::PijTable table(&unit);
  for (std::uint32_t i : {1u, 2u, 5u, 10u}) {
    const auto& row = table.row(i);
    CHECK(std::fabs(row.sum - 1.0) <= row.tail_bound + 1e-8);
  }
}

TEST_CASE("rows are stochastic within the reported tail bound") {
  for (auto path : {"/env_a.json", "/env_b.json", "/env_c.json"}) {
    auto law = ReproductionLaw::from_json_file(kLaws + path);
    spine::PijTable table(&law);
    for (std::uint32_t i = 1; i <= 10; ++i) {
      const auto& row = table.row(i);
      CHECK(std::fabs(row.sum - 1.0) <= row.tail_bound + 1e-6);
      for (double p : row.p) CHECK(p >= 0.0);
    }
  }
}

TEST_CASE("chain sampling matches the table row") {
  auto law = env_a();
  spine::PijTable table(&law);
  RngStream rng(1);
  const int N = 100000;
  const auto& row = table.row(1);
  std::size_t jcap = std::min<std::size_t>(row.p.size(), 40);
  std::vector<double> counts(jcap + 1, 0.0), expected(jcap + 1, 0.0);
  for (int s = 0; s < N; ++s) {
    auto j = table.sample_next(1, rng);
    counts[std::min<std::size_t>(j, jcap)] += 1.0;
  }
  for (std::size_t j = 1; j <= jcap; ++j) expected[j] = N * row.p[j - 1];
  double tail = N * (1.0 - row.sum);
  expected[jcap] += std::max(tail, 0.0);
  counts.erase(counts.begin());
  expected.erase(expected.begin());
  auto r = stats::chi_square_gof(counts, expected, 5.0);
  CHECK(r.p_value > 0.001);
}

TEST_CASE("the spine chain never leaves the positive integers and recurs") {
  auto law = env_a();
  spine::PijTable table(&law);
  std::vector<double> means;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    RngStream rng(seed);
    auto seq = spine::sample_spine_chain(table, 1, 20000, rng);
    std::uint64_t returns = 0, last = 0, total = 0, count = 0;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      CHECK(seq[k] >= 1);
      if (seq[k] == 1) {
        ++returns;
        total += k - last;
        last = k;
        ++count;
      }
    }
    REQUIRE(count > 100);
    means.push_back(static_cast<double>(total) / static_cast<double>(count));
  }
  for (double m : means) {
    CHECK(m > 1.0);
    CHECK(m / means.front() > 0.8);
    CHECK(m / means.front() < 1.25);
  }
}

TEST_CASE("q* environment tilts the spine reproduction") {
  auto law = env_a();
  const int N = 100000;
  int singles = 0;
  std::vector<double> root_children, spine_disp;
  for (int s = 0; s < N; ++s) {
    auto senv = spine::sample_qstar_env(law, 1, mix64(21, static_cast<std::uint64_t>(s)));
    auto [first, n] = senv.tree.children(senv.tree.root());
    (void)first;
    if (n == 1) ++singles;
    root_children.push_back(static_cast<double>(n));
    spine_disp.push_back(senv.tree.node(senv.spine[1]).V);
  }
  // branch frequencies 0.625 / 0.375
  CHECK(std::fabs(singles - 0.625 * N) < 4.0 * std::sqrt(0.625 * 0.375 * N));
  // importance identity E_Q[N_root] = E_P[W_1 N_root] = 1.75
  auto ms = stats::mean_se(root_children);
  CHECK(std::fabs(ms.mean - 1.75) < 0.01 * 1.75);
  // mean spine displacement = -psi'(1) = 0.38040
  auto disp = stats::mean_se(spine_disp);
  CHECK(std::fabs(disp.mean - 0.38040) < 4.0 * disp.se);
}

TEST_CASE("killed walks carry the spine marking invariants") {
  auto law = env_a();
  spine::KilledWalkCaps caps;
  RngStream rng(29);
  for (int s = 0; s < 2000; ++s) {
    auto senv = spine::sample_qstar_env(law, 6, mix64(37, static_cast<std::uint64_t>(s)));
    auto sbt = spine::killed_walk_beta(senv, caps, rng);
    if (sbt.censored) continue;
    REQUIRE(sbt.spine_types.size() == 7);
    CHECK(sbt.spine_types[0] == 1);  // root type 1 under the size-biased law
    for (auto b : sbt.spine_types) CHECK(b >= 1);
    CHECK(sbt.tree.spine.size() == 7);
    for (std::size_t k = 0; k < sbt.tree.spine.size(); ++k) {
      auto id = sbt.tree.spine[k];
      REQUIRE(id >= 0);
      CHECK(sbt.tree.nodes[static_cast<std::size_t>(id)].beta == sbt.spine_types[k]);
      CHECK(sbt.tree.nodes[static_cast<std::size_t>(id)].depth == static_cast<int>(k));
    }
  }
}

TEST_CASE("killed walks reconstruct the size-biased first generation") {
  auto law = env_a();
  spine::PijTable table(&law);
  spine::KilledWalkCaps caps;
  caps.max_steps = 100'000'000;  // keep censoring negligible for the fit
  const int N = 40000;
  std::vector<double> z1s;
  const auto& row = table.row(1);
  std::size_t jcap = 30;
  std::vector<double> counts(jcap + 1, 0.0), expected(jcap + 1, 0.0);
  RngStream rng(31);
  int censored = 0;
  for (int s = 0; s < N; ++s) {
    // depth-1 spines: the walks off w_0 and w_1 fully determine beta(w_1)
    auto senv = spine::sample_qstar_env(law, 1, mix64(33, static_cast<std::uint64_t>(s)));
    auto sbt = spine::killed_walk_beta(senv, caps, rng);
    if (sbt.censored) {
      ++censored;
      continue;
    }
    counts[std::min<std::size_t>(sbt.spine_types[1], jcap)] += 1.0;
    z1s.push_back(static_cast<double>(sbt.tree.z_at(1)));
  }
  CHECK(censored < N / 500);
  for (std::size_t j = 1; j < jcap; ++j) expected[j] = N * row.p[j - 1];
  double tail_mass = 0.0;
  for (std::size_t j = jcap; j <= row.p.size(); ++j) tail_mass += row.p[j - 1];
  expected[jcap] = N * tail_mass;
  counts.erase(counts.begin());
  expected.erase(expected.begin());
  auto gof = stats::chi_square_gof(counts, expected, 5.0);
  CHECK(gof.p_value > 0.001);

  // E-hat[Z_1] = E_1[Z_1^2]; exact oracle from the negative multinomial pgf:
  // E[Z_1^2 | env] = W_1 + 2 W_1^2
  double oracle = 0.0;
  for (const auto& b : law.branches())
    oracle += b.prob * (b.weight_sum + 2.0 * b.weight_sum * b.weight_sum);
  auto ms = stats::mean_se(z1s);
  CHECK(std::fabs(ms.mean - oracle) < 4.0 * ms.se + 0.05);
}

TEST_CASE("spine displacements under q* follow the unit-tilted walk") {
  auto law = env_a();
  auto tilted = rw1d::tilt(law, 1.0);
  const int N = 20000;
  std::vector<double> qstar_incr, walk_incr;
  RngStream prng(41);
  // quantize: V-differences along the spine carry float rounding that would
  // split the atoms and blow up the KS distance
  auto q = [](double x) { return std::round(x * 1e9) / 1e9; };
  for (int s = 0; s < N; ++s) {
    auto senv = spine::sample_qstar_env(law, 3, mix64(43, static_cast<std::uint64_t>(s)));
    for (int k = 0; k < 3; ++k)
      qstar_incr.push_back(q(senv.tree.node(senv.spine[static_cast<std::size_t>(k + 1)]).V -
                             senv.tree.node(senv.spine[static_cast<std::size_t>(k)]).V));
  }
  for (int s = 0; s < 3 * N; ++s) walk_incr.push_back(q(tilted.draw(prng)));
  auto r = stats::ks_two_sample(qstar_incr, walk_incr);
  CHECK(r.p_value > 0.001);
}

TEST_CASE("spine hitting races") {
  std::vector<std::uint32_t> to_one{1, 1, 5};
  auto h1 = spine::spine_hitting(to_one, 4);
  CHECK(h1.tau_hat_1 == 1);
  CHECK(!h1.sigma_before_tau);
  CHECK(!h1.censored);

  std::vector<std::uint32_t> jump{1, 3, 9, 1};
  auto h2 = spine::spine_hitting(jump, 4);
  CHECK(h2.sigma_before_tau);
  CHECK(h2.sigma_A == 2);
  CHECK(h2.beta_sigma == 8);

  std::vector<std::uint32_t> short_spine{1, 3, 2};
  auto h3 = spine::spine_hitting(short_spine, 4);
  CHECK(h3.censored);
}

namespace {

// Exact K_A oracle by absorbing-chain linear algebra: states 2..A transient,
// absorption at state 1 (reward 0) or at the first exceedance of A (reward
// (j-1)^{kappa-1}); independent of the chain sampler under test.
double exact_k_a(spine::PijTable& table, std::uint32_t A, double kappa) {
  const int n = static_cast<int>(A) - 1;  // states 2..A
  auto reward = [&](std::uint32_t i) {
    const auto& row = table.row(i);
    double s = 0.0;
    for (std::size_t j = A + 1; j <= row.p.size(); ++j)
      s += row.p[j - 1] * std::pow(static_cast<double>(j - 1), kappa - 1.0);
    return s;
  };
  std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i) {
    const auto& row = table.row(static_cast<std::uint32_t>(i + 2));
    for (int j = 0; j < n; ++j) {
      double pij = (static_cast<std::size_t>(j + 2) <= row.p.size())
                       ? row.p[static_cast<std::size_t>(j + 1)]
                       : 0.0;
      m[i][j] = (i == j ? 1.0 : 0.0) - pij;
    }
    m[i][n] = reward(static_cast<std::uint32_t>(i + 2));
  }
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int i = c + 1; i < n; ++i)
      if (std::fabs(m[i][c]) > std::fabs(m[p][c])) p = i;
    std::swap(m[c], m[p]);
    for (int i = c + 1; i < n; ++i) {
      double f = m[i][c] / m[c][c];
      for (int j = c; j <= n; ++j) m[i][j] -= f * m[c][j];
    }
  }
  std::vector<double> h(static_cast<std::size_t>(n));
  for (int i = n - 1; i >= 0; --i) {
    double s = m[i][n];
    for (int j = i + 1; j < n; ++j) s -= m[i][j] * h[static_cast<std::size_t>(j)];
    h[static_cast<std::size_t>(i)] = s / m[i][i];
  }
  const auto& row1 = table.row(1);
  double k = reward(1);
  for (std::size_t j = 2; j <= A && j <= row1.p.size(); ++j)
    k += row1.p[j - 1] * h[j - 2];
  return k;
}

}  // namespace

TEST_CASE("K_A chain estimates match the absorbing-chain solve") {
  auto law = env_a();
  spine::PijTable table(&law);
  const double kappa = 3.0;
  const int N = 400000;
  std::vector<std::uint32_t> As{4, 8, 16};
  std::vector<double> k_hat(As.size(), 0.0), hit_freq(As.size(), 0.0);
  RngStream rng(51);
  for (int s = 0; s < N; ++s) {
    auto seq = spine::run_chain_to_stop(table, 1, 16, 100000, rng);
    for (std::size_t ai = 0; ai < As.size(); ++ai) {
      auto hit = spine::spine_hitting(seq, As[ai]);
      if (!hit.censored && hit.sigma_before_tau) {
        k_hat[ai] += std::pow(static_cast<double>(hit.beta_sigma), kappa - 1.0);
        hit_freq[ai] += 1.0;
      }
    }
  }
  for (auto& v : k_hat) v /= N;
  for (auto& v : hit_freq) v /= N;
  CHECK(hit_freq[0] > hit_freq[1]);
  CHECK(hit_freq[1] > hit_freq[2]);
  for (std::size_t ai = 0; ai < As.size(); ++ai) {
    double exact = exact_k_a(table, As[ai], kappa);
    CHECK(k_hat[ai] == doctest::Approx(exact).epsilon(0.05));
  }
  CHECK(k_hat[0] < k_hat[1]);
  CHECK(k_hat[1] < k_hat[2]);
}
