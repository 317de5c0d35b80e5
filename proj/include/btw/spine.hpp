#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "btw/beta_tree.hpp"
#include "btw/env_tree.hpp"
#include "btw/law.hpp"
#include "btw/rng.hpp"

namespace btw::spine {

struct OverflowGuard : std::runtime_error {
  OverflowGuard() : std::runtime_error("p_ij index outside the log-space safe bound") {}
};

// Exact transition probability of the spine type chain:
// p_ij = C(i+j-1, i) * E[ sum_{|u|=1} A_u^j / (1+A_u)^{i+j} ], computed in
// log space per atom.
double compute_pij(const ReproductionLaw& law, std::uint32_t i, std::uint32_t j,
                   std::uint32_t overflow_guard = 10000);

// Row-cached table with per-row truncation so the analytically bounded tail
// mass stays below `tail_tol`.
class PijTable {
 public:
  struct Row {
    std::vector<double> p;  // p[j-1] = p_{i,j}
    double tail_bound = 0.0;
    double sum = 0.0;
  };

  PijTable(const ReproductionLaw* law, double tail_tol = 1e-9,
           std::uint32_t overflow_guard = 10000)
      : law_(law), tail_tol_(tail_tol), guard_(overflow_guard) {}

  const Row& row(std::uint32_t i);
  double p(std::uint32_t i, std::uint32_t j);
  std::uint32_t sample_next(std::uint32_t i, RngStream& rng);
  const ReproductionLaw* law() const { return law_; }

 private:
  const ReproductionLaw* law_;
  double tail_tol_;
  std::uint32_t guard_;
  std::vector<Row> rows_;  // rows_[i-1]
};

// Markov chain of spine types from the table; returns beta(w_0..w_steps).
std::vector<std::uint32_t> sample_spine_chain(PijTable& table, std::uint32_t start,
                                              std::size_t steps, RngStream& rng);

// Chain run stopped at the first return to 1 or the first exceedance of
// stop_above, whichever comes first (capped).
std::vector<std::uint32_t> run_chain_to_stop(PijTable& table, std::uint32_t start,
                                             std::uint32_t stop_above, std::size_t step_cap,
                                             RngStream& rng);

// Environment with a marked ray reproducing via the size-biased point process.
struct SpinedEnv {
  env::EnvTree tree;
  std::vector<std::int32_t> spine;  // w_0 = root, ..., w_depth
};

// Spine vertices beget children via the tilted law (branch b with probability
// prob_b * W_b, spine child with probability A_u / W_b); off-spine vertices
// reproduce plainly and lazily.
SpinedEnv sample_qstar_env(const ReproductionLaw& law, int depth, std::uint64_t seed);

struct SpinedBetaTree {
  BetaTree tree;                          // spine ids inside tree.spine
  std::vector<std::uint32_t> spine_types;  // beta(w_0..w_K)
  bool censored = false;
};

struct KilledWalkCaps {
  std::uint64_t max_steps = 50'000'000;  // total across all killed walks
  std::size_t max_nodes = std::size_t{1} << 21;
};

// Two independent families of killed walks off the spined environment; their
// downward crossings plus the spine indicator reconstruct the size-biased
// typed tree with root type 1.
SpinedBetaTree killed_walk_beta(SpinedEnv& senv, const KilledWalkCaps& caps,
                                RngStream& rng);

struct SpineHit {
  std::uint32_t tau_hat_1 = 0;   // first k >= 1 with beta(w_k) = 1 (0 if unresolved)
  std::uint32_t sigma_A = 0;     // first k >= 0 with beta(w_k) > A (0 if unresolved)
  std::uint64_t beta_sigma = 0;  // beta^{sigma_A}(w_sigma) = beta(w_sigma) - 1
  bool sigma_before_tau = false;
  bool censored = false;  // spine too short to resolve the race
};

// Exact hitting times along a recorded spine type sequence.
SpineHit spine_hitting(std::span<const std::uint32_t> spine_types, std::uint32_t A);

}  // namespace btw::spine
