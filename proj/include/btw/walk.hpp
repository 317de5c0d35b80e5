#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "btw/beta_tree.hpp"
#include "btw/env_tree.hpp"
#include "btw/rng.hpp"

namespace btw::walk {

// artificial parent of the root
inline constexpr std::int32_t kParentOfRoot = -2;

struct WalkCaps {
  std::uint64_t max_steps = 10'000'000;
  std::size_t max_nodes = std::size_t{1} << 21;
};

struct WalkTrace {
  std::int32_t current = 0;
  std::uint64_t steps = 0;
  std::uint32_t excursions = 0;
  // edge local times of below-root vertices, indexed by env node id; the root
  // edge count equals `excursions`
  std::vector<std::uint32_t> local_times;
  std::uint32_t max_edge_lt = 0;
  std::int32_t argmax_id = 0;
  std::uint64_t sum_local_times = 0;
  std::uint32_t nodes_touched = 0;
  bool censored = false;
  bool at_boundary = false;  // true right after a parent->root crossing
};

struct ExcursionStats {
  std::uint32_t n_requested = 0;
  std::uint32_t excursions_done = 0;
  std::vector<std::uint64_t> tau;
  std::uint32_t max_edge_lt = 0;  // max over below-root edges (0 if none crossed)
  std::int32_t argmax_depth = 0;
  std::uint32_t nodes_touched = 0;
  std::uint64_t steps = 0;
  std::uint64_t sum_local_times = 0;
  bool censored = false;
  // max over all vertices including the root edge, i.e. max(n, max_edge_lt);
  // this is the quantity whose n-rescaled law converges
  std::uint64_t max_beta() const {
    return std::max<std::uint64_t>(excursions_done, max_edge_lt);
  }
};

struct NotAtBoundary : std::runtime_error {
  NotAtBoundary() : std::runtime_error("walk trace is not at an excursion boundary") {}
};

// One transition of the biased walk; updates local times on down-moves.
// Returns the new position. Budget violations mark the trace censored and
// leave the position unchanged.
std::int32_t step(env::EnvTree& tree, WalkTrace& trace, const WalkCaps& caps,
                  RngStream& rng);

// Runs until the n-th parent->root crossing (or a cap). Censored stats carry
// the running maxima as lower bounds.
ExcursionStats run_excursions(env::EnvTree& tree, std::uint32_t n, const WalkCaps& caps,
                              RngStream& rng, WalkTrace* trace_out = nullptr);

struct MaxExcursionJoint {
  std::uint64_t max_lt = 0;  // root-inclusive maximum at tau_n
  std::uint32_t n_done = 0;
  double W_inf = 0.0;
  double M_e = 1.0;
  bool censored = false;
};

// Pairs the walk's maximal edge local time over n excursions with the same
// environment's (W_inf, M_e) estimates.
MaxExcursionJoint max_over_excursions(env::EnvTree& tree, std::uint32_t n,
                                      const WalkCaps& caps, const env::EnvCaps& env_caps,
                                      RngStream& walk_rng, RngStream& tie_rng);

// Exports the edge local times at the current boundary as a typed tree with
// root type = completed excursions. Children of zero-type vertices are not
// materialized.
BetaTree local_time_tree(const env::EnvTree& tree, const WalkTrace& trace);

}  // namespace btw::walk
