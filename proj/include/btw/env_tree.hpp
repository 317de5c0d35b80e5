#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "btw/law.hpp"
#include "btw/rng.hpp"

namespace btw::env {

inline constexpr std::int32_t kNoNode = -1;

struct EnvNode {
  std::int32_t parent = kNoNode;
  std::int32_t first_child = kNoNode;  // valid when expanded
  std::int32_t n_children = -1;        // -1 = unexpanded
  std::int32_t depth = 0;
  double V = 0.0;
  double weight = 1.0;            // e^{-V}
  double child_weight_sum = 0.0;  // valid when expanded
  std::uint64_t sig = 0;          // expansion substream key
  bool expanded() const { return n_children >= 0; }
};

// Arena of one BRW realization. Children are materialized lazily; each node's
// offspring draw is keyed by a per-node signature, so the realized tree is a
// function of the seed alone, independent of expansion order.
class EnvTree {
 public:
  EnvTree(const ReproductionLaw* law, std::uint64_t seed);
  // fixed one-generation environment: root plus childless children with the
  // given edge weights
  static EnvTree quenched_star(std::span<const double> child_weights);

  const ReproductionLaw* law() const { return law_; }
  std::size_t size() const { return nodes_.size(); }
  const EnvNode& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }
  EnvNode& node(std::int32_t id) { return nodes_[static_cast<std::size_t>(id)]; }
  std::int32_t root() const { return 0; }

  // Materializes the children of `id` (idempotent). Returns false when the
  // arena would exceed `max_nodes`; the node stays unexpanded.
  bool try_expand(std::int32_t id, std::size_t max_nodes);
  // children ids as a contiguous range [first, first+n)
  std::pair<std::int32_t, std::int32_t> children(std::int32_t id) const {
    const auto& n = node(id);
    return {n.first_child, n.n_children};
  }

  // Appends a pre-positioned child (used by the Q* spined construction).
  std::int32_t add_child(std::int32_t parent, double V);
  void mark_expanded(std::int32_t id);

 private:
  const ReproductionLaw* law_;
  std::vector<EnvNode> nodes_;
};

struct EnvCaps {
  std::size_t max_nodes = std::size_t{1} << 21;
  double barrier = 4.6;     // exploration barrier B for the minimum search
  double w_cut = 7.0;       // freeze threshold (relative height) for W estimates
  double depth_eps = 1e-3;  // |W_{n+stride} - W_n| < eps * max(1, W_n)
  int depth_stride = 5;
  int depth_cap = 60;
  // stall alone is not enough to stop: unfrozen frontier mass must also be a
  // small fraction of the estimate, or the deep-minimum subtrees would leave
  // O(M_e)-sized noise in W_inf
  double mass_frac = 0.05;
};

inline double default_barrier(double kappa_hat, double eps_trunc = 1e-6) {
  return std::log(1.0 / eps_trunc) / kappa_hat;
}

struct MinRecord {
  double M = 0.0;    // inf of V over the (truncated) tree
  double M_e = 1.0;  // e^{-M}
  std::int32_t ustar = 0;
  std::int32_t ustar_depth = 0;
  double barrier = 0.0;
  bool converged = true;
};

struct WEstimate {
  double value = 0.0;
  int depth_used = 0;
  bool converged = true;  // false when the node budget interrupted the sweep
};

struct WPair {
  double W_inf = 0.0;
  double M_e = 1.0;
  double W_M = 0.0;  // e^{M} * W_inf
  int depth_used = 0;
  bool censored = false;
};

struct TruncatedWm {
  double value = 0.0;
  bool t_exceeds_depth = false;
};

// Exact additive martingale W_n from full expansion to depth n.
// nullopt when the node budget is exceeded.
std::optional<double> additive_martingale(EnvTree& tree, int depth, std::size_t max_nodes);

// Minimum of the BRW via best-first search, pruning subtrees rooted above
// current_min + barrier. u* drawn uniformly among the deepest minimizers.
MinRecord brw_minimum(EnvTree& tree, double barrier, std::size_t max_nodes,
                      RngStream& tie_rng);

// Truncated-martingale estimate of W_infty for the subtree rooted at `root`:
// frontier nodes at relative height >= w_cut are frozen at their conditional
// expectation e^{-(V-V(root))}, generations advance until the depth policy
// stops.
WEstimate w_estimate(EnvTree& tree, std::int32_t root, const EnvCaps& caps);

// One joint sample (W_inf, M_e, W^M) off a single environment realization.
WPair sample_w_pair(EnvTree& tree, const EnvCaps& caps, RngStream& tie_rng);

// Ancestor-truncated version of W^M across the last t+1 generations above u*.
TruncatedWm truncated_wm(EnvTree& tree, const MinRecord& rec, int t, const EnvCaps& caps);

}  // namespace btw::env
