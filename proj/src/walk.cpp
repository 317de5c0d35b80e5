#include "btw/walk.hpp"

#include <algorithm>

namespace btw::walk {

namespace {

// shared transition kernel body; returns false when a cap was hit
inline bool do_step(env::EnvTree& tree, WalkTrace& trace, const WalkCaps& caps,
                    RngStream& rng) {
  if (trace.steps >= caps.max_steps) {
    trace.censored = true;
    return false;
  }
  trace.at_boundary = false;
  if (trace.current == kParentOfRoot) {
    // deterministic return to the root; this is the excursion boundary
    ++trace.steps;
    trace.current = tree.root();
    ++trace.excursions;
    trace.at_boundary = true;
    return true;
  }
  const std::int32_t u = trace.current;
  if (!tree.node(u).expanded()) {
    if (!tree.try_expand(u, caps.max_nodes)) {
      trace.censored = true;
      return false;
    }
    if (tree.size() > trace.local_times.size())
      trace.local_times.resize(tree.size(), 0);
  }
  const auto& nu = tree.node(u);
  const double D = nu.weight + nu.child_weight_sum;
  double r = rng.u01() * D;
  ++trace.steps;
  if (r < nu.weight || nu.n_children == 0) {
    trace.current = (u == tree.root()) ? kParentOfRoot : nu.parent;
    return true;
  }
  r -= nu.weight;
  std::int32_t z = nu.first_child;
  const std::int32_t last = nu.first_child + nu.n_children - 1;
  while (z < last) {
    r -= tree.node(z).weight;
    if (r < 0.0) break;
    ++z;
  }
  auto& lt = trace.local_times[static_cast<std::size_t>(z)];
  if (lt == 0) ++trace.nodes_touched;
  ++lt;
  ++trace.sum_local_times;
  if (lt > trace.max_edge_lt) {
    trace.max_edge_lt = lt;
    trace.argmax_id = z;
  }
  trace.current = z;
  return true;
}

}  // namespace

std::int32_t step(env::EnvTree& tree, WalkTrace& trace, const WalkCaps& caps,
                  RngStream& rng) {
  if (trace.local_times.size() < tree.size()) trace.local_times.resize(tree.size(), 0);
  do_step(tree, trace, caps, rng);
  return trace.current;
}

ExcursionStats run_excursions(env::EnvTree& tree, std::uint32_t n, const WalkCaps& caps,
                              RngStream& rng, WalkTrace* trace_out) {
  WalkTrace trace;
  trace.current = tree.root();
  trace.local_times.assign(tree.size(), 0);
  ExcursionStats stats;
  stats.n_requested = n;
  while (trace.excursions < n) {
    if (!do_step(tree, trace, caps, rng)) break;
    if (trace.at_boundary) stats.tau.push_back(trace.steps);
  }
  stats.excursions_done = trace.excursions;
  stats.max_edge_lt = trace.max_edge_lt;
  stats.argmax_depth = trace.max_edge_lt > 0 ? tree.node(trace.argmax_id).depth : 0;
  stats.nodes_touched = trace.nodes_touched;
  stats.steps = trace.steps;
  stats.sum_local_times = trace.sum_local_times;
  stats.censored = trace.censored;
  if (trace_out != nullptr) *trace_out = std::move(trace);
  return stats;
}

MaxExcursionJoint max_over_excursions(env::EnvTree& tree, std::uint32_t n,
                                      const WalkCaps& caps, const env::EnvCaps& env_caps,
                                      RngStream& walk_rng, RngStream& tie_rng) {
  MaxExcursionJoint out;
  ExcursionStats stats = run_excursions(tree, n, caps, walk_rng);
  env::WPair wp = env::sample_w_pair(tree, env_caps, tie_rng);
  out.max_lt = stats.max_beta();
  out.n_done = stats.excursions_done;
  out.W_inf = wp.W_inf;
  out.M_e = wp.M_e;
  out.censored = stats.censored || wp.censored;
  return out;
}

BetaTree local_time_tree(const env::EnvTree& tree, const WalkTrace& trace) {
  if (!trace.at_boundary) throw NotAtBoundary();
  BetaTree bt;
  bt.root_type = trace.excursions;
  bt.censored = trace.censored;
  bt.nodes.push_back(BetaNode{-1, -1, 0, 0, trace.excursions});
  bt.V.push_back(0.0);
  // BFS over positive-type vertices; their env children are materialized
  // because the walk visited them
  std::vector<std::pair<std::int32_t, std::int32_t>> frontier{{tree.root(), 0}};
  std::vector<std::pair<std::int32_t, std::int32_t>> next;
  while (!frontier.empty()) {
    next.clear();
    for (auto [env_id, beta_id] : frontier) {
      auto [first, nch] = tree.children(env_id);
      if (nch <= 0) continue;
      bt.nodes[static_cast<std::size_t>(beta_id)].first_child =
          static_cast<std::int32_t>(bt.nodes.size());
      bt.nodes[static_cast<std::size_t>(beta_id)].n_children = nch;
      for (std::int32_t k = 0; k < nch; ++k) {
        std::int32_t c = first + k;
        std::uint32_t bc = c < static_cast<std::int32_t>(trace.local_times.size())
                               ? trace.local_times[static_cast<std::size_t>(c)]
                               : 0;
        auto child_id = static_cast<std::int32_t>(bt.nodes.size());
        bt.nodes.push_back(BetaNode{beta_id, -1, 0,
                                    bt.nodes[static_cast<std::size_t>(beta_id)].depth + 1,
                                    bc});
        bt.V.push_back(tree.node(c).V);
        if (bc > 0) next.emplace_back(c, child_id);
      }
    }
    frontier.swap(next);
  }
  return bt;
}

}  // namespace btw::walk
