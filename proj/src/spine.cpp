#include "btw/spine.hpp"

#include <algorithm>
#include <cmath>

namespace btw::spine {

double compute_pij(const ReproductionLaw& law, std::uint32_t i, std::uint32_t j,
                   std::uint32_t overflow_guard) {
  if (i < 1 || j < 1) throw std::invalid_argument("compute_pij: types start at 1");
  if (i + j > overflow_guard) throw OverflowGuard();
  const double lc = std::lgamma(static_cast<double>(i) + j) -
                    std::lgamma(static_cast<double>(i) + 1.0) -
                    std::lgamma(static_cast<double>(j));
  double sum = 0.0;
  for (const auto& b : law.branches()) {
    for (double A : b.weights) {
      double lt = lc + static_cast<double>(j) * std::log(A) -
                  (static_cast<double>(i) + j) * std::log1p(A);
      sum += b.prob * std::exp(lt);
    }
  }
  return sum;
}

const PijTable::Row& PijTable::row(std::uint32_t i) {
  if (i < 1) throw std::invalid_argument("PijTable: types start at 1");
  if (rows_.size() < i) rows_.resize(i);
  Row& r = rows_[i - 1];
  if (!r.p.empty()) return r;
  // extend j until each atom's geometric tail bound drops below tail_tol
  const double max_w = law_->max_weight();
  std::uint32_t j = 0;
  double tail = 0.0;
  while (true) {
    ++j;
    if (i + j > guard_) throw OverflowGuard();
    double pij = compute_pij(*law_, i, j, guard_);
    r.p.push_back(pij);
    r.sum += pij;
    // ratio of consecutive terms is at most ((i+j)/(j+1)) * A/(1+A), which is
    // decreasing in j; bound the whole remainder by the dominant atom's
    // geometric series
    double q = (static_cast<double>(i + j) / (j + 1)) * (max_w / (1.0 + max_w));
    if (q < 1.0) {
      tail = pij * q / (1.0 - q);
      if (tail < tail_tol_ && static_cast<double>(j) > 2.0 * max_w * i) break;
    }
    if (j > guard_) throw OverflowGuard();
  }
  r.tail_bound = tail;
  return r;
}

double PijTable::p(std::uint32_t i, std::uint32_t j) {
  const Row& r = row(i);
  if (j < 1 || j > r.p.size()) return 0.0;
  return r.p[j - 1];
}

std::uint32_t PijTable::sample_next(std::uint32_t i, RngStream& rng) {
  const Row& r = row(i);
  double u = rng.u01() * r.sum;
  double acc = 0.0;
  for (std::size_t j = 0; j < r.p.size(); ++j) {
    acc += r.p[j];
    if (u <= acc) return static_cast<std::uint32_t>(j + 1);
  }
  return static_cast<std::uint32_t>(r.p.size());
}

std::vector<std::uint32_t> sample_spine_chain(PijTable& table, std::uint32_t start,
                                              std::size_t steps, RngStream& rng) {
  std::vector<std::uint32_t> seq;
  seq.reserve(steps + 1);
  seq.push_back(start);
  for (std::size_t k = 0; k < steps; ++k) seq.push_back(table.sample_next(seq.back(), rng));
  return seq;
}

std::vector<std::uint32_t> run_chain_to_stop(PijTable& table, std::uint32_t start,
                                             std::uint32_t stop_above, std::size_t step_cap,
                                             RngStream& rng) {
  std::vector<std::uint32_t> seq{start};
  for (std::size_t k = 0; k < step_cap; ++k) {
    std::uint32_t next = table.sample_next(seq.back(), rng);
    seq.push_back(next);
    if (next == 1 || next > stop_above) break;
  }
  return seq;
}

SpinedEnv sample_qstar_env(const ReproductionLaw& law, int depth, std::uint64_t seed) {
  SpinedEnv out{env::EnvTree(&law, seed), {}};
  RngStream rng(seed, 0x51737472);  // spine reproduction stream
  std::int32_t w = out.tree.root();
  out.spine.push_back(w);
  for (int k = 0; k < depth; ++k) {
    std::size_t bidx = law.draw_branch_qstar(rng);
    const Branch& b = law.branches()[bidx];
    std::int32_t first = -1;
    for (std::size_t j = 0; j < b.weights.size(); ++j) {
      std::int32_t c = out.tree.add_child(w, out.tree.node(w).V + b.displacements[j]);
      if (j == 0) first = c;
    }
    std::size_t pick = law.draw_spine_child(bidx, rng);
    w = first + static_cast<std::int32_t>(pick);
    out.spine.push_back(w);
  }
  return out;
}

namespace {

// Killed walk: from `start`, absorbed on the upward move out of `start`
// (reaching its parent, or the artificial parent for the root). Only downward
// crossings accumulate.
bool run_killed_walk(env::EnvTree& tree, std::int32_t start,
                     std::vector<std::uint32_t>& betas, std::uint64_t& steps_left,
                     std::size_t max_nodes, RngStream& rng) {
  std::int32_t u = start;
  while (true) {
    if (steps_left == 0) return false;
    --steps_left;
    if (!tree.node(u).expanded()) {
      if (!tree.try_expand(u, max_nodes)) return false;
      if (betas.size() < tree.size()) betas.resize(tree.size(), 0);
    }
    const auto& nu = tree.node(u);
    double r = rng.u01() * (nu.weight + nu.child_weight_sum);
    if (r < nu.weight || nu.n_children == 0) {
      if (u == start) return true;  // absorbed at the kill site
      u = nu.parent;
      continue;
    }
    r -= nu.weight;
    std::int32_t z = nu.first_child;
    const std::int32_t last = nu.first_child + nu.n_children - 1;
    while (z < last) {
      r -= tree.node(z).weight;
      if (r < 0.0) break;
      ++z;
    }
    ++betas[static_cast<std::size_t>(z)];
    u = z;
  }
}

}  // namespace

SpinedBetaTree killed_walk_beta(SpinedEnv& senv, const KilledWalkCaps& caps,
                                RngStream& rng) {
  SpinedBetaTree out;
  std::vector<std::uint32_t> betas(senv.tree.size(), 0);
  std::uint64_t steps_left = caps.max_steps;
  for (int family = 0; family < 2; ++family) {
    for (std::size_t i = 0; i < senv.spine.size(); ++i) {
      if (!run_killed_walk(senv.tree, senv.spine[i], betas, steps_left, caps.max_nodes,
                           rng)) {
        out.censored = true;
        break;
      }
    }
    if (out.censored) break;
  }
  // spine indicator
  if (betas.size() < senv.tree.size()) betas.resize(senv.tree.size(), 0);
  for (auto w : senv.spine) ++betas[static_cast<std::size_t>(w)];
  for (auto w : senv.spine) out.spine_types.push_back(betas[static_cast<std::size_t>(w)]);

  // export positive-type vertices and their realized sibling sets
  BetaTree& bt = out.tree;
  bt.root_type = betas[0];
  bt.censored = out.censored;
  bt.nodes.push_back(BetaNode{-1, -1, 0, 0, betas[0]});
  bt.V.push_back(senv.tree.node(0).V);
  std::vector<std::int32_t> env_to_beta(senv.tree.size(), -1);
  env_to_beta[0] = 0;
  std::vector<std::pair<std::int32_t, std::int32_t>> frontier{{senv.tree.root(), 0}};
  std::vector<std::pair<std::int32_t, std::int32_t>> next;
  while (!frontier.empty()) {
    next.clear();
    for (auto [env_id, beta_id] : frontier) {
      auto [first, nch] = senv.tree.children(env_id);
      if (nch <= 0) continue;
      bt.nodes[static_cast<std::size_t>(beta_id)].first_child =
          static_cast<std::int32_t>(bt.nodes.size());
      bt.nodes[static_cast<std::size_t>(beta_id)].n_children = nch;
      for (std::int32_t k = 0; k < nch; ++k) {
        std::int32_t c = first + k;
        std::uint32_t bc = betas[static_cast<std::size_t>(c)];
        auto child_id = static_cast<std::int32_t>(bt.nodes.size());
        bt.nodes.push_back(BetaNode{beta_id, -1, 0,
                                    bt.nodes[static_cast<std::size_t>(beta_id)].depth + 1,
                                    bc});
        bt.V.push_back(senv.tree.node(c).V);
        env_to_beta[static_cast<std::size_t>(c)] = child_id;
        if (bc > 0) next.emplace_back(c, child_id);
      }
    }
    frontier.swap(next);
  }
  for (auto w : senv.spine)
    bt.spine.push_back(env_to_beta[static_cast<std::size_t>(w)]);
  return out;
}

SpineHit spine_hitting(std::span<const std::uint32_t> spine_types, std::uint32_t A) {
  SpineHit hit;
  bool tau_found = false, sigma_found = false;
  for (std::size_t k = 0; k < spine_types.size(); ++k) {
    if (!sigma_found && spine_types[k] > A) {
      hit.sigma_A = static_cast<std::uint32_t>(k);
      hit.beta_sigma = spine_types[k] - 1;
      sigma_found = true;
      if (!tau_found) hit.sigma_before_tau = true;
    }
    if (!tau_found && k >= 1 && spine_types[k] == 1) {
      hit.tau_hat_1 = static_cast<std::uint32_t>(k);
      tau_found = true;
    }
    if (tau_found || sigma_found) break;
  }
  hit.censored = !tau_found && !sigma_found;
  return hit;
}

}  // namespace btw::spine
