#include "btw/env_tree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace btw::env {

EnvTree::EnvTree(const ReproductionLaw* law, std::uint64_t seed) : law_(law) {
  EnvNode root;
  root.sig = mix64(seed, 0x9d2c5680u);
  nodes_.push_back(root);
}

EnvTree EnvTree::quenched_star(std::span<const double> child_weights) {
  EnvTree t(nullptr, 0);
  auto& root = t.nodes_[0];
  root.first_child = 1;
  root.n_children = static_cast<std::int32_t>(child_weights.size());
  for (double w : child_weights) {
    EnvNode c;
    c.parent = 0;
    c.depth = 1;
    c.V = -std::log(w);
    c.weight = w;
    c.first_child = kNoNode;
    c.n_children = 0;  // leaf
    root.child_weight_sum += w;
    t.nodes_.push_back(c);
  }
  return t;
}

bool EnvTree::try_expand(std::int32_t id, std::size_t max_nodes) {
  EnvNode& u = node(id);
  if (u.expanded()) return true;
  if (law_ == nullptr) {
    u.first_child = kNoNode;
    u.n_children = 0;
    return true;
  }
  RngStream rng(u.sig);
  const Branch& b = law_->branches()[law_->draw_branch(rng)];
  if (nodes_.size() + b.weights.size() > max_nodes) return false;
  const auto first = static_cast<std::int32_t>(nodes_.size());
  const double Vu = u.V;
  const auto depth = u.depth + 1;
  const auto sig = u.sig;
  u.first_child = first;
  u.n_children = static_cast<std::int32_t>(b.weights.size());
  u.child_weight_sum = 0.0;
  for (std::size_t j = 0; j < b.weights.size(); ++j) {
    EnvNode c;
    c.parent = id;
    c.depth = depth;
    c.V = Vu + b.displacements[j];
    c.weight = std::exp(-c.V);
    c.sig = mix64(sig, j + 1);
    nodes_.push_back(c);
    nodes_[static_cast<std::size_t>(id)].child_weight_sum += c.weight;
  }
  return true;
}

std::int32_t EnvTree::add_child(std::int32_t parent, double V) {
  auto& p = node(parent);
  if (!p.expanded()) {
    p.first_child = static_cast<std::int32_t>(nodes_.size());
    p.n_children = 0;
    p.child_weight_sum = 0.0;
  }
  EnvNode c;
  c.parent = parent;
  c.depth = p.depth + 1;
  c.V = V;
  c.weight = std::exp(-V);
  c.sig = mix64(p.sig, static_cast<std::uint64_t>(p.n_children) + 1);
  auto id = static_cast<std::int32_t>(nodes_.size());
  ++p.n_children;
  p.child_weight_sum += c.weight;
  nodes_.push_back(c);
  return id;
}

void EnvTree::mark_expanded(std::int32_t id) {
  auto& u = node(id);
  if (!u.expanded()) {
    u.first_child = kNoNode;
    u.n_children = 0;
    u.child_weight_sum = 0.0;
  }
}

std::optional<double> additive_martingale(EnvTree& tree, int depth, std::size_t max_nodes) {
  std::vector<std::int32_t> gen{tree.root()};
  for (int d = 0; d < depth; ++d) {
    std::vector<std::int32_t> next;
    next.reserve(gen.size() * 2);
    for (auto id : gen) {
      if (!tree.try_expand(id, max_nodes)) return std::nullopt;
      auto [first, n] = tree.children(id);
      for (std::int32_t k = 0; k < n; ++k) next.push_back(first + k);
    }
    gen.swap(next);
  }
  double w = 0.0;
  for (auto id : gen) w += tree.node(id).weight;
  return w;
}

MinRecord brw_minimum(EnvTree& tree, double barrier, std::size_t max_nodes,
                      RngStream& tie_rng) {
  MinRecord rec;
  rec.barrier = barrier;
  // best-first by V: lowers current_min as fast as possible, so pruning kicks
  // in early
  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  heap.emplace(0.0, tree.root());
  double best = 0.0;
  std::vector<std::int32_t> minimizers{tree.root()};
  const double tie_eps = 1e-12;
  while (!heap.empty()) {
    auto [V, id] = heap.top();
    heap.pop();
    if (V >= best + barrier) continue;  // prune: subtree cannot move the min
    if (!tree.try_expand(id, max_nodes)) {
      rec.converged = false;
      break;
    }
    auto [first, n] = tree.children(id);
    for (std::int32_t k = 0; k < n; ++k) {
      std::int32_t c = first + k;
      double Vc = tree.node(c).V;
      if (Vc < best - tie_eps) {
        best = Vc;
        minimizers.assign(1, c);
      } else if (std::fabs(Vc - best) <= tie_eps) {
        minimizers.push_back(c);
      }
      if (Vc < best + barrier) heap.emplace(Vc, c);
    }
  }
  std::int32_t max_depth = 0;
  for (auto id : minimizers) max_depth = std::max(max_depth, tree.node(id).depth);
  std::vector<std::int32_t> deepest;
  for (auto id : minimizers)
    if (tree.node(id).depth == max_depth) deepest.push_back(id);
  std::int32_t ustar = deepest[deepest.size() == 1 ? 0 : tie_rng.below(deepest.size())];
  rec.M = best;
  rec.M_e = std::exp(-best);
  rec.ustar = ustar;
  rec.ustar_depth = max_depth;
  return rec;
}

WEstimate w_estimate(EnvTree& tree, std::int32_t root, const EnvCaps& caps) {
  WEstimate out;
  const double V0 = tree.node(root).V;
  double frozen = 0.0;
  std::vector<std::int32_t> active{root};
  std::vector<double> history;
  for (int d = 0;; ++d) {
    double w = frozen;
    double active_mass = 0.0;
    for (auto id : active) active_mass += std::exp(-(tree.node(id).V - V0));
    w += active_mass;
    history.push_back(w);
    out.value = w;
    out.depth_used = d;
    if (d >= caps.depth_stride && active_mass <= caps.mass_frac * std::max(1.0, w)) {
      double prev = history[static_cast<std::size_t>(d - caps.depth_stride)];
      if (std::fabs(w - prev) < caps.depth_eps * std::max(1.0, w)) return out;
    }
    if (active.empty()) return out;
    if (d >= caps.depth_cap) return out;
    std::vector<std::int32_t> next;
    next.reserve(active.size() * 2);
    for (auto id : active) {
      const auto& u = tree.node(id);
      if (u.V - V0 >= caps.w_cut) {
        frozen += std::exp(-(u.V - V0));  // conditional mean of the subtree
        continue;
      }
      if (!tree.try_expand(id, caps.max_nodes)) {
        out.converged = false;
        // keep the unexpanded node's conditional mean so the estimate stays
        // unbiased under the interruption
        frozen += std::exp(-(u.V - V0));
        continue;
      }
      auto [first, n] = tree.children(id);
      for (std::int32_t k = 0; k < n; ++k) next.push_back(first + k);
    }
    active.swap(next);
  }
}

WPair sample_w_pair(EnvTree& tree, const EnvCaps& caps, RngStream& tie_rng) {
  WPair out;
  MinRecord rec = brw_minimum(tree, caps.barrier, caps.max_nodes, tie_rng);
  WEstimate w = w_estimate(tree, tree.root(), caps);
  out.W_inf = w.value;
  out.M_e = rec.M_e;
  out.W_M = w.value * std::exp(rec.M);
  out.depth_used = w.depth_used;
  out.censored = !rec.converged || !w.converged;
  return out;
}

TruncatedWm truncated_wm(EnvTree& tree, const MinRecord& rec, int t, const EnvCaps& caps) {
  TruncatedWm out;
  // ancestral line root = u_0, ..., u_m = ustar
  std::vector<std::int32_t> path;
  for (std::int32_t id = rec.ustar; id != kNoNode; id = tree.node(id).parent)
    path.push_back(id);
  std::reverse(path.begin(), path.end());
  const int m = static_cast<int>(path.size()) - 1;
  out.t_exceeds_depth = t >= m;
  const int k_lo = std::max(1, m - t);
  double sum = w_estimate(tree, rec.ustar, caps).value;  // W^(u*)
  for (int k = k_lo; k <= m; ++k) {
    std::int32_t uk = path[static_cast<std::size_t>(k)];
    std::int32_t parent = path[static_cast<std::size_t>(k - 1)];
    auto [first, n] = tree.children(parent);
    for (std::int32_t j = 0; j < n; ++j) {
      std::int32_t z = first + j;
      if (z == uk) continue;
      double wz = w_estimate(tree, z, caps).value;
      sum += std::exp(rec.M - tree.node(z).V) * wz;
    }
  }
  out.value = sum;
  return out;
}

}  // namespace btw::env
