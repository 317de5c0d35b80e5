#include "btw/ltgw.hpp"

#include <algorithm>
#include <cmath>

#include "btw/stats.hpp"

namespace btw::ltgw {

std::vector<std::uint32_t> sample_offspring_weights(std::uint32_t i,
                                                    std::span<const double> weights,
                                                    RngStream& rng,
                                                    std::uint64_t draw_cap) {
  std::vector<std::uint32_t> counts(weights.size(), 0);
  if (i == 0) return counts;
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  const double total = 1.0 + wsum;
  std::uint32_t exits = 0;
  std::uint64_t draws = 0;
  while (exits < i) {
    if (++draws > draw_cap) throw DrawCapExceeded();
    double r = rng.u01() * total;
    if (r < 1.0) {
      ++exits;
      continue;
    }
    r -= 1.0;
    std::size_t j = 0;
    const std::size_t last = weights.size() - 1;
    while (j < last) {
      r -= weights[j];
      if (r < 0.0) break;
      ++j;
    }
    ++counts[j];
  }
  return counts;
}

Offspring sample_offspring(std::uint32_t i, const ReproductionLaw& law, RngStream& rng,
                           std::uint64_t draw_cap) {
  Offspring out;
  out.branch = law.draw_branch(rng);
  const auto& b = law.branches()[out.branch];
  if (i == 0) {
    out.counts.assign(b.weights.size(), 0);
    return out;
  }
  out.counts = sample_offspring_weights(i, b.weights, rng, draw_cap);
  return out;
}

BetaTree sample_tree(std::uint32_t k, const ReproductionLaw& law, const TreeCaps& caps,
                     RngStream& rng) {
  BetaTree bt;
  bt.root_type = k;
  bt.nodes.push_back(BetaNode{-1, -1, 0, 0, k});
  std::vector<std::int32_t> frontier{0};
  std::vector<std::int32_t> next;
  while (!frontier.empty()) {
    next.clear();
    for (auto id : frontier) {
      const std::uint32_t type = bt.nodes[static_cast<std::size_t>(id)].beta;
      Offspring off = sample_offspring(type, law, rng, caps.draw_cap);
      if (bt.nodes.size() + off.counts.size() > caps.max_nodes) {
        bt.censored = true;
        return bt;
      }
      bt.nodes[static_cast<std::size_t>(id)].first_child =
          static_cast<std::int32_t>(bt.nodes.size());
      bt.nodes[static_cast<std::size_t>(id)].n_children =
          static_cast<std::int32_t>(off.counts.size());
      const auto depth = bt.nodes[static_cast<std::size_t>(id)].depth + 1;
      for (std::size_t j = 0; j < off.counts.size(); ++j) {
        auto child = static_cast<std::int32_t>(bt.nodes.size());
        bt.nodes.push_back(BetaNode{id, -1, 0, depth, off.counts[j]});
        if (off.counts[j] > 0) next.push_back(child);
      }
    }
    frontier.swap(next);
  }
  return bt;
}

StoppingLineStats stopping_line(const BetaTree& tree) {
  StoppingLineStats out;
  out.censored = tree.censored;
  if (tree.nodes.empty()) return out;
  out.M1 = tree.nodes[0].beta;
  out.Mstar = tree.nodes[0].beta;
  // in_b1[u]: every strict ancestor below the root has type >= 2
  std::vector<std::uint8_t> in_b1(tree.nodes.size(), 0);
  in_b1[0] = 1;
  for (std::size_t u = 1; u < tree.nodes.size(); ++u) {
    const auto& n = tree.nodes[u];
    out.Mstar = std::max(out.Mstar, n.beta);
    const auto p = static_cast<std::size_t>(n.parent);
    bool b1 = in_b1[p] && (n.parent == 0 || tree.nodes[p].beta >= 2);
    if (!b1) continue;
    in_b1[u] = 1;
    out.M1 = std::max(out.M1, n.beta);
    if (n.beta == 1) {
      ++out.L1;
      out.line_members.push_back(static_cast<std::int32_t>(u));
    }
  }
  return out;
}

RecursionReport recursion_check(const ReproductionLaw& law, std::size_t num_samples,
                                const TreeCaps& caps, std::uint64_t seed) {
  std::vector<double> mstar;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> lm;  // (L1, M1)
  std::size_t censored = 0;
  RngStream rng(seed, 0x726563);
  for (std::size_t s = 0; s < num_samples; ++s) {
    BetaTree t = sample_tree(1, law, caps, rng);
    if (t.censored) {
      ++censored;
      continue;
    }
    StoppingLineStats st = stopping_line(t);
    mstar.push_back(static_cast<double>(st.Mstar));
    lm.emplace_back(st.L1, st.M1);
  }
  RecursionReport rep;
  rep.censored_fraction =
      num_samples ? static_cast<double>(censored) / static_cast<double>(num_samples) : 0.0;
  if (mstar.size() < 10) return rep;
  // composed side of the distributional identity, resampling the M* pool
  RngStream boot(seed, 0x626f6f74);
  std::vector<double> composed;
  composed.reserve(lm.size());
  for (const auto& [l1, m1] : lm) {
    double m = m1;
    for (std::uint64_t i = 0; i < l1; ++i)
      m = std::max(m, mstar[boot.below(mstar.size())]);
    composed.push_back(m);
  }
  auto ks = stats::ks_two_sample(mstar, composed);
  rep.ks = ks.value;
  rep.p_value = ks.p_value;
  rep.n_used = mstar.size();
  return rep;
}

NbmProbeReport nbm_moment_probe(std::span<const double> weights, std::span<const double> z,
                                std::uint32_t n, double alpha, std::size_t num_samples,
                                RngStream& rng) {
  if (weights.size() != z.size() || weights.empty())
    throw std::invalid_argument("nbm_moment_probe: weight/z size mismatch");
  double az = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) az += weights[i] * z[i];
  std::vector<double> samples;
  samples.reserve(num_samples);
  for (std::size_t s = 0; s < num_samples; ++s) {
    auto counts = sample_offspring_weights(n, weights, rng);
    double v = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) v += z[i] * counts[i];
    samples.push_back(std::pow(std::fabs(v - static_cast<double>(n) * az), alpha));
  }
  auto ms = stats::mean_se(samples);
  NbmProbeReport rep;
  rep.lhs = ms.mean;
  rep.lhs_se = ms.se;
  double bracket = std::pow(az, alpha);
  for (int k = 0; k <= static_cast<int>(std::floor(alpha - 1.0)); ++k) {
    double azk = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
      azk += weights[i] * std::pow(z[i], alpha - k);
    bracket += std::pow(az, k) * azk;
  }
  bracket *= std::pow(static_cast<double>(n), std::max(alpha / 2.0, 1.0));
  rep.bracket = bracket;
  rep.ratio = bracket > 0.0 ? rep.lhs / bracket : 0.0;
  return rep;
}

}  // namespace btw::ltgw
