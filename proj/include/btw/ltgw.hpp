#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "btw/beta_tree.hpp"
#include "btw/law.hpp"
#include "btw/rng.hpp"

namespace btw::ltgw {

struct DrawCapExceeded : std::runtime_error {
  DrawCapExceeded() : std::runtime_error("offspring urn exceeded the draw cap") {}
};

struct TreeCaps {
  std::size_t max_nodes = std::size_t{1} << 21;
  std::uint64_t draw_cap = std::uint64_t{1} << 33;
};

// Offspring of one type-i vertex over a fixed branch: the urn scheme draws
// categorically over {exit (weight 1), child j (weight A_j)} until the i-th
// exit; the child counts are negative multinomial with parameters i and
// (A_j / (1 + sum A)).
std::vector<std::uint32_t> sample_offspring_weights(std::uint32_t i,
                                                    std::span<const double> weights,
                                                    RngStream& rng,
                                                    std::uint64_t draw_cap = std::uint64_t{1}
                                                                             << 33);

struct Offspring {
  std::size_t branch = 0;
  std::vector<std::uint32_t> counts;
};

// Draws an environment branch from the law, then the urn scheme over it.
Offspring sample_offspring(std::uint32_t i, const ReproductionLaw& law, RngStream& rng,
                           std::uint64_t draw_cap = std::uint64_t{1} << 33);

// Breadth-first materialization of the typed tree under P_k. Zero-type
// children appear as leaves; the tree is censored when the node budget stops
// the sweep, and its statistics are then lower bounds.
BetaTree sample_tree(std::uint32_t k, const ReproductionLaw& law, const TreeCaps& caps,
                     RngStream& rng);

struct StoppingLineStats {
  std::uint64_t L1 = 0;      // cardinality of the stopping line
  std::uint32_t M1 = 0;      // max type at or above the line
  std::uint32_t Mstar = 0;   // max type over the whole tree
  std::vector<std::int32_t> line_members;
  bool censored = false;
};

// Single sweep computing the stopping line (first type-1 vertices below the
// root with all intermediate types >= 2), the region above it, and the maxima.
StoppingLineStats stopping_line(const BetaTree& tree);

struct RecursionReport {
  double ks = 0.0;
  double p_value = 0.0;
  std::size_t n_used = 0;
  double censored_fraction = 0.0;
};

// Distributional self-consistency of M*: direct samples against
// max(M1, max of L1 independent draws from the M* pool).
RecursionReport recursion_check(const ReproductionLaw& law, std::size_t num_samples,
                                const TreeCaps& caps, std::uint64_t seed);

struct NbmProbeReport {
  double lhs = 0.0;       // Monte Carlo E|sum z_i zeta_i - n sum A_i z_i|^alpha
  double lhs_se = 0.0;
  double bracket = 0.0;   // bound bracket without the constant
  double ratio = 0.0;     // lhs / bracket
};

// Monte Carlo probe of the centered-moment bound for the negative multinomial
// vector: lhs against n^{alpha/2 v 1} [ sum_{k<=alpha-1} (sum A z)^k (sum A
// z^{alpha-k}) + (sum A z)^alpha ].
NbmProbeReport nbm_moment_probe(std::span<const double> weights, std::span<const double> z,
                                std::uint32_t n, double alpha, std::size_t num_samples,
                                RngStream& rng);

}  // namespace btw::ltgw
