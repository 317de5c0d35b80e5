#pragma once

#include <cstdint>
#include <vector>

namespace btw {

// Node of the local-time-typed tree. Parents always precede children in the
// arena, so a single forward sweep visits parents first.
struct BetaNode {
  std::int32_t parent = -1;
  std::int32_t first_child = -1;
  std::int32_t n_children = 0;
  std::int32_t depth = 0;
  std::uint32_t beta = 0;
};

struct BetaTree {
  std::vector<BetaNode> nodes;
  std::uint32_t root_type = 0;
  bool censored = false;
  // optional spine marking (node ids along the marked ray, starting at root)
  std::vector<std::int32_t> spine;
  // optional environment annotation: V(u) aligned with nodes
  std::vector<double> V;

  std::uint64_t z_at(std::int32_t depth) const {
    std::uint64_t z = 0;
    for (const auto& n : nodes)
      if (n.depth == depth) z += n.beta;
    return z;
  }
  std::int32_t root_child_count() const { return nodes.empty() ? 0 : nodes[0].n_children; }
};

}  // namespace btw
