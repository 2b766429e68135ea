#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace pbshm {

/// Vertex-labelled simple graph; the combinatorial core of an attributed graph.
struct LabelledGraph {
  std::vector<int> labels;
  std::vector<unsigned char> adjacency;  // row-major n*n

  std::size_t size() const { return labels.size(); }
  bool adjacent(std::size_t a, std::size_t b) const { return adjacency[a * size() + b] != 0; }
};

struct McsSearchResult {
  std::vector<std::pair<std::size_t, std::size_t>> mapping;
  double cost = 0.0;
};

/// Maximum common induced subgraph by branch-and-bound maximum-clique search
/// over the association graph (label-compatible vertex pairs, adjacent when
/// they preserve both adjacency and non-adjacency). Among maximum cliques the
/// one with smallest summed `pair_cost` wins. `greedy` replaces the exact
/// search by a single greedy clique construction.
McsSearchResult max_common_induced_subgraph(const LabelledGraph& a, const LabelledGraph& b,
                                            const std::function<double(std::size_t, std::size_t)>& pair_cost,
                                            bool greedy = false);

}  // namespace pbshm
