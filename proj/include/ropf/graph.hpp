#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ropf/grid.hpp"
#include "ropf/matrix.hpp"
#include "ropf/opf.hpp"

namespace ropf {

// Node-split graph: one real node per bus followed by one virtual node per
// generator. Real nodes are ordered by bus id, virtual nodes by generator id.
struct ExpandedGraph {
  std::size_t n_real = 0;
  std::size_t n_virtual = 0;
  std::size_t n_nodes = 0;
  std::vector<std::size_t> real_node_of_bus;     // indexed by bus position
  std::vector<std::size_t> virtual_node_of_gen;  // indexed by generator position
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<int> line_of_edge;  // line position, or -1 for generator edges

  std::size_t real_node(const GridIndex& index, BusId id) const { return real_node_of_bus[index.bus_position(id)]; }
  std::size_t virtual_node(const GridIndex& index, GenId id) const {
    return virtual_node_of_gen[index.gen_position(id)];
  }
};

ExpandedGraph expand(const Network& net, const GridIndex& index);

// D^-1/2 (A + I) D^-1/2 over the 0/1 adjacency of the expanded graph.
// Parallel lines collapse to a single 0/1 entry.
struct NormalizedAdjacency {
  Matrix dense;
};

NormalizedAdjacency normalize_adjacency(const ExpandedGraph& graph);

// Raw node features, fixed column order.
enum FeatureColumn : std::size_t {
  kLoadPu = 0,
  kIsReal,
  kPmaxPu,
  kPminPu,
  kCostNorm,
  kRampNorm,
  kCongMean,
  kCongMax,
  kFeatureCount
};

// line_probs, when given, is indexed by line position and must hold values in
// [0, 1]; without it the congestion columns are zero.
Matrix build_features(const ExpandedGraph& graph, const LoadVector& loads, const Network& net, const GridIndex& index,
                      const std::optional<std::vector<double>>& line_probs = std::nullopt);

}  // namespace ropf
