#include "ropf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ropf {

ExpandedGraph expand(const Network& net, const GridIndex& index) {
  ExpandedGraph g;
  g.n_real = net.n_buses();
  g.n_virtual = net.n_generators();
  g.n_nodes = g.n_real + g.n_virtual;

  std::vector<std::size_t> order(g.n_real);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return net.buses[a].id < net.buses[b].id; });
  g.real_node_of_bus.resize(g.n_real);
  for (std::size_t node = 0; node < g.n_real; ++node) g.real_node_of_bus[order[node]] = node;

  order.resize(g.n_virtual);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return net.generators[a].id < net.generators[b].id; });
  g.virtual_node_of_gen.resize(g.n_virtual);
  for (std::size_t k = 0; k < g.n_virtual; ++k) g.virtual_node_of_gen[order[k]] = g.n_real + k;

  for (std::size_t k = 0; k < net.n_lines(); ++k) {
    g.edges.emplace_back(g.real_node_of_bus[index.line_from[k]], g.real_node_of_bus[index.line_to[k]]);
    g.line_of_edge.push_back(static_cast<int>(k));
  }
  for (std::size_t gen = 0; gen < net.n_generators(); ++gen) {
    g.edges.emplace_back(g.virtual_node_of_gen[gen], g.real_node_of_bus[index.gen_bus[gen]]);
    g.line_of_edge.push_back(-1);
  }
  return g;
}

NormalizedAdjacency normalize_adjacency(const ExpandedGraph& graph) {
  const std::size_t n = graph.n_nodes;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
  for (const auto& [u, v] : graph.edges) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += a(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (a(i, j) != 0.0) a(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return {std::move(a)};
}

Matrix build_features(const ExpandedGraph& graph, const LoadVector& loads, const Network& net, const GridIndex& index,
                      const std::optional<std::vector<double>>& line_probs) {
  if (loads.mw.size() != net.n_buses()) throw std::invalid_argument("load vector does not cover every bus");
  if (line_probs) {
    if (line_probs->size() != net.n_lines()) throw std::invalid_argument("line probabilities do not cover every line");
    for (double p : *line_probs)
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("line probability outside [0, 1]");
  }

  const double base = net.base_mva;
  double max_cost = 0.0;
  double max_ramp = 0.0;
  for (const auto& gen : net.generators) {
    max_cost = std::max(max_cost, gen.cost_per_mwh);
    max_ramp = std::max(max_ramp, gen.ramp_mw_per_min);
  }
  if (max_cost == 0.0) max_cost = 1.0;
  if (max_ramp == 0.0) max_ramp = 1.0;

  Matrix x(graph.n_nodes, kFeatureCount);
  std::vector<double> cong_mean(net.n_buses(), 0.0);
  std::vector<double> cong_max(net.n_buses(), 0.0);
  if (line_probs) {
    for (std::size_t b = 0; b < net.n_buses(); ++b) {
      double sum = 0.0;
      double mx = 0.0;
      std::size_t count = 0;
      for (const auto* incident : {&index.lines_out[b], &index.lines_in[b]}) {
        for (std::size_t k : *incident) {
          sum += (*line_probs)[k];
          mx = std::max(mx, (*line_probs)[k]);
          ++count;
        }
      }
      cong_mean[b] = count ? sum / static_cast<double>(count) : 0.0;
      cong_max[b] = mx;
    }
  }

  for (std::size_t b = 0; b < net.n_buses(); ++b) {
    const std::size_t node = graph.real_node_of_bus[b];
    x(node, kLoadPu) = loads.mw[b] / base;
    x(node, kIsReal) = 1.0;
    x(node, kCongMean) = cong_mean[b];
    x(node, kCongMax) = cong_max[b];
  }
  for (std::size_t g = 0; g < net.n_generators(); ++g) {
    const Generator& gen = net.generators[g];
    const std::size_t node = graph.virtual_node_of_gen[g];
    x(node, kPmaxPu) = gen.pmax_mw / base;
    x(node, kPminPu) = gen.pmin_mw / base;
    x(node, kCostNorm) = gen.cost_per_mwh / max_cost;
    x(node, kRampNorm) = gen.ramp_mw_per_min / max_ramp;
    x(node, kCongMean) = cong_mean[index.gen_bus[g]];
    x(node, kCongMax) = cong_max[index.gen_bus[g]];
  }
  return x;
}

}  // namespace ropf
