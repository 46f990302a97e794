#include "networks.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>

#include "ropf/random.hpp"

#ifndef ROPF_CASE_DIR
#error "ROPF_CASE_DIR must be defined"
#endif

namespace ropf::test {

Network two_bus() {
  Network net;
  net.name = "two_bus";
  net.buses = {{1, 0.0, true}, {2, 50.0, false}};
  net.generators = {{1, 1, 0.0, 100.0, 10.0, 5.0}};
  net.lines = {{1, 1, 2, 0.1, 100.0}};
  return net;
}

Network congested_triangle() {
  Network net;
  net.name = "three_bus_congested";
  net.buses = {{1, 0.0, true}, {2, 0.0, false}, {3, 150.0, false}};
  net.generators = {{1, 1, 0.0, 200.0, 10.0, 4.0}, {2, 2, 0.0, 200.0, 20.0, 4.0}};
  net.lines = {{1, 1, 2, 0.1, 200.0}, {2, 1, 3, 0.1, 90.0}, {3, 2, 3, 0.1, 200.0}};
  return net;
}

Network three_gen_bus() {
  Network net;
  net.name = "three_bus_split";
  net.buses = {{1, 0.0, true}, {2, 40.0, false}, {3, 50.0, false}};
  net.generators = {{1, 1, 0.0, 60.0, 10.0, 2.0}, {2, 1, 0.0, 60.0, 15.0, 3.0}, {3, 1, 0.0, 60.0, 20.0, 4.0}};
  net.lines = {{1, 1, 2, 0.1, 100.0}, {2, 1, 3, 0.1, 100.0}, {3, 2, 3, 0.1, 100.0}};
  return net;
}

Network random_network(std::uint64_t seed, std::size_t n_buses, std::size_t n_gens, std::size_t extra_lines) {
  Rng rng(seed);
  auto index = [&](std::size_t n) { return static_cast<std::size_t>(rng.next() % n); };
  Network net;
  net.name = "random_" + std::to_string(seed);
  // Non-contiguous ids exercise the id/position distinction.
  for (std::size_t b = 0; b < n_buses; ++b)
    net.buses.push_back({static_cast<BusId>(3 * b + 2), rng.uniform(0.0, 60.0), false});
  net.buses[index(n_buses)].is_reference = true;
  double total_load = 0.0;
  for (const auto& b : net.buses) total_load += b.load_mw;
  for (std::size_t g = 0; g < n_gens; ++g) {
    const double pmax = rng.uniform(0.6, 1.4) * 2.0 * total_load / static_cast<double>(std::max<std::size_t>(1, n_gens));
    net.generators.push_back({static_cast<GenId>(5 * g + 1), net.buses[index(n_buses)].id, 0.0, pmax,
                              rng.uniform(5.0, 50.0), rng.uniform(0.0, 10.0)});
  }
  LineId next = 1;
  // Random spanning tree keeps the network connected.
  for (std::size_t b = 1; b < n_buses; ++b)
    net.lines.push_back({next++, net.buses[index(b)].id, net.buses[b].id, rng.uniform(0.02, 0.3),
                         rng.uniform(0.3, 1.2) * total_load});
  for (std::size_t e = 0; e < extra_lines && n_buses > 1; ++e) {
    std::size_t a = index(n_buses), c = index(n_buses);
    if (a == c) c = (a + 1) % n_buses;
    net.lines.push_back({next++, net.buses[a].id, net.buses[c].id, rng.uniform(0.02, 0.3),
                         rng.uniform(0.3, 1.2) * total_load});
  }
  return net;
}

std::vector<std::string> bundled_case_names() {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(ROPF_CASE_DIR))
    if (entry.path().extension() == ".json") names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

Network bundled_case(const std::string& name) {
  return load_case(std::filesystem::path(ROPF_CASE_DIR) / (name + ".json"));
}

Network relabel_buses(const Network& net, const std::vector<std::size_t>& perm) {
  std::vector<BusId> ids;
  for (const auto& b : net.buses) ids.push_back(b.id);
  std::map<BusId, BusId> renamed;
  for (std::size_t i = 0; i < perm.size(); ++i) renamed[ids[i]] = ids[perm[i]];
  Network out = net;
  for (auto& b : out.buses) b.id = renamed.at(b.id);
  std::sort(out.buses.begin(), out.buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
  for (auto& g : out.generators) g.bus = renamed.at(g.bus);
  for (auto& l : out.lines) {
    l.from = renamed.at(l.from);
    l.to = renamed.at(l.to);
  }
  return out;
}

}  // namespace ropf::test
