#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ropf/grid.hpp"
#include "ropf/opf.hpp"

namespace ropf::test {

// Gen (10 $/MWh, 0..100 MW) at bus 1, 50 MW load at bus 2, x = 0.1, RateA 100.
Network two_bus();

// Triangle with the cheap path to the load rated below what the cheap unit
// would like to send. FOPF: A = 120, B = 30, cost 1800, flow(1-3) = 90.
Network congested_triangle();

// Three buses, three generators on bus 1.
Network three_gen_bus();

// Connected random network with loads, generators and positive ratings.
// Ratings vary so some lines bind; FOPF can be infeasible for some seeds.
Network random_network(std::uint64_t seed, std::size_t n_buses, std::size_t n_gens, std::size_t extra_lines);

std::vector<std::string> bundled_case_names();
Network bundled_case(const std::string& name);

// Renumbers bus ids by perm (new id of old position i = ids[perm[i]]) and
// reorders the bus records accordingly.
Network relabel_buses(const Network& net, const std::vector<std::size_t>& perm);

}  // namespace ropf::test
