#pragma once

// Brute-force reference for small LPs: enumerate every basic point (columns
// outside a linearly independent basis sit at a bound), keep the feasible
// ones, return the cheapest. Infinite bounds are replaced by +-big boxes; an
// optimum that moves when the box grows means the LP is unbounded.

#include "ropf/lp.hpp"

namespace ropf::test {

struct OracleResult {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
};

OracleResult enumerate_vertices(const LpProblem& problem);

// Random instance with n <= max_n variables and m <= max_m rows. Small integer
// data makes degenerate vertices common. About a third of the instances have a
// random right-hand side (often infeasible) and some have infinite bounds.
LpProblem random_lp(std::uint64_t seed, std::size_t max_n = 6, std::size_t max_m = 4);

// Max violation of the returned point against rows and bounds.
double residual(const LpProblem& problem, const std::vector<double>& x);

}  // namespace ropf::test
