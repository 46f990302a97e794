#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include "ropf/matrix.hpp"

namespace ropf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// minimize cost'x  subject to  a_eq x = b_eq,  lower <= x <= upper.
// Bounds may be infinite.
struct LpProblem {
  LpProblem() = default;
  LpProblem(std::size_t n_vars, std::size_t n_rows)
      : n_vars(n_vars), cost(n_vars, 0.0), a_eq(n_rows, n_vars), b_eq(n_rows, 0.0),
        lower(n_vars, 0.0), upper(n_vars, kInf) {}

  std::size_t n_vars = 0;
  std::vector<double> cost;
  Matrix a_eq;
  std::vector<double> b_eq;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t n_rows() const { return a_eq.rows(); }

  // Throws std::invalid_argument on inconsistent dimensions or crossed bounds.
  void check() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string_view to_string(LpStatus status);

struct LpOutcome {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;  // empty unless Optimal
  double objective = 0.0;
  std::size_t iterations = 0;
};

struct SimplexOptions {
  double feasibility_tol = 1e-7;
  double optimality_tol = 1e-9;  // scaled by (1 + |c_j|)
  double pivot_tol = 1e-10;
  std::size_t max_iterations = 0;  // 0: 200 * (n + m) + 1000
  std::size_t refactor_interval = 50;
};

// Bounded-variable revised simplex with a Phase-1 artificial basis and
// Bland's smallest-index rule for both entering and leaving choices.
// Deterministic: identical problems give bit-identical outcomes.
LpOutcome solve_lp(const LpProblem& problem, const SimplexOptions& options = {});

}  // namespace ropf
