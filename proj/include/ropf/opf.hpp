#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ropf/grid.hpp"
#include "ropf/lp.hpp"

namespace ropf {

enum class Method { FOPF, ROPFL, ROPFG, ROPFLG };

std::string_view to_string(Method method);
// Accepts "fopf", "ropfl", ... in any case. Throws std::invalid_argument.
Method parse_method(std::string_view text);

// Nodal loads in MW, aligned with Network::buses.
struct LoadVector {
  std::vector<double> mw;

  bool operator==(const LoadVector&) const = default;
};

LoadVector base_loads(const Network& net);

// Loads file: {"loads_mw": {"<bus id>": MW, ...}} covering every bus once.
LoadVector parse_loads(std::string_view text, const Network& net);
std::string serialize_loads(const LoadVector& loads, const Network& net);

// Line ids whose limits are enforced (the monitored set) and generator ids
// pinned at pmax. The full problem monitors everything and fixes nothing.
struct RopfSpec {
  std::set<LineId> monitored_lines;
  std::set<GenId> fixed_max_gens;

  static RopfSpec full(const Network& net);
  bool operator==(const RopfSpec&) const = default;
};

// Assembled LP plus the map from network records to LP columns (-1 = not a
// variable in this formulation).
struct OpfModel {
  LpProblem lp;
  std::vector<int> gen_var;
  std::vector<int> theta_var;
  std::vector<int> flow_var;
  double objective_constant = 0.0;  // $/h from fixed generators
  std::size_t n_flow_rows = 0;      // rows [0, n_flow_rows) are flow definitions
};

OpfModel build_opf(const Network& net, const GridIndex& index, const LoadVector& loads, const RopfSpec& spec);

struct OpfSolution {
  Method method = Method::FOPF;
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> pg_mw;      // per generator position
  std::vector<double> theta_rad;  // per bus position
  std::vector<double> flow_mw;    // per line position, every line
  double objective_cost = 0.0;    // $/h
  double solve_time_s = 0.0;      // LP solve only
  double build_time_s = 0.0;
  double recover_time_s = 0.0;
  std::size_t iterations = 0;
  std::size_t n_vars = 0;
  std::size_t n_rows = 0;
  bool fell_back = false;

  bool optimal() const { return status == LpStatus::Optimal; }
};

OpfSolution solve_opf(const Network& net, const GridIndex& index, const LoadVector& loads, const RopfSpec& spec,
                      Method method = Method::FOPF);

// flow[k] = base_mva * (theta[f(k)] - theta[t(k)]) / x_k
std::vector<double> recover_flows(const Network& net, const GridIndex& index, const std::vector<double>& theta_rad);

struct Excess {
  int id = 0;
  double mw = 0.0;
};

struct VerificationReport {
  bool feasible = true;
  std::vector<Excess> gen_bound_violations;
  std::vector<Excess> line_limit_violations;
  std::vector<Excess> balance_violations;

  std::size_t violation_count() const {
    return gen_bound_violations.size() + line_limit_violations.size() + balance_violations.size();
  }
};

inline constexpr double kBalanceTolMw = 1e-4;
inline constexpr double kLimitSlackMw = 1e-4;

// Checks the full constraint set regardless of which formulation produced sol.
VerificationReport verify_solution(const Network& net, const GridIndex& index, const LoadVector& loads,
                                   const OpfSolution& sol);

struct FallbackOutcome {
  OpfSolution solution;        // the returned solution
  VerificationReport report;   // describes `solution`
  OpfSolution attempt;         // the reduced solve as first tried
  VerificationReport attempt_report;
};

// Solves the reduced problem, verifies it against the full model, and re-solves
// the full problem when the reduced one is not optimal or not feasible.
FallbackOutcome solve_with_fallback(const Network& net, const GridIndex& index, const LoadVector& loads,
                                    const RopfSpec& spec, Method method);

}  // namespace ropf
