#include "ropf/opf.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "json_util.hpp"

namespace ropf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::FOPF: return "FOPF";
    case Method::ROPFL: return "ROPFL";
    case Method::ROPFG: return "ROPFG";
    case Method::ROPFLG: return "ROPFLG";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "fopf") return Method::FOPF;
  if (s == "ropfl") return Method::ROPFL;
  if (s == "ropfg") return Method::ROPFG;
  if (s == "ropflg") return Method::ROPFLG;
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

LoadVector base_loads(const Network& net) {
  LoadVector loads;
  loads.mw.reserve(net.n_buses());
  for (const auto& b : net.buses) loads.mw.push_back(b.load_mw);
  return loads;
}

RopfSpec RopfSpec::full(const Network& net) {
  RopfSpec spec;
  for (const auto& l : net.lines) spec.monitored_lines.insert(l.id);
  return spec;
}

OpfModel build_opf(const Network& net, const GridIndex& index, const LoadVector& loads, const RopfSpec& spec) {
  const std::size_t nb = net.n_buses();
  const std::size_t ng = net.n_generators();
  const std::size_t nl = net.n_lines();
  if (loads.mw.size() != nb) throw std::invalid_argument("load vector does not cover every bus");
  for (LineId id : spec.monitored_lines) (void)index.line_position(id);
  for (GenId id : spec.fixed_max_gens) (void)index.gen_position(id);

  const double base = net.base_mva;
  OpfModel model;
  model.gen_var.assign(ng, -1);
  model.theta_var.assign(nb, -1);
  model.flow_var.assign(nl, -1);

  int n_vars = 0;
  for (std::size_t g = 0; g < ng; ++g)
    if (!spec.fixed_max_gens.contains(net.generators[g].id)) model.gen_var[g] = n_vars++;
  for (std::size_t b = 0; b < nb; ++b)
    if (b != index.reference) model.theta_var[b] = n_vars++;
  for (std::size_t k = 0; k < nl; ++k)
    if (spec.monitored_lines.contains(net.lines[k].id)) model.flow_var[k] = n_vars++;

  const std::size_t n_flow = spec.monitored_lines.size();
  model.n_flow_rows = n_flow;
  LpProblem& lp = model.lp;
  lp = LpProblem(static_cast<std::size_t>(n_vars), n_flow + nb);

  for (std::size_t g = 0; g < ng; ++g) {
    const Generator& gen = net.generators[g];
    const int v = model.gen_var[g];
    if (v < 0) {
      model.objective_constant += gen.cost_per_mwh * gen.pmax_mw;
      continue;
    }
    lp.cost[v] = gen.cost_per_mwh * base;
    lp.lower[v] = gen.pmin_mw / base;
    lp.upper[v] = gen.pmax_mw / base;
  }
  for (std::size_t b = 0; b < nb; ++b) {
    const int v = model.theta_var[b];
    if (v < 0) continue;
    lp.lower[v] = -kInf;
    lp.upper[v] = kInf;
  }

  // Adds coeff * (theta_f - theta_t) / x_k to a row; the reference angle is 0.
  auto add_angle_term = [&](std::size_t row, std::size_t k, double coeff) {
    const double s = coeff / net.lines[k].x_pu;
    if (int vf = model.theta_var[index.line_from[k]]; vf >= 0) lp.a_eq(row, vf) += s;
    if (int vt = model.theta_var[index.line_to[k]]; vt >= 0) lp.a_eq(row, vt) -= s;
  };

  std::size_t row = 0;
  for (std::size_t k = 0; k < nl; ++k) {
    const int v = model.flow_var[k];
    if (v < 0) continue;
    const double rate = net.lines[k].rate_a_mw / base;
    lp.lower[v] = -rate;
    lp.upper[v] = rate;
    lp.a_eq(row, v) = 1.0;
    add_angle_term(row, k, -1.0);
    ++row;
  }

  // Nodal balance: sum P_g + inflow - outflow = d_n.
  for (std::size_t b = 0; b < nb; ++b, ++row) {
    double rhs = loads.mw[b];
    for (std::size_t g : index.gens_at[b]) {
      if (int v = model.gen_var[g]; v >= 0)
        lp.a_eq(row, v) += 1.0;
      else
        rhs -= net.generators[g].pmax_mw;
    }
    for (std::size_t k : index.lines_in[b]) {
      if (int v = model.flow_var[k]; v >= 0)
        lp.a_eq(row, v) += 1.0;
      else
        add_angle_term(row, k, 1.0);
    }
    for (std::size_t k : index.lines_out[b]) {
      if (int v = model.flow_var[k]; v >= 0)
        lp.a_eq(row, v) -= 1.0;
      else
        add_angle_term(row, k, -1.0);
    }
    lp.b_eq[row] = rhs / base;
  }
  return model;
}

std::vector<double> recover_flows(const Network& net, const GridIndex& index, const std::vector<double>& theta_rad) {
  if (theta_rad.size() != net.n_buses()) throw std::invalid_argument("theta does not cover every bus");
  std::vector<double> flow(net.n_lines());
  for (std::size_t k = 0; k < net.n_lines(); ++k)
    flow[k] = net.base_mva * (theta_rad[index.line_from[k]] - theta_rad[index.line_to[k]]) / net.lines[k].x_pu;
  return flow;
}

OpfSolution solve_opf(const Network& net, const GridIndex& index, const LoadVector& loads, const RopfSpec& spec,
                      Method method) {
  OpfSolution sol;
  sol.method = method;

  auto t0 = Clock::now();
  const OpfModel model = build_opf(net, index, loads, spec);
  sol.build_time_s = seconds_since(t0);
  sol.n_vars = model.lp.n_vars;
  sol.n_rows = model.lp.n_rows();

  t0 = Clock::now();
  const LpOutcome out = solve_lp(model.lp);
  sol.solve_time_s = seconds_since(t0);
  sol.status = out.status;
  sol.iterations = out.iterations;
  if (out.status != LpStatus::Optimal) return sol;

  t0 = Clock::now();
  const double base = net.base_mva;
  sol.pg_mw.resize(net.n_generators());
  for (std::size_t g = 0; g < net.n_generators(); ++g) {
    const int v = model.gen_var[g];
    sol.pg_mw[g] = v >= 0 ? out.x[v] * base : net.generators[g].pmax_mw;
  }
  sol.theta_rad.assign(net.n_buses(), 0.0);
  for (std::size_t b = 0; b < net.n_buses(); ++b)
    if (int v = model.theta_var[b]; v >= 0) sol.theta_rad[b] = out.x[v];
  sol.flow_mw = recover_flows(net, index, sol.theta_rad);
  for (std::size_t k = 0; k < net.n_lines(); ++k)
    if (int v = model.flow_var[k]; v >= 0) sol.flow_mw[k] = out.x[v] * base;
  sol.objective_cost = out.objective + model.objective_constant;
  sol.recover_time_s = seconds_since(t0);
  return sol;
}

VerificationReport verify_solution(const Network& net, const GridIndex& index, const LoadVector& loads,
                                   const OpfSolution& sol) {
  if (!sol.optimal()) throw std::invalid_argument("verify_solution needs an optimal solution");
  VerificationReport report;
  for (std::size_t g = 0; g < net.n_generators(); ++g) {
    const Generator& gen = net.generators[g];
    const double over = std::max(gen.pmin_mw - sol.pg_mw[g], sol.pg_mw[g] - gen.pmax_mw);
    if (over > kLimitSlackMw) report.gen_bound_violations.push_back({gen.id, over});
  }
  const std::vector<double> flow = recover_flows(net, index, sol.theta_rad);
  for (std::size_t k = 0; k < net.n_lines(); ++k) {
    const double over = std::abs(flow[k]) - net.lines[k].rate_a_mw;
    if (over > kLimitSlackMw) report.line_limit_violations.push_back({net.lines[k].id, over});
  }
  for (std::size_t b = 0; b < net.n_buses(); ++b) {
    double net_injection = -loads.mw[b];
    for (std::size_t g : index.gens_at[b]) net_injection += sol.pg_mw[g];
    for (std::size_t k : index.lines_in[b]) net_injection += flow[k];
    for (std::size_t k : index.lines_out[b]) net_injection -= flow[k];
    if (std::abs(net_injection) > kBalanceTolMw)
      report.balance_violations.push_back({net.buses[b].id, std::abs(net_injection)});
  }
  report.feasible = report.violation_count() == 0;
  return report;
}

FallbackOutcome solve_with_fallback(const Network& net, const GridIndex& index, const LoadVector& loads,
                                    const RopfSpec& spec, Method method) {
  FallbackOutcome result;
  result.attempt = solve_opf(net, index, loads, spec, method);
  if (result.attempt.optimal()) {
    result.attempt_report = verify_solution(net, index, loads, result.attempt);
  } else {
    result.attempt_report.feasible = false;
  }

  const RopfSpec full = RopfSpec::full(net);
  if (result.attempt_report.feasible || spec == full) {
    result.solution = result.attempt;
    result.report = result.attempt_report;
    return result;
  }

  result.solution = solve_opf(net, index, loads, full, method);
  result.solution.fell_back = true;
  if (result.solution.optimal()) {
    result.report = verify_solution(net, index, loads, result.solution);
  } else {
    result.report.feasible = false;
  }
  return result;
}

LoadVector parse_loads(std::string_view text, const Network& net) {
  detail::Json doc;
  try {
    doc = detail::Json::parse(text);
  } catch (const detail::Json::parse_error& e) {
    throw ParseError(std::string("loads syntax error at byte ") + std::to_string(e.byte), e.byte);
  }
  const GridIndex index = build_index(net);
  LoadVector loads;
  loads.mw.assign(net.n_buses(), 0.0);
  std::vector<int> seen(net.n_buses(), 0);
  try {
    detail::require_object(doc, "loads");
    detail::reject_unknown(doc, {"loads_mw"}, "loads");
    const auto& map = detail::field(doc, "loads_mw", "loads");
    detail::require_object(map, "loads_mw");
    for (const auto& [key, value] : map.items()) {
      std::size_t used = 0;
      const int id = std::stoi(key, &used);
      if (used != key.size()) throw detail::FormatError("loads_mw: bad bus id '" + key + "'");
      if (!value.is_number()) throw detail::FormatError("loads_mw: value for bus " + key + " is not a number");
      const std::size_t b = index.bus_position(id);
      loads.mw[b] = value.get<double>();
      seen[b] = 1;
    }
  } catch (const detail::FormatError& e) {
    throw ParseError(e.what(), 0);
  } catch (const std::out_of_range& e) {
    throw ParseError(std::string("loads_mw: ") + e.what(), 0);
  } catch (const std::invalid_argument&) {
    throw ParseError("loads_mw: keys must be bus ids", 0);
  }
  ValidationReport report;
  for (std::size_t b = 0; b < net.n_buses(); ++b) {
    if (!seen[b]) report.push_back({"bus " + std::to_string(net.buses[b].id), "missing from loads file"});
    else if (loads.mw[b] < 0.0) report.push_back({"bus " + std::to_string(net.buses[b].id), "negative load"});
  }
  if (!report.empty()) throw ValidationError(std::move(report));
  return loads;
}

std::string serialize_loads(const LoadVector& loads, const Network& net) {
  detail::OrderedJson map = detail::OrderedJson::object();
  for (std::size_t b = 0; b < net.n_buses(); ++b) map[std::to_string(net.buses[b].id)] = loads.mw.at(b);
  detail::OrderedJson doc;
  doc["loads_mw"] = map;
  return doc.dump(2) + "\n";
}

}  // namespace ropf
