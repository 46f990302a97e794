#include "ropf/bench.hpp"

#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "json_util.hpp"
#include "ropf/kernels.hpp"
#include "version.hpp"

namespace ropf {

using detail::Json;
using detail::OrderedJson;

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) { return OrderedJson(v).dump(); }

}  // namespace

FamilyErrors compute_error_metrics(const std::string& family, const std::vector<std::vector<int>>& predicted,
                                   const std::vector<std::vector<int>>& truth) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction and label sample counts differ");
  FamilyErrors out;
  out.family = family;
  std::size_t fp = 0;
  std::size_t fn = 0;
  for (std::size_t s = 0; s < truth.size(); ++s) {
    if (predicted[s].size() != truth[s].size())
      throw std::invalid_argument("prediction and label target counts differ in sample " + std::to_string(s));
    for (std::size_t k = 0; k < truth[s].size(); ++k) {
      if (predicted[s][k] && !truth[s][k]) ++fp;
      if (!predicted[s][k] && truth[s][k]) ++fn;
    }
    out.pairs += truth[s].size();
  }
  if (out.pairs > 0) {
    const double denom = static_cast<double>(out.pairs);
    out.false_positive_pct = 100.0 * static_cast<double>(fp) / denom;
    out.false_negative_pct = 100.0 * static_cast<double>(fn) / denom;
    out.total_error_pct = 100.0 * static_cast<double>(fp + fn) / denom;
  }
  return out;
}

RopfSpec build_spec_from_predictions(const Network& net, Method method, const std::vector<int>& line_labels,
                                     const std::vector<int>& gen_labels) {
  const bool reduce_lines = method == Method::ROPFL || method == Method::ROPFLG;
  const bool fix_gens = method == Method::ROPFG || method == Method::ROPFLG;
  if (reduce_lines && line_labels.size() != net.n_lines())
    throw std::invalid_argument("line predictions do not cover every line");
  if (fix_gens && gen_labels.size() != net.n_generators())
    throw std::invalid_argument("generator predictions do not cover every generator");
  RopfSpec spec;
  for (std::size_t k = 0; k < net.n_lines(); ++k)
    if (!reduce_lines || line_labels[k]) spec.monitored_lines.insert(net.lines[k].id);
  if (fix_gens)
    for (std::size_t g = 0; g < net.n_generators(); ++g)
      if (gen_labels[g]) spec.fixed_max_gens.insert(net.generators[g].id);
  return spec;
}

std::vector<MethodRow> aggregate(const std::vector<LogRecord>& log, const std::vector<Method>& methods) {
  std::map<Method, MethodRow> by_method;
  for (const LogRecord& r : log) {
    MethodRow& row = by_method[r.method];
    row.method = r.method;
    ++row.n_samples;
    row.mean_cost += r.cost;
    row.total_solve_time_s += r.solve_time_s;
    row.mean_inference_time_s += r.inference_time_s;
    row.fallback_count += r.fell_back ? 1 : 0;
    row.violation_count += r.violations;
  }
  for (auto& [m, row] : by_method) {
    const double n = static_cast<double>(std::max<std::size_t>(1, row.n_samples));
    row.mean_cost /= n;
    row.mean_inference_time_s /= n;
  }
  const auto base_it = by_method.find(Method::FOPF);
  if (base_it == by_method.end()) throw std::invalid_argument("log has no FOPF baseline records");
  const MethodRow base = base_it->second;

  std::vector<MethodRow> rows;
  for (Method m : methods) {
    MethodRow row = by_method.contains(m) ? by_method.at(m) : MethodRow{.method = m};
    row.mean_cost_pct = base.mean_cost != 0.0 ? 100.0 * row.mean_cost / base.mean_cost : 100.0;
    if (m == Method::FOPF) row.mean_cost_pct = 100.0;
    if (base.total_solve_time_s > 0.0 && m != Method::FOPF) {
      const double inference = row.mean_inference_time_s * static_cast<double>(row.n_samples);
      row.time_saving_pct = 100.0 * (base.total_solve_time_s - row.total_solve_time_s) / base.total_solve_time_s;
      row.time_saving_with_inference_pct =
          100.0 * (base.total_solve_time_s - row.total_solve_time_s - inference) / base.total_solve_time_s;
    }
    rows.push_back(row);
  }
  return rows;
}

BenchReport run_benchmark(const Network& net, const Dataset& test, const GnnModel* line_model,
                          const GnnModel* gen_model, const BenchConfig& config) {
  const GridIndex index = build_index(net);
  if (!(signature_of(test.network) == signature_of(net)) || !(test.network == net))
    throw std::invalid_argument("test dataset was generated for case '" + test.network.name + "', not '" + net.name +
                                "'");
  bool needs_lines = false;
  bool needs_gens = false;
  for (Method m : config.methods) {
    needs_lines = needs_lines || m == Method::ROPFL || m == Method::ROPFLG;
    needs_gens = needs_gens || m == Method::ROPFG || m == Method::ROPFLG;
  }
  const bool needs_models = (needs_lines || needs_gens) && !config.oracle_labels;
  if (needs_models && !line_model) throw std::invalid_argument("reduced methods need a line model");
  if (needs_models && needs_gens && !gen_model) throw std::invalid_argument("generator-fixing methods need a generator model");

  std::optional<HierarchicalPredictor> predictor;
  if (needs_models) predictor.emplace(net, *line_model, needs_gens ? gen_model : nullptr);

  BenchReport report;
  report.timing = config.timing;
  const RopfSpec full = RopfSpec::full(net);
  std::vector<std::vector<int>> pred_lines, pred_gens, true_lines, true_gens;

  for (const Sample& sample : test.samples) {
    const LoadVector& loads = sample.loads;
    const FallbackOutcome base = solve_with_fallback(net, index, loads, full, Method::FOPF);
    if (!base.solution.optimal())
      throw std::runtime_error("full OPF is infeasible for test sample " + std::to_string(sample.sample_id));

    LogRecord fopf_rec;
    fopf_rec.sample_id = sample.sample_id;
    fopf_rec.method = Method::FOPF;
    fopf_rec.cost = base.solution.objective_cost;
    fopf_rec.solve_time_s = config.timing ? base.solution.solve_time_s : 0.0;
    fopf_rec.n_monitored = net.n_lines();
    fopf_rec.violations = base.report.violation_count();
    fopf_rec.attempt_status = std::string(to_string(base.attempt.status));
    fopf_rec.attempt_cost = base.attempt.objective_cost;
    fopf_rec.attempt_feasible = base.attempt_report.feasible;
    fopf_rec.fopf_cost = base.solution.objective_cost;
    report.log.push_back(fopf_rec);

    if (!needs_lines && !needs_gens) continue;

    Prediction pred;
    if (config.oracle_labels) {
      pred.line_labels = sample.line_labels;
      pred.gen_labels = sample.gen_labels;
    } else {
      pred = predictor->predict(loads);
    }
    true_lines.push_back(sample.line_labels);
    pred_lines.push_back(pred.line_labels);
    if (needs_gens) {
      true_gens.push_back(sample.gen_labels);
      pred_gens.push_back(pred.gen_labels);
    }

    for (Method m : config.methods) {
      if (m == Method::FOPF) continue;
      const RopfSpec spec = build_spec_from_predictions(net, m, pred.line_labels, pred.gen_labels);
      const FallbackOutcome out = solve_with_fallback(net, index, loads, spec, m);
      LogRecord rec;
      rec.sample_id = sample.sample_id;
      rec.method = m;
      rec.cost = out.solution.objective_cost;
      double t = out.attempt.solve_time_s + (out.solution.fell_back ? out.solution.solve_time_s : 0.0);
      rec.solve_time_s = config.timing ? t : 0.0;
      rec.inference_time_s = config.timing ? pred.inference_time_s : 0.0;
      rec.fell_back = out.solution.fell_back;
      rec.n_monitored = spec.monitored_lines.size();
      rec.n_fixed = spec.fixed_max_gens.size();
      rec.violations = out.solution.optimal() ? out.report.violation_count() : 1;
      rec.attempt_status = std::string(to_string(out.attempt.status));
      rec.attempt_cost = out.attempt.objective_cost;
      rec.attempt_feasible = out.attempt_report.feasible;
      rec.fopf_cost = base.solution.objective_cost;
      report.log.push_back(rec);
    }
  }

  report.rows = aggregate(report.log, config.methods);
  for (const auto& r : aggregate(report.log, {Method::FOPF})) report.fopf_total_solve_time_s = r.total_solve_time_s;
  if (needs_lines || needs_gens) report.errors.lines = compute_error_metrics("lines", pred_lines, true_lines);
  else report.errors.lines.family = "lines";
  if (needs_gens) report.errors.generators = compute_error_metrics("generators", pred_gens, true_gens);
  else report.errors.generators.family = "generators";
  return report;
}

std::string report_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,n_samples,mean_cost,mean_cost_pct,total_solve_time_s,time_saving_pct,mean_inference_time_s,"
         "fallback_count,violation_count\n";
  for (const auto& r : report.rows) {
    out << to_string(r.method) << ',' << r.n_samples << ',' << num(r.mean_cost) << ',' << num(r.mean_cost_pct) << ','
        << num(r.total_solve_time_s) << ',' << num(r.time_saving_pct) << ',' << num(r.mean_inference_time_s) << ','
        << r.fallback_count << ',' << r.violation_count << '\n';
  }
  return out.str();
}

std::string errors_csv(const ErrorReport& errors) {
  std::ostringstream out;
  out << "family,false_positive_pct,false_negative_pct,total_error_pct\n";
  for (const auto* f : {&errors.lines, &errors.generators})
    out << f->family << ',' << num(f->false_positive_pct) << ',' << num(f->false_negative_pct) << ','
        << num(f->total_error_pct) << '\n';
  return out.str();
}

std::string log_jsonl(const std::vector<LogRecord>& log) {
  std::ostringstream out;
  for (const auto& r : log) {
    OrderedJson j;
    j["sample_id"] = r.sample_id;
    j["method"] = to_string(r.method);
    j["cost"] = r.cost;
    j["solve_time_s"] = r.solve_time_s;
    j["fell_back"] = r.fell_back;
    j["n_monitored"] = r.n_monitored;
    j["n_fixed"] = r.n_fixed;
    j["inference_time_s"] = r.inference_time_s;
    j["violations"] = r.violations;
    j["attempt_status"] = r.attempt_status;
    j["attempt_cost"] = r.attempt_cost;
    j["attempt_feasible"] = r.attempt_feasible;
    j["fopf_cost"] = r.fopf_cost;
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<LogRecord> parse_log_jsonl(std::string_view text) {
  std::vector<LogRecord> log;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const Json j = Json::parse(line);
    LogRecord r;
    r.sample_id = j.at("sample_id").get<int>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.cost = j.at("cost").get<double>();
    r.solve_time_s = j.at("solve_time_s").get<double>();
    r.fell_back = j.at("fell_back").get<bool>();
    r.n_monitored = j.at("n_monitored").get<std::size_t>();
    r.n_fixed = j.at("n_fixed").get<std::size_t>();
    r.inference_time_s = j.at("inference_time_s").get<double>();
    r.violations = j.at("violations").get<std::size_t>();
    r.attempt_status = j.at("attempt_status").get<std::string>();
    r.attempt_cost = j.at("attempt_cost").get<double>();
    r.attempt_feasible = j.at("attempt_feasible").get<bool>();
    r.fopf_cost = j.at("fopf_cost").get<double>();
    log.push_back(r);
  }
  return log;
}

std::string report_sidecar(const BenchReport& report, const BenchConfig& config, const std::string& case_name) {
  OrderedJson j;
  j["tool_version"] = kToolVersion;
  j["case_name"] = case_name;
  j["seed"] = config.seed;
  j["timing"] = config.timing;
  j["oracle_labels"] = config.oracle_labels;
  OrderedJson methods = OrderedJson::array();
  for (Method m : config.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["timing_scope"] = "total_solve_time_s counts LP solve time only; fallback samples add the full re-solve";
  OrderedJson with_inference = OrderedJson::object();
  for (const auto& r : report.rows) with_inference[std::string(to_string(r.method))] = r.time_saving_with_inference_pct;
  j["time_saving_with_inference_pct"] = with_inference;
  j["environment"] = {{"backend", kernels::to_string(kernels::default_backend())},
                      {"threads", config.timing ? kernels::max_threads() : 0}};
  // Reference magnitudes on a 73-bus system, for side-by-side reading.
  j["reference"] = {
      {"time_saving_pct", {{"ROPFL", 21.67}, {"ROPFG", 22.16}, {"ROPFLG", 31.92}}},
      {"mean_cost_pct", {{"FOPF", 100.0}, {"ROPFL", 100.061}, {"ROPFG", 100.064}, {"ROPFLG", 100.0}}},
      {"error_pct",
       {{"lines", {{"false_positive", 1.07}, {"false_negative", 0.12}, {"total", 1.19}}},
        {"generators", {{"false_positive", 5.35}, {"false_negative", 0.92}, {"total", 6.27}}}}}};
  return j.dump(2) + "\n";
}

}  // namespace ropf
