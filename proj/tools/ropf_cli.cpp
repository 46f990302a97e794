// Command-line front end: generate, train, predict, solve, bench.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ropf/bench.hpp"
#include "ropf/datagen.hpp"
#include "ropf/gnn.hpp"
#include "ropf/grid.hpp"
#include "ropf/opf.hpp"

#ifndef ROPF_CASE_DIR
#define ROPF_CASE_DIR "data/cases"
#endif

namespace fs = std::filesystem;
using ropf::Method;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kFailure = 1, kUsage = 2, kInput = 3, kInfeasible = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// error=<kind> exit=<code> message=<json string>, one line on stderr.
int report_error(const char* kind, int code, const std::string& message) {
  std::cerr << "ropf: error=" << kind << " exit=" << code << " message=" << Json(message).dump() << '\n';
  return code;
}

std::string num(double v) { return Json(v).dump(); }

fs::path resolve_case(const std::string& name) {
  if (fs::exists(name)) return name;
  for (fs::path p : {fs::path(ROPF_CASE_DIR) / name, fs::path(ROPF_CASE_DIR) / (name + ".json")})
    if (fs::exists(p)) return p;
  throw InputError("case '" + name + "' not found (looked in " + std::string(ROPF_CASE_DIR) + ")");
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw InputError(std::string(what) + " '" + path + "' does not exist");
}

std::vector<double> parse_fractions(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--split: '" + item + "' is not a number");
    }
  }
  if (out.empty() || out.size() > 3) throw UsageError("--split takes 1 to 3 comma-separated fractions");
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(ropf::parse_method(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--methods: ") + e.what());
    }
  }
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

bool fixes_generators(Method m) { return m == Method::ROPFG || m == Method::ROPFLG; }

template <typename T>
Json by_id(const std::vector<T>& values, const std::vector<int>& ids) {
  Json j = Json::object();
  for (std::size_t i = 0; i < values.size(); ++i) j[std::to_string(ids[i])] = values[i];
  return j;
}

Json excess_list(const std::vector<ropf::Excess>& list) {
  Json j = Json::array();
  for (const auto& e : list) j.push_back({{"id", e.id}, {"mw", e.mw}});
  return j;
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string case_name, out, split = "0.9,0.1";
  ropf::GenerateConfig config;
  bool no_timing = false;
};

int run_generate(const GenerateArgs& a) {
  ropf::GenerateConfig cfg = a.config;
  cfg.split_fractions = parse_fractions(a.split);
  cfg.record_timing = !a.no_timing;
  if (cfg.perturb < 0.0 || cfg.perturb >= 1.0) throw UsageError("--perturb must be in [0, 1)");
  if (cfg.tau <= 0.0) throw UsageError("--tau must be positive");
  const ropf::Network net = ropf::load_case(resolve_case(a.case_name));
  const ropf::Dataset ds = ropf::generate(net, cfg);
  ropf::save_dataset(ds, a.out);

  std::size_t n_train = 0, n_val = 0, n_test = 0, pos_lines = 0, pos_gens = 0;
  for (const auto& s : ds.samples) {
    n_train += s.split == ropf::Split::Train;
    n_val += s.split == ropf::Split::Val;
    n_test += s.split == ropf::Split::Test;
    for (int v : s.line_labels) pos_lines += v;
    for (int v : s.gen_labels) pos_gens += v;
  }
  const double n = static_cast<double>(std::max<std::size_t>(1, ds.samples.size()));
  std::cout << "samples=" << ds.samples.size() << " train=" << n_train << " val=" << n_val << " test=" << n_test
            << " redraws=" << ds.redraws << " congested_per_sample=" << num(pos_lines / n)
            << " max_gens_per_sample=" << num(pos_gens / n) << '\n';
  if (!ds.warning.empty()) std::cerr << "ropf: warning=" << Json(ds.warning).dump() << '\n';
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data, stage = "line", line_model, out, history, loss = "bce";
  ropf::TrainConfig config;
};

int run_train(const TrainArgs& a) {
  ropf::TrainConfig cfg = a.config;
  try {
    cfg.stage = ropf::parse_head_kind(a.stage);
    cfg.loss = ropf::parse_loss_kind(a.loss);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.stage == ropf::HeadKind::Gen && a.line_model.empty())
    throw UsageError("--stage gen requires --line-model");
  if (cfg.decision_threshold <= 0.0 || cfg.decision_threshold >= 1.0)
    throw UsageError("--threshold must be in (0, 1)");
  require_file(a.data, "dataset");
  const ropf::Dataset ds = ropf::load_dataset(a.data);
  std::optional<ropf::GnnModel> line_model;
  if (cfg.stage == ropf::HeadKind::Gen) {
    require_file(a.line_model, "line model");
    line_model = ropf::load_model(a.line_model);
  }
  const ropf::TrainResult result = ropf::train(cfg, ds, line_model ? &*line_model : nullptr);
  ropf::save_model(result.model, a.out);
  if (!a.history.empty()) ropf::write_text_file(a.history, ropf::serialize_history(result.history));

  const auto& h = result.history.epochs;
  if (!h.empty()) {
    std::cout << "stage=" << a.stage << " epochs=" << h.size() << " train_loss=" << num(h.back().train_loss)
              << " val_loss=" << num(h.back().val_loss) << " train_accuracy=" << num(h.back().train_accuracy)
              << " val_accuracy=" << num(h.back().val_accuracy) << " pos_weight=" << num(result.model.pos_weight)
              << '\n';
  }
  return kOk;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  std::string case_name, model, gen_model, loads, out;
};

int run_predict(const PredictArgs& a) {
  const ropf::Network net = ropf::load_case(resolve_case(a.case_name));
  const ropf::GridIndex index = ropf::build_index(net);
  require_file(a.model, "model");
  const ropf::GnnModel line_model = ropf::load_model(a.model);
  std::optional<ropf::GnnModel> gen_model;
  if (!a.gen_model.empty()) {
    require_file(a.gen_model, "generator model");
    gen_model = ropf::load_model(a.gen_model);
  }
  ropf::LoadVector loads = ropf::base_loads(net);
  if (!a.loads.empty()) {
    require_file(a.loads, "loads file");
    loads = ropf::parse_loads(ropf::read_text_file(a.loads), net);
  }
  const ropf::HierarchicalPredictor predictor(net, line_model, gen_model ? &*gen_model : nullptr);
  const ropf::Prediction p = predictor.predict(loads);

  Json j;
  j["case"] = net.name;
  j["line_probs"] = by_id(p.line_probs, index.line_ids);
  j["congested_lines"] = by_id(p.line_labels, index.line_ids);
  if (gen_model) {
    j["gen_probs"] = by_id(p.gen_probs, index.gen_ids);
    j["max_gens"] = by_id(p.gen_labels, index.gen_ids);
  }
  j["inference_time_s"] = p.inference_time_s;
  ropf::write_text_file(a.out, j.dump(2) + "\n");

  std::size_t n_lines = 0, n_gens = 0;
  for (int v : p.line_labels) n_lines += v;
  for (int v : p.gen_labels) n_gens += v;
  std::cout << "congested_lines=" << n_lines << " max_gens=" << n_gens << '\n';
  return kOk;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string case_name, loads, method = "fopf", line_model, gen_model, out;
};

int run_solve(const SolveArgs& a) {
  Method method;
  try {
    method = ropf::parse_method(a.method);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (method != Method::FOPF && a.line_model.empty())
    throw UsageError("--method " + a.method + " requires --line-model");
  if (fixes_generators(method) && a.gen_model.empty())
    throw UsageError("--method " + a.method + " requires --gen-model");

  const ropf::Network net = ropf::load_case(resolve_case(a.case_name));
  const ropf::GridIndex index = ropf::build_index(net);
  ropf::LoadVector loads = ropf::base_loads(net);
  if (!a.loads.empty()) {
    require_file(a.loads, "loads file");
    loads = ropf::parse_loads(ropf::read_text_file(a.loads), net);
  }

  ropf::RopfSpec spec = ropf::RopfSpec::full(net);
  double inference_s = 0.0;
  if (method != Method::FOPF) {
    require_file(a.line_model, "line model");
    const ropf::GnnModel line_model = ropf::load_model(a.line_model);
    std::optional<ropf::GnnModel> gen_model;
    if (fixes_generators(method)) {
      require_file(a.gen_model, "generator model");
      gen_model = ropf::load_model(a.gen_model);
    }
    const ropf::HierarchicalPredictor predictor(net, line_model, gen_model ? &*gen_model : nullptr);
    const ropf::Prediction p = predictor.predict(loads);
    inference_s = p.inference_time_s;
    spec = ropf::build_spec_from_predictions(net, method, p.line_labels, p.gen_labels);
  }

  const ropf::FallbackOutcome r = ropf::solve_with_fallback(net, index, loads, spec, method);
  const ropf::OpfSolution& s = r.solution;
  if (!s.optimal())
    throw InfeasibleError("full problem is " + std::string(ropf::to_string(s.status)) + " for the given loads");

  if (!a.out.empty()) {
    Json j;
    j["case"] = net.name;
    j["method"] = ropf::to_string(method);
    j["status"] = ropf::to_string(s.status);
    j["objective_cost"] = s.objective_cost;
    j["fell_back"] = s.fell_back;
    j["n_monitored"] = spec.monitored_lines.size();
    j["n_fixed"] = spec.fixed_max_gens.size();
    j["solve_time_s"] = s.solve_time_s;
    j["build_time_s"] = s.build_time_s;
    j["inference_time_s"] = inference_s;
    j["pg_mw"] = by_id(s.pg_mw, index.gen_ids);
    j["theta_rad"] = by_id(s.theta_rad, index.bus_ids);
    j["flow_mw"] = by_id(s.flow_mw, index.line_ids);
    j["verification"] = {{"feasible", r.report.feasible},
                         {"gen_bound_violations", excess_list(r.report.gen_bound_violations)},
                         {"line_limit_violations", excess_list(r.report.line_limit_violations)},
                         {"balance_violations", excess_list(r.report.balance_violations)}};
    ropf::write_text_file(a.out, j.dump(2) + "\n");
  }
  std::cout << "method=" << ropf::to_string(method) << " status=" << ropf::to_string(s.status)
            << " cost=" << num(s.objective_cost) << " fell_back=" << (s.fell_back ? "true" : "false")
            << " n_monitored=" << spec.monitored_lines.size() << " n_fixed=" << spec.fixed_max_gens.size() << '\n';
  return kOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
  std::string case_name, data, line_model, gen_model, methods = "fopf,ropfl,ropfg,ropflg";
  std::string out_report, out_log, out_errors, out_meta;
  std::uint64_t seed = 1;
  bool no_timing = false, oracle_labels = false;
};

fs::path sibling(const fs::path& report, const std::string& suffix) {
  return report.parent_path() / (report.stem().string() + suffix);
}

int run_bench(const BenchArgs& a) {
  ropf::BenchConfig cfg;
  cfg.methods = parse_methods(a.methods);
  cfg.timing = !a.no_timing;
  cfg.oracle_labels = a.oracle_labels;
  cfg.seed = a.seed;
  bool needs_lines = false, needs_gens = false;
  for (Method m : cfg.methods) {
    needs_lines = needs_lines || m != Method::FOPF;
    needs_gens = needs_gens || fixes_generators(m);
  }
  if (!cfg.oracle_labels) {
    if (needs_lines && a.line_model.empty()) throw UsageError("reduced methods require --line-model");
    if (needs_gens && a.gen_model.empty()) throw UsageError("methods ropfg/ropflg require --gen-model");
  }

  const ropf::Network net = ropf::load_case(resolve_case(a.case_name));
  require_file(a.data, "dataset");
  const ropf::Dataset test = ropf::load_dataset(a.data);
  std::optional<ropf::GnnModel> line_model, gen_model;
  if (!cfg.oracle_labels && needs_lines) {
    require_file(a.line_model, "line model");
    line_model = ropf::load_model(a.line_model);
  }
  if (!cfg.oracle_labels && needs_gens) {
    require_file(a.gen_model, "generator model");
    gen_model = ropf::load_model(a.gen_model);
  }

  const ropf::BenchReport report =
      ropf::run_benchmark(net, test, line_model ? &*line_model : nullptr, gen_model ? &*gen_model : nullptr, cfg);

  const fs::path report_path = a.out_report;
  ropf::write_text_file(report_path, ropf::report_csv(report));
  ropf::write_text_file(a.out_log, ropf::log_jsonl(report.log));
  ropf::write_text_file(a.out_errors.empty() ? sibling(report_path, ".errors.csv") : fs::path(a.out_errors),
                        ropf::errors_csv(report.errors));
  ropf::write_text_file(a.out_meta.empty() ? sibling(report_path, ".meta.json") : fs::path(a.out_meta),
                        ropf::report_sidecar(report, cfg, net.name));

  for (const auto& row : report.rows) {
    std::cout << ropf::to_string(row.method) << " mean_cost=" << num(row.mean_cost)
              << " mean_cost_pct=" << num(row.mean_cost_pct) << " time_saving_pct=" << num(row.time_saving_pct)
              << " fallbacks=" << row.fallback_count << " violations=" << row.violation_count << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced DC optimal power flow with graph-network screening"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ropf 0.1.0");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample perturbed loads, solve and label them");
  g->add_option("--case", gen.case_name, "Case file or bundled case name")->required();
  g->add_option("--samples", gen.config.n_samples, "Number of samples")->required();
  g->add_option("--perturb", gen.config.perturb, "Load perturbation fraction")->capture_default_str();
  g->add_option("--tau", gen.config.tau, "Congestion threshold fraction of RateA")->capture_default_str();
  g->add_option("--eps-gen", gen.config.eps_gen, "Max-capacity tolerance")->capture_default_str();
  g->add_option("--seed", gen.config.seed, "RNG seed")->capture_default_str();
  g->add_option("--split", gen.split, "train,val[,test] fractions")->capture_default_str();
  g->add_option("--out", gen.out, "Dataset output file")->required();
  g->add_flag("--global-scale", gen.config.global_scale, "One load scalar per sample");
  g->add_flag("--no-timing", gen.no_timing, "Store zero solve times (byte-stable output)");
  g->add_option("--threads", gen.config.threads, "Worker threads (0 = default)")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train the line (stage 1) or generator (stage 2) model");
  t->add_option("--data", tr.data, "Dataset file")->required();
  t->add_option("--stage", tr.stage, "line or gen")->check(CLI::IsMember({"line", "gen"}))->capture_default_str();
  t->add_option("--line-model", tr.line_model, "Trained line model (stage gen)");
  t->add_option("--epochs", tr.config.epochs)->capture_default_str();
  t->add_option("--hidden", tr.config.hidden_dim)->capture_default_str();
  t->add_option("--layers", tr.config.n_layers)->capture_default_str();
  t->add_option("--lr", tr.config.learning_rate)->capture_default_str();
  t->add_option("--pos-weight-cap", tr.config.pos_weight_cap)->capture_default_str();
  t->add_option("--seed", tr.config.seed)->capture_default_str();
  t->add_option("--loss", tr.loss, "bce or mse")->check(CLI::IsMember({"bce", "mse"}))->capture_default_str();
  t->add_flag("--teacher-forcing", tr.config.teacher_forcing, "Stage gen sees true line labels");
  t->add_option("--threshold", tr.config.decision_threshold, "Decision threshold")->capture_default_str();
  t->add_option("--history", tr.history, "Per-epoch history CSV output");
  t->add_option("--out", tr.out, "Model output file")->required();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict congested lines and max-capacity generators");
  p->add_option("--case", pr.case_name)->required();
  p->add_option("--model", pr.model, "Line model")->required();
  p->add_option("--gen-model", pr.gen_model, "Generator model");
  p->add_option("--loads", pr.loads, "Loads file (default: case loads)");
  p->add_option("--out", pr.out, "Prediction output file")->required();

  SolveArgs so;
  auto* s = app.add_subcommand("solve", "Solve one OPF instance with verify-or-fallback");
  s->add_option("--case", so.case_name)->required();
  s->add_option("--loads", so.loads, "Loads file (default: case loads)");
  s->add_option("--method", so.method, "fopf|ropfl|ropfg|ropflg")->capture_default_str();
  s->add_option("--line-model", so.line_model);
  s->add_option("--gen-model", so.gen_model);
  s->add_option("--out", so.out, "Solution output file");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Run every method over a test dataset");
  b->add_option("--case", be.case_name)->required();
  b->add_option("--data", be.data, "Test dataset")->required();
  b->add_option("--line-model", be.line_model);
  b->add_option("--gen-model", be.gen_model);
  b->add_option("--methods", be.methods)->capture_default_str();
  b->add_option("--seed", be.seed)->capture_default_str();
  b->add_option("--out-report", be.out_report, "Report CSV")->required();
  b->add_option("--out-log", be.out_log, "Per-sample log")->required();
  b->add_option("--out-errors", be.out_errors, "Error-rate CSV (default: <report>.errors.csv)");
  b->add_option("--out-meta", be.out_meta, "Metadata sidecar (default: <report>.meta.json)");
  b->add_flag("--no-timing", be.no_timing, "Zero every time column");
  b->add_flag("--oracle-labels", be.oracle_labels, "Use the dataset's true labels instead of models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", kUsage, e.what());
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*p) return run_predict(pr);
    if (*s) return run_solve(so);
    if (*b) return run_bench(be);
  } catch (const UsageError& e) {
    return report_error("usage", kUsage, e.what());
  } catch (const ropf::InfeasibleBaseError& e) {
    return report_error("infeasible", kInfeasible, e.what());
  } catch (const InfeasibleError& e) {
    return report_error("infeasible", kInfeasible, e.what());
  } catch (const ropf::ValidationError& e) {
    return report_error("validation", kInput, e.what());
  } catch (const ropf::ParseError& e) {
    return report_error("parse", kInput, e.what());
  } catch (const ropf::TrainingError& e) {
    return report_error("training", kInput, e.what());
  } catch (const InputError& e) {
    return report_error("input", kInput, e.what());
  } catch (const std::invalid_argument& e) {
    return report_error("input", kInput, e.what());
  } catch (const std::exception& e) {
    return report_error("internal", kFailure, e.what());
  }
  return kUsage;
}
