#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ropf/datagen.hpp"
#include "ropf/gnn.hpp"
#include "ropf/opf.hpp"

namespace ropf {

struct FamilyErrors {
  std::string family;
  double false_positive_pct = 0.0;
  double false_negative_pct = 0.0;
  double total_error_pct = 0.0;
  std::size_t pairs = 0;
};

// Percentages over all (sample, target) pairs. Rows are samples.
FamilyErrors compute_error_metrics(const std::string& family, const std::vector<std::vector<int>>& predicted,
                                   const std::vector<std::vector<int>>& truth);

struct ErrorReport {
  FamilyErrors lines;
  FamilyErrors generators;
};

// FOPF: (all, {}); ROPFL: (predicted lines, {}); ROPFG: (all, predicted gens);
// ROPFLG: (predicted lines, predicted gens). Labels are per record position.
RopfSpec build_spec_from_predictions(const Network& net, Method method, const std::vector<int>& line_labels,
                                     const std::vector<int>& gen_labels);

struct MethodRow {
  Method method = Method::FOPF;
  std::size_t n_samples = 0;
  double mean_cost = 0.0;
  double mean_cost_pct = 0.0;
  double total_solve_time_s = 0.0;
  double time_saving_pct = 0.0;
  double time_saving_with_inference_pct = 0.0;
  double mean_inference_time_s = 0.0;
  std::size_t fallback_count = 0;
  std::size_t violation_count = 0;
};

struct LogRecord {
  int sample_id = 0;
  Method method = Method::FOPF;
  double cost = 0.0;
  double solve_time_s = 0.0;
  double inference_time_s = 0.0;
  bool fell_back = false;
  std::size_t n_monitored = 0;
  std::size_t n_fixed = 0;
  std::size_t violations = 0;       // in the returned solution
  std::string attempt_status;       // LP status of the reduced solve
  double attempt_cost = 0.0;        // reduced objective before any fallback
  bool attempt_feasible = false;    // reduced solution passed verification
  double fopf_cost = 0.0;
};

struct BenchReport {
  std::vector<MethodRow> rows;
  ErrorReport errors;
  std::vector<LogRecord> log;
  double fopf_total_solve_time_s = 0.0;
  bool timing = true;
};

struct BenchConfig {
  std::vector<Method> methods{Method::FOPF, Method::ROPFL, Method::ROPFG, Method::ROPFLG};
  bool timing = true;          // false zeroes every time column
  bool oracle_labels = false;  // use the dataset's true labels instead of models
  std::uint64_t seed = 1;
};

// Runs every method on every sample of the dataset, sequentially, so the
// recorded times are contention free. Models may be null with oracle_labels.
BenchReport run_benchmark(const Network& net, const Dataset& test, const GnnModel* line_model,
                          const GnnModel* gen_model, const BenchConfig& config);

// Rebuilds the per-method rows from a per-sample log.
std::vector<MethodRow> aggregate(const std::vector<LogRecord>& log, const std::vector<Method>& methods);

std::string report_csv(const BenchReport& report);
std::string errors_csv(const ErrorReport& errors);
std::string log_jsonl(const std::vector<LogRecord>& log);
std::vector<LogRecord> parse_log_jsonl(std::string_view text);
std::string report_sidecar(const BenchReport& report, const BenchConfig& config, const std::string& case_name);

}  // namespace ropf
