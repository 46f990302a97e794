#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ropf/grid.hpp"
#include "ropf/opf.hpp"
#include "ropf/random.hpp"

namespace ropf {

enum class Split { Train, Val, Test };

std::string_view to_string(Split split);

struct Sample {
  int sample_id = 0;
  Split split = Split::Train;
  LoadVector loads;
  std::vector<int> line_labels;  // per line position, 0/1
  std::vector<int> gen_labels;   // per generator position, 0/1
  double fopf_cost = 0.0;
  std::vector<double> fopf_pg_mw;
  std::vector<double> fopf_flow_mw;
  double fopf_solve_time_s = 0.0;

  bool operator==(const Sample&) const = default;
};

struct GenerateConfig {
  std::size_t n_samples = 100;
  double perturb = 0.10;
  double tau = 0.7;
  double eps_gen = 1e-6;
  std::uint64_t seed = 1;
  std::vector<double> split_fractions{0.9, 0.1};
  bool global_scale = false;  // one scalar per sample instead of per bus
  bool record_timing = true;
  std::size_t max_attempts = 100;  // per sample
  int threads = 0;                 // 0: OpenMP default
};

struct Dataset {
  Network network;
  double tau = 0.7;
  double eps_gen = 1e-6;
  double perturb = 0.10;
  bool global_scale = false;
  std::uint64_t seed = 1;
  std::vector<double> split_fractions{0.9, 0.1};
  std::size_t redraws = 0;
  std::string warning;
  std::vector<Sample> samples;

  bool operator==(const Dataset&) const = default;
};

class InfeasibleBaseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each bus load is scaled by an independent u ~ U[1 - perturb, 1 + perturb]
// (or by one shared u when global_scale is set).
LoadVector perturb_loads(const LoadVector& base, double perturb, Rng& rng, bool global_scale = false);

inline constexpr double kCongestionGuard = 1e-9;

bool is_congested(double flow_mw, double rate_a_mw, double tau);
bool is_at_max(double pg_mw, double pmax_mw, double eps_gen);

struct Labels {
  std::vector<int> lines;
  std::vector<int> gens;
};

Labels label_sample(const Network& net, const OpfSolution& sol, double tau, double eps_gen);

// Assignment depends only on (seed, sample_id).
Split assign_split(std::uint64_t seed, int sample_id, const std::vector<double>& fractions);

// Throws InfeasibleBaseError when the full problem is infeasible at base load.
Dataset generate(const Network& net, const GenerateConfig& config);

inline constexpr int kDatasetFormatVersion = 1;

// Line-delimited: one header record, then one record per sample.
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(std::string_view text);

Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace ropf
