#include "ropf/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json_util.hpp"
#include "ropf/kernels.hpp"
#include "version.hpp"

namespace ropf {

using detail::FormatError;
using detail::Json;
using detail::OrderedJson;

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split '" + s + "'");
}

// Per-sample stream keyed by (seed, sample id, attempt).
Rng sample_rng(std::uint64_t seed, int sample_id, std::size_t attempt) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(sample_id), attempt));
}

}  // namespace

LoadVector perturb_loads(const LoadVector& base, double perturb, Rng& rng, bool global_scale) {
  if (!(perturb >= 0.0 && perturb < 1.0)) throw std::invalid_argument("perturb must lie in [0, 1)");
  LoadVector out = base;
  const double shared = rng.uniform(1.0 - perturb, 1.0 + perturb);
  for (double& d : out.mw) d *= global_scale ? shared : rng.uniform(1.0 - perturb, 1.0 + perturb);
  return out;
}

bool is_congested(double flow_mw, double rate_a_mw, double tau) {
  return std::abs(flow_mw) > tau * rate_a_mw - kCongestionGuard;
}

bool is_at_max(double pg_mw, double pmax_mw, double eps_gen) {
  return pg_mw >= pmax_mw - eps_gen * std::max(1.0, pmax_mw);
}

Labels label_sample(const Network& net, const OpfSolution& sol, double tau, double eps_gen) {
  if (!sol.optimal()) throw std::invalid_argument("label_sample needs an optimal solution");
  Labels labels;
  labels.lines.reserve(net.n_lines());
  for (std::size_t k = 0; k < net.n_lines(); ++k)
    labels.lines.push_back(is_congested(sol.flow_mw[k], net.lines[k].rate_a_mw, tau) ? 1 : 0);
  labels.gens.reserve(net.n_generators());
  for (std::size_t g = 0; g < net.n_generators(); ++g)
    labels.gens.push_back(is_at_max(sol.pg_mw[g], net.generators[g].pmax_mw, eps_gen) ? 1 : 0);
  return labels;
}

Split assign_split(std::uint64_t seed, int sample_id, const std::vector<double>& fractions) {
  double total = 0.0;
  for (double f : fractions) total += f;
  if (fractions.empty() || fractions.size() > 3 || !(total > 0.0))
    throw std::invalid_argument("split fractions must be 1 to 3 non-negative values with a positive sum");
  const double u = static_cast<double>(derive_seed(seed ^ 0x5917ULL, static_cast<std::uint64_t>(sample_id)) >> 11) *
                   0x1.0p-53 * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    acc += fractions[i];
    if (u < acc) return static_cast<Split>(i);
  }
  return static_cast<Split>(fractions.size() - 1);
}

Dataset generate(const Network& net, const GenerateConfig& config) {
  const GridIndex index = build_index(net);
  const LoadVector base = base_loads(net);
  const RopfSpec full = RopfSpec::full(net);

  if (!solve_opf(net, index, base, full).optimal())
    throw InfeasibleBaseError("full OPF is infeasible at the base load of case '" + net.name + "'");

  Dataset ds;
  ds.network = net;
  ds.tau = config.tau;
  ds.eps_gen = config.eps_gen;
  ds.perturb = config.perturb;
  ds.global_scale = config.global_scale;
  ds.seed = config.seed;
  ds.split_fractions = config.split_fractions;
  ds.samples.resize(config.n_samples);
  std::vector<std::size_t> redraws(config.n_samples, 0);
  std::vector<int> exhausted(config.n_samples, 0);

  const long long n = static_cast<long long>(config.n_samples);
  const int threads = config.threads > 0 ? config.threads : kernels::max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long long i = 0; i < n; ++i) {
    const int id = static_cast<int>(i);
    Sample& s = ds.samples[static_cast<std::size_t>(i)];
    s.sample_id = id;
    s.split = assign_split(config.seed, id, config.split_fractions);
    bool solved = false;
    for (std::size_t attempt = 0; attempt < config.max_attempts && !solved; ++attempt) {
      Rng rng = sample_rng(config.seed, id, attempt);
      LoadVector loads = perturb_loads(base, config.perturb, rng, config.global_scale);
      OpfSolution sol = solve_opf(net, index, loads, full);
      if (!sol.optimal()) {
        ++redraws[static_cast<std::size_t>(i)];
        continue;
      }
      Labels labels = label_sample(net, sol, config.tau, config.eps_gen);
      s.loads = std::move(loads);
      s.line_labels = std::move(labels.lines);
      s.gen_labels = std::move(labels.gens);
      s.fopf_cost = sol.objective_cost;
      s.fopf_pg_mw = std::move(sol.pg_mw);
      s.fopf_flow_mw = std::move(sol.flow_mw);
      s.fopf_solve_time_s = config.record_timing ? sol.solve_time_s : 0.0;
      solved = true;
    }
    if (!solved) exhausted[static_cast<std::size_t>(i)] = 1;
  }

  for (std::size_t i = 0; i < config.n_samples; ++i) {
    if (exhausted[i])
      throw std::runtime_error("sample " + std::to_string(i) + " stayed infeasible after " +
                               std::to_string(config.max_attempts) + " draws");
    ds.redraws += redraws[i];
  }
  if (ds.redraws * 10 > config.n_samples)
    ds.warning = "redraws (" + std::to_string(ds.redraws) + ") exceed 10% of samples";
  return ds;
}

std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  OrderedJson header;
  header["record"] = "header";
  header["format_version"] = kDatasetFormatVersion;
  header["tool_version"] = kToolVersion;
  header["case_name"] = ds.network.name;
  header["tau"] = ds.tau;
  header["eps_gen"] = ds.eps_gen;
  header["perturb"] = ds.perturb;
  header["global_scale"] = ds.global_scale;
  header["seed"] = ds.seed;
  header["split_fractions"] = ds.split_fractions;
  header["n_samples"] = ds.samples.size();
  header["redraws"] = ds.redraws;
  header["warning"] = ds.warning;
  header["case"] = OrderedJson::parse(serialize_case(ds.network));
  out << header.dump() << '\n';

  for (const Sample& s : ds.samples) {
    OrderedJson j;
    j["record"] = "sample";
    j["sample_id"] = s.sample_id;
    j["split"] = to_string(s.split);
    j["loads_mw"] = s.loads.mw;
    j["line_labels"] = s.line_labels;
    j["gen_labels"] = s.gen_labels;
    j["fopf_cost"] = s.fopf_cost;
    j["fopf_pg_mw"] = s.fopf_pg_mw;
    j["fopf_flow_mw"] = s.fopf_flow_mw;
    j["fopf_solve_time_s"] = s.fopf_solve_time_s;
    out << j.dump() << '\n';
  }
  return out.str();
}

Dataset parse_dataset(std::string_view text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  std::size_t start = 0;
  try {
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      const std::string_view line = text.substr(start, end - start);
      start = end + 1;
      ++line_no;
      if (line.empty()) continue;
      const Json j = Json::parse(line);
      const std::string kind = detail::string(j, "record", "dataset record");
      if (line_no == 1) {
        if (kind != "header") throw FormatError("first record must be the header");
        if (detail::integer(j, "format_version", "header") != kDatasetFormatVersion)
          throw FormatError("unsupported dataset format version");
        ds.network = parse_case(detail::field(j, "case", "header").dump());
        ds.tau = detail::number(j, "tau", "header");
        ds.eps_gen = detail::number(j, "eps_gen", "header");
        ds.perturb = detail::number(j, "perturb", "header");
        ds.global_scale = detail::boolean(j, "global_scale", "header");
        ds.seed = detail::field(j, "seed", "header").get<std::uint64_t>();
        ds.split_fractions = detail::vector_of<double>(j, "split_fractions", "header");
        ds.redraws = static_cast<std::size_t>(detail::integer(j, "redraws", "header"));
        ds.warning = detail::string(j, "warning", "header");
        expected = static_cast<std::size_t>(detail::integer(j, "n_samples", "header"));
        continue;
      }
      if (kind != "sample") throw FormatError("unexpected record kind '" + kind + "'");
      Sample s;
      s.sample_id = static_cast<int>(detail::integer(j, "sample_id", "sample"));
      s.split = parse_split(detail::string(j, "split", "sample"));
      s.loads.mw = detail::vector_of<double>(j, "loads_mw", "sample");
      s.line_labels = detail::vector_of<int>(j, "line_labels", "sample");
      s.gen_labels = detail::vector_of<int>(j, "gen_labels", "sample");
      s.fopf_cost = detail::number(j, "fopf_cost", "sample");
      s.fopf_pg_mw = detail::vector_of<double>(j, "fopf_pg_mw", "sample");
      s.fopf_flow_mw = detail::vector_of<double>(j, "fopf_flow_mw", "sample");
      s.fopf_solve_time_s = detail::number(j, "fopf_solve_time_s", "sample");
      const Network& net = ds.network;
      if (s.loads.mw.size() != net.n_buses() || s.line_labels.size() != net.n_lines() ||
          s.gen_labels.size() != net.n_generators() || s.fopf_pg_mw.size() != net.n_generators() ||
          s.fopf_flow_mw.size() != net.n_lines())
        throw FormatError("sample " + std::to_string(s.sample_id) + " does not match the case dimensions");
      ds.samples.push_back(std::move(s));
    }
  } catch (const Json::exception& e) {
    throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what(), line_no);
  } catch (const FormatError& e) {
    throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what(), line_no);
  }
  if (line_no == 0) throw ParseError("empty dataset", 0);
  if (ds.samples.size() != expected)
    throw ParseError("dataset holds " + std::to_string(ds.samples.size()) + " samples, header says " +
                         std::to_string(expected),
                     line_no);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_text_file(path)); }

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_text_file(path, serialize_dataset(dataset));
}

}  // namespace ropf
