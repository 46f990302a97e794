#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ropf {

using BusId = int;
using GenId = int;
using LineId = int;

struct Bus {
  BusId id = 0;
  double load_mw = 0.0;
  bool is_reference = false;

  bool operator==(const Bus&) const = default;
};

struct Generator {
  GenId id = 0;
  BusId bus = 0;
  double pmin_mw = 0.0;
  double pmax_mw = 0.0;
  double cost_per_mwh = 0.0;
  double ramp_mw_per_min = 0.0;

  bool operator==(const Generator&) const = default;
};

struct Line {
  LineId id = 0;
  BusId from = 0;
  BusId to = 0;
  double x_pu = 0.0;
  double rate_a_mw = 0.0;

  bool operator==(const Line&) const = default;
};

// Static grid description. Records keep file order; GridIndex gives id lookups.
struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Line> lines;

  std::size_t n_buses() const { return buses.size(); }
  std::size_t n_generators() const { return generators.size(); }
  std::size_t n_lines() const { return lines.size(); }

  bool operator==(const Network&) const = default;
};

// Positional incidence derived from a valid Network. All indices are positions
// into the Network's record vectors, never ids.
struct GridIndex {
  std::vector<std::size_t> line_from;             // bus position of f(k)
  std::vector<std::size_t> line_to;               // bus position of t(k)
  std::vector<std::size_t> gen_bus;               // bus position of each generator
  std::vector<std::vector<std::size_t>> gens_at;  // G(n)
  std::vector<std::vector<std::size_t>> lines_out;  // K(n+): lines leaving n
  std::vector<std::vector<std::size_t>> lines_in;   // K(n-): lines entering n
  std::size_t reference = 0;

  std::size_t bus_position(BusId id) const;
  std::size_t gen_position(GenId id) const;
  std::size_t line_position(LineId id) const;

  std::vector<BusId> bus_ids;
  std::vector<GenId> gen_ids;
  std::vector<LineId> line_ids;
};

// Throws ValidationError if the network is invalid.
GridIndex build_index(const Network& net);

struct Violation {
  std::string record;  // e.g. "line 7", "bus 3", "network"
  std::string message;

  bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

struct ValidationOptions {
  bool allow_negative_loads = false;
};

// Lists every violated invariant; empty means valid.
ValidationReport validate(const Network& net, const ValidationOptions& options = {});

std::string format_report(const ValidationReport& report);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(ValidationReport report)
      : std::runtime_error(format_report(report)), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline constexpr int kCaseFormatVersion = 1;

// Parses a version-1 case document (strict: unknown fields are errors) and
// validates it.
Network parse_case(std::string_view text, const ValidationOptions& options = {});

// Byte-stable serialization; parse_case(serialize_case(n)) == n.
std::string serialize_case(const Network& net);

Network load_case(const std::filesystem::path& path, const ValidationOptions& options = {});
void save_case(const Network& net, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace ropf
