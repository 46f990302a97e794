#include "ropf/grid.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace ropf {

namespace {

using detail::FormatError;
using detail::Json;
using detail::OrderedJson;

std::string rec(const char* kind, long long id) { return std::string(kind) + " " + std::to_string(id); }

// Union-find over bus positions.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::size_t GridIndex::bus_position(BusId id) const {
  auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
  if (it == bus_ids.end()) throw std::out_of_range("unknown bus id " + std::to_string(id));
  return static_cast<std::size_t>(it - bus_ids.begin());
}

std::size_t GridIndex::gen_position(GenId id) const {
  auto it = std::find(gen_ids.begin(), gen_ids.end(), id);
  if (it == gen_ids.end()) throw std::out_of_range("unknown generator id " + std::to_string(id));
  return static_cast<std::size_t>(it - gen_ids.begin());
}

std::size_t GridIndex::line_position(LineId id) const {
  auto it = std::find(line_ids.begin(), line_ids.end(), id);
  if (it == line_ids.end()) throw std::out_of_range("unknown line id " + std::to_string(id));
  return static_cast<std::size_t>(it - line_ids.begin());
}

ValidationReport validate(const Network& net, const ValidationOptions& options) {
  ValidationReport report;
  auto add = [&](std::string record, std::string message) {
    report.push_back({std::move(record), std::move(message)});
  };

  if (!(net.base_mva > 0.0)) add("network", "base_mva must be positive");
  if (net.buses.empty()) add("network", "no buses");

  std::map<BusId, std::size_t> bus_pos;
  bool ids_unique = true;
  std::vector<BusId> refs;
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const Bus& b = net.buses[i];
    if (!bus_pos.emplace(b.id, i).second) {
      add(rec("bus", b.id), "duplicate bus id");
      ids_unique = false;
    }
    if (b.is_reference) refs.push_back(b.id);
    if (b.load_mw < 0.0 && !options.allow_negative_loads) add(rec("bus", b.id), "negative load");
  }
  if (!net.buses.empty() && refs.empty()) add("network", "no reference bus");
  if (refs.size() > 1) {
    std::string ids;
    for (BusId r : refs) ids += (ids.empty() ? "" : ", ") + std::to_string(r);
    add("network", "multiple reference buses: " + ids);
  }

  std::set<GenId> gen_ids;
  for (const Generator& g : net.generators) {
    if (!gen_ids.insert(g.id).second) add(rec("generator", g.id), "duplicate generator id");
    if (!bus_pos.contains(g.bus)) add(rec("generator", g.id), "bus " + std::to_string(g.bus) + " does not exist");
    if (g.pmin_mw < 0.0) add(rec("generator", g.id), "pmin_mw is negative");
    if (g.pmin_mw > g.pmax_mw) add(rec("generator", g.id), "pmin_mw exceeds pmax_mw");
    if (g.cost_per_mwh < 0.0) add(rec("generator", g.id), "cost_per_mwh is negative");
    if (g.ramp_mw_per_min < 0.0) add(rec("generator", g.id), "ramp_mw_per_min is negative");
  }

  std::set<LineId> line_ids;
  bool endpoints_ok = true;
  for (const Line& l : net.lines) {
    if (!line_ids.insert(l.id).second) add(rec("line", l.id), "duplicate line id");
    if (!(l.x_pu > 0.0)) add(rec("line", l.id), "x_pu must be positive");
    if (!(l.rate_a_mw > 0.0)) add(rec("line", l.id), "rate_a_mw must be positive");
    const bool from_ok = bus_pos.contains(l.from);
    const bool to_ok = bus_pos.contains(l.to);
    if (!from_ok) add(rec("line", l.id), "from bus " + std::to_string(l.from) + " does not exist");
    if (!to_ok) add(rec("line", l.id), "to bus " + std::to_string(l.to) + " does not exist");
    if (l.from == l.to) add(rec("line", l.id), "from and to are the same bus");
    endpoints_ok = endpoints_ok && from_ok && to_ok && l.from != l.to;
  }

  // Connectivity only makes sense once every line resolves to distinct buses.
  if (ids_unique && endpoints_ok && !net.buses.empty()) {
    DisjointSets sets(net.buses.size());
    for (const Line& l : net.lines) sets.unite(bus_pos.at(l.from), bus_pos.at(l.to));
    std::map<std::size_t, std::vector<BusId>> islands;
    for (std::size_t i = 0; i < net.buses.size(); ++i) islands[sets.find(i)].push_back(net.buses[i].id);
    if (islands.size() > 1) {
      std::string msg = "bus graph is disconnected into " + std::to_string(islands.size()) + " islands:";
      for (const auto& [root, members] : islands) {
        msg += " {";
        for (std::size_t k = 0; k < members.size(); ++k) msg += (k ? ", " : "") + std::to_string(members[k]);
        msg += "}";
      }
      add("network", msg);
    }
  }
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::string out;
  for (const auto& v : report) {
    if (!out.empty()) out += "; ";
    out += v.record + ": " + v.message;
  }
  return out;
}

GridIndex build_index(const Network& net) {
  if (auto report = validate(net, {.allow_negative_loads = true}); !report.empty())
    throw ValidationError(std::move(report));
  GridIndex idx;
  const std::size_t nb = net.n_buses();
  for (const auto& b : net.buses) idx.bus_ids.push_back(b.id);
  for (const auto& g : net.generators) idx.gen_ids.push_back(g.id);
  for (const auto& l : net.lines) idx.line_ids.push_back(l.id);
  std::map<BusId, std::size_t> pos;
  for (std::size_t i = 0; i < nb; ++i) {
    pos[net.buses[i].id] = i;
    if (net.buses[i].is_reference) idx.reference = i;
  }
  idx.gens_at.resize(nb);
  idx.lines_out.resize(nb);
  idx.lines_in.resize(nb);
  for (std::size_t g = 0; g < net.n_generators(); ++g) {
    idx.gen_bus.push_back(pos.at(net.generators[g].bus));
    idx.gens_at[idx.gen_bus.back()].push_back(g);
  }
  for (std::size_t k = 0; k < net.n_lines(); ++k) {
    idx.line_from.push_back(pos.at(net.lines[k].from));
    idx.line_to.push_back(pos.at(net.lines[k].to));
    idx.lines_out[idx.line_from.back()].push_back(k);
    idx.lines_in[idx.line_to.back()].push_back(k);
  }
  return idx;
}

Network parse_case(std::string_view text, const ValidationOptions& options) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("case syntax error at byte ") + std::to_string(e.byte) + ": " + e.what(),
                     e.byte);
  }

  Network net;
  try {
    detail::require_object(doc, "case");
    detail::reject_unknown(doc, {"version", "name", "base_mva", "buses", "generators", "lines"}, "case");
    const long long version = detail::integer(doc, "version", "case");
    if (version != kCaseFormatVersion)
      throw FormatError("case: unsupported schema version " + std::to_string(version) + " (expected 1)");
    net.name = detail::string(doc, "name", "case");
    net.base_mva = detail::number(doc, "base_mva", "case");

    for (const Json& b : detail::array(doc, "buses", "case")) {
      detail::require_object(b, "bus");
      detail::reject_unknown(b, {"id", "load_mw", "is_reference"}, "bus");
      net.buses.push_back({static_cast<BusId>(detail::integer(b, "id", "bus")),
                           detail::number(b, "load_mw", "bus"), detail::boolean(b, "is_reference", "bus")});
    }
    for (const Json& g : detail::array(doc, "generators", "case")) {
      detail::require_object(g, "generator");
      detail::reject_unknown(g, {"id", "bus", "pmin_mw", "pmax_mw", "cost_per_mwh", "ramp_mw_per_min"},
                             "generator");
      net.generators.push_back({static_cast<GenId>(detail::integer(g, "id", "generator")),
                                static_cast<BusId>(detail::integer(g, "bus", "generator")),
                                detail::number(g, "pmin_mw", "generator"), detail::number(g, "pmax_mw", "generator"),
                                detail::number(g, "cost_per_mwh", "generator"),
                                detail::number(g, "ramp_mw_per_min", "generator")});
    }
    for (const Json& l : detail::array(doc, "lines", "case")) {
      detail::require_object(l, "line");
      detail::reject_unknown(l, {"id", "from", "to", "x_pu", "rate_a_mw"}, "line");
      net.lines.push_back({static_cast<LineId>(detail::integer(l, "id", "line")),
                           static_cast<BusId>(detail::integer(l, "from", "line")),
                           static_cast<BusId>(detail::integer(l, "to", "line")), detail::number(l, "x_pu", "line"),
                           detail::number(l, "rate_a_mw", "line")});
    }
  } catch (const FormatError& e) {
    throw ParseError(e.what(), 0);
  }

  if (auto report = validate(net, options); !report.empty()) throw ValidationError(std::move(report));
  return net;
}

std::string serialize_case(const Network& net) {
  // One record per line keeps diffs readable; the key order is fixed.
  auto dump = [](const OrderedJson& j) { return j.dump(); };
  std::ostringstream out;
  out << "{\n";
  out << "  \"version\": " << kCaseFormatVersion << ",\n";
  out << "  \"name\": " << dump(OrderedJson(net.name)) << ",\n";
  out << "  \"base_mva\": " << dump(OrderedJson(net.base_mva)) << ",\n";

  auto write_array = [&](const char* key, const auto& records, auto to_json, bool last) {
    out << "  \"" << key << "\": [";
    for (std::size_t i = 0; i < records.size(); ++i) out << (i ? ",\n    " : "\n    ") << dump(to_json(records[i]));
    out << (records.empty() ? "]" : "\n  ]") << (last ? "\n" : ",\n");
  };
  write_array("buses", net.buses, [](const Bus& b) {
    OrderedJson j;
    j["id"] = b.id;
    j["load_mw"] = b.load_mw;
    j["is_reference"] = b.is_reference;
    return j;
  }, false);
  write_array("generators", net.generators, [](const Generator& g) {
    OrderedJson j;
    j["id"] = g.id;
    j["bus"] = g.bus;
    j["pmin_mw"] = g.pmin_mw;
    j["pmax_mw"] = g.pmax_mw;
    j["cost_per_mwh"] = g.cost_per_mwh;
    j["ramp_mw_per_min"] = g.ramp_mw_per_min;
    return j;
  }, false);
  write_array("lines", net.lines, [](const Line& l) {
    OrderedJson j;
    j["id"] = l.id;
    j["from"] = l.from;
    j["to"] = l.to;
    j["x_pu"] = l.x_pu;
    j["rate_a_mw"] = l.rate_a_mw;
    return j;
  }, true);
  out << "}\n";
  return out.str();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Network load_case(const std::filesystem::path& path, const ValidationOptions& options) {
  return parse_case(read_text_file(path), options);
}

void save_case(const Network& net, const std::filesystem::path& path) { write_text_file(path, serialize_case(net)); }

}  // namespace ropf
