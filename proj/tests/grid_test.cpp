#include "doctest.h"

#include <functional>

#include "ropf/grid.hpp"
#include "support/networks.hpp"

using namespace ropf;

namespace {

const char* kTwoBusDoc = R"({
  "version": 1, "name": "two_bus", "base_mva": 100,
  "buses": [{"id": 1, "load_mw": 0, "is_reference": true}, {"id": 2, "load_mw": 50, "is_reference": false}],
  "generators": [{"id": 1, "bus": 1, "pmin_mw": 0, "pmax_mw": 100, "cost_per_mwh": 10, "ramp_mw_per_min": 5}],
  "lines": [{"id": 1, "from": 1, "to": 2, "x_pu": 0.1, "rate_a_mw": 100}]
})";

}  // namespace

TEST_CASE("parse minimal two-bus document") {
  const Network net = parse_case(kTwoBusDoc);
  CHECK(net.n_buses() == 2);
  CHECK(net.n_generators() == 1);
  CHECK(net.n_lines() == 1);
  CHECK(net == test::two_bus());
  CHECK(net.buses[1].load_mw == 50.0);
  CHECK(net.lines[0].x_pu == 0.1);
}

TEST_CASE("three generators on one bus parse") {
  const Network net = test::bundled_case("three_bus_split");
  CHECK(net.n_buses() == 3);
  CHECK(net.n_generators() == 3);
  const GridIndex idx = build_index(net);
  CHECK(idx.gens_at[idx.bus_position(1)].size() == 3);
}

TEST_CASE("two reference buses name both ids") {
  Network net = test::three_gen_bus();
  net.buses[2].is_reference = true;
  const auto report = validate(net);
  REQUIRE(report.size() == 1);
  CHECK(report[0].message.find("1") != std::string::npos);
  CHECK(report[0].message.find("3") != std::string::npos);
  CHECK_THROWS_AS(parse_case(serialize_case(net)), ValidationError);
}

TEST_CASE("syntax errors report a position") {
  std::string doc = kTwoBusDoc;
  doc.insert(doc.find("1, \"name\""), "@");
  try {
    parse_case(doc);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() > 0);
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("schema version and unknown fields are rejected") {
  std::string doc = kTwoBusDoc;
  doc.replace(doc.find("\"version\": 1"), 12, "\"version\": 2");
  CHECK_THROWS_AS(parse_case(doc), ParseError);

  std::string extra = kTwoBusDoc;
  extra.replace(extra.find("\"name\""), 6, "\"colour\": 1, \"name\"");
  CHECK_THROWS_WITH_AS(parse_case(extra), doctest::Contains("colour"), ParseError);

  std::string bad_line = kTwoBusDoc;
  bad_line.replace(bad_line.find("\"rate_a_mw\""), 11, "\"r\": 0, \"rate_a_mw\"");
  CHECK_THROWS_AS(parse_case(bad_line), ParseError);
}

TEST_CASE("round trip and field preservation") {
  Network net = test::two_bus();
  net.base_mva = 50.0;
  const std::string doc = serialize_case(net);
  CHECK(doc.find("\"base_mva\": 50") != std::string::npos);
  CHECK(parse_case(doc) == net);

  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Network r = test::random_network(seed, 2 + seed % 9, seed % 5, seed % 4);
    CHECK(parse_case(serialize_case(r)) == r);
  }
}

TEST_CASE("serialization is byte stable and every bundled case validates") {
  for (const auto& name : test::bundled_case_names()) {
    CAPTURE(name);
    const Network net = test::bundled_case(name);
    CHECK(validate(net).empty());
    const std::string a = serialize_case(net);
    CHECK(a == serialize_case(parse_case(a)));
  }
  const Network c24 = test::bundled_case("case24");
  CHECK(c24.n_buses() >= 24);
  CHECK(c24.n_lines() >= 30);
}

TEST_CASE("validation examples") {
  CHECK(validate(test::two_bus()).empty());

  Network zero_x = test::two_bus();
  zero_x.lines[0].x_pu = 0.0;
  const auto r = validate(zero_x);
  REQUIRE(r.size() == 1);
  CHECK(r[0].record == "line 1");

  Network islands;
  islands.buses = {{1, 0, true}, {2, 10, false}, {3, 0, false}, {4, 10, false}};
  islands.lines = {{1, 1, 2, 0.1, 50}, {2, 3, 4, 0.1, 50}};
  const auto ir = validate(islands);
  REQUIRE(ir.size() == 1);
  CHECK(ir[0].message.find("{1, 2}") != std::string::npos);
  CHECK(ir[0].message.find("{3, 4}") != std::string::npos);
}

TEST_CASE("negative loads are rejected unless allowed") {
  Network net = test::two_bus();
  net.buses[1].load_mw = -5.0;
  CHECK(validate(net).size() == 1);
  CHECK(validate(net, {.allow_negative_loads = true}).empty());
  CHECK_NOTHROW(parse_case(serialize_case(net), {.allow_negative_loads = true}));
}

TEST_CASE("validation completeness: one injected fault gives one entry") {
  const Network base = test::bundled_case("case24");
  REQUIRE(validate(base).empty());
  const std::vector<std::pair<const char*, std::function<void(Network&)>>> faults = {
      {"base_mva", [](Network& n) { n.base_mva = 0.0; }},
      {"dup bus", [](Network& n) { n.buses.push_back(n.buses[3]); }},
      {"no ref", [](Network& n) { for (auto& b : n.buses) b.is_reference = false; }},
      {"two refs", [](Network& n) { n.buses[0].is_reference = true; }},
      {"neg load", [](Network& n) { n.buses[2].load_mw = -1.0; }},
      {"dup gen", [](Network& n) { n.generators[5].id = n.generators[6].id; }},
      {"gen bus", [](Network& n) { n.generators[0].bus = 999; }},
      {"pmin>pmax", [](Network& n) { n.generators[1].pmin_mw = n.generators[1].pmax_mw + 1; }},
      {"pmin<0", [](Network& n) { n.generators[1].pmin_mw = -1; }},
      {"cost<0", [](Network& n) { n.generators[2].cost_per_mwh = -1; }},
      {"ramp<0", [](Network& n) { n.generators[2].ramp_mw_per_min = -1; }},
      {"dup line", [](Network& n) { n.lines[7].id = n.lines[8].id; }},
      {"x", [](Network& n) { n.lines[3].x_pu = -0.1; }},
      {"rate", [](Network& n) { n.lines[3].rate_a_mw = 0.0; }},
      {"from", [](Network& n) { n.lines[3].from = 999; }},
      {"self loop", [](Network& n) { n.lines[10].to = n.lines[10].from; }},
      {"island", [](Network& n) { n.lines[10].from = 8, n.lines[10].to = 9; }},  // bus 7 hangs off line 7-8
  };
  for (const auto& [name, inject] : faults) {
    CAPTURE(name);
    Network net = base;
    inject(net);
    CHECK(validate(net).size() == 1);
  }
}

TEST_CASE("index maps are total and position based") {
  const Network net = test::random_network(7, 6, 4, 3);
  const GridIndex idx = build_index(net);
  std::size_t out = 0, in = 0, gens = 0;
  for (std::size_t b = 0; b < net.n_buses(); ++b) {
    out += idx.lines_out[b].size();
    in += idx.lines_in[b].size();
    gens += idx.gens_at[b].size();
  }
  CHECK(out == net.n_lines());
  CHECK(in == net.n_lines());
  CHECK(gens == net.n_generators());
  CHECK(net.buses[idx.reference].is_reference);
  CHECK_THROWS_AS(idx.bus_position(-1), std::out_of_range);
}
