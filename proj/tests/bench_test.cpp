#include "doctest.h"

#include <cmath>

#include "ropf/bench.hpp"
#include "support/networks.hpp"

using namespace ropf;

namespace {

Dataset test_set(const Network& net, std::size_t n, std::uint64_t seed) {
  GenerateConfig cfg;
  cfg.n_samples = n;
  cfg.seed = seed;
  cfg.split_fractions = {0.0, 0.0, 1.0};
  return generate(net, cfg);
}

const LogRecord* find(const std::vector<LogRecord>& log, int id, Method m) {
  for (const auto& r : log)
    if (r.sample_id == id && r.method == m) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("error metrics count pairs") {
  // 10 samples x 100 targets with 5 false positives and 2 false negatives.
  std::vector<std::vector<int>> truth(10, std::vector<int>(100, 0)), pred = truth;
  for (int s = 0; s < 10; ++s) truth[s][s] = pred[s][s] = 1;
  for (int s = 0; s < 5; ++s) pred[s][50] = 1;
  pred[7][7] = pred[8][8] = 0;
  const FamilyErrors e = compute_error_metrics("lines", pred, truth);
  CHECK(e.pairs == 1000);
  CHECK(e.false_positive_pct == doctest::Approx(0.5));
  CHECK(e.false_negative_pct == doctest::Approx(0.2));
  CHECK(e.total_error_pct == doctest::Approx(0.7));

  const FamilyErrors perfect = compute_error_metrics("generators", truth, truth);
  CHECK(perfect.total_error_pct == 0.0);
  CHECK_THROWS_AS(compute_error_metrics("x", {{0, 1}}, {{0}}), std::invalid_argument);
  CHECK_THROWS_AS(compute_error_metrics("x", {{0}}, {{0}, {1}}), std::invalid_argument);
}

TEST_CASE("specs built from predictions") {
  const Network net = test::congested_triangle();
  const std::vector<int> none{0, 0, 0}, all{1, 1, 1};
  const RopfSpec full = RopfSpec::full(net);

  CHECK(build_spec_from_predictions(net, Method::FOPF, none, {0, 0}) == full);
  const RopfSpec l0 = build_spec_from_predictions(net, Method::ROPFL, none, {1, 1});
  CHECK(l0.monitored_lines.empty());
  CHECK(l0.fixed_max_gens.empty());
  CHECK(build_spec_from_predictions(net, Method::ROPFL, all, {0, 0}).monitored_lines == full.monitored_lines);
  const RopfSpec g = build_spec_from_predictions(net, Method::ROPFG, none, {0, 1});
  CHECK(g.monitored_lines == full.monitored_lines);
  CHECK(g.fixed_max_gens == std::set<GenId>{2});
  const RopfSpec lg = build_spec_from_predictions(net, Method::ROPFLG, {0, 1, 0}, {1, 0});
  CHECK(lg.monitored_lines == std::set<LineId>{2});
  CHECK(lg.fixed_max_gens == std::set<GenId>{1});
  CHECK_THROWS_AS(build_spec_from_predictions(net, Method::ROPFL, {1}, {}), std::invalid_argument);
}

TEST_CASE("FOPF-only benchmark has one baseline row") {
  const Network net = test::bundled_case("five_bus");
  const Dataset ds = test_set(net, 5, 1);
  BenchConfig cfg;
  cfg.methods = {Method::FOPF};
  const BenchReport r = run_benchmark(net, ds, nullptr, nullptr, cfg);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].mean_cost_pct == 100.0);
  CHECK(r.rows[0].time_saving_pct == 0.0);
  CHECK(r.rows[0].n_samples == 5);
  CHECK(r.log.size() == 5);
}

TEST_CASE("oracle labels reproduce the full optimum and satisfy the bench inequalities") {
  const Network net = test::bundled_case("case24");
  const Dataset ds = test_set(net, 12, 3);
  BenchConfig cfg;
  cfg.oracle_labels = true;
  cfg.timing = false;
  const BenchReport r = run_benchmark(net, ds, nullptr, nullptr, cfg);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.errors.lines.total_error_pct == 0.0);
  CHECK(r.errors.generators.total_error_pct == 0.0);

  for (const Sample& s : ds.samples) {
    const LogRecord* f = find(r.log, s.sample_id, Method::FOPF);
    REQUIRE(f != nullptr);
    CHECK(f->cost == doctest::Approx(s.fopf_cost).epsilon(1e-9));
    for (Method m : {Method::ROPFL, Method::ROPFG, Method::ROPFLG}) {
      CAPTURE(to_string(m));
      const LogRecord* x = find(r.log, s.sample_id, m);
      REQUIRE(x != nullptr);
      CHECK(x->violations == 0);
      CHECK(x->fopf_cost == f->cost);
      // Every final answer is feasible for the full problem, so it cannot beat it.
      CHECK(x->cost >= f->cost - 1e-6 * f->cost);
      // A line-only relaxation never costs more before fallback.
      if (m == Method::ROPFL) CHECK(x->attempt_cost <= f->cost + 1e-6 * f->cost);
      if (x->attempt_feasible) CHECK(std::abs(x->cost - f->cost) <= 1e-6 * f->cost);
    }
  }
  for (const auto& row : r.rows) {
    CHECK(row.total_solve_time_s == 0.0);
    CHECK(row.mean_cost_pct == doctest::Approx(100.0).epsilon(1e-6));
  }
}

TEST_CASE("report, log and csv formats") {
  const Network net = test::bundled_case("five_bus");
  const Dataset ds = test_set(net, 6, 5);
  BenchConfig cfg;
  cfg.oracle_labels = true;
  cfg.timing = false;
  const BenchReport r = run_benchmark(net, ds, nullptr, nullptr, cfg);

  const std::vector<MethodRow> again = aggregate(r.log, cfg.methods);
  REQUIRE(again.size() == r.rows.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].mean_cost == r.rows[i].mean_cost);
    CHECK(again[i].fallback_count == r.rows[i].fallback_count);
  }

  const std::string log = log_jsonl(r.log);
  const auto parsed = parse_log_jsonl(log);
  REQUIRE(parsed.size() == r.log.size());
  CHECK(log_jsonl(parsed) == log);

  const std::string csv = report_csv(r);
  CHECK(csv.rfind("method,n_samples,mean_cost,mean_cost_pct,total_solve_time_s,time_saving_pct,"
                  "mean_inference_time_s,fallback_count,violation_count\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(errors_csv(r.errors).rfind("family,false_positive_pct,false_negative_pct,total_error_pct\nlines,", 0) == 0);

  // Without timing the outputs are byte-stable.
  const BenchReport r2 = run_benchmark(net, ds, nullptr, nullptr, cfg);
  CHECK(report_csv(r2) == csv);
  CHECK(log_jsonl(r2.log) == log);
  CHECK(report_sidecar(r2, cfg, "five_bus") == report_sidecar(r, cfg, "five_bus"));

  CHECK_THROWS_AS(aggregate({}, cfg.methods), std::invalid_argument);
}

TEST_CASE("benchmark rejects mismatched inputs") {
  const Network net = test::bundled_case("five_bus");
  const Dataset ds = test_set(test::congested_triangle(), 2, 1);
  BenchConfig cfg;
  cfg.oracle_labels = true;
  CHECK_THROWS(run_benchmark(net, ds, nullptr, nullptr, cfg));
  cfg.oracle_labels = false;
  CHECK_THROWS(run_benchmark(test::congested_triangle(), ds, nullptr, nullptr, cfg));
}
