#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qpm/harness.hpp"
#include "test_util.hpp"

using namespace qpm;
using qpm::test::within_3sigma;

namespace {

ExperimentSpec base_spec(ExperimentKind kind, int n, int k, int t, long trials) {
  ExperimentSpec s;
  s.name = "probe";
  s.kind = kind;
  s.params.n = n;
  s.params.k = k;
  s.params.t = t;
  s.trials = trials;
  return s;
}

int count_lines(const std::string& text) {
  int lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("wilson intervals match a reference implementation") {
  SECTION("pinned two-sided values") {
    const Interval a = wilson_interval(8, 10);
    REQUIRE(a.lo == Catch::Approx(0.4901624715366418).margin(1e-12));
    REQUIRE(a.hi == Catch::Approx(0.9433178485456248).margin(1e-12));
    const Interval b = wilson_interval(525, 1000);
    REQUIRE(b.lo == Catch::Approx(0.49401247046123636).margin(1e-12));
    REQUIRE(b.hi == Catch::Approx(0.555796191614486).margin(1e-12));
  }
  SECTION("pinned one-sided lower bound") {
    const Interval c = wilson_lower(9500, 10000);
    REQUIRE(c.lo == Catch::Approx(0.9462918269685576).margin(1e-12));
    REQUIRE(c.hi == 1.0);
  }
  SECTION("endpoints stay inside [0, 1]") {
    REQUIRE(wilson_interval(0, 100).lo <= 1e-15);
    REQUIRE(wilson_interval(100, 100).hi == 1.0);
    REQUIRE(wilson_interval(0, 100).hi < 0.05);
    REQUIRE(wilson_interval(100, 100).lo > 0.95);
  }
  SECTION("interval contains the sample rate and shrinks with trials") {
    const Interval small = wilson_interval(5, 10);
    const Interval big = wilson_interval(500, 1000);
    REQUIRE(small.lo < 0.5);
    REQUIRE(small.hi > 0.5);
    REQUIRE(big.hi - big.lo < small.hi - small.lo);
  }
  SECTION("one-sided lower bound is tighter than the two-sided one") {
    REQUIRE(wilson_lower(750, 1000).lo > wilson_interval(750, 1000).lo);
  }
  SECTION("rejects degenerate samples") {
    REQUIRE_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(wilson_interval(5, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(wilson_interval(-1, 4), std::invalid_argument);
  }
}

TEST_CASE("cheat round budget formula") {
  REQUIRE(cheat_round_budget(0.05) == Catch::Approx(39.0).margin(1e-12));
  REQUIRE(cheat_round_budget(0.1) == Catch::Approx(19.0).margin(1e-12));
  REQUIRE(cheat_round_budget(0.5) == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("assertion comparators and serialization") {
  using Cmp = Assertion::Cmp;
  SECTION("le accepts up to bound plus tolerance") {
    const Assertion a{"x", Cmp::Le, 0.5, 0.01};
    REQUIRE(a.check(0.5));
    REQUIRE(a.check(0.51));
    REQUIRE_FALSE(a.check(0.52));
  }
  SECTION("ge accepts down to bound minus tolerance") {
    const Assertion a{"x", Cmp::Ge, 0.75, 0.02};
    REQUIRE(a.check(0.75));
    REQUIRE(a.check(0.73));
    REQUIRE_FALSE(a.check(0.72));
  }
  SECTION("eq is a symmetric band") {
    const Assertion a{"x", Cmp::Eq, 1.0, 0.0};
    REQUIRE(a.check(1.0));
    REQUIRE_FALSE(a.check(1.0 + 1e-9));
    const Assertion b{"x", Cmp::Eq, 0.5, 0.015};
    REQUIRE(b.check(0.514));
    REQUIRE(b.check(0.486));
    REQUIRE_FALSE(b.check(0.52));
    REQUIRE_FALSE(b.check(0.48));
  }
  SECTION("json round-trip") {
    const Assertion a{"detection_rate", Cmp::Ge, 0.9375, 0.0073};
    const Assertion back = Assertion::from_json(a.to_json());
    REQUIRE(back.metric == a.metric);
    REQUIRE(back.comparator == a.comparator);
    REQUIRE(back.bound == a.bound);
    REQUIRE(back.tolerance == a.tolerance);
    REQUIRE_THROWS_AS(Assertion::cmp_from("lt"), std::invalid_argument);
    nlohmann::json bad = a.to_json();
    bad["tolerance"] = -0.5;
    REQUIRE_THROWS_AS(Assertion::from_json(bad), std::invalid_argument);
  }
}

TEST_CASE("experiment specs validate their contract") {
  SECTION("trials must be positive") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 2, 2, 3, 0);
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
  }
  SECTION("assertions may only name produced metrics") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 2, 2, 3, 10);
    s.assertions = {{"mean_rounds", Assertion::Cmp::Le, 39.0, 0.0}};
    REQUIRE_THROWS_AS(s.validate(), std::invalid_argument);
    s.assertions = {{"detection_rate", Assertion::Cmp::Eq, 0.0, 0.0}};
    REQUIRE_NOTHROW(s.validate());
  }
  SECTION("kind-specific knobs are required") {
    ExperimentSpec c = base_spec(ExperimentKind::Counting, 3, 2, 4, 10);
    REQUIRE_THROWS_AS(c.validate(), std::invalid_argument);
    c.knobs = {{"hits", 2}};
    REQUIRE_NOTHROW(c.validate());
    ExperimentSpec w = base_spec(ExperimentKind::SwapTest, 1, 1, 1, 10);
    REQUIRE_THROWS_AS(w.validate(), std::invalid_argument);
    w.knobs = {{"overlap", 0.5}};
    REQUIRE_NOTHROW(w.validate());
    ExperimentSpec m = base_spec(ExperimentKind::Multiround, 3, 3, 4, 10);
    REQUIRE_THROWS_AS(m.validate(), std::invalid_argument);
    m.behavior = AttackSpec{"multiround", {{"d", "101"}}};
    REQUIRE_NOTHROW(m.validate());
  }
  SECTION("unknown names are rejected") {
    REQUIRE_THROWS_AS(experiment_kind_from("sampling"), std::invalid_argument);
    REQUIRE_THROWS_AS(strategy_kind_from("three_confusing"), std::invalid_argument);
  }
  SECTION("json round-trip reproduces the spec") {
    ExperimentSpec s = base_spec(ExperimentKind::Counting, 5, 4, 7, 500);
    s.name = "counting-error-budget";
    s.strategy = StrategyKind::OneConfusing;
    s.knobs = {{"hits", 8}};
    s.assertions = {{"success_rate", Assertion::Cmp::Ge, 0.75, 0.0}};
    const ExperimentSpec back = ExperimentSpec::from_json(s.to_json());
    REQUIRE(back.to_json() == s.to_json());
    REQUIRE(back.strategy == StrategyKind::OneConfusing);
    REQUIRE(back.knobs.at("hits").get<int>() == 8);
  }
}

TEST_CASE("known-support databases") {
  const BitString target = BitString::parse("0110");
  const Database db = known_support_db(3, 4, target, 5);
  REQUIRE(db.size() == 8);
  REQUIRE_NOTHROW(db.validate());
  for (std::size_t j = 0; j < 5; ++j) REQUIRE(db.record(j) == target.value);
  for (std::size_t j = 5; j < 8; ++j) REQUIRE(db.record(j) == 0);
  REQUIRE_THROWS_AS(known_support_db(3, 4, target, 9), std::invalid_argument);
  REQUIRE_THROWS_AS(known_support_db(3, 4, BitString::zeros(4), 2), std::invalid_argument);
  REQUIRE_THROWS_AS(known_support_db(3, 3, target, 2), std::invalid_argument);
}

TEST_CASE("detection experiments reproduce the per-round rates") {
  SECTION("honest behavior is never flagged, in either test procedure") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 3, 3, 3, 2000);
    s.assertions = {{"detection_rate", Assertion::Cmp::Eq, 0.0, 0.0}};
    const ExperimentResult r = run_experiment(s, 11);
    REQUIRE(r.pass());
    REQUIRE(r.metric("detection_rate").estimate == 0.0);
    REQUIRE(r.metric("pass_rate").estimate == 1.0);
    REQUIRE(r.db_calls == 0);

    ExperimentSpec s2 = base_spec(ExperimentKind::Detection, 2, 2, 3, 300);
    s2.knobs = {{"procedure", "test2"}, {"target", "01"}};
    const ExperimentResult r2 = run_experiment(s2, 12);
    REQUIRE(r2.metric("detection_rate").estimate == 0.0);
  }
  SECTION("a data measurement is caught half the time") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 3, 2, 3, 3000);
    s.behavior = AttackSpec{"attack2_measure", {{"scope", "data"}}};
    const ExperimentResult r = run_experiment(s, 13);
    REQUIRE(within_3sigma(r.metric("detection_rate").estimate, 0.5, 3000));
  }
  SECTION("an incompatible substitution is always caught under conditioned draws") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 3, 3, 3, 800);
    s.behavior = AttackSpec{"attack1_send", {{"address", "101"}, {"data", "000"}}};
    s.knobs = {{"condition", "data_not_in_pair"}};
    s.assertions = {{"detection_rate", Assertion::Cmp::Eq, 1.0, 0.0}};
    const ExperimentResult r = run_experiment(s, 14);
    REQUIRE(r.pass());
    REQUIRE(r.metric("detection_rate").estimate == 1.0);
  }
  SECTION("a guessed pair passes far below the likelihood cap") {
    ExperimentSpec s = base_spec(ExperimentKind::Detection, 3, 2, 3, 1500);
    s.behavior = AttackSpec{"attack1_guess_pair", {{"address", "011"}}};
    s.assertions = {{"pass_rate", Assertion::Cmp::Le, 1.0 / 8.0, 0.0}};
    const ExperimentResult r = run_experiment(s, 15);
    REQUIRE(r.pass());
  }
}

TEST_CASE("counting experiments track the error budget") {
  SECTION("known support meets the success fraction") {
    ExperimentSpec s = base_spec(ExperimentKind::Counting, 5, 4, 7, 200);
    s.knobs = {{"hits", 8}};
    s.assertions = {{"success_rate", Assertion::Cmp::Ge, 0.75, 0.0}};
    const ExperimentResult r = run_experiment(s, 21);
    REQUIRE(r.pass());
    REQUIRE(r.metric("success_rate").estimate >= 0.75);
    REQUIRE(r.metric("mean_abs_error").estimate < 0.1);
    REQUIRE(r.metric("max_abs_error").estimate >= r.metric("mean_abs_error").estimate);
    REQUIRE(r.protocol_runs == 200);
    REQUIRE(r.db_calls == 200 * 4 * 128);
  }
  SECTION("relative-error criterion at the corollary sizing") {
    ExperimentSpec s = base_spec(ExperimentKind::Counting, 5, 4, 8, 150);
    s.params.s_min = 0.2;
    s.knobs = {{"hits", 8}};
    s.assertions = {{"rel07_rate", Assertion::Cmp::Ge, 0.75, 0.0}};
    const ExperimentResult r = run_experiment(s, 22);
    REQUIRE(r.pass());
  }
  SECTION("zero support never escapes the quadratic ceiling") {
    ExperimentSpec s = base_spec(ExperimentKind::Counting, 5, 4, 7, 50);
    s.knobs = {{"hits", 0}};
    const double ceiling = std::numbers::pi * std::numbers::pi / (128.0 * 128.0);
    s.assertions = {{"max_estimate", Assertion::Cmp::Le, ceiling, 1e-9}};
    const ExperimentResult r = run_experiment(s, 23);
    REQUIRE(r.pass());
    REQUIRE(r.metric("success_rate").estimate == 1.0);
  }
}

TEST_CASE("cheat-round experiments sit inside the leakage budget") {
  ExperimentSpec s = base_spec(ExperimentKind::CheatRounds, 3, 3, 7, 400);
  s.params.p = 0.05;
  s.behavior = AttackSpec{"attack2_measure", {{"scope", "data"}}};
  s.assertions = {{"mean_rounds", Assertion::Cmp::Le, cheat_round_budget(0.05), 0.0}};
  const ExperimentResult r = run_experiment(s, 31);
  REQUIRE(r.pass());
  const MetricValue& m = r.metric("mean_rounds");
  REQUIRE(m.estimate > 5.0);
  REQUIRE(m.estimate < 39.0);
  REQUIRE(m.stddev > 0.0);
  const Interval ci = m.ci();
  REQUIRE(ci.lo < m.estimate);
  REQUIRE(ci.hi > m.estimate);
  REQUIRE(r.protocol_runs == 400);
}

TEST_CASE("multiround experiments") {
  SECTION("a data-only swap passes every run") {
    ExperimentSpec s = base_spec(ExperimentKind::Multiround, 3, 3, 4, 100);
    s.behavior = AttackSpec{"multiround", {{"d", "101"}}};
    s.assertions = {{"pass_rate", Assertion::Cmp::Eq, 1.0, 0.0}};
    const ExperimentResult r = run_experiment(s, 41);
    REQUIRE(r.pass());
    REQUIRE(r.metric("detection_rate").estimate == 0.0);
  }
  SECTION("an address-targeted swap reports complementary rates") {
    ExperimentSpec s = base_spec(ExperimentKind::Multiround, 3, 3, 4, 150);
    s.behavior = AttackSpec{"multiround", {{"d", "011"}, {"address", 5}}};
    const ExperimentResult r = run_experiment(s, 42);
    const double pass = r.metric("pass_rate").estimate;
    const double det = r.metric("detection_rate").estimate;
    REQUIRE(pass + det == 1.0);
    const Interval ci = r.metric("pass_rate").ci();
    REQUIRE(ci.lo <= pass);
    REQUIRE(ci.hi >= pass);
  }
}

TEST_CASE("fidelity experiments agree with the closed form") {
  ExperimentSpec s = base_spec(ExperimentKind::Fidelity, 3, 1, 1, 1);
  s.knobs = {{"hits", 1}};
  s.assertions = {{"fidelity", Assertion::Cmp::Eq, 0.5625, 1e-12},
                  {"fidelity_error", Assertion::Cmp::Le, 0.0, 1e-12}};
  const ExperimentResult r = run_experiment(s, 51);
  REQUIRE(r.pass());
  REQUIRE(r.metric("closed_form").estimate == Catch::Approx(0.5625).margin(1e-15));

  ExperimentSpec s5 = base_spec(ExperimentKind::Fidelity, 5, 1, 1, 1);
  s5.knobs = {{"hits", 1}};
  const ExperimentResult r5 = run_experiment(s5, 52);
  REQUIRE(r5.metric("fidelity").estimate == Catch::Approx(0.87890625).margin(1e-12));

  ExperimentSpec s0 = base_spec(ExperimentKind::Fidelity, 4, 1, 1, 1);
  s0.knobs = {{"hits", 0}};
  const ExperimentResult r0 = run_experiment(s0, 53);
  REQUIRE(r0.metric("fidelity").estimate == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("test-count experiments watch the tail") {
  SECTION("the default threshold is never reached at small p") {
    ExperimentSpec s = base_spec(ExperimentKind::TestCount, 1, 1, 6, 300);
    s.params.p = 0.05;
    s.assertions = {{"tail_rate", Assertion::Cmp::Le, 0.001, 0.0},
                    {"abort_rate", Assertion::Cmp::Le, 0.002, 0.0}};
    const ExperimentResult r = run_experiment(s, 61);
    REQUIRE(r.pass());
    REQUIRE(r.metric("tail_rate").estimate == 0.0);
    // Test rounds arrive at rate 2p per loop: 6.4 expected over 64 loops.
    REQUIRE(r.metric("mean_tests").estimate == Catch::Approx(6.4).margin(0.45));
  }
  SECTION("a tiny threshold makes the watchdog fire") {
    ExperimentSpec s = base_spec(ExperimentKind::TestCount, 1, 1, 6, 200);
    s.params.p = 0.05;
    s.knobs = {{"threshold_frac", 0.05}};
    const ExperimentResult r = run_experiment(s, 62);
    REQUIRE(r.metric("abort_rate").estimate > 0.5);
    REQUIRE(r.metric("abort_rate").estimate == r.metric("tail_rate").estimate);
  }
}

TEST_CASE("swap-test experiments match the overlap law") {
  auto swap_spec = [](double overlap, long trials) {
    ExperimentSpec s = base_spec(ExperimentKind::SwapTest, 1, 1, 1, trials);
    s.knobs = {{"overlap", overlap}};
    return s;
  };
  SECTION("identical states never fire") {
    const ExperimentResult r = run_experiment(swap_spec(1.0, 2000), 71);
    REQUIRE(r.metric("outcome1_rate").estimate == 0.0);
  }
  SECTION("orthogonal states fire half the time") {
    const ExperimentResult r = run_experiment(swap_spec(0.0, 4000), 72);
    REQUIRE(within_3sigma(r.metric("outcome1_rate").estimate, 0.5, 4000));
  }
  SECTION("partial overlap lands at (1 - overlap) / 2") {
    const ExperimentResult r = run_experiment(swap_spec(0.25, 4000), 73);
    REQUIRE(within_3sigma(r.metric("outcome1_rate").estimate, 0.375, 4000));
  }
  SECTION("overlap outside [0, 1] is rejected") {
    REQUIRE_THROWS_AS(run_experiment(swap_spec(1.5, 10), 74), std::invalid_argument);
  }
}

TEST_CASE("assertion outcomes carry the right intervals") {
  ExperimentSpec s = base_spec(ExperimentKind::Detection, 3, 2, 3, 1000);
  s.behavior = AttackSpec{"attack2_measure", {{"scope", "data"}}};
  s.assertions = {{"detection_rate", Assertion::Cmp::Ge, 0.4, 0.0},
                  {"detection_rate", Assertion::Cmp::Eq, 0.5, 0.05}};
  const ExperimentResult r = run_experiment(s, 81);
  REQUIRE(r.outcomes.size() == 2);
  // Lower-bounded claims get the one-sided interval, pinned at 1 above.
  REQUIRE(r.outcomes[0].ci.hi == 1.0);
  REQUIRE(r.outcomes[1].ci.hi < 1.0);
  REQUIRE(r.outcomes[0].ci.lo > r.outcomes[1].ci.lo);
  REQUIRE(r.outcomes[0].pass);
  REQUIRE(r.outcomes[1].pass);
}

TEST_CASE("experiments are deterministic for a fixed seed") {
  ExperimentSpec s = base_spec(ExperimentKind::Counting, 4, 3, 5, 20);
  s.knobs = {{"hits", 4}};
  s.assertions = {{"success_rate", Assertion::Cmp::Ge, 0.0, 0.0}};
  Report a, b;
  a.experiments.push_back(run_experiment(s, 90));
  b.experiments.push_back(run_experiment(s, 90));
  REQUIRE(a.payload().dump() == b.payload().dump());

  ExperimentSpec d = base_spec(ExperimentKind::Detection, 3, 2, 3, 200);
  d.behavior = AttackSpec{"attack2_measure", {{"scope", "data"}}};
  Report c, e;
  c.experiments.push_back(run_experiment(d, 91));
  e.experiments.push_back(run_experiment(d, 91));
  REQUIRE(c.payload().dump() == e.payload().dump());
}

TEST_CASE("reports round-trip and render to csv") {
  ExperimentSpec s1 = base_spec(ExperimentKind::SwapTest, 1, 1, 1, 500);
  s1.name = "swap";
  s1.knobs = {{"overlap", 1.0}};
  s1.assertions = {{"outcome1_rate", Assertion::Cmp::Eq, 0.0, 0.0}};
  ExperimentSpec s2 = base_spec(ExperimentKind::Fidelity, 3, 1, 1, 1);
  s2.name = "fidelity";
  s2.knobs = {{"hits", 1}};
  s2.assertions = {{"fidelity", Assertion::Cmp::Eq, 0.5625, 1e-12},
                   {"fidelity_error", Assertion::Cmp::Le, 0.0, 1e-12}};
  const Report rep = run_battery({s1, s2}, 7, 600000.0);
  REQUIRE(rep.experiments.size() == 2);
  REQUIRE(rep.pass());

  SECTION("json round-trip preserves the payload") {
    const Report back = Report::from_json(rep.to_json());
    REQUIRE(back.payload().dump() == rep.payload().dump());
  }
  SECTION("payload excludes wall-clock but keeps seeds") {
    const nlohmann::json p = rep.payload();
    for (const auto& e : p.at("experiments")) {
      REQUIRE_FALSE(e.contains("wall_ms"));
      REQUIRE(e.contains("seed"));
    }
    REQUIRE(rep.to_json().at("experiments")[0].contains("wall_ms"));
  }
  SECTION("csv has the pinned header and one row per assertion") {
    const std::string csv = rep.csv();
    REQUIRE(csv.rfind("experiment,metric,estimate,ci_lo,ci_hi,bound,pass\n", 0) == 0);
    REQUIRE(count_lines(csv) == 1 + 3);
    REQUIRE(csv.find("swap,outcome1_rate,0.0,") != std::string::npos);
    REQUIRE(csv.find("fidelity,fidelity,0.562") != std::string::npos);
  }
  SECTION("empty reports are valid") {
    const Report empty;
    REQUIRE(empty.pass());
    REQUIRE(count_lines(empty.csv()) == 1);
    const Report back = Report::from_json(empty.to_json());
    REQUIRE(back.experiments.empty());
  }
  SECTION("a zero budget skips every experiment, visibly") {
    const Report skipped = run_battery({s1, s2}, 7, 0.0);
    REQUIRE(skipped.experiments.size() == 2);
    for (const auto& e : skipped.experiments) {
      REQUIRE(e.skipped);
      REQUIRE(e.metrics.empty());
    }
    const Report back = Report::from_json(skipped.to_json());
    REQUIRE(back.experiments[0].skipped);
  }
}

TEST_CASE("report files land on disk or fail loudly") {
  ExperimentSpec s = base_spec(ExperimentKind::Fidelity, 3, 1, 1, 1);
  s.name = "fidelity";
  s.knobs = {{"hits", 1}};
  s.assertions = {{"fidelity", Assertion::Cmp::Eq, 0.5625, 1e-12}};
  Report rep;
  rep.experiments.push_back(run_experiment(s, 3));

  SECTION("json file parses back") {
    const std::string path = "harness_report_test.json";
    emit_report(rep, ReportFormat::Json, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json j;
    in >> j;
    REQUIRE(j.at("experiments").size() == 1);
    REQUIRE(j.at("pass").get<bool>());
    std::remove(path.c_str());
  }
  SECTION("csv file carries one row per assertion") {
    const std::string path = "harness_report_test.csv";
    emit_report(rep, ReportFormat::Csv, path);
    std::ifstream in(path);
    std::stringstream buf;
    buf << in.rdbuf();
    REQUIRE(count_lines(buf.str()) == 2);
    std::remove(path.c_str());
  }
  SECTION("unwritable paths surface the path in the error") {
    const std::string path = "no-such-dir-qpm/report.json";
    try {
      emit_report(rep, ReportFormat::Json, path);
      FAIL("expected IoError");
    } catch (const IoError& e) {
      REQUIRE(std::string(e.what()).find(path) != std::string::npos);
    }
  }
  SECTION("format names parse") {
    REQUIRE(report_format_from("json") == ReportFormat::Json);
    REQUIRE(report_format_from("csv") == ReportFormat::Csv);
    REQUIRE_THROWS_AS(report_format_from("xml"), std::invalid_argument);
  }
}

TEST_CASE("the default battery covers each standing claim exactly once") {
  const auto specs = default_battery();
  REQUIRE(specs.size() == 22);
  std::set<std::string> names;
  for (const auto& s : specs) {
    REQUIRE_NOTHROW(s.validate());
    names.insert(s.name);
  }
  REQUIRE(names.size() == specs.size());
  const std::set<std::string> want = {"honest-test-round",
                                      "attack1-incompatible-pair",
                                      "attack1-guessed-pair",
                                      "attack2-data",
                                      "attack2-address-data",
                                      "attack3-full-copy",
                                      "attack3-data-copy",
                                      "recovery-computational-n2",
                                      "recovery-test-basis-n2",
                                      "recovery-computational-n3",
                                      "recovery-test-basis-n3",
                                      "counting-error-budget",
                                      "counting-relative-error",
                                      "counting-zero-support",
                                      "cheat-rounds",
                                      "multiround-full-run",
                                      "phase-flip-fidelity-n3",
                                      "phase-flip-fidelity-n5",
                                      "test-count-tail",
                                      "swap-test-orthogonal",
                                      "swap-test-partial",
                                      "swap-test-identical"};
  REQUIRE(names == want);

  SECTION("every spec carries at least one assertion") {
    for (const auto& s : specs) REQUIRE_FALSE(s.assertions.empty());
  }
  SECTION("scaling shrinks trials but never below one") {
    const auto small = default_battery(0.01);
    REQUIRE(small.size() == specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
      REQUIRE(small[i].trials >= 1);
      REQUIRE(small[i].trials <= specs[i].trials);
      REQUIRE(small[i].name == specs[i].name);
    }
    REQUIRE_THROWS_AS(default_battery(0.0), std::invalid_argument);
  }
}

TEST_CASE("invariant suite passes at the full caps and self-tests its teeth") {
  const auto t0 = std::chrono::steady_clock::now();
  const Report rep = invariant_suite({3, 3, 3}, 5);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(ms < 60000.0);
  REQUIRE(rep.pass());
  REQUIRE(rep.experiments.size() == 5);
  const std::set<std::string> want = {"basis-enumeration", "pair-decompositions",
                                      "strategy-identities", "honest-completeness",
                                      "control-schedule"};
  std::set<std::string> got;
  for (const auto& e : rep.experiments) {
    got.insert(e.name);
    REQUIRE(e.failures.empty());
    REQUIRE(e.metric("checks").estimate > 0.0);
    REQUIRE(e.metric("failures").estimate == 0.0);
  }
  REQUIRE(got == want);

  SECTION("a sign-flipped iterate is caught and named") {
    const Report bad = invariant_suite({3, 3, 3}, 5, true);
    REQUIRE_FALSE(bad.pass());
    bool found = false;
    for (const auto& e : bad.experiments) {
      if (e.name != "strategy-identities") {
        REQUIRE(e.failures.empty());
        continue;
      }
      found = true;
      REQUIRE_FALSE(e.pass());
      REQUIRE_FALSE(e.failures.empty());
      REQUIRE(e.failures[0].find("window identity") != std::string::npos);
      REQUIRE(e.failures[0].find("control") != std::string::npos);
    }
    REQUIRE(found);
  }
  SECTION("caps must be positive") {
    REQUIRE_THROWS_AS(invariant_suite({0, 1, 1}, 1), std::invalid_argument);
  }
}
