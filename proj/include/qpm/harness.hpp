#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpm/adversary.hpp"
#include "qpm/database.hpp"
#include "qpm/oracles.hpp"
#include "qpm/predicate.hpp"
#include "qpm/protocol.hpp"
#include "qpm/rng.hpp"
#include "qpm/statevector.hpp"
#include "qpm/strategy.hpp"
#include "qpm/teststates.hpp"

namespace qpm {

// ---- Confidence intervals --------------------------------------------------

inline constexpr double z_two_sided_95 = 1.959963984540054;
inline constexpr double z_one_sided_95 = 1.6448536269514722;

// Expected one-round attacks a data-measuring Bob lands before detection.
inline double cheat_round_budget(double p) { return 2.0 / p - 1.0; }

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Wilson score interval for a binomial rate; never leaves [0, 1].
inline Interval wilson_interval(long successes, long trials, double z = z_two_sided_95) {
  if (trials < 1) throw std::invalid_argument("wilson_interval: empty sample");
  if (successes < 0 || successes > trials)
    throw std::invalid_argument("wilson_interval: bad success count");
  const double nt = double(trials);
  const double ph = double(successes) / nt;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nt;
  const double center = (ph + z2 / (2.0 * nt)) / denom;
  const double half = (z / denom) * std::sqrt(ph * (1.0 - ph) / nt + z2 / (4.0 * nt * nt));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// One-sided 95% lower bound for claims of the form "rate is at least b".
inline Interval wilson_lower(long successes, long trials) {
  return {wilson_interval(successes, trials, z_one_sided_95).lo, 1.0};
}

// ---- Assertions -------------------------------------------------------------

struct Assertion {
  enum class Cmp { Le, Ge, Eq };
  std::string metric;
  Cmp comparator = Cmp::Le;
  double bound = 0.0;
  double tolerance = 0.0;

  bool check(double estimate) const {
    switch (comparator) {
      case Cmp::Le: return estimate <= bound + tolerance;
      case Cmp::Ge: return estimate >= bound - tolerance;
      case Cmp::Eq: return std::abs(estimate - bound) <= tolerance;
    }
    return false;
  }

  static const char* cmp_name(Cmp c) {
    switch (c) {
      case Cmp::Le: return "le";
      case Cmp::Ge: return "ge";
      case Cmp::Eq: return "eq";
    }
    return "?";
  }

  static Cmp cmp_from(std::string_view s) {
    if (s == "le") return Cmp::Le;
    if (s == "ge") return Cmp::Ge;
    if (s == "eq") return Cmp::Eq;
    throw std::invalid_argument("assertion: unknown comparator '" + std::string(s) + "'");
  }

  nlohmann::json to_json() const {
    return {{"metric", metric},
            {"comparator", cmp_name(comparator)},
            {"bound", bound},
            {"tolerance", tolerance}};
  }

  static Assertion from_json(const nlohmann::json& j) {
    Assertion a;
    a.metric = j.at("metric").get<std::string>();
    a.comparator = cmp_from(j.at("comparator").get<std::string>());
    a.bound = j.at("bound").get<double>();
    a.tolerance = j.at("tolerance").get<double>();
    if (a.tolerance < 0.0) throw std::invalid_argument("assertion: negative tolerance");
    return a;
  }
};

// ---- Experiment descriptions -------------------------------------------------

enum class ExperimentKind {
  Detection,    // isolated honesty-test rounds against a behavior
  Counting,     // honest full runs on a database of known support
  CheatRounds,  // full runs, mean loops a cheating Bob survives
  Multiround,   // full runs with a function-swapping Bob
  Fidelity,     // phase-flip overlap, state route vs closed form
  TestCount,    // honest full runs, test-round tail and abort rates
  SwapTest,     // bare swap test on states of known overlap
};

inline const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Detection: return "detection";
    case ExperimentKind::Counting: return "counting";
    case ExperimentKind::CheatRounds: return "cheat_rounds";
    case ExperimentKind::Multiround: return "multiround";
    case ExperimentKind::Fidelity: return "fidelity";
    case ExperimentKind::TestCount: return "test_count";
    case ExperimentKind::SwapTest: return "swap_test";
  }
  return "?";
}

inline ExperimentKind experiment_kind_from(std::string_view s) {
  if (s == "detection") return ExperimentKind::Detection;
  if (s == "counting") return ExperimentKind::Counting;
  if (s == "cheat_rounds") return ExperimentKind::CheatRounds;
  if (s == "multiround") return ExperimentKind::Multiround;
  if (s == "fidelity") return ExperimentKind::Fidelity;
  if (s == "test_count") return ExperimentKind::TestCount;
  if (s == "swap_test") return ExperimentKind::SwapTest;
  throw std::invalid_argument("experiment: unknown kind '" + std::string(s) + "'");
}

// Fixed metric set each kind produces; assertions may only name these.
inline const std::vector<std::string>& experiment_metrics(ExperimentKind k) {
  static const std::vector<std::string> detection = {"detection_rate", "pass_rate"};
  static const std::vector<std::string> counting = {"success_rate", "rel07_rate",
                                                    "mean_abs_error", "max_abs_error",
                                                    "max_estimate"};
  static const std::vector<std::string> cheat = {"mean_rounds"};
  static const std::vector<std::string> multi = {"pass_rate", "detection_rate"};
  static const std::vector<std::string> fid = {"fidelity", "closed_form", "fidelity_error"};
  static const std::vector<std::string> tcount = {"tail_rate", "abort_rate", "mean_tests"};
  static const std::vector<std::string> swap = {"outcome1_rate"};
  switch (k) {
    case ExperimentKind::Detection: return detection;
    case ExperimentKind::Counting: return counting;
    case ExperimentKind::CheatRounds: return cheat;
    case ExperimentKind::Multiround: return multi;
    case ExperimentKind::Fidelity: return fid;
    case ExperimentKind::TestCount: return tcount;
    case ExperimentKind::SwapTest: return swap;
  }
  throw std::logic_error("experiment_metrics: unreachable");
}

inline const char* strategy_kind_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::Trivial: return "trivial";
    case StrategyKind::OneConfusing: return "one_confusing";
    case StrategyKind::TwoConfusing: return "two_confusing";
  }
  return "?";
}

inline StrategyKind strategy_kind_from(std::string_view s) {
  if (s == "trivial") return StrategyKind::Trivial;
  if (s == "one_confusing") return StrategyKind::OneConfusing;
  if (s == "two_confusing") return StrategyKind::TwoConfusing;
  throw std::invalid_argument("strategy: unknown kind '" + std::string(s) + "'");
}

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::Detection;
  ProtocolParams params;
  AttackSpec behavior;  // kind "honest" for honest parties
  long trials = 1;
  StrategyKind strategy = StrategyKind::Trivial;
  nlohmann::json knobs = nlohmann::json::object();  // kind-specific extras
  std::vector<Assertion> assertions;

  void validate() const {
    if (name.empty()) throw std::invalid_argument("experiment: empty name");
    if (trials < 1) throw std::invalid_argument("experiment '" + name + "': trials must be >= 1");
    params.validate();
    const auto& known = AttackSpec::kinds();
    if (std::find(known.begin(), known.end(), behavior.kind) == known.end())
      throw std::invalid_argument("experiment '" + name + "': unknown behavior '" +
                                  behavior.kind + "'");
    const auto& metrics = experiment_metrics(kind);
    for (const Assertion& a : assertions) {
      if (std::find(metrics.begin(), metrics.end(), a.metric) == metrics.end())
        throw std::invalid_argument("experiment '" + name + "': metric '" + a.metric +
                                    "' is not produced by kind '" +
                                    experiment_kind_name(kind) + "'");
      if (a.tolerance < 0.0)
        throw std::invalid_argument("experiment '" + name + "': negative tolerance");
    }
    if (kind == ExperimentKind::Counting && !knobs.contains("hits"))
      throw std::invalid_argument("experiment '" + name + "': counting needs knobs.hits");
    if (kind == ExperimentKind::Fidelity && !knobs.contains("hits"))
      throw std::invalid_argument("experiment '" + name + "': fidelity needs knobs.hits");
    if (kind == ExperimentKind::SwapTest && !knobs.contains("overlap"))
      throw std::invalid_argument("experiment '" + name + "': swap test needs knobs.overlap");
    if (kind == ExperimentKind::Multiround && behavior.kind != "multiround")
      throw std::invalid_argument("experiment '" + name + "': behavior must be multiround");
  }

  nlohmann::json to_json() const {
    return {{"name", name},
            {"kind", experiment_kind_name(kind)},
            {"params",
             {{"n", params.n},
              {"k", params.k},
              {"t", params.t},
              {"p", params.p},
              {"s_min", params.s_min},
              {"per_copy_theta", params.per_copy_theta}}},
            {"behavior", behavior.to_json()},
            {"trials", trials},
            {"strategy", strategy_kind_name(strategy)},
            {"knobs", knobs},
            {"assertions", [this] {
               nlohmann::json arr = nlohmann::json::array();
               for (const Assertion& a : assertions) arr.push_back(a.to_json());
               return arr;
             }()}};
  }

  static ExperimentSpec from_json(const nlohmann::json& j) {
    ExperimentSpec s;
    s.name = j.at("name").get<std::string>();
    s.kind = experiment_kind_from(j.at("kind").get<std::string>());
    const auto& p = j.at("params");
    s.params.n = p.at("n").get<int>();
    s.params.k = p.at("k").get<int>();
    s.params.t = p.at("t").get<int>();
    if (p.contains("p")) s.params.p = p.at("p").get<double>();
    if (p.contains("s_min")) s.params.s_min = p.at("s_min").get<double>();
    if (p.contains("per_copy_theta")) s.params.per_copy_theta = p.at("per_copy_theta").get<bool>();
    if (j.contains("behavior")) s.behavior = AttackSpec::from_json(j.at("behavior"));
    s.trials = j.at("trials").get<long>();
    if (j.contains("strategy")) s.strategy = strategy_kind_from(j.at("strategy").get<std::string>());
    if (j.contains("knobs")) s.knobs = j.at("knobs");
    if (j.contains("assertions"))
      for (const auto& a : j.at("assertions")) s.assertions.push_back(Assertion::from_json(a));
    s.validate();
    return s;
  }
};

// ---- Results -----------------------------------------------------------------

// One measured quantity. Rates keep their binomial support for Wilson
// intervals; sample means keep their spread; everything else is exact.
struct MetricValue {
  double estimate = 0.0;
  bool rate = false;
  long successes = 0;
  long trials = 0;
  double stddev = 0.0;
  long samples = 0;

  Interval ci(bool lower_only = false) const {
    if (rate) return lower_only ? wilson_lower(successes, trials) : wilson_interval(successes, trials);
    if (samples > 1) {
      const double half = z_two_sided_95 * stddev / std::sqrt(double(samples));
      return {estimate - half, estimate + half};
    }
    return {estimate, estimate};
  }

  nlohmann::json to_json() const {
    const Interval c = ci();
    return {{"estimate", estimate}, {"rate", rate},       {"successes", successes},
            {"trials", trials},     {"stddev", stddev},   {"samples", samples},
            {"ci_lo", c.lo},        {"ci_hi", c.hi}};
  }

  static MetricValue from_json(const nlohmann::json& j) {
    MetricValue m;
    m.estimate = j.at("estimate").get<double>();
    m.rate = j.at("rate").get<bool>();
    m.successes = j.at("successes").get<long>();
    m.trials = j.at("trials").get<long>();
    m.stddev = j.at("stddev").get<double>();
    m.samples = j.at("samples").get<long>();
    return m;
  }
};

struct AssertionOutcome {
  Assertion assertion;
  double estimate = 0.0;
  Interval ci;
  bool pass = false;
};

struct ExperimentResult {
  std::string name;
  std::string kind;
  long trials = 0;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  bool skipped = false;
  std::vector<std::pair<std::string, MetricValue>> metrics;
  std::vector<AssertionOutcome> outcomes;
  std::vector<std::string> failures;  // identity violations, with parameters
  // Abstract cost bookkeeping: each completed loop costs four database
  // calls (two copies, query and unquery); test rounds touch no records.
  long db_calls = 0;
  long protocol_runs = 0;
  long probed_rules = 0;

  const MetricValue& metric(const std::string& name_) const {
    for (const auto& [mn, mv] : metrics)
      if (mn == name_) return mv;
    throw std::out_of_range("experiment '" + name + "': no metric '" + name_ + "'");
  }

  bool has_metric(const std::string& name_) const {
    for (const auto& [mn, mv] : metrics)
      if (mn == name_) return true;
    return false;
  }

  bool pass() const {
    if (skipped) return true;
    if (!failures.empty()) return false;
    for (const AssertionOutcome& o : outcomes)
      if (!o.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json ms = nlohmann::json::object();
    for (const auto& [mn, mv] : metrics) ms[mn] = mv.to_json();
    nlohmann::json as = nlohmann::json::array();
    for (const AssertionOutcome& o : outcomes)
      as.push_back({{"metric", o.assertion.metric},
                    {"comparator", Assertion::cmp_name(o.assertion.comparator)},
                    {"bound", o.assertion.bound},
                    {"tolerance", o.assertion.tolerance},
                    {"estimate", o.estimate},
                    {"ci_lo", o.ci.lo},
                    {"ci_hi", o.ci.hi},
                    {"pass", o.pass}});
    return {{"name", name},
            {"kind", kind},
            {"trials", trials},
            {"seed", seed},
            {"wall_ms", wall_ms},
            {"skipped", skipped},
            {"metrics", ms},
            {"assertions", as},
            {"failures", failures},
            {"db_calls", db_calls},
            {"protocol_runs", protocol_runs},
            {"probed_rules", probed_rules},
            {"pass", pass()}};
  }

  static ExperimentResult from_json(const nlohmann::json& j) {
    ExperimentResult r;
    r.name = j.at("name").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.trials = j.at("trials").get<long>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("wall_ms")) r.wall_ms = j.at("wall_ms").get<double>();
    r.skipped = j.at("skipped").get<bool>();
    for (const auto& [mn, mv] : j.at("metrics").items())
      r.metrics.emplace_back(mn, MetricValue::from_json(mv));
    for (const auto& a : j.at("assertions")) {
      AssertionOutcome o;
      o.assertion.metric = a.at("metric").get<std::string>();
      o.assertion.comparator = Assertion::cmp_from(a.at("comparator").get<std::string>());
      o.assertion.bound = a.at("bound").get<double>();
      o.assertion.tolerance = a.at("tolerance").get<double>();
      o.estimate = a.at("estimate").get<double>();
      o.ci = {a.at("ci_lo").get<double>(), a.at("ci_hi").get<double>()};
      o.pass = a.at("pass").get<bool>();
      r.outcomes.push_back(std::move(o));
    }
    for (const auto& f : j.at("failures")) r.failures.push_back(f.get<std::string>());
    r.db_calls = j.at("db_calls").get<long>();
    r.protocol_runs = j.at("protocol_runs").get<long>();
    r.probed_rules = j.at("probed_rules").get<long>();
    return r;
  }
};

struct Report {
  std::vector<ExperimentResult> experiments;

  bool pass() const {
    for (const ExperimentResult& e : experiments)
      if (!e.pass()) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const ExperimentResult& e : experiments) arr.push_back(e.to_json());
    return {{"experiments", arr}, {"pass", pass()}};
  }

  // Deterministic content: the full report minus wall-clock times.
  nlohmann::json payload() const {
    nlohmann::json j = to_json();
    for (auto& e : j.at("experiments")) e.erase("wall_ms");
    return j;
  }

  static Report from_json(const nlohmann::json& j) {
    Report r;
    for (const auto& e : j.at("experiments"))
      r.experiments.push_back(ExperimentResult::from_json(e));
    return r;
  }

  // One row per assertion, numbers in their shortest round-trip form.
  std::string csv() const {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::string out = "experiment,metric,estimate,ci_lo,ci_hi,bound,pass\n";
    for (const ExperimentResult& e : experiments)
      for (const AssertionOutcome& o : e.outcomes)
        out += e.name + "," + o.assertion.metric + "," + num(o.estimate) + "," + num(o.ci.lo) +
               "," + num(o.ci.hi) + "," + num(o.assertion.bound) + "," + (o.pass ? "1" : "0") +
               "\n";
    return out;
  }
};

// ---- Experiment runners --------------------------------------------------------

// Database with exactly `hits` records matching `target` (the remaining
// records are all-zero, which a nonzero target never matches).
inline Database known_support_db(int n, int k, const BitString& target, long hits) {
  if (target.width != k) throw std::invalid_argument("known_support_db: target width mismatch");
  if (target.value == 0) throw std::invalid_argument("known_support_db: target must be nonzero");
  const long count = long(1) << n;
  if (hits < 0 || hits > count) throw std::invalid_argument("known_support_db: bad hit count");
  Database db;
  db.k = k;
  db.transactions.reserve(std::size_t(count));
  for (long j = 0; j < count; ++j)
    db.transactions.emplace_back(j < hits ? target.value : 0u, k);
  return db;
}

namespace detail {

inline MetricValue rate_metric(long successes, long trials) {
  MetricValue m;
  m.rate = true;
  m.successes = successes;
  m.trials = trials;
  m.estimate = double(successes) / double(trials);
  return m;
}

inline MetricValue mean_metric(const std::vector<double>& samples) {
  MetricValue m;
  m.samples = long(samples.size());
  double sum = 0.0;
  for (double v : samples) sum += v;
  m.estimate = sum / double(samples.size());
  if (samples.size() > 1) {
    double sq = 0.0;
    for (double v : samples) sq += (v - m.estimate) * (v - m.estimate);
    m.stddev = std::sqrt(sq / double(samples.size() - 1));
  }
  return m;
}

inline MetricValue exact_metric(double v) {
  MetricValue m;
  m.estimate = v;
  return m;
}

inline BitString default_target(int k) { return BitString::zeros(k).with_bit(k - 1, 1); }

inline BitString knob_target(const nlohmann::json& knobs, int k) {
  if (knobs.contains("target")) {
    const BitString t = BitString::parse(knobs.at("target").get<std::string>());
    if (t.width != k) throw std::invalid_argument("experiment: target width mismatch");
    return t;
  }
  return default_target(k);
}

// Per-round detection frequency of a behavior under one honesty test.
inline void run_detection(const ExperimentSpec& spec, std::uint64_t seed, ExperimentResult& res) {
  const ProtocolParams& pp = spec.params;
  Rng root(seed);
  Rng srng = root.fork("strategy");
  const Strategy s =
      make_strategy(Predicate::inclusion(knob_target(spec.knobs, pp.k)), spec.strategy, pp.t, srng);
  const BobBehavior bob = make_bob_behavior(spec.behavior, pp.n, pp.k);
  const bool second = spec.knobs.value("procedure", std::string("test1")) == "test2";
  // Conditioned draws keep the smuggled data value out of the test pair,
  // which makes the substitution incompatible with every accepted outcome.
  std::optional<BitString> avoid;
  if (spec.knobs.value("condition", std::string()) == "data_not_in_pair")
    avoid = BitString::parse(spec.behavior.params.at("data").get<std::string>());
  Rng trng = root.fork("trials");
  long detected = 0;
  for (long i = 0; i < spec.trials; ++i) {
    std::optional<Detection> det;
    if (avoid) {
      TestDraw d = draw_test_params(pp.n, pp.k, pp.t, trng);
      while (d.mu.value == avoid->value || d.nu.value == avoid->value)
        d = draw_test_params(pp.n, pp.k, pp.t, trng);
      det = second ? test_bob2(s, bob, pp, trng, nullptr, &d)
                   : test_bob1(1, s, bob, pp, trng, nullptr, &d);
    } else {
      det = second ? test_bob2(s, bob, pp, trng) : test_bob1(1, s, bob, pp, trng);
    }
    if (det) ++detected;
  }
  res.metrics.emplace_back("detection_rate", rate_metric(detected, spec.trials));
  res.metrics.emplace_back("pass_rate", rate_metric(spec.trials - detected, spec.trials));
}

// Honest counting runs on a database of known support. Success follows
// the phase-estimation error budget 2*pi*sqrt(s)/T + pi^2/T^2.
inline void run_counting(const ExperimentSpec& spec, std::uint64_t seed, ExperimentResult& res) {
  ProtocolParams pp = spec.params;
  const long hits = spec.knobs.at("hits").get<long>();
  const BitString target = knob_target(spec.knobs, pp.k);
  const Database db = known_support_db(pp.n, pp.k, target, hits);
  const double s_true = double(hits) / double(std::size_t(1) << pp.n);
  Rng root(seed);
  Rng srng = root.fork("strategy");
  const Strategy s = make_strategy(Predicate::inclusion(target), spec.strategy, pp.t, srng);
  const double t_eff = double(s.effective_T());
  const double budget = 2.0 * std::numbers::pi * std::sqrt(s_true) / t_eff +
                        std::numbers::pi * std::numbers::pi / (t_eff * t_eff);
  Rng trng = root.fork("trials");
  long ok = 0, rel_ok = 0;
  double max_err = 0.0, max_est = 0.0;
  std::vector<double> errs;
  errs.reserve(std::size_t(spec.trials));
  for (long i = 0; i < spec.trials; ++i) {
    pp.seed = trng.next_u64();
    const CountOutcome out = run_main(db, s, {}, {}, pp);
    if (out.terminated) throw std::logic_error("counting: honest run terminated");
    const double est = 0.5 * (out.s1 + out.s2);
    const double err = std::abs(est - s_true);
    if (err < budget) ++ok;
    if (s_true > 0.0 ? err < 0.07 * s_true : est == 0.0) ++rel_ok;
    errs.push_back(err);
    max_err = std::max(max_err, err);
    max_est = std::max(max_est, est);
    ++res.protocol_runs;
    res.db_calls += 4 * long(pp.big_T());
  }
  res.metrics.emplace_back("success_rate", rate_metric(ok, spec.trials));
  res.metrics.emplace_back("rel07_rate", rate_metric(rel_ok, spec.trials));
  res.metrics.emplace_back("mean_abs_error", mean_metric(errs));
  res.metrics.emplace_back("max_abs_error", exact_metric(max_err));
  res.metrics.emplace_back("max_estimate", exact_metric(max_est));
}

// Mean loops a cheating Bob survives across full runs; completed runs
// count all T loops.
inline void run_cheat_rounds(const ExperimentSpec& spec, std::uint64_t seed,
                             ExperimentResult& res) {
  ProtocolParams pp = spec.params;
  Rng root(seed);
  Rng drng = root.fork("db");
  const Database db = Database::random(pp.n, pp.k, drng);
  Rng srng = root.fork("strategy");
  const Strategy s =
      make_strategy(Predicate::inclusion(knob_target(spec.knobs, pp.k)), spec.strategy, pp.t, srng);
  const BobBehavior bob = make_bob_behavior(spec.behavior, pp.n, pp.k);
  Rng trng = root.fork("trials");
  std::vector<double> rounds;
  rounds.reserve(std::size_t(spec.trials));
  for (long i = 0; i < spec.trials; ++i) {
    pp.seed = trng.next_u64();
    const CountOutcome out = run_main(db, s, {}, bob, pp);
    const double survived = double(out.detection ? out.detection->loop : pp.big_T());
    rounds.push_back(survived);
    ++res.protocol_runs;
    res.db_calls += 4 * long(survived);
  }
  res.metrics.emplace_back("mean_rounds", mean_metric(rounds));
}

// Full runs with a function-swapping Bob whose declared strategy computes
// the same swapped function, so every test round stays consistent.
inline void run_multiround(const ExperimentSpec& spec, std::uint64_t seed, ExperimentResult& res) {
  ProtocolParams pp = spec.params;
  if (spec.behavior.kind != "multiround")
    throw std::invalid_argument("multiround: behavior must be multiround");
  const BitString d = BitString::parse(spec.behavior.params.at("d").get<std::string>());
  Predicate g = Predicate::delta(d);
  if (spec.behavior.params.contains("address"))
    g = Predicate::address_delta(spec.behavior.params.at("address").get<std::uint32_t>(),
                                 Predicate::delta(d));
  Rng root(seed);
  Rng drng = root.fork("db");
  const Database db = Database::random(pp.n, pp.k, drng);
  Rng srng = root.fork("strategy");
  const Strategy s = make_strategy(g, spec.strategy, pp.t, srng);
  const BobBehavior bob = make_bob_behavior(spec.behavior, pp.n, pp.k);
  Rng trng = root.fork("trials");
  long passed = 0;
  for (long i = 0; i < spec.trials; ++i) {
    pp.seed = trng.next_u64();
    const CountOutcome out = run_main(db, s, {}, bob, pp);
    if (!out.terminated) ++passed;
    ++res.protocol_runs;
    res.db_calls += 4 * long(out.detection ? out.detection->loop : pp.big_T());
  }
  res.metrics.emplace_back("pass_rate", rate_metric(passed, spec.trials));
  res.metrics.emplace_back("detection_rate", rate_metric(spec.trials - passed, spec.trials));
}

// Overlap lost to a phase flip on `hits` components, computed through the
// state and through the closed form; the two routes must agree.
inline void run_fidelity(const ExperimentSpec& spec, std::uint64_t, ExperimentResult& res) {
  const int hits = spec.knobs.at("hits").get<int>();
  const double via_state = phase_flip_fidelity_state(spec.params.n, hits);
  const double closed = phase_flip_fidelity(spec.params.n, hits);
  res.metrics.emplace_back("fidelity", exact_metric(via_state));
  res.metrics.emplace_back("closed_form", exact_metric(closed));
  res.metrics.emplace_back("fidelity_error", exact_metric(std::abs(via_state - closed)));
}

// Honest full runs with Bob's test-count watchdog armed: the tail event
// (observed test rounds reaching the threshold) and the resulting aborts.
inline void run_test_count(const ExperimentSpec& spec, std::uint64_t seed, ExperimentResult& res) {
  ProtocolParams pp = spec.params;
  const double frac = spec.knobs.value("threshold_frac", 0.4);
  const long threshold = long(std::ceil(frac * double(pp.big_T())));
  Rng root(seed);
  Rng drng = root.fork("db");
  const Database db = Database::random(pp.n, pp.k, drng);
  Rng srng = root.fork("strategy");
  const Strategy s =
      make_strategy(Predicate::inclusion(knob_target(spec.knobs, pp.k)), spec.strategy, pp.t, srng);
  BobBehavior bob;
  bob.test_count_limit = threshold - 1;  // aborts on the threshold-th test
  Rng trng = root.fork("trials");
  long tail = 0, aborts = 0;
  std::vector<double> counts;
  counts.reserve(std::size_t(spec.trials));
  for (long i = 0; i < spec.trials; ++i) {
    pp.seed = trng.next_u64();
    const CountOutcome out = run_main(db, s, {}, bob, pp);
    long nt = 0;
    for (const RoundRecord& rec : out.transcript.rounds)
      if (rec.kind == RoundRecord::Kind::Test1) ++nt;
    const bool aborted =
        out.detection && out.detection->reason == Detection::Reason::TestCountLimit;
    if (aborted || nt >= threshold) ++tail;
    if (aborted) ++aborts;
    counts.push_back(double(nt));
    ++res.protocol_runs;
    res.db_calls += 4 * long(out.detection ? out.detection->loop : pp.big_T());
  }
  res.metrics.emplace_back("tail_rate", rate_metric(tail, spec.trials));
  res.metrics.emplace_back("abort_rate", rate_metric(aborts, spec.trials));
  res.metrics.emplace_back("mean_tests", mean_metric(counts));
}

// Bare swap test on single-qubit states of known overlap; outcome 1 fires
// with probability (1 - overlap) / 2 and never fires on identical states.
inline void run_swap_test(const ExperimentSpec& spec, std::uint64_t seed, ExperimentResult& res) {
  const double overlap = spec.knobs.at("overlap").get<double>();
  if (overlap < 0.0 || overlap > 1.0)
    throw std::invalid_argument("swap test: overlap must lie in [0, 1]");
  Rng trng = Rng(seed).fork("trials");
  long ones = 0;
  for (long i = 0; i < spec.trials; ++i) {
    StateVector anc(1);
    apply_h(anc, 0);
    StateVector a(1);
    StateVector b(1);
    b.amp(0) = std::sqrt(overlap);
    b.amp(1) = std::sqrt(1.0 - overlap);
    StateVector joint = kron(kron(anc, a), b);
    if (swap_test(joint, trng) == 1) ++ones;
  }
  res.metrics.emplace_back("outcome1_rate", rate_metric(ones, spec.trials));
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentSpec& spec, std::uint64_t seed) {
  spec.validate();
  ExperimentResult res;
  res.name = spec.name;
  res.kind = experiment_kind_name(spec.kind);
  res.trials = spec.trials;
  res.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  switch (spec.kind) {
    case ExperimentKind::Detection: detail::run_detection(spec, seed, res); break;
    case ExperimentKind::Counting: detail::run_counting(spec, seed, res); break;
    case ExperimentKind::CheatRounds: detail::run_cheat_rounds(spec, seed, res); break;
    case ExperimentKind::Multiround: detail::run_multiround(spec, seed, res); break;
    case ExperimentKind::Fidelity: detail::run_fidelity(spec, seed, res); break;
    case ExperimentKind::TestCount: detail::run_test_count(spec, seed, res); break;
    case ExperimentKind::SwapTest: detail::run_swap_test(spec, seed, res); break;
  }
  res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  for (const Assertion& a : spec.assertions) {
    const MetricValue& mv = res.metric(a.metric);
    AssertionOutcome o;
    o.assertion = a;
    o.estimate = mv.estimate;
    o.ci = mv.ci(a.comparator == Assertion::Cmp::Ge);
    o.pass = a.check(mv.estimate);
    res.outcomes.push_back(std::move(o));
  }
  return res;
}

// Runs experiments in order; once the wall-clock budget is exhausted the
// remaining entries are recorded as skipped rather than silently dropped.
inline Report run_battery(const std::vector<ExperimentSpec>& specs, std::uint64_t seed,
                          double budget_ms = 600000.0) {
  Report rep;
  Rng root(seed);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const std::uint64_t es = root.fork("experiment", i).next_u64();
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (elapsed > budget_ms) {
      ExperimentResult sk;
      sk.name = specs[i].name;
      sk.kind = experiment_kind_name(specs[i].kind);
      sk.trials = specs[i].trials;
      sk.seed = es;
      sk.skipped = true;
      rep.experiments.push_back(std::move(sk));
      continue;
    }
    rep.experiments.push_back(run_experiment(specs[i], es));
  }
  return rep;
}

// ---- Default battery -----------------------------------------------------------

// The standing claims, one experiment per claim. `trial_scale` shrinks
// trial counts for smoke runs; assertions are sized for scale 1.
inline std::vector<ExperimentSpec> default_battery(double trial_scale = 1.0) {
  if (trial_scale <= 0.0) throw std::invalid_argument("default_battery: bad scale");
  auto scaled = [trial_scale](long trials) {
    return std::max(long(1), long(std::llround(double(trials) * trial_scale)));
  };
  auto detection = [&](std::string name, int n, int k, AttackSpec behavior, long trials,
                       std::vector<Assertion> asserts, nlohmann::json knobs = {}) {
    ExperimentSpec s;
    s.name = std::move(name);
    s.kind = ExperimentKind::Detection;
    s.params.n = n;
    s.params.k = k;
    s.params.t = 3;
    s.behavior = std::move(behavior);
    s.trials = scaled(trials);
    if (!knobs.is_null()) s.knobs = std::move(knobs);
    s.assertions = std::move(asserts);
    return s;
  };
  using Cmp = Assertion::Cmp;
  std::vector<ExperimentSpec> specs;

  specs.push_back(detection("honest-test-round", 3, 3, AttackSpec{}, 2000,
                            {{"detection_rate", Cmp::Eq, 0.0, 0.0}}));
  specs.push_back(detection(
      "attack1-incompatible-pair", 3, 3,
      AttackSpec{"attack1_send", {{"address", "101"}, {"data", "000"}}}, 2000,
      {{"detection_rate", Cmp::Eq, 1.0, 0.0}}, {{"condition", "data_not_in_pair"}}));
  specs.push_back(detection("attack1-guessed-pair", 4, 3,
                            AttackSpec{"attack1_guess_pair", {{"address", "0110"}}}, 10000,
                            {{"pass_rate", Cmp::Le, 1.0 / 16.0, 0.0}}));
  specs.push_back(detection("attack2-data", 4, 3, AttackSpec{"attack2_measure", {{"scope", "data"}}},
                            10000, {{"detection_rate", Cmp::Eq, 0.5, 0.015}}));
  specs.push_back(detection("attack2-address-data", 4, 3,
                            AttackSpec{"attack2_measure", {{"scope", "address_data"}}}, 10000,
                            {{"detection_rate", Cmp::Ge, 1.0 - 1.0 / 16.0, 0.0073}}));
  specs.push_back(detection("attack3-full-copy", 4, 3,
                            AttackSpec{"attack3_entangle", {{"variant", "full_copy"}}}, 10000,
                            {{"detection_rate", Cmp::Ge, 1.0 - 1.0 / 16.0, 0.0073}}));
  specs.push_back(detection("attack3-data-copy", 4, 3,
                            AttackSpec{"attack3_entangle", {{"variant", "data_copy"}}}, 10000,
                            {{"detection_rate", Cmp::Eq, 0.5, 0.015}}));
  const double recovery_bound_n2 = 0.25 + 3.0 / (4.0 * 2 * 3);
  const double recovery_bound_n3 = 0.25 + 3.0 / (4.0 * 3 * 7);
  specs.push_back(detection("recovery-computational-n2", 2, 2,
                            AttackSpec{"recovery", {{"policy", "computational"}}}, 4000,
                            {{"pass_rate", Cmp::Le, recovery_bound_n2, 0.03}}));
  specs.push_back(detection("recovery-test-basis-n2", 2, 2,
                            AttackSpec{"recovery", {{"policy", "test_basis"}}}, 4000,
                            {{"pass_rate", Cmp::Le, recovery_bound_n2, 0.03}}));
  specs.push_back(detection("recovery-computational-n3", 3, 3,
                            AttackSpec{"recovery", {{"policy", "computational"}}}, 4000,
                            {{"pass_rate", Cmp::Le, recovery_bound_n3, 0.03}}));
  specs.push_back(detection("recovery-test-basis-n3", 3, 3,
                            AttackSpec{"recovery", {{"policy", "test_basis"}}}, 4000,
                            {{"pass_rate", Cmp::Le, recovery_bound_n3, 0.03}}));

  {
    ExperimentSpec s;
    s.name = "counting-error-budget";
    s.kind = ExperimentKind::Counting;
    s.params.n = 5;
    s.params.k = 4;
    s.params.t = 7;
    s.trials = scaled(500);
    s.knobs = {{"hits", 8}};
    s.assertions = {{"success_rate", Cmp::Ge, 0.75, 0.0}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "counting-relative-error";
    s.kind = ExperimentKind::Counting;
    s.params.n = 5;
    s.params.k = 4;
    s.params.t = 8;  // T_eff = 256 > 100 / sqrt(s_min)
    s.params.s_min = 0.2;
    s.trials = scaled(500);
    s.knobs = {{"hits", 8}};
    s.assertions = {{"rel07_rate", Cmp::Ge, 0.75, 0.0}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "counting-zero-support";
    s.kind = ExperimentKind::Counting;
    s.params.n = 5;
    s.params.k = 4;
    s.params.t = 7;
    s.trials = scaled(100);
    s.knobs = {{"hits", 0}};
    const double ceil0 = std::numbers::pi * std::numbers::pi / (128.0 * 128.0);
    s.assertions = {{"max_estimate", Cmp::Le, ceil0, 1e-9}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "cheat-rounds";
    s.kind = ExperimentKind::CheatRounds;
    s.params.n = 3;
    s.params.k = 3;
    s.params.t = 7;
    s.params.p = 0.05;
    s.behavior = AttackSpec{"attack2_measure", {{"scope", "data"}}};
    s.trials = scaled(2000);
    s.assertions = {{"mean_rounds", Cmp::Le, cheat_round_budget(0.05), 0.0}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "multiround-full-run";
    s.kind = ExperimentKind::Multiround;
    s.params.n = 5;
    s.params.k = 6;
    s.params.t = 5;
    s.params.p = 0.05;
    s.behavior = AttackSpec{"multiround", {{"d", "010110"}, {"address", 9}}};
    s.trials = scaled(300);
    s.assertions = {{"pass_rate", Cmp::Ge, 0.95, 0.0}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "phase-flip-fidelity-n3";
    s.kind = ExperimentKind::Fidelity;
    s.params.n = 3;
    s.params.k = 1;
    s.params.t = 1;
    s.trials = 1;
    s.knobs = {{"hits", 1}};
    s.assertions = {{"fidelity", Cmp::Eq, 0.5625, 1e-12},
                    {"fidelity_error", Cmp::Le, 0.0, 1e-12}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "phase-flip-fidelity-n5";
    s.kind = ExperimentKind::Fidelity;
    s.params.n = 5;
    s.params.k = 1;
    s.params.t = 1;
    s.trials = 1;
    s.knobs = {{"hits", 1}};
    s.assertions = {{"fidelity", Cmp::Eq, 0.87890625, 1e-12},
                    {"fidelity_error", Cmp::Le, 0.0, 1e-12}};
    specs.push_back(std::move(s));
  }
  {
    ExperimentSpec s;
    s.name = "test-count-tail";
    s.kind = ExperimentKind::TestCount;
    s.params.n = 1;
    s.params.k = 1;
    s.params.t = 10;  // T = 1024
    s.params.p = 0.05;
    s.trials = scaled(1000);
    s.assertions = {{"tail_rate", Cmp::Le, 0.001, 0.0}, {"abort_rate", Cmp::Le, 0.002, 0.0}};
    specs.push_back(std::move(s));
  }
  auto swap_spec = [&](std::string name, double overlap, double want, double tol) {
    ExperimentSpec s;
    s.name = std::move(name);
    s.kind = ExperimentKind::SwapTest;
    s.params.n = 1;
    s.params.k = 1;
    s.params.t = 1;
    s.trials = scaled(10000);
    s.knobs = {{"overlap", overlap}};
    s.assertions = {{"outcome1_rate", Cmp::Eq, want, tol}};
    return s;
  };
  specs.push_back(swap_spec("swap-test-orthogonal", 0.0, 0.5, 0.015));
  specs.push_back(swap_spec("swap-test-partial", 0.25, 0.375, 0.015));
  specs.push_back(swap_spec("swap-test-identical", 1.0, 0.0, 0.0));
  return specs;
}

// ---- Invariant suite -------------------------------------------------------------

struct InvariantCaps {
  int n = 3;
  int k = 3;
  int t = 3;
};

namespace detail {

inline double state_distance(const StateVector& a, const StateVector& b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) sq += std::norm(a.amp(i) - b.amp(i));
  return std::sqrt(sq);
}

inline TestParams random_test_params(Rng& rng, int n, int k) {
  const std::uint64_t kk = std::uint64_t(1) << k;
  std::uint32_t a = std::uint32_t(rng.next_below(kk));
  std::uint32_t b = std::uint32_t(rng.next_below(kk));
  while (b == a) b = std::uint32_t(rng.next_below(kk));
  TestParams p;
  p.m = int(rng.next_below(std::uint64_t(n)));
  p.x = BitString(std::uint32_t(rng.next_below(std::uint64_t(1) << n)), n);
  p.b = int(rng.next_below(2));
  p.mu = BitString(std::min(a, b), k);
  p.nu = BitString(std::max(a, b), k);
  return p;
}

inline void note_failure(ExperimentResult& res, std::string msg) {
  if (res.failures.size() < 8)
    res.failures.push_back(std::move(msg));
  else if (res.failures.size() == 8)
    res.failures.push_back("further failures suppressed");
}

inline ExperimentResult invariant_family(const std::string& name) {
  ExperimentResult res;
  res.name = name;
  res.kind = "invariant";
  res.trials = 1;
  return res;
}

// Attaches the checks/failures counts and the zero-failures assertion.
inline void close_family(ExperimentResult& res, long checks,
                         std::chrono::steady_clock::time_point t0) {
  res.metrics.emplace_back("checks", exact_metric(double(checks)));
  res.metrics.emplace_back("failures", exact_metric(double(res.failures.size())));
  AssertionOutcome o;
  o.assertion = {"failures", Assertion::Cmp::Eq, 0.0, 0.0};
  o.estimate = double(res.failures.size());
  o.ci = {o.estimate, o.estimate};
  o.pass = res.failures.empty();
  res.outcomes.push_back(std::move(o));
  res.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline ExperimentResult check_bases(const InvariantCaps& caps) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = invariant_family("basis-enumeration");
  long checks = 0;
  for (int n = 1; n <= caps.n; ++n) {
    for (int k = 1; k <= caps.k; ++k) {
      const auto bases = enumerate_bases(n, k);
      const std::size_t want = std::size_t(n) * ((std::size_t(1) << k) - 1);
      if (bases.size() != want)
        note_failure(res, "basis count n=" + std::to_string(n) + " k=" + std::to_string(k) +
                              ": got " + std::to_string(bases.size()) + ", want " +
                              std::to_string(want));
      ++checks;
      std::set<std::string> seen;
      std::size_t total = 0;
      for (const TestBasis& basis : bases) {
        if (basis.members.size() != std::size_t(1) << (n + k))
          note_failure(res, "basis size n=" + std::to_string(n) + " k=" + std::to_string(k) +
                                " m=" + std::to_string(basis.m));
        for (const TestParams& p : basis.members) {
          seen.insert(p.describe());
          ++total;
        }
        ++checks;
      }
      if (seen.size() != total)
        note_failure(res, "bases overlap at n=" + std::to_string(n) + " k=" + std::to_string(k));
      if (total != all_test_params(n, k).size())
        note_failure(res,
                     "bases miss members at n=" + std::to_string(n) + " k=" + std::to_string(k));
      checks += 2;
      for (const TestBasis& basis : bases) {
        std::vector<StateVector> states;
        states.reserve(basis.members.size());
        for (const TestParams& p : basis.members) states.push_back(test_state_closed_form(p));
        for (std::size_t i = 0; i < states.size(); ++i) {
          for (std::size_t j = i; j < states.size(); ++j) {
            const cplx ip = inner_product(states[i], states[j]);
            const double want_ip = (i == j) ? 1.0 : 0.0;
            if (std::abs(ip - want_ip) > 1e-9)
              note_failure(res, "gram n=" + std::to_string(n) + " k=" + std::to_string(k) +
                                    " m=" + std::to_string(basis.m) + " members " +
                                    basis.members[i].describe() + " / " +
                                    basis.members[j].describe());
            ++checks;
          }
        }
      }
    }
  }
  close_family(res, checks, t0);
  return res;
}

inline ExperimentResult check_decompositions(const InvariantCaps& caps, Rng& root) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = invariant_family("pair-decompositions");
  Rng rng = root.fork("decomp");
  long checks = 0;

  // Pinned phase case: b = 1 with x_m = 1 flips the leading coefficient.
  if (caps.n >= 2) {
    const TestParams p{0, BitString(0b10, 2), 1, BitString(0, 1), BitString(1, 1)};
    const auto terms = decompose_shift_m(p, 1);
    if (std::abs(terms[0].coeff + 0.5) > 1e-12)
      note_failure(res, "shift phase case: leading coefficient " +
                            std::to_string(terms[0].coeff) + ", want -0.5");
    StateVector sum(test_state_closed_form(terms[0].params).num_qubits());
    sum.amp(0) = 0.0;
    for (const auto& term : terms) {
      const StateVector part = test_state_closed_form(term.params);
      for (std::size_t i = 0; i < sum.dim(); ++i) sum.amp(i) += term.coeff * part.amp(i);
    }
    if (state_distance(sum, test_state(p)) > 1e-9)
      note_failure(res, "shift phase case: reconstruction off for " + p.describe());
    checks += 2;
  }

  auto reconstruct = [&](const TestParams& p, const std::array<TestTerm, 4>& terms,
                         const char* what) {
    double sq = 0.0;
    StateVector sum(test_state_closed_form(terms[0].params).num_qubits());
    sum.amp(0) = 0.0;
    for (const auto& term : terms) {
      if (std::abs(std::abs(term.coeff) - 0.5) > 1e-12)
        note_failure(res, std::string(what) + ": coefficient " + std::to_string(term.coeff) +
                              " for " + p.describe());
      sq += term.coeff * term.coeff;
      const StateVector part = test_state_closed_form(term.params);
      for (std::size_t i = 0; i < sum.dim(); ++i) sum.amp(i) += term.coeff * part.amp(i);
    }
    if (std::abs(sq - 1.0) > 1e-12)
      note_failure(res, std::string(what) + ": coefficients not unit norm for " + p.describe());
    if (state_distance(sum, test_state(p)) > 1e-9)
      note_failure(res, std::string(what) + ": reconstruction off for " + p.describe());
    ++checks;
  };

  int done = 0;
  while (caps.n >= 2 && done < 100) {
    const int n = 2 + int(rng.next_below(std::uint64_t(caps.n - 1)));
    const int k = 1 + int(rng.next_below(std::uint64_t(caps.k)));
    const TestParams p = random_test_params(rng, n, k);
    const int l = int(rng.next_below(std::uint64_t(n)));
    if (l == p.m) continue;
    reconstruct(p, decompose_shift_m(p, l), "shift");
    ++done;
  }
  done = 0;
  while (caps.k >= 2 && done < 100) {
    const int n = 1 + int(rng.next_below(std::uint64_t(caps.n)));
    const int k = 2 + int(rng.next_below(std::uint64_t(caps.k - 1)));
    const TestParams p = random_test_params(rng, n, k);
    BitString omega(std::uint32_t(rng.next_below(std::uint64_t(1) << k)), k);
    while (omega.value == p.mu.value || omega.value == p.nu.value)
      omega = BitString(std::uint32_t(rng.next_below(std::uint64_t(1) << k)), k);
    reconstruct(p, decompose_insert_omega(p, omega), "insert");
    ++done;
  }
  close_family(res, checks, t0);
  return res;
}

// Window-versus-power identity behind the counting readout: for every
// control qubit the window's uncontrolled product must equal the target
// iterate raised to the qubit's net power. `mutate_g_sign` negates the
// window route after each iteration; odd windows (the last qubit always
// has one) then flip sign, which the suite must report.
inline ExperimentResult check_strategy_identities(const InvariantCaps& caps, Rng& root,
                                                  bool mutate_g_sign) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = invariant_family("strategy-identities");
  Rng rng = root.fork("identities");
  const int n = std::min(2, caps.n);
  const int k = 1;
  const int t = caps.t;
  const Database db = Database::random(n, k, rng);
  const Predicate f = Predicate::inclusion(BitString(1, 1));
  const auto lay = RegisterLayout::address_data(n, k);
  const std::size_t dim = std::size_t(1) << (n + k);
  long checks = 0;
  std::vector<StrategyKind> kinds = {StrategyKind::Trivial};
  if (t >= 2) kinds.push_back(StrategyKind::OneConfusing);
  if (t >= 3) kinds.push_back(StrategyKind::TwoConfusing);
  for (StrategyKind kind : kinds) {
    const Strategy s = make_strategy(f, kind, t, rng);
    const std::uint32_t ys[2] = {0, std::uint32_t(rng.next_below(db.size()))};
    for (int j = 0; j < s.t; ++j) {
      const auto [first, len] = schedule_block(j, s.t);
      const std::uint64_t power = s.net_power(j);
      bool bad = false;
      double worst = 0.0;
      for (std::uint32_t y : ys) {
        for (std::size_t col = 0; col < dim && !bad; ++col) {
          StateVector got(lay.total_qubits()), want(lay.total_qubits());
          got.amp(0) = 0.0;
          got.amp(col) = 1.0;
          want.amp(0) = 0.0;
          want.amp(col) = 1.0;
          for (std::uint64_t i = 0; i < len; ++i) {
            apply_grover_iteration(got, lay, db, y, s.funcs[first + i]);
            if (mutate_g_sign)
              for (std::size_t v = 0; v < dim; ++v) got.amp(v) = -got.amp(v);
          }
          for (std::uint64_t rep = 0; rep < power; ++rep)
            apply_grover_iteration(want, lay, db, y, s.target);
          const double dist = state_distance(got, want);
          if (dist > 1e-9) {
            bad = true;
            worst = dist;
          }
        }
        if (bad) break;
      }
      if (bad)
        note_failure(res, std::string("window identity ") + strategy_kind_name(kind) +
                              " control " + std::to_string(j) + " loops [" +
                              std::to_string(first) + ", " + std::to_string(first + len) +
                              "): deviates from power " + std::to_string(power) + " by " +
                              std::to_string(worst));
      ++checks;
    }
    int offender = -1;
    if (!mutate_g_sign && !verify_strategy(s, db, rng, &offender))
      note_failure(res, std::string("verify_strategy rejects ") + strategy_kind_name(kind) +
                            " at control " + std::to_string(offender));
    ++checks;
  }
  close_family(res, checks, t0);
  return res;
}

inline ExperimentResult check_honest_completeness(const InvariantCaps& caps, Rng& root) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = invariant_family("honest-completeness");
  Rng rng = root.fork("honest");
  ProtocolParams pp;
  pp.n = std::min(2, caps.n);
  pp.k = std::min(2, caps.k);
  pp.t = caps.t;
  pp.p = 0.25;  // dense test rounds exercise both procedures
  const Database db = Database::random(pp.n, pp.k, rng);
  const Strategy s =
      make_strategy(Predicate::inclusion(default_target(pp.k)), StrategyKind::Trivial, pp.t, rng);
  long checks = 0;
  for (int i = 0; i < 25; ++i) {
    pp.seed = rng.next_u64();
    const CountOutcome out = run_main(db, s, {}, {}, pp);
    if (out.terminated || out.detection)
      note_failure(res, "honest run " + std::to_string(i) + " seed " + std::to_string(pp.seed) +
                            " aborted: " +
                            Detection::reason_name(out.detection ? out.detection->reason
                                                                 : Detection::Reason::StrayOne));
    ++checks;
    ++res.protocol_runs;
    res.db_calls += 4 * long(pp.big_T());
  }
  close_family(res, checks, t0);
  return res;
}

inline ExperimentResult check_schedule(const InvariantCaps& caps) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentResult res = invariant_family("control-schedule");
  long checks = 0;
  for (int t = 1; t <= caps.t; ++t) {
    const std::uint64_t big_t = std::uint64_t(1) << t;
    if (control_schedule(0, t).has_value())
      note_failure(res, "loop 0 must be uncontrolled at t=" + std::to_string(t));
    ++checks;
    std::uint64_t expect = 1;
    for (int j = 0; j < t; ++j) {
      const auto [first, len] = schedule_block(j, t);
      if (first != expect)
        note_failure(res, "block for qubit " + std::to_string(j) + " at t=" + std::to_string(t) +
                              " starts at " + std::to_string(first) + ", want " +
                              std::to_string(expect));
      if (len != std::uint64_t(1) << (t - 1 - j))
        note_failure(res, "block length for qubit " + std::to_string(j) +
                              " at t=" + std::to_string(t) + " is " + std::to_string(len));
      for (std::uint64_t i = first; i < first + len; ++i) {
        const auto ctl = control_schedule(i, t);
        if (!ctl || *ctl != j)
          note_failure(res, "loop " + std::to_string(i) + " at t=" + std::to_string(t) +
                                " is not controlled by qubit " + std::to_string(j));
      }
      expect = first + len;
      checks += 2;
    }
    if (expect != big_t)
      note_failure(res, "schedule does not cover all loops at t=" + std::to_string(t));
    ++checks;
  }
  close_family(res, checks, t0);
  return res;
}

}  // namespace detail

// Structural verification at small sizes: basis enumeration, pair
// decompositions, strategy window identities, honest completeness, and
// the control schedule. `mutate_g_sign` corrupts the identity checks on
// purpose; a healthy suite must then fail (self-test).
inline Report invariant_suite(const InvariantCaps& caps = {}, std::uint64_t seed = 1,
                              bool mutate_g_sign = false) {
  if (caps.n < 1 || caps.k < 1 || caps.t < 1)
    throw std::invalid_argument("invariant_suite: caps must be positive");
  Rng root(seed);
  Report rep;
  rep.experiments.push_back(detail::check_bases(caps));
  rep.experiments.push_back(detail::check_decompositions(caps, root));
  rep.experiments.push_back(detail::check_strategy_identities(caps, root, mutate_g_sign));
  rep.experiments.push_back(detail::check_honest_completeness(caps, root));
  rep.experiments.push_back(detail::check_schedule(caps));
  return rep;
}

// ---- Report emission ---------------------------------------------------------------

enum class ReportFormat { Json, Csv };

inline ReportFormat report_format_from(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("report: unknown format '" + std::string(s) + "'");
}

inline void emit_report(const Report& rep, ReportFormat format, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("report: cannot open '" + path + "' for writing");
  if (format == ReportFormat::Json)
    out << rep.to_json().dump(2) << "\n";
  else
    out << rep.csv();
  out.flush();
  if (!out) throw IoError("report: write to '" + path + "' failed");
}

}  // namespace qpm
