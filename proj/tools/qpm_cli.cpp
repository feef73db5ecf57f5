#include <CLI11.hpp>
#include <json.hpp>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <random>
#include <string>

#include "qpm/harness.hpp"
#include "qpm/mining.hpp"

namespace {

using namespace qpm;

// Exit codes: 0 success, 1 assertion/verification failure, 2 usage or
// format error, 3 I/O error.
enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kIo = 3 };

struct CliConfig {
  std::string db_path;
  std::optional<int> n_flag;
  std::optional<int> k_flag;
  int t = 8;
  double p = 0.05;
  double s_min = 0.1;
  double c_min = 0.5;
  double h_min = 0.2;
  double rho = 0.0;
  std::optional<std::uint64_t> seed;
  std::string strategy = "trivial";
  std::string itemset;
  bool exact_flag = false;
  std::string mode = "rules";
  std::string oracle = "exact";
  std::string spec;
  std::optional<long> trials;
  std::string output;
  std::string format = "json";
  std::string transcript;
  int caps_n = 3;
  int caps_k = 3;
  int caps_t = 3;
  bool mutate = false;
};

int confusing_count(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Trivial: return 0;
    case StrategyKind::OneConfusing: return 1;
    case StrategyKind::TwoConfusing: return 2;
  }
  return 0;
}

// --seed beats QPM_SEED beats a sampled seed (announced on stderr so every
// run stays reproducible).
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("QPM_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument("QPM_SEED: not an unsigned integer");
    return v;
  }
  std::random_device rd;
  const std::uint64_t sampled = (std::uint64_t(rd()) << 32) ^ std::uint64_t(rd());
  std::fprintf(stderr, "seed: %" PRIu64 " (sampled; pass --seed to reproduce)\n", sampled);
  return sampled;
}

void check_widths(const Database& db, const CliConfig& cfg) {
  if (cfg.n_flag && *cfg.n_flag != db.n_qubits())
    throw std::invalid_argument("--n " + std::to_string(*cfg.n_flag) +
                                " does not match the database (2^" +
                                std::to_string(db.n_qubits()) + " transactions)");
  if (cfg.k_flag && *cfg.k_flag != db.k)
    throw std::invalid_argument("--k " + std::to_string(*cfg.k_flag) +
                                " does not match the database (width " + std::to_string(db.k) +
                                ")");
}

void warn_sizing(std::uint64_t t_eff, double s_min) {
  const double floor_T = 100.0 / std::sqrt(s_min);
  if (double(t_eff) <= floor_T)
    std::fprintf(stderr,
                 "warning: T_eff = %" PRIu64 " <= 100/sqrt(s_min) = %.1f; raise --t for a "
                 "reliable estimate\n",
                 t_eff, floor_T);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

int cmd_count(const CliConfig& cfg) {
  const Database db = Database::load(cfg.db_path);
  check_widths(db, cfg);
  const BitString itemset =
      cfg.itemset.empty() ? BitString::zeros(db.record_width()) : BitString::parse(cfg.itemset);
  if (itemset.width != db.record_width())
    throw std::invalid_argument("itemset width " + std::to_string(itemset.width) +
                                " does not match the record width " +
                                std::to_string(db.record_width()));
  const StrategyKind kind = strategy_kind_from(cfg.strategy);

  // Confusing qubits spend loops on noise; raising t by their count keeps
  // the effective loop count at the requested 2^t.
  ProtocolParams pp;
  pp.n = db.n_qubits();
  pp.k = db.record_width();
  pp.t = cfg.t + confusing_count(kind);
  pp.p = cfg.p;
  pp.s_min = cfg.s_min;
  pp.validate();

  const std::uint64_t seed = resolve_seed(cfg.seed);
  Rng rng(seed);
  Rng srng = rng.fork("strategy");
  const Strategy strategy = make_strategy(Predicate::inclusion(itemset), kind, pp.t, srng);
  warn_sizing(strategy.effective_T(), cfg.s_min);

  ProtocolParams run = pp;
  run.seed = rng.next_u64();
  const CountOutcome out = run_main(db, strategy, {}, {}, run);
  if (out.terminated) {
    std::fprintf(stderr, "error: honest run aborted: %s\n",
                 out.detection ? out.detection->detail.c_str() : "?");
    return kFailed;
  }
  const double combined = 0.5 * (out.s1 + out.s2);

  std::printf("seed: %" PRIu64 "\n", seed);
  std::printf("itemset: %s  (strategy %s, t = %d, T = %" PRIu64 ", T_eff = %" PRIu64 ")\n",
              itemset.str().c_str(), cfg.strategy.c_str(), pp.t, pp.big_T(),
              strategy.effective_T());
  std::printf("theta: %d", out.theta);
  if (out.theta2) std::printf("  theta2: %d", *out.theta2);
  std::printf("\ng1: %d  g2: %d\n", out.g1, out.g2);
  std::printf("s1: %.9f\ns2: %.9f\ns_combined: %.9f\n", out.s1, out.s2, combined);
  if (cfg.exact_flag) std::printf("s_exact: %.9f\n", exact_support(db, itemset));

  if (!cfg.output.empty()) {
    nlohmann::json j{{"seed", seed},
                     {"itemset", itemset.str()},
                     {"strategy", cfg.strategy},
                     {"t", pp.t},
                     {"T", pp.big_T()},
                     {"T_eff", strategy.effective_T()},
                     {"theta", out.theta},
                     {"g1", out.g1},
                     {"g2", out.g2},
                     {"s1", out.s1},
                     {"s2", out.s2},
                     {"s_combined", combined}};
    if (out.theta2) j["theta2"] = *out.theta2;
    if (cfg.exact_flag) j["s_exact"] = exact_support(db, itemset);
    write_text(cfg.output, j.dump(2) + "\n");
  }
  if (!cfg.transcript.empty()) {
    std::ofstream os(cfg.transcript, std::ios::binary);
    if (!os) throw IoError("cannot open transcript file: " + cfg.transcript);
    out.transcript.to_jsonl(os);
    if (!os) throw IoError("write to '" + cfg.transcript + "' failed");
  }
  return kOk;
}

int cmd_mine(const CliConfig& cfg) {
  const Database raw = Database::load(cfg.db_path);
  check_widths(raw, cfg);
  const std::uint64_t seed = resolve_seed(cfg.seed);
  Rng root(seed);

  Database db = raw;
  if (cfg.rho > 0.0) {
    Rng rrng = root.fork("randomize");
    db = randomize_db(raw, cfg.rho, rrng);
  }

  const StrategyKind kind = strategy_kind_from(cfg.strategy);
  SupportOracle oracle = SupportOracle::exact(db);
  if (cfg.oracle == "protocol") {
    ProtocolParams pp;
    pp.t = cfg.t + confusing_count(kind);
    pp.p = cfg.p;
    pp.s_min = cfg.s_min;
    warn_sizing(std::uint64_t(1) << cfg.t, cfg.s_min);
    oracle = SupportOracle::protocol(db, pp, kind, root.fork("oracle"));
  }

  nlohmann::json out{{"seed", seed}, {"mode", cfg.mode}, {"oracle", cfg.oracle}};
  if (cfg.rho > 0.0) out["rho"] = cfg.rho;
  if (cfg.mode == "tree") {
    const auto tree = decision_tree(db, oracle, cfg.h_min);
    out["tree"] = tree_to_json(*tree);
  } else {
    FrequentSets fs = frequent_itemsets(oracle, cfg.s_min, db.record_width());
    out["itemsets"] = itemsets_to_json(fs);
    out["rules"] = rules_to_json(association_rules(fs, oracle, cfg.c_min));
  }
  out["probed_rules"] = oracle.queries;

  const std::string text = out.dump(2) + "\n";
  std::fputs(text.c_str(), stdout);
  if (!cfg.output.empty()) write_text(cfg.output, text);
  return kOk;
}

// Bundled specs cover the standing single-round claims; anything else is
// read from disk, either a full experiment or a bare behavior to wrap.
ExperimentSpec attack_spec_for(const CliConfig& cfg) {
  using Cmp = Assertion::Cmp;
  auto detection = [&](std::string name, int n, int k, AttackSpec behavior, long trials) {
    ExperimentSpec s;
    s.name = std::move(name);
    s.kind = ExperimentKind::Detection;
    s.params.n = n;
    s.params.k = k;
    s.params.t = 3;
    s.behavior = std::move(behavior);
    s.trials = trials;
    return s;
  };
  if (cfg.spec == "honest") {
    ExperimentSpec s = detection("honest", 3, 3, AttackSpec{}, 2000);
    s.assertions = {{"detection_rate", Cmp::Eq, 0.0, 0.0}};
    return s;
  }
  if (cfg.spec == "attack2-data") {
    ExperimentSpec s =
        detection("attack2-data", 4, 3, AttackSpec{"attack2_measure", {{"scope", "data"}}}, 10000);
    if (cfg.trials) s.trials = *cfg.trials;
    const double tol = 3.0 * std::sqrt(0.25 / double(s.trials));
    s.assertions = {{"detection_rate", Cmp::Eq, 0.5, tol}};
    return s;
  }
  if (cfg.spec == "recovery") {
    ExperimentSpec s =
        detection("recovery", 3, 3, AttackSpec{"recovery", {{"policy", "computational"}}}, 10000);
    s.assertions = {{"pass_rate", Cmp::Le, 0.25 + 3.0 / (4.0 * 3 * 7), 0.03}};
    return s;
  }
  std::ifstream in(cfg.spec);
  if (!in) throw IoError("cannot open attack spec: " + cfg.spec);
  nlohmann::json j;
  in >> j;
  if (j.contains("name")) return ExperimentSpec::from_json(j);
  AttackSpec behavior = AttackSpec::from_json(j);
  std::string name = "attack-" + behavior.kind;
  ExperimentSpec s = detection(std::move(name), cfg.n_flag.value_or(3), cfg.k_flag.value_or(3),
                               std::move(behavior), 10000);
  s.params.t = cfg.caps_t;
  return s;
}

int cmd_attack(const CliConfig& cfg) {
  ExperimentSpec spec = attack_spec_for(cfg);
  if (cfg.trials) spec.trials = *cfg.trials;
  const std::uint64_t seed = resolve_seed(cfg.seed);

  Report report;
  report.experiments.push_back(run_experiment(spec, seed));
  const ExperimentResult& res = report.experiments.front();

  std::printf("seed: %" PRIu64 "\n", seed);
  std::printf("experiment %s: %ld trials, %.0f ms\n", res.name.c_str(), res.trials, res.wall_ms);
  for (const auto& [name, mv] : res.metrics) {
    const Interval ci = mv.ci();
    std::printf("  %-18s %.6f  [%.6f, %.6f]\n", name.c_str(), mv.estimate, ci.lo, ci.hi);
  }
  for (const auto& o : res.outcomes)
    std::printf("  assert %s %s %.6f (tol %g): %s\n", o.assertion.metric.c_str(),
                Assertion::cmp_name(o.assertion.comparator), o.assertion.bound,
                o.assertion.tolerance, o.pass ? "ok" : "FAIL");
  for (const auto& f : res.failures) std::printf("  failure: %s\n", f.c_str());

  if (!cfg.output.empty()) emit_report(report, report_format_from(cfg.format), cfg.output);
  return report.pass() ? kOk : kFailed;
}

int cmd_verify(const CliConfig& cfg) {
  const std::uint64_t seed = resolve_seed(cfg.seed);
  InvariantCaps caps;
  caps.n = cfg.caps_n;
  caps.k = cfg.caps_k;
  caps.t = cfg.caps_t;
  const Report report = invariant_suite(caps, seed, cfg.mutate);

  std::printf("seed: %" PRIu64 "\n", seed);
  for (const auto& fam : report.experiments)
    std::printf("family %-22s %8.0f checks  %s\n", fam.name.c_str(),
                fam.metric("checks").estimate, fam.pass() ? "ok" : "FAIL");
  if (!cfg.output.empty()) emit_report(report, report_format_from(cfg.format), cfg.output);

  for (const auto& fam : report.experiments)
    if (!fam.pass()) {
      std::printf("first violation: %s\n",
                  fam.failures.empty() ? fam.name.c_str() : fam.failures.front().c_str());
      return kFailed;
    }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-party support counting, mining, attack reports and self-verification"};
  app.require_subcommand(1);
  CliConfig cfg;

  CLI::App* count = app.add_subcommand("count", "estimate one itemset's support over a database");
  count->add_option("db", cfg.db_path, "transaction database file")->required();
  count->add_option("--itemset", cfg.itemset,
                    "itemset as a 0/1 string at record width (default: empty itemset)");
  count->add_option("--t", cfg.t, "loop exponent, T = 2^t")->capture_default_str();
  count->add_option("--p", cfg.p, "test-round probability")->capture_default_str();
  count->add_option("--s-min", cfg.s_min, "support floor for sizing warnings")
      ->capture_default_str();
  count->add_option("--n", cfg.n_flag, "expected address width (cross-checked)");
  count->add_option("--k", cfg.k_flag, "expected transaction width (cross-checked)");
  count->add_option("--strategy", cfg.strategy, "trivial|one_confusing|two_confusing")
      ->check(CLI::IsMember({"trivial", "one_confusing", "two_confusing"}))
      ->capture_default_str();
  count->add_option("--seed", cfg.seed, "RNG seed (default: QPM_SEED, else sampled)");
  count->add_flag("--oracle", cfg.exact_flag, "also print the exact support");
  count->add_option("--output", cfg.output, "write the outcome as JSON to this path");
  count->add_option("--transcript", cfg.transcript, "write the round transcript as JSONL");

  CLI::App* mine = app.add_subcommand("mine", "mine frequent itemsets, rules or a decision tree");
  mine->add_option("db", cfg.db_path, "transaction database file")->required();
  mine->add_option("--mode", cfg.mode, "rules|tree")
      ->check(CLI::IsMember({"rules", "tree"}))
      ->capture_default_str();
  mine->add_option("--oracle", cfg.oracle, "support source: exact|protocol")
      ->check(CLI::IsMember({"exact", "protocol"}))
      ->capture_default_str();
  mine->add_option("--s-min", cfg.s_min, "support threshold")->capture_default_str();
  mine->add_option("--c-min", cfg.c_min, "rule confidence threshold")->capture_default_str();
  mine->add_option("--h-min", cfg.h_min, "tree entropy-gain threshold")->capture_default_str();
  mine->add_option("--randomize", cfg.rho, "per-bit flip probability applied before mining")
      ->check(CLI::Range(0.0, 0.5))
      ->capture_default_str();
  mine->add_option("--t", cfg.t, "loop exponent for the protocol oracle")->capture_default_str();
  mine->add_option("--p", cfg.p, "test-round probability")->capture_default_str();
  mine->add_option("--strategy", cfg.strategy, "trivial|one_confusing|two_confusing")
      ->check(CLI::IsMember({"trivial", "one_confusing", "two_confusing"}))
      ->capture_default_str();
  mine->add_option("--n", cfg.n_flag, "expected address width (cross-checked)");
  mine->add_option("--k", cfg.k_flag, "expected transaction width (cross-checked)");
  mine->add_option("--seed", cfg.seed, "RNG seed (default: QPM_SEED, else sampled)");
  mine->add_option("--output", cfg.output, "also write the JSON to this path");

  CLI::App* attack = app.add_subcommand("attack", "run one attack experiment and report");
  attack->add_option("spec", cfg.spec, "bundled name (honest, attack2-data, recovery) or a JSON file")
      ->required();
  attack->add_option("--trials", cfg.trials, "override the trial count");
  attack->add_option("--n", cfg.n_flag, "address width for bare behavior specs");
  attack->add_option("--k", cfg.k_flag, "data width for bare behavior specs");
  attack->add_option("--t", cfg.caps_t, "loop exponent for bare behavior specs")
      ->capture_default_str();
  attack->add_option("--seed", cfg.seed, "RNG seed (default: QPM_SEED, else sampled)");
  attack->add_option("--output", cfg.output, "write the report to this path");
  attack->add_option("--format", cfg.format, "report format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  CLI::App* verify = app.add_subcommand("verify", "run the invariant suite");
  verify->add_option("--n", cfg.caps_n, "address-width cap")->capture_default_str();
  verify->add_option("--k", cfg.caps_k, "data-width cap")->capture_default_str();
  verify->add_option("--t", cfg.caps_t, "loop-exponent cap")->capture_default_str();
  verify->add_flag("--mutate", cfg.mutate, "negate one window leg (self-test; must fail)");
  verify->add_option("--seed", cfg.seed, "RNG seed (default: QPM_SEED, else sampled)");
  verify->add_option("--output", cfg.output, "write the report to this path");
  verify->add_option("--format", cfg.format, "report format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (app.got_subcommand(count)) return cmd_count(cfg);
    if (app.got_subcommand(mine)) return cmd_mine(cfg);
    if (app.got_subcommand(attack)) return cmd_attack(cfg);
    return cmd_verify(cfg);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
}
