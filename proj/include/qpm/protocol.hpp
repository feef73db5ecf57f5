#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpm/bitstring.hpp"
#include "qpm/database.hpp"
#include "qpm/layout.hpp"
#include "qpm/oracles.hpp"
#include "qpm/predicate.hpp"
#include "qpm/rng.hpp"
#include "qpm/statevector.hpp"
#include "qpm/strategy.hpp"

namespace qpm {

struct ProtocolParams {
  int n = 1;
  int k = 1;
  int t = 1;
  double p = 0.05;
  double s_min = 0.1;
  std::uint64_t seed = 0;
  bool per_copy_theta = false;

  std::uint64_t big_T() const { return std::uint64_t(1) << t; }

  void validate() const {
    if (n < 1 || n > 24 || k < 1 || k > 24 || t < 1 || t > 24)
      throw std::invalid_argument("params: register widths out of range");
    if (!(p > 0.0 && p < 0.5))
      throw std::invalid_argument("params: p must lie in (0, 0.5)");
    if (!(s_min > 0.0 && s_min <= 1.0)) throw std::invalid_argument("params: bad s_min");
  }
};

struct Detection {
  enum class Reason { V0Mismatch, StrayOne, SwapTest, TestCountLimit, RunLengthLimit };
  Reason reason = Reason::StrayOne;
  std::uint64_t loop = 0;
  std::string detail;

  static const char* reason_name(Reason r) {
    switch (r) {
      case Reason::V0Mismatch: return "v0-mismatch";
      case Reason::StrayOne: return "stray-one";
      case Reason::SwapTest: return "swap-test";
      case Reason::TestCountLimit: return "test-count-limit";
      case Reason::RunLengthLimit: return "run-length-limit";
    }
    return "?";
  }
};

struct RoundRecord {
  std::uint64_t loop = 0;
  enum class Kind { Compute, Test1, Test2 } kind = Kind::Compute;
  double r = 0.0;
  bool before = false;  // test placed before (r <= p) or after (p < r <= 2p)
  std::uint64_t c = 0;  // control draw of the test round
  std::string v, w;     // measured bits of the two test copies
  int swap_outcome = -1;
  std::optional<Detection> detection;
};

struct Transcript {
  std::uint64_t seed = 0;
  int n = 0, k = 0, t = 0;
  double p = 0.0;
  std::uint32_t y = 0;
  std::vector<RoundRecord> rounds;

  void to_jsonl(std::ostream& os) const {
    nlohmann::json head{{"type", "header"}, {"seed", seed}, {"n", n},
                        {"k", k},           {"t", t},       {"p", p},
                        {"y", y}};
    os << head.dump() << "\n";
    for (const auto& rec : rounds) {
      nlohmann::json row{{"type", "round"},
                         {"loop", rec.loop},
                         {"kind", rec.kind == RoundRecord::Kind::Compute  ? "compute"
                                  : rec.kind == RoundRecord::Kind::Test1 ? "test1"
                                                                         : "test2"},
                         {"r", rec.r}};
      if (rec.kind != RoundRecord::Kind::Compute) {
        row["before"] = rec.before;
        row["c"] = rec.c;
        row["v"] = rec.v;
        row["w"] = rec.w;
        if (rec.swap_outcome >= 0) row["swap"] = rec.swap_outcome;
        row["detected"] = rec.detection.has_value();
        if (rec.detection) row["reason"] = Detection::reason_name(rec.detection->reason);
      }
      os << row.dump() << "\n";
    }
  }
};

struct CountOutcome {
  bool terminated = false;
  std::optional<Detection> detection;
  int theta = 0;
  int g1 = 0, g2 = 0;
  double s1 = 0.0, s2 = 0.0;
  std::optional<int> theta2;
  Transcript transcript;
};

// Calibrated readout: with the diffusion implemented as I - 2|+><+|, the
// iterate's eigenphases sit at pi +- 2*phi (sin^2 phi = s), so the peak
// theta is T/2 +- T*phi/pi and cos^2(pi*theta/T) recovers s for either g
// outcome. (The sin^2-on-g=1 branch would report 1-s; g and theta are
// independent here, which the verification suite demonstrates.)
inline double support_from_theta(int theta, std::uint64_t t_eff) {
  const double c = std::cos(std::numbers::pi * double(theta) / double(t_eff));
  return c * c;
}

// Uniform draw of one test round's parameters.
struct TestDraw {
  BitString mu, nu, x;
  std::uint64_t c = 0;
  int m = 0, b = 0;
};

inline TestDraw draw_test_params(int n, int k, int t, Rng& rng) {
  TestDraw d;
  const std::uint64_t kk = std::uint64_t(1) << k;
  std::uint32_t a = std::uint32_t(rng.next_below(kk));
  std::uint32_t bv = std::uint32_t(rng.next_below(kk));
  while (bv == a) bv = std::uint32_t(rng.next_below(kk));
  d.mu = BitString(std::min(a, bv), k);
  d.nu = BitString(std::max(a, bv), k);
  d.c = rng.next_below(std::uint64_t(1) << t);
  d.m = int(rng.next_below(std::uint64_t(n)));
  d.x = BitString(std::uint32_t(rng.next_below(std::uint64_t(1) << n)), n);
  d.b = int(rng.next_below(2));
  return d;
}

// Per-party behavior hooks; empty hooks mean honest. Attack modules fill
// them in, everything else runs the honest path. Hooks see the round's
// draw so experiments can model worst cases (a cheater who guessed the
// pair); the honest path never reads it beyond what U_t already encodes.
struct BobBehavior {
  // Receives each TestBob1 copy (layout Address+Data[+Scratch]); honest
  // action is controlled U_{f_i}: apply the phase query iff `active`.
  using Test1Hook =
      std::function<void(StateVector&, const RegisterLayout&, std::uint64_t loop, int copy,
                         bool active, const Predicate& fi, const TestDraw& draw, Rng&)>;
  // Receives each TestBob2 copy (layout Address+Data+Guess[+Scratch]);
  // honest action is the bit query U'_f into the guess qubit.
  using Test2Hook =
      std::function<void(StateVector&, const RegisterLayout&, std::uint64_t loop, int copy,
                         const Predicate& f, const TestDraw& draw, Rng&)>;
  Test1Hook test1;
  Test2Hook test2;
  int ancilla_width = 0;         // private qubits appended to test registers
  long test_count_limit = -1;    // abort when the test-round count exceeds this
  int run_length_limit = -1;     // abort on this many consecutive test rounds
};

struct AliceBehavior {
  // Overrides the per-loop r draw (loop == T is the final window).
  std::function<double(std::uint64_t loop, Rng&)> draw_r;
};

namespace detail {

inline RegisterLayout test_layout(int n, int k, bool guess, int scratch) {
  RegisterLayout lay;
  lay.add(Seg::Address, n);
  lay.add(Seg::Data, k);
  if (guess) lay.add(Seg::Guess, 1);
  if (scratch > 0) lay.add(Seg::Scratch, scratch);
  return lay;
}

}  // namespace detail

// Controlled swap test on a register laid out as [ancilla][copy][copy].
// The ancilla must already be |+>; it is measured and the collapsed state
// is left in `joint`. Outcome 1 certifies the copies differ.
inline int swap_test(StateVector& joint, Rng& rng) {
  const int nq = joint.num_qubits();
  if (nq < 3 || (nq - 1) % 2 != 0)
    throw std::invalid_argument("swap_test: register must hold two equal copies plus ancilla");
  const int w = (nq - 1) / 2;
  for (int q = 0; q < w; ++q) apply_gate(joint, GateKind::Swap, {1 + q, 1 + w + q}, {0});
  apply_h(joint, 0);
  const MeasurementOutcome out = measure(joint, {0}, rng);
  return int(out.bits.value);
}

// One honesty test of the phase query: two identical fresh test states,
// Bob's (controlled) U_{f_i} on each, unwind, measure everything. Honest
// Bob yields v = w with v_0 = [active and f_i(mu) != f_i(nu)] and zeros
// elsewhere, so he always passes.
inline std::optional<Detection> test_bob1(std::uint64_t i, const Strategy& strategy,
                                          const BobBehavior& bob, const ProtocolParams& pp,
                                          Rng& rng, RoundRecord* rec = nullptr,
                                          const TestDraw* forced = nullptr) {
  const TestDraw d = forced ? *forced : draw_test_params(pp.n, pp.k, pp.t, rng);
  const auto lay = detail::test_layout(pp.n, pp.k, false, bob.ancilla_width);
  const auto cq = control_schedule(i, pp.t);
  const bool active = cq && ((d.c >> (pp.t - 1 - *cq)) & 1);
  const Predicate& fi = strategy.function_at(i);

  std::vector<int> to_measure = lay.qubits(Seg::Address);
  for (int q : lay.qubits(Seg::Data)) to_measure.push_back(q);

  BitString v, w;
  for (int copy = 1; copy <= 2; ++copy) {
    StateVector st(lay.total_qubits());
    apply_u_t(st, lay, d.m, d.x, d.b, d.mu, d.nu);
    if (bob.test1)
      bob.test1(st, lay, i, copy, active, fi, d, rng);
    else if (active)
      apply_u_f_phase(st, lay, fi);
    apply_u_t_adjoint(st, lay, d.m, d.x, d.b, d.mu, d.nu);
    const MeasurementOutcome out = measure(st, to_measure, rng);
    (copy == 1 ? v : w) = out.bits;
  }
  if (rec) {
    rec->c = d.c;
    rec->v = v.str();
    rec->w = w.str();
  }
  std::optional<Detection> det;
  if (v.bit(0) != w.bit(0)) {
    det = Detection{Detection::Reason::V0Mismatch, i, "v0 != w0"};
  } else {
    for (int j = 1; j < v.width; ++j) {
      if (v.bit(j) || w.bit(j)) {
        det = Detection{Detection::Reason::StrayOne, i, "stray one at bit " + std::to_string(j)};
        break;
      }
    }
  }
  if (det && rec) rec->detection = det;
  return det;
}

// One honesty test of the bit query: two fresh test states, Bob's U'_f
// into a fresh guess qubit on each, unwind, controlled swap test on the
// pair, then measure everything except the first address qubit of each
// copy (that qubit stays entangled with the guess when f splits the
// pair). Honest Bob always passes.
inline std::optional<Detection> test_bob2(const Strategy& strategy, const BobBehavior& bob,
                                          const ProtocolParams& pp, Rng& rng,
                                          RoundRecord* rec = nullptr,
                                          const TestDraw* forced = nullptr) {
  const TestDraw d = forced ? *forced : draw_test_params(pp.n, pp.k, pp.t, rng);
  const auto lay = detail::test_layout(pp.n, pp.k, true, bob.ancilla_width);
  const int copy_width = lay.total_qubits();
  const Predicate& f = strategy.target;

  StateVector copies[2] = {StateVector(copy_width), StateVector(copy_width)};
  for (int copy = 1; copy <= 2; ++copy) {
    StateVector& st = copies[copy - 1];
    apply_u_t(st, lay, d.m, d.x, d.b, d.mu, d.nu);
    if (bob.test2)
      bob.test2(st, lay, pp.big_T(), copy, f, d, rng);
    else
      apply_u_f_bit(st, lay, f);
    apply_u_t_adjoint(st, lay, d.m, d.x, d.b, d.mu, d.nu);
  }

  StateVector anc(1);
  apply_h(anc, 0);
  StateVector joint = kron(kron(anc, copies[0]), copies[1]);
  const int outcome = swap_test(joint, rng);

  std::vector<int> to_measure;
  for (int copy = 0; copy < 2; ++copy) {
    const int off = 1 + copy * copy_width;
    for (int a = 1; a < pp.n; ++a) to_measure.push_back(off + lay.qubit(Seg::Address, a));
    for (int q : lay.qubits(Seg::Data)) to_measure.push_back(off + q);
  }
  const MeasurementOutcome out = measure(joint, to_measure, rng);
  const int half = int(to_measure.size()) / 2;

  if (rec) {
    rec->c = d.c;
    rec->swap_outcome = outcome;
    std::string bits = out.bits.str();
    rec->v = bits.substr(0, half);
    rec->w = bits.substr(half);
  }
  std::optional<Detection> det;
  if (outcome == 1) {
    det = Detection{Detection::Reason::SwapTest, pp.big_T(), "swap outcome 1"};
  } else if (out.bits.value != 0) {
    det = Detection{Detection::Reason::StrayOne, pp.big_T(), "stray one"};
  }
  if (det && rec) rec->detection = det;
  return det;
}

// Reduced simulation of the two counting registers. Between iterations the
// data register always returns to |0...0>, so the joint state is
//   (global norm) sum_c |c> (x) |row_c> (x) |0...0>
// and each loop only phases and diffuses the N address amplitudes of the
// rows whose scheduled control bit is set. Rows carry the global
// normalization (initially 1/sqrt(T*N) per entry).
struct CountingEngine {
  int t = 1, n = 1;
  std::uint64_t T = 2;
  std::size_t N = 2;
  std::vector<std::vector<cplx>> rows;

  CountingEngine(int t_, int n_) : t(t_), n(n_) {
    T = std::uint64_t(1) << t;
    N = std::size_t(1) << n;
    rows.assign(T, std::vector<cplx>(N, cplx(1.0 / std::sqrt(double(T) * double(N)), 0.0)));
  }

  // One controlled iteration: phase by f on the loaded record, then the
  // I - 2|+><+| diffusion, on every row with the scheduled bit set.
  void apply_loop(std::uint64_t i, const Database& db, std::uint32_t y, const Predicate& f) {
    const auto cq = control_schedule(i, t);
    if (!cq) return;
    const std::uint64_t mask = std::uint64_t(1) << (t - 1 - *cq);
    for (std::uint64_t c = 0; c < T; ++c) {
      if (!(c & mask)) continue;
      auto& row = rows[c];
      cplx sum(0.0, 0.0);
      for (std::size_t j = 0; j < N; ++j) {
        if (f.eval2(std::uint32_t(j), db.record(std::uint32_t(j) ^ y))) row[j] = -row[j];
        sum += row[j];
      }
      const cplx twice_mean = 2.0 * sum / double(N);
      for (std::size_t j = 0; j < N; ++j) row[j] -= twice_mean;
    }
  }

  double mass_where(const Database& db, std::uint32_t y, const Predicate& f, int g) const {
    double acc = 0.0;
    for (const auto& row : rows)
      for (std::size_t j = 0; j < N; ++j)
        if (int(f.eval2(std::uint32_t(j), db.record(std::uint32_t(j) ^ y))) == g)
          acc += std::norm(row[j]);
    return acc;
  }

  void collapse_guess(const Database& db, std::uint32_t y, const Predicate& f, int g) {
    const double mass = mass_where(db, y, f, g);
    if (mass <= 0.0) throw std::logic_error("engine: collapsing onto an empty branch");
    const double scale = 1.0 / std::sqrt(mass);
    for (auto& row : rows)
      for (std::size_t j = 0; j < N; ++j) {
        if (int(f.eval2(std::uint32_t(j), db.record(std::uint32_t(j) ^ y))) == g)
          row[j] *= scale;
        else
          row[j] = cplx(0.0, 0.0);
      }
  }

  // Exact distribution of the Fourier readout over the measured control
  // qubits (confusing qubits and the address register are traced out).
  std::vector<double> theta_distribution(const Strategy& s) const {
    const auto measured = s.measured_controls();
    const auto& conf = s.confusing;
    const int te = int(measured.size());
    const std::size_t Te = std::size_t(1) << te;
    const std::size_t CU = std::size_t(1) << conf.size();
    // c(v, u): interleave the measured value v and confusing value u.
    std::vector<std::uint64_t> cidx(Te * CU);
    for (std::size_t u = 0; u < CU; ++u) {
      for (std::size_t v = 0; v < Te; ++v) {
        std::uint64_t c = 0;
        for (int idx = 0; idx < te; ++idx)
          if ((v >> (te - 1 - idx)) & 1) c |= std::uint64_t(1) << (t - 1 - measured[idx]);
        for (std::size_t idx = 0; idx < conf.size(); ++idx)
          if ((u >> (conf.size() - 1 - idx)) & 1) c |= std::uint64_t(1) << (t - 1 - conf[idx]);
        cidx[u * Te + v] = c;
      }
    }
    std::vector<cplx> twiddle(Te);
    for (std::size_t q = 0; q < Te; ++q)
      twiddle[q] = std::polar(1.0, 2.0 * std::numbers::pi * double(q) / double(Te));
    std::vector<double> dist(Te, 0.0);
    for (std::size_t w = 0; w < Te; ++w) {
      double acc = 0.0;
      for (std::size_t u = 0; u < CU; ++u) {
        for (std::size_t j = 0; j < N; ++j) {
          cplx a(0.0, 0.0);
          for (std::size_t v = 0; v < Te; ++v)
            a += twiddle[(v * w) % Te] * rows[cidx[u * Te + v]][j];
          acc += std::norm(a);
        }
      }
      dist[w] = acc / double(Te);
    }
    return dist;
  }

  double total_mass() const {
    double acc = 0.0;
    for (const auto& row : rows)
      for (const auto& a : row) acc += std::norm(a);
    return acc;
  }
};

struct RunDebug {
  std::uint32_t y = 0;
  std::vector<std::vector<cplx>> final_rows;
};

namespace detail {

inline int sample_index(const std::vector<double>& dist, Rng& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    acc += dist[i];
    if (u < acc) return int(i);
  }
  return int(dist.size()) - 1;
}

}  // namespace detail

// The full protocol: T controlled iterations with per-loop test rounds
// (probability p before the exchange, p after), the final-window bit
// query with its own pair of test slots, guess and Fourier measurements,
// and the calibrated support readout. Per-round randomness comes from
// counter-based forks of the seed, so a transcript is reproducible and
// test rounds never perturb the computational registers or their stream.
inline CountOutcome run_main(const Database& db, const Strategy& strategy,
                             const AliceBehavior& alice, const BobBehavior& bob,
                             const ProtocolParams& pp, RunDebug* debug = nullptr) {
  pp.validate();
  strategy.validate();
  if (db.n_qubits() != pp.n || db.record_width() != pp.k)
    throw std::invalid_argument("run_main: database does not match params");
  if (strategy.t != pp.t || strategy.target.width != pp.k)
    throw std::invalid_argument("run_main: strategy does not match params");

  Rng root(pp.seed);
  CountOutcome out;
  out.transcript.seed = pp.seed;
  out.transcript.n = pp.n;
  out.transcript.k = pp.k;
  out.transcript.t = pp.t;
  out.transcript.p = pp.p;

  Rng yrng = root.fork("y");
  const std::uint32_t y = std::uint32_t(yrng.next_below(db.size()));
  out.transcript.y = y;
  if (debug) debug->y = y;

  CountingEngine engine(pp.t, pp.n);
  long tests_seen = 0;
  int consecutive = 0;
  const std::uint64_t T = pp.big_T();

  auto abort_with = [&](Detection det, RoundRecord rec) {
    rec.detection = det;
    out.transcript.rounds.push_back(std::move(rec));
    out.terminated = true;
    out.detection = std::move(det);
  };

  for (std::uint64_t i = 0; i < T; ++i) {
    Rng rr = root.fork("round", i);
    const double r = alice.draw_r ? alice.draw_r(i, rr) : rr.next_double();
    RoundRecord rec;
    rec.loop = i;
    rec.r = r;
    if (r <= 2.0 * pp.p) {
      rec.kind = RoundRecord::Kind::Test1;
      rec.before = (r <= pp.p);
      const auto det = test_bob1(i, strategy, bob, pp, rr, &rec);
      ++tests_seen;
      ++consecutive;
      if (det) {
        abort_with(*det, std::move(rec));
        return out;
      }
      if (bob.test_count_limit >= 0 && tests_seen > bob.test_count_limit) {
        abort_with(Detection{Detection::Reason::TestCountLimit, i, "too many test rounds"},
                   std::move(rec));
        return out;
      }
      if (bob.run_length_limit >= 0 && consecutive >= bob.run_length_limit) {
        abort_with(Detection{Detection::Reason::RunLengthLimit, i, "test rounds in a row"},
                   std::move(rec));
        return out;
      }
    } else {
      consecutive = 0;
    }
    engine.apply_loop(i, db, y, strategy.function_at(i));
    out.transcript.rounds.push_back(std::move(rec));
  }

  {
    Rng fr = root.fork("final");
    const double r = alice.draw_r ? alice.draw_r(T, fr) : fr.next_double();
    RoundRecord rec;
    rec.loop = T;
    rec.r = r;
    if (r <= 2.0 * pp.p) {
      rec.kind = RoundRecord::Kind::Test2;
      rec.before = (r <= pp.p);
      const auto det = test_bob2(strategy, bob, pp, fr, &rec);
      if (det) {
        abort_with(*det, std::move(rec));
        return out;
      }
    }
    out.transcript.rounds.push_back(std::move(rec));
  }

  Rng mr = root.fork("measure");
  const Predicate& f = strategy.target;
  const double p1 = engine.mass_where(db, y, f, 1);
  out.g1 = (mr.next_double() < p1) ? 1 : 0;
  out.g2 = (mr.next_double() < p1) ? 1 : 0;

  CountingEngine copy2 = pp.per_copy_theta ? engine : CountingEngine(1, 1);
  engine.collapse_guess(db, y, f, out.g1);
  const std::vector<double> dist = engine.theta_distribution(strategy);
  out.theta = detail::sample_index(dist, mr);
  out.s1 = support_from_theta(out.theta, strategy.effective_T());
  if (pp.per_copy_theta) {
    copy2.collapse_guess(db, y, f, out.g2);
    const std::vector<double> dist2 = copy2.theta_distribution(strategy);
    out.theta2 = detail::sample_index(dist2, mr);
    out.s2 = support_from_theta(*out.theta2, strategy.effective_T());
  } else {
    out.s2 = support_from_theta(out.theta, strategy.effective_T());
  }
  if (debug) debug->final_rows = engine.rows;
  return out;
}

// Honest-parties wrapper used by the mining layer: one protocol run for
// the support of one itemset. Combined estimate is the mean of the two
// copies' readouts.
inline std::tuple<double, double, double> estimate_support(const Database& db,
                                                           const BitString& itemset,
                                                           const ProtocolParams& pp,
                                                           StrategyKind kind, Rng& rng) {
  Rng srng = rng.fork("strategy");
  const Predicate target = Predicate::inclusion(itemset);
  if (target.width != db.record_width())
    throw std::invalid_argument("estimate_support: itemset width mismatch");
  const Strategy strategy = make_strategy(target, kind, pp.t, srng);
  ProtocolParams run = pp;
  run.n = db.n_qubits();
  run.k = db.record_width();
  run.seed = rng.next_u64();
  const CountOutcome out = run_main(db, strategy, AliceBehavior{}, BobBehavior{}, run);
  if (out.terminated) throw std::logic_error("estimate_support: honest run terminated");
  return {out.s1, out.s2, 0.5 * (out.s1 + out.s2)};
}

}  // namespace qpm
