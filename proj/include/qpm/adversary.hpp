#pragma once
// Adversarial behaviors around the counting protocol: Bob-side one-round
// attacks (substitute a basis state, measure and resume, entangle with a
// private ancilla, infer and resend), Bob's multi-round function swap,
// Alice-side probe and flood attacks, and Bob's trap counter-strategy.
// Each carries the exact detection or payoff statistics the verification
// suite pins down.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpm/bitstring.hpp"
#include "qpm/database.hpp"
#include "qpm/layout.hpp"
#include "qpm/oracles.hpp"
#include "qpm/predicate.hpp"
#include "qpm/protocol.hpp"
#include "qpm/rng.hpp"
#include "qpm/statevector.hpp"
#include "qpm/strategy.hpp"
#include "qpm/teststates.hpp"

namespace qpm {

// ---- Round triggers ----------------------------------------------------

// Which test rounds an attack fires on; the default fires on all of them.
// A trigger that never fires must leave the honest transcript untouched
// byte for byte, which the suite checks.
struct AttackRounds {
  bool every = true;
  std::set<std::uint64_t> rounds;

  static AttackRounds never() { return AttackRounds{false, {}}; }
  static AttackRounds only(std::set<std::uint64_t> r) { return AttackRounds{false, std::move(r)}; }
  bool fires(std::uint64_t loop) const { return every || rounds.count(loop) > 0; }
};

namespace detail {

inline void honest_test1(StateVector& st, const RegisterLayout& lay, bool active,
                         const Predicate& fi) {
  if (active) apply_u_f_phase(st, lay, fi);
}

inline std::size_t basis_index(const RegisterLayout& lay, std::uint32_t address,
                               std::uint32_t data, int total) {
  std::size_t idx = lay.with_label(Seg::Address, 0, address, total);
  return lay.with_label(Seg::Data, idx, data, total);
}

}  // namespace detail

// ---- Bob: substitution -------------------------------------------------

// Bob discards the test state and sends the basis state |address>|data>.
// Unless data matches what the drawn pair assigns to that address, the
// unwind leaves no mass on the accepting outcomes and a single test round
// catches him with certainty; even a matching guess passes a round only
// with probability 2/N^2 (both copies must land on the same accepted v).
inline BobBehavior bob_attack1(const BitString& address, const BitString& data,
                               AttackRounds when = {}) {
  BobBehavior b;
  b.test1 = [address, data, when](StateVector& st, const RegisterLayout& lay, std::uint64_t loop,
                                  int, bool active, const Predicate& fi, const TestDraw&, Rng&) {
    if (!when.fires(loop)) return detail::honest_test1(st, lay, active, fi);
    StateVector sub(st.num_qubits());
    sub.amp(0) = 0.0;
    sub.amp(detail::basis_index(lay, address.value, data.value, st.num_qubits())) = 1.0;
    st = std::move(sub);
  };
  return b;
}

// Substitution by a cheater who somehow learned the drawn pair and sends
// d = mu, the strongest basis-state guess available.
inline BobBehavior bob_attack1_guessing(const BitString& address, AttackRounds when = {}) {
  BobBehavior b;
  b.test1 = [address, when](StateVector& st, const RegisterLayout& lay, std::uint64_t loop, int,
                            bool active, const Predicate& fi, const TestDraw& d, Rng&) {
    if (!when.fires(loop)) return detail::honest_test1(st, lay, active, fi);
    StateVector sub(st.num_qubits());
    sub.amp(0) = 0.0;
    sub.amp(detail::basis_index(lay, address.value, d.mu.value, st.num_qubits())) = 1.0;
    st = std::move(sub);
  };
  return b;
}

// What the same substitution reads when smuggled into a computational
// round: the database oracle turns |address>|0> into |address>|rec_{a^y}>,
// handing Bob one chosen record per round.
inline BitString attack1_computational_read(const Database& db, std::uint32_t address,
                                            std::uint64_t y) {
  const auto lay = RegisterLayout::address_data(db.n_qubits(), db.record_width());
  StateVector st(lay.total_qubits());
  st.amp(0) = 0.0;
  st.amp(detail::basis_index(lay, address, 0, lay.total_qubits())) = 1.0;
  apply_u_d(st, lay, db, y);
  const std::uint32_t kmask = (1u << db.record_width()) - 1u;
  for (std::size_t v = 0; v < st.dim(); ++v)
    if (std::norm(st.amp(v)) > 0.5) return BitString(std::uint32_t(v) & kmask, db.record_width());
  throw std::logic_error("attack1_computational_read: no basis component");
}

// ---- Bob: measure and resume --------------------------------------------

enum class Attack2Scope { Data, AddressData };

// Bob measures the first copy's registers and then acts honestly. A
// data-only measurement collapses onto one half of the pair, leaving v_0
// uniform while the honest second copy pins w_0: caught half the time. A
// joint address+data measurement strands all but 2/N of the mass off the
// accepting outcomes: caught but for 1/N.
inline BobBehavior bob_attack2(Attack2Scope scope, AttackRounds when = {}) {
  BobBehavior b;
  b.test1 = [scope, when](StateVector& st, const RegisterLayout& lay, std::uint64_t loop, int copy,
                          bool active, const Predicate& fi, const TestDraw&, Rng& rng) {
    if (when.fires(loop) && copy == 1) {
      std::vector<int> qs;
      if (scope == Attack2Scope::AddressData)
        for (int q : lay.qubits(Seg::Address)) qs.push_back(q);
      for (int q : lay.qubits(Seg::Data)) qs.push_back(q);
      measure(st, qs, rng);
    }
    detail::honest_test1(st, lay, active, fi);
  };
  return b;
}

// ---- Bob: entangle and return -------------------------------------------

enum class Attack3Variant { FullCopy, DataCopy };

// Bob fans the received registers out onto a private ancilla with CNOTs
// and otherwise plays honestly. Tracing out the ancilla leaves the same
// mixtures the measurement attack produces, so copying address plus data
// is caught but for 1/N and copying the data alone half the time. In a
// computational round the data register is returned unloaded (|0>), so
// the fanout there learns nothing and leaves no entanglement behind.
inline BobBehavior bob_attack3(Attack3Variant v, int n, int k, AttackRounds when = {}) {
  BobBehavior b;
  b.ancilla_width = (v == Attack3Variant::FullCopy) ? n + k : k;
  b.test1 = [v, when](StateVector& st, const RegisterLayout& lay, std::uint64_t loop, int copy,
                      bool active, const Predicate& fi, const TestDraw&, Rng&) {
    if (when.fires(loop) && copy == 1) {
      std::vector<int> src;
      if (v == Attack3Variant::FullCopy)
        for (int q : lay.qubits(Seg::Address)) src.push_back(q);
      for (int q : lay.qubits(Seg::Data)) src.push_back(q);
      const auto anc = lay.qubits(Seg::Scratch);
      for (std::size_t i = 0; i < src.size(); ++i)
        apply_gate(st, GateKind::X, {anc[i]}, {src[i]});
    }
    detail::honest_test1(st, lay, active, fi);
  };
  return b;
}

// ---- Bob: infer and resend ----------------------------------------------

enum class RecoveryPolicy { Computational, TestBasis };

// Every test-state parameter tuple on n address and k data bits, in
// lexicographic (m, x, b, mu, nu) order; maximum-likelihood ties resolve
// to the first hit, i.e. the lowest tuple.
inline std::vector<TestParams> all_test_params(int n, int k) {
  if (n < 1 || n > 8 || k < 1 || k > 8) throw std::invalid_argument("all_test_params: bad widths");
  std::vector<TestParams> out;
  const std::uint32_t N = 1u << n, K = 1u << k;
  for (int m = 0; m < n; ++m)
    for (std::uint32_t x = 0; x < N; ++x)
      for (int b = 0; b < 2; ++b)
        for (std::uint32_t mu = 0; mu + 1 < K; ++mu)
          for (std::uint32_t nu = mu + 1; nu < K; ++nu)
            out.push_back({m, BitString(x, n), b, BitString(mu, k), BitString(nu, k)});
  return out;
}

// Cached geometry for the infer-and-resend attack: the parameter family
// and, when the basis policy is in play, every overlap between the fixed
// reference test basis and the family (test states are real, so the
// overlaps are too).
struct RecoveryTables {
  int n = 0, k = 0;
  std::vector<TestParams> params;
  std::vector<TestParams> basis;             // members of the reference basis
  std::vector<std::vector<double>> overlap;  // overlap[i][p] = <basis_i|psi_p>
};

inline std::shared_ptr<const RecoveryTables> make_recovery_tables(int n, int k, bool with_basis) {
  auto tb = std::make_shared<RecoveryTables>();
  tb->n = n;
  tb->k = k;
  tb->params = all_test_params(n, k);
  if (with_basis) {
    tb->basis = enumerate_bases(n, k).front().members;
    const std::size_t dim = std::size_t(1) << (n + k);
    tb->overlap.assign(tb->basis.size(), std::vector<double>(tb->params.size(), 0.0));
    for (std::size_t i = 0; i < tb->basis.size(); ++i)
      for (std::size_t p = 0; p < tb->params.size(); ++p) {
        double dot = 0.0;
        for (std::size_t v = 0; v < dim; ++v)
          dot += test_state_amp(tb->basis[i], v) * test_state_amp(tb->params[p], v);
        tb->overlap[i][p] = dot;
      }
  }
  return tb;
}

// Bob measures each received copy (computational basis, or the reference
// test basis), picks the maximum-likelihood parameter tuple for the
// outcome, and sends that tuple's state back. No measurement policy can
// push the per-round pass probability above 1/4 + 3/(4 n (2^k - 1)).
inline BobBehavior bob_recovery(std::shared_ptr<const RecoveryTables> tb, RecoveryPolicy policy) {
  if (!tb) throw std::invalid_argument("bob_recovery: missing tables");
  if (policy == RecoveryPolicy::TestBasis && tb->basis.empty())
    throw std::invalid_argument("bob_recovery: tables lack the basis overlaps");
  BobBehavior b;
  b.test1 = [tb, policy](StateVector& st, const RegisterLayout&, std::uint64_t, int, bool,
                         const Predicate&, const TestDraw&, Rng& rng) {
    std::size_t best = 0;
    double top = -1.0;
    if (policy == RecoveryPolicy::Computational) {
      std::vector<int> all(std::size_t(st.num_qubits()));
      for (int q = 0; q < st.num_qubits(); ++q) all[std::size_t(q)] = q;
      const std::size_t v = measure(st, all, rng).bits.value;
      for (std::size_t p = 0; p < tb->params.size(); ++p) {
        const double like = std::abs(test_state_amp(tb->params[p], v));
        if (like > top + 1e-12) {
          top = like;
          best = p;
        }
      }
    } else {
      std::vector<double> mass(tb->basis.size(), 0.0);
      for (std::size_t i = 0; i < tb->basis.size(); ++i) {
        cplx c = 0.0;
        for (std::size_t v = 0; v < st.dim(); ++v)
          c += test_state_amp(tb->basis[i], v) * st.amp(v);
        mass[i] = std::norm(c);
      }
      const double u = rng.next_double();
      double acc = 0.0;
      std::size_t hit = mass.size() - 1;
      for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i];
        if (u < acc) {
          hit = i;
          break;
        }
      }
      for (std::size_t p = 0; p < tb->params.size(); ++p) {
        const double post = tb->overlap[hit][p] * tb->overlap[hit][p];
        if (post > top + 1e-12) {
          top = post;
          best = p;
        }
      }
    }
    st = test_state(tb->params[best]);
  };
  return b;
}

// Oracle-grade cheat used as a sanity floor: resends the exact drawn test
// state, which passes every round.
inline BobBehavior bob_resend_exact() {
  BobBehavior b;
  b.test1 = [](StateVector& st, const RegisterLayout&, std::uint64_t, int, bool, const Predicate&,
               const TestDraw& d, Rng&) { st = test_state({d.m, d.x, d.b, d.mu, d.nu}); };
  return b;
}

// Exact ceiling on the computational-basis posterior: every outcome is
// compatible with at least n (2^k - 1) equally likely tuples.
inline double max_computational_posterior(int n, int k) {
  const auto params = all_test_params(n, k);
  const std::size_t dim = std::size_t(1) << (n + k);
  double worst = 0.0;
  for (std::size_t v = 0; v < dim; ++v) {
    long compat = 0;
    for (const auto& p : params)
      if (std::abs(test_state_amp(p, v)) > 1e-12) ++compat;
    worst = std::max(worst, 1.0 / double(compat));
  }
  return worst;
}

// ---- Bob: multi-round function swap --------------------------------------

// Bob answers every query, phase or bit, with his own predicate g instead
// of the scheduled function. A data-only g maps each test state onto
// itself or its b-flipped partner, so the tests never fire; an
// address-targeted g leaks stray mass whenever its flip lands on the
// drawn pair.
inline BobBehavior bob_multiround(const Predicate& g) {
  BobBehavior b;
  b.test1 = [g](StateVector& st, const RegisterLayout& lay, std::uint64_t, int, bool active,
                const Predicate&, const TestDraw&, Rng&) {
    if (active) apply_u_f_phase(st, lay, g);
  };
  b.test2 = [g](StateVector& st, const RegisterLayout& lay, std::uint64_t, int, const Predicate&,
                const TestDraw&, Rng&) { apply_u_f_bit(st, lay, g); };
  return b;
}

// |<psi|S psi>|^2 for a uniform N-component comparison state when a phase
// flip lands on `hits` of its components.
inline double phase_flip_fidelity(int n, int hits) {
  const double big_n = double(std::uint64_t(1) << n);
  const double o = 1.0 - 2.0 * double(hits) / big_n;
  return o * o;
}

// The same number through the state route, as a cross-check.
inline double phase_flip_fidelity_state(int n, int hits) {
  const std::size_t dim = std::size_t(1) << n;
  if (hits < 0 || std::size_t(hits) > dim)
    throw std::invalid_argument("phase_flip_fidelity_state: bad hit count");
  const double a = 1.0 / std::sqrt(double(dim));
  double dot = 0.0;
  for (std::size_t i = 0; i < dim; ++i) dot += a * (i < std::size_t(hits) ? -a : a);
  return dot * dot;
}

// ---- Alice: superposition probe ------------------------------------------

// Alice swaps a round's state for (|0..0>|tau> + |0..1>|1..1>)/sqrt2 and
// reads the +/- phase after one query. The readout reports whether f_i
// treats tau like the all-ones itemset, which equals f_i(tau) whenever
// f_i keeps the legality promise f_i(1..1) = 1; noise functions owe no
// such promise, so probing a confusing loop reads the wrong function.
inline int alice_probe_read(const Predicate& fi, const BitString& tau, int n = 1) {
  if (n < 1 || n > 20) throw std::invalid_argument("alice_probe_read: bad n");
  const int k = tau.width;
  if (tau == BitString::ones(k)) throw std::invalid_argument("alice_probe_read: tau is all-ones");
  const auto lay = RegisterLayout::address_data(n, k);
  const int total = lay.total_qubits();
  StateVector st(total);
  st.amp(0) = 0.0;
  const double r = 1.0 / std::numbers::sqrt2;
  st.amp(detail::basis_index(lay, 0, tau.value, total)) = r;
  st.amp(detail::basis_index(lay, 1, BitString::ones(k).value, total)) = r;
  apply_u_f_phase(st, lay, fi);
  const double s0 = st.amp(detail::basis_index(lay, 0, tau.value, total)).real();
  const double s1 = st.amp(detail::basis_index(lay, 1, BitString::ones(k).value, total)).real();
  return (s0 * s1 > 0.0) ? 1 : 0;
}

// ---- Alice: flood --------------------------------------------------------

// Alice turns every loop into a phase-query test with nu = 1..1 and a
// fixed mu, reads the inferred f_i(mu) per loop, and majority-votes
// inside each control block (ties resolve to 0). Noise functions read as
// follows: h and hbar both report 1, a complement g = 1-f reports f(mu),
// so trivial and half-genuine windows vote correctly while the
// two-confusing quarter windows outvote the genuine loops whenever
// f(mu) = 0.
struct FloodResult {
  std::vector<int> readings;  // per loop; loop 0 is unscheduled and reads -1
  std::vector<int> votes;     // per control qubit
};

inline FloodResult alice_flood(const Strategy& s, int n, const BitString& mu) {
  const int k = mu.width;
  if (mu == BitString::ones(k)) throw std::invalid_argument("alice_flood: mu is all-ones");
  if (k != s.target.width) throw std::invalid_argument("alice_flood: width mismatch");
  FloodResult out;
  const std::uint64_t big_t = s.big_T();
  out.readings.assign(big_t, -1);
  std::vector<std::array<long, 2>> counts(std::size_t(s.t), {0, 0});
  const BitString nu = BitString::ones(k);
  const BitString x0 = BitString::zeros(n);
  const auto lay = RegisterLayout::address_data(n, k);
  const std::size_t msb = std::size_t(1) << (lay.total_qubits() - 1);
  for (std::uint64_t i = 1; i < big_t; ++i) {
    const auto cq = control_schedule(i, s.t);
    if (!cq) continue;
    StateVector st(lay.total_qubits());
    apply_u_t(st, lay, 0, x0, 0, mu, nu);
    apply_u_f_phase(st, lay, s.function_at(i));
    apply_u_t_adjoint(st, lay, 0, x0, 0, mu, nu);
    const int v0 = std::norm(st.amp(msb)) > 0.5 ? 1 : 0;
    out.readings[i] = 1 - v0;
    ++counts[std::size_t(*cq)][std::size_t(1 - v0)];
  }
  out.votes.assign(std::size_t(s.t), 0);
  for (int j = 0; j < s.t; ++j)
    out.votes[std::size_t(j)] = counts[std::size_t(j)][1] > counts[std::size_t(j)][0] ? 1 : 0;
  return out;
}

// Whole-table recovery by flooding one run per mu and trusting one
// block's vote; the all-ones row is fixed by the legality promise.
inline Predicate alice_flood_recover(const Strategy& s, int n, int block) {
  const int k = s.target.width;
  if (block < 0 || block >= s.t) throw std::invalid_argument("alice_flood_recover: bad block");
  std::vector<std::uint8_t> table(std::size_t(1) << k, 1);
  for (std::uint32_t mu = 0; mu + 1 < (1u << k); ++mu)
    table[mu] = std::uint8_t(alice_flood(s, n, BitString(mu, k)).votes[std::size_t(block)]);
  return Predicate::from_table(std::move(table), k);
}

// ---- Bob: trap counter-strategy ------------------------------------------

// Three-control trap run: C_0 gets the identity quad [f',h,f',h], C_1 the
// signed pair [hbar,h], C_2 a private coin toss between [h] and [hbar].
// After Bob undoes the diffusion half of the C_2 window, the +/- readout
// of the controls is (+,-,coin sign) with certainty. A hijacked C_2
// exchange deprives the computational register of Bob's query, and the
// hijacker must reconstruct it blind: a wrong coin guess flips the
// expected C_2 sign.
struct TrapRun {
  bool detected = false;
  int coin = 0;
  BitString pattern;  // control bits after the +/- readout
};

inline TrapRun hbar_trap_run(const Database& db, const Predicate& fprime, bool alice_hijacks,
                             Rng& rng) {
  const int t = 3;
  const auto lay = RegisterLayout::counting(t, db.n_qubits(), db.record_width(), false);
  StateVector st(lay.total_qubits());
  for (int q : lay.qubits(Seg::Control)) apply_h(st, q);
  for (int q : lay.qubits(Seg::Address)) apply_h(st, q);
  const Predicate h = Predicate::all_zero(db.record_width());
  const Predicate hb = Predicate::all_one(db.record_width());
  const int coin = int(rng.next_below(2));
  const Predicate seq[8] = {h, fprime, h, fprime, h, hb, h, coin ? hb : h};
  for (std::uint64_t i = 1; i < 8; ++i) {
    const auto cq = control_schedule(i, t);
    const std::vector<int> ctl = {lay.qubit(Seg::Control, *cq)};
    const Predicate& fi =
        (i == 7 && alice_hijacks) ? (rng.next_below(2) ? hb : h) : seq[std::size_t(i)];
    apply_grover_iteration(st, lay, db, 0, fi, ctl);
  }
  apply_diffusion(st, lay, {lay.qubit(Seg::Control, 2)});
  for (int q : lay.qubits(Seg::Control)) apply_h(st, q);
  TrapRun out;
  out.coin = coin;
  out.pattern = measure(st, lay.qubits(Seg::Control), rng).bits;
  out.detected =
      out.pattern.bit(0) != 0 || out.pattern.bit(1) != 1 || out.pattern.bit(2) != coin;
  return out;
}

// ---- Leakage accounting ---------------------------------------------------

// Mean protocol loops a data-measuring Bob survives across full runs
// (completed runs count all T loops); the budget is 2/p - 1.
inline double mean_rounds_before_detection(const Database& db, const Strategy& strategy,
                                           const ProtocolParams& pp, long trials, Rng& rng) {
  const BobBehavior bob = bob_attack2(Attack2Scope::Data);
  double sum = 0.0;
  for (long i = 0; i < trials; ++i) {
    ProtocolParams run = pp;
    run.seed = rng.next_u64();
    const CountOutcome out = run_main(db, strategy, {}, bob, run);
    sum += double(out.detection ? out.detection->loop : pp.big_T());
  }
  return sum / double(trials);
}

// ---- Attack specs ----------------------------------------------------------

// On-disk description of an attack for experiment configs: a kind tag
// plus kind-specific parameters.
struct AttackSpec {
  std::string kind = "honest";
  nlohmann::json params = nlohmann::json::object();

  static const std::vector<std::string>& kinds() {
    static const std::vector<std::string> names = {
        "honest",           "attack1_send", "attack1_guess_pair", "attack2_measure",
        "attack3_entangle", "recovery",     "resend_exact",       "multiround"};
    return names;
  }

  nlohmann::json to_json() const { return {{"kind", kind}, {"params", params}}; }

  static AttackSpec from_json(const nlohmann::json& j) {
    AttackSpec s;
    s.kind = j.at("kind").get<std::string>();
    if (j.contains("params")) s.params = j.at("params");
    const auto& known = kinds();
    if (std::find(known.begin(), known.end(), s.kind) == known.end())
      throw std::invalid_argument("attack spec: unknown kind '" + s.kind + "'");
    return s;
  }
};

// Instantiates the Bob-side behavior an attack spec names.
inline BobBehavior make_bob_behavior(const AttackSpec& spec, int n, int k) {
  const auto& pr = spec.params;
  if (spec.kind == "honest") return {};
  if (spec.kind == "attack1_send")
    return bob_attack1(BitString::parse(pr.at("address").get<std::string>()),
                       BitString::parse(pr.at("data").get<std::string>()));
  if (spec.kind == "attack1_guess_pair")
    return bob_attack1_guessing(BitString::parse(pr.at("address").get<std::string>()));
  if (spec.kind == "attack2_measure")
    return bob_attack2(pr.at("scope").get<std::string>() == "address_data"
                           ? Attack2Scope::AddressData
                           : Attack2Scope::Data);
  if (spec.kind == "attack3_entangle")
    return bob_attack3(pr.at("variant").get<std::string>() == "full_copy"
                           ? Attack3Variant::FullCopy
                           : Attack3Variant::DataCopy,
                       n, k);
  if (spec.kind == "recovery") {
    const bool basis = pr.at("policy").get<std::string>() == "test_basis";
    return bob_recovery(make_recovery_tables(n, k, basis),
                        basis ? RecoveryPolicy::TestBasis : RecoveryPolicy::Computational);
  }
  if (spec.kind == "resend_exact") return bob_resend_exact();
  if (spec.kind == "multiround") {
    const BitString d = BitString::parse(pr.at("d").get<std::string>());
    Predicate g = Predicate::delta(d);
    if (pr.contains("address")) g = Predicate::address_delta(pr.at("address").get<std::uint32_t>(),
                                                             Predicate::delta(d));
    return bob_multiround(g);
  }
  throw std::invalid_argument("attack spec: no behavior for kind '" + spec.kind + "'");
}

}  // namespace qpm
