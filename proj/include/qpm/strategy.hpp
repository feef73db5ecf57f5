#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qpm/database.hpp"
#include "qpm/layout.hpp"
#include "qpm/oracles.hpp"
#include "qpm/predicate.hpp"
#include "qpm/rng.hpp"
#include "qpm/statevector.hpp"

namespace qpm {

// Bob's per-loop function sequence f_0..f_{T-1} plus confusing-qubit
// bookkeeping. Loop 0 is the idle loop (no controlled operator), so
// funcs[0] is never applied; windows of consecutive loops map onto control
// qubits via schedule_block. Invariants (enforced by make_strategy,
// checked numerically by verify_strategy):
//   - measured control qubit j nets R(f)^{2^{t-1-j-r_j}}, where r_j counts
//     confusing qubits above j (each one halves the genuine share);
//   - every confusing qubit's window nets the identity exactly;
//   - f_{T-1} = f (the last loop carries no noise).
struct Strategy {
  int t = 1;
  Predicate target;
  std::vector<Predicate> funcs;
  std::vector<int> confusing;

  std::uint64_t big_T() const { return std::uint64_t(1) << t; }
  int effective_t() const { return t - int(confusing.size()); }
  std::uint64_t effective_T() const { return std::uint64_t(1) << effective_t(); }

  bool is_confusing(int j) const {
    return std::find(confusing.begin(), confusing.end(), j) != confusing.end();
  }
  std::vector<int> measured_controls() const {
    std::vector<int> out;
    for (int j = 0; j < t; ++j)
      if (!is_confusing(j)) out.push_back(j);
    return out;
  }
  // Confusing qubits above j; their windows hide half the genuine
  // iterations each, so j's net exponent is 2^{t-1-j-r_j}.
  int confusing_above(int j) const {
    int r = 0;
    for (int u : confusing)
      if (u > j) ++r;
    return r;
  }
  std::uint64_t net_power(int j) const {
    if (is_confusing(j)) return 0;
    return std::uint64_t(1) << (t - 1 - j - confusing_above(j));
  }

  const Predicate& function_at(std::uint64_t i) const {
    if (i >= funcs.size()) throw std::out_of_range("strategy: loop out of range");
    return funcs[i];
  }

  void validate() const {
    if (t < 1 || funcs.size() != big_T()) throw std::invalid_argument("strategy: bad size");
    if (confusing.size() > 2) throw std::invalid_argument("strategy: too many confusing qubits");
    for (int u : confusing)
      if (u < 0 || u >= t - 1) throw std::invalid_argument("strategy: confusing qubit out of range");
    if (!std::is_sorted(confusing.begin(), confusing.end()) ||
        std::adjacent_find(confusing.begin(), confusing.end()) != confusing.end())
      throw std::invalid_argument("strategy: confusing set not sorted/unique");
    if (funcs.back() != target) throw std::invalid_argument("strategy: last loop must be genuine");
  }
};

enum class StrategyKind { Trivial, OneConfusing, TwoConfusing };

namespace detail {

// A wrong-but-plausible noise function: a random truth table distinct
// from f, h and hbar.
inline Predicate random_noise(const Predicate& f, Rng& rng) {
  const int w = f.width;
  const std::size_t rows = std::size_t(1) << w;
  std::vector<std::uint8_t> truth(rows), zero(rows, 0), one(rows, 1), target(rows);
  for (std::size_t v = 0; v < rows; ++v) target[v] = f.eval(std::uint32_t(v)) ? 1 : 0;
  do {
    for (auto& bit : truth) bit = std::uint8_t(rng.next_below(2));
  } while (truth == target || truth == zero || truth == one);
  return Predicate::from_table(std::move(truth), w);
}

// Window patterns, in loop-time order. Each building block nets a fixed
// operator: [h,h] -> I, [f',h,f',h] -> I, [h,h,f,f] -> R(f)^2, and the
// printed sixteen-loop quarter sequence -> R(f)^4 (even hbar count, so no
// stray sign lands on the control qubit).
inline void fill_identity_window(std::vector<Predicate>& funcs, std::size_t first, std::size_t len,
                                 const Predicate& h, const Predicate& fp) {
  if (len == 2) {
    funcs[first] = h;
    funcs[first + 1] = h;
    return;
  }
  for (std::size_t b = 0; b < len / 4; ++b) {
    funcs[first + 4 * b + 0] = fp;
    funcs[first + 4 * b + 1] = h;
    funcs[first + 4 * b + 2] = fp;
    funcs[first + 4 * b + 3] = h;
  }
}

inline void fill_half_window(std::vector<Predicate>& funcs, std::size_t first, std::size_t len,
                             const Predicate& f, const Predicate& h) {
  for (std::size_t b = 0; b < len / 4; ++b) {
    funcs[first + 4 * b + 0] = h;
    funcs[first + 4 * b + 1] = h;
    funcs[first + 4 * b + 2] = f;
    funcs[first + 4 * b + 3] = f;
  }
}

inline void fill_quarter_window(std::vector<Predicate>& funcs, std::size_t first, std::size_t len,
                                const Predicate& f, const Predicate& h, const Predicate& hb) {
  if (len == 16) {
    const Predicate seq[16] = {h, h, f, f, hb, hb, h, hb, hb, h, f, f, h, hb, h, hb};
    for (std::size_t i = 0; i < 16; ++i) funcs[first + i] = seq[i];
    return;
  }
  for (std::size_t b = 0; b < len / 4; ++b) {
    const std::size_t at = first + 4 * b;
    if (b % 2 == 0) {
      funcs[at + 0] = h;
      funcs[at + 1] = h;
      funcs[at + 2] = f;
      funcs[at + 3] = f;
    } else {
      funcs[at + 0] = hb;
      funcs[at + 1] = h;
      funcs[at + 2] = hb;
      funcs[at + 3] = h;
    }
  }
}

}  // namespace detail

// Builds a strategy of the requested kind. Confusing qubits sit low
// (close to the most significant control) so the cheap windows further
// down stay genuine: one confusing -> C_1 (C_0 for t = 2), two confusing
// -> C_1, C_2 (C_0, C_1 for t = 3).
inline Strategy make_strategy(const Predicate& f, StrategyKind kind, int t, Rng& rng) {
  if (t < 1 || t > 24) throw std::invalid_argument("make_strategy: bad t");
  Strategy s;
  s.t = t;
  s.target = f;
  s.funcs.assign(std::size_t(1) << t, f);
  if (kind == StrategyKind::Trivial) return s;
  if (kind == StrategyKind::OneConfusing) {
    if (t < 2) throw std::invalid_argument("make_strategy: one confusing qubit needs t >= 2");
    s.confusing = {t == 2 ? 0 : 1};
  } else {
    if (t < 3) throw std::invalid_argument("make_strategy: two confusing qubits need t >= 3");
    s.confusing = t == 3 ? std::vector<int>{0, 1} : std::vector<int>{1, 2};
  }
  const Predicate h = Predicate::all_zero(f.width);
  const Predicate hb = Predicate::all_one(f.width);
  const Predicate fp = detail::random_noise(f, rng);
  for (int j = 0; j < t; ++j) {
    const auto [first, len] = schedule_block(j, t);
    if (s.is_confusing(j)) {
      detail::fill_identity_window(s.funcs, first, len, h, fp);
    } else if (s.confusing_above(j) == 1) {
      detail::fill_half_window(s.funcs, first, len, f, h);
    } else if (s.confusing_above(j) == 2) {
      detail::fill_quarter_window(s.funcs, first, len, f, h, hb);
    }
  }
  s.validate();
  return s;
}

// Numerical soundness check: for every control qubit, the product of the
// window's uncontrolled iterations must equal R(f)^{net_power} (identity
// for confusing qubits), so the controlled product collapses to a G-power
// phase estimation on the measured qubits. Full basis sweep when the
// register is small, random probes otherwise. Checks y = 0 plus one
// random y. On failure reports the first offending control qubit.
inline bool verify_strategy(const Strategy& s, const Database& db, Rng& rng,
                            int* offender = nullptr) {
  s.validate();
  const auto lay = RegisterLayout::address_data(db.n_qubits(), db.record_width());
  const int nq = lay.total_qubits();
  const std::size_t dim = std::size_t(1) << nq;
  const bool full_sweep = nq <= 6;
  const std::size_t probes = full_sweep ? dim : 8;
  const std::uint32_t ys[2] = {0, std::uint32_t(rng.next_below(db.size()))};
  for (int j = 0; j < s.t; ++j) {
    const auto [first, len] = schedule_block(j, s.t);
    const std::uint64_t power = s.net_power(j);
    for (std::uint32_t y : ys) {
      for (std::size_t pr = 0; pr < probes; ++pr) {
        StateVector got(nq), want(nq);
        if (full_sweep) {
          got.amp(0) = 0.0;
          got.amp(pr) = 1.0;
        } else {
          for (std::size_t i = 0; i < dim; ++i) got.amp(i) = cplx(rng.next_double() - 0.5,
                                                                  rng.next_double() - 0.5);
          double nrm = 0.0;
          for (std::size_t i = 0; i < dim; ++i) nrm += std::norm(got.amp(i));
          nrm = std::sqrt(nrm);
          for (std::size_t i = 0; i < dim; ++i) got.amp(i) /= nrm;
        }
        for (std::size_t i = 0; i < dim; ++i) want.amp(i) = got.amp(i);
        for (std::uint64_t i = 0; i < len; ++i)
          apply_grover_iteration(got, lay, db, y, s.funcs[first + i]);
        for (std::uint64_t rep = 0; rep < power; ++rep)
          apply_grover_iteration(want, lay, db, y, s.target);
        double dist = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dist += std::norm(got.amp(i) - want.amp(i));
        if (std::sqrt(dist) > 1e-9) {
          if (offender) *offender = j;
          return false;
        }
      }
    }
  }
  return true;
}

}  // namespace qpm
