#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qpm/database.hpp"
#include "qpm/layout.hpp"
#include "qpm/predicate.hpp"
#include "qpm/statevector.hpp"

namespace qpm {

namespace detail {

inline void check_db_layout(const StateVector& st, const RegisterLayout& lay, const Database& db) {
  if (st.num_qubits() != lay.total_qubits())
    throw std::invalid_argument("database oracle: layout does not cover the register");
  if (lay.width(Seg::Address) != db.n_qubits())
    throw std::invalid_argument("database oracle: address width mismatch");
  if (lay.width(Seg::Data) != db.record_width())
    throw std::invalid_argument("database oracle: data width mismatch");
}

}  // namespace detail

// U_D(y): |x>|tau> -> |x>|tau ^ rec_{x^y}>. y = 0 is the plain database
// oracle O_D; any y permutes which record lands under which address.
// Self-inverse for every y.
inline void apply_u_d(StateVector& st, const RegisterLayout& lay, const Database& db,
                      std::uint32_t y = 0) {
  detail::check_db_layout(st, lay, db);
  if (std::size_t(y) >= db.size()) throw std::invalid_argument("u_d: y out of range");
  const int nq = st.num_qubits();
  apply_xor_oracle(st, lay.offset(Seg::Data), lay.width(Seg::Data),
                   [&](std::size_t idx) -> std::uint32_t {
                     return db.record(lay.label(Seg::Address, idx, nq) ^ y);
                   });
}

inline void apply_o_d(StateVector& st, const RegisterLayout& lay, const Database& db) {
  apply_u_d(st, lay, db, 0);
}

// Phase query U_f: |j>|tau> -> (-1)^{f(tau)} |j>|tau>, optionally controlled.
// f = h (all-zero) is the identity; f = hbar (all-one) is -I on the
// controlled subspace.
inline void apply_u_f_phase(StateVector& st, const RegisterLayout& lay, const Predicate& f,
                            const std::vector<int>& controls = {}) {
  if (f.width != lay.width(Seg::Data))
    throw std::invalid_argument("u_f_phase: predicate width mismatch");
  const std::size_t cmask = detail::control_mask(st, controls);
  const int nq = st.num_qubits();
  const bool use_addr = f.address_dependent();
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & cmask) != cmask) continue;
    const std::uint32_t d = lay.label(Seg::Data, i, nq);
    const bool hit = use_addr ? f.eval2(lay.label(Seg::Address, i, nq), d) : f.eval(d);
    if (hit) st.amp(i) = -st.amp(i);
  }
}

// Bit query U'_f: |j>|tau>|x> -> |j>|tau>|x ^ f(tau)> into the one-qubit
// guess segment, optionally controlled.
inline void apply_u_f_bit(StateVector& st, const RegisterLayout& lay, const Predicate& f,
                          const std::vector<int>& controls = {}) {
  if (f.width != lay.width(Seg::Data))
    throw std::invalid_argument("u_f_bit: predicate width mismatch");
  if (!lay.has(Seg::Guess) || lay.width(Seg::Guess) != 1)
    throw std::invalid_argument("u_f_bit: needs a one-qubit guess segment");
  const std::size_t cmask = detail::control_mask(st, controls);
  const std::size_t gmask = st.mask_of(lay.qubit(Seg::Guess, 0));
  const int nq = st.num_qubits();
  const bool use_addr = f.address_dependent();
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & gmask) != 0 || (i & cmask) != cmask) continue;
    const std::uint32_t d = lay.label(Seg::Data, i, nq);
    const bool hit = use_addr ? f.eval2(lay.label(Seg::Address, i, nq), d) : f.eval(d);
    if (hit) std::swap(st.amp(i), st.amp(i | gmask));
  }
}

// Diffusion G = I - 2|+><+| on the segment [off, off+w), optionally
// controlled. Blockwise: a_x -> a_x - 2*mean(a). flip_sign applies -G
// instead (a correctness mutation hook for the verification suite; as a
// controlled operator the sign is physical).
inline void apply_diffusion(StateVector& st, int off, int w, const std::vector<int>& controls = {},
                            bool flip_sign = false) {
  if (off < 0 || w < 1 || off + w > st.num_qubits())
    throw std::out_of_range("diffusion: bad segment");
  detail::check_distinct(controls, st.num_qubits());
  const std::size_t cmask = detail::control_mask(st, controls);
  const int shift = st.num_qubits() - off - w;
  const std::size_t n = std::size_t(1) << w;
  const std::size_t seg_mask = (n - 1) << shift;
  if ((cmask & seg_mask) != 0) throw std::invalid_argument("diffusion: control inside segment");
  const double s = flip_sign ? -1.0 : 1.0;
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & seg_mask) != 0 || (i & cmask) != cmask) continue;
    cplx sum(0.0, 0.0);
    for (std::size_t l = 0; l < n; ++l) sum += st.amp(i | (l << shift));
    const cplx twice_mean = 2.0 * sum / double(n);
    for (std::size_t l = 0; l < n; ++l) {
      cplx& a = st.amp(i | (l << shift));
      a = s * (a - twice_mean);
    }
  }
}

inline void apply_diffusion(StateVector& st, const RegisterLayout& lay,
                            const std::vector<int>& controls = {}, bool flip_sign = false) {
  apply_diffusion(st, lay.offset(Seg::Address), lay.width(Seg::Address), controls, flip_sign);
}

// One full Grover iteration R(f) = G . U_D(y) . U_f . U_D(y), optionally
// controlled. U_D is applied unconditionally (it is not the controlled
// party's move); only U_f and G carry the control.
inline void apply_grover_iteration(StateVector& st, const RegisterLayout& lay, const Database& db,
                                   std::uint32_t y, const Predicate& f,
                                   const std::vector<int>& controls = {}, bool flip_sign = false) {
  apply_u_d(st, lay, db, y);
  apply_u_f_phase(st, lay, f, controls);
  apply_u_d(st, lay, db, y);
  apply_diffusion(st, lay, controls, flip_sign);
}

// ---- Test-state component gates --------------------------------------
//
// All act on the Address (width n) and Data (width k) segments.
//   W           H on every address qubit
//   V(mu,nu)    writes mu into data when address qubit 0 is |0>, nu when |1>
//   X_0^b       X on address qubit 0 (b = 1) or identity (b = 0)
//   Z(x)        phase (-1)^{<x, address>}
//   U_SWAP(0,m) swaps address qubits 0 and m (m = 0: identity)
// Each is self-inverse.

inline void apply_w(StateVector& st, const RegisterLayout& lay) {
  for (int q : lay.qubits(Seg::Address)) apply_h(st, q);
}

inline void apply_v(StateVector& st, const RegisterLayout& lay, const BitString& mu,
                    const BitString& nu) {
  const int k = lay.width(Seg::Data);
  if (mu.width != k || nu.width != k) throw std::invalid_argument("v: pair width mismatch");
  const int a0 = lay.qubit(Seg::Address, 0);
  const std::size_t a0mask = st.mask_of(a0);
  apply_xor_oracle(st, lay.offset(Seg::Data), k, [&](std::size_t idx) -> std::uint32_t {
    return (idx & a0mask) ? nu.value : mu.value;
  });
}

inline void apply_x0(StateVector& st, const RegisterLayout& lay, int b) {
  if (b != 0 && b != 1) throw std::invalid_argument("x0: b must be a bit");
  if (b) apply_x(st, lay.qubit(Seg::Address, 0));
}

inline void apply_zx(StateVector& st, const RegisterLayout& lay, const BitString& x) {
  if (x.width != lay.width(Seg::Address)) throw std::invalid_argument("zx: width mismatch");
  if (x.value == 0) return;
  const int nq = st.num_qubits();
  for (std::size_t i = 0; i < st.dim(); ++i)
    if (__builtin_popcount(x.value & lay.label(Seg::Address, i, nq)) & 1) st.amp(i) = -st.amp(i);
}

inline void apply_uswap(StateVector& st, const RegisterLayout& lay, int m) {
  if (m < 0 || m >= lay.width(Seg::Address)) throw std::out_of_range("uswap: m out of range");
  if (m == 0) return;
  apply_gate(st, GateKind::Swap, {lay.qubit(Seg::Address, 0), lay.qubit(Seg::Address, m)});
}

// U_t(m,x,b) = U_SWAP(0,m) Z(x) X_0^b V(mu,nu) (W (x) I_d), applied
// rightmost factor first. Not self-adjoint in general, so the adjoint is
// spelled out separately (each factor is).
inline void apply_u_t(StateVector& st, const RegisterLayout& lay, int m, const BitString& x, int b,
                      const BitString& mu, const BitString& nu) {
  if (!(mu.value < nu.value)) throw std::invalid_argument("u_t: needs mu < nu");
  apply_w(st, lay);
  apply_v(st, lay, mu, nu);
  apply_x0(st, lay, b);
  apply_zx(st, lay, x);
  apply_uswap(st, lay, m);
}

inline void apply_u_t_adjoint(StateVector& st, const RegisterLayout& lay, int m, const BitString& x,
                              int b, const BitString& mu, const BitString& nu) {
  if (!(mu.value < nu.value)) throw std::invalid_argument("u_t: needs mu < nu");
  apply_uswap(st, lay, m);
  apply_zx(st, lay, x);
  apply_x0(st, lay, b);
  apply_v(st, lay, mu, nu);
  apply_w(st, lay);
}

// ---- Control schedule --------------------------------------------------
//
// The T = 2^t loops of the counting phase map onto control qubits so that
// the product of controlled iterations equals U^c on the |c> branch:
// loop 0 applies nothing; qubit j controls the next 2^{t-1-j} loops.

// First loop index and loop count for control qubit j.
inline std::pair<std::uint64_t, std::uint64_t> schedule_block(int j, int t) {
  if (t < 1 || j < 0 || j >= t) throw std::out_of_range("schedule_block: bad qubit");
  const std::uint64_t first = 1 + ((std::uint64_t(1) << t) - (std::uint64_t(1) << (t - j)));
  return {first, std::uint64_t(1) << (t - 1 - j)};
}

// Control qubit for loop i, or nullopt for the idle loop i = 0.
inline std::optional<int> control_schedule(std::uint64_t i, int t) {
  if (t < 1 || t > 30) throw std::out_of_range("control_schedule: bad t");
  if (i >= (std::uint64_t(1) << t)) throw std::out_of_range("control_schedule: loop out of range");
  if (i == 0) return std::nullopt;
  std::uint64_t start = 1;
  for (int j = 0; j < t; ++j) {
    const std::uint64_t len = std::uint64_t(1) << (t - 1 - j);
    if (i < start + len) return j;
    start += len;
  }
  throw std::logic_error("control_schedule: unreachable");
}

}  // namespace qpm
