#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qpm/bitstring.hpp"
#include "qpm/rng.hpp"

namespace qpm {

using cplx = std::complex<double>;

// Dense state vector over up to ~20 qubits.
//
// Qubit ordering: qubit 0 is the most significant bit of the basis index.
// For a register of Q qubits, qubit q lives at bit position (Q-1-q) of the
// index word. All segment labels read out of an index use the same rule, so
// a contiguous qubit range [off, off+w) is the bit field
// (idx >> (Q-off-w)) & (2^w - 1).
class StateVector {
 public:
  explicit StateVector(int num_qubits) : nq_(num_qubits) {
    if (num_qubits < 0 || num_qubits > 26)
      throw std::invalid_argument("StateVector: qubit count out of range");
    amps_.assign(std::size_t(1) << num_qubits, cplx(0.0, 0.0));
    amps_[0] = 1.0;
  }

  static StateVector basis(int num_qubits, std::uint64_t label) {
    StateVector st(num_qubits);
    if (label >= st.dim()) throw std::invalid_argument("StateVector::basis: label out of range");
    st.amps_[0] = 0.0;
    st.amps_[label] = 1.0;
    return st;
  }

  int num_qubits() const { return nq_; }
  std::size_t dim() const { return amps_.size(); }
  cplx& amp(std::size_t i) { return amps_[i]; }
  const cplx& amp(std::size_t i) const { return amps_[i]; }
  std::vector<cplx>& amps() { return amps_; }
  const std::vector<cplx>& amps() const { return amps_; }

  int bit_of(std::size_t idx, int q) const { return int((idx >> (nq_ - 1 - q)) & 1u); }
  std::size_t mask_of(int q) const {
    if (q < 0 || q >= nq_) throw std::out_of_range("StateVector: qubit index");
    return std::size_t(1) << (nq_ - 1 - q);
  }

  double norm_sq() const {
    double s = 0.0;
    for (const cplx& a : amps_) s += std::norm(a);
    return s;
  }

 private:
  int nq_;
  std::vector<cplx> amps_;
};

enum class GateKind { H, X, Z, Swap };

struct MeasurementOutcome {
  BitString bits;      // outcome of the measured qubits, in the order given
  double probability;  // Born probability of this outcome
};

inline cplx inner_product(const StateVector& a, const StateVector& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("inner_product: dimension mismatch");
  cplx s(0.0, 0.0);
  for (std::size_t i = 0; i < a.dim(); ++i) s += std::conj(a.amp(i)) * b.amp(i);
  return s;
}

// True iff a == exp(i phi) * b for some real phi, within tol (l2 distance).
inline bool equal_up_to_global_phase(const StateVector& a, const StateVector& b,
                                     double tol = 1e-9) {
  if (a.dim() != b.dim()) return false;
  cplx ov = inner_product(b, a);
  cplx phase = std::abs(ov) < 1e-15 ? cplx(1.0, 0.0) : ov / std::abs(ov);
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) d += std::norm(a.amp(i) - phase * b.amp(i));
  return std::sqrt(d) <= tol;
}

namespace detail {

inline void check_distinct(const std::vector<int>& qs, int nq) {
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (qs[i] < 0 || qs[i] >= nq) throw std::out_of_range("gate: qubit index");
    for (std::size_t j = i + 1; j < qs.size(); ++j)
      if (qs[i] == qs[j]) throw std::invalid_argument("gate: duplicate qubit");
  }
}

inline std::size_t control_mask(const StateVector& st, const std::vector<int>& controls) {
  std::size_t m = 0;
  for (int c : controls) m |= st.mask_of(c);
  return m;
}

}  // namespace detail

// Single- and two-qubit gates with an arbitrary set of control qubits.
// CNOT is X with one control, Toffoli is X with two, CZ is Z with one.
inline void apply_gate(StateVector& st, GateKind kind, const std::vector<int>& targets,
                       const std::vector<int>& controls = {}) {
  std::vector<int> all = targets;
  all.insert(all.end(), controls.begin(), controls.end());
  detail::check_distinct(all, st.num_qubits());
  const std::size_t cmask = detail::control_mask(st, controls);
  const std::size_t dim = st.dim();

  if (kind == GateKind::Swap) {
    if (targets.size() != 2) throw std::invalid_argument("swap: needs two targets");
    const std::size_t ma = st.mask_of(targets[0]);
    const std::size_t mb = st.mask_of(targets[1]);
    for (std::size_t i = 0; i < dim; ++i) {
      if ((i & cmask) != cmask) continue;
      const bool ba = (i & ma) != 0, bb = (i & mb) != 0;
      if (ba && !bb) std::swap(st.amp(i), st.amp((i ^ ma) | mb));
    }
    return;
  }

  if (targets.size() != 1) throw std::invalid_argument("gate: needs one target");
  const std::size_t tm = st.mask_of(targets[0]);
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::size_t i = 0; i < dim; ++i) {
    if ((i & tm) != 0 || (i & cmask) != cmask) continue;
    const std::size_t j = i | tm;
    switch (kind) {
      case GateKind::H: {
        const cplx a = st.amp(i), b = st.amp(j);
        st.amp(i) = (a + b) * inv_sqrt2;
        st.amp(j) = (a - b) * inv_sqrt2;
        break;
      }
      case GateKind::X:
        std::swap(st.amp(i), st.amp(j));
        break;
      case GateKind::Z:
        st.amp(j) = -st.amp(j);
        break;
      default:
        break;
    }
  }
}

inline void apply_h(StateVector& st, int q) { apply_gate(st, GateKind::H, {q}); }
inline void apply_x(StateVector& st, int q) { apply_gate(st, GateKind::X, {q}); }
inline void apply_z(StateVector& st, int q) { apply_gate(st, GateKind::Z, {q}); }
inline void apply_cnot(StateVector& st, int control, int target) {
  apply_gate(st, GateKind::X, {target}, {control});
}
inline void apply_toffoli(StateVector& st, int c1, int c2, int target) {
  apply_gate(st, GateKind::X, {target}, {c1, c2});
}
inline void apply_cswap(StateVector& st, int control, int a, int b) {
  apply_gate(st, GateKind::Swap, {a, b}, {control});
}

// Diagonal operator: multiplies each amplitude by phase(idx). The callback
// sees the full basis index and is expected to be unit-modulus.
inline void apply_phase_fn(StateVector& st, const std::function<cplx(std::size_t)>& phase) {
  for (std::size_t i = 0; i < st.dim(); ++i) st.amp(i) *= phase(i);
}

// XOR oracle on the contiguous segment [off, off+w): idx's segment label is
// replaced by label ^ mask(idx). mask must not depend on the segment's own
// bits (it is evaluated at the label-zero representative of each block),
// which makes the update an in-place involution.
inline void apply_xor_oracle(StateVector& st, int off, int w,
                             const std::function<std::uint32_t(std::size_t)>& mask) {
  if (off < 0 || w < 0 || off + w > st.num_qubits())
    throw std::out_of_range("apply_xor_oracle: bad segment");
  const int shift = st.num_qubits() - off - w;
  const std::size_t seg_mask = (std::size_t((1u << w) - 1u)) << shift;
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & seg_mask) != 0) continue;  // visit each block once, at label 0
    const std::uint32_t m = mask(i);
    if (m == 0) continue;
    if ((m >> w) != 0) throw std::invalid_argument("apply_xor_oracle: mask exceeds segment");
    const std::size_t xm = std::size_t(m) << shift;
    // Pair labels l < l^m within the block and swap.
    for (std::uint32_t l = 0; l < (1u << w); ++l) {
      const std::uint32_t l2 = l ^ m;
      if (l2 < l) continue;
      std::swap(st.amp(i | (std::size_t(l) << shift)), st.amp((i | (std::size_t(l) << shift)) ^ xm));
    }
  }
}

// General basis-label bijection on a segment; perm must be a permutation of
// [0, 2^w). Labels move as perm[old] = new.
inline void apply_permutation_oracle(StateVector& st, int off, int w,
                                     const std::vector<std::uint32_t>& perm) {
  if (off < 0 || w < 0 || off + w > st.num_qubits())
    throw std::out_of_range("apply_permutation_oracle: bad segment");
  const std::uint32_t n = 1u << w;
  if (perm.size() != n) throw std::invalid_argument("apply_permutation_oracle: size mismatch");
  std::vector<bool> seen(n, false);
  for (std::uint32_t v : perm) {
    if (v >= n || seen[v]) throw std::invalid_argument("apply_permutation_oracle: not a bijection");
    seen[v] = true;
  }
  const int shift = st.num_qubits() - off - w;
  const std::size_t seg_mask = std::size_t(n - 1) << shift;
  std::vector<cplx> scratch(n);
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & seg_mask) != 0) continue;
    for (std::uint32_t l = 0; l < n; ++l) scratch[perm[l]] = st.amp(i | (std::size_t(l) << shift));
    for (std::uint32_t l = 0; l < n; ++l) st.amp(i | (std::size_t(l) << shift)) = scratch[l];
  }
}

// Quantum Fourier transform on segment [off, off+w):
//   |c> -> (1/sqrt(T)) sum_theta exp(+2 pi i c theta / T) |theta>,
// inverse uses the conjugate kernel. Implemented as a dense DFT per block;
// segment widths stay small (t <= 10).
inline void apply_qft(StateVector& st, int off, int w, bool inverse = false) {
  if (off < 0 || w < 0 || off + w > st.num_qubits()) throw std::out_of_range("apply_qft: bad segment");
  const std::uint32_t n = 1u << w;
  const int shift = st.num_qubits() - off - w;
  const std::size_t seg_mask = std::size_t(n - 1) << shift;
  const double sign = inverse ? -1.0 : 1.0;
  std::vector<cplx> twiddle(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    const double ang = sign * 2.0 * std::numbers::pi * double(k) / double(n);
    twiddle[k] = cplx(std::cos(ang), std::sin(ang));
  }
  const double scale = 1.0 / std::sqrt(double(n));
  std::vector<cplx> scratch(n);
  for (std::size_t i = 0; i < st.dim(); ++i) {
    if ((i & seg_mask) != 0) continue;
    for (std::uint32_t th = 0; th < n; ++th) {
      cplx acc(0.0, 0.0);
      for (std::uint32_t c = 0; c < n; ++c)
        acc += st.amp(i | (std::size_t(c) << shift)) * twiddle[std::uint32_t((std::uint64_t(c) * th) % n)];
      scratch[th] = acc * scale;
    }
    for (std::uint32_t th = 0; th < n; ++th) st.amp(i | (std::size_t(th) << shift)) = scratch[th];
  }
}

// Measures the given qubits in the computational basis and collapses the
// state. Sampling is inverse-CDF over basis states in index order: one
// uniform draw walks the cumulative |amp|^2 until it passes u. The outcome
// probability reported is the exact marginal of the observed bit pattern.
inline MeasurementOutcome measure(StateVector& st, const std::vector<int>& qubits, Rng& rng) {
  detail::check_distinct(qubits, st.num_qubits());
  if (qubits.empty()) throw std::invalid_argument("measure: no qubits");
  const double u = rng.next_double();
  double cum = 0.0;
  std::size_t picked = 0;
  bool found = false;
  for (std::size_t i = 0; i < st.dim(); ++i) {
    const double p = std::norm(st.amp(i));
    if (p == 0.0) continue;
    picked = i;
    cum += p;
    if (cum > u) {
      found = true;
      break;
    }
  }
  if (!found && cum == 0.0) throw std::runtime_error("measure: zero-norm state");

  BitString outcome(0, int(qubits.size()));
  for (std::size_t b = 0; b < qubits.size(); ++b)
    outcome = outcome.with_bit(int(b), st.bit_of(picked, qubits[b]));

  double kept = 0.0;
  for (std::size_t i = 0; i < st.dim(); ++i) {
    bool match = true;
    for (std::size_t b = 0; b < qubits.size(); ++b)
      if (st.bit_of(i, qubits[b]) != outcome.bit(int(b))) {
        match = false;
        break;
      }
    if (match) {
      kept += std::norm(st.amp(i));
    } else {
      st.amp(i) = 0.0;
    }
  }
  const double inv = 1.0 / std::sqrt(kept);
  for (std::size_t i = 0; i < st.dim(); ++i) st.amp(i) *= inv;
  return MeasurementOutcome{outcome, kept};
}

// Tensor product; a's qubits come first (most significant side).
inline StateVector kron(const StateVector& a, const StateVector& b) {
  StateVector out(a.num_qubits() + b.num_qubits());
  out.amp(0) = 0.0;
  for (std::size_t ia = 0; ia < a.dim(); ++ia) {
    if (a.amp(ia) == cplx(0.0, 0.0)) continue;
    for (std::size_t ib = 0; ib < b.dim(); ++ib)
      out.amp((ia << b.num_qubits()) | ib) = a.amp(ia) * b.amp(ib);
  }
  return out;
}

}  // namespace qpm
