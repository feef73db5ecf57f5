#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpm/bitstring.hpp"
#include "qpm/layout.hpp"
#include "qpm/oracles.hpp"
#include "qpm/statevector.hpp"

namespace qpm {

// Parameters of a test state psi_{m,x,b}(mu,nu) on n address and k data
// qubits: U_t(m,x,b) applied to |0...0>. Pairs are kept ordered mu < nu;
// the swapped pair is the same state with b flipped.
struct TestParams {
  int m = 0;
  BitString x;
  int b = 0;
  BitString mu;
  BitString nu;

  void validate() const {
    if (x.width < 1) throw std::invalid_argument("test params: empty address");
    if (m < 0 || m >= x.width) throw std::invalid_argument("test params: m out of range");
    if (b != 0 && b != 1) throw std::invalid_argument("test params: b must be a bit");
    if (mu.width != nu.width || mu.width < 1)
      throw std::invalid_argument("test params: pair width mismatch");
    if (!(mu.value < nu.value)) throw std::invalid_argument("test params: needs mu < nu");
  }

  int n() const { return x.width; }
  int k() const { return mu.width; }

  std::string describe() const {
    return "psi(m=" + std::to_string(m) + ",x=" + x.str() + ",b=" + std::to_string(b) + "," +
           mu.str() + "," + nu.str() + ")";
  }

  friend bool operator==(const TestParams& a, const TestParams& b) {
    return a.m == b.m && a.x == b.x && a.b == b.b && a.mu == b.mu && a.nu == b.nu;
  }
  friend bool operator!=(const TestParams& a, const TestParams& b) { return !(a == b); }
};

namespace detail {

inline BitString swap_bits(const BitString& s, int i, int j) {
  if (i == j) return s;
  if (s.bit(i) == s.bit(j)) return s;
  return s.flipped(i).flipped(j);
}

}  // namespace detail

// Circuit route: U_t(m,x,b) |0...0> on the address+data register.
inline StateVector test_state(const TestParams& p) {
  p.validate();
  const auto lay = RegisterLayout::address_data(p.n(), p.k());
  StateVector st(lay.total_qubits());
  apply_u_t(st, lay, p.m, p.x, p.b, p.mu, p.nu);
  return st;
}

// Closed-form route: the amplitude of |a>|d> is
//   2^{-n/2} (-1)^{<swap_{0m}(x), a>}  if d = (mu when a_m = b, nu otherwise)
//   0                                  else.
// Kept independent of the circuit so the two can cross-check each other.
inline double test_state_amp(const TestParams& p, std::size_t index) {
  const int n = p.n();
  const int k = p.k();
  const std::uint32_t a = std::uint32_t(index >> k);
  const std::uint32_t d = std::uint32_t(index) & ((std::uint32_t(1) << k) - 1);
  const int a_m = (a >> (n - 1 - p.m)) & 1;
  const std::uint32_t want = (a_m == p.b) ? p.mu.value : p.nu.value;
  if (d != want) return 0.0;
  const std::uint32_t xt = detail::swap_bits(p.x, 0, p.m).value;
  const double sign = (__builtin_popcount(xt & a) & 1) ? -1.0 : 1.0;
  return sign * std::pow(2.0, -0.5 * n);
}

inline StateVector test_state_closed_form(const TestParams& p) {
  p.validate();
  StateVector st(p.n() + p.k());
  for (std::size_t i = 0; i < st.dim(); ++i) st.amp(i) = test_state_amp(p, i);
  return st;
}

// An unordered pair {mu, nu} with mu < nu, and a partition of {0,1}^k into
// 2^{k-1} disjoint pairs.
using TestPair = std::pair<BitString, BitString>;
using PairPartition = std::vector<TestPair>;

// All 2^k - 1 pairwise-disjoint partitions whose union covers every
// unordered pair of {0,1}^k exactly once. Recursive construction: from the
// level-k list, suffix both members with the same bit (one partition per
// old one), with crossed bits (another one per old one), and close with
// the partition of suffix-only pairs {mu0, mu1}.
inline std::vector<PairPartition> partition_pairs(int k) {
  if (k < 1 || k > 12) throw std::invalid_argument("partition_pairs: bad k");
  std::vector<PairPartition> parts = {{{BitString(0, 1), BitString(1, 1)}}};
  for (int w = 1; w < k; ++w) {
    std::vector<PairPartition> next;
    next.reserve(2 * parts.size() + 1);
    auto grow = [w](const BitString& s, std::uint32_t bit) {
      return BitString((s.value << 1) | bit, w + 1);
    };
    for (const auto& part : parts) {
      PairPartition same;
      for (const auto& [mu, nu] : part) {
        same.emplace_back(grow(mu, 0), grow(nu, 0));
        same.emplace_back(grow(mu, 1), grow(nu, 1));
      }
      next.push_back(std::move(same));
    }
    for (const auto& part : parts) {
      PairPartition crossed;
      for (const auto& [mu, nu] : part) {
        crossed.emplace_back(grow(mu, 0), grow(nu, 1));
        crossed.emplace_back(grow(mu, 1), grow(nu, 0));
      }
      next.push_back(std::move(crossed));
    }
    PairPartition closing;
    for (std::uint32_t v = 0; v < (std::uint32_t(1) << w); ++v) {
      const BitString mu(v, w);
      closing.emplace_back(grow(mu, 0), grow(mu, 1));
    }
    next.push_back(std::move(closing));
    parts = std::move(next);
  }
  return parts;
}

// One orthonormal basis of the full address+data space: all 2^{n+k} test
// states over a fixed m and a fixed pair partition.
struct TestBasis {
  int m = 0;
  PairPartition pairs;
  std::vector<TestParams> members;
};

// The n (2^k - 1) bases used by the honesty test. Bases with different m
// or different partitions share no member state.
inline std::vector<TestBasis> enumerate_bases(int n, int k) {
  if (n < 1 || n > 20) throw std::invalid_argument("enumerate_bases: bad n");
  const auto parts = partition_pairs(k);
  std::vector<TestBasis> bases;
  bases.reserve(std::size_t(n) * parts.size());
  for (int m = 0; m < n; ++m) {
    for (const auto& part : parts) {
      TestBasis basis;
      basis.m = m;
      basis.pairs = part;
      basis.members.reserve(std::size_t(part.size()) << (n + 1));
      for (const auto& [mu, nu] : part)
        for (std::uint32_t xv = 0; xv < (std::uint32_t(1) << n); ++xv)
          for (int b = 0; b < 2; ++b)
            basis.members.push_back(TestParams{m, BitString(xv, n), b, mu, nu});
      bases.push_back(std::move(basis));
    }
  }
  return bases;
}

// One signed term of a four-state expansion.
struct TestTerm {
  double coeff = 0.0;
  TestParams params;
};

// Rewrites psi_{m,x,b}(mu,nu) over index l != m:
//   (-1)^{b x_m} 1/2 ( psi_{l,x',0} + (-1)^{x_m} psi_{l,x',1}
//                    + (-1)^b psi_{l,x'',0} - (-1)^{b+x_m} psi_{l,x'',1} )
// with, writing xt = swap_{0m}(x) and e = e_l ^ e_m,
//   x'  = swap_{0l}(xt ^ (x_m ? e : 0)),   x'' = swap_{0l}(xt ^ (x_m ? 0 : e)).
// For (m,l) = (0,1) this reduces to x' = (x_0^x_1) 0 x_2..., x'' with the
// complementary leading bits. The coefficients stay +-1/2 for every (m,l).
inline std::array<TestTerm, 4> decompose_shift_m(const TestParams& p, int l) {
  p.validate();
  if (l < 0 || l >= p.n()) throw std::invalid_argument("decompose_shift_m: l out of range");
  if (l == p.m) throw std::invalid_argument("decompose_shift_m: l must differ from m");
  const int xm = p.x.bit(p.m);
  BitString xt = detail::swap_bits(p.x, 0, p.m);
  BitString u1 = xm ? xt.flipped(l).flipped(p.m) : xt;
  BitString u2 = u1.flipped(l).flipped(p.m);
  const BitString xp = detail::swap_bits(u1, 0, l);
  const BitString xpp = detail::swap_bits(u2, 0, l);
  const double g = (p.b && xm) ? -0.5 : 0.5;
  const double s_x = xm ? -1.0 : 1.0;
  const double s_b = p.b ? -1.0 : 1.0;
  return {{
      {g, TestParams{l, xp, 0, p.mu, p.nu}},
      {g * s_x, TestParams{l, xp, 1, p.mu, p.nu}},
      {g * s_b, TestParams{l, xpp, 0, p.mu, p.nu}},
      {-g * s_b * s_x, TestParams{l, xpp, 1, p.mu, p.nu}},
  }};
}

// Rewrites psi_{m,x,b}(mu,nu) through a third value omega:
//   1/2 ( psi_{m,x,b'}(mu,omega) + (-1)^b psi_{m,x',b'}(mu,omega)
//       + psi_{m,x,b''}(omega,nu) - (-1)^b psi_{m,x',b''}(omega,nu) )
// where x' flips x_0, b' = b ^ [mu > omega], b'' = b ^ [omega > nu], and
// each pair is stored sorted (swapping a pair flips that term's b).
inline std::array<TestTerm, 4> decompose_insert_omega(const TestParams& p, const BitString& omega) {
  p.validate();
  if (omega.width != p.k()) throw std::invalid_argument("decompose_insert_omega: width mismatch");
  if (omega == p.mu || omega == p.nu)
    throw std::invalid_argument("decompose_insert_omega: omega must be a third value");
  const int b1 = p.mu.value < omega.value ? 0 : 1;
  const int b2 = omega.value < p.nu.value ? 0 : 1;
  const TestPair lo = b1 ? TestPair{omega, p.mu} : TestPair{p.mu, omega};
  const TestPair hi = b2 ? TestPair{p.nu, omega} : TestPair{omega, p.nu};
  const BitString xf = p.x.flipped(0);
  const double s_b = p.b ? -1.0 : 1.0;
  return {{
      {0.5, TestParams{p.m, p.x, p.b ^ b1, lo.first, lo.second}},
      {0.5 * s_b, TestParams{p.m, xf, p.b ^ b1, lo.first, lo.second}},
      {0.5, TestParams{p.m, p.x, p.b ^ b2, hi.first, hi.second}},
      {-0.5 * s_b, TestParams{p.m, xf, p.b ^ b2, hi.first, hi.second}},
  }};
}

}  // namespace qpm
