#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "qpm/rng.hpp"
#include "qpm/teststates.hpp"
#include "test_util.hpp"

using namespace qpm;
using qpm::test::l2_distance;

namespace {

TestParams random_params(Rng& rng, int n, int k) {
  TestParams p;
  p.m = int(rng.next_below(std::uint64_t(n)));
  p.x = BitString(std::uint32_t(rng.next_below(std::uint64_t(1) << n)), n);
  p.b = int(rng.next_below(2));
  const std::uint64_t kk = std::uint64_t(1) << k;
  std::uint32_t a = std::uint32_t(rng.next_below(kk));
  std::uint32_t c = std::uint32_t(rng.next_below(kk));
  while (c == a) c = std::uint32_t(rng.next_below(kk));
  p.mu = BitString(std::min(a, c), k);
  p.nu = BitString(std::max(a, c), k);
  return p;
}

StateVector combine(const std::array<TestTerm, 4>& terms) {
  StateVector acc = test_state(terms[0].params);
  for (std::size_t i = 0; i < acc.dim(); ++i) acc.amp(i) *= terms[0].coeff;
  for (int t = 1; t < 4; ++t) {
    const StateVector part = test_state(terms[t].params);
    for (std::size_t i = 0; i < acc.dim(); ++i) acc.amp(i) += terms[t].coeff * part.amp(i);
  }
  return acc;
}

}  // namespace

TEST_CASE("circuit and closed-form test states agree") {
  SECTION("exhaustive over small registers") {
    for (int n = 1; n <= 2; ++n) {
      for (int k = 1; k <= 2; ++k) {
        for (int m = 0; m < n; ++m) {
          for (std::uint32_t xv = 0; xv < (1u << n); ++xv) {
            for (int b = 0; b < 2; ++b) {
              for (std::uint32_t mu = 0; mu < (1u << k); ++mu) {
                for (std::uint32_t nu = mu + 1; nu < (1u << k); ++nu) {
                  const TestParams p{m, BitString(xv, n), b, BitString(mu, k), BitString(nu, k)};
                  REQUIRE(l2_distance(test_state(p), test_state_closed_form(p)) < 1e-12);
                }
              }
            }
          }
        }
      }
    }
  }
  SECTION("random draws on a larger register") {
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
      const TestParams p = random_params(rng, 3, 3);
      const StateVector direct = test_state(p);
      REQUIRE(l2_distance(direct, test_state_closed_form(p)) < 1e-12);
      double norm = 0.0;
      for (std::size_t j = 0; j < direct.dim(); ++j) norm += std::norm(direct.amp(j));
      REQUIRE(norm == Catch::Approx(1.0).margin(1e-12));
    }
  }
  SECTION("explicit two-qubit example") {
    // psi(m=1, x=00, b=0, 0, 1): data = mu when a_1 = 0.
    const TestParams p{1, BitString(0, 2), 0, BitString(0, 1), BitString(1, 1)};
    const StateVector st = test_state(p);
    REQUIRE(st.amp(0b000).real() == Catch::Approx(0.5));  // |00>|0>
    REQUIRE(st.amp(0b011).real() == Catch::Approx(0.5));  // |01>|1>
    REQUIRE(st.amp(0b100).real() == Catch::Approx(0.5));  // |10>|0>
    REQUIRE(st.amp(0b111).real() == Catch::Approx(0.5));  // |11>|1>
  }
}

TEST_CASE("test parameter validation") {
  const BitString x(0, 2), mu(0, 2), nu(1, 2);
  REQUIRE_NOTHROW((TestParams{0, x, 0, mu, nu}).validate());
  REQUIRE_THROWS_AS((TestParams{2, x, 0, mu, nu}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS((TestParams{-1, x, 0, mu, nu}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS((TestParams{0, x, 2, mu, nu}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS((TestParams{0, x, 0, nu, mu}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS((TestParams{0, x, 0, mu, mu}).validate(), std::invalid_argument);
  REQUIRE_THROWS_AS((TestParams{0, x, 0, BitString(0, 1), nu}).validate(), std::invalid_argument);
  REQUIRE((TestParams{0, x, 0, mu, nu}).describe() == "psi(m=0,x=00,b=0,00,01)");
}

TEST_CASE("pair partitions") {
  SECTION("one-bit base case") {
    const auto parts = partition_pairs(1);
    REQUIRE(parts.size() == 1);
    REQUIRE(parts[0].size() == 1);
    REQUIRE(parts[0][0].first.value == 0);
    REQUIRE(parts[0][0].second.value == 1);
  }
  SECTION("counts and sizes") {
    for (int k = 1; k <= 4; ++k) {
      const auto parts = partition_pairs(k);
      REQUIRE(parts.size() == (std::size_t(1) << k) - 1);
      for (const auto& part : parts) REQUIRE(part.size() == std::size_t(1) << (k - 1));
    }
  }
  SECTION("each partition covers every value once") {
    for (int k = 1; k <= 4; ++k) {
      for (const auto& part : partition_pairs(k)) {
        std::set<std::uint32_t> seen;
        for (const auto& [mu, nu] : part) {
          REQUIRE(mu.width == k);
          REQUIRE(nu.width == k);
          REQUIRE(mu.value < nu.value);
          seen.insert(mu.value);
          seen.insert(nu.value);
        }
        REQUIRE(seen.size() == std::size_t(1) << k);
      }
    }
  }
  SECTION("every unordered pair appears exactly once") {
    for (int k = 1; k <= 4; ++k) {
      std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
      std::size_t total = 0;
      for (const auto& part : partition_pairs(k)) {
        for (const auto& [mu, nu] : part) {
          seen.insert({mu.value, nu.value});
          ++total;
        }
      }
      const std::size_t kk = std::size_t(1) << k;
      REQUIRE(total == kk * (kk - 1) / 2);
      REQUIRE(seen.size() == total);
    }
  }
  REQUIRE_THROWS_AS(partition_pairs(0), std::invalid_argument);
}

TEST_CASE("basis enumeration") {
  SECTION("counts") {
    REQUIRE(enumerate_bases(2, 1).size() == 2);
    REQUIRE(enumerate_bases(2, 2).size() == 6);
    REQUIRE(enumerate_bases(3, 3).size() == 21);
  }
  SECTION("two address qubits, one data qubit") {
    const auto bases = enumerate_bases(2, 1);
    for (const auto& basis : bases) REQUIRE(basis.members.size() == 8);
    REQUIRE(bases[0].m == 0);
    REQUIRE(bases[1].m == 1);
    const TestParams& first = bases[0].members[0];
    REQUIRE(first.m == 0);
    REQUIRE(first.x.value == 0);
    REQUIRE(first.b == 0);
    REQUIRE(first.mu.value == 0);
    REQUIRE(first.nu.value == 1);
  }
  SECTION("member tuples are distinct across all bases") {
    for (int n = 1; n <= 3; ++n) {
      for (int k = 1; k <= 2; ++k) {
        std::set<std::string> seen;
        std::size_t total = 0;
        for (const auto& basis : enumerate_bases(n, k)) {
          REQUIRE(basis.members.size() == std::size_t(1) << (n + k));
          for (const auto& p : basis.members) {
            REQUIRE(p.m == basis.m);
            seen.insert(p.describe());
            ++total;
          }
        }
        REQUIRE(seen.size() == total);
      }
    }
  }
  SECTION("each basis is orthonormal") {
    for (int n = 1; n <= 3; ++n) {
      for (int k = 1; k <= 3; ++k) {
        for (const auto& basis : enumerate_bases(n, k)) {
          std::vector<StateVector> states;
          states.reserve(basis.members.size());
          for (const auto& p : basis.members) states.push_back(test_state_closed_form(p));
          for (std::size_t i = 0; i < states.size(); ++i) {
            for (std::size_t j = i; j < states.size(); ++j) {
              const cplx ip = inner_product(states[i], states[j]);
              const double want = (i == j) ? 1.0 : 0.0;
              REQUIRE(std::abs(ip - want) < 1e-9);
            }
          }
        }
      }
    }
  }
}

TEST_CASE("shift-index decomposition") {
  SECTION("pinned two-qubit example, m=0 to l=1") {
    // x = 10: x' = (x_0^x_1) 0 = 10, x'' = 01; b = 0 keeps the global
    // sign positive and the second coefficient picks up (-1)^{x_0}.
    const TestParams p{0, BitString(0b10, 2), 0, BitString(0, 1), BitString(1, 1)};
    const auto terms = decompose_shift_m(p, 1);
    REQUIRE(terms[0].params.x.str() == "10");
    REQUIRE(terms[1].params.x.str() == "10");
    REQUIRE(terms[2].params.x.str() == "01");
    REQUIRE(terms[3].params.x.str() == "01");
    for (const auto& t : terms) REQUIRE(t.params.m == 1);
    REQUIRE(terms[0].coeff == Catch::Approx(0.5));
    REQUIRE(terms[1].coeff == Catch::Approx(-0.5));
    REQUIRE(terms[2].coeff == Catch::Approx(0.5));
    REQUIRE(terms[3].coeff == Catch::Approx(0.5));
    REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
  }
  SECTION("global sign flips when b = 1 and x_m = 1") {
    const TestParams p{0, BitString(0b10, 2), 1, BitString(0, 1), BitString(1, 1)};
    const auto terms = decompose_shift_m(p, 1);
    REQUIRE(terms[0].coeff == Catch::Approx(-0.5));
    REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
  }
  SECTION("random draws reconstruct, all index pairs") {
    Rng rng(43);
    int checked = 0;
    while (checked < 100) {
      const int n = 2 + int(rng.next_below(3));
      const int k = 1 + int(rng.next_below(2));
      TestParams p = random_params(rng, n, k);
      const int l = int(rng.next_below(std::uint64_t(n)));
      if (l == p.m) continue;
      const auto terms = decompose_shift_m(p, l);
      double sq = 0.0;
      for (const auto& t : terms) {
        REQUIRE(std::abs(t.coeff) == Catch::Approx(0.5));
        REQUIRE_NOTHROW(t.params.validate());
        REQUIRE(t.params.m == l);
        sq += t.coeff * t.coeff;
      }
      REQUIRE(sq == Catch::Approx(1.0));
      REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
      ++checked;
    }
  }
  SECTION("exhaustive over three address qubits") {
    // Covers every (m, l) combination including m, l both nonzero.
    for (int m = 0; m < 3; ++m) {
      for (int l = 0; l < 3; ++l) {
        if (l == m) continue;
        for (std::uint32_t xv = 0; xv < 8; ++xv) {
          for (int b = 0; b < 2; ++b) {
            const TestParams p{m, BitString(xv, 3), b, BitString(0, 1), BitString(1, 1)};
            REQUIRE(l2_distance(combine(decompose_shift_m(p, l)), test_state(p)) < 1e-9);
          }
        }
      }
    }
  }
  const TestParams p{0, BitString(0, 2), 0, BitString(0, 1), BitString(1, 1)};
  REQUIRE_THROWS_AS(decompose_shift_m(p, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(decompose_shift_m(p, 2), std::invalid_argument);
}

TEST_CASE("third-value decomposition") {
  SECTION("pinned example with omega between the pair") {
    // mu=00 < omega=01 < nu=10: both sub-pairs keep their order, so both
    // parity bits stay 0 and b is unchanged on every term.
    const TestParams p{0, BitString(0b01, 2), 0, BitString(0, 2), BitString(2, 2)};
    const auto terms = decompose_insert_omega(p, BitString(1, 2));
    REQUIRE(terms[0].params.mu.value == 0);
    REQUIRE(terms[0].params.nu.value == 1);
    REQUIRE(terms[2].params.mu.value == 1);
    REQUIRE(terms[2].params.nu.value == 2);
    for (const auto& t : terms) REQUIRE(t.params.b == 0);
    REQUIRE(terms[0].params.x == p.x);
    REQUIRE(terms[1].params.x == p.x.flipped(0));
    REQUIRE(terms[0].coeff == Catch::Approx(0.5));
    REQUIRE(terms[1].coeff == Catch::Approx(0.5));
    REQUIRE(terms[2].coeff == Catch::Approx(0.5));
    REQUIRE(terms[3].coeff == Catch::Approx(-0.5));
    REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
  }
  SECTION("omega outside the pair flips the parity bit") {
    // omega=11 > nu=01: the second sub-pair reverses, so its terms carry
    // b'' = b ^ 1.
    const TestParams p{0, BitString(0b1, 1), 1, BitString(0, 2), BitString(1, 2)};
    const auto terms = decompose_insert_omega(p, BitString(3, 2));
    REQUIRE(terms[0].params.b == 1);
    REQUIRE(terms[2].params.b == 0);
    REQUIRE(terms[2].params.mu.value == 1);
    REQUIRE(terms[2].params.nu.value == 3);
    REQUIRE(terms[1].coeff == Catch::Approx(-0.5));
    REQUIRE(terms[3].coeff == Catch::Approx(0.5));
    REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
  }
  SECTION("random draws reconstruct") {
    Rng rng(47);
    for (int i = 0; i < 100; ++i) {
      const int n = 1 + int(rng.next_below(3));
      const int k = 2 + int(rng.next_below(2));
      const TestParams p = random_params(rng, n, k);
      std::uint32_t w = std::uint32_t(rng.next_below(std::uint64_t(1) << k));
      while (w == p.mu.value || w == p.nu.value)
        w = std::uint32_t(rng.next_below(std::uint64_t(1) << k));
      const auto terms = decompose_insert_omega(p, BitString(w, k));
      double sq = 0.0;
      for (const auto& t : terms) {
        REQUIRE(std::abs(t.coeff) == Catch::Approx(0.5));
        REQUIRE_NOTHROW(t.params.validate());
        REQUIRE(t.params.m == p.m);
        sq += t.coeff * t.coeff;
      }
      REQUIRE(sq == Catch::Approx(1.0));
      REQUIRE(l2_distance(combine(terms), test_state(p)) < 1e-9);
    }
  }
  const TestParams p{0, BitString(0, 1), 0, BitString(0, 2), BitString(1, 2)};
  REQUIRE_THROWS_AS(decompose_insert_omega(p, BitString(0, 2)), std::invalid_argument);
  REQUIRE_THROWS_AS(decompose_insert_omega(p, BitString(1, 2)), std::invalid_argument);
  REQUIRE_THROWS_AS(decompose_insert_omega(p, BitString(0, 1)), std::invalid_argument);
}
