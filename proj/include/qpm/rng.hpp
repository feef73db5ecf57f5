#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace qpm {

// splitmix64; used both as a seed scrambler and as the stream-split hash.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d649bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic 64-bit PRNG with counter-based stream derivation.
//
// Every random decision in the library draws from an Rng. Child streams are
// derived as hash(state_seed, tag, counter), so the draw order inside one
// stream never depends on what happens in sibling streams. Raw draws come
// from std::mt19937_64 (bit-exact across platforms); real/bernoulli helpers
// are hand-rolled because std::uniform_real_distribution is not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(scramble(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  // Uniform integer in [0, n). n = 0 is a caller bug.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: empty range");
    // Rejection sampling keeps the distribution exact.
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Child stream for (tag, counter). Tags are short ASCII labels such as
  // "alice", "bob", "round"; the counter distinguishes repeated uses.
  Rng fork(std::string_view tag, std::uint64_t counter = 0) const {
    std::uint64_t h = seed_;
    for (char c : tag) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      (void)splitmix64(h);
    }
    h ^= 0x632be59bd9b4e019ULL + counter;
    std::uint64_t s = h;
    return Rng(splitmix64(s));
  }

 private:
  static std::uint64_t scramble(std::uint64_t seed) {
    std::uint64_t s = seed;
    return splitmix64(s);
  }

  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace qpm
