#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qpm {

// Fixed-width bit vector backed by a 32-bit word (width <= 24 in practice:
// registers stay small enough for dense simulation anyway).
//
// Convention used across the whole library: character 0 of the textual form
// is the most significant bit of `value`. The same MSB-first rule is used
// for qubit indices inside registers, so "bit i" of a basis label and
// "qubit i" of a register segment always agree.
struct BitString {
  std::uint32_t value = 0;
  int width = 0;

  BitString() = default;
  BitString(std::uint32_t v, int w) : value(v), width(w) {
    if (w < 0 || w > 24) throw std::invalid_argument("BitString: bad width");
    if (w < 32 && (v >> w) != 0) throw std::invalid_argument("BitString: value exceeds width");
  }

  static BitString zeros(int w) { return BitString(0, w); }
  static BitString ones(int w) { return BitString(w == 0 ? 0u : ((1u << w) - 1u), w); }

  static BitString parse(const std::string& s) {
    BitString b;
    b.width = static_cast<int>(s.size());
    if (b.width > 24) throw std::invalid_argument("BitString::parse: too wide");
    for (char c : s) {
      if (c != '0' && c != '1') throw std::invalid_argument("BitString::parse: expected 0/1");
      b.value = (b.value << 1) | static_cast<std::uint32_t>(c - '0');
    }
    return b;
  }

  // bit(0) is the most significant position.
  int bit(int i) const {
    if (i < 0 || i >= width) throw std::out_of_range("BitString::bit");
    return static_cast<int>((value >> (width - 1 - i)) & 1u);
  }

  BitString with_bit(int i, int v) const {
    if (i < 0 || i >= width) throw std::out_of_range("BitString::with_bit");
    std::uint32_t mask = 1u << (width - 1 - i);
    return BitString(v ? (value | mask) : (value & ~mask), width);
  }

  BitString flipped(int i) const { return with_bit(i, 1 - bit(i)); }

  int popcount() const { return __builtin_popcount(value); }

  // Itemset inclusion: every 1-bit of *this is also set in other.
  bool subset_of(const BitString& other) const {
    if (width != other.width) throw std::invalid_argument("BitString::subset_of: width mismatch");
    return (value & ~other.value) == 0;
  }

  std::string str() const {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int i = 0; i < width; ++i) s[static_cast<std::size_t>(i)] = char('0' + bit(i));
    return s;
  }

  bool operator==(const BitString& o) const { return value == o.value && width == o.width; }
  bool operator!=(const BitString& o) const { return !(*this == o); }
  bool operator<(const BitString& o) const {
    // Numeric order; widths are expected to match where this is used.
    return value < o.value;
  }
};

}  // namespace qpm
