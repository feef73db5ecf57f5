#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpm/bitstring.hpp"

namespace qpm {

// Boolean function f over k-bit records, the object both parties query.
//
// Kinds:
//   Inclusion(d)        f(tau) = 1 iff d subseteq tau   (itemset support)
//   AllZero             f = 0 everywhere                (h: U_f is identity)
//   AllOne              f = 1 everywhere                (hbar: U_f is -I)
//   Delta(d)            f(tau) = 1 iff tau == d
//   LabeledInclusion    f(rec) = 1 iff A subseteq items(rec) and label(rec)==v
//                       (records are k+1 bits, label in the last position)
//   Table               explicit truth table over width bits
//   AddressDelta(i, g)  f(j, tau) = 1 iff j == i and g(tau) == 1; the only
//                       kind that reads the address register
struct Predicate {
  enum class Kind { Inclusion, AllZero, AllOne, Delta, LabeledInclusion, Table, AddressDelta };

  Kind kind = Kind::AllZero;
  int width = 0;  // record width in bits (k, or k+1 for labeled records)
  BitString pattern;
  int label_value = 0;                     // LabeledInclusion
  std::vector<std::uint8_t> table;         // Table
  std::uint32_t address = 0;               // AddressDelta
  std::shared_ptr<Predicate> inner;        // AddressDelta

  static Predicate inclusion(const BitString& d) {
    Predicate p;
    p.kind = Kind::Inclusion;
    p.width = d.width;
    p.pattern = d;
    return p;
  }
  static Predicate all_zero(int width) {
    Predicate p;
    p.kind = Kind::AllZero;
    p.width = width;
    return p;
  }
  static Predicate all_one(int width) {
    Predicate p;
    p.kind = Kind::AllOne;
    p.width = width;
    return p;
  }
  static Predicate delta(const BitString& d) {
    Predicate p;
    p.kind = Kind::Delta;
    p.width = d.width;
    p.pattern = d;
    return p;
  }
  static Predicate labeled_inclusion(const BitString& itemset, int label) {
    Predicate p;
    p.kind = Kind::LabeledInclusion;
    p.width = itemset.width + 1;
    p.pattern = itemset;
    p.label_value = label & 1;
    return p;
  }
  static Predicate from_table(std::vector<std::uint8_t> bits, int width) {
    if (bits.size() != (std::size_t(1) << width))
      throw std::invalid_argument("Predicate::from_table: size mismatch");
    Predicate p;
    p.kind = Kind::Table;
    p.width = width;
    p.table = std::move(bits);
    return p;
  }
  static Predicate address_delta(std::uint32_t address, const Predicate& g) {
    Predicate p;
    p.kind = Kind::AddressDelta;
    p.width = g.width;
    p.address = address;
    p.inner = std::make_shared<Predicate>(g);
    return p;
  }

  bool address_dependent() const { return kind == Kind::AddressDelta; }

  // Data-only evaluation; AddressDelta must go through eval2.
  bool eval(std::uint32_t tau) const {
    switch (kind) {
      case Kind::Inclusion:
        return (pattern.value & ~tau) == 0;
      case Kind::AllZero:
        return false;
      case Kind::AllOne:
        return true;
      case Kind::Delta:
        return tau == pattern.value;
      case Kind::LabeledInclusion: {
        const std::uint32_t items = tau >> 1;
        const int label = int(tau & 1u);
        return (pattern.value & ~items) == 0 && label == label_value;
      }
      case Kind::Table:
        return table[tau] != 0;
      case Kind::AddressDelta:
        throw std::logic_error("Predicate::eval: address-dependent kind needs eval2");
    }
    return false;
  }

  bool eval2(std::uint32_t addr, std::uint32_t tau) const {
    if (kind == Kind::AddressDelta) return addr == address && inner->eval(tau);
    return eval(tau);
  }

  bool operator==(const Predicate& o) const {
    if (kind != o.kind || width != o.width) return false;
    switch (kind) {
      case Kind::Inclusion:
      case Kind::Delta:
        return pattern == o.pattern;
      case Kind::AllZero:
      case Kind::AllOne:
        return true;
      case Kind::LabeledInclusion:
        return pattern == o.pattern && label_value == o.label_value;
      case Kind::Table:
        return table == o.table;
      case Kind::AddressDelta:
        return address == o.address && *inner == *o.inner;
    }
    return false;
  }
  bool operator!=(const Predicate& o) const { return !(*this == o); }

  std::string describe() const {
    switch (kind) {
      case Kind::Inclusion:
        return "inclusion(" + pattern.str() + ")";
      case Kind::AllZero:
        return "h";
      case Kind::AllOne:
        return "hbar";
      case Kind::Delta:
        return "delta(" + pattern.str() + ")";
      case Kind::LabeledInclusion:
        return "labeled(" + pattern.str() + "," + std::to_string(label_value) + ")";
      case Kind::Table:
        return "table";
      case Kind::AddressDelta:
        return "address_delta(" + std::to_string(address) + "," + inner->describe() + ")";
    }
    return "?";
  }
};

}  // namespace qpm
