#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "qpm/statevector.hpp"

namespace qpm {

// Roles a register segment can play in the protocol.
enum class Seg { Control, Address, Data, Guess, SwapAncilla, Scratch };

// Maps named segments onto contiguous qubit ranges of one state vector.
// Segments are laid out in the order they are added; qubit 0 of the register
// is the most significant index bit (see StateVector).
class RegisterLayout {
 public:
  RegisterLayout& add(Seg role, int width) {
    if (width < 0) throw std::invalid_argument("RegisterLayout: negative width");
    for (const auto& s : segs_)
      if (s.role == role) throw std::invalid_argument("RegisterLayout: duplicate segment");
    segs_.push_back({role, total_, width});
    total_ += width;
    return *this;
  }

  bool has(Seg role) const {
    for (const auto& s : segs_)
      if (s.role == role) return true;
    return false;
  }

  int offset(Seg role) const { return find(role).offset; }
  int width(Seg role) const { return find(role).width; }
  int total_qubits() const { return total_; }

  // Qubit index of position i inside a segment.
  int qubit(Seg role, int i) const {
    const auto& s = find(role);
    if (i < 0 || i >= s.width) throw std::out_of_range("RegisterLayout::qubit");
    return s.offset + i;
  }

  std::vector<int> qubits(Seg role) const {
    const auto& s = find(role);
    std::vector<int> out;
    out.reserve(std::size_t(s.width));
    for (int i = 0; i < s.width; ++i) out.push_back(s.offset + i);
    return out;
  }

  // Segment label of a basis index (MSB-first within the segment).
  std::uint32_t label(Seg role, std::size_t idx, int total_qubits) const {
    const auto& s = find(role);
    const int shift = total_qubits - s.offset - s.width;
    return std::uint32_t(idx >> shift) & ((1u << s.width) - 1u);
  }

  // Basis index with the segment's bits replaced by `value`.
  std::size_t with_label(Seg role, std::size_t idx, std::uint32_t value, int total_qubits) const {
    const auto& s = find(role);
    const int shift = total_qubits - s.offset - s.width;
    const std::size_t m = (std::size_t((1u << s.width) - 1u)) << shift;
    return (idx & ~m) | (std::size_t(value) << shift);
  }

  // Standard layouts used by the protocol.
  static RegisterLayout counting(int t, int n, int k, bool with_guess = false) {
    RegisterLayout lay;
    lay.add(Seg::Control, t).add(Seg::Address, n).add(Seg::Data, k);
    if (with_guess) lay.add(Seg::Guess, 1);
    return lay;
  }
  static RegisterLayout test_round(int t, int n, int k, bool with_guess = false) {
    return counting(t, n, k, with_guess);
  }
  static RegisterLayout address_data(int n, int k) {
    RegisterLayout lay;
    lay.add(Seg::Address, n).add(Seg::Data, k);
    return lay;
  }

 private:
  struct Entry {
    Seg role;
    int offset;
    int width;
  };

  const Entry& find(Seg role) const {
    for (const auto& s : segs_)
      if (s.role == role) return s;
    throw std::invalid_argument("RegisterLayout: no such segment");
  }

  std::vector<Entry> segs_;
  int total_ = 0;
};

}  // namespace qpm
