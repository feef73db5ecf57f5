#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpm/bitstring.hpp"
#include "qpm/rng.hpp"

namespace qpm {

// File could not be opened / read.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// File opened but its contents violate the format contract.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transaction database D = (d_0, ..., d_{N-1}), each d_j a k-bit itemset.
// N must be a power of two: transactions are addressed by an n-qubit
// register with N = 2^n. Labels are optional and only used in decision-tree
// mining, where records extend to k+1 bits (transaction plus class bit).
struct Database {
  int k = 0;
  std::vector<BitString> transactions;
  std::optional<std::vector<int>> labels;

  std::size_t size() const { return transactions.size(); }

  int n_qubits() const {
    std::size_t n = size();
    int bits = 0;
    while ((std::size_t(1) << bits) < n) ++bits;
    return bits;
  }

  bool has_labels() const { return labels.has_value(); }

  void validate() const {
    const std::size_t n = size();
    if (n == 0 || (n & (n - 1)) != 0)
      throw FormatError("database: transaction count must be a power of two");
    for (const auto& t : transactions)
      if (t.width != k) throw FormatError("database: transaction width mismatch");
    if (labels && labels->size() != n) throw FormatError("database: label count mismatch");
  }

  // Record seen by support queries: the transaction itself, or transaction
  // plus label bit (as the least significant position) in labeled mode.
  std::uint32_t record(std::size_t j) const {
    std::uint32_t v = transactions[j].value;
    if (labels) v = (v << 1) | std::uint32_t((*labels)[j] & 1);
    return v;
  }
  int record_width() const { return labels ? k + 1 : k; }

  static Database random(int n, int k, Rng& rng) {
    Database db;
    db.k = k;
    const std::size_t count = std::size_t(1) << n;
    db.transactions.reserve(count);
    for (std::size_t j = 0; j < count; ++j)
      db.transactions.emplace_back(std::uint32_t(rng.next_below(1u << k)), k);
    return db;
  }

  // Text format: one transaction per line as a k-character 0/1 string,
  // optionally followed by whitespace and a single 0/1 label character.
  // Either every line has a label or none does.
  static Database parse(std::istream& in) {
    Database db;
    std::string line;
    bool first = true;
    bool labeled = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      // Trim trailing CR/whitespace.
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
        line.pop_back();
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string bits, label;
      ls >> bits;
      const bool has_label = bool(ls >> label);
      if (first) {
        db.k = int(bits.size());
        labeled = has_label;
        if (labeled) db.labels.emplace();
        first = false;
      }
      if (int(bits.size()) != db.k)
        throw FormatError("database: inconsistent transaction width at line " + std::to_string(line_no));
      if (has_label != labeled)
        throw FormatError("database: inconsistent labeling at line " + std::to_string(line_no));
      try {
        db.transactions.push_back(BitString::parse(bits));
      } catch (const std::invalid_argument& e) {
        throw FormatError("database: line " + std::to_string(line_no) + ": " + e.what());
      }
      if (labeled) {
        if (label != "0" && label != "1")
          throw FormatError("database: bad label at line " + std::to_string(line_no));
        db.labels->push_back(label == "1" ? 1 : 0);
      }
      std::string extra;
      if (ls >> extra) throw FormatError("database: trailing tokens at line " + std::to_string(line_no));
    }
    if (first) throw FormatError("database: empty file");
    db.validate();
    return db;
  }

  static Database load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open database file: " + path);
    return parse(in);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write database file: " + path);
    for (std::size_t j = 0; j < size(); ++j) {
      out << transactions[j].str();
      if (labels) out << ' ' << (*labels)[j];
      out << '\n';
    }
  }
};

}  // namespace qpm
