#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qpm/bitstring.hpp"
#include "qpm/database.hpp"
#include "qpm/protocol.hpp"
#include "qpm/rng.hpp"
#include "qpm/strategy.hpp"

namespace qpm {

// Fraction of records containing the itemset. A record contains d when
// every 1-bit of d is set in the record; labeled databases expose the
// label as the last record position, so a (k+1)-wide itemset can pin it.
inline double exact_support(const Database& db, const BitString& itemset) {
  if (itemset.width != db.record_width())
    throw std::invalid_argument("exact_support: itemset width mismatch");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < db.size(); ++j)
    if ((itemset.value & ~db.record(std::uint32_t(j))) == 0) ++hits;
  return double(hits) / double(db.size());
}

// Support source for the mining layer: either the exact count over the
// records, or one two-party counting run per query. The protocol kind
// owns its random stream, so a fixed construction seed and a fixed query
// order reproduce every estimate; `queries` counts runs for bookkeeping.
struct SupportOracle {
  enum class Kind { Exact, Protocol };

  Kind kind = Kind::Exact;
  const Database* db = nullptr;
  ProtocolParams params;
  StrategyKind strategy = StrategyKind::Trivial;
  Rng rng{0};
  std::uint64_t queries = 0;

  static SupportOracle exact(const Database& d) {
    SupportOracle o;
    o.kind = Kind::Exact;
    o.db = &d;
    return o;
  }

  static SupportOracle protocol(const Database& d, const ProtocolParams& pp, StrategyKind s,
                                const Rng& r) {
    SupportOracle o;
    o.kind = Kind::Protocol;
    o.db = &d;
    o.params = pp;
    o.strategy = s;
    o.rng = r;
    return o;
  }

  double operator()(const BitString& itemset) {
    ++queries;
    if (kind == Kind::Exact) return exact_support(*db, itemset);
    auto [s1, s2, combined] = estimate_support(*db, itemset, params, strategy, rng);
    return combined;
  }
};

// Output of the level-wise pass: levels[l-1] holds the frequent l-itemsets
// in numeric order, and `support` keeps the value measured for every
// candidate that was evaluated (frequent or not), so the rule pass reuses
// the same estimates instead of re-querying.
struct FrequentSets {
  std::vector<std::vector<BitString>> levels;
  std::map<BitString, double> support;

  std::vector<BitString> all() const {
    std::vector<BitString> out;
    for (const auto& level : levels) out.insert(out.end(), level.begin(), level.end());
    return out;
  }

  bool frequent(const BitString& tau) const {
    if (tau.popcount() == 0 || tau.popcount() > int(levels.size())) return false;
    const auto& level = levels[std::size_t(tau.popcount()) - 1];
    return std::find(level.begin(), level.end(), tau) != level.end();
  }
};

// Level-wise search: start from all 1-itemsets, keep those with support
// above s_min, and grow each survivor by one item. Monotonicity makes the
// pruning sound, so with the exact oracle the output equals brute-force
// enumeration of every itemset with supp > s_min.
inline FrequentSets frequent_itemsets(SupportOracle& oracle, double s_min, int k) {
  if (!(s_min > 0.0 && s_min < 1.0))
    throw std::invalid_argument("frequent_itemsets: s_min outside (0,1)");
  if (k < 1 || k > 24) throw std::invalid_argument("frequent_itemsets: bad item count");
  if (!oracle.db) throw std::invalid_argument("frequent_itemsets: oracle has no database");
  const int width = oracle.db->record_width();
  FrequentSets out;
  out.levels.assign(std::size_t(k), {});
  std::set<BitString> frontier;
  for (int i = 0; i < k; ++i) frontier.insert(BitString::zeros(width).with_bit(i, 1));
  for (int l = 1; l <= k && !frontier.empty(); ++l) {
    std::set<BitString> next;
    for (const auto& tau : frontier) {
      const double s = oracle(tau);
      out.support[tau] = s;
      if (s > s_min) {
        out.levels[std::size_t(l) - 1].push_back(tau);
        for (int i = 0; i < k; ++i)
          if (tau.bit(i) == 0) next.insert(tau.with_bit(i, 1));
      }
    }
    frontier = std::move(next);
  }
  return out;
}

// One association rule antecedent => consequent. The two sides are
// disjoint, support is the support of their union, and confidence is the
// conditional frequency support(union)/support(antecedent).
struct Rule {
  BitString antecedent;
  BitString consequent;
  double support = 0.0;
  double confidence = 0.0;
};

// Every split of every frequent itemset into two non-empty disjoint sides
// whose confidence clears c_min. Antecedent supports come from the mining
// pass when available (they were measured there) and are re-queried only
// when a noisy pass never evaluated the subset.
inline std::vector<Rule> association_rules(const FrequentSets& fs, SupportOracle& oracle,
                                           double c_min) {
  std::vector<Rule> out;
  for (const auto& level : fs.levels) {
    for (const auto& xi : level) {
      const double s_xi = fs.support.at(xi);
      const std::uint32_t full = xi.value;
      for (std::uint32_t pi = (full - 1) & full; pi != 0; pi = (pi - 1) & full) {
        const BitString ante(pi, xi.width);
        const auto it = fs.support.find(ante);
        const double s_pi = it != fs.support.end() ? it->second : oracle(ante);
        if (!(s_pi > 0.0))
          throw std::logic_error("association_rules: zero antecedent support for a frequent set");
        const double conf = s_xi / s_pi;
        if (conf > c_min) out.push_back({ante, BitString(full ^ pi, xi.width), s_xi, conf});
      }
    }
  }
  return out;
}

// Binary decision tree node. Internal nodes carry the attribute they test
// and one child per attribute value; leaves carry the class bit. ancestry
// is the set of attributes already used above this node (bit i set means
// attribute i appears on the path), so no attribute ever repeats.
struct DecisionNode {
  int attribute = -1;
  int label = 0;
  std::uint32_t ancestry = 0;
  std::unique_ptr<DecisionNode> child[2];

  bool is_leaf() const { return attribute < 0; }
};

namespace detail {

// Class-split masses under the path constraints: s1 (resp. s0) is the
// fraction of records whose attributes match every (attribute, value)
// pair on the path and whose label is 1 (resp. 0). One-valued ancestors
// are plain itemset conditions; zero-valued ancestors enter by
// inclusion-exclusion, so every term is an ordinary support query over
// the (k+1)-bit records with the label as the last position. Masks are
// in attribute-position space (bit i = attribute i).
inline std::pair<double, double> labeled_split(SupportOracle& oracle, int k, std::uint32_t ones,
                                               std::uint32_t zeros) {
  auto query = [&](std::uint32_t attrs, int label) {
    BitString itemset = BitString::zeros(k + 1);
    for (int i = 0; i < k; ++i)
      if ((attrs >> i) & 1u) itemset = itemset.with_bit(i, 1);
    if (label) itemset = itemset.with_bit(k, 1);
    return oracle(itemset);
  };
  double marginal = 0.0, s1 = 0.0;
  std::uint32_t sub = 0;
  do {
    const double sign = (__builtin_popcount(sub) % 2 == 0) ? 1.0 : -1.0;
    marginal += sign * query(ones | sub, 0);
    s1 += sign * query(ones | sub, 1);
    sub = (sub - zeros) & zeros;
  } while (sub != 0);
  s1 = std::max(0.0, s1);
  const double s0 = std::max(0.0, marginal - s1);
  return {s0, s1};
}

// Class entropy of the normalized split, in bits. 0*log 0 reads as 0 and
// an empty split has no entropy, so the result always lies in [0, 1].
inline double entropy_bits(double s0, double s1) {
  const double total = s0 + s1;
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double s : {s0, s1}) {
    const double q = s / total;
    if (q > 0.0) h -= q * std::log2(q);
  }
  return h;
}

}  // namespace detail

// Grows the tree level by level. A node whose class entropy falls below
// h_min becomes a leaf with the majority label (ties to 0); otherwise the
// node tests the unused attribute maximizing the class entropy of the
// records that carry it (ties to the lowest index). Exhausting all
// attributes forces a majority leaf.
inline std::unique_ptr<DecisionNode> decision_tree(const Database& db, SupportOracle& oracle,
                                                   double h_min) {
  if (!db.has_labels()) throw std::invalid_argument("decision_tree: database has no labels");
  if (!(h_min > 0.0)) throw std::invalid_argument("decision_tree: threshold must be positive");
  const int k = db.k;
  const std::uint32_t every = (k == 32) ? ~0u : ((1u << k) - 1u);

  struct Pending {
    DecisionNode* node;
    std::uint32_t ones, zeros;
  };
  auto root = std::make_unique<DecisionNode>();
  std::vector<Pending> level{{root.get(), 0u, 0u}};
  while (!level.empty()) {
    std::vector<Pending> next;
    for (const Pending& pn : level) {
      DecisionNode* node = pn.node;
      const std::uint32_t used = pn.ones | pn.zeros;
      node->ancestry = used;
      const auto [s0, s1] = detail::labeled_split(oracle, k, pn.ones, pn.zeros);
      if (detail::entropy_bits(s0, s1) < h_min || used == every) {
        node->attribute = -1;
        node->label = (s0 < s1) ? 1 : 0;
        continue;
      }
      int best = -1;
      double best_h = -1.0;
      for (int x = 0; x < k; ++x) {
        if ((used >> x) & 1u) continue;
        const auto [c0, c1] = detail::labeled_split(oracle, k, pn.ones | (1u << x), pn.zeros);
        const double hx = detail::entropy_bits(c0, c1);
        if (hx > best_h) {
          best_h = hx;
          best = x;
        }
      }
      node->attribute = best;
      node->child[0] = std::make_unique<DecisionNode>();
      node->child[1] = std::make_unique<DecisionNode>();
      next.push_back({node->child[0].get(), pn.ones, pn.zeros | (1u << best)});
      next.push_back({node->child[1].get(), pn.ones | (1u << best), pn.zeros});
    }
    level = std::move(next);
  }
  return root;
}

inline bool same_tree(const DecisionNode& a, const DecisionNode& b) {
  if (a.attribute != b.attribute) return false;
  if (a.is_leaf()) return a.label == b.label;
  return same_tree(*a.child[0], *b.child[0]) && same_tree(*a.child[1], *b.child[1]);
}

// Classical pre-mining randomizer: flips each transaction bit
// independently with probability rho. Labels are left alone (they are the
// mined signal, not the published data). Deterministic under the seed.
inline Database randomize_db(const Database& db, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 0.5))
    throw std::invalid_argument("randomize_db: flip probability outside [0, 0.5]");
  Database out = db;
  for (auto& tr : out.transactions)
    for (int i = 0; i < tr.width; ++i)
      if (rng.next_double() < rho) tr = tr.flipped(i);
  return out;
}

inline nlohmann::json itemsets_to_json(const FrequentSets& fs) {
  nlohmann::json levels = nlohmann::json::array();
  nlohmann::json support = nlohmann::json::object();
  for (const auto& level : fs.levels) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& tau : level) {
      row.push_back(tau.str());
      support[tau.str()] = fs.support.at(tau);
    }
    levels.push_back(std::move(row));
  }
  return {{"levels", std::move(levels)}, {"support", std::move(support)}};
}

inline nlohmann::json rules_to_json(const std::vector<Rule>& rules) {
  nlohmann::json out = nlohmann::json::array();
  for (const Rule& r : rules)
    out.push_back({{"antecedent", r.antecedent.str()},
                   {"consequent", r.consequent.str()},
                   {"support", r.support},
                   {"confidence", r.confidence}});
  return out;
}

inline nlohmann::json tree_to_json(const DecisionNode& node) {
  if (node.is_leaf()) return {{"leaf", node.label}};
  return {{"attribute", node.attribute},
          {"children",
           nlohmann::json::array({tree_to_json(*node.child[0]), tree_to_json(*node.child[1])})}};
}

}  // namespace qpm
