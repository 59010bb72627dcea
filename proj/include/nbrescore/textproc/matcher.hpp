#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"

namespace nbrescore::textproc {

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool operator==(const Span&) const = default;
};

// One raw occurrence of a catalog entity inside a hypothesis.
struct Occurrence {
  Span span;
  std::size_t entity = 0;  // index into the catalog

  bool operator==(const Occurrence&) const = default;
};

struct MatchResult {
  // Distinct matched entities, ordered by their first resolved span.
  std::vector<TokenSeq> matched_entities;
  // Resolved, non-overlapping spans in increasing start order.
  std::vector<Span> spans;
  // Catalog index of the entity behind each span.
  std::vector<std::size_t> span_entities;

  bool empty() const { return spans.empty(); }
  bool operator==(const MatchResult&) const = default;
};

// Overlap policy: longest occurrence wins, then leftmost start, then lowest
// catalog index. Accepted occurrences never overlap.
inline MatchResult resolve_occurrences(std::vector<Occurrence> found,
                                       std::span<const TokenSeq> entities) {
  std::sort(found.begin(), found.end(), [](const Occurrence& a, const Occurrence& b) {
    if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
    if (a.span.start != b.span.start) return a.span.start < b.span.start;
    return a.entity < b.entity;
  });
  std::vector<Occurrence> accepted;
  for (const auto& occ : found) {
    const bool overlaps = std::any_of(accepted.begin(), accepted.end(), [&](const Occurrence& a) {
      return occ.span.start < a.span.end && a.span.start < occ.span.end;
    });
    if (!overlaps) accepted.push_back(occ);
  }
  std::sort(accepted.begin(), accepted.end(),
            [](const Occurrence& a, const Occurrence& b) { return a.span.start < b.span.start; });

  MatchResult result;
  std::vector<std::size_t> seen;
  for (const auto& occ : accepted) {
    result.spans.push_back(occ.span);
    result.span_entities.push_back(occ.entity);
    if (std::find(seen.begin(), seen.end(), occ.entity) == seen.end()) {
      seen.push_back(occ.entity);
      result.matched_entities.push_back(entities[occ.entity]);
    }
  }
  return result;
}

/// Token-level Aho-Corasick automaton over a catalog's entities.
///
/// Construction is linear in the total entity length; a scan reports every
/// occurrence (including overlapping and nested ones) in a single pass over
/// the hypothesis, which keeps matching cheap for catalogs with thousands
/// of entries.
class EntityMatcher {
 public:
  explicit EntityMatcher(std::vector<TokenSeq> entities) : entities_(std::move(entities)) {
    nodes_.emplace_back();
    for (std::size_t e = 0; e < entities_.size(); ++e) insert(e);
    link();
  }

  explicit EntityMatcher(const corpus::EntityCatalog& catalog) : EntityMatcher(catalog.entities) {}

  const std::vector<TokenSeq>& entities() const { return entities_; }

  // Every occurrence of every entity, in order of end position.
  std::vector<Occurrence> find_all(std::span<const TokenId> tokens) const {
    std::vector<Occurrence> out;
    std::size_t state = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      state = step(state, tokens[i]);
      for (std::size_t s = nodes_[state].terminal ? state : nodes_[state].dict_link; s != 0;
           s = nodes_[s].dict_link) {
        const std::size_t e = nodes_[s].entity;
        const std::size_t len = entities_[e].size();
        out.push_back({{i + 1 - len, i + 1}, e});
      }
    }
    return out;
  }

  MatchResult match(std::span<const TokenId> tokens) const {
    return resolve_occurrences(find_all(tokens), entities_);
  }

 private:
  struct Node {
    std::map<TokenId, std::size_t> next;
    std::size_t fail = 0;
    std::size_t dict_link = 0;  // nearest terminal suffix state, 0 if none
    std::size_t entity = 0;
    bool terminal = false;
  };

  void insert(std::size_t e) {
    std::size_t s = 0;
    for (TokenId t : entities_[e]) {
      auto it = nodes_[s].next.find(t);
      if (it == nodes_[s].next.end()) {
        nodes_.emplace_back();
        it = nodes_[s].next.emplace(t, nodes_.size() - 1).first;
      }
      s = it->second;
    }
    // Duplicate entities keep the first catalog index.
    if (s != 0 && !nodes_[s].terminal) {
      nodes_[s].terminal = true;
      nodes_[s].entity = e;
    }
  }

  void link() {
    std::queue<std::size_t> bfs;
    for (const auto& [t, child] : nodes_[0].next) bfs.push(child);
    while (!bfs.empty()) {
      const std::size_t s = bfs.front();
      bfs.pop();
      for (const auto& [t, child] : nodes_[s].next) {
        std::size_t f = nodes_[s].fail;
        while (f != 0 && !nodes_[f].next.contains(t)) f = nodes_[f].fail;
        const auto it = nodes_[f].next.find(t);
        nodes_[child].fail = (it != nodes_[f].next.end() && it->second != child) ? it->second : 0;
        const std::size_t fl = nodes_[child].fail;
        nodes_[child].dict_link = nodes_[fl].terminal ? fl : nodes_[fl].dict_link;
        bfs.push(child);
      }
    }
  }

  std::size_t step(std::size_t s, TokenId t) const {
    for (;;) {
      const auto it = nodes_[s].next.find(t);
      if (it != nodes_[s].next.end()) return it->second;
      if (s == 0) return 0;
      s = nodes_[s].fail;
    }
  }

  std::vector<TokenSeq> entities_;
  std::vector<Node> nodes_;
};

inline MatchResult match_entities(std::span<const TokenId> hypothesis,
                                  const corpus::EntityCatalog& catalog) {
  return EntityMatcher(catalog).match(hypothesis);
}

}  // namespace nbrescore::textproc
