#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "nbrescore/common.hpp"

namespace nbrescore::corpus {

struct Hypothesis {
  TokenSeq tokens;
  double first_pass_score = 0.0;  // lower is better
  std::size_t edit_distance = 0;  // against the reference

  bool operator==(const Hypothesis&) const = default;
};

// One utterance: the reference transcript and its first-pass n-best list.
struct NBestList {
  std::string utterance_id;
  TokenSeq reference;
  std::vector<Hypothesis> hypotheses;
  bool is_personalized = false;

  bool operator==(const NBestList&) const = default;
};

inline constexpr std::size_t kDefaultCatalogCap = 2000;

// The personalized named entities available for one utterance.
struct EntityCatalog {
  std::string utterance_id;
  std::vector<TokenSeq> entities;

  bool operator==(const EntityCatalog&) const = default;
};

// Throws std::invalid_argument when the catalog has an empty or duplicate
// entity, or more than `cap` entries.
inline void validate_catalog(const EntityCatalog& catalog,
                             std::size_t cap = kDefaultCatalogCap) {
  if (catalog.entities.size() > cap) {
    throw std::invalid_argument("catalog " + catalog.utterance_id + " exceeds cap of " +
                                std::to_string(cap) + " entities");
  }
  std::map<TokenSeq, bool> seen;
  for (const auto& e : catalog.entities) {
    if (e.empty()) {
      throw std::invalid_argument("catalog " + catalog.utterance_id + " has an empty entity");
    }
    if (!seen.emplace(e, true).second) {
      throw std::invalid_argument("catalog " + catalog.utterance_id + " has a duplicate entity");
    }
  }
}

using Dataset = std::vector<NBestList>;
using CatalogMap = std::map<std::string, EntityCatalog, std::less<>>;

// Catalog lookup that treats a missing entry as an empty catalog.
inline const EntityCatalog& catalog_for(const CatalogMap& catalogs, std::string_view id) {
  static const EntityCatalog kEmpty{};
  const auto it = catalogs.find(id);
  return it == catalogs.end() ? kEmpty : it->second;
}

inline std::size_t reference_word_count(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& u : data) n += u.reference.size();
  return n;
}

}  // namespace nbrescore::corpus
