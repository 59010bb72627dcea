#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nbrescore/common.hpp"

namespace nbrescore::corpus {

// Word-level vocabulary. Ids 0..3 are always [PAD], [UNK], [CLS], [SEP].
class Vocabulary {
 public:
  Vocabulary() {
    for (auto s : kReservedSurfaces) push(std::string(s));
  }

  // Builds from a full surface list whose first four lines are the reserved
  // tokens (the vocab.txt layout).
  static Vocabulary from_surfaces(const std::vector<std::string>& surfaces) {
    if (surfaces.size() < kReservedCount) {
      throw FormatError("vocabulary is missing reserved tokens");
    }
    for (std::size_t i = 0; i < kReservedCount; ++i) {
      if (surfaces[i] != kReservedSurfaces[i]) {
        throw FormatError("vocabulary line " + std::to_string(i) + ": expected " +
                          std::string(kReservedSurfaces[i]));
      }
    }
    Vocabulary v;
    for (std::size_t i = kReservedCount; i < surfaces.size(); ++i) {
      const auto& s = surfaces[i];
      if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
        throw FormatError("vocabulary line " + std::to_string(i) + ": invalid surface");
      }
      if (v.find(s)) {
        throw FormatError("vocabulary line " + std::to_string(i) + ": duplicate surface " + s);
      }
      v.push(s);
    }
    return v;
  }

  std::optional<TokenId> find(std::string_view surface) const {
    const auto it = index_.find(surface);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Unknown surfaces map to [UNK].
  TokenId id(std::string_view surface) const { return find(surface).value_or(kUnkId); }

  const std::string& surface(TokenId id) const { return surfaces_.at(id); }
  std::size_t size() const { return surfaces_.size(); }
  const std::vector<std::string>& surfaces() const { return surfaces_; }

  bool operator==(const Vocabulary& other) const { return surfaces_ == other.surfaces_; }

 private:
  void push(std::string s) {
    index_.emplace(s, static_cast<TokenId>(surfaces_.size()));
    surfaces_.push_back(std::move(s));
  }

  std::vector<std::string> surfaces_;
  std::map<std::string, TokenId, std::less<>> index_;
};

/// Keeps the (max_size - 4) most frequent surfaces after the reserved
/// tokens. Ties in frequency are broken lexicographically.
inline Vocabulary build_vocabulary(const std::map<std::string, std::size_t>& counts,
                                   std::size_t max_size) {
  if (max_size <= kReservedCount) {
    throw std::invalid_argument("vocabulary max_size must exceed the reserved token count");
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (const auto& [surface, n] : counts) {
    if (n == 0) continue;
    const bool reserved = std::find(kReservedSurfaces.begin(), kReservedSurfaces.end(),
                                    surface) != kReservedSurfaces.end();
    if (!reserved) entries.emplace_back(surface, n);
  }
  if (entries.empty()) throw std::invalid_argument("empty corpus");
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> surfaces(kReservedSurfaces.begin(), kReservedSurfaces.end());
  for (const auto& [surface, n] : entries) {
    if (surfaces.size() >= max_size) break;
    surfaces.push_back(surface);
  }
  return Vocabulary::from_surfaces(surfaces);
}

inline void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& s : vocab.surfaces()) out << s << '\n';
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::string> surfaces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    surfaces.push_back(line);
  }
  return Vocabulary::from_surfaces(surfaces);
}

}  // namespace nbrescore::corpus
