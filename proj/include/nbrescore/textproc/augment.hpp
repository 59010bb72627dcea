#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/vocabulary.hpp"
#include "nbrescore/textproc/matcher.hpp"
#include "nbrescore/textproc/tokenize.hpp"

namespace nbrescore::textproc {

// Binary gazetteer tags aligned 1:1 with hypothesis tokens.
using SlotTags = std::vector<std::uint8_t>;

inline constexpr std::string_view kDefaultPromptPrefix = "as i need to contact";
inline constexpr std::string_view kDefaultPromptJoiner = "and";

struct PromptTemplate {
  TokenSeq prefix;
  TokenSeq joiner;

  static PromptTemplate from_text(std::string_view prefix, std::string_view joiner,
                                  const corpus::Vocabulary& vocab) {
    return {tokenize(prefix, vocab), tokenize(joiner, vocab)};
  }

  static PromptTemplate defaults(const corpus::Vocabulary& vocab) {
    return from_text(kDefaultPromptPrefix, kDefaultPromptJoiner, vocab);
  }
};

inline SlotTags slot_tags(std::span<const TokenId> hypothesis, const MatchResult& match) {
  SlotTags tags(hypothesis.size(), 0);
  for (const auto& span : match.spans) {
    if (span.end > hypothesis.size()) {
      throw std::invalid_argument("slot_tags: match span outside hypothesis");
    }
    for (std::size_t j = span.start; j < span.end; ++j) tags[j] = 1;
  }
  return tags;
}

// Just the appended prompt ("as i need to contact e1 and e2"); empty when
// nothing matched.
inline TokenSeq prompt_suffix(const MatchResult& match, const PromptTemplate& tmpl) {
  TokenSeq out;
  if (match.matched_entities.empty()) return out;
  out.insert(out.end(), tmpl.prefix.begin(), tmpl.prefix.end());
  for (std::size_t k = 0; k < match.matched_entities.size(); ++k) {
    if (k) out.insert(out.end(), tmpl.joiner.begin(), tmpl.joiner.end());
    const auto& e = match.matched_entities[k];
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

inline TokenSeq build_prompt(std::span<const TokenId> hypothesis, const MatchResult& match,
                             const PromptTemplate& tmpl) {
  TokenSeq out(hypothesis.begin(), hypothesis.end());
  const TokenSeq suffix = prompt_suffix(match, tmpl);
  out.insert(out.end(), suffix.begin(), suffix.end());
  return out;
}

// [CLS] e1 [SEP] e2 [SEP] ... ; exactly [CLS] when nothing matched.
inline TokenSeq build_slot_sequence(const MatchResult& match) {
  TokenSeq out{kClsId};
  for (const auto& e : match.matched_entities) {
    out.insert(out.end(), e.begin(), e.end());
    out.push_back(kSepId);
  }
  return out;
}

// Inverse of build_slot_sequence; nullopt if the sequence is not of the
// form [CLS] (entity [SEP])*.
inline std::optional<std::vector<TokenSeq>> parse_slot_sequence(std::span<const TokenId> seq) {
  if (seq.empty() || seq.front() != kClsId) return std::nullopt;
  std::vector<TokenSeq> entities;
  TokenSeq current;
  for (std::size_t i = 1; i < seq.size(); ++i) {
    if (seq[i] == kClsId) return std::nullopt;
    if (seq[i] == kSepId) {
      if (current.empty()) return std::nullopt;
      entities.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(seq[i]);
    }
  }
  if (!current.empty()) return std::nullopt;
  return entities;
}

}  // namespace nbrescore::textproc
