#pragma once

#include <cctype>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/vocabulary.hpp"

namespace nbrescore::textproc {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Whitespace split with lowercasing.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(to_lower(w));
  return words;
}

inline TokenSeq tokenize(std::string_view text, const corpus::Vocabulary& vocab) {
  TokenSeq out;
  for (const auto& w : split_words(text)) out.push_back(vocab.id(w));
  return out;
}

inline TokenSeq to_ids(const std::vector<std::string>& words, const corpus::Vocabulary& vocab) {
  TokenSeq out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(vocab.id(w));
  return out;
}

inline std::string detokenize(const TokenSeq& tokens, const corpus::Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += vocab.surface(tokens[i]);
  }
  return out;
}

}  // namespace nbrescore::textproc
