#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nbrescore::textproc {

namespace detail {
// Soundex consonant classes; '0' marks vowels (which separate repeated
// codes), '-' marks h/w (which do not).
constexpr char soundex_class(char c) {
  switch (c) {
    case 'b': case 'f': case 'p': case 'v': return '1';
    case 'c': case 'g': case 'j': case 'k': case 'q': case 's': case 'x': case 'z': return '2';
    case 'd': case 't': return '3';
    case 'l': return '4';
    case 'm': case 'n': return '5';
    case 'r': return '6';
    case 'h': case 'w': return '-';
    default: return '0';
  }
}
}  // namespace detail

/// Soundex-style key: lowercase first letter followed by three consonant
/// class digits, zero padded ("john" -> "j500", "a" -> "a000"). Two surfaces
/// with equal keys are treated as homophones by the corpus generator.
inline std::string phonetic_key(std::string_view surface) {
  if (surface.empty()) throw std::invalid_argument("phonetic_key: empty input");
  std::string lower;
  for (char c : surface) {
    if (!std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) > 127) {
      throw std::invalid_argument("phonetic_key: non-alphabetic input '" + std::string(surface) +
                                  "'");
    }
    lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  std::string key(1, lower[0]);
  char prev = detail::soundex_class(lower[0]);
  for (std::size_t i = 1; i < lower.size() && key.size() < 4; ++i) {
    const char code = detail::soundex_class(lower[i]);
    if (code == '-') continue;
    if (code == '0') {
      prev = '0';
      continue;
    }
    if (code != prev) key += code;
    prev = code;
  }
  key.resize(4, '0');
  return key;
}

}  // namespace nbrescore::textproc
