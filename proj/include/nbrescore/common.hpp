#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nbrescore {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

// Reserved vocabulary entries occupy ids 0..3 in every vocabulary.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr std::size_t kReservedCount = 4;
inline constexpr std::array<std::string_view, kReservedCount> kReservedSurfaces{
    "[PAD]", "[UNK]", "[CLS]", "[SEP]"};

// Bad user input (config values, CLI arguments, incompatible options).
// The CLI maps this to exit code 1; everything else is a runtime failure.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nbrescore
