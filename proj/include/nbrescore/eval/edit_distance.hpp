#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

namespace nbrescore::eval {

// Word-level Levenshtein distance (unit-cost substitutions, insertions,
// deletions).
template <typename T>
std::size_t edit_distance(std::span<const T> hyp, std::span<const T> ref) {
  std::vector<std::size_t> row(ref.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= hyp.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[ref.size()];
}

template <typename T>
std::size_t edit_distance(const std::vector<T>& hyp, const std::vector<T>& ref) {
  return edit_distance(std::span<const T>(hyp), std::span<const T>(ref));
}

}  // namespace nbrescore::eval
