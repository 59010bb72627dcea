#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/eval/edit_distance.hpp"

namespace nbrescore::eval {

enum class SelectionMode { FirstPass, Rescored, Oracle };

inline std::string_view to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::FirstPass: return "first_pass";
    case SelectionMode::Rescored: return "rescored";
    case SelectionMode::Oracle: return "oracle";
  }
  return "?";
}

namespace detail {
template <typename Key>
std::size_t argmin(std::size_t n, Key&& key) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (key(i) < key(best)) best = i;  // strict: ties keep the lowest index
  }
  return best;
}
}  // namespace detail

/// Index of the chosen hypothesis: argmin u (FirstPass), argmin v
/// (Rescored, needs one fused score per hypothesis), or argmin edit
/// distance (Oracle). Ties go to the lowest index.
inline std::size_t select_hypothesis(const corpus::NBestList& nbest, std::span<const double> fused,
                                     SelectionMode mode) {
  const auto& h = nbest.hypotheses;
  if (h.empty()) throw std::invalid_argument("select_hypothesis: empty n-best list");
  switch (mode) {
    case SelectionMode::FirstPass:
      return detail::argmin(h.size(), [&](std::size_t i) { return h[i].first_pass_score; });
    case SelectionMode::Oracle:
      return detail::argmin(h.size(), [&](std::size_t i) { return h[i].edit_distance; });
    case SelectionMode::Rescored:
      if (fused.size() != h.size()) {
        throw std::invalid_argument("select_hypothesis: need one fused score per hypothesis");
      }
      return detail::argmin(h.size(), [&](std::size_t i) { return fused[i]; });
  }
  return 0;
}

// Corpus-level error counts. WER is micro-averaged; the macro average over
// utterances is kept as a cross-check only.
struct WerStats {
  std::size_t errors = 0;
  std::size_t reference_words = 0;
  std::size_t utterances = 0;
  double macro_sum = 0.0;

  double wer() const {
    if (reference_words == 0) throw std::invalid_argument("WER undefined: zero reference words");
    return static_cast<double>(errors) / static_cast<double>(reference_words);
  }
  double macro_wer() const {
    return utterances == 0 ? 0.0 : macro_sum / static_cast<double>(utterances);
  }
};

// `fused` is required for Rescored mode (one vector per utterance).
inline WerStats corpus_wer(const corpus::Dataset& data, SelectionMode mode,
                           const std::vector<std::vector<double>>* fused = nullptr) {
  if (data.empty()) throw std::invalid_argument("corpus_wer: empty dataset");
  if (mode == SelectionMode::Rescored && (!fused || fused->size() != data.size())) {
    throw std::invalid_argument("corpus_wer: rescored mode needs fused scores per utterance");
  }
  WerStats st;
  for (std::size_t u = 0; u < data.size(); ++u) {
    const auto& nb = data[u];
    const std::span<const double> v =
        fused ? std::span<const double>((*fused)[u]) : std::span<const double>();
    const auto& chosen = nb.hypotheses[select_hypothesis(nb, v, mode)];
    const std::size_t e = edit_distance(chosen.tokens, nb.reference);
    st.errors += e;
    st.reference_words += nb.reference.size();
    ++st.utterances;
    if (!nb.reference.empty()) {
      st.macro_sum += static_cast<double>(e) / static_cast<double>(nb.reference.size());
    }
  }
  if (st.reference_words == 0) throw std::invalid_argument("corpus_wer: zero reference words");
  return st;
}

// Signed relative change; negative means the system reduced WER.
inline double werr(double system_wer, double baseline_wer) {
  if (!(baseline_wer > 0.0)) throw std::invalid_argument("werr: baseline WER must be positive");
  return (system_wer - baseline_wer) / baseline_wer;
}

}  // namespace nbrescore::eval
