#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/lexicon.hpp"
#include "nbrescore/rng.hpp"

namespace nbrescore::corpus {

// Weights of the simulated first-pass score
//   u = gamma * (c1 * acoustic_ops + noise) + epsilon_sf * (c2 * oov_count)
//       + length_penalty * length
// where c1 and c2 are the fixed per-event costs below.
struct FirstPassSimConfig {
  double gamma = 0.1;
  double epsilon_sf = 0.08;  // n-gram interpolation weight
  double length_penalty = 0.06;
  double confusion_rate = 0.08;   // per-token substitution/deletion probability
  double homophone_rate = 0.5;    // per-name-token spelling swap probability
  std::size_t n_best_size = 8;
  double score_noise = 0.5;       // stddev of the acoustic-proxy noise
  double reference_rate = 0.85;   // probability the clean reference is in the n-best
  std::uint64_t seed = 1;

  void validate() const {
    auto rate = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " out of range");
    };
    rate(confusion_rate, "confusion_rate");
    rate(homophone_rate, "homophone_rate");
    rate(reference_rate, "reference_rate");
    if (n_best_size < 1) throw ValidationError("n_best_size must be at least 1");
    if (!(score_noise >= 0.0) || !std::isfinite(score_noise)) {
      throw ValidationError("score_noise out of range");
    }
    for (double w : {gamma, epsilon_sf, length_penalty}) {
      if (!std::isfinite(w)) throw ValidationError("first-pass weights must be finite");
    }
  }
};

inline constexpr double kAcousticOpCost = 1.0;
inline constexpr double kOovCost = 1.0;

struct FirstPassTerms {
  std::size_t acoustic_ops = 0;  // substitutions + deletions (homophone swaps are free)
  double noise = 0.0;
  std::size_t oov_count = 0;     // rare spellings unknown to the n-gram model
  std::size_t length = 0;
};

inline double first_pass_score(const FirstPassTerms& t, const FirstPassSimConfig& cfg) {
  const double acoustic = kAcousticOpCost * static_cast<double>(t.acoustic_ops) + t.noise;
  const double lm = kOovCost * static_cast<double>(t.oov_count);
  return cfg.gamma * acoustic + cfg.epsilon_sf * lm +
         cfg.length_penalty * static_cast<double>(t.length);
}

struct SimulatedHypothesis {
  std::vector<std::string> words;
  double first_pass_score = 0.0;
  std::size_t perturbations = 0;  // edit operations applied to the reference
};

/// Simulates a first-pass n-best list for `reference`.
///
/// Name tokens are swapped to another spelling of the same homophone group
/// with probability homophone_rate; other positions are substituted or
/// deleted with probability confusion_rate. Homophone swaps are acoustically
/// free, so only the n-gram term distinguishes spellings. Hypotheses are
/// distinct and sorted by ascending score. The list may be shorter than
/// n_best_size when the perturbation rates cannot produce enough variants.
inline std::vector<SimulatedHypothesis> simulate_first_pass(
    const std::vector<std::string>& reference, const FirstPassSimConfig& cfg,
    const Lexicon& lexicon, Rng& rng) {
  if (reference.empty()) throw std::invalid_argument("simulate_first_pass: empty reference");
  if (cfg.n_best_size < 1) throw std::invalid_argument("n_best_size must be at least 1");
  const auto& confusions = lexicon.confusion_words();

  auto score = [&](const std::vector<std::string>& words, std::size_t acoustic_ops) {
    FirstPassTerms t;
    t.acoustic_ops = acoustic_ops;
    t.noise = cfg.score_noise > 0.0 ? cfg.score_noise * rng.normal() : 0.0;
    t.oov_count = static_cast<std::size_t>(std::count_if(
        words.begin(), words.end(), [&](const auto& w) { return lexicon.is_rare_spelling(w); }));
    t.length = words.size();
    return first_pass_score(t, cfg);
  };

  std::vector<SimulatedHypothesis> out;
  auto contains = [&](const std::vector<std::string>& words) {
    return std::any_of(out.begin(), out.end(),
                       [&](const SimulatedHypothesis& h) { return h.words == words; });
  };

  const bool include_reference = rng.bernoulli(cfg.reference_rate);
  if (include_reference) out.push_back({reference, score(reference, 0), 0});

  const std::size_t max_attempts = 50 * cfg.n_best_size;
  for (std::size_t attempt = 0; attempt < max_attempts && out.size() < cfg.n_best_size;
       ++attempt) {
    std::vector<std::string> words;
    std::size_t perturbations = 0;
    std::size_t acoustic_ops = 0;
    for (const auto& ref_word : reference) {
      const auto alternatives = lexicon.homophones(ref_word);
      if (!alternatives.empty() && rng.bernoulli(cfg.homophone_rate)) {
        words.push_back(alternatives[rng.index(alternatives.size())]);
        ++perturbations;
      } else if (rng.bernoulli(cfg.confusion_rate)) {
        ++perturbations;
        ++acoustic_ops;
        if (rng.bernoulli(0.5) || confusions.size() < 2) continue;  // deletion
        std::string sub;
        do {
          sub = confusions[rng.index(confusions.size())];
        } while (sub == ref_word);
        words.push_back(std::move(sub));
      } else {
        words.push_back(ref_word);
      }
    }
    if (perturbations == 0 || words.empty() || words == reference || contains(words)) continue;
    const double u = score(words, acoustic_ops);
    out.push_back({std::move(words), u, perturbations});
  }
  if (out.empty()) out.push_back({reference, score(reference, 0), 0});

  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.first_pass_score < b.first_pass_score;
  });
  return out;
}

inline std::vector<SimulatedHypothesis> simulate_first_pass(
    const std::vector<std::string>& reference, const FirstPassSimConfig& cfg,
    const Lexicon& lexicon) {
  Rng rng(cfg.seed);
  return simulate_first_pass(reference, cfg, lexicon, rng);
}

}  // namespace nbrescore::corpus
