#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/parallel.hpp"
#include "nbrescore/textproc/augment.hpp"
#include "nbrescore/textproc/matcher.hpp"

namespace nbrescore::nnet {

// A rescoring system: an architecture plus how hypotheses are presented to
// it. Prompt uses the baseline architecture on prompt-extended input.
enum class Variant { Baseline, Prompt, EarlyFusion, LateFusion, CrossAttention };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::Prompt: return "prompt";
    case Variant::EarlyFusion: return "early";
    case Variant::LateFusion: return "late";
    case Variant::CrossAttention: return "xattn";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::Baseline, Variant::Prompt, Variant::EarlyFusion, Variant::LateFusion,
                 Variant::CrossAttention}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown variant '" + std::string(s) +
                        "' (expected baseline, prompt, early, late, xattn)");
}

inline Architecture architecture_for(Variant v) {
  switch (v) {
    case Variant::Baseline:
    case Variant::Prompt: return Architecture::Baseline;
    case Variant::EarlyFusion: return Architecture::EarlyFusion;
    case Variant::LateFusion: return Architecture::LateFusion;
    case Variant::CrossAttention: return Architecture::CrossAttention;
  }
  return Architecture::Baseline;
}

// v = alpha * u + beta * s
inline double fuse(double u, double s, double alpha, double beta) {
  if (!std::isfinite(u) || !std::isfinite(s) || !std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument("fuse: non-finite input");
  }
  return alpha * u + beta * s;
}

struct InputCounters {
  std::size_t hypotheses = 0;
  std::size_t matched = 0;    // hypotheses meeting the match condition
  std::size_t truncated = 0;  // prompts cut to fit max_positions

  InputCounters& operator+=(const InputCounters& o) {
    hypotheses += o.hypotheses;
    matched += o.matched;
    truncated += o.truncated;
    return *this;
  }
};

/// Builds the scorer input for one hypothesis under `variant`.
///
/// Prompts that would exceed max_positions (including [CLS]) lose their
/// tail; the hypothesis itself is never cut. A hypothesis that alone
/// exceeds max_positions is rejected by the model.
inline ScorerInput prepare_input(Variant variant, std::span<const TokenId> hypothesis,
                                 const textproc::EntityMatcher& matcher,
                                 const textproc::PromptTemplate& prompt,
                                 std::size_t max_positions, InputCounters* counters = nullptr) {
  ScorerInput in;
  in.tokens.assign(hypothesis.begin(), hypothesis.end());
  if (counters) ++counters->hypotheses;
  if (variant == Variant::Baseline) return in;
  const auto match = matcher.match(hypothesis);
  if (counters && !match.empty()) ++counters->matched;
  switch (variant) {
    case Variant::Prompt: {
      TokenSeq suffix = textproc::prompt_suffix(match, prompt);
      const std::size_t room =
          max_positions > hypothesis.size() + 1 ? max_positions - hypothesis.size() - 1 : 0;
      if (suffix.size() > room) {
        suffix.resize(room);
        if (counters) ++counters->truncated;
      }
      in.tokens.insert(in.tokens.end(), suffix.begin(), suffix.end());
      break;
    }
    case Variant::EarlyFusion:
    case Variant::LateFusion: in.tags = textproc::slot_tags(hypothesis, match); break;
    case Variant::CrossAttention: in.slot_sequence = textproc::build_slot_sequence(match); break;
    case Variant::Baseline: break;
  }
  return in;
}

// s for the prompt-extended hypothesis, scored by a baseline-architecture
// model; equals score_baseline(tokens) when nothing matched.
inline double score_prompted(const ScorerModel& model, std::span<const TokenId> tokens,
                             const textproc::MatchResult& match,
                             const textproc::PromptTemplate& prompt) {
  TokenSeq seq(tokens.begin(), tokens.end());
  TokenSeq suffix = textproc::prompt_suffix(match, prompt);
  const std::size_t max = model.config().max_positions;
  const std::size_t room = max > seq.size() + 1 ? max - seq.size() - 1 : 0;
  if (suffix.size() > room) suffix.resize(room);
  seq.insert(seq.end(), suffix.begin(), suffix.end());
  return model.score_baseline(seq);
}

// Scorer inputs and targets for one utterance, computed once per variant.
struct PreparedUtterance {
  const corpus::NBestList* nbest = nullptr;
  std::vector<ScorerInput> inputs;
  std::vector<double> first_pass;
  std::vector<double> edit_distances;
};

struct PreparedDataset {
  std::vector<PreparedUtterance> utterances;
  InputCounters counters;
};

inline PreparedUtterance prepare_utterance(Variant variant, const corpus::NBestList& nbest,
                                           const corpus::EntityCatalog& catalog,
                                           const textproc::PromptTemplate& prompt,
                                           std::size_t max_positions,
                                           InputCounters* counters = nullptr) {
  PreparedUtterance out;
  out.nbest = &nbest;
  const textproc::EntityMatcher matcher(catalog);
  for (const auto& h : nbest.hypotheses) {
    out.inputs.push_back(prepare_input(variant, h.tokens, matcher, prompt, max_positions, counters));
    out.first_pass.push_back(h.first_pass_score);
    out.edit_distances.push_back(static_cast<double>(h.edit_distance));
  }
  return out;
}

inline PreparedDataset prepare_dataset(Variant variant, const corpus::Dataset& data,
                                       const corpus::CatalogMap& catalogs,
                                       const textproc::PromptTemplate& prompt,
                                       std::size_t max_positions) {
  PreparedDataset out;
  out.utterances.reserve(data.size());
  for (const auto& u : data) {
    out.utterances.push_back(prepare_utterance(variant, u, corpus::catalog_for(catalogs, u.utterance_id),
                                               prompt, max_positions, &out.counters));
  }
  return out;
}

// Fused scores v_i for every hypothesis of every prepared utterance.
inline std::vector<std::vector<double>> fused_scores(const ScorerModel& model,
                                                     const PreparedDataset& data, double alpha,
                                                     double beta, std::size_t threads) {
  std::vector<std::vector<double>> out(data.utterances.size());
  parallel_for(data.utterances.size(), threads, [&](std::size_t i) {
    const auto& u = data.utterances[i];
    auto& v = out[i];
    v.reserve(u.inputs.size());
    for (std::size_t k = 0; k < u.inputs.size(); ++k) {
      v.push_back(fuse(u.first_pass[k], model.score(u.inputs[k]), alpha, beta));
    }
  });
  return out;
}

}  // namespace nbrescore::nnet
