#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/nnet/tape.hpp"
#include "nbrescore/nnet/tensor.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/textproc/augment.hpp"

namespace nbrescore::nnet {

enum class Architecture { Baseline, EarlyFusion, LateFusion, CrossAttention };

inline std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Baseline: return "baseline";
    case Architecture::EarlyFusion: return "early";
    case Architecture::LateFusion: return "late";
    case Architecture::CrossAttention: return "xattn";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  for (auto a : {Architecture::Baseline, Architecture::EarlyFusion, Architecture::LateFusion,
                 Architecture::CrossAttention}) {
    if (to_string(a) == s) return a;
  }
  throw ValidationError("unknown architecture '" + std::string(s) + "'");
}

inline bool is_fusion(Architecture a) {
  return a == Architecture::EarlyFusion || a == Architecture::LateFusion;
}

struct ModelConfig {
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t intermediate_size = 128;
  double dropout = 0.1;
  std::size_t vocab_size = 2048;
  std::size_t max_positions = 64;

  // Laptop-scale default.
  static ModelConfig desk(std::size_t vocab) { return {64, 2, 4, 128, 0.1, vocab, 64}; }
  // Published "tiny BERT" shape.
  static ModelConfig tiny(std::size_t vocab) { return {320, 4, 16, 1200, 0.1, vocab, 128}; }
  // Published "big BERT" shape; supported but not exercised at this scale.
  static ModelConfig big(std::size_t vocab) { return {1024, 16, 16, 3072, 0.1, vocab, 128}; }

  void validate() const {
    if (hidden_size == 0 || num_layers == 0 || num_heads == 0 || intermediate_size == 0) {
      throw ValidationError("model dimensions must be positive");
    }
    if (hidden_size % num_heads != 0) {
      throw ValidationError("hidden_size must be divisible by num_heads");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout out of range");
    if (vocab_size <= kReservedCount) throw ValidationError("vocab_size too small");
    if (max_positions < 2) throw ValidationError("max_positions must be at least 2");
  }

  bool operator==(const ModelConfig&) const = default;
};

// What the scorer consumes for one hypothesis. `tokens` excludes [CLS],
// which the model prepends.
struct ScorerInput {
  TokenSeq tokens;
  textproc::SlotTags tags;  // fusion architectures; empty means no tagged token
  TokenSeq slot_sequence;   // cross-attention; empty means exactly [CLS]
};

/// One of the four rescoring architectures.
///
/// All share the same token/position embeddings, post-norm transformer
/// encoder, and linear scoring head on the [CLS] output. Fusion variants add
/// a single learnable slot vector on tagged tokens (tag 0 adds nothing):
/// early fusion before the first layer, late fusion at the input of the
/// last layer. The cross-attention variant encodes the slot sequence with
/// the same encoder and runs one non-causal decoder layer whose queries
/// come from the hypothesis.
///
/// Parameters are created in a fixed order (shared tensors first), so two
/// models built from the same seed hold identical shared weights.
class ScorerModel {
 public:
  ScorerModel(Architecture arch, ModelConfig cfg, std::uint64_t seed)
      : arch_(arch), cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const auto h = static_cast<Eigen::Index>(cfg_.hidden_size);
    token_table_ = params_.add("embeddings.token", normal(cfg_.vocab_size, h, rng));
    position_table_ = params_.add("embeddings.position", normal(cfg_.max_positions, h, rng));
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      const std::string p = "encoder.layer" + std::to_string(l) + ".";
      layers_.push_back({add_attention(p + "attention.", rng), add_norm(p + "attention_norm."),
                         add_ffn(p + "ffn.", rng), add_norm(p + "ffn_norm.")});
    }
    head_weight_ = params_.add("head.weight", normal(h, 1, rng));
    head_bias_ = params_.add("head.bias", Matrix::Zero(1, 1));
    if (is_fusion(arch_)) slot_row_ = params_.add("embeddings.slot", Matrix::Zero(1, h));
    if (arch_ == Architecture::CrossAttention) {
      decoder_ = DecoderLayer{add_attention("decoder.self_attention.", rng),
                              add_norm("decoder.self_norm."),
                              add_attention("decoder.cross_attention.", rng),
                              add_norm("decoder.cross_norm."), add_ffn("decoder.ffn.", rng),
                              add_norm("decoder.ffn_norm.")};
    }
  }

  Architecture architecture() const { return arch_; }
  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  struct Encoded {
    Var sequence;  // (L x hidden)
    Var cls;       // row 0, (1 x hidden)
  };

  // Runs the encoder over a raw sequence (the caller supplies [CLS]).
  // `tags`, when non-empty, must align with `tokens` and requires a fusion
  // architecture.
  Encoded encode(Tape& tape, std::span<const TokenId> tokens,
                 std::span<const std::uint8_t> tags = {}) const {
    if (tokens.empty()) throw std::invalid_argument("encode: empty sequence");
    if (tokens.size() > cfg_.max_positions) {
      throw std::invalid_argument("sequence too long: " + std::to_string(tokens.size()) +
                                  " > max_positions " + std::to_string(cfg_.max_positions));
    }
    if (!tags.empty()) {
      if (!is_fusion(arch_)) throw std::invalid_argument("slot tags need a fusion architecture");
      if (tags.size() != tokens.size()) throw std::invalid_argument("slot tags length mismatch");
    }
    Var x = tape.add(tape.embed(token_table_, tokens), tape.leading_rows(position_table_, tokens.size()));
    const bool tagged = !tags.empty();
    if (tagged && arch_ == Architecture::EarlyFusion) x = tape.add_row_where(x, *slot_row_, tags);
    x = tape.dropout(x, cfg_.dropout);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (tagged && arch_ == Architecture::LateFusion && l + 1 == layers_.size()) {
        x = tape.add_row_where(x, *slot_row_, tags);
      }
      x = encoder_layer(tape, layers_[l], x);
    }
    return {x, tape.select_row(x, 0)};
  }

  // Rescoring score s (1x1) for one hypothesis.
  Var forward(Tape& tape, const ScorerInput& in) const {
    TokenSeq seq;
    seq.reserve(in.tokens.size() + 1);
    seq.push_back(kClsId);
    seq.insert(seq.end(), in.tokens.begin(), in.tokens.end());
    textproc::SlotTags tags;
    if (!in.tags.empty()) {
      if (in.tags.size() != in.tokens.size()) {
        throw std::invalid_argument("slot tags length mismatch");
      }
      tags.reserve(seq.size());
      tags.push_back(0);
      tags.insert(tags.end(), in.tags.begin(), in.tags.end());
    }
    if (arch_ != Architecture::CrossAttention) {
      if (!in.slot_sequence.empty()) {
        throw std::invalid_argument("slot sequence needs the cross-attention architecture");
      }
      return head(tape, encode(tape, seq, tags).cls);
    }
    if (!tags.empty()) throw std::invalid_argument("slot tags need a fusion architecture");
    static const TokenSeq kClsOnly{kClsId};
    const TokenSeq& z = in.slot_sequence.empty() ? kClsOnly : in.slot_sequence;
    const Var hyp = encode(tape, seq).sequence;
    const Var slots = encode(tape, z).sequence;
    return head(tape, tape.select_row(decoder_layer(tape, hyp, slots), 0));
  }

  // Eval-mode score without recording gradients.
  double score(const ScorerInput& in) const {
    Tape tape(params_, {.train = false, .record = false});
    return tape.scalar(forward(tape, in));
  }

  double score_baseline(std::span<const TokenId> tokens) const {
    return score({TokenSeq(tokens.begin(), tokens.end()), {}, {}});
  }

  double score_cross_attention(std::span<const TokenId> tokens,
                               std::span<const TokenId> slot_sequence) const {
    if (arch_ != Architecture::CrossAttention) {
      throw std::invalid_argument("score_cross_attention needs the cross-attention architecture");
    }
    return score({TokenSeq(tokens.begin(), tokens.end()), {},
                  TokenSeq(slot_sequence.begin(), slot_sequence.end())});
  }

  // Trains only the slot vector ("frozen" regime).
  void freeze_all_but_slots() {
    if (!slot_row_) throw ValidationError("freezing needs a fusion architecture");
    params_.set_all_trainable(false);
    params_.set_trainable(*slot_row_, true);
  }

  void unfreeze() { params_.set_all_trainable(true); }

  // Copies every same-named, same-shaped tensor from `other`; returns how
  // many were copied. Used to initialize personalization variants from a
  // trained baseline.
  std::size_t copy_shared_from(const ScorerModel& other) {
    std::size_t copied = 0;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const ParamId id{i};
      const auto src = other.params_.find(params_.name(id));
      if (!src) continue;
      const Matrix& v = other.params_.value(*src);
      if (v.rows() != params_.value(id).rows() || v.cols() != params_.value(id).cols()) continue;
      params_.value(id) = v;
      ++copied;
    }
    return copied;
  }

 private:
  struct AttentionParams {
    ParamId q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  };
  struct NormParams {
    ParamId gain, bias;
  };
  struct FfnParams {
    ParamId in_w, in_b, out_w, out_b;
  };
  struct EncoderLayer {
    AttentionParams attention;
    NormParams attention_norm;
    FfnParams ffn;
    NormParams ffn_norm;
  };
  struct DecoderLayer {
    AttentionParams self_attention;
    NormParams self_norm;
    AttentionParams cross_attention;
    NormParams cross_norm;
    FfnParams ffn;
    NormParams ffn_norm;
  };

  static Matrix normal(std::size_t rows, Eigen::Index cols, Rng& rng) {
    Matrix m(static_cast<Eigen::Index>(rows), cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.truncated_normal(0.02);
    return m;
  }

  AttentionParams add_attention(const std::string& p, Rng& rng) {
    const auto h = static_cast<Eigen::Index>(cfg_.hidden_size);
    AttentionParams a;
    a.q_w = params_.add(p + "query.weight", normal(cfg_.hidden_size, h, rng));
    a.q_b = params_.add(p + "query.bias", Matrix::Zero(1, h));
    a.k_w = params_.add(p + "key.weight", normal(cfg_.hidden_size, h, rng));
    a.k_b = params_.add(p + "key.bias", Matrix::Zero(1, h));
    a.v_w = params_.add(p + "value.weight", normal(cfg_.hidden_size, h, rng));
    a.v_b = params_.add(p + "value.bias", Matrix::Zero(1, h));
    a.o_w = params_.add(p + "output.weight", normal(cfg_.hidden_size, h, rng));
    a.o_b = params_.add(p + "output.bias", Matrix::Zero(1, h));
    return a;
  }

  NormParams add_norm(const std::string& p) {
    const auto h = static_cast<Eigen::Index>(cfg_.hidden_size);
    return {params_.add(p + "gain", Matrix::Ones(1, h)), params_.add(p + "bias", Matrix::Zero(1, h))};
  }

  FfnParams add_ffn(const std::string& p, Rng& rng) {
    const auto h = static_cast<Eigen::Index>(cfg_.hidden_size);
    const auto m = static_cast<Eigen::Index>(cfg_.intermediate_size);
    FfnParams f;
    f.in_w = params_.add(p + "in.weight", normal(cfg_.hidden_size, m, rng));
    f.in_b = params_.add(p + "in.bias", Matrix::Zero(1, m));
    f.out_w = params_.add(p + "out.weight", normal(cfg_.intermediate_size, h, rng));
    f.out_b = params_.add(p + "out.bias", Matrix::Zero(1, h));
    return f;
  }

  Var attend(Tape& tape, const AttentionParams& a, Var queries, Var memory) const {
    const Var q = tape.linear(queries, a.q_w, a.q_b);
    const Var k = tape.linear(memory, a.k_w, a.k_b);
    const Var v = tape.linear(memory, a.v_w, a.v_b);
    return tape.linear(tape.attention(q, k, v, cfg_.num_heads), a.o_w, a.o_b);
  }

  Var feed_forward(Tape& tape, const FfnParams& f, Var x) const {
    return tape.linear(tape.gelu(tape.linear(x, f.in_w, f.in_b)), f.out_w, f.out_b);
  }

  // Residual branch followed by post-norm.
  Var residual(Tape& tape, Var x, Var branch, const NormParams& n) const {
    return tape.layer_norm(tape.add(x, tape.dropout(branch, cfg_.dropout)), n.gain, n.bias);
  }

  Var encoder_layer(Tape& tape, const EncoderLayer& layer, Var x) const {
    x = residual(tape, x, attend(tape, layer.attention, x, x), layer.attention_norm);
    return residual(tape, x, feed_forward(tape, layer.ffn, x), layer.ffn_norm);
  }

  // Self-attention over the hypothesis, cross-attention into the slot
  // encodings (keys/values), then feed-forward.
  Var decoder_layer(Tape& tape, Var hyp, Var slots) const {
    const auto& d = *decoder_;
    Var x = residual(tape, hyp, attend(tape, d.self_attention, hyp, hyp), d.self_norm);
    x = residual(tape, x, attend(tape, d.cross_attention, x, slots), d.cross_norm);
    return residual(tape, x, feed_forward(tape, d.ffn, x), d.ffn_norm);
  }

  Var head(Tape& tape, Var cls) const { return tape.linear(cls, head_weight_, head_bias_); }

  Architecture arch_;
  ModelConfig cfg_;
  ParameterSet params_;
  ParamId token_table_, position_table_, head_weight_, head_bias_;
  std::optional<ParamId> slot_row_;
  std::vector<EncoderLayer> layers_;
  std::optional<DecoderLayer> decoder_;
};

}  // namespace nbrescore::nnet
