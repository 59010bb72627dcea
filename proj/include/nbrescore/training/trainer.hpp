#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/eval/metrics.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"
#include "nbrescore/nnet/tape.hpp"
#include "nbrescore/parallel.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/training/adam.hpp"
#include "nbrescore/training/batching.hpp"

namespace nbrescore::training {

enum class Regime { Untrained, Frozen, Trained, Finetuned };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Untrained: return "untrained";
    case Regime::Frozen: return "frozen";
    case Regime::Trained: return "trained";
    case Regime::Finetuned: return "finetuned";
  }
  return "?";
}

inline Regime parse_regime(std::string_view s) {
  for (auto r : {Regime::Untrained, Regime::Frozen, Regime::Trained, Regime::Finetuned}) {
    if (to_string(r) == s) return r;
  }
  throw ValidationError("unknown regime '" + std::string(s) +
                        "' (expected untrained, frozen, trained, finetuned)");
}

// Allowed pairs: baseline/trained, prompt/{untrained, finetuned},
// early|late/{frozen, trained}, xattn/trained.
inline void validate_regime(nnet::Variant variant, Regime regime) {
  using nnet::Variant;
  bool ok = false;
  switch (variant) {
    case Variant::Baseline: ok = regime == Regime::Trained; break;
    case Variant::Prompt: ok = regime == Regime::Untrained || regime == Regime::Finetuned; break;
    case Variant::EarlyFusion:
    case Variant::LateFusion: ok = regime == Regime::Frozen || regime == Regime::Trained; break;
    case Variant::CrossAttention: ok = regime == Regime::Trained; break;
  }
  if (!ok) {
    throw ValidationError("incompatible variant/regime pair: " +
                          std::string(nnet::to_string(variant)) + "/" +
                          std::string(to_string(regime)));
  }
}

// The regime used when a variant is trained on personalized data.
inline Regime trained_regime(nnet::Variant v) {
  return v == nnet::Variant::Prompt ? Regime::Finetuned : Regime::Trained;
}

enum class FreezeMode { None, AllButSlots };

struct TrainConfig {
  double alpha = 20.0;
  double beta = 1.0;
  std::size_t batch_size = 16;
  double initial_lr = 1e-3;
  double lr_decay = 0.95;  // multiplicative, per epoch
  std::size_t max_epochs = 10;
  std::size_t patience = 2;  // 0 disables early stopping
  double personalized_fraction = 1.0;
  std::size_t epoch_size = 0;  // 0: larger of the two source pools
  FreezeMode freeze_mode = FreezeMode::None;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  // Published fine-tuning protocol for the small and large models.
  static TrainConfig published_tiny() {
    TrainConfig c;
    c.batch_size = 256;
    c.initial_lr = 1e-5;
    return c;
  }
  static TrainConfig published_big() {
    TrainConfig c;
    c.batch_size = 128;
    c.initial_lr = 1e-6;
    return c;
  }

  void validate() const {
    if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
    if (!(personalized_fraction >= 0.0 && personalized_fraction <= 1.0)) {
      throw ValidationError("personalized_fraction out of range");
    }
    if (!(initial_lr > 0.0) || !std::isfinite(initial_lr)) {
      throw ValidationError("initial_lr must be positive");
    }
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ValidationError("lr_decay out of range");
    if (!std::isfinite(alpha) || !std::isfinite(beta)) {
      throw ValidationError("alpha and beta must be finite");
    }
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double valid_wer = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 when no training happened
  double best_valid_wer = 0.0;
  std::size_t steps = 0;
  bool early_stopped = false;
};

// Raised on a non-finite loss; the message carries the offending batch.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tracks the best (lowest) metric; only strict improvements count.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Returns true when `metric` improves on the best so far.
  bool update(std::size_t epoch, double metric) {
    if (metric < best_) {
      best_ = metric;
      best_epoch_ = epoch;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return patience_ > 0 && stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct TrainHooks {
  // Replaces validation WER (tests use it to script the early-stop path).
  std::function<double(const nnet::ScorerModel&, std::size_t epoch)> validation_metric;
  std::function<void(const EpochRecord&)> on_epoch;
};

inline double validation_wer(const nnet::ScorerModel& model, const nnet::PreparedDataset& valid,
                             const corpus::Dataset& valid_data, const TrainConfig& cfg) {
  const auto fused = nnet::fused_scores(model, valid, cfg.alpha, cfg.beta, cfg.threads);
  return eval::corpus_wer(valid_data, eval::SelectionMode::Rescored, &fused).wer();
}

namespace detail {

inline std::string describe_batch(const std::vector<std::size_t>& batch,
                                  const nnet::PreparedDataset& data, std::size_t bad,
                                  const std::vector<double>& scores) {
  std::ostringstream os;
  os << "non-finite MWER loss in batch [";
  for (std::size_t k = 0; k < batch.size(); ++k) {
    os << (k ? ", " : "") << data.utterances[batch[k]].nbest->utterance_id;
  }
  const auto& u = data.utterances[batch[bad]];
  os << "]; offending utterance " << u.nbest->utterance_id << ":";
  for (std::size_t i = 0; i < u.first_pass.size(); ++i) {
    os << " (u=" << u.first_pass[i] << ", s=" << (i < scores.size() ? scores[i] : NAN)
       << ", eps=" << u.edit_distances[i] << ")";
  }
  return os.str();
}

inline bool degenerate(const std::vector<double>& eps) {
  for (double e : eps) {
    if (e != eps.front()) return false;
  }
  return true;
}

}  // namespace detail

/// MWER training of `model` for one regime.
///
/// Each step averages per-utterance losses over the batch; gradients are
/// computed per utterance (optionally in parallel) and summed in batch
/// order, then applied with Adam at the epoch's learning rate. After every
/// epoch the learning rate decays and validation WER decides early
/// stopping. The model is left holding the best-validation weights.
/// Utterances whose hypotheses all share one edit distance contribute a
/// zero gradient and are skipped.
inline TrainResult train(nnet::ScorerModel& model, nnet::Variant variant, Regime regime,
                         const corpus::Dataset& train_data, const corpus::Dataset& valid_data,
                         const corpus::CatalogMap& catalogs,
                         const textproc::PromptTemplate& prompt, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  validate_regime(variant, regime);
  if (nnet::architecture_for(variant) != model.architecture()) {
    throw ValidationError("model architecture does not match variant " +
                          std::string(nnet::to_string(variant)));
  }
  const std::size_t max_pos = model.config().max_positions;
  const auto valid = nnet::prepare_dataset(variant, valid_data, catalogs, prompt, max_pos);
  auto metric = [&](std::size_t epoch) {
    if (hooks.validation_metric) return hooks.validation_metric(model, epoch);
    return validation_wer(model, valid, valid_data, cfg);
  };

  TrainResult result;
  if (regime == Regime::Untrained) {
    if (!valid_data.empty() || hooks.validation_metric) result.best_valid_wer = metric(0);
    return result;
  }

  const FreezeMode freeze = regime == Regime::Frozen ? FreezeMode::AllButSlots : cfg.freeze_mode;
  if (freeze == FreezeMode::AllButSlots) {
    model.freeze_all_but_slots();
  } else {
    model.unfreeze();
  }
  auto& params = model.parameters();

  const auto prepared = nnet::prepare_dataset(variant, train_data, catalogs, prompt, max_pos);
  const BatchPlan plan(train_data, cfg.personalized_fraction, cfg.batch_size, cfg.seed,
                       cfg.epoch_size);
  Adam adam(params);
  EarlyStopper stopper(cfg.patience);
  std::vector<nnet::Matrix> best;
  auto snapshot = [&] {
    best.clear();
    for (std::size_t i = 0; i < params.size(); ++i) best.push_back(params.value(nnet::ParamId{i}));
  };

  double lr = cfg.initial_lr;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& batch : plan.epoch(epoch)) {
      const double weight = 1.0 / static_cast<double>(batch.size());
      std::vector<nnet::GradientSet> grads(batch.size());
      std::vector<double> losses(batch.size(), 0.0);
      std::vector<std::vector<double>> scores(batch.size());
      parallel_for(batch.size(), cfg.threads, [&](std::size_t k) {
        const auto& u = prepared.utterances[batch[k]];
        if (detail::degenerate(u.edit_distances)) return;
        Rng rng(derive_seed(cfg.seed, {epoch, step, k}));
        nnet::Tape tape(params, {.train = true, .record = true, .rng = &rng});
        std::vector<nnet::Var> s;
        s.reserve(u.inputs.size());
        for (const auto& in : u.inputs) {
          s.push_back(model.forward(tape, in));
          scores[k].push_back(tape.scalar(s.back()));
        }
        for (double x : scores[k]) {
          if (!std::isfinite(x)) {
            losses[k] = std::numeric_limits<double>::quiet_NaN();
            return;
          }
        }
        const auto loss = tape.mwer_loss(s, u.first_pass, u.edit_distances, cfg.alpha, cfg.beta);
        losses[k] = tape.scalar(loss);
        if (!std::isfinite(losses[k])) return;
        grads[k] = nnet::GradientSet(params);
        tape.backward(loss, grads[k], weight);
      });
      nnet::GradientSet total(params);
      for (std::size_t k = 0; k < batch.size(); ++k) {
        if (!std::isfinite(losses[k])) {
          throw TrainingError(detail::describe_batch(batch, prepared, k, scores[k]));
        }
        loss_sum += losses[k];
        ++loss_count;
        if (grads[k].size() != 0) total.add(grads[k]);
      }
      adam.step(params, total, lr);
      ++step;
    }
    EpochRecord rec{epoch, lr, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0,
                    metric(epoch)};
    lr *= cfg.lr_decay;
    result.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (stopper.update(epoch, rec.valid_wer)) snapshot();
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  if (!best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params.value(nnet::ParamId{i}) = best[i];
  }
  model.unfreeze();
  result.best_epoch = stopper.best_epoch();
  result.best_valid_wer = stopper.best();
  result.steps = step;
  return result;
}

inline void write_history(std::ostream& os, const TrainResult& r) {
  os << "# epoch lr train_loss valid_wer\n";
  char line[160];
  for (const auto& e : r.history) {
    std::snprintf(line, sizeof line, "%zu %.9g %.9g %.9g\n", e.epoch, e.lr, e.train_loss,
                  e.valid_wer);
    os << line;
  }
  std::snprintf(line, sizeof line, "# best_epoch %zu best_valid_wer %.9g steps %zu%s\n",
                r.best_epoch, r.best_valid_wer, r.steps, r.early_stopped ? " early_stopped" : "");
  os << line;
}

}  // namespace nbrescore::training
