#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/eval/metrics.hpp"
#include "nbrescore/eval/report.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/textproc/augment.hpp"
#include "nbrescore/training/trainer.hpp"

namespace nbrescore::eval {

struct GridData {
  const corpus::Dataset* train = nullptr;
  const corpus::Dataset* valid = nullptr;
  const corpus::Dataset* test_personalized = nullptr;
  const corpus::Dataset* test_general = nullptr;
  const corpus::CatalogMap* catalogs = nullptr;
};

struct GridOptions {
  nnet::ModelConfig model;
  training::TrainConfig train;  // personalized_fraction is overridden per cell
  textproc::PromptTemplate prompt;
  std::uint64_t seed = 1;
};

struct GridCell {
  nnet::Variant variant = nnet::Variant::Baseline;
  training::Regime regime = training::Regime::Trained;
  double fraction = 0.0;
  double personalized_wer = 0.0;
  double general_wer = 0.0;
  double personalized_werr = 0.0;
  double general_werr = 0.0;
  std::size_t best_epoch = 0;
};

struct GridResult {
  double baseline_personalized_wer = 0.0;
  double baseline_general_wer = 0.0;
  double oracle_personalized_wer = 0.0;
  double oracle_general_wer = 0.0;
  std::vector<GridCell> cells;  // variant-major, fractions in the given order
};

// Per-split WER of `model` under `variant`.
inline double split_wer(const nnet::ScorerModel& model, nnet::Variant variant,
                        const corpus::Dataset& data, const corpus::CatalogMap& catalogs,
                        const textproc::PromptTemplate& prompt, const training::TrainConfig& t) {
  const auto prepared =
      nnet::prepare_dataset(variant, data, catalogs, prompt, model.config().max_positions);
  const auto fused = nnet::fused_scores(model, prepared, t.alpha, t.beta, t.threads);
  return corpus_wer(data, SelectionMode::Rescored, &fused).wer();
}

/// Trains every (variant, fraction) cell and scores both test splits.
///
/// The reference is a Baseline scorer trained on general data only
/// (fraction 0). Baseline cells at other fractions are trained from scratch;
/// personalization variants start from the reference weights and are
/// trained (prompt: fine-tuned) on the mixed pool of their fraction.
inline GridResult run_experiment_grid(const std::vector<nnet::Variant>& variants,
                                      const std::vector<double>& fractions, const GridData& data,
                                      const GridOptions& opts, std::ostream* log = nullptr) {
  if (variants.empty()) throw ValidationError("no variants");
  if (fractions.empty()) throw ValidationError("no fractions");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("personalized_fraction out of range");
  }
  const auto& catalogs = *data.catalogs;
  auto train_cell = [&](nnet::Variant variant, double fraction,
                        const nnet::ScorerModel* init) -> std::pair<nnet::ScorerModel, std::size_t> {
    nnet::ScorerModel model(nnet::architecture_for(variant), opts.model,
                            derive_seed(opts.seed, {0x6d6f64656cULL}));
    if (init) model.copy_shared_from(*init);
    auto cfg = opts.train;
    cfg.personalized_fraction = fraction;
    cfg.seed = derive_seed(opts.seed, {0x747261696eULL, static_cast<std::uint64_t>(variant),
                                       static_cast<std::uint64_t>(fraction * 1e6)});
    const auto r = training::train(model, variant, training::trained_regime(variant), *data.train,
                                   *data.valid, catalogs, opts.prompt, cfg);
    return {std::move(model), r.best_epoch};
  };

  auto reference = train_cell(nnet::Variant::Baseline, 0.0, nullptr);
  GridResult out;
  out.baseline_personalized_wer = split_wer(reference.first, nnet::Variant::Baseline,
                                            *data.test_personalized, catalogs, opts.prompt,
                                            opts.train);
  out.baseline_general_wer = split_wer(reference.first, nnet::Variant::Baseline,
                                       *data.test_general, catalogs, opts.prompt, opts.train);
  out.oracle_personalized_wer = corpus_wer(*data.test_personalized, SelectionMode::Oracle).wer();
  out.oracle_general_wer = corpus_wer(*data.test_general, SelectionMode::Oracle).wer();
  if (log) {
    *log << "reference baseline: personalized " << format_wer(out.baseline_personalized_wer)
         << ", general " << format_wer(out.baseline_general_wer) << "\n";
  }

  for (auto variant : variants) {
    for (double fraction : fractions) {
      GridCell cell;
      cell.variant = variant;
      cell.regime = training::trained_regime(variant);
      cell.fraction = fraction;
      const nnet::ScorerModel* model = &reference.first;
      std::optional<std::pair<nnet::ScorerModel, std::size_t>> trained;
      if (variant == nnet::Variant::Baseline && fraction == 0.0) {
        cell.best_epoch = reference.second;
      } else {
        trained.emplace(train_cell(variant, fraction,
                                   variant == nnet::Variant::Baseline ? nullptr : &reference.first));
        model = &trained->first;
        cell.best_epoch = trained->second;
      }
      cell.personalized_wer = split_wer(*model, variant, *data.test_personalized, catalogs,
                                        opts.prompt, opts.train);
      cell.general_wer =
          split_wer(*model, variant, *data.test_general, catalogs, opts.prompt, opts.train);
      cell.personalized_werr = werr(cell.personalized_wer, out.baseline_personalized_wer);
      cell.general_werr = werr(cell.general_wer, out.baseline_general_wer);
      if (log) {
        char line[200];
        std::snprintf(line, sizeof line, "%-8s fraction %-6g personalized %s (%s) general %s (%s)\n",
                      std::string(nnet::to_string(variant)).c_str(), fraction,
                      format_wer(cell.personalized_wer).c_str(),
                      format_percent(cell.personalized_werr).c_str(),
                      format_wer(cell.general_wer).c_str(),
                      format_percent(cell.general_werr).c_str());
        *log << line;
      }
      out.cells.push_back(cell);
    }
  }
  return out;
}

// One object per (variant, fraction, split).
inline std::vector<nlohmann::ordered_json> grid_rows(const GridResult& r) {
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& c : r.cells) {
    for (int personalized = 1; personalized >= 0; --personalized) {
      nlohmann::ordered_json j;
      j["variant"] = std::string(nnet::to_string(c.variant));
      j["regime"] = std::string(training::to_string(c.regime));
      j["fraction"] = c.fraction;
      j["split"] = personalized ? "personalized" : "general";
      j["wer"] = personalized ? c.personalized_wer : c.general_wer;
      j["baseline_wer"] = personalized ? r.baseline_personalized_wer : r.baseline_general_wer;
      j["werr"] = personalized ? c.personalized_werr : c.general_werr;
      j["werr_percent"] = format_percent(personalized ? c.personalized_werr : c.general_werr);
      j["best_epoch"] = c.best_epoch;
      rows.push_back(std::move(j));
    }
  }
  return rows;
}

inline void print_grid(std::ostream& os, const GridResult& r) {
  char line[200];
  std::snprintf(line, sizeof line, "%-8s %-9s %14s %14s\n", "variant", "fraction",
                "WERR personal", "WERR general");
  os << line;
  for (const auto& c : r.cells) {
    std::snprintf(line, sizeof line, "%-8s %-9g %14s %14s\n",
                  std::string(nnet::to_string(c.variant)).c_str(), c.fraction,
                  format_percent(c.personalized_werr).c_str(),
                  format_percent(c.general_werr).c_str());
    os << line;
  }
  std::snprintf(line, sizeof line, "baseline WER: personalized %s, general %s; oracle %s / %s\n",
                format_wer(r.baseline_personalized_wer).c_str(),
                format_wer(r.baseline_general_wer).c_str(),
                format_wer(r.oracle_personalized_wer).c_str(),
                format_wer(r.oracle_general_wer).c_str());
  os << line;
}

}  // namespace nbrescore::eval
