#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nbrescore/cli/config.hpp"
#include "nbrescore/common.hpp"
#include "nbrescore/corpus/generator.hpp"
#include "nbrescore/corpus/io.hpp"
#include "nbrescore/corpus/lexicon.hpp"
#include "nbrescore/eval/grid.hpp"
#include "nbrescore/eval/metrics.hpp"
#include "nbrescore/eval/report.hpp"
#include "nbrescore/nnet/checkpoint.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"
#include "nbrescore/textproc/augment.hpp"
#include "nbrescore/training/trainer.hpp"

namespace nbrescore::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVocabFile = "vocab.txt";
inline constexpr const char* kCatalogFile = "catalog.jsonl";
inline constexpr const char* kConfigEcho = "config.conf";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kHistoryFile = "history.log";
inline constexpr const char* kResultsFile = "results.jsonl";
inline constexpr const char* kReportFile = "report.txt";
inline constexpr const char* kSplitNames[] = {"train", "valid", "test_personalized", "test_general"};

inline std::string split_file(std::string_view split) {
  return std::string(split) + ".nbest.jsonl";
}

// A generated dataset directory loaded back into memory.
struct DataBundle {
  corpus::Vocabulary vocab;
  corpus::Dataset train, valid, test_personalized, test_general;
  corpus::CatalogMap catalogs;

  textproc::PromptTemplate prompt(const RunConfig& cfg) const {
    return textproc::PromptTemplate::from_text(cfg.prompt_prefix, cfg.prompt_joiner, vocab);
  }
};

inline DataBundle load_data(const std::string& dir) {
  if (dir.empty()) throw ValidationError("no data directory given (--data or data_dir)");
  if (!fs::is_directory(dir)) throw ValidationError("data directory not found: " + dir);
  const fs::path root(dir);
  DataBundle b{corpus::load_vocabulary((root / kVocabFile).string()), {}, {}, {}, {}, {}};
  corpus::Dataset* targets[] = {&b.train, &b.valid, &b.test_personalized, &b.test_general};
  for (std::size_t s = 0; s < 4; ++s) {
    *targets[s] = corpus::load_dataset((root / split_file(kSplitNames[s])).string(), b.vocab);
  }
  b.catalogs = corpus::load_catalogs((root / kCatalogFile).string(), b.vocab);
  return b;
}

inline fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw ValidationError("no output directory given (--out)");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir);
  return fs::path(dir);
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

inline void echo_config(const fs::path& dir, const RunConfig& cfg) {
  std::ostringstream os;
  write_config(os, cfg);
  write_text(dir / kConfigEcho, os.str());
}

inline void write_rows(const fs::path& path, const std::vector<nlohmann::ordered_json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text(path, text);
}

inline void cmd_generate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  const auto out = prepare_out_dir(out_dir);
  const auto corpus = corpus::generate_corpus(cfg.generator, load_lexicon(cfg),
                                              {cfg.prompt_prefix, cfg.prompt_joiner});
  const corpus::Dataset* splits[] = {&corpus.train, &corpus.valid, &corpus.test_personalized,
                                     &corpus.test_general};
  std::vector<const corpus::EntityCatalog*> catalogs;
  for (const auto* split : splits) {
    for (const auto& u : *split) catalogs.push_back(&corpus.catalogs.at(u.utterance_id));
  }
  for (std::size_t s = 0; s < 4; ++s) {
    corpus::save_dataset(*splits[s], corpus.vocab, (out / split_file(kSplitNames[s])).string());
  }
  corpus::save_catalogs(catalogs, corpus.vocab, (out / kCatalogFile).string());
  corpus::save_vocabulary(corpus.vocab, (out / kVocabFile).string());
  echo_config(out, cfg);

  char line[160];
  std::snprintf(line, sizeof line, "%-18s %12s %12s %10s\n", "split", "personalized", "general",
                "oracle");
  log << line;
  for (std::size_t s = 0; s < 4; ++s) {
    std::size_t p = 0;
    for (const auto& u : *splits[s]) p += u.is_personalized ? 1 : 0;
    const auto oracle = splits[s]->empty()
                            ? std::string("-")
                            : eval::format_wer(
                                  eval::corpus_wer(*splits[s], eval::SelectionMode::Oracle).wer());
    std::snprintf(line, sizeof line, "%-18s %12zu %12zu %10s\n", kSplitNames[s], p,
                  splits[s]->size() - p, oracle.c_str());
    log << line;
  }
  log << "vocabulary: " << corpus.vocab.size() << " tokens; catalogs: " << catalogs.size() << "\n";
}

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  std::string baseline;  // initialization checkpoint
};

inline void cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& log) {
  const auto variant = nnet::parse_variant(cfg.variant);
  const auto regime = training::parse_regime(cfg.regime);
  training::validate_regime(variant, regime);
  const bool needs_init = regime == training::Regime::Untrained ||
                          regime == training::Regime::Frozen ||
                          regime == training::Regime::Finetuned;
  if (needs_init && args.baseline.empty()) {
    throw ValidationError("regime " + cfg.regime + " needs an initialization checkpoint (--baseline)");
  }
  const auto data = load_data(args.data_dir);
  const auto out = prepare_out_dir(args.out_dir);

  auto mcfg = cfg.model;
  mcfg.vocab_size = data.vocab.size();
  std::optional<nnet::Checkpoint> init;
  if (!args.baseline.empty()) {
    init.emplace(nnet::load_checkpoint(args.baseline, data.vocab.size()));
    mcfg = init->model.config();
  }
  nnet::ScorerModel model(nnet::architecture_for(variant), mcfg,
                          derive_seed(cfg.seed, {0x6d6f64656cULL}));
  if (init) model.copy_shared_from(init->model);

  training::TrainHooks hooks;
  hooks.on_epoch = [&](const training::EpochRecord& r) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %zu lr %.3g loss %.5f valid WER %s\n", r.epoch, r.lr,
                  r.train_loss, eval::format_wer(r.valid_wer).c_str());
    log << line;
  };
  const auto result = training::train(model, variant, regime, data.train, data.valid,
                                      data.catalogs, data.prompt(cfg), cfg.train, hooks);
  nnet::save_checkpoint(model, variant, (out / kCheckpointFile).string());
  std::ostringstream history;
  training::write_history(history, result);
  write_text(out / kHistoryFile, history.str());
  echo_config(out, cfg);
  log << "trained " << cfg.variant << "/" << cfg.regime << ": " << result.steps << " steps, best epoch "
      << result.best_epoch << ", checkpoint " << (out / kCheckpointFile).string() << "\n";
}

struct EvaluateArgs {
  std::string data_dir;
  std::string out_dir;
  std::string baseline;
  std::vector<std::string> checkpoints;
};

inline eval::EvalReport cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args,
                                     std::ostream& log) {
  if (args.checkpoints.empty() && args.baseline.empty()) {
    throw ValidationError("no checkpoints to evaluate (--checkpoint or --baseline)");
  }
  const auto data = load_data(args.data_dir);
  const auto out = prepare_out_dir(args.out_dir);

  std::vector<nnet::Checkpoint> loaded;
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  auto add = [&](const std::string& path, std::optional<std::string> name) {
    loaded.push_back(nnet::load_checkpoint(path, data.vocab.size()));
    std::string base = name ? *name : std::string(nnet::to_string(loaded.back().variant));
    const int n = ++seen[base];
    names.push_back(n == 1 ? base : base + "-" + std::to_string(n));
  };
  std::string baseline_name;
  if (!args.baseline.empty()) {
    add(args.baseline, "baseline");
    baseline_name = names.back();
  }
  for (const auto& path : args.checkpoints) add(path, std::nullopt);
  std::vector<eval::System> systems;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    systems.push_back({names[i], &loaded[i].model, loaded[i].variant});
  }

  const eval::EvalOptions opts{cfg.train.alpha, cfg.train.beta, cfg.train.threads};
  const auto prompt = data.prompt(cfg);
  eval::EvalReport report;
  report.baseline_name = baseline_name;
  report.splits.push_back(eval::evaluate_split("test_personalized", data.test_personalized,
                                               data.catalogs, systems, prompt, baseline_name, opts));
  report.splits.push_back(eval::evaluate_split("test_general", data.test_general, data.catalogs,
                                               systems, prompt, baseline_name, opts));
  for (const auto& s : report.splits) {
    if (!eval::oracle_dominates(s)) {
      throw std::runtime_error("oracle WER exceeds a system WER on split " + s.split);
    }
  }
  std::ostringstream text;
  eval::print_report(text, report);
  write_text(out / kReportFile, text.str());
  write_rows(out / kResultsFile, eval::report_rows(report));
  echo_config(out, cfg);
  log << text.str();
  return report;
}

struct SweepArgs {
  std::string data_dir;
  std::string out_dir;
};

inline eval::GridResult cmd_sweep(const RunConfig& cfg, const SweepArgs& args, std::ostream& log) {
  if (cfg.variants.empty()) throw ValidationError("no variants");
  std::vector<nnet::Variant> variants;
  for (const auto& v : cfg.variants) variants.push_back(nnet::parse_variant(v));
  const auto data = load_data(args.data_dir);
  const auto out = prepare_out_dir(args.out_dir);

  eval::GridOptions opts;
  opts.model = cfg.model;
  opts.model.vocab_size = data.vocab.size();
  opts.train = cfg.train;
  opts.prompt = data.prompt(cfg);
  opts.seed = cfg.seed;
  const eval::GridData gd{&data.train, &data.valid, &data.test_personalized, &data.test_general,
                          &data.catalogs};
  const auto result = eval::run_experiment_grid(variants, cfg.fractions, gd, opts, &log);
  std::ostringstream table;
  eval::print_grid(table, result);
  write_text(out / "grid.txt", table.str());
  write_rows(out / kResultsFile, eval::grid_rows(result));
  echo_config(out, cfg);
  log << table.str();
  return result;
}

struct RescoreArgs {
  std::string data_dir;  // vocabulary and catalogs
  std::string checkpoint;
  std::string input;
};

// Writes one JSON line per utterance: chosen hypothesis and fused scores.
inline void cmd_rescore(const RunConfig& cfg, const RescoreArgs& args, std::ostream& out) {
  if (args.checkpoint.empty()) throw ValidationError("no checkpoint given (--checkpoint)");
  if (args.input.empty()) throw ValidationError("no input given (--input)");
  if (args.data_dir.empty()) throw ValidationError("no data directory given (--data)");
  const fs::path root(args.data_dir);
  const auto vocab = corpus::load_vocabulary((root / kVocabFile).string());
  const auto catalogs = corpus::load_catalogs((root / kCatalogFile).string(), vocab);
  const auto ck = nnet::load_checkpoint(args.checkpoint, vocab.size());
  const auto data = corpus::load_dataset(args.input, vocab);
  const auto prompt =
      textproc::PromptTemplate::from_text(cfg.prompt_prefix, cfg.prompt_joiner, vocab);
  const auto prepared =
      nnet::prepare_dataset(ck.variant, data, catalogs, prompt, ck.model.config().max_positions);
  const auto fused =
      nnet::fused_scores(ck.model, prepared, cfg.train.alpha, cfg.train.beta, cfg.train.threads);
  for (std::size_t u = 0; u < data.size(); ++u) {
    const auto best = eval::select_hypothesis(data[u], fused[u], eval::SelectionMode::Rescored);
    nlohmann::ordered_json j;
    j["utterance_id"] = data[u].utterance_id;
    j["best_index"] = best;
    j["text"] = textproc::detokenize(data[u].hypotheses[best].tokens, vocab);
    j["scores"] = fused[u];
    out << j.dump() << "\n";
  }
}

/// Parses argv, dispatches, and maps failures to exit codes:
/// 0 success, 1 validation error, 2 runtime failure.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"n-best rescoring with personalized entity biasing"};
  app.require_subcommand(1);
  std::string config_path, out_dir, data_dir, variant, regime, baseline, input, variants, fractions;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> checkpoints;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "overrides the config seed");
  };
  auto* gen = app.add_subcommand("generate", "generate a synthetic corpus");
  common(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* tr = app.add_subcommand("train", "train one scorer variant");
  common(tr);
  tr->add_option("--data", data_dir, "dataset directory");
  tr->add_option("--out", out_dir, "output directory")->required();
  tr->add_option("--variant", variant, "baseline, prompt, early, late, xattn");
  tr->add_option("--regime", regime, "untrained, frozen, trained, finetuned");
  tr->add_option("--baseline", baseline, "initialization checkpoint");

  auto* ev = app.add_subcommand("evaluate", "evaluate checkpoints on the test splits");
  common(ev);
  ev->add_option("--data", data_dir, "dataset directory");
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--baseline", baseline, "reference checkpoint for WERR");
  ev->add_option("--checkpoint", checkpoints, "checkpoint to evaluate (repeatable)");

  auto* sw = app.add_subcommand("sweep", "personalized-fraction experiment grid");
  common(sw);
  sw->add_option("--data", data_dir, "dataset directory");
  sw->add_option("--out", out_dir, "output directory")->required();
  sw->add_option("--variants", variants, "comma-separated variants");
  sw->add_option("--fractions", fractions, "comma-separated personalized fractions");

  auto* rs = app.add_subcommand("rescore", "rescore an nbest.jsonl file to stdout");
  common(rs);
  rs->add_option("--data", data_dir, "directory holding vocab.txt and catalog.jsonl");
  rs->add_option("--checkpoint", checkpoints, "checkpoint")->expected(1);
  rs->add_option("--input", input, "nbest.jsonl to rescore")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!variant.empty()) cfg.variant = variant;
    if (!regime.empty()) cfg.regime = regime;
    if (sw->parsed() && sw->count("--variants")) set_value(cfg, "variants", variants);
    if (sw->parsed() && sw->count("--fractions")) set_value(cfg, "fractions", fractions);
    if (data_dir.empty()) data_dir = cfg.data_dir;
    cfg.finalize();
    if (gen->parsed()) {
      cmd_generate(cfg, out_dir, out);
    } else if (tr->parsed()) {
      cmd_train(cfg, {data_dir, out_dir, baseline}, out);
    } else if (ev->parsed()) {
      cmd_evaluate(cfg, {data_dir, out_dir, baseline, checkpoints}, out);
    } else if (sw->parsed()) {
      cmd_sweep(cfg, {data_dir, out_dir}, out);
    } else if (rs->parsed()) {
      cmd_rescore(cfg, {data_dir, checkpoints.empty() ? "" : checkpoints.front(), input}, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace nbrescore::cli
