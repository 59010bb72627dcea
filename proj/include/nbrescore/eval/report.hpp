#pragma once

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbrescore/corpus/types.hpp"
#include "nbrescore/eval/metrics.hpp"
#include "nbrescore/nnet/scoring.hpp"

namespace nbrescore::eval {

// A named rescoring system under evaluation.
struct System {
  std::string name;
  const nnet::ScorerModel* model = nullptr;
  nnet::Variant variant = nnet::Variant::Baseline;
};

struct SystemResult {
  std::string name;
  nnet::Variant variant = nnet::Variant::Baseline;
  WerStats stats;
  nnet::InputCounters counters;
  std::optional<double> werr;  // vs the named baseline system
};

struct SplitReport {
  std::string split;
  WerStats first_pass;
  WerStats oracle;
  std::vector<SystemResult> systems;
};

struct EvalReport {
  std::string baseline_name;
  std::vector<SplitReport> splits;
};

struct EvalOptions {
  double alpha = 20.0;
  double beta = 1.0;
  std::size_t threads = 1;
};

inline SplitReport evaluate_split(const std::string& split, const corpus::Dataset& data,
                                  const corpus::CatalogMap& catalogs,
                                  const std::vector<System>& systems,
                                  const textproc::PromptTemplate& prompt,
                                  const std::string& baseline_name, const EvalOptions& opts) {
  SplitReport rep;
  rep.split = split;
  rep.first_pass = corpus_wer(data, SelectionMode::FirstPass);
  rep.oracle = corpus_wer(data, SelectionMode::Oracle);
  for (const auto& sys : systems) {
    const auto prepared = nnet::prepare_dataset(sys.variant, data, catalogs, prompt,
                                                sys.model->config().max_positions);
    const auto fused = nnet::fused_scores(*sys.model, prepared, opts.alpha, opts.beta, opts.threads);
    rep.systems.push_back({sys.name, sys.variant, corpus_wer(data, SelectionMode::Rescored, &fused),
                           prepared.counters, std::nullopt});
  }
  const SystemResult* base = nullptr;
  for (const auto& r : rep.systems) {
    if (r.name == baseline_name) base = &r;
  }
  if (base && base->stats.errors > 0) {
    const double b = base->stats.wer();
    for (auto& r : rep.systems) r.werr = werr(r.stats.wer(), b);
  }
  return rep;
}

// Oracle WER must not exceed first-pass or any rescored WER.
inline bool oracle_dominates(const SplitReport& rep) {
  if (rep.oracle.errors > rep.first_pass.errors) return false;
  for (const auto& s : rep.systems) {
    if (rep.oracle.errors > s.stats.errors) return false;
  }
  return true;
}

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", fraction * 100.0);
  return buf;
}

inline std::string format_wer(double wer) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", wer * 100.0);
  return buf;
}

inline void print_report(std::ostream& os, const EvalReport& rep) {
  for (const auto& s : rep.splits) {
    char line[256];
    os << "split " << s.split << " (" << s.first_pass.utterances << " utterances, "
       << s.first_pass.reference_words << " reference words)\n";
    std::snprintf(line, sizeof line, "  %-24s %10s %10s %10s\n", "system", "WER", "WERR", "macro");
    os << line;
    auto row = [&](const std::string& name, const WerStats& st, const std::string& werr) {
      std::snprintf(line, sizeof line, "  %-24s %10s %10s %10s\n", name.c_str(),
                    format_wer(st.wer()).c_str(), werr.c_str(), format_wer(st.macro_wer()).c_str());
      os << line;
    };
    row("first-pass", s.first_pass, "-");
    row("oracle", s.oracle, "-");
    for (const auto& r : s.systems) row(r.name, r.stats, r.werr ? format_percent(*r.werr) : "-");
  }
  if (!rep.baseline_name.empty()) os << "WERR relative to " << rep.baseline_name << "\n";
}

// One JSON object per (system, split), plus first-pass and oracle rows.
inline std::vector<nlohmann::ordered_json> report_rows(const EvalReport& rep) {
  std::vector<nlohmann::ordered_json> rows;
  for (const auto& s : rep.splits) {
    auto base = [&](const std::string& system, const WerStats& st) {
      nlohmann::ordered_json j;
      j["system"] = system;
      j["split"] = s.split;
      j["errors"] = st.errors;
      j["reference_words"] = st.reference_words;
      j["wer"] = st.wer();
      j["macro_wer"] = st.macro_wer();
      return j;
    };
    rows.push_back(base("first_pass", s.first_pass));
    rows.push_back(base("oracle", s.oracle));
    for (const auto& r : s.systems) {
      auto j = base(r.name, r.stats);
      j["variant"] = std::string(nnet::to_string(r.variant));
      j["werr"] = r.werr ? nlohmann::ordered_json(*r.werr) : nlohmann::ordered_json(nullptr);
      j["baseline"] = rep.baseline_name;
      j["matched_hypotheses"] = r.counters.matched;
      j["truncated_prompts"] = r.counters.truncated;
      rows.push_back(std::move(j));
    }
  }
  return rows;
}

}  // namespace nbrescore::eval
