#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/generator.hpp"
#include "nbrescore/nnet/model.hpp"
#include "nbrescore/nnet/scoring.hpp"
#include "nbrescore/textproc/augment.hpp"
#include "nbrescore/training/trainer.hpp"

namespace nbrescore::cli {

// Everything one run needs, filled from a flat `key = value` file.
struct RunConfig {
  std::uint64_t seed = 1;
  corpus::GeneratorConfig generator;
  std::string model_preset = "desk";
  nnet::ModelConfig model = nnet::ModelConfig::desk(2048);
  training::TrainConfig train;
  std::string prompt_prefix{textproc::kDefaultPromptPrefix};
  std::string prompt_joiner{textproc::kDefaultPromptJoiner};
  std::string data_dir;
  // Word-list overrides for the generator; empty means the built-in lists.
  std::string first_names_file;
  std::string last_names_file;
  std::string personalized_templates_file;
  std::string general_templates_file;
  std::string variant = "baseline";
  std::string regime = "trained";
  std::vector<std::string> variants{"early", "prompt", "xattn"};
  std::vector<double> fractions{0.01, 0.1, 0.5, 1.0};

  // Pushes the shared seed into the sub-configs and checks every section.
  void finalize() {
    generator.seed = seed;
    generator.first_pass.seed = seed;
    train.seed = seed;
    generator.validate();
    model.validate();
    train.validate();
    nnet::parse_variant(variant);
    training::parse_regime(regime);
    for (const auto& v : variants) nnet::parse_variant(v);
    for (double f : fractions) {
      if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("fractions out of range");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw ValidationError("invalid value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(text.substr(start, comma == std::string_view::npos ? text.npos
                                                                               : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Member>
Field number(std::string_view key, Member member) {
  return {key,
          [key, member](RunConfig& c, std::string_view v) {
            std::invoke(member, c) = parse_number<T>(key, v);
          },
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format_number(std::invoke(member, c));
            } else {
              return std::to_string(std::invoke(member, c));
            }
          }};
}

template <typename Member>
Field text(std::string_view key, Member member) {
  return {key, [member](RunConfig& c, std::string_view v) { std::invoke(member, c) = std::string(v); },
          [member](const RunConfig& c) { return std::invoke(member, c); }};
}

#define NBR_FIELD(T, key, expr) \
  number<T>(key, [](auto& c) -> auto& { return c.expr; })
#define NBR_TEXT(key, expr) text(key, [](auto& c) -> auto& { return c.expr; })

inline const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f{
        NBR_FIELD(std::uint64_t, "seed", seed),
        NBR_TEXT("data_dir", data_dir),
        // corpus
        NBR_FIELD(std::size_t, "train_personalized", generator.train_personalized),
        NBR_FIELD(std::size_t, "train_general", generator.train_general),
        NBR_FIELD(std::size_t, "valid_personalized", generator.valid_personalized),
        NBR_FIELD(std::size_t, "test_personalized", generator.test_personalized),
        NBR_FIELD(std::size_t, "test_general", generator.test_general),
        NBR_FIELD(std::size_t, "catalog_size", generator.catalog_size),
        NBR_FIELD(std::size_t, "catalog_cap", generator.catalog_cap),
        NBR_FIELD(std::size_t, "vocab_size", generator.vocab_size),
        NBR_FIELD(double, "gamma", generator.first_pass.gamma),
        NBR_FIELD(double, "epsilon_sf", generator.first_pass.epsilon_sf),
        NBR_FIELD(double, "length_penalty", generator.first_pass.length_penalty),
        NBR_FIELD(double, "confusion_rate", generator.first_pass.confusion_rate),
        NBR_FIELD(double, "homophone_rate", generator.first_pass.homophone_rate),
        NBR_FIELD(std::size_t, "n_best_size", generator.first_pass.n_best_size),
        NBR_FIELD(double, "score_noise", generator.first_pass.score_noise),
        NBR_FIELD(double, "reference_rate", generator.first_pass.reference_rate),
        NBR_TEXT("first_names_file", first_names_file),
        NBR_TEXT("last_names_file", last_names_file),
        NBR_TEXT("personalized_templates_file", personalized_templates_file),
        NBR_TEXT("general_templates_file", general_templates_file),
        // model
        {"model",
         [](RunConfig& c, std::string_view v) {
           const auto vocab = c.model.vocab_size;
           if (v == "desk") {
             c.model = nnet::ModelConfig::desk(vocab);
           } else if (v == "tiny") {
             c.model = nnet::ModelConfig::tiny(vocab);
           } else if (v == "big") {
             c.model = nnet::ModelConfig::big(vocab);
           } else {
             throw ValidationError("unknown model preset '" + std::string(v) +
                                   "' (expected desk, tiny, big)");
           }
           c.model_preset = std::string(v);
         },
         [](const RunConfig& c) { return c.model_preset; }},
        NBR_FIELD(std::size_t, "hidden_size", model.hidden_size),
        NBR_FIELD(std::size_t, "num_layers", model.num_layers),
        NBR_FIELD(std::size_t, "num_heads", model.num_heads),
        NBR_FIELD(std::size_t, "intermediate_size", model.intermediate_size),
        NBR_FIELD(double, "dropout", model.dropout),
        NBR_FIELD(std::size_t, "max_positions", model.max_positions),
        // training
        NBR_FIELD(double, "alpha", train.alpha),
        NBR_FIELD(double, "beta", train.beta),
        NBR_FIELD(std::size_t, "batch_size", train.batch_size),
        NBR_FIELD(double, "initial_lr", train.initial_lr),
        NBR_FIELD(double, "lr_decay", train.lr_decay),
        NBR_FIELD(std::size_t, "max_epochs", train.max_epochs),
        NBR_FIELD(std::size_t, "patience", train.patience),
        NBR_FIELD(double, "personalized_fraction", train.personalized_fraction),
        NBR_FIELD(std::size_t, "epoch_size", train.epoch_size),
        {"freeze_mode",
         [](RunConfig& c, std::string_view v) {
           if (v == "none") {
             c.train.freeze_mode = training::FreezeMode::None;
           } else if (v == "all_but_slots") {
             c.train.freeze_mode = training::FreezeMode::AllButSlots;
           } else {
             throw ValidationError("invalid value for freeze_mode: '" + std::string(v) + "'");
           }
         },
         [](const RunConfig& c) {
           return std::string(c.train.freeze_mode == training::FreezeMode::None ? "none"
                                                                                : "all_but_slots");
         }},
        NBR_FIELD(std::size_t, "threads", train.threads),
        // prompt and experiment selection
        NBR_TEXT("prompt.prefix", prompt_prefix),
        NBR_TEXT("prompt.joiner", prompt_joiner),
        NBR_TEXT("variant", variant),
        NBR_TEXT("regime", regime),
        {"variants", [](RunConfig& c, std::string_view v) { c.variants = split_list(v); },
         [](const RunConfig& c) { return join(c.variants); }},
        {"fractions",
         [](RunConfig& c, std::string_view v) {
           c.fractions.clear();
           for (const auto& item : split_list(v)) {
             c.fractions.push_back(parse_number<double>("fractions", item));
           }
         },
         [](const RunConfig& c) {
           std::vector<std::string> items;
           for (double f : c.fractions) items.push_back(format_number(f));
           return join(items);
         }},
    };
    return f;
  }();
  return fields;
}

#undef NBR_FIELD
#undef NBR_TEXT

inline const Field& field(std::string_view key) {
  for (const auto& f : schema()) {
    if (f.key == key) return f;
  }
  throw ValidationError("unknown config key '" + std::string(key) + "'");
}

}  // namespace detail

// Applies one assignment; unknown keys and malformed values are rejected.
inline void set_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  detail::field(key).set(cfg, value);
}

/// Parses `key = value` lines; `#` starts a comment. Later assignments
/// override earlier ones, except that `model` (a preset) is applied before
/// the individual model dimensions regardless of position.
inline RunConfig parse_config(std::istream& in, std::string_view source = "config") {
  RunConfig cfg;
  std::vector<std::pair<std::string, std::string>> assignments;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(std::string(source) + ":" + std::to_string(lineno) +
                            ": expected 'key = value'");
    }
    auto key = detail::trim(std::string_view(body).substr(0, eq));
    auto value = detail::trim(std::string_view(body).substr(eq + 1));
    detail::field(key);
    assignments.emplace_back(std::move(key), std::move(value));
  }
  for (const auto& [k, v] : assignments) {
    if (k == "model") set_value(cfg, k, v);
  }
  for (const auto& [k, v] : assignments) {
    if (k != "model") set_value(cfg, k, v);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  return parse_config(in, path);
}

// Every key in schema order; parse_config(echo) reproduces the config.
inline void write_config(std::ostream& os, const RunConfig& cfg) {
  for (const auto& f : detail::schema()) os << f.key << " = " << f.get(cfg) << "\n";
}

// The built-in lexicon with any configured word-list files swapped in.
inline corpus::Lexicon load_lexicon(const RunConfig& cfg) {
  const auto builtin = corpus::Lexicon::builtin();
  auto names = [](const std::string& path, const std::vector<corpus::NameGroup>& fallback) {
    return path.empty() ? fallback : corpus::load_name_groups(path);
  };
  auto templates = [](const std::string& path, const std::vector<std::string>& fallback) {
    return path.empty() ? fallback : corpus::load_templates(path);
  };
  return corpus::Lexicon(names(cfg.first_names_file, builtin.first_names()),
                         names(cfg.last_names_file, builtin.last_names()),
                         templates(cfg.personalized_templates_file, builtin.personalized_templates()),
                         templates(cfg.general_templates_file, builtin.general_templates()));
}

}  // namespace nbrescore::cli
