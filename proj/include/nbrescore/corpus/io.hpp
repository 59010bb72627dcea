#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/corpus/vocabulary.hpp"
#include "nbrescore/eval/edit_distance.hpp"
#include "nbrescore/textproc/tokenize.hpp"

namespace nbrescore::corpus {

// Counters collected while reading data files.
struct LoadStats {
  std::size_t records = 0;
  std::size_t unknown_tokens = 0;  // surfaces mapped to [UNK]
};

namespace detail {

inline TokenSeq read_tokens(const std::string& text, const Vocabulary& vocab, LoadStats& stats) {
  TokenSeq out;
  for (const auto& w : textproc::split_words(text)) {
    const auto id = vocab.find(w);
    if (!id) ++stats.unknown_tokens;
    out.push_back(id.value_or(kUnkId));
  }
  return out;
}

[[noreturn]] inline void malformed(std::size_t line, const std::string& why = {}) {
  throw FormatError("line " + std::to_string(line) + ": malformed record" +
                    (why.empty() ? std::string() : " (" + why + ")"));
}

template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      malformed(lineno);
    }
    if (!j.is_object()) malformed(lineno);
    try {
      fn(j, lineno);
    } catch (const nlohmann::json::exception& e) {
      malformed(lineno, e.what());
    }
  }
}

}  // namespace detail

/// nbest.jsonl: one object per line with utterance_id, reference (text),
/// is_personalized, and hypotheses [{text, first_pass_score}].
inline void save_dataset(const Dataset& data, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& u : data) {
    nlohmann::ordered_json j;
    j["utterance_id"] = u.utterance_id;
    j["reference"] = textproc::detokenize(u.reference, vocab);
    j["is_personalized"] = u.is_personalized;
    auto hyps = nlohmann::ordered_json::array();
    for (const auto& h : u.hypotheses) {
      nlohmann::ordered_json hj;
      hj["text"] = textproc::detokenize(h.tokens, vocab);
      hj["first_pass_score"] = h.first_pass_score;
      hyps.push_back(std::move(hj));
    }
    j["hypotheses"] = std::move(hyps);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

// Edit distances are recomputed against the reference on load.
inline Dataset load_dataset(const std::string& path, const Vocabulary& vocab,
                            LoadStats* stats = nullptr) {
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  Dataset data;
  std::set<std::string> ids;
  detail::for_each_record(path, [&](const nlohmann::json& j, std::size_t lineno) {
    NBestList u;
    u.utterance_id = j.at("utterance_id").get<std::string>();
    u.reference = detail::read_tokens(j.at("reference").get<std::string>(), vocab, st);
    u.is_personalized = j.at("is_personalized").get<bool>();
    const auto& hyps = j.at("hypotheses");
    if (u.utterance_id.empty() || !hyps.is_array() || hyps.empty()) detail::malformed(lineno);
    for (const auto& hj : hyps) {
      Hypothesis h;
      h.tokens = detail::read_tokens(hj.at("text").get<std::string>(), vocab, st);
      h.first_pass_score = hj.at("first_pass_score").get<double>();
      if (h.tokens.empty() || !std::isfinite(h.first_pass_score)) detail::malformed(lineno);
      h.edit_distance = eval::edit_distance(h.tokens, u.reference);
      u.hypotheses.push_back(std::move(h));
    }
    if (!ids.insert(u.utterance_id).second) {
      throw FormatError("line " + std::to_string(lineno) + ": duplicate utterance_id " +
                        u.utterance_id);
    }
    ++st.records;
    data.push_back(std::move(u));
  });
  return data;
}

/// catalog.jsonl: one object per line with utterance_id and entities
/// (array of entity strings). Catalogs are written in the given order.
inline void save_catalogs(const std::vector<const EntityCatalog*>& catalogs,
                          const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto* c : catalogs) {
    nlohmann::ordered_json j;
    j["utterance_id"] = c->utterance_id;
    auto ents = nlohmann::ordered_json::array();
    for (const auto& e : c->entities) ents.push_back(textproc::detokenize(e, vocab));
    j["entities"] = std::move(ents);
    out << j.dump() << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

inline CatalogMap load_catalogs(const std::string& path, const Vocabulary& vocab,
                                LoadStats* stats = nullptr, std::size_t cap = kDefaultCatalogCap) {
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  CatalogMap out;
  detail::for_each_record(path, [&](const nlohmann::json& j, std::size_t lineno) {
    EntityCatalog c;
    c.utterance_id = j.at("utterance_id").get<std::string>();
    const auto& ents = j.at("entities");
    if (c.utterance_id.empty() || !ents.is_array()) detail::malformed(lineno);
    for (const auto& e : ents) {
      c.entities.push_back(detail::read_tokens(e.get<std::string>(), vocab, st));
    }
    try {
      validate_catalog(c, cap);
    } catch (const std::invalid_argument& e) {
      detail::malformed(lineno, e.what());
    }
    if (out.contains(c.utterance_id)) {
      throw FormatError("line " + std::to_string(lineno) + ": duplicate utterance_id " +
                        c.utterance_id);
    }
    ++st.records;
    out.emplace(c.utterance_id, std::move(c));
  });
  return out;
}

}  // namespace nbrescore::corpus
