#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/corpus/first_pass.hpp"
#include "nbrescore/corpus/lexicon.hpp"
#include "nbrescore/corpus/types.hpp"
#include "nbrescore/corpus/vocabulary.hpp"
#include "nbrescore/eval/edit_distance.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/textproc/phonetic.hpp"
#include "nbrescore/textproc/tokenize.hpp"

namespace nbrescore::corpus {

struct GeneratorConfig {
  std::uint64_t seed = 1;
  std::size_t train_personalized = 2000;
  std::size_t train_general = 2000;
  std::size_t valid_personalized = 300;
  std::size_t test_personalized = 500;
  std::size_t test_general = 500;
  std::size_t catalog_size = 20;  // entities per utterance, true entity included
  std::size_t catalog_cap = kDefaultCatalogCap;
  std::size_t vocab_size = 2048;
  FirstPassSimConfig first_pass;

  void validate() const {
    first_pass.validate();
    if (catalog_size < 2) throw ValidationError("catalog_size must be at least 2");
    if (catalog_size > catalog_cap) throw ValidationError("catalog_size exceeds catalog_cap");
    if (vocab_size < 8) throw ValidationError("vocab_size must be at least 8");
  }
};

struct GeneratedCorpus {
  Vocabulary vocab;
  Dataset train;  // personalized and general utterances
  Dataset valid;  // personalized only
  Dataset test_personalized;
  Dataset test_general;
  CatalogMap catalogs;  // one per utterance across all splits
};

namespace detail {

using Words = std::vector<std::string>;

struct RawUtterance {
  std::string id;
  Words reference;
  std::vector<SimulatedHypothesis> hypotheses;
  std::vector<Words> catalog;
  bool personalized = false;
};

struct EntityPool {
  std::vector<Words> entities;
  std::vector<std::string> keys;  // phonetic key of the whole entity
  std::vector<std::size_t> personalizable;  // first name has homophones
};

inline std::string entity_key(const Words& e) {
  std::string key;
  for (const auto& w : e) key += textproc::phonetic_key(w) + ' ';
  return key;
}

inline EntityPool build_pool(const Lexicon& lexicon) {
  EntityPool pool;
  for (const auto& fg : lexicon.first_names()) {
    for (const auto& first : fg.spellings) {
      for (const auto& lg : lexicon.last_names()) {
        for (const auto& last : lg.spellings) {
          if (fg.spellings.size() > 1) pool.personalizable.push_back(pool.entities.size());
          pool.entities.push_back({first, last});
          pool.keys.push_back(entity_key(pool.entities.back()));
        }
      }
    }
  }
  return pool;
}

// Shares at least one word's phonetic key with `truth` in the same slot but
// is not a full homophone of it.
inline bool is_partial_homophone(const Words& candidate, const Words& truth) {
  if (candidate.size() != truth.size()) return false;
  bool any = false;
  bool all = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool same = textproc::phonetic_key(candidate[i]) == textproc::phonetic_key(truth[i]);
    any = any || (same && candidate[i] != truth[i]);
    all = all && same;
  }
  return any && !all;
}

inline std::vector<Words> sample_catalog(const EntityPool& pool, const Words* truth,
                                         std::size_t size, Rng& rng) {
  std::vector<Words> catalog;
  std::vector<std::size_t> eligible;
  const std::string truth_key = truth ? entity_key(*truth) : std::string();
  std::vector<std::size_t> partial;
  for (std::size_t i = 0; i < pool.entities.size(); ++i) {
    if (truth && pool.keys[i] == truth_key) continue;  // truth and its full homophones
    eligible.push_back(i);
    if (truth && is_partial_homophone(pool.entities[i], *truth)) partial.push_back(i);
  }
  const std::size_t distractors = truth ? size - 1 : size;
  if (eligible.size() < distractors) {
    throw ValidationError("entity pool smaller than requested distractor count");
  }
  std::set<std::size_t> chosen;
  if (truth) {
    catalog.push_back(*truth);
    if (partial.empty()) {
      throw ValidationError("entity pool has no homophone distractor for " + truth_key);
    }
    chosen.insert(partial[rng.index(partial.size())]);
  }
  // Partial Fisher-Yates over the eligible indices.
  for (std::size_t k = 0; chosen.size() < distractors; ++k) {
    std::swap(eligible[k], eligible[k + rng.index(eligible.size() - k)]);
    chosen.insert(eligible[k]);
  }
  for (std::size_t i : chosen) catalog.push_back(pool.entities[i]);
  rng.shuffle(catalog);
  return catalog;
}

inline Words fill_entity(const std::string& tmpl, const Words& entity, Rng& rng) {
  Words out;
  for (auto& w : expand_template(tmpl, rng)) {
    if (w == kEntitySlot) {
      out.insert(out.end(), entity.begin(), entity.end());
    } else {
      out.push_back(std::move(w));
    }
  }
  return out;
}

inline RawUtterance make_utterance(const std::string& id, bool personalized,
                                   const GeneratorConfig& cfg, const Lexicon& lexicon,
                                   const EntityPool& pool, Rng& rng) {
  RawUtterance u;
  u.id = id;
  u.personalized = personalized;
  if (personalized) {
    const Words truth = pool.entities[pool.personalizable[rng.index(pool.personalizable.size())]];
    const auto& templates = lexicon.personalized_templates();
    u.reference = fill_entity(templates[rng.index(templates.size())], truth, rng);
    u.catalog = sample_catalog(pool, &truth, cfg.catalog_size, rng);
  } else {
    const auto& templates = lexicon.general_templates();
    u.reference = expand_template(templates[rng.index(templates.size())], rng);
    u.catalog = sample_catalog(pool, nullptr, cfg.catalog_size, rng);
  }
  Rng first_pass_rng(derive_seed(rng.next(), {cfg.first_pass.seed}));
  u.hypotheses = simulate_first_pass(u.reference, cfg.first_pass, lexicon, first_pass_rng);
  return u;
}

}  // namespace detail

/// Generates the four splits and their per-utterance catalogs.
///
/// Personalized references embed the utterance's true entity; its catalog
/// holds the true entity, at least one partial homophone distractor (a name
/// sharing one word's pronunciation but not the whole entity), and random
/// distractors. Every utterance draws from its own seed stream, so output is
/// a pure function of (config, lexicon, extra_surfaces).
inline GeneratedCorpus generate_corpus(const GeneratorConfig& cfg, const Lexicon& lexicon,
                                       const std::vector<std::string>& extra_surfaces = {}) {
  cfg.validate();
  lexicon.validate();
  const auto pool = detail::build_pool(lexicon);
  if (pool.entities.size() < cfg.catalog_size) {
    throw ValidationError("entity pool smaller than requested distractor count");
  }

  struct SplitSpec {
    std::string name;
    std::size_t personalized;
    std::size_t general;
  };
  const std::vector<SplitSpec> splits{{"train", cfg.train_personalized, cfg.train_general},
                                      {"valid", cfg.valid_personalized, 0},
                                      {"test_personalized", cfg.test_personalized, 0},
                                      {"test_general", 0, cfg.test_general}};

  std::vector<std::vector<detail::RawUtterance>> raw(splits.size());
  std::map<std::string, std::size_t> counts;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (int kind = 0; kind < 2; ++kind) {
      const bool personalized = kind == 0;
      const std::size_t n = personalized ? splits[s].personalized : splits[s].general;
      for (std::size_t i = 0; i < n; ++i) {
        char id[96];
        std::snprintf(id, sizeof id, "%s-%c-%06zu", splits[s].name.c_str(),
                      personalized ? 'p' : 'g', i);
        Rng rng(derive_seed(cfg.seed, {s, static_cast<std::uint64_t>(kind), i}));
        auto u = detail::make_utterance(id, personalized, cfg, lexicon, pool, rng);
        for (const auto& w : u.reference) ++counts[w];
        for (const auto& h : u.hypotheses) {
          for (const auto& w : h.words) ++counts[w];
        }
        for (const auto& e : u.catalog) {
          for (const auto& w : e) ++counts[w];
        }
        raw[s].push_back(std::move(u));
      }
    }
  }
  for (const auto& w : lexicon.all_words()) ++counts[w];
  for (const auto& text : extra_surfaces) {
    for (const auto& w : textproc::split_words(text)) ++counts[w];
  }

  GeneratedCorpus out{build_vocabulary(counts, cfg.vocab_size), {}, {}, {}, {}, {}};
  std::vector<Dataset*> targets{&out.train, &out.valid, &out.test_personalized,
                                &out.test_general};
  for (std::size_t s = 0; s < splits.size(); ++s) {
    for (const auto& u : raw[s]) {
      NBestList nb;
      nb.utterance_id = u.id;
      nb.reference = textproc::to_ids(u.reference, out.vocab);
      nb.is_personalized = u.personalized;
      for (const auto& h : u.hypotheses) {
        Hypothesis hyp;
        hyp.tokens = textproc::to_ids(h.words, out.vocab);
        hyp.first_pass_score = h.first_pass_score;
        hyp.edit_distance = eval::edit_distance(hyp.tokens, nb.reference);
        nb.hypotheses.push_back(std::move(hyp));
      }
      EntityCatalog catalog{u.id, {}};
      // A capped vocabulary can map distinct names onto the same ids; keep the first.
      std::set<TokenSeq> seen;
      for (const auto& e : u.catalog) {
        auto ids = textproc::to_ids(e, out.vocab);
        if (seen.insert(ids).second) catalog.entities.push_back(std::move(ids));
      }
      validate_catalog(catalog, cfg.catalog_cap);
      out.catalogs.emplace(u.id, std::move(catalog));
      targets[s]->push_back(std::move(nb));
    }
  }
  return out;
}

}  // namespace nbrescore::corpus
