#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nbrescore/common.hpp"
#include "nbrescore/rng.hpp"
#include "nbrescore/textproc/phonetic.hpp"
#include "nbrescore/textproc/tokenize.hpp"

namespace nbrescore::corpus {

// Alternative spellings of one name; spellings[0] is the common form, the
// rest are rare forms that the simulated n-gram model treats as OOV.
struct NameGroup {
  std::vector<std::string> spellings;
};

inline constexpr std::string_view kEntitySlot = "<entity>";

/// Word lists driving synthetic corpus generation.
///
/// Templates may contain alternations written as {a|b|c}; personalized
/// templates contain the <entity> placeholder exactly once.
class Lexicon {
 public:
  Lexicon(std::vector<NameGroup> first_names, std::vector<NameGroup> last_names,
          std::vector<std::string> personalized_templates,
          std::vector<std::string> general_templates)
      : first_names_(std::move(first_names)),
        last_names_(std::move(last_names)),
        personalized_templates_(std::move(personalized_templates)),
        general_templates_(std::move(general_templates)) {
    index();
  }

  static Lexicon builtin();

  const std::vector<NameGroup>& first_names() const { return first_names_; }
  const std::vector<NameGroup>& last_names() const { return last_names_; }
  const std::vector<std::string>& personalized_templates() const {
    return personalized_templates_;
  }
  const std::vector<std::string>& general_templates() const { return general_templates_; }

  // Non-name words that can replace a token in a confusion error.
  const std::vector<std::string>& confusion_words() const { return confusion_words_; }

  // Other spellings sharing a name group with `surface` (empty if none).
  std::vector<std::string> homophones(std::string_view surface) const {
    const auto it = homophones_.find(surface);
    return it == homophones_.end() ? std::vector<std::string>{} : it->second;
  }

  bool is_rare_spelling(std::string_view surface) const { return rare_.contains(surface); }

  // Every word the lexicon can emit.
  std::set<std::string> all_words() const {
    std::set<std::string> words(confusion_words_.begin(), confusion_words_.end());
    for (const auto* groups : {&first_names_, &last_names_}) {
      for (const auto& g : *groups) words.insert(g.spellings.begin(), g.spellings.end());
    }
    return words;
  }

  // Throws ValidationError on templates without/with the entity slot, empty
  // groups, names shared between groups, or spellings whose phonetic keys
  // disagree within a group.
  void validate() const {
    if (personalized_templates_.empty() || general_templates_.empty()) {
      throw ValidationError("carrier-phrase templates must be non-empty");
    }
    for (const auto& t : personalized_templates_) {
      if (count_slots(t) != 1) {
        throw ValidationError("personalized template needs exactly one <entity>: " + t);
      }
    }
    for (const auto& t : general_templates_) {
      if (count_slots(t) != 0) throw ValidationError("general template has <entity>: " + t);
    }
    std::set<std::string> seen;
    for (const auto* groups : {&first_names_, &last_names_}) {
      if (groups->empty()) throw ValidationError("name lexicon is empty");
      for (const auto& g : *groups) {
        if (g.spellings.empty()) throw ValidationError("empty name group");
        const std::string key = textproc::phonetic_key(g.spellings.front());
        for (const auto& s : g.spellings) {
          if (!seen.insert(s).second) throw ValidationError("name listed twice: " + s);
          if (textproc::phonetic_key(s) != key) {
            throw ValidationError("homophone group mixes phonetic keys: " + s + " vs " +
                                  g.spellings.front());
          }
        }
      }
    }
    if (std::none_of(first_names_.begin(), first_names_.end(),
                     [](const NameGroup& g) { return g.spellings.size() > 1; })) {
      throw ValidationError("first-name lexicon needs at least one homophone group");
    }
  }

 private:
  static std::size_t count_slots(const std::string& t) {
    std::size_t n = 0;
    for (auto pos = t.find(kEntitySlot); pos != std::string::npos;
         pos = t.find(kEntitySlot, pos + 1)) {
      ++n;
    }
    return n;
  }

  void index() {
    for (const auto* groups : {&first_names_, &last_names_}) {
      for (const auto& g : *groups) {
        for (std::size_t i = 0; i < g.spellings.size(); ++i) {
          if (g.spellings.size() > 1) {
            auto& others = homophones_[g.spellings[i]];
            for (const auto& s : g.spellings) {
              if (s != g.spellings[i]) others.push_back(s);
            }
          }
          if (i > 0) rare_.insert(g.spellings[i]);
        }
      }
    }
    std::set<std::string> words;
    for (const auto* templates : {&general_templates_, &personalized_templates_}) {
      for (const auto& t : *templates) {
        std::string flat;
        for (char c : t) flat += (c == '{' || c == '}' || c == '|') ? ' ' : c;
        for (const auto& w : textproc::split_words(flat)) {
          if (w != kEntitySlot) words.insert(w);
        }
      }
    }
    confusion_words_.assign(words.begin(), words.end());
  }

  std::vector<NameGroup> first_names_;
  std::vector<NameGroup> last_names_;
  std::vector<std::string> personalized_templates_;
  std::vector<std::string> general_templates_;
  std::vector<std::string> confusion_words_;
  std::map<std::string, std::vector<std::string>, std::less<>> homophones_;
  std::set<std::string, std::less<>> rare_;
};

// Expands {a|b|c} alternations with uniform choices and splits into words.
inline std::vector<std::string> expand_template(std::string_view tmpl, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] != '{') {
      out += tmpl[i++];
      continue;
    }
    const auto close = tmpl.find('}', i);
    if (close == std::string_view::npos) {
      throw ValidationError("unbalanced '{' in template: " + std::string(tmpl));
    }
    std::vector<std::string_view> options;
    std::size_t start = i + 1;
    for (std::size_t j = start; j <= close; ++j) {
      if (j == close || tmpl[j] == '|') {
        options.push_back(tmpl.substr(start, j - start));
        start = j + 1;
      }
    }
    out += options[rng.index(options.size())];
    i = close + 1;
  }
  return textproc::split_words(out);
}

inline Lexicon Lexicon::builtin() {
  auto groups = [](std::initializer_list<std::initializer_list<const char*>> gs) {
    std::vector<NameGroup> out;
    for (const auto& g : gs) {
      NameGroup ng;
      for (const char* s : g) ng.spellings.emplace_back(s);
      out.push_back(std::move(ng));
    }
    return out;
  };
  return Lexicon(
      groups({{"john", "jon"},           {"sean", "shaun", "shawn"}, {"katherine", "kathryn"},
              {"steven", "stephen"},     {"jeffrey", "jeffery"},     {"brian", "bryan"},
              {"matthew", "mathew"},     {"sarah", "sara"},          {"anne", "ann"},
              {"aaron", "aron"},         {"alan", "allan", "allen"}, {"eric", "erik"},
              {"mark", "marc"},          {"phillip", "philip"},      {"rachel", "rachael"},
              {"nicole", "nichole"},     {"teresa", "theresa"},      {"lindsey", "lindsay"},
              {"megan", "meghan"},       {"caitlin", "caitlyn"},     {"zack", "zach"},
              {"david"},                 {"maria"},                  {"james"},
              {"laura"},                 {"kevin"}}),
      groups({{"smith", "smyth"},        {"reed", "reid"},       {"gray", "grey"},
              {"peterson", "petersen"},  {"johnson", "jonson"},  {"clark", "clarke"},
              {"meyer", "meier", "myer"}, {"stewart", "stuart"}, {"cohen", "cohn"},
              {"fisher", "fischer"},     {"hansen", "hanson"},   {"lee", "li"},
              {"doe"},                   {"garcia"},             {"patel"},
              {"nguyen"},                {"kim"},                {"baker"},
              {"lopez"},                 {"turner"},             {"walsh"},
              {"becker"},                {"morgan"},             {"rivera"},
              {"foster"}}),
      {"call <entity>",
       "call <entity> {on mobile|at home|at work}",
       "make a phone call to <entity>",
       "dial <entity>",
       "video call <entity>",
       "send a message to <entity>",
       "text <entity> {i am running late|i am on my way|see you soon}",
       "message <entity> saying {hello|thank you|good night}",
       "{remind me to|i need to} call <entity> {today|tomorrow|tonight}",
       "send an email to <entity>",
       "start a video chat with <entity>"},
      {"play {some|the latest|my} {jazz|rock|pop|classical|country|blues} {music|songs|playlist}",
       "what is the weather {today|tomorrow|this weekend} in "
       "{boston|seattle|denver|chicago|austin|miami}",
       "set a timer for {five|ten|fifteen|twenty|thirty} minutes",
       "set an alarm for {six|seven|eight|nine} {am|pm}",
       "turn {on|off} the {kitchen|bedroom|living room|office|porch} lights",
       "add {milk|eggs|bread|coffee|apples|butter} to my shopping list",
       "remind me to contact the {bank|dentist|plumber|school|landlord} "
       "{today|tomorrow|on monday}",
       "i need to {buy|order|pick up} {milk|eggs|bread|coffee|batteries} "
       "{today|tonight|tomorrow}",
       "how long does it take to get to {work|the airport|the station|downtown}",
       "play {jazz|rock|pop} and {blues|country|classical} music",
       "as soon as i get home turn on the {heater|fan|lights}",
       "what time is it in {london|tokyo|paris|sydney}",
       "tell me a {joke|story|fun fact}",
       "how do i {cook|bake|make} {rice|pasta|bread|pancakes}",
       "what is on my calendar {today|tomorrow|this week}",
       "read me the {news|headlines|sports scores}"});
}

// Name groups file: one group per line, spellings separated by whitespace,
// common spelling first. Blank lines and '#' comments are skipped.
inline std::vector<NameGroup> load_name_groups(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read name list " + path);
  std::vector<NameGroup> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto words = textproc::split_words(line);
    if (!words.empty()) out.push_back({std::move(words)});
  }
  return out;
}

// Template file: one template per line.
inline std::vector<std::string> load_templates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read template list " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) out.push_back(line);
  }
  return out;
}

}  // namespace nbrescore::corpus
