#include "emoreact/lexicon.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <string>

namespace emoreact {
namespace {

std::string lower(std::string s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

EmotionVector row(std::initializer_list<Emotion> on) {
  EmotionVector v = EmotionVector::Zero();
  for (Emotion e : on) v[static_cast<int>(e)] = 1.0;
  return v;
}

// Negated emotions for each unit emotion.
const std::array<EmotionVector, k_num_emotions>& negation_table() {
  using E = Emotion;
  static const std::array<EmotionVector, k_num_emotions> table = {
      row({E::joy}),                                        // anger
      row({E::joy, E::surprise}),                           // anticipation
      row({E::joy, E::trust}),                              // disgust
      row({E::joy, E::trust}),                              // fear
      row({E::anger, E::disgust, E::fear, E::sadness}),     // joy
      row({E::fear}),                                       // sadness
      row({E::anticipation, E::trust}),                     // surprise
      row({E::disgust, E::surprise}),                       // trust
  };
  return table;
}

}  // namespace

std::optional<Emotion> parse_emotion(std::string_view name) {
  for (int i = 0; i < k_num_emotions; ++i) {
    if (k_emotion_names[static_cast<std::size_t>(i)] == name) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

EmotionVector unit_emotion(Emotion e) { return row({e}); }

void Lexicon::insert(std::string word, const EmotionVector& emotions, Origin origin) {
  if ((emotions.array() == 0.0).all()) return;
  entries_.insert_or_assign(lower(std::move(word)), Entry{emotions, origin});
}

const Lexicon::Entry* Lexicon::entry(std::string_view word) const {
  const auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

const EmotionVector* Lexicon::find(std::string_view word) const {
  const Entry* e = entry(word);
  return e == nullptr ? nullptr : &e->emotions;
}

std::size_t Lexicon::count(Origin origin) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [origin](const auto& kv) { return kv.second.origin == origin; }));
}

Lexicon parse_emolex(std::istream& in, EmolexReport* report) {
  std::unordered_map<std::string, EmotionVector> rows;
  std::vector<std::string> order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw LexiconError("EmoLex line " + std::to_string(line_no) + ": expected word<TAB>emotion<TAB>flag");
    }
    const std::string word = lower(trim(line.substr(0, t1)));
    const std::string label = lower(trim(line.substr(t1 + 1, t2 - t1 - 1)));
    const std::string flag = trim(line.substr(t2 + 1));
    if (flag != "0" && flag != "1") {
      throw LexiconError("EmoLex line " + std::to_string(line_no) + ": flag must be 0 or 1, got '" + flag + "'");
    }
    auto [it, inserted] = rows.try_emplace(word, EmotionVector::Zero());
    if (inserted) order.push_back(word);
    if (label == "positive" || label == "negative") continue;
    const auto emotion = parse_emotion(label);
    if (!emotion) {
      throw LexiconError("EmoLex line " + std::to_string(line_no) + ": unknown emotion label '" + label + "'");
    }
    if (flag == "1") it->second[static_cast<int>(*emotion)] = 1.0;
  }

  Lexicon lex;
  EmolexReport local;
  for (const auto& word : order) {
    const EmotionVector& v = rows.at(word);
    ++local.words_seen;
    if ((v.array() == 0.0).all()) {
      ++local.dropped_without_emotion;
      continue;
    }
    lex.insert(word, v, Lexicon::Origin::original);
  }
  if (report != nullptr) *report = local;
  return lex;
}

Lexicon load_emolex(const std::filesystem::path& path, EmolexReport* report) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open EmoLex file " + path.string());
  return parse_emolex(in, report);
}

SynonymTable parse_synonyms(std::istream& in) {
  SynonymTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw LexiconError("synonym line " + std::to_string(line_no) + ": expected word<TAB>synonym");
    }
    std::string word = lower(trim(line.substr(0, tab)));
    std::string syn = lower(trim(line.substr(tab + 1)));
    if (word.empty() || syn.empty() || word == syn) continue;
    table[std::move(word)].insert(std::move(syn));
  }
  return table;
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open synonym file " + path.string());
  return parse_synonyms(in);
}

Lexicon expand_with_synonyms(const Lexicon& lexicon, const SynonymTable& synonyms) {
  std::unordered_map<std::string, EmotionVector> added;
  for (const auto& [word, syns] : synonyms) {
    const EmotionVector* source = lexicon.find(word);
    if (source == nullptr) continue;
    for (const auto& syn : syns) {
      if (lexicon.contains(syn)) continue;
      auto [it, inserted] = added.try_emplace(syn, *source);
      if (!inserted) it->second = it->second.cwiseMax(*source);
    }
  }
  Lexicon out = lexicon;
  for (auto& [word, v] : added) out.insert(word, v, Lexicon::Origin::synonym);
  return out;
}

const EmotionVector& negation_row(Emotion e) { return negation_table()[static_cast<std::size_t>(e)]; }

EmotionVector negate_emotions(const EmotionVector& emotions) {
  EmotionVector out = EmotionVector::Zero();
  for (int i = 0; i < k_num_emotions; ++i) {
    if (emotions[i] != 0.0) out = out.cwiseMax(negation_row(static_cast<Emotion>(i)));
  }
  return out;
}

std::optional<EmotionVector> negated_lookup(const Lexicon& lexicon, std::string_view word) {
  const std::string w(word);
  for (auto prefix : k_negation_prefixes) {
    if (const EmotionVector* v = lexicon.find(std::string(prefix) + w)) return *v;
  }
  for (auto suffix : k_negation_suffixes) {
    if (const EmotionVector* v = lexicon.find(w + std::string(suffix))) return *v;
  }
  if (const EmotionVector* v = lexicon.find(w)) return negate_emotions(*v);
  return std::nullopt;
}

}  // namespace emoreact
