#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/Dense>

namespace emoreact {

inline constexpr int k_num_emotions = 8;

/// Weights over (anger, anticipation, disgust, fear, joy, sadness, surprise, trust).
using EmotionVector = Eigen::Matrix<double, k_num_emotions, 1>;

enum class Emotion : std::uint8_t { anger = 0, anticipation, disgust, fear, joy, sadness, surprise, trust };

inline constexpr std::array<std::string_view, k_num_emotions> k_emotion_names = {
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust"};

std::optional<Emotion> parse_emotion(std::string_view name);

/// Unit vector for a single emotion.
EmotionVector unit_emotion(Emotion e);

class LexiconError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Lexicon {
 public:
  enum class Origin : std::uint8_t { original, synonym };

  struct Entry {
    EmotionVector emotions;
    Origin origin = Origin::original;
  };

  /// Adds or replaces an entry. All-zero vectors are ignored and the key is lowercased.
  void insert(std::string word, const EmotionVector& emotions, Origin origin = Origin::original);

  const EmotionVector* find(std::string_view word) const;
  const Entry* entry(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word) != nullptr; }

  std::size_t size() const { return entries_.size(); }
  std::size_t count(Origin origin) const;

  const std::unordered_map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::unordered_map<std::string, Entry> entries_;
};

struct EmolexReport {
  std::size_t words_seen = 0;
  std::size_t dropped_without_emotion = 0;
};

/// Reads the word-level EmoLex layout `word<TAB>emotion<TAB>0|1`. The
/// `positive`/`negative` sentiment rows are accepted and ignored; any other
/// unknown label throws LexiconError.
Lexicon load_emolex(const std::filesystem::path& path, EmolexReport* report = nullptr);
Lexicon parse_emolex(std::istream& in, EmolexReport* report = nullptr);

using SynonymTable = std::unordered_map<std::string, std::unordered_set<std::string>>;

/// Reads `word<TAB>synonym` pairs.
SynonymTable load_synonyms(const std::filesystem::path& path);
SynonymTable parse_synonyms(std::istream& in);

/// Each synonym of an entry word that is not itself an entry gains the
/// element-wise OR of the vectors of all its source words.
Lexicon expand_with_synonyms(const Lexicon& lexicon, const SynonymTable& synonyms);

/// Negated emotions via the fixed emotion-to-negation mapping, OR-ed over the
/// nonzero emotions of `emotions`.
EmotionVector negate_emotions(const EmotionVector& emotions);

/// Row `e` of the negation mapping.
const EmotionVector& negation_row(Emotion e);

inline constexpr std::array<std::string_view, 10> k_negation_prefixes = {
    "a", "de", "dis", "il", "im", "in", "ir", "mis", "non", "un"};
inline constexpr std::array<std::string_view, 1> k_negation_suffixes = {"less"};

/// Emotions of a negated `word`: first a lexicon hit on a prefixed or
/// suffixed variant, else the mapped negation of the bare word's vector.
std::optional<EmotionVector> negated_lookup(const Lexicon& lexicon, std::string_view word);

}  // namespace emoreact
