#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace emoreact::textprep {

/// Coarse part-of-speech classes; only adverbs and past participles matter
/// to negation handling.
enum class Tag { RB, VBN, OTHER };

std::string_view tag_name(Tag t);

struct TokenSequence {
  std::vector<std::string> tokens;
  std::vector<Tag> tags;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Stop-word, adverb and irregular-participle lists. The defaults are the
/// files shipped under data/, compiled in.
struct WordLists {
  std::unordered_set<std::string> stopwords;
  std::unordered_set<std::string> adverbs;
  std::unordered_set<std::string> participles;

  static const WordLists& builtin();
  /// Loads stopwords.txt, adverbs.txt and participles.txt from `dir`.
  static WordLists load(const std::filesystem::path& dir);
};

/// Words that trigger negation handling. Tokens ending in "n't" also count.
bool is_negation(std::string_view token);

/// Lowercases, replaces URLs with `__url__` and user references with
/// `__at_user__`, strips `#`, collapses runs of three or more identical
/// characters, and drops tokens containing digits. Idempotent.
std::string preprocess(std::string_view raw);

/// Whitespace tokenization of preprocessed text. Edge punctuation is trimmed
/// from each token and stop-words are removed; negation words never are.
TokenSequence tokenize(std::string_view text, const WordLists& lists = WordLists::builtin());

std::vector<Tag> pos_tag_lite(const std::vector<std::string>& tokens,
                              const WordLists& lists = WordLists::builtin());

/// Splits on runs of `.`, `?` or `!` followed by whitespace or end of input.
std::vector<std::string> split_sentences(std::string_view text);

/// preprocess + split_sentences + tokenize; sentences left empty are dropped.
std::vector<TokenSequence> sentences_of(std::string_view raw,
                                        const WordLists& lists = WordLists::builtin());

}  // namespace emoreact::textprep
