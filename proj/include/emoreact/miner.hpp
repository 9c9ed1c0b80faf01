#pragma once

#include <string>
#include <vector>

#include "emoreact/dataset.hpp"
#include "emoreact/lexicon.hpp"
#include "emoreact/textprep.hpp"

namespace emoreact {

class FallbackClassifier;

namespace miner {

/// Maximum number of RB/VBN tokens allowed between a negation word and the
/// emotion word it negates.
inline constexpr std::size_t k_max_negation_gap = 3;

struct SentenceEmotions {
  EmotionVector emotions = EmotionVector::Zero();
  /// Fraction of tokens that contributed an emotion.
  double coverage = 0.0;
};

struct TokenAnnotation {
  std::string token;
  EmotionVector emotions = EmotionVector::Zero();
  bool negated = false;
  /// Set on the negation word that caused `negated` on a later token.
  bool negation_cue = false;
};

/// Per-token annotations with negation rules applied left to right.
std::vector<TokenAnnotation> highlight(const textprep::TokenSequence& sentence, const Lexicon& lexicon);

/// Raw (unnormalized) sum of the highlight vectors plus coverage.
SentenceEmotions sentence_emotions(const textprep::TokenSequence& sentence, const Lexicon& lexicon);

struct MinerOptions {
  /// Mine the post message as well as its comments.
  bool include_message = true;
};

/// L1-normalized emotion distribution of a post. Sentences the lexicon does
/// not cover are annotated by `fallback` when one is given. A post with no
/// emotion at all maps to the uniform vector.
EmotionVector post_emotions(const Post& post, const Lexicon& lexicon, const FallbackClassifier* fallback,
                            const MinerOptions& options = {},
                            const textprep::WordLists& lists = textprep::WordLists::builtin());

/// Same as post_emotions for free text and an explicit comment list.
EmotionVector text_emotions(const std::string& message, const std::vector<std::string>& comments,
                            const Lexicon& lexicon, const FallbackClassifier* fallback,
                            const MinerOptions& options = {},
                            const textprep::WordLists& lists = textprep::WordLists::builtin());

/// Sentences with lexicon coverage, labelled with their binarized emotions.
struct AnnotatedSentences {
  std::vector<textprep::TokenSequence> sentences;
  std::vector<EmotionVector> labels;
};

AnnotatedSentences lexicon_annotated(const std::vector<textprep::TokenSequence>& sentences,
                                     const Lexicon& lexicon);

}  // namespace miner
}  // namespace emoreact
