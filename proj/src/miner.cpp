#include "emoreact/miner.hpp"

#include "emoreact/fallback.hpp"

namespace emoreact::miner {

std::vector<TokenAnnotation> highlight(const textprep::TokenSequence& sentence, const Lexicon& lexicon) {
  const auto& tokens = sentence.tokens;
  const std::size_t n = tokens.size();
  std::vector<TokenAnnotation> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].token = tokens[i];

  auto plain = [&](std::size_t k) {
    if (const EmotionVector* v = lexicon.find(tokens[k])) out[k].emotions = *v;
  };

  std::size_t i = 0;
  while (i < n) {
    if (!textprep::is_negation(tokens[i])) {
      plain(i);
      ++i;
      continue;
    }
    // Rule 1: the next token is an emotion word. Rule 2: one or more
    // adverbs/participles, then an emotion word.
    std::size_t target = n;
    std::size_t j = i + 1;
    if (j < n && lexicon.contains(tokens[j])) {
      target = j;
    } else {
      std::size_t gap = 0;
      while (j < n && gap < k_max_negation_gap && sentence.tags[j] != textprep::Tag::OTHER &&
             !lexicon.contains(tokens[j])) {
        ++j;
        ++gap;
      }
      if (gap >= 1 && j < n && lexicon.contains(tokens[j])) target = j;
    }
    if (target == n) {
      plain(i);
      ++i;
      continue;
    }
    plain(i);
    for (std::size_t k = i + 1; k < target; ++k) plain(k);
    out[i].negation_cue = true;
    out[target].emotions = *negated_lookup(lexicon, tokens[target]);
    out[target].negated = true;
    i = target + 1;
  }
  return out;
}

SentenceEmotions sentence_emotions(const textprep::TokenSequence& sentence, const Lexicon& lexicon) {
  SentenceEmotions result;
  if (sentence.empty()) return result;
  std::size_t matched = 0;
  for (const auto& a : highlight(sentence, lexicon)) {
    result.emotions += a.emotions;
    if ((a.emotions.array() != 0.0).any()) ++matched;
  }
  result.coverage = static_cast<double>(matched) / static_cast<double>(sentence.size());
  return result;
}

EmotionVector text_emotions(const std::string& message, const std::vector<std::string>& comments,
                            const Lexicon& lexicon, const FallbackClassifier* fallback, const MinerOptions& options,
                            const textprep::WordLists& lists) {
  EmotionVector total = EmotionVector::Zero();
  auto mine = [&](const std::string& text) {
    for (const auto& sentence : textprep::sentences_of(text, lists)) {
      const SentenceEmotions se = sentence_emotions(sentence, lexicon);
      if (se.coverage > 0.0) {
        total += se.emotions;
      } else if (fallback != nullptr) {
        total += fallback->predict_emotions(sentence);
      }
    }
  };
  if (options.include_message) mine(message);
  for (const auto& c : comments) mine(c);

  const double mass = total.sum();
  if (mass <= 0.0) return EmotionVector::Constant(1.0 / k_num_emotions);
  return total / mass;
}

EmotionVector post_emotions(const Post& post, const Lexicon& lexicon, const FallbackClassifier* fallback,
                            const MinerOptions& options, const textprep::WordLists& lists) {
  return text_emotions(post.message, post.comments, lexicon, fallback, options, lists);
}

AnnotatedSentences lexicon_annotated(const std::vector<textprep::TokenSequence>& sentences, const Lexicon& lexicon) {
  AnnotatedSentences out;
  for (const auto& s : sentences) {
    const SentenceEmotions se = sentence_emotions(s, lexicon);
    if (se.coverage <= 0.0) continue;
    out.sentences.push_back(s);
    out.labels.push_back((se.emotions.array() > 0.0).cast<double>().matrix());
  }
  return out;
}

}  // namespace emoreact::miner
