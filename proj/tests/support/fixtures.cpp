#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <mutex>

#include <unistd.h>

#include "emoreact/random.hpp"

namespace emoreact::testing {
namespace fs = std::filesystem;

namespace {

const std::array<std::vector<std::string>, 5> k_topics = {{
    {"puppy", "wedding", "cute", "baby", "adorable", "family", "sunset", "kitten", "anniversary", "hug", "garden",
     "bride"},
    {"record", "discovery", "galaxy", "giant", "telescope", "billion", "rocket", "ancient", "fossil", "speed",
     "massive", "breakthrough"},
    {"joke", "meme", "prank", "clown", "silly", "cartoon", "comedy", "pun", "goofy", "parody", "sitcom", "pranksters"},
    {"funeral", "passed", "tragedy", "victims", "mourning", "farewell", "illness", "orphan", "grief", "memorial",
     "hospital", "drowned"},
    {"corruption", "tax", "scandal", "fraud", "abuse", "police", "unfair", "ban", "lies", "greed", "violence",
     "bribe"},
}};

const std::vector<std::string> k_fillers = {"today", "news",  "people", "city",  "week",   "update", "story",
                                            "video", "photo", "watch",  "local", "world",  "time",   "report",
                                            "town",  "team",  "friday", "year",  "minute", "online"};

const std::array<std::vector<std::string>, 5> k_comment_words = {{
    {"love", "beautiful", "happy", "sweet"},
    {"surprise", "laugh", "shocking", "whoa"},
    {"laugh", "funny", "hilarious", "lol"},
    {"cry", "loss", "grief", "sorrow"},
    {"angry", "hate", "disgusting", "shame"},
}};

const std::vector<std::string> k_comment_fillers = {"this", "is", "so", "really", "not", "very", "wow", "omg"};

const std::string& pick(const std::vector<std::string>& v, Rng& rng) {
  return v[static_cast<std::size_t>(uniform_index(rng, v.size()))];
}

std::size_t pick_reaction(Rng& rng) {
  static const std::array<double, 5> weights = {0.34, 0.16, 0.18, 0.16, 0.16};
  double u = uniform01(rng);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return 4;
}

}  // namespace

fs::path source_dir() { return fs::path(EMOREACT_SOURCE_DIR); }
fs::path data_dir() { return source_dir() / "data"; }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("emoreact-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Corpus synthetic_corpus(std::size_t posts, std::uint64_t seed, const SyntheticOptions& options) {
  Rng rng(seed);
  Corpus corpus;
  corpus.source = "synthetic";
  for (std::size_t p = 0; p < posts; ++p) {
    const std::size_t dominant = pick_reaction(rng);
    std::size_t secondary = static_cast<std::size_t>(uniform_index(rng, 4));
    if (secondary >= dominant) ++secondary;
    const std::size_t voice = uniform01(rng) < options.label_noise ? pick_reaction(rng) : dominant;

    std::vector<std::string> words;
    const int topic = 2 + static_cast<int>(uniform_index(rng, 4));
    for (int i = 0; i < topic; ++i) words.push_back(pick(k_topics[voice], rng));
    if (uniform01(rng) < 0.5) words.push_back(pick(k_topics[secondary], rng));
    const int fill = 2 + static_cast<int>(uniform_index(rng, 5));
    for (int i = 0; i < fill; ++i) words.push_back(pick(k_fillers, rng));
    shuffle<std::string>(words, rng);

    Post post;
    post.id = "syn" + std::to_string(p);
    for (const auto& w : words) post.message += (post.message.empty() ? "" : " ") + w;
    post.message += uniform01(rng) < 0.5 ? "!" : ".";

    const int n_comments = static_cast<int>(uniform_index(rng, 4));
    for (int c = 0; c < n_comments; ++c) {
      std::string text = pick(k_comment_fillers, rng) + " " + pick(k_comment_words[voice], rng);
      if (uniform01(rng) < 0.4) text += " " + pick(k_comment_words[dominant], rng);
      post.comments.push_back(text + ".");
    }

    const auto total = static_cast<std::int64_t>(5 + uniform_index(rng, 56));
    const double share = uniform(rng, 0.55, 0.85);
    auto main = std::max<std::int64_t>(1, std::llround(share * static_cast<double>(total)));
    std::int64_t rest = std::max<std::int64_t>(0, total - main);
    const auto second = std::llround(uniform(rng, 0.5, 1.0) * static_cast<double>(rest));
    rest -= second;
    post.reactions.counts[dominant] = main;
    post.reactions.counts[secondary] = second;
    while (rest > 0) {
      std::size_t r = static_cast<std::size_t>(uniform_index(rng, 5));
      if (r == dominant) r = secondary;
      ++post.reactions.counts[r];
      --rest;
    }
    const double like_ratio = uniform(rng, options.like_ratio_min, options.like_ratio_max);
    post.reactions[Reaction::like] = std::llround(like_ratio * static_cast<double>(total));
    corpus.posts.push_back(std::move(post));
  }
  return corpus;
}

std::vector<std::string> synthetic_vocabulary() {
  std::vector<std::string> words;
  for (const auto& t : k_topics) words.insert(words.end(), t.begin(), t.end());
  words.insert(words.end(), k_fillers.begin(), k_fillers.end());
  for (const auto& t : k_comment_words) words.insert(words.end(), t.begin(), t.end());
  words.insert(words.end(), k_comment_fillers.begin(), k_comment_fillers.end());
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

void write_random_glove(const fs::path& path, const std::vector<std::string>& words, int dim, std::uint64_t seed,
                        double scale) {
  Rng rng(seed);
  std::ofstream out(path);
  out.precision(6);
  for (const auto& w : words) {
    out << w;
    for (int d = 0; d < dim; ++d) out << ' ' << std::fixed << scale * standard_normal(rng);
    out << '\n';
  }
}

Lexicon fixture_lexicon() {
  using E = Emotion;
  auto v = [](std::initializer_list<E> on) {
    EmotionVector x = EmotionVector::Zero();
    for (E e : on) x[static_cast<int>(e)] = 1.0;
    return x;
  };
  Lexicon lex;
  lex.insert("happy", v({E::joy}));
  lex.insert("sad", v({E::sadness}));
  lex.insert("angry", v({E::anger, E::disgust}));
  lex.insert("love", v({E::joy, E::trust}));
  lex.insert("scary", v({E::fear}));
  lex.insert("surprise", v({E::surprise}));
  lex.insert("hope", v({E::anticipation, E::trust}));
  lex.insert("fair", v({E::trust}));
  lex.insert("unfair", v({E::anger, E::disgust}));
  return lex;
}

const Lexicon& shipped_lexicon(bool expanded) {
  static std::mutex mu;
  static std::map<bool, Lexicon> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(expanded);
  if (it == cache.end()) {
    Lexicon lex = load_lexicon(data_dir() / "emolex.tsv",
                               expanded ? std::optional<fs::path>(data_dir() / "synonyms.tsv") : std::nullopt);
    it = cache.emplace(expanded, std::move(lex)).first;
  }
  return it->second;
}

PipelineComponents random_components(std::uint64_t seed, int dim) {
  PipelineComponents c;
  Rng rng(seed);
  c.lexicon = shipped_lexicon(false);
  c.embeddings = EmbeddingTable(dim);
  std::vector<float> row(static_cast<std::size_t>(dim));
  for (const auto& w : synthetic_vocabulary()) {
    for (auto& x : row) x = static_cast<float>(standard_normal(rng));
    c.embeddings.add(w, row);
  }

  CnnConfig cc;
  cc.filters = 6;
  cc.embedding_dim = dim;
  cc.max_len = 24;
  c.cnn = CnnModel<double>(cc);
  c.cnn.initialize(seed + 1);
  // Nonzero biases so empty inputs still give non-uniform outputs.
  for (auto& p : c.cnn.params()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += 0.3 * standard_normal(rng);
  }
  LstmConfig lc;
  lc.hidden = 7;
  lc.embedding_dim = dim;
  lc.max_len = 24;
  c.rnn = LstmModel<double>(lc);
  c.rnn.initialize(seed + 2);
  for (auto& p : c.rnn.params()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += 0.3 * standard_normal(rng);
  }

  c.ensemble.layout = FeatureLayout::parse("cnn+rnn+avg+emotions");
  c.ensemble.weights.resize(c.ensemble.layout.width() + 1, 5);
  for (Eigen::Index i = 0; i < c.ensemble.weights.size(); ++i) c.ensemble.weights.data()[i] = standard_normal(rng);
  return c;
}

}  // namespace emoreact::testing
