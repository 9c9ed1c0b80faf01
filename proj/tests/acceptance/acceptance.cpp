// Acceptance suite: one line per criterion, "[PASS|FAIL|SKIP] id: detail".
// Exit status 0 = all ran criteria passed, 1 = some failed, 77 = all skipped.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emoreact/dataset.hpp"
#include "emoreact/ensemble.hpp"
#include "emoreact/fallback.hpp"
#include "emoreact/lexicon.hpp"
#include "emoreact/miner.hpp"
#include "emoreact/models.hpp"
#include "emoreact/numerics.hpp"
#include "emoreact/pipeline.hpp"
#include "emoreact/random.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace emoreact;
using Clock = std::chrono::steady_clock;
using M = nn::Matrix<double>;

namespace {

// Tolerances and thresholds.
constexpr double k_grad_tolerance = 1e-4;
constexpr double k_grad_eps = 1e-5;
constexpr double k_grad_seconds = 60.0;
constexpr double k_op_tolerance = 1e-12;
constexpr double k_ols_tolerance = 1e-8;
constexpr int k_simplex_invocations = 10000;
constexpr double k_simplex_tolerance = 1e-6;
constexpr double k_padding_tolerance = 1e-12;
constexpr double k_count_tolerance = 0.05;
constexpr double k_any_reaction_posts = 25969;
constexpr double k_non_like_posts = 8103;
constexpr double k_agreement_floor = 0.80;
constexpr double k_fallback_ap_floor = 0.85;
constexpr double k_fallback_seconds = 600.0;
constexpr std::size_t k_fallback_sentences = 10000;
constexpr std::size_t k_desk_posts = 500;
constexpr int k_desk_epochs = 50;
constexpr double k_desk_loss_ratio = 0.8;
constexpr double k_ballpark_band = 0.05;
constexpr double k_reference_cnn = 0.186;
constexpr double k_reference_rnn = 0.159;
constexpr double k_reference_ensemble = 0.135;
constexpr double k_like_share_floor = 0.6;
constexpr double k_like_argmax_floor = 0.9;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(precision);
  o << v;
  return o.str();
}

std::string sci(double v) {
  std::ostringstream o;
  o.setf(std::ios::scientific);
  o.precision(2);
  o << v;
  return o.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

M random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double s = 1.0) {
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * standard_normal(rng);
  return m;
}

Corpus load_env_corpus(const std::string& path, bool drop_empty = true) {
  const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  LoadOptions opt;
  opt.drop_empty_messages = drop_empty;
  return load_corpus(path, csv ? CorpusFormat::csv : CorpusFormat::json_lines, opt);
}

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = Clock::now();
  Rng rng(42);
  constexpr int length = 10;
  constexpr int dim = 8;
  EmbeddedPost<double> post;
  post.rows = random_matrix(length, dim, rng);
  post.valid_length = 8;
  Eigen::RowVectorXd target(5);
  target << 0.1, 0.4, 0.2, 0.25, 0.05;

  auto check = [&](auto& model) {
    // Pull weights away from the Glorot init so relu and gates see varied inputs.
    for (auto& p : model.params()) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += 0.2 * standard_normal(rng);
    }
    const double dropout = model.config().training.dropout;
    auto build = [&](nn::Tape<double>& tape, std::span<const nn::Var<double>> vars) {
      Rng drop(7);  // same mask on every evaluation
      nn::Var<double> logits = model.logits(tape, vars, post, dropout > 0.0, drop);
      std::vector<nn::Var<double>> reg;
      for (std::size_t k = 0; k < vars.size(); ++k) {
        if (model.params()[k].regularized) reg.push_back(vars[k]);
      }
      return nn::cross_entropy_soft<double>(logits, target, reg, 1e-2);
    };
    return nn::grad_check(build, model.params(), k_grad_eps);
  };

  CnnConfig cc;
  cc.embedding_dim = dim;
  cc.heights = {2, 3, 4};
  cc.filters = 3;
  cc.max_len = length;
  cc.training.dropout = 0.5;
  CnnModel<double> cnn(cc);
  cnn.initialize(1);
  const auto rc = check(cnn);

  LstmConfig lc;
  lc.embedding_dim = dim;
  lc.hidden = 6;
  lc.max_len = length;
  lc.training.dropout = 0.5;
  LstmModel<double> lstm(lc);
  lstm.initialize(2);
  const auto rl = check(lstm);

  const double secs = seconds_since(t0);
  const bool ok = rc.max_relative_error < k_grad_tolerance && rl.max_relative_error < k_grad_tolerance &&
                  secs < k_grad_seconds;
  return {ok ? Status::pass : Status::fail,
          "cnn max rel err " + sci(rc.max_relative_error) + " over " + std::to_string(rc.checked) +
              " params (worst " + rc.worst_parameter + "), lstm " + sci(rl.max_relative_error) + " over " +
              std::to_string(rl.checked) + " (worst " + rl.worst_parameter + "); tol " + sci(k_grad_tolerance) +
              ", " + fmt(secs, 1) + " s"};
}

Outcome oracles() {
  Rng rng(2024);
  double conv_err = 0.0;
  double lstm_err = 0.0;
  double softmax_err = 0.0;
  double ce_err = 0.0;
  double ols_err = 0.0;

  for (int trial = 0; trial < 25; ++trial) {
    nn::Tape<double> t;
    const Eigen::Index len = 3 + static_cast<Eigen::Index>(uniform_index(rng, 10));
    const Eigen::Index dim = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const Eigen::Index h = 1 + static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(len)));
    const Eigen::Index f = 1 + static_cast<Eigen::Index>(uniform_index(rng, 5));
    const M x = random_matrix(len, dim, rng);
    const M w = random_matrix(f, h * dim, rng);
    const M b = random_matrix(1, f, rng);
    const M got = nn::conv1d_valid(t.constant(x), t.constant(w), t.constant(b)).value();
    conv_err = std::max(conv_err, (got - oracle::conv1d(x, w, b)).cwiseAbs().maxCoeff());

    const Eigen::Index hid = 1 + static_cast<Eigen::Index>(uniform_index(rng, 6));
    const M wx = random_matrix(dim, 4 * hid, rng, 0.5);
    const M wh = random_matrix(hid, 4 * hid, rng, 0.5);
    const M bb = random_matrix(1, 4 * hid, rng, 0.5);
    const nn::LstmWeights<double> lw{t.constant(wx), t.constant(wh), t.constant(bb)};
    const M h0 = random_matrix(1, hid, rng);
    const M c0 = random_matrix(1, hid, rng);
    const M xin = random_matrix(1, dim, rng);
    const auto s = nn::lstm_step(t.constant(xin), nn::LstmState<double>{t.constant(h0), t.constant(c0)}, lw);
    std::vector<long double> oh(static_cast<std::size_t>(hid));
    std::vector<long double> oc(static_cast<std::size_t>(hid));
    for (Eigen::Index u = 0; u < hid; ++u) {
      oh[static_cast<std::size_t>(u)] = h0(0, u);
      oc[static_cast<std::size_t>(u)] = c0(0, u);
    }
    const auto o = oracle::lstm_step(xin, oh, oc, wx, wh, bb);
    for (Eigen::Index u = 0; u < hid; ++u) {
      lstm_err = std::max(lstm_err, std::abs(s.hidden.value()(0, u) - static_cast<double>(o.h[u])));
      lstm_err = std::max(lstm_err, std::abs(s.cell.value()(0, u) - static_cast<double>(o.c[u])));
    }

    const M z = random_matrix(1, 6, rng, 3.0);
    M target = random_matrix(1, 6, rng).cwiseAbs();
    target /= target.sum();
    std::vector<long double> zl(6);
    std::vector<long double> tl(6);
    for (int i = 0; i < 6; ++i) {
      zl[static_cast<std::size_t>(i)] = z(0, i);
      tl[static_cast<std::size_t>(i)] = target(0, i);
    }
    const auto p = oracle::softmax(zl);
    const M sm = nn::softmax<double>(z);
    for (int i = 0; i < 6; ++i) softmax_err = std::max(softmax_err, std::abs(sm(0, i) - static_cast<double>(p[i])));
    const double ce = nn::cross_entropy_soft(t.constant(z), nn::RowVector<double>(target)).value()(0, 0);
    ce_err = std::max(ce_err, std::abs(ce - static_cast<double>(oracle::cross_entropy(zl, tl))));
  }

  // OLS: free-standing features (no sum-to-one block) so the plain normal
  // equations are well posed, fit with zero ridge.
  for (int trial = 0; trial < 5; ++trial) {
    const FeatureLayout layout = FeatureLayout::parse("cnn+emotions");
    std::vector<EnsembleInput> inputs;
    std::vector<Eigen::VectorXd> targets;
    const int n = 50 + 10 * trial;
    M x(n, layout.width());
    M y(n, 5);
    for (int i = 0; i < n; ++i) {
      EnsembleInput in;
      in.cnn = Eigen::VectorXd::Random(5).cwiseAbs();
      in.rnn = Eigen::VectorXd::Constant(5, 0.2);
      for (int e = 0; e < k_num_emotions; ++e) in.emotions[e] = uniform01(rng);
      Eigen::VectorXd target(5);
      for (int k = 0; k < 5; ++k) target[k] = uniform01(rng);
      x.row(i) = layout.features(in);
      y.row(i) = target;
      inputs.push_back(in);
      targets.push_back(target);
    }
    const RegressionModel m = fit_regression(inputs, targets, layout, 0.0);
    ols_err = std::max(ols_err, (m.weights - oracle::ols(x, y)).cwiseAbs().maxCoeff());
  }

  const bool ok = conv_err <= k_op_tolerance && lstm_err <= k_op_tolerance && softmax_err <= k_op_tolerance &&
                  ce_err <= k_op_tolerance && ols_err <= k_ols_tolerance;
  return {ok ? Status::pass : Status::fail,
          "conv " + sci(conv_err) + ", lstm " + sci(lstm_err) + ", softmax " + sci(softmax_err) + ", ce " +
              sci(ce_err) + " (tol " + sci(k_op_tolerance) + "); ols " + sci(ols_err) + " (tol " +
              sci(k_ols_tolerance) + ")"};
}

EmotionVector row_of(std::initializer_list<int> bits) {
  EmotionVector v;
  int i = 0;
  for (int b : bits) v[i++] = b;
  return v;
}

Outcome lexicon() {
  const Lexicon lex = load_emolex(testing::data_dir() / "emolex.tsv");
  // Published rows, order (anger, anticipation, disgust, fear, joy, sadness, surprise, trust).
  const std::map<std::string, EmotionVector> table1 = {{"abuse", row_of({1, 0, 1, 1, 0, 1, 0, 0})},
                                                       {"shopping", row_of({0, 1, 0, 0, 1, 0, 1, 1})}};
  int wrong = 0;
  std::string notes;
  for (const auto& [word, expect] : table1) {
    const EmotionVector* v = lex.find(word);
    if (v == nullptr || *v != expect) {
      ++wrong;
      notes += " " + word;
    }
  }
  const std::array<EmotionVector, k_num_emotions> table3 = {
      row_of({0, 0, 0, 0, 1, 0, 0, 0}),  // anger -> joy
      row_of({0, 0, 0, 0, 1, 0, 1, 0}),  // anticipation -> joy, surprise
      row_of({0, 0, 0, 0, 1, 0, 0, 1}),  // disgust -> joy, trust
      row_of({0, 0, 0, 0, 1, 0, 0, 1}),  // fear -> joy, trust
      row_of({1, 0, 1, 1, 0, 1, 0, 0}),  // joy -> anger, disgust, fear, sadness
      row_of({0, 0, 0, 1, 0, 0, 0, 0}),  // sadness -> fear
      row_of({0, 1, 0, 0, 0, 0, 0, 1}),  // surprise -> anticipation, trust
      row_of({0, 0, 1, 0, 0, 0, 1, 0}),  // trust -> disgust, surprise
  };
  int wrong3 = 0;
  for (int e = 0; e < k_num_emotions; ++e) {
    if (negate_emotions(unit_emotion(static_cast<Emotion>(e))) != table3[static_cast<std::size_t>(e)]) {
      ++wrong3;
      notes += std::string(" neg:") + std::string(k_emotion_names[static_cast<std::size_t>(e)]);
    }
  }
  const bool ok = wrong == 0 && wrong3 == 0;
  return {ok ? Status::pass : Status::fail,
          std::to_string(2 - wrong) + "/2 lexicon rows and " + std::to_string(8 - wrong3) +
              "/8 negation rows exact (" + std::to_string(lex.size()) + " EmoLex words)" +
              (notes.empty() ? "" : "; mismatches:" + notes)};
}

Outcome negation() {
  // "happy" carries joy only here, as in the reference annotation. The shipped
  // EmoLex also has "unhappy", which the prefix lookup would return instead.
  const Lexicon lex = testing::fixture_lexicon();
  const EmotionVector joy_row = negation_row(Emotion::joy);

  const auto nvh = textprep::tokenize("not very happy");
  const auto a2 = miner::highlight(nvh, lex);
  const bool rule2 = nvh.tags.size() == 3 && nvh.tags[1] == textprep::Tag::RB && a2.size() == 3 &&
                     a2[0].negation_cue && a2[2].negated && a2[2].emotions == joy_row &&
                     miner::sentence_emotions(nvh, lex).emotions == joy_row;

  const auto nh = textprep::tokenize("not happy");
  const auto a1 = miner::highlight(nh, lex);
  const bool rule1 = a1.size() == 2 && a1[0].negation_cue && a1[1].negated && a1[1].emotions == joy_row;

  // Same sentence against the shipped lexicon, for information.
  const Lexicon& real = testing::shipped_lexicon(false);
  const auto ar = miner::highlight(nvh, real);
  const bool real_negated = ar.size() == 3 && ar[2].negated;
  const bool real_unhappy = real_negated && real.find("unhappy") && ar[2].emotions == *real.find("unhappy");

  return {rule1 && rule2 ? Status::pass : Status::fail,
          std::string("rule 2 on 'not very happy' ") + (rule2 ? "fires with joy negation row" : "FAILED") +
              ", rule 1 on 'not happy' " + (rule1 ? "fires" : "FAILED") + "; shipped EmoLex: 'happy' " +
              (real_negated ? "negated" : "not negated") + (real_unhappy ? " via 'unhappy' entry" : "")};
}

Outcome simplex() {
  const Pipeline pipeline(testing::random_components(77));
  const auto& comps = pipeline.components();
  const auto vocab = testing::synthetic_vocabulary();
  const std::vector<std::string> extra = {"not",  "never", "very",   "happy", "sad",    "abuse",  "shopping",
                                          "#tag", "@user", "http://x.co", "l00k", "soooo", "!!!", "don't",
                                          "?",    "...",   "\xC3\xA9t\xC3\xA9", ""};
  Rng rng(1234);
  auto word = [&]() -> const std::string& {
    return uniform01(rng) < 0.7 ? vocab[static_cast<std::size_t>(uniform_index(rng, vocab.size()))]
                                : extra[static_cast<std::size_t>(uniform_index(rng, extra.size()))];
  };
  auto sentence = [&](int max_words) {
    std::string s;
    const int n = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(max_words) + 1));
    for (int i = 0; i < n; ++i) {
      s += word();
      s += uniform01(rng) < 0.15 ? ". " : " ";
    }
    return s;
  };

  int off_simplex = 0;
  int padding_breaks = 0;
  double worst_padding = 0.0;
  const Eigen::Index max_len = comps.cnn.config().max_len;
  for (int it = 0; it < k_simplex_invocations; ++it) {
    const std::string text = sentence(40);
    std::vector<std::string> comments(static_cast<std::size_t>(uniform_index(rng, 4)));
    for (auto& c : comments) c = sentence(15);
    const Prediction p = pipeline.predict(text, comments);
    for (const Eigen::VectorXd* v : {&p.reactions, &p.cnn, &p.rnn, &p.averaged}) {
      if (!nn::on_simplex(*v, k_simplex_tolerance)) ++off_simplex;
    }
    if (!nn::on_simplex(p.emotions, k_simplex_tolerance)) ++off_simplex;

    EmbeddedPost<double> post = embed_and_pad<double>(message_tokens(text), comps.embeddings, max_len);
    const auto c0 = comps.cnn.predict(post);
    const auto r0 = comps.rnn.predict(post);
    for (Eigen::Index i = post.valid_length; i < max_len; ++i) {
      for (Eigen::Index d = 0; d < post.rows.cols(); ++d) post.rows(i, d) = 10.0 * standard_normal(rng);
    }
    const double dc = (comps.cnn.predict(post) - c0).cwiseAbs().maxCoeff();
    const double dr = (comps.rnn.predict(post) - r0).cwiseAbs().maxCoeff();
    worst_padding = std::max({worst_padding, dc, dr});
    if (dc > k_padding_tolerance || dr > k_padding_tolerance) ++padding_breaks;
  }
  const bool ok = off_simplex == 0 && padding_breaks == 0;
  return {ok ? Status::pass : Status::fail,
          std::to_string(k_simplex_invocations) + " invocations, " + std::to_string(off_simplex) +
              " distributions off the simplex (tol " + sci(k_simplex_tolerance) + "), " +
              std::to_string(padding_breaks) + " padding changes (max " + sci(worst_padding) + ")"};
}

Outcome dataset_stats() {
  const auto path = env("EMOREACT_CORPUS");
  if (!path) return {Status::skip, "EMOREACT_CORPUS not set; the published corpus snapshot is not bundled"};
  const Corpus c = load_env_corpus(*path, false);
  const double any = static_cast<double>(filter_by_threshold(c, 1, true).size());
  const double non_like = static_cast<double>(filter_by_threshold(c, 1, false).size());
  const StatsReport s = corpus_stats(c, 1);
  const double d_any = std::abs(any - k_any_reaction_posts) / k_any_reaction_posts;
  const double d_nl = std::abs(non_like - k_non_like_posts) / k_non_like_posts;
  const bool ok = d_any <= k_count_tolerance && d_nl <= k_count_tolerance &&
                  std::isfinite(s.dominant_agreement) && s.dominant_agreement > k_agreement_floor;
  return {ok ? Status::pass : Status::fail,
          std::to_string(c.size()) + " posts loaded; >=1 any reaction " + fmt(any, 0) + " (" + fmt(100 * d_any, 1) +
              "% off), >=1 non-like " + fmt(non_like, 0) + " (" + fmt(100 * d_nl, 1) +
              "% off), dominant agreement " + fmt(s.dominant_agreement, 3)};
}

Outcome fallback_svm() {
  const auto t0 = Clock::now();
  std::ifstream in(testing::data_dir() / "wordnet_sentences.txt");
  if (!in) return {Status::fail, "data/wordnet_sentences.txt missing"};
  std::vector<textprep::TokenSequence> sentences;
  std::string line;
  while (std::getline(in, line)) {
    auto ts = textprep::tokenize(textprep::preprocess(line));
    if (!ts.empty()) sentences.push_back(std::move(ts));
  }
  const Lexicon& lex = testing::shipped_lexicon(true);
  miner::AnnotatedSentences ann = miner::lexicon_annotated(sentences, lex);

  std::vector<std::size_t> order(ann.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(2017);
  shuffle<std::size_t>(order, rng);
  if (order.size() > k_fallback_sentences) order.resize(k_fallback_sentences);
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(order.size())));

  std::vector<textprep::TokenSequence> train_s;
  std::vector<EmotionVector> train_y;
  std::vector<textprep::TokenSequence> test_s;
  std::vector<EmotionVector> test_y;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst_s = k < n_train ? train_s : test_s;
    auto& dst_y = k < n_train ? train_y : test_y;
    dst_s.push_back(ann.sentences[order[k]]);
    dst_y.push_back(ann.labels[order[k]]);
  }
  const FallbackClassifier fb = FallbackClassifier::train(train_s, train_y);
  std::vector<SparseVector> x_test;
  for (const auto& s : test_s) x_test.push_back(vectorize(fb.tfidf(), s));
  const PrReport report = evaluate_pr(fb.svm(), x_test, test_y);
  const double secs = seconds_since(t0);

  std::string per;
  for (int e = 0; e < k_num_emotions; ++e) {
    per += std::string(per.empty() ? "" : " ") + std::string(k_emotion_names[static_cast<std::size_t>(e)]).substr(0, 4) +
           "=" + fmt(report.curves[static_cast<std::size_t>(e)].average_precision, 3);
  }
  const bool ok = report.macro_average_precision >= k_fallback_ap_floor && secs < k_fallback_seconds;
  return {ok ? Status::pass : Status::fail,
          "macro AP " + fmt(report.macro_average_precision, 3) + " (floor " + fmt(k_fallback_ap_floor, 2) + ") on " +
              std::to_string(test_s.size()) + " held-out of " + std::to_string(order.size()) +
              " annotated sentences, " + fmt(secs, 1) + " s [" + per + "]"};
}

// Shared pieces for the training-based criteria.

struct TrainingData {
  Corpus corpus;
  EmbeddingTable table{50};
  std::string source;
};

TrainingData training_data(std::size_t posts, std::uint64_t seed) {
  TrainingData d;
  const auto corpus_path = env("EMOREACT_CORPUS");
  const auto glove_path = env("EMOREACT_EMBEDDINGS");
  if (corpus_path && glove_path) {
    Corpus full = filter_by_threshold(load_env_corpus(*corpus_path), 1, false);
    const CorpusSplit s = split(full, {0.0, 0.0, 1.0}, seed);  // seeded shuffle
    d.corpus = s.test;
    if (d.corpus.posts.size() > posts) d.corpus.posts.resize(posts);
    const int dim = env("EMOREACT_EMBEDDING_DIM") ? std::stoi(*env("EMOREACT_EMBEDDING_DIM")) : 50;
    std::unordered_set<std::string> keep;
    for (const auto& p : d.corpus.posts) {
      for (const auto& t : message_tokens(p.message).tokens) keep.insert(t);
    }
    d.table = load_glove(*glove_path, dim, nullptr, &keep);
    d.source = "corpus subsample";
  } else {
    d.corpus = testing::synthetic_corpus(posts, seed);
    const auto dir = testing::scratch_dir("acceptance-glove");
    testing::write_random_glove(dir / "glove.txt", testing::synthetic_vocabulary(), 50, seed);
    d.table = load_glove(dir / "glove.txt", 50);
    d.source = "synthetic stand-in corpus";
  }
  return d;
}

std::map<std::string, const Post*> index_posts(const Corpus& c) {
  std::map<std::string, const Post*> out;
  for (const auto& p : c.posts) out[p.id] = &p;
  return out;
}

template <typename Cnn, typename Rnn>
std::vector<EnsembleInput> ensemble_inputs(const Cnn& cnn, const Rnn& rnn, const EncodedCorpus& enc,
                                           const Corpus& corpus, const EmbeddingTable& table, const Lexicon& lex) {
  const auto pc = predict_all(cnn, enc, table);
  const auto pr = predict_all(rnn, enc, table);
  const auto posts = index_posts(corpus);
  std::vector<EnsembleInput> out(enc.size());
  for (std::size_t i = 0; i < enc.size(); ++i) {
    out[i].cnn = pc[i];
    out[i].rnn = pr[i];
    out[i].emotions = miner::post_emotions(*posts.at(enc.posts[i].id), lex, nullptr);
  }
  return out;
}

std::vector<Eigen::VectorXd> targets_of(const EncodedCorpus& enc) {
  std::vector<Eigen::VectorXd> t;
  for (const auto& p : enc.posts) t.push_back(p.target);
  return t;
}

Outcome desk_training() {
  const auto t0 = Clock::now();
  const TrainingData data = training_data(k_desk_posts, 11);
  const EncodedCorpus enc = encode_corpus(data.corpus, data.table, false);
  const EncodedCorpus none;

  CnnConfig cc;
  cc.embedding_dim = data.table.dimension();
  cc.max_len = choose_max_len(enc, cc.max_height());
  cc.training.epochs = k_desk_epochs;
  cc.training.patience = 0;
  CnnModel<float> cnn(cc);
  cnn.initialize(1);
  const TrainingHistory hc = train(cnn, enc, none, data.table, 1);

  LstmConfig lc;
  lc.embedding_dim = data.table.dimension();
  lc.max_len = cc.max_len;
  lc.training.epochs = k_desk_epochs;
  lc.training.patience = 0;
  LstmModel<float> lstm(lc);
  lstm.initialize(2);
  const TrainingHistory hr = train(lstm, enc, none, data.table, 2);

  const double cnn_ratio = hc.epochs.back().train_loss / hc.epochs.front().train_loss;
  const double rnn_ratio = hr.epochs.back().train_loss / hr.epochs.front().train_loss;

  const auto inputs = ensemble_inputs(cnn, lstm, enc, data.corpus, data.table, testing::shipped_lexicon(true));
  const auto targets = targets_of(enc);
  const RegressionModel ens = fit_regression(inputs, targets);
  double avg_sse = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    avg_sse += (average_networks(inputs[i].cnn, inputs[i].rnn) - targets[i]).squaredNorm();
  }
  // The averaged networks are W = [I; 0] on the avg block; the ridge fit can
  // exceed the plain least-squares optimum by at most ridge * |W|^2.
  const double slack = ens.ridge * 5.0;
  const double secs = seconds_since(t0);
  const bool ok = cnn_ratio < k_desk_loss_ratio && rnn_ratio < k_desk_loss_ratio && ens.training_sse <= avg_sse + slack;
  return {ok ? Status::pass : Status::fail,
          data.source + ", " + std::to_string(enc.size()) + " posts, " + std::to_string(k_desk_epochs) +
              " epochs: cnn loss " + fmt(hc.epochs.front().train_loss) + " -> " + fmt(hc.epochs.back().train_loss) +
              " (x" + fmt(cnn_ratio, 3) + "), rnn " + fmt(hr.epochs.front().train_loss) + " -> " +
              fmt(hr.epochs.back().train_loss) + " (x" + fmt(rnn_ratio, 3) + "), limit x" + fmt(k_desk_loss_ratio, 2) +
              "; ensemble sse " + fmt(ens.training_sse, 4) + " vs averaged " + fmt(avg_sse, 4) + ", " +
              fmt(secs, 1) + " s"};
}

Outcome reference_ballpark() {
  const auto corpus_path = env("EMOREACT_CORPUS");
  const auto glove_path = env("EMOREACT_EMBEDDINGS");
  if (!corpus_path || !glove_path) {
    return {Status::skip, "needs EMOREACT_CORPUS and EMOREACT_EMBEDDINGS (full corpus and GloVe); soft check"};
  }
  const int runs = env("EMOREACT_CV_RUNS") ? std::stoi(*env("EMOREACT_CV_RUNS")) : 10;
  const int dim = env("EMOREACT_EMBEDDING_DIM") ? std::stoi(*env("EMOREACT_EMBEDDING_DIM")) : 50;
  const Corpus corpus = filter_by_threshold(load_env_corpus(*corpus_path), 1, false);
  std::unordered_set<std::string> keep;
  for (const auto& p : corpus.posts) {
    for (const auto& t : message_tokens(p.message).tokens) keep.insert(t);
  }
  const EmbeddingTable table = load_glove(*glove_path, dim, nullptr, &keep);
  const Lexicon& lex = testing::shipped_lexicon(true);

  std::vector<Metrics> mc;
  std::vector<Metrics> mr;
  std::vector<Metrics> me;
  for (int r = 0; r < runs; ++r) {
    const CorpusSplit s = split(corpus, {}, static_cast<std::uint64_t>(r + 1));
    const EncodedCorpus tr = encode_corpus(s.train, table, false);
    const EncodedCorpus va = encode_corpus(s.val, table, false);
    const EncodedCorpus te = encode_corpus(s.test, table, false);
    CnnConfig cc;
    cc.embedding_dim = dim;
    cc.max_len = choose_max_len(tr, cc.max_height());
    CnnModel<float> cnn(cc);
    cnn.initialize(static_cast<std::uint64_t>(100 + r));
    train(cnn, tr, va, table, static_cast<std::uint64_t>(r));
    LstmConfig lc;
    lc.embedding_dim = dim;
    lc.max_len = cc.max_len;
    LstmModel<float> lstm(lc);
    lstm.initialize(static_cast<std::uint64_t>(200 + r));
    train(lstm, tr, va, table, static_cast<std::uint64_t>(r));

    mc.push_back(evaluate(cnn, te, table));
    mr.push_back(evaluate(lstm, te, table));
    const RegressionModel ens =
        fit_regression(ensemble_inputs(cnn, lstm, tr, s.train, table, lex), targets_of(tr));
    const auto test_in = ensemble_inputs(cnn, lstm, te, s.test, table, lex);
    std::vector<Eigen::VectorXd> pred;
    for (const auto& in : test_in) pred.push_back(predict_final(ens, in));
    me.push_back(score_distributions(pred, targets_of(te)));
  }
  const double c = aggregate_runs(mc).mean.misclass_rate;
  const double rn = aggregate_runs(mr).mean.misclass_rate;
  const double e = aggregate_runs(me).mean.misclass_rate;
  const bool ok = std::abs(c - k_reference_cnn) <= k_ballpark_band && std::abs(rn - k_reference_rnn) <= k_ballpark_band &&
                  e <= k_reference_ensemble + k_ballpark_band;
  return {ok ? Status::pass : Status::fail,
          "soft check, " + std::to_string(runs) + " runs: cnn " + fmt(c, 3) + " (reference " + fmt(k_reference_cnn, 3) +
              "), rnn " + fmt(rn, 3) + " (reference " + fmt(k_reference_rnn, 3) + "), ensemble " + fmt(e, 3) + " (reference " +
              fmt(k_reference_ensemble, 3) + "), band " + fmt(k_ballpark_band, 2)};
}

Outcome like_ablation() {
  const auto t0 = Clock::now();
  const TrainingData data = training_data(800, 23);
  const CorpusSplit s = split(data.corpus, {0.75, 0.0, 0.25}, 5);

  auto run = [&](bool include_like, double& like_share, double& like_argmax) {
    const EncodedCorpus tr = encode_corpus(s.train, data.table, include_like);
    const EncodedCorpus te = encode_corpus(s.test, data.table, include_like);
    CnnConfig cc;
    cc.embedding_dim = data.table.dimension();
    cc.classes = include_like ? 6 : 5;
    cc.max_len = choose_max_len(tr, cc.max_height());
    cc.training.epochs = 20;
    cc.training.patience = 0;
    CnnModel<float> cnn(cc);
    cnn.initialize(3);
    train(cnn, tr, EncodedCorpus{}, data.table, 3);
    const auto pred = predict_all(cnn, te, data.table);
    like_share = 0.0;
    like_argmax = 0.0;
    if (include_like) {
      for (const auto& p : pred) {
        like_share += p[5];
        like_argmax += argmax_first(p) == 5 ? 1.0 : 0.0;
      }
      like_share /= static_cast<double>(pred.size());
      like_argmax /= static_cast<double>(pred.size());
    }
    return score_distributions(pred, targets_of(te));
  };
  double share = 0.0;
  double argmax = 0.0;
  double unused = 0.0;
  const Metrics with = run(true, share, argmax);
  const Metrics without = run(false, unused, unused);
  const double secs = seconds_since(t0);
  const bool ok = with.misclass_rate < without.misclass_rate && share >= k_like_share_floor &&
                  argmax >= k_like_argmax_floor;
  return {ok ? Status::pass : Status::fail,
          data.source + ", cnn test misclass with likes " + fmt(with.misclass_rate, 3) + " vs without " +
              fmt(without.misclass_rate, 3) + "; with likes, mean like share " + fmt(share, 3) + " (floor " +
              fmt(k_like_share_floor, 2) + "), like argmax on " + fmt(100 * argmax, 1) + "% of posts (floor " +
              fmt(100 * k_like_argmax_floor, 0) + "%), " + fmt(secs, 1) + " s"};
}

struct Criterion {
  std::string id;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"gradients", gradients},         {"oracles", oracles},           {"lexicon", lexicon},
      {"negation", negation},           {"simplex", simplex},           {"dataset_stats", dataset_stats},
      {"fallback_svm", fallback_svm},   {"desk_training", desk_training}, {"reference_ballpark", reference_ballpark},
      {"like_ablation", like_ablation},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("--only", only, "Run only these criteria");
  app.add_flag("--list", list, "Print criterion ids");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria()) std::cout << c.id << '\n';
    return 0;
  }
  for (const auto& id : only) {
    bool known = false;
    for (const auto& c : criteria()) known |= c.id == id;
    if (!known) {
      std::cerr << "unknown criterion '" << id << "'\n";
      return 2;
    }
  }

  int ran = 0;
  int failed = 0;
  int skipped = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("error: ") + e.what()};
    }
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
    std::cout << '[' << tag << "] " << c.id << ": " << o.detail << std::endl;
    ++ran;
    if (o.status == Status::fail) ++failed;
    if (o.status == Status::skip) ++skipped;
  }
  if (failed > 0) return 1;
  if (ran > 0 && skipped == ran) return 77;
  return 0;
}
