#include <doctest.h>

#include <cmath>

#include "emoreact/fallback.hpp"
#include "emoreact/random.hpp"
#include "fixtures.hpp"

using namespace emoreact;
using textprep::TokenSequence;

namespace {

TokenSequence seq(std::initializer_list<const char*> w) {
  TokenSequence ts;
  for (const char* s : w) ts.tokens.emplace_back(s);
  ts.tags.assign(ts.tokens.size(), textprep::Tag::OTHER);
  return ts;
}

SparseVector dense_to_sparse(std::initializer_list<double> v) {
  SparseVector x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) {
    if (d != 0.0) x.insert(i) = d;
    ++i;
  }
  return x;
}

}  // namespace

TEST_CASE("idf values") {
  const TfIdfModel m = fit_tfidf({seq({"a", "b"}), seq({"a"}), seq({"a", "c", "c"})});
  CHECK(m.document_count == 3);
  CHECK(m.dimension() == 3);
  CHECK(m.idf[m.vocabulary.at("a")] == doctest::Approx(1.0));
  CHECK(m.idf[m.vocabulary.at("b")] == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  CHECK(m.idf[m.vocabulary.at("c")] == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  CHECK_THROWS_AS(fit_tfidf({seq({}), seq({})}), FallbackError);
}

TEST_CASE("vectorize") {
  const TfIdfModel m = fit_tfidf({seq({"a", "b"}), seq({"a"}), seq({"a", "c"})});
  const SparseVector one = vectorize(m, seq({"b"}));
  CHECK(one.nonZeros() == 1);
  CHECK(one.coeff(m.vocabulary.at("b")) == doctest::Approx(1.0));
  CHECK(vectorize(m, seq({"zzz", "qq"})).nonZeros() == 0);

  // tf counts times idf, then unit norm
  const SparseVector v = vectorize(m, seq({"a", "a", "c", "oov"}));
  const double wa = 2.0 * 1.0;
  const double wc = std::log(2.0) + 1.0;
  const double norm = std::sqrt(wa * wa + wc * wc);
  CHECK(v.coeff(m.vocabulary.at("a")) == doctest::Approx(wa / norm));
  CHECK(v.coeff(m.vocabulary.at("c")) == doctest::Approx(wc / norm));
  CHECK(v.norm() == doctest::Approx(1.0));
}

TEST_CASE("separable toy set is learned exactly") {
  std::vector<SparseVector> x;
  std::vector<bool> y;
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const double a = uniform(rng, -1.0, 1.0);
    double b = uniform(rng, -1.0, 1.0);
    if (std::abs(a + b) < 0.3) b += a + b > 0 ? 0.3 : -0.3;
    x.push_back(dense_to_sparse({a, b}));
    y.push_back(a + b > 0);
  }
  SvmConfig cfg;
  cfg.lambda = 1e-3;
  cfg.epochs = 200;
  const LinearSvm m = train_linear_svm(x, y, 2, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK((m.score(x[i]) > 0) == y[i]);

  REQUIRE(m.objective_history.size() == static_cast<std::size_t>(cfg.epochs) + 1);
  for (std::size_t k = 1; k < m.objective_history.size(); ++k) {
    CHECK(m.objective_history[k] <= m.objective_history[k - 1]);
  }
  CHECK(m.objective_history.back() == doctest::Approx(hinge_objective(m, x, y, cfg.lambda)));
}

TEST_CASE("one-sided labels give a stub") {
  std::vector<SparseVector> x = {dense_to_sparse({1, 0}), dense_to_sparse({0, 1})};
  const LinearSvm m = train_linear_svm(x, {false, false}, 2, {});
  CHECK(m.stub);
  CHECK(m.score(x[0]) < 0);
  CHECK_THROWS_AS(train_linear_svm(x, {true}, 2, {}), FallbackError);
  CHECK_THROWS_AS(train_linear_svm(x, {true, false}, 3, {}), FallbackError);
}

TEST_CASE("one-vs-all ensemble memorizes separable sentences") {
  const std::vector<TokenSequence> sentences = {seq({"sunny", "picnic"}), seq({"rainy", "funeral"}),
                                                seq({"scary", "night"}), seq({"sunny", "beach"}),
                                                seq({"cold", "funeral"}), seq({"dark", "night"})};
  const std::vector<EmotionVector> labels = {unit_emotion(Emotion::joy),     unit_emotion(Emotion::sadness),
                                             unit_emotion(Emotion::fear),    unit_emotion(Emotion::joy),
                                             unit_emotion(Emotion::sadness), unit_emotion(Emotion::fear)};
  const FallbackClassifier fb = FallbackClassifier::train(sentences, labels);
  for (std::size_t i = 0; i < sentences.size(); ++i) CHECK(fb.predict_emotions(sentences[i]) == labels[i]);

  // anger never occurs: stub, always 0
  CHECK(fb.svm().models[static_cast<std::size_t>(Emotion::anger)].stub);
  // zero vector: sign of each bias
  const EmotionVector z = fb.predict_emotions(seq({"unknown"}));
  for (int e = 0; e < k_num_emotions; ++e) {
    CHECK(z[e] == (fb.svm().models[static_cast<std::size_t>(e)].bias > 0 ? 1.0 : 0.0));
  }

  const FallbackClassifier back = FallbackClassifier::from_json(fb.to_json());
  for (const auto& s : sentences) CHECK(back.predict_emotions(s) == fb.predict_emotions(s));
  const auto dir = testing::scratch_dir("fallback");
  fb.save(dir / "fb.json");
  CHECK(FallbackClassifier::load(dir / "fb.json").tfidf().vocabulary == fb.tfidf().vocabulary);
  CHECK_THROWS_AS(FallbackClassifier::from_json("{\"format\":\"other\"}"), FallbackError);
}

TEST_CASE("average precision") {
  const PrCurve perfect = precision_recall({0.9, 0.8, 0.3, 0.1}, {true, true, false, false});
  CHECK(perfect.average_precision == doctest::Approx(1.0));
  CHECK(perfect.positives == 2);

  // hand case: ranks T F T -> 1/2 * 1 + 1/2 * 2/3
  const PrCurve mixed = precision_recall({0.9, 0.5, 0.2}, {true, false, true});
  CHECK(mixed.average_precision == doctest::Approx(0.5 + 1.0 / 3.0));

  CHECK(std::isnan(precision_recall({0.1, 0.2}, {false, false}).average_precision));

  Rng rng(11);
  std::vector<double> s(20000);
  std::vector<bool> l(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = uniform01(rng);
    l[i] = uniform01(rng) < 0.5;
  }
  const PrCurve random = precision_recall(s, l);
  const double rate = static_cast<double>(random.positives) / static_cast<double>(s.size());
  CHECK(std::abs(random.average_precision - rate) < 0.02);
}
