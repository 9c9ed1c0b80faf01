#include "emoreact/fallback.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "emoreact/random.hpp"

namespace emoreact {

TfIdfModel fit_tfidf(const std::vector<textprep::TokenSequence>& sentences) {
  TfIdfModel model;
  std::vector<std::size_t> df;
  std::vector<int> seen_in;  // last document index that touched each term
  bool any = false;
  for (std::size_t d = 0; d < sentences.size(); ++d) {
    for (const auto& tok : sentences[d].tokens) {
      any = true;
      auto [it, inserted] = model.vocabulary.try_emplace(tok, static_cast<int>(df.size()));
      if (inserted) {
        df.push_back(0);
        seen_in.push_back(-1);
      }
      const auto idx = static_cast<std::size_t>(it->second);
      if (seen_in[idx] != static_cast<int>(d)) {
        seen_in[idx] = static_cast<int>(d);
        ++df[idx];
      }
    }
  }
  if (!any) throw FallbackError("fit_tfidf: no tokens in the training sentences");
  model.document_count = sentences.size();
  const double n = static_cast<double>(model.document_count);
  model.idf.resize(static_cast<Eigen::Index>(df.size()));
  for (std::size_t i = 0; i < df.size(); ++i) {
    model.idf[static_cast<Eigen::Index>(i)] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return model;
}

SparseVector vectorize(const TfIdfModel& model, const textprep::TokenSequence& sentence) {
  std::map<int, double> counts;
  for (const auto& tok : sentence.tokens) {
    if (auto it = model.vocabulary.find(tok); it != model.vocabulary.end()) counts[it->second] += 1.0;
  }
  SparseVector v(model.dimension());
  if (counts.empty()) return v;
  double norm2 = 0.0;
  for (auto& [idx, tf] : counts) {
    tf *= model.idf[idx];
    norm2 += tf * tf;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  v.reserve(static_cast<Eigen::Index>(counts.size()));
  for (const auto& [idx, w] : counts) v.insertBack(idx) = w * inv;
  return v;
}

double LinearSvm::score(const SparseVector& x) const {
  double s = bias;
  for (SparseVector::InnerIterator it(x); it; ++it) {
    if (it.index() < weights.size()) s += weights[it.index()] * it.value();
  }
  return s;
}

double hinge_objective(const LinearSvm& model, const std::vector<SparseVector>& features,
                       const std::vector<bool>& labels, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double y = labels[i] ? 1.0 : -1.0;
    loss += std::max(0.0, 1.0 - y * model.score(features[i]));
  }
  const double mean = features.empty() ? 0.0 : loss / static_cast<double>(features.size());
  return 0.5 * lambda * model.weights.squaredNorm() + mean;
}

namespace {

// Weights are kept as scale * direction so the L2 shrink step is O(1).
struct SgdState {
  Eigen::VectorXd direction;
  double scale = 1.0;
  double bias = 0.0;
  long step = 0;

  LinearSvm snapshot() const {
    LinearSvm m;
    m.weights = direction * scale;
    m.bias = bias;
    return m;
  }
};

}  // namespace

LinearSvm train_linear_svm(const std::vector<SparseVector>& features, const std::vector<bool>& labels,
                           Eigen::Index dimension, const SvmConfig& config) {
  if (features.size() != labels.size()) throw FallbackError("train_linear_svm: feature/label count mismatch");
  for (const auto& x : features) {
    if (x.size() != dimension) throw FallbackError("train_linear_svm: feature dimension mismatch");
  }
  if (!(config.lambda > 0.0) || config.epochs < 0 || !(config.eta0 > 0.0)) {
    throw FallbackError("train_linear_svm: invalid configuration");
  }
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0 || positives == labels.size()) {
    LinearSvm stub;
    stub.weights = Eigen::VectorXd::Zero(dimension);
    stub.bias = -1.0;
    stub.stub = true;
    return stub;
  }

  const std::size_t n = features.size();
  SgdState state{Eigen::VectorXd::Zero(dimension)};
  double eta0 = config.eta0;
  LinearSvm current = state.snapshot();
  double best = hinge_objective(current, features, labels, config.lambda);
  std::vector<double> history{best};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const SgdState saved = state;
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t i : order) {
      const double eta = eta0 / (1.0 + config.lambda * eta0 * static_cast<double>(state.step));
      state.scale *= 1.0 - eta * config.lambda;
      if (state.scale < 1e-9) {
        state.direction *= state.scale;
        state.scale = 1.0;
      }
      const SparseVector& x = features[i];
      const double y = labels[i] ? 1.0 : -1.0;
      double dot = 0.0;
      for (SparseVector::InnerIterator it(x); it; ++it) dot += state.direction[it.index()] * it.value();
      if (y * (state.scale * dot + state.bias) < 1.0) {
        const double step = eta * y / state.scale;
        for (SparseVector::InnerIterator it(x); it; ++it) state.direction[it.index()] += step * it.value();
        state.bias += eta * y;
      }
      ++state.step;
    }
    LinearSvm candidate = state.snapshot();
    const double obj = hinge_objective(candidate, features, labels, config.lambda);
    if (obj <= best) {
      best = obj;
      current = std::move(candidate);
    } else {
      // Reject the epoch and retry later epochs with a smaller step.
      state = saved;
      eta0 *= 0.5;
    }
    history.push_back(best);
  }
  current.objective_history = std::move(history);
  return current;
}

Eigen::Matrix<double, k_num_emotions, 1> SvmEnsemble::scores(const SparseVector& x) const {
  Eigen::Matrix<double, k_num_emotions, 1> s;
  for (int e = 0; e < k_num_emotions; ++e) s[e] = models[static_cast<std::size_t>(e)].score(x);
  return s;
}

SvmEnsemble train_ova_svm(const std::vector<SparseVector>& features, const std::vector<EmotionVector>& labels,
                          Eigen::Index dimension, const SvmConfig& config) {
  if (features.size() != labels.size()) throw FallbackError("train_ova_svm: feature/label count mismatch");
  for (const auto& x : features) {
    if (x.size() != dimension) throw FallbackError("train_ova_svm: feature dimension mismatch");
  }
  SvmEnsemble ensemble;
  ensemble.config = config;
  std::array<std::future<LinearSvm>, k_num_emotions> jobs;
  for (int e = 0; e < k_num_emotions; ++e) {
    std::vector<bool> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i][e] > 0.0;
    SvmConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(e);
    jobs[static_cast<std::size_t>(e)] =
        std::async(std::launch::async, [&features, y = std::move(y), dimension, cfg]() {
          return train_linear_svm(features, y, dimension, cfg);
        });
  }
  for (int e = 0; e < k_num_emotions; ++e) {
    ensemble.models[static_cast<std::size_t>(e)] = jobs[static_cast<std::size_t>(e)].get();
    if (ensemble.models[static_cast<std::size_t>(e)].stub) {
      std::clog << "train_ova_svm: labels for '" << k_emotion_names[static_cast<std::size_t>(e)]
                << "' are one-sided; using a constant-negative model\n";
    }
  }
  return ensemble;
}

EmotionVector predict_emotions(const SvmEnsemble& svm, const SparseVector& x) {
  return (svm.scores(x).array() > 0.0).cast<double>().matrix();
}

PrCurve precision_recall(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw FallbackError("precision_recall: size mismatch");
  PrCurve curve;
  curve.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double p = static_cast<double>(curve.positives);
  double tp = 0.0;
  double fp = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    while (k < order.size() && scores[order[k]] == threshold) {
      if (labels[order[k]]) tp += 1.0;
      else fp += 1.0;
      ++k;
    }
    const double precision = tp / (tp + fp);
    const double recall = p > 0 ? tp / p : 0.0;
    curve.precision.push_back(precision);
    curve.recall.push_back(recall);
    curve.thresholds.push_back(threshold);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  curve.average_precision = p > 0 ? ap : std::numeric_limits<double>::quiet_NaN();
  return curve;
}

PrReport evaluate_pr(const SvmEnsemble& svm, const std::vector<SparseVector>& features,
                     const std::vector<EmotionVector>& labels) {
  if (features.empty()) throw FallbackError("evaluate_pr: empty test set");
  if (features.size() != labels.size()) throw FallbackError("evaluate_pr: feature/label count mismatch");
  PrReport report;
  double sum = 0.0;
  int counted = 0;
  for (int e = 0; e < k_num_emotions; ++e) {
    std::vector<double> s(features.size());
    std::vector<bool> y(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
      s[i] = svm.models[static_cast<std::size_t>(e)].score(features[i]);
      y[i] = labels[i][e] > 0.0;
    }
    report.curves[static_cast<std::size_t>(e)] = precision_recall(s, y);
    const double ap = report.curves[static_cast<std::size_t>(e)].average_precision;
    if (!std::isnan(ap)) {
      sum += ap;
      ++counted;
    }
  }
  report.macro_average_precision = counted > 0 ? sum / counted : std::numeric_limits<double>::quiet_NaN();
  return report;
}

FallbackClassifier FallbackClassifier::train(const std::vector<textprep::TokenSequence>& sentences,
                                             const std::vector<EmotionVector>& labels, const SvmConfig& config) {
  TfIdfModel tfidf = fit_tfidf(sentences);
  std::vector<SparseVector> x;
  x.reserve(sentences.size());
  for (const auto& s : sentences) x.push_back(vectorize(tfidf, s));
  SvmEnsemble svm = train_ova_svm(x, labels, tfidf.dimension(), config);
  return FallbackClassifier(std::move(tfidf), std::move(svm));
}

EmotionVector FallbackClassifier::predict_emotions(const textprep::TokenSequence& sentence) const {
  return emoreact::predict_emotions(svm_, vectorize(tfidf_, sentence));
}

std::string FallbackClassifier::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "emoreact-fallback";
  j["version"] = 1;
  std::vector<std::string> terms(static_cast<std::size_t>(tfidf_.dimension()));
  for (const auto& [term, idx] : tfidf_.vocabulary) terms[static_cast<std::size_t>(idx)] = term;
  j["tfidf"]["documents"] = tfidf_.document_count;
  j["tfidf"]["vocabulary"] = terms;
  j["tfidf"]["idf"] = std::vector<double>(tfidf_.idf.data(), tfidf_.idf.data() + tfidf_.idf.size());
  j["svm"]["lambda"] = svm_.config.lambda;
  j["svm"]["epochs"] = svm_.config.epochs;
  j["svm"]["seed"] = svm_.config.seed;
  j["svm"]["eta0"] = svm_.config.eta0;
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (int e = 0; e < k_num_emotions; ++e) {
    const LinearSvm& m = svm_.models[static_cast<std::size_t>(e)];
    nlohmann::ordered_json mj;
    mj["emotion"] = k_emotion_names[static_cast<std::size_t>(e)];
    mj["stub"] = m.stub;
    mj["bias"] = m.bias;
    mj["weights"] = std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size());
    models.push_back(mj);
  }
  j["svm"]["models"] = models;
  return j.dump();
}

FallbackClassifier FallbackClassifier::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "emoreact-fallback") throw FallbackError("not a fallback model file");
    if (j.at("version").get<int>() != 1) throw FallbackError("unsupported fallback model version");
    TfIdfModel tfidf;
    tfidf.document_count = j.at("tfidf").at("documents").get<std::size_t>();
    const auto terms = j.at("tfidf").at("vocabulary").get<std::vector<std::string>>();
    const auto idf = j.at("tfidf").at("idf").get<std::vector<double>>();
    if (terms.size() != idf.size()) throw FallbackError("vocabulary and idf sizes differ");
    for (std::size_t i = 0; i < terms.size(); ++i) tfidf.vocabulary.emplace(terms[i], static_cast<int>(i));
    tfidf.idf = Eigen::Map<const Eigen::VectorXd>(idf.data(), static_cast<Eigen::Index>(idf.size()));

    SvmEnsemble svm;
    const auto& sj = j.at("svm");
    svm.config.lambda = sj.at("lambda").get<double>();
    svm.config.epochs = sj.at("epochs").get<int>();
    svm.config.seed = sj.at("seed").get<std::uint64_t>();
    svm.config.eta0 = sj.at("eta0").get<double>();
    const auto& models = sj.at("models");
    if (models.size() != k_num_emotions) throw FallbackError("expected one model per emotion");
    for (std::size_t e = 0; e < k_num_emotions; ++e) {
      const auto& mj = models[e];
      if (mj.at("emotion") != k_emotion_names[e]) throw FallbackError("models are not in canonical emotion order");
      const auto w = mj.at("weights").get<std::vector<double>>();
      if (w.size() != terms.size()) throw FallbackError("weight vector length differs from vocabulary size");
      svm.models[e].weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      svm.models[e].bias = mj.at("bias").get<double>();
      svm.models[e].stub = mj.at("stub").get<bool>();
    }
    return FallbackClassifier(std::move(tfidf), std::move(svm));
  } catch (const nlohmann::json::exception& e) {
    throw FallbackError(std::string("malformed fallback model: ") + e.what());
  }
}

void FallbackClassifier::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FallbackError("cannot write " + path.string());
  out << to_json() << '\n';
}

FallbackClassifier FallbackClassifier::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FallbackError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace emoreact
