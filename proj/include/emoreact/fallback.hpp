#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "emoreact/lexicon.hpp"
#include "emoreact/textprep.hpp"

namespace emoreact {

using SparseVector = Eigen::SparseVector<double>;

class FallbackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smoothed TF-IDF: idf(t) = ln((1 + N) / (1 + df(t))) + 1, raw term counts,
/// L2-normalized document vectors.
struct TfIdfModel {
  std::unordered_map<std::string, int> vocabulary;
  Eigen::VectorXd idf;
  std::size_t document_count = 0;

  Eigen::Index dimension() const { return idf.size(); }
};

TfIdfModel fit_tfidf(const std::vector<textprep::TokenSequence>& sentences);

/// Unit-norm TF-IDF vector, or exactly zero when no token is in the vocabulary.
SparseVector vectorize(const TfIdfModel& model, const textprep::TokenSequence& sentence);

struct SvmConfig {
  double lambda = 1e-4;
  int epochs = 100;
  std::uint64_t seed = 1;
  /// Initial SGD step; halved whenever an epoch would raise the objective.
  double eta0 = 0.5;
};

struct LinearSvm {
  Eigen::VectorXd weights;
  double bias = 0.0;
  /// Constant-negative model used when training labels were one-sided.
  bool stub = false;
  /// Regularized hinge objective after each accepted epoch (index 0 = initial).
  std::vector<double> objective_history;

  double score(const SparseVector& x) const;
};

/// Trains one model on binary labels (+1 / -1 encoded as true / false).
LinearSvm train_linear_svm(const std::vector<SparseVector>& features, const std::vector<bool>& labels,
                           Eigen::Index dimension, const SvmConfig& config);

/// Regularized hinge objective: lambda/2 |w|^2 + mean(max(0, 1 - y (w.x + b))).
double hinge_objective(const LinearSvm& model, const std::vector<SparseVector>& features,
                       const std::vector<bool>& labels, double lambda);

struct SvmEnsemble {
  std::array<LinearSvm, k_num_emotions> models;
  SvmConfig config;

  Eigen::Matrix<double, k_num_emotions, 1> scores(const SparseVector& x) const;
};

/// One-vs-all training, one model per emotion in canonical order. Labels are
/// binarized with `> 0`.
SvmEnsemble train_ova_svm(const std::vector<SparseVector>& features, const std::vector<EmotionVector>& labels,
                          Eigen::Index dimension, const SvmConfig& config = {});

/// Binary vector: emotion e is set iff model e scores above zero.
EmotionVector predict_emotions(const SvmEnsemble& svm, const SparseVector& x);

struct PrCurve {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> thresholds;
  /// Step-wise average precision; NaN when the test set has no positives.
  double average_precision = 0.0;
  std::size_t positives = 0;
};

/// Precision-recall points from sweeping the decision threshold over `scores`.
PrCurve precision_recall(const std::vector<double>& scores, const std::vector<bool>& labels);

struct PrReport {
  std::array<PrCurve, k_num_emotions> curves;
  /// Mean AP over emotions that have positives in the test set.
  double macro_average_precision = 0.0;
};

PrReport evaluate_pr(const SvmEnsemble& svm, const std::vector<SparseVector>& features,
                     const std::vector<EmotionVector>& labels);

/// TF-IDF model and SVM ensemble bundled for sentence-level inference.
class FallbackClassifier {
 public:
  FallbackClassifier() = default;
  FallbackClassifier(TfIdfModel tfidf, SvmEnsemble svm) : tfidf_(std::move(tfidf)), svm_(std::move(svm)) {}

  /// Fits TF-IDF on `sentences` and trains the ensemble against `labels`.
  static FallbackClassifier train(const std::vector<textprep::TokenSequence>& sentences,
                                  const std::vector<EmotionVector>& labels, const SvmConfig& config = {});

  EmotionVector predict_emotions(const textprep::TokenSequence& sentence) const;

  const TfIdfModel& tfidf() const { return tfidf_; }
  const SvmEnsemble& svm() const { return svm_; }

  void save(const std::filesystem::path& path) const;
  static FallbackClassifier load(const std::filesystem::path& path);

  std::string to_json() const;
  static FallbackClassifier from_json(const std::string& text);

 private:
  TfIdfModel tfidf_;
  SvmEnsemble svm_;
};

}  // namespace emoreact
