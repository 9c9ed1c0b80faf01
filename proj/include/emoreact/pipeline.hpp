#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emoreact/ensemble.hpp"
#include "emoreact/fallback.hpp"
#include "emoreact/lexicon.hpp"
#include "emoreact/miner.hpp"
#include "emoreact/models.hpp"
#include "emoreact/textprep.hpp"

namespace emoreact {

/// Locations of everything inference needs. Relative artifact names resolve
/// against `artifacts`.
struct ArtifactPaths {
  std::filesystem::path artifacts = "artifacts";
  std::filesystem::path emolex = "data/emolex.tsv";
  std::optional<std::filesystem::path> synonyms = std::filesystem::path("data/synonyms.tsv");
  std::filesystem::path embeddings;
  std::optional<std::filesystem::path> wordlists;

  std::filesystem::path fallback() const { return artifacts / "fallback.json"; }
  std::filesystem::path cnn_prefix() const { return artifacts / "cnn"; }
  std::filesystem::path rnn_prefix() const { return artifacts / "rnn"; }
  std::filesystem::path ensemble() const { return artifacts / "ensemble.json"; }
};

/// Inference over the full chain: networks, miner, ensemble.
struct Prediction {
  Eigen::VectorXd reactions;  // love, wow, haha, sad, angry
  EmotionVector emotions;
  std::vector<miner::TokenAnnotation> highlights;
  Eigen::VectorXd cnn;
  Eigen::VectorXd rnn;
  Eigen::VectorXd averaged;

  /// Response body of POST /predict, with fields in canonical order.
  std::string to_json() const;
};

struct PipelineComponents {
  Lexicon lexicon;
  std::optional<FallbackClassifier> fallback;
  EmbeddingTable embeddings{50};
  CnnModel<double> cnn{CnnConfig{}};
  LstmModel<double> rnn{LstmConfig{}};
  RegressionModel ensemble;
  miner::MinerOptions miner_options{};
  textprep::WordLists wordlists = textprep::WordLists::builtin();
};

class Pipeline {
 public:
  explicit Pipeline(PipelineComponents components);

  /// Loads lexicon (synonym-expanded when a table is given), embeddings and
  /// the trained networks and ensemble. The fallback classifier is optional.
  static Pipeline load(const ArtifactPaths& paths);

  Prediction predict(const std::string& text, const std::vector<std::string>& comments = {}) const;

  /// Network-side inputs of the ensemble for one post.
  EnsembleInput ensemble_input(const std::string& text, const std::vector<std::string>& comments) const;

  const PipelineComponents& components() const { return components_; }

  /// Artifact versions reported by GET /health.
  std::string versions_json() const;

 private:
  PipelineComponents components_;
};

/// Loads EmoLex and, when given, expands it with the synonym table.
Lexicon load_lexicon(const std::filesystem::path& emolex, const std::optional<std::filesystem::path>& synonyms);

}  // namespace emoreact
