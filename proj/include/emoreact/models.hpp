#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "emoreact/dataset.hpp"
#include "emoreact/numerics.hpp"
#include "emoreact/textprep.hpp"

namespace emoreact {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Embeddings

/// Frozen word vectors, stored as float rows.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dimension = 50);

  int dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }

  /// Returns false (and keeps the first vector) when `word` is already present.
  bool add(std::string word, std::span<const float> vector);

  /// Row index of `word`, or -1 when out of vocabulary.
  int index_of(std::string_view word) const;

  Eigen::Map<const Eigen::RowVectorXf> row(int index) const;

 private:
  int dimension_;
  std::unordered_map<std::string, int> index_;
  std::vector<float> data_;
};

struct GloveReport {
  std::size_t lines = 0;
  std::size_t loaded = 0;
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
  std::size_t filtered = 0;
};

/// Reads `word v1 ... vdim` lines. Lines with the wrong arity or unparsable
/// numbers are skipped and counted. With `keep`, only listed words are stored.
EmbeddingTable load_glove(const std::filesystem::path& path, int dimension, GloveReport* report = nullptr,
                          const std::unordered_set<std::string>* keep = nullptr);
EmbeddingTable parse_glove(std::istream& in, int dimension, GloveReport* report = nullptr,
                           const std::unordered_set<std::string>* keep = nullptr);

template <typename Scalar>
struct EmbeddedPost {
  nn::Matrix<Scalar> rows;  // max_len x dim, zero beyond valid_length
  Eigen::Index valid_length = 1;
};

/// Embeds token rows (-1 = out of vocabulary, zero vector) and pads or
/// truncates to `max_len`. An empty input yields one zero row.
template <typename Scalar>
EmbeddedPost<Scalar> embed_rows(std::span<const int> token_rows, const EmbeddingTable& table, Eigen::Index max_len);

template <typename Scalar>
EmbeddedPost<Scalar> embed_and_pad(const textprep::TokenSequence& tokens, const EmbeddingTable& table,
                                   Eigen::Index max_len);

std::vector<int> token_rows(const textprep::TokenSequence& tokens, const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Configuration

enum class ModelKind { cnn, rnn };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct TrainingOptions {
  int batch_size = 16;
  int epochs = 50;
  /// Epochs without validation improvement before stopping; 0 disables.
  int patience = 10;
  double dropout = 0.5;
  double l2 = 1e-3;
  bool regularize_biases = false;
  nn::OptimizerConfig optimizer{};
};

/// How the filter count is read: per filter height, or split across heights.
enum class FilterCountMode { per_height, total };

struct CnnConfig {
  std::vector<int> heights{3, 4, 5};
  int filters = 40;
  FilterCountMode filter_mode = FilterCountMode::per_height;
  int embedding_dim = 50;
  int classes = 5;
  int max_len = 200;
  TrainingOptions training{};

  int filters_for(std::size_t height_index) const;
  int total_filters() const;
  int max_height() const;
  void validate() const;
};

struct LstmConfig {
  int hidden = 50;
  int embedding_dim = 50;
  int classes = 5;
  int max_len = 200;
  TrainingOptions training{.batch_size = 100};

  void validate() const;
};

// ---------------------------------------------------------------------------
// Networks

template <typename Scalar>
class CnnModel {
 public:
  using Config = CnnConfig;
  using scalar_type = Scalar;
  static constexpr ModelKind kind = ModelKind::cnn;

  explicit CnnModel(CnnConfig config);

  /// Glorot-uniform weights, zero biases.
  void initialize(std::uint64_t seed);

  const CnnConfig& config() const { return config_; }
  nn::ParameterSet<Scalar>& params() { return params_; }
  const nn::ParameterSet<Scalar>& params() const { return params_; }

  /// Logits (1 x classes) for one post, using parameters bound on `tape`.
  nn::Var<Scalar> logits(nn::Tape<Scalar>& tape, std::span<const nn::Var<Scalar>> bound,
                         const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const;

  /// Reaction distribution; dropout is active only with `train_mode`.
  nn::RowVector<Scalar> forward(const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const;
  nn::RowVector<Scalar> predict(const EmbeddedPost<Scalar>& post) const;

 private:
  CnnConfig config_;
  nn::ParameterSet<Scalar> params_;
};

template <typename Scalar>
class LstmModel {
 public:
  using Config = LstmConfig;
  using scalar_type = Scalar;
  static constexpr ModelKind kind = ModelKind::rnn;

  explicit LstmModel(LstmConfig config);

  /// Glorot-uniform weights, zero biases except a forget-gate bias of 1.
  void initialize(std::uint64_t seed);

  const LstmConfig& config() const { return config_; }
  nn::ParameterSet<Scalar>& params() { return params_; }
  const nn::ParameterSet<Scalar>& params() const { return params_; }

  nn::Var<Scalar> logits(nn::Tape<Scalar>& tape, std::span<const nn::Var<Scalar>> bound,
                         const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const;

  nn::RowVector<Scalar> forward(const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const;
  nn::RowVector<Scalar> predict(const EmbeddedPost<Scalar>& post) const;

 private:
  LstmConfig config_;
  nn::ParameterSet<Scalar> params_;
};

// ---------------------------------------------------------------------------
// Training data

struct EncodedPost {
  std::string id;
  std::vector<int> token_rows;
  Eigen::VectorXd target;
};

struct EncodedCorpus {
  std::vector<EncodedPost> posts;
  int classes = 5;
  /// Posts skipped because every counted reaction was zero.
  std::size_t skipped_degenerate = 0;

  std::size_t size() const { return posts.size(); }
  bool empty() const { return posts.empty(); }
  /// Longest token sequence, at least 1.
  int longest() const;
};

EncodedCorpus encode_corpus(const Corpus& corpus, const EmbeddingTable& table, bool include_like,
                            const textprep::WordLists& lists = textprep::WordLists::builtin());

/// Message tokens fed to the networks: preprocess then tokenize.
textprep::TokenSequence message_tokens(std::string_view message,
                                       const textprep::WordLists& lists = textprep::WordLists::builtin());

inline constexpr int k_max_len_cap = 200;

/// Longest training post, capped at `cap` and raised to at least `floor`.
int choose_max_len(const EncodedCorpus& train, int floor, int cap = k_max_len_cap);

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  /// Fraction of posts whose predicted argmax differs from the target argmax
  /// (first maximum wins ties).
  double misclass_rate = 0.0;
  /// Mean over posts and classes of the squared distribution difference.
  double true_mse = 0.0;
  double mean_cross_entropy = 0.0;
  std::size_t count = 0;
};

Eigen::Index argmax_first(const Eigen::Ref<const Eigen::VectorXd>& v);

Metrics score_distributions(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> targets);

template <typename Model>
std::vector<Eigen::VectorXd> predict_all(const Model& model, const EncodedCorpus& corpus, const EmbeddingTable& table);

template <typename Model>
Metrics evaluate(const Model& model, const EncodedCorpus& corpus, const EmbeddingTable& table);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_misclass = 0.0;
  double val_misclass = 0.0;
};

struct TrainingHistory {
  /// Entry 0 is measured before the first update.
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  std::string to_csv() const;
  std::string to_json() const;
};

/// Minibatch training of `model` on soft-label cross-entropy plus L2. With a
/// non-empty `val`, the parameters of the best validation epoch are kept and
/// training stops after `patience` epochs without improvement.
template <typename Model>
TrainingHistory train(Model& model, const EncodedCorpus& train, const EncodedCorpus& val, const EmbeddingTable& table,
                      std::uint64_t seed);

struct MetricSummary {
  Metrics mean;
  Metrics stddev;
  std::vector<Metrics> runs;
};

/// Mean and sample standard deviation (n - 1) of each metric.
MetricSummary aggregate_runs(std::span<const Metrics> runs);

struct CrossValidationOptions {
  int runs = 10;
  std::uint64_t base_seed = 1;
  SplitFractions fractions{};
  bool include_like = false;
};

/// Independent seeded split + training per run, scored on each test split.
MetricSummary cross_validate(ModelKind kind, const Corpus& corpus, const EmbeddingTable& table,
                             const CnnConfig& cnn, const LstmConfig& lstm, const CrossValidationOptions& options,
                             const textprep::WordLists& lists = textprep::WordLists::builtin());

// ---------------------------------------------------------------------------
// Persistence: `<prefix>.ckpt` holds the tensors, `<prefix>.json` the config.

std::string cnn_config_json(const CnnConfig& config);
CnnConfig cnn_config_from_json(const std::string& text);
std::string lstm_config_json(const LstmConfig& config);
LstmConfig lstm_config_from_json(const std::string& text);

template <typename Scalar>
void save_model(const CnnModel<Scalar>& model, const std::filesystem::path& prefix);
template <typename Scalar>
void save_model(const LstmModel<Scalar>& model, const std::filesystem::path& prefix);

template <typename Scalar>
CnnModel<Scalar> load_cnn(const std::filesystem::path& prefix);
template <typename Scalar>
LstmModel<Scalar> load_lstm(const std::filesystem::path& prefix);

}  // namespace emoreact
