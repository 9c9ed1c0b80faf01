#include "emoreact/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "emoreact/checkpoint.hpp"
#include "emoreact/random.hpp"

namespace emoreact {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingTable::EmbeddingTable(int dimension) : dimension_(dimension) {
  if (dimension < 1) throw ModelError("embedding dimension must be >= 1");
}

bool EmbeddingTable::add(std::string word, std::span<const float> vector) {
  if (static_cast<int>(vector.size()) != dimension_) throw ModelError("embedding vector has wrong dimension");
  const int next = static_cast<int>(index_.size());
  auto [it, inserted] = index_.try_emplace(std::move(word), next);
  if (!inserted) return false;
  data_.insert(data_.end(), vector.begin(), vector.end());
  return true;
}

int EmbeddingTable::index_of(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? -1 : it->second;
}

Eigen::Map<const Eigen::RowVectorXf> EmbeddingTable::row(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= index_.size()) throw ModelError("embedding row out of range");
  return {data_.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dimension_), dimension_};
}

EmbeddingTable parse_glove(std::istream& in, int dimension, GloveReport* report,
                           const std::unordered_set<std::string>* keep) {
  EmbeddingTable table(dimension);
  GloveReport local;
  std::string line;
  std::vector<float> values(static_cast<std::size_t>(dimension));
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++local.lines;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0) {
      ++local.malformed;
      continue;
    }
    std::string word = line.substr(0, space);
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    int parsed = 0;
    bool ok = true;
    while (ok) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (parsed == dimension) {
        ok = false;
        break;
      }
      float v = 0.0f;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || (next < end && *next != ' ') || !std::isfinite(v)) {
        ok = false;
        break;
      }
      values[static_cast<std::size_t>(parsed++)] = v;
      p = next;
    }
    if (!ok || parsed != dimension) {
      ++local.malformed;
      continue;
    }
    if (keep != nullptr && !keep->contains(word)) {
      ++local.filtered;
      continue;
    }
    if (table.add(std::move(word), values)) ++local.loaded;
    else ++local.duplicates;
  }
  if (report != nullptr) *report = local;
  if (local.loaded == 0 && local.filtered == 0) throw ModelError("embedding file has no valid lines");
  return table;
}

EmbeddingTable load_glove(const std::filesystem::path& path, int dimension, GloveReport* report,
                          const std::unordered_set<std::string>* keep) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open embedding file " + path.string());
  return parse_glove(in, dimension, report, keep);
}

std::vector<int> token_rows(const textprep::TokenSequence& tokens, const EmbeddingTable& table) {
  std::vector<int> rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens.tokens) rows.push_back(table.index_of(t));
  return rows;
}

template <typename Scalar>
EmbeddedPost<Scalar> embed_rows(std::span<const int> rows, const EmbeddingTable& table, Eigen::Index max_len) {
  if (max_len < 1) throw ModelError("max_len must be >= 1");
  EmbeddedPost<Scalar> post;
  post.rows = nn::Matrix<Scalar>::Zero(max_len, table.dimension());
  const Eigen::Index n = std::min<Eigen::Index>(static_cast<Eigen::Index>(rows.size()), max_len);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r >= 0) post.rows.row(i) = table.row(r).template cast<Scalar>();
  }
  post.valid_length = std::max<Eigen::Index>(n, 1);
  return post;
}

template <typename Scalar>
EmbeddedPost<Scalar> embed_and_pad(const textprep::TokenSequence& tokens, const EmbeddingTable& table,
                                   Eigen::Index max_len) {
  const auto rows = token_rows(tokens, table);
  return embed_rows<Scalar>(rows, table, max_len);
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view model_kind_name(ModelKind kind) { return kind == ModelKind::cnn ? "cnn" : "rnn"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "cnn") return ModelKind::cnn;
  if (name == "rnn" || name == "lstm") return ModelKind::rnn;
  throw ModelError("unknown model kind '" + std::string(name) + "'");
}

namespace {

void validate_training(const TrainingOptions& t) {
  if (t.batch_size < 1) throw ModelError("batch size must be >= 1");
  if (t.epochs < 0) throw ModelError("epochs must be >= 0");
  if (t.patience < 0) throw ModelError("patience must be >= 0");
  if (!(t.dropout >= 0.0 && t.dropout < 1.0)) throw ModelError("dropout must lie in [0, 1)");
  if (!(t.l2 >= 0.0)) throw ModelError("l2 must be >= 0");
  if (!(t.optimizer.learning_rate > 0.0)) throw ModelError("learning rate must be > 0");
}

void validate_classes(int classes) {
  if (classes != 5 && classes != 6) throw ModelError("classes must be 5 or 6");
}

}  // namespace

int CnnConfig::filters_for(std::size_t height_index) const {
  if (height_index >= heights.size()) throw ModelError("filter height index out of range");
  if (filter_mode == FilterCountMode::per_height) return filters;
  const int n = static_cast<int>(heights.size());
  const int base = filters / n;
  return base + (static_cast<int>(height_index) < filters % n ? 1 : 0);
}

int CnnConfig::total_filters() const {
  int total = 0;
  for (std::size_t i = 0; i < heights.size(); ++i) total += filters_for(i);
  return total;
}

int CnnConfig::max_height() const {
  return heights.empty() ? 0 : *std::max_element(heights.begin(), heights.end());
}

void CnnConfig::validate() const {
  if (heights.empty()) throw ModelError("at least one filter height is required");
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (heights[i] < 1) throw ModelError("filter heights must be >= 1");
    for (std::size_t j = 0; j < i; ++j) {
      if (heights[i] == heights[j]) throw ModelError("duplicate filter height");
    }
  }
  if (filters < 1) throw ModelError("filter count must be >= 1");
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (filters_for(i) < 1) throw ModelError("filter count too small for the number of heights");
  }
  if (embedding_dim < 1) throw ModelError("embedding dimension must be >= 1");
  validate_classes(classes);
  if (max_len < max_height()) throw ModelError("max_len must be >= the largest filter height");
  validate_training(training);
}

void LstmConfig::validate() const {
  if (hidden < 1) throw ModelError("hidden units must be >= 1");
  if (embedding_dim < 1) throw ModelError("embedding dimension must be >= 1");
  validate_classes(classes);
  if (max_len < 1) throw ModelError("max_len must be >= 1");
  validate_training(training);
}

// ---------------------------------------------------------------------------
// Networks

namespace {

template <typename Scalar>
void glorot(nn::Matrix<Scalar>& m, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<Scalar>(uniform(rng, -limit, limit));
  }
}

template <typename Scalar>
nn::RowVector<Scalar> softmax_row(const nn::Matrix<Scalar>& logits) {
  return nn::softmax<Scalar>(logits).row(0);
}

template <typename Scalar>
void check_input(const EmbeddedPost<Scalar>& post, int dim) {
  if (post.rows.cols() != dim) throw ModelError("embedded post has wrong dimension");
  if (post.valid_length < 1 || post.valid_length > post.rows.rows()) throw ModelError("invalid valid_length");
}

}  // namespace

template <typename Scalar>
CnnModel<Scalar>::CnnModel(CnnConfig config) : config_(std::move(config)) {
  config_.validate();
  const int d = config_.embedding_dim;
  for (std::size_t i = 0; i < config_.heights.size(); ++i) {
    const int h = config_.heights[i];
    const int f = config_.filters_for(i);
    params_.add("conv" + std::to_string(h) + ".weight", nn::Matrix<Scalar>::Zero(f, h * d), true);
    params_.add("conv" + std::to_string(h) + ".bias", nn::Matrix<Scalar>::Zero(1, f), config_.training.regularize_biases);
  }
  params_.add("output.weight", nn::Matrix<Scalar>::Zero(config_.total_filters(), config_.classes), true);
  params_.add("output.bias", nn::Matrix<Scalar>::Zero(1, config_.classes), config_.training.regularize_biases);
}

template <typename Scalar>
void CnnModel<Scalar>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  const int d = config_.embedding_dim;
  std::size_t k = 0;
  for (std::size_t i = 0; i < config_.heights.size(); ++i) {
    auto& w = params_[k++].value;
    glorot(w, static_cast<double>(config_.heights[i] * d), static_cast<double>(config_.filters_for(i)), rng);
    params_[k++].value.setZero();
  }
  glorot(params_[k++].value, config_.total_filters(), config_.classes, rng);
  params_[k].value.setZero();
}

template <typename Scalar>
nn::Var<Scalar> CnnModel<Scalar>::logits(nn::Tape<Scalar>& tape, std::span<const nn::Var<Scalar>> bound,
                                         const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const {
  check_input(post, config_.embedding_dim);
  if (bound.size() != params_.size()) throw ModelError("bound parameter count mismatch");
  const Eigen::Index hmax = config_.max_height();
  // Short posts are zero-extended to the largest filter height; padding
  // content never reaches the convolution.
  const Eigen::Index used = std::max<Eigen::Index>(post.valid_length, hmax);
  nn::Matrix<Scalar> rows = nn::Matrix<Scalar>::Zero(used, post.rows.cols());
  rows.topRows(post.valid_length) = post.rows.topRows(post.valid_length);
  nn::Var<Scalar> x = tape.constant(std::move(rows));

  std::vector<nn::Var<Scalar>> pooled;
  for (std::size_t i = 0; i < config_.heights.size(); ++i) {
    const Eigen::Index h = config_.heights[i];
    nn::Var<Scalar> conv = nn::relu(nn::conv1d_valid(x, bound[2 * i], bound[2 * i + 1]));
    pooled.push_back(nn::masked_max_pool(conv, std::max<Eigen::Index>(post.valid_length - h + 1, 1)));
  }
  nn::Var<Scalar> features = nn::concat_cols<Scalar>(pooled);
  features = nn::dropout(features, config_.training.dropout, rng, train_mode);
  const std::size_t out = 2 * config_.heights.size();
  return nn::add_row(nn::matmul(features, bound[out]), bound[out + 1]);
}

template <typename Scalar>
nn::RowVector<Scalar> CnnModel<Scalar>::forward(const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const {
  nn::Tape<Scalar> tape;
  std::vector<nn::Var<Scalar>> bound;
  for (const auto& p : params_) bound.push_back(tape.constant(p.value));
  return softmax_row<Scalar>(logits(tape, bound, post, train_mode, rng).value());
}

template <typename Scalar>
nn::RowVector<Scalar> CnnModel<Scalar>::predict(const EmbeddedPost<Scalar>& post) const {
  Rng rng(0);
  return forward(post, false, rng);
}

template <typename Scalar>
LstmModel<Scalar>::LstmModel(LstmConfig config) : config_(std::move(config)) {
  config_.validate();
  const int h = config_.hidden;
  params_.add("lstm.input_weight", nn::Matrix<Scalar>::Zero(config_.embedding_dim, 4 * h), true);
  params_.add("lstm.recurrent_weight", nn::Matrix<Scalar>::Zero(h, 4 * h), true);
  params_.add("lstm.bias", nn::Matrix<Scalar>::Zero(1, 4 * h), config_.training.regularize_biases);
  params_.add("output.weight", nn::Matrix<Scalar>::Zero(h, config_.classes), true);
  params_.add("output.bias", nn::Matrix<Scalar>::Zero(1, config_.classes), config_.training.regularize_biases);
}

template <typename Scalar>
void LstmModel<Scalar>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  const int h = config_.hidden;
  glorot(params_[0].value, config_.embedding_dim, 4.0 * h, rng);
  glorot(params_[1].value, h, 4.0 * h, rng);
  params_[2].value.setZero();
  params_[2].value.middleCols(h, h).setConstant(Scalar(1));
  glorot(params_[3].value, h, config_.classes, rng);
  params_[4].value.setZero();
}

template <typename Scalar>
nn::Var<Scalar> LstmModel<Scalar>::logits(nn::Tape<Scalar>& tape, std::span<const nn::Var<Scalar>> bound,
                                          const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const {
  check_input(post, config_.embedding_dim);
  if (bound.size() != params_.size()) throw ModelError("bound parameter count mismatch");
  const nn::LstmWeights<Scalar> w{bound[0], bound[1], bound[2]};
  nn::LstmState<Scalar> state{tape.constant(nn::Matrix<Scalar>::Zero(1, config_.hidden)),
                              tape.constant(nn::Matrix<Scalar>::Zero(1, config_.hidden))};
  for (Eigen::Index t = 0; t < post.valid_length; ++t) {
    state = nn::lstm_step(tape.constant(post.rows.row(t)), state, w);
  }
  nn::Var<Scalar> h = nn::dropout(state.hidden, config_.training.dropout, rng, train_mode);
  return nn::add_row(nn::matmul(h, bound[3]), bound[4]);
}

template <typename Scalar>
nn::RowVector<Scalar> LstmModel<Scalar>::forward(const EmbeddedPost<Scalar>& post, bool train_mode, Rng& rng) const {
  nn::Tape<Scalar> tape;
  std::vector<nn::Var<Scalar>> bound;
  for (const auto& p : params_) bound.push_back(tape.constant(p.value));
  return softmax_row<Scalar>(logits(tape, bound, post, train_mode, rng).value());
}

template <typename Scalar>
nn::RowVector<Scalar> LstmModel<Scalar>::predict(const EmbeddedPost<Scalar>& post) const {
  Rng rng(0);
  return forward(post, false, rng);
}

// ---------------------------------------------------------------------------
// Training data

int EncodedCorpus::longest() const {
  std::size_t n = 1;
  for (const auto& p : posts) n = std::max(n, p.token_rows.size());
  return static_cast<int>(n);
}

textprep::TokenSequence message_tokens(std::string_view message, const textprep::WordLists& lists) {
  return textprep::tokenize(textprep::preprocess(message), lists);
}

EncodedCorpus encode_corpus(const Corpus& corpus, const EmbeddingTable& table, bool include_like,
                            const textprep::WordLists& lists) {
  EncodedCorpus out;
  out.classes = include_like ? 6 : 5;
  out.posts.reserve(corpus.size());
  for (const auto& post : corpus.posts) {
    Eigen::VectorXd target;
    try {
      target = reaction_distribution(post, include_like).weights;
    } catch (const DegenerateDistribution&) {
      ++out.skipped_degenerate;
      continue;
    }
    out.posts.push_back({post.id, token_rows(message_tokens(post.message, lists), table), std::move(target)});
  }
  return out;
}

int choose_max_len(const EncodedCorpus& train, int floor, int cap) {
  if (cap < 1) throw ModelError("max_len cap must be >= 1");
  return std::max(std::min(train.longest(), cap), std::max(floor, 1));
}

// ---------------------------------------------------------------------------
// Metrics

Eigen::Index argmax_first(const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() == 0) throw ModelError("argmax of empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

Metrics score_distributions(std::span<const Eigen::VectorXd> predictions, std::span<const Eigen::VectorXd> targets) {
  if (predictions.size() != targets.size()) throw ModelError("prediction and target counts differ");
  if (predictions.empty()) throw ModelError("cannot score an empty corpus");
  Metrics m;
  m.count = predictions.size();
  double wrong = 0.0;
  double sq = 0.0;
  double ce = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const auto& t = targets[i];
    if (p.size() != t.size()) throw ModelError("prediction and target sizes differ");
    if (argmax_first(p) != argmax_first(t)) wrong += 1.0;
    sq += (p - t).squaredNorm() / static_cast<double>(t.size());
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      if (t[k] > 0.0) ce -= t[k] * std::log(std::max(p[k], 1e-12));
    }
  }
  const double n = static_cast<double>(m.count);
  m.misclass_rate = wrong / n;
  m.true_mse = sq / n;
  m.mean_cross_entropy = ce / n;
  return m;
}

template <typename Model>
std::vector<Eigen::VectorXd> predict_all(const Model& model, const EncodedCorpus& corpus, const EmbeddingTable& table) {
  using Scalar = typename Model::scalar_type;
  const Eigen::Index max_len = model.config().max_len;
  std::vector<Eigen::VectorXd> out(corpus.size());
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  const std::size_t chunk = (corpus.size() + workers - 1) / workers;
  std::vector<std::future<void>> jobs;
  for (std::size_t start = 0; start < corpus.size(); start += chunk) {
    const std::size_t stop = std::min(corpus.size(), start + chunk);
    jobs.push_back(std::async(std::launch::async, [&, start, stop] {
      for (std::size_t i = start; i < stop; ++i) {
        const auto post = embed_rows<Scalar>(corpus.posts[i].token_rows, table, max_len);
        out[i] = model.predict(post).transpose().template cast<double>();
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

template <typename Model>
Metrics evaluate(const Model& model, const EncodedCorpus& corpus, const EmbeddingTable& table) {
  if (corpus.empty()) throw ModelError("cannot evaluate on an empty corpus");
  if (corpus.classes != model.config().classes) throw ModelError("corpus and model class counts differ");
  const auto predictions = predict_all(model, corpus, table);
  std::vector<Eigen::VectorXd> targets;
  targets.reserve(corpus.size());
  for (const auto& p : corpus.posts) targets.push_back(p.target);
  return score_distributions(predictions, targets);
}

std::string TrainingHistory::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(10);
  out << "epoch,train_loss,val_loss,train_misclass,val_misclass\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.train_misclass << ',' << e.val_misclass
        << '\n';
  }
  return out.str();
}

std::string TrainingHistory::to_json() const {
  json j;
  j["best_epoch"] = best_epoch;
  j["stopped_early"] = stopped_early;
  j["epochs"] = json::array();
  for (const auto& e : epochs) {
    json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["val_loss"] = std::isfinite(e.val_loss) ? json(e.val_loss) : json(nullptr);
    r["train_misclass"] = e.train_misclass;
    r["val_misclass"] = std::isfinite(e.val_misclass) ? json(e.val_misclass) : json(nullptr);
    j["epochs"].push_back(std::move(r));
  }
  return j.dump(2);
}

template <typename Model>
TrainingHistory train(Model& model, const EncodedCorpus& train_set, const EncodedCorpus& val,
                      const EmbeddingTable& table, std::uint64_t seed) {
  using Scalar = typename Model::scalar_type;
  const auto& cfg = model.config();
  const TrainingOptions& opts = cfg.training;
  if (train_set.empty()) throw ModelError("training corpus is empty");
  if (train_set.classes != cfg.classes) throw ModelError("training corpus and model class counts differ");
  if (!val.empty() && val.classes != cfg.classes) throw ModelError("validation corpus and model class counts differ");
  if (table.dimension() != cfg.embedding_dim) throw ModelError("embedding dimension differs from model config");

  // Embedded inputs are reused every epoch.
  std::vector<EmbeddedPost<Scalar>> inputs;
  std::vector<nn::RowVector<Scalar>> targets;
  inputs.reserve(train_set.size());
  for (const auto& p : train_set.posts) {
    inputs.push_back(embed_rows<Scalar>(p.token_rows, table, cfg.max_len));
    targets.push_back(p.target.transpose().template cast<Scalar>());
  }

  auto measure = [&](int epoch) {
    EpochRecord r;
    r.epoch = epoch;
    const Metrics tm = evaluate(model, train_set, table);
    r.train_loss = tm.mean_cross_entropy;
    r.train_misclass = tm.misclass_rate;
    if (!val.empty()) {
      const Metrics vm = evaluate(model, val, table);
      r.val_loss = vm.mean_cross_entropy;
      r.val_misclass = vm.misclass_rate;
    } else {
      r.val_loss = std::numeric_limits<double>::quiet_NaN();
      r.val_misclass = std::numeric_limits<double>::quiet_NaN();
    }
    return r;
  };

  Rng rng(seed);
  nn::Optimizer<Scalar> optimizer(opts.optimizer);
  TrainingHistory history;
  history.epochs.push_back(measure(0));
  double best = val.empty() ? std::numeric_limits<double>::infinity() : history.epochs[0].val_loss;
  auto best_params = model.params();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Scalar l2 = static_cast<Scalar>(opts.l2);

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    shuffle<std::size_t>(order, rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      nn::Tape<Scalar> tape;
      const auto bound = model.params().bind(tape);
      std::vector<nn::Var<Scalar>> losses;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        losses.push_back(nn::cross_entropy_soft(model.logits(tape, bound, inputs[i], true, rng), targets[i]));
      }
      nn::Var<Scalar> loss = nn::scale(nn::add_scalars<Scalar>(losses), Scalar(1) / static_cast<Scalar>(losses.size()));
      if (l2 > Scalar(0)) {
        std::vector<nn::Var<Scalar>> weights;
        for (std::size_t k = 0; k < bound.size(); ++k) {
          if (model.params()[k].regularized) weights.push_back(bound[k]);
        }
        if (!weights.empty()) {
          const std::array<nn::Var<Scalar>, 2> terms{loss, nn::l2_penalty<Scalar>(weights, l2)};
          loss = nn::add_scalars<Scalar>(terms);
        }
      }
      tape.backward(loss);
      std::vector<nn::Matrix<Scalar>> grads;
      grads.reserve(bound.size());
      for (const auto& v : bound) grads.push_back(tape.grad(v));
      optimizer.step(model.params(), grads);
    }
    history.epochs.push_back(measure(epoch));
    if (val.empty()) continue;
    const double v = history.epochs.back().val_loss;
    if (v < best) {
      best = v;
      best_params = model.params();
      history.best_epoch = epoch;
      since_best = 0;
    } else if (opts.patience > 0 && ++since_best >= opts.patience) {
      history.stopped_early = true;
      break;
    }
  }
  if (!val.empty()) model.params() = best_params;
  else history.best_epoch = static_cast<int>(history.epochs.size()) - 1;
  return history;
}

MetricSummary aggregate_runs(std::span<const Metrics> runs) {
  if (runs.empty()) throw ModelError("no runs to aggregate");
  MetricSummary s;
  s.runs.assign(runs.begin(), runs.end());
  const double n = static_cast<double>(runs.size());
  auto stat = [&](auto field, double& mean, double& sd) {
    double sum = 0.0;
    for (const auto& r : runs) sum += r.*field;
    mean = sum / n;
    double ss = 0.0;
    for (const auto& r : runs) ss += (r.*field - mean) * (r.*field - mean);
    sd = runs.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  };
  stat(&Metrics::misclass_rate, s.mean.misclass_rate, s.stddev.misclass_rate);
  stat(&Metrics::true_mse, s.mean.true_mse, s.stddev.true_mse);
  stat(&Metrics::mean_cross_entropy, s.mean.mean_cross_entropy, s.stddev.mean_cross_entropy);
  std::size_t count = 0;
  for (const auto& r : runs) count += r.count;
  s.mean.count = count / runs.size();
  return s;
}

MetricSummary cross_validate(ModelKind kind, const Corpus& corpus, const EmbeddingTable& table, const CnnConfig& cnn,
                             const LstmConfig& lstm, const CrossValidationOptions& options,
                             const textprep::WordLists& lists) {
  if (options.runs < 2) throw ModelError("cross-validation needs at least 2 runs");
  std::vector<Metrics> runs;
  for (int r = 0; r < options.runs; ++r) {
    const std::uint64_t seed = options.base_seed + static_cast<std::uint64_t>(r);
    const CorpusSplit parts = split(corpus, options.fractions, seed);
    const EncodedCorpus tr = encode_corpus(parts.train, table, options.include_like, lists);
    const EncodedCorpus va = encode_corpus(parts.val, table, options.include_like, lists);
    const EncodedCorpus te = encode_corpus(parts.test, table, options.include_like, lists);
    if (tr.empty() || te.empty()) throw ModelError("cross-validation split left an empty train or test set");
    const int classes = options.include_like ? 6 : 5;
    if (kind == ModelKind::cnn) {
      CnnConfig c = cnn;
      c.classes = classes;
      c.max_len = choose_max_len(tr, c.max_height());
      CnnModel<float> model(c);
      model.initialize(seed);
      train(model, tr, va, table, seed);
      runs.push_back(evaluate(model, te, table));
    } else {
      LstmConfig c = lstm;
      c.classes = classes;
      c.max_len = choose_max_len(tr, 1);
      LstmModel<float> model(c);
      model.initialize(seed);
      train(model, tr, va, table, seed);
      runs.push_back(evaluate(model, te, table));
    }
  }
  return aggregate_runs(runs);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json training_json(const TrainingOptions& t) {
  json j;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["patience"] = t.patience;
  j["dropout"] = t.dropout;
  j["l2"] = t.l2;
  j["regularize_biases"] = t.regularize_biases;
  j["optimizer"] = t.optimizer.kind == nn::OptimizerKind::adam ? "adam" : "sgd";
  j["learning_rate"] = t.optimizer.learning_rate;
  j["beta1"] = t.optimizer.beta1;
  j["beta2"] = t.optimizer.beta2;
  j["epsilon"] = t.optimizer.epsilon;
  return j;
}

TrainingOptions training_from(const json& j, TrainingOptions t) {
  t.batch_size = j.value("batch_size", t.batch_size);
  t.epochs = j.value("epochs", t.epochs);
  t.patience = j.value("patience", t.patience);
  t.dropout = j.value("dropout", t.dropout);
  t.l2 = j.value("l2", t.l2);
  t.regularize_biases = j.value("regularize_biases", t.regularize_biases);
  const std::string opt = j.value("optimizer", std::string("adam"));
  if (opt == "adam") t.optimizer.kind = nn::OptimizerKind::adam;
  else if (opt == "sgd") t.optimizer.kind = nn::OptimizerKind::sgd;
  else throw ModelError("unknown optimizer '" + opt + "'");
  t.optimizer.learning_rate = j.value("learning_rate", t.optimizer.learning_rate);
  t.optimizer.beta1 = j.value("beta1", t.optimizer.beta1);
  t.optimizer.beta2 = j.value("beta2", t.optimizer.beta2);
  t.optimizer.epsilon = j.value("epsilon", t.optimizer.epsilon);
  return t;
}

json parse_config(const std::string& text, std::string_view kind) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("invalid model config: ") + e.what());
  }
  if (j.value("model", std::string()) != kind) throw ModelError("model config is not a " + std::string(kind) + " config");
  return j;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path.string());
  out << text << '\n';
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

std::string cnn_config_json(const CnnConfig& c) {
  json j;
  j["model"] = "cnn";
  j["heights"] = c.heights;
  j["filters"] = c.filters;
  j["filter_mode"] = c.filter_mode == FilterCountMode::per_height ? "per_height" : "total";
  j["embedding_dim"] = c.embedding_dim;
  j["classes"] = c.classes;
  j["max_len"] = c.max_len;
  j["training"] = training_json(c.training);
  return j.dump(2);
}

CnnConfig cnn_config_from_json(const std::string& text) {
  const json j = parse_config(text, "cnn");
  CnnConfig c;
  try {
    c.heights = j.value("heights", c.heights);
    c.filters = j.value("filters", c.filters);
    const std::string mode = j.value("filter_mode", std::string("per_height"));
    if (mode == "per_height") c.filter_mode = FilterCountMode::per_height;
    else if (mode == "total") c.filter_mode = FilterCountMode::total;
    else throw ModelError("unknown filter_mode '" + mode + "'");
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.classes = j.value("classes", c.classes);
    c.max_len = j.value("max_len", c.max_len);
    if (j.contains("training")) c.training = training_from(j["training"], c.training);
  } catch (const json::exception& e) {
    throw ModelError(std::string("invalid cnn config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string lstm_config_json(const LstmConfig& c) {
  json j;
  j["model"] = "rnn";
  j["hidden"] = c.hidden;
  j["embedding_dim"] = c.embedding_dim;
  j["classes"] = c.classes;
  j["max_len"] = c.max_len;
  j["training"] = training_json(c.training);
  return j.dump(2);
}

LstmConfig lstm_config_from_json(const std::string& text) {
  const json j = parse_config(text, "rnn");
  LstmConfig c;
  try {
    c.hidden = j.value("hidden", c.hidden);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.classes = j.value("classes", c.classes);
    c.max_len = j.value("max_len", c.max_len);
    if (j.contains("training")) c.training = training_from(j["training"], c.training);
  } catch (const json::exception& e) {
    throw ModelError(std::string("invalid rnn config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename Scalar>
void save_model(const CnnModel<Scalar>& model, const std::filesystem::path& prefix) {
  save_checkpoint(with_suffix(prefix, ".ckpt"), model.params());
  write_text(with_suffix(prefix, ".json"), cnn_config_json(model.config()));
}

template <typename Scalar>
void save_model(const LstmModel<Scalar>& model, const std::filesystem::path& prefix) {
  save_checkpoint(with_suffix(prefix, ".ckpt"), model.params());
  write_text(with_suffix(prefix, ".json"), lstm_config_json(model.config()));
}

template <typename Scalar>
CnnModel<Scalar> load_cnn(const std::filesystem::path& prefix) {
  CnnModel<Scalar> model(cnn_config_from_json(read_text(with_suffix(prefix, ".json"))));
  assign_tensors(model.params(), load_checkpoint_file(with_suffix(prefix, ".ckpt")));
  return model;
}

template <typename Scalar>
LstmModel<Scalar> load_lstm(const std::filesystem::path& prefix) {
  LstmModel<Scalar> model(lstm_config_from_json(read_text(with_suffix(prefix, ".json"))));
  assign_tensors(model.params(), load_checkpoint_file(with_suffix(prefix, ".ckpt")));
  return model;
}

// ---------------------------------------------------------------------------
// Instantiations

#define EMOREACT_INSTANTIATE(S)                                                                                  \
  template struct EmbeddedPost<S>;                                                                               \
  template EmbeddedPost<S> embed_rows<S>(std::span<const int>, const EmbeddingTable&, Eigen::Index);             \
  template EmbeddedPost<S> embed_and_pad<S>(const textprep::TokenSequence&, const EmbeddingTable&, Eigen::Index); \
  template class CnnModel<S>;                                                                                    \
  template class LstmModel<S>;                                                                                   \
  template std::vector<Eigen::VectorXd> predict_all(const CnnModel<S>&, const EncodedCorpus&,                    \
                                                    const EmbeddingTable&);                                      \
  template std::vector<Eigen::VectorXd> predict_all(const LstmModel<S>&, const EncodedCorpus&,                   \
                                                    const EmbeddingTable&);                                      \
  template Metrics evaluate(const CnnModel<S>&, const EncodedCorpus&, const EmbeddingTable&);                    \
  template Metrics evaluate(const LstmModel<S>&, const EncodedCorpus&, const EmbeddingTable&);                   \
  template TrainingHistory train(CnnModel<S>&, const EncodedCorpus&, const EncodedCorpus&, const EmbeddingTable&, \
                                 std::uint64_t);                                                                 \
  template TrainingHistory train(LstmModel<S>&, const EncodedCorpus&, const EncodedCorpus&,                      \
                                 const EmbeddingTable&, std::uint64_t);                                          \
  template void save_model(const CnnModel<S>&, const std::filesystem::path&);                                    \
  template void save_model(const LstmModel<S>&, const std::filesystem::path&);                                   \
  template CnnModel<S> load_cnn<S>(const std::filesystem::path&);                                                \
  template LstmModel<S> load_lstm<S>(const std::filesystem::path&);

EMOREACT_INSTANTIATE(float)
EMOREACT_INSTANTIATE(double)

#undef EMOREACT_INSTANTIATE

}  // namespace emoreact
