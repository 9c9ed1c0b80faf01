// emoreact command line: corpus ingestion, training, evaluation, inference.

#include <cstdio>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emoreact/dataset.hpp"
#include "emoreact/ensemble.hpp"
#include "emoreact/fallback.hpp"
#include "emoreact/miner.hpp"
#include "emoreact/models.hpp"
#include "emoreact/pipeline.hpp"
#include "emoreact/server.hpp"

using namespace emoreact;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct CorpusArgs {
  std::string path;
  std::string format;
  bool keep_empty = false;

  void add(CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--corpus", path, "Corpus file (.jsonl or .csv)")->check(CLI::ExistingFile);
    if (required) opt->required();
    cmd->add_option("--format", format, "Corpus format: jsonl or csv (default: by extension)")
        ->check(CLI::IsMember({"jsonl", "json_lines", "csv"}));
    cmd->add_flag("--keep-empty", keep_empty, "Keep posts whose message is empty after preprocessing");
  }

  Corpus load(LoadReport* report = nullptr) const {
    std::string f = format;
    if (f.empty()) f = fs::path(path).extension() == ".csv" ? "csv" : "jsonl";
    LoadOptions options;
    options.drop_empty_messages = !keep_empty;
    LoadReport local;
    Corpus corpus = load_corpus(path, parse_corpus_format(f), options, &local);
    if (local.dropped_empty > 0) {
      std::cerr << "dropped " << local.dropped_empty << " posts with empty messages\n";
    }
    if (report != nullptr) *report = local;
    return corpus;
  }
};

struct ResourceArgs {
  std::string artifacts = "artifacts";
  std::string emolex = "data/emolex.tsv";
  std::string synonyms = "data/synonyms.tsv";
  std::string embeddings;
  std::string wordlists;

  void add(CLI::App* cmd, bool need_embeddings) {
    cmd->add_option("--artifacts", artifacts, "Directory of trained artifacts")->capture_default_str();
    cmd->add_option("--emolex", emolex, "EmoLex word-level file")->capture_default_str();
    cmd->add_option("--synonyms", synonyms, "Synonym pairs for lexicon expansion ('none' disables)")
        ->capture_default_str();
    cmd->add_option("--wordlists", wordlists, "Directory with stopwords/adverbs/participles lists");
    if (need_embeddings) {
      cmd->add_option("--embeddings", embeddings, "GloVe-format embedding file")->required()->check(CLI::ExistingFile);
    }
  }

  std::optional<fs::path> synonym_path() const {
    if (synonyms.empty() || synonyms == "none") return std::nullopt;
    return fs::path(synonyms);
  }

  textprep::WordLists lists() const {
    return wordlists.empty() ? textprep::WordLists::builtin() : textprep::WordLists::load(wordlists);
  }

  ArtifactPaths paths() const {
    ArtifactPaths p;
    p.artifacts = artifacts;
    p.emolex = emolex;
    p.synonyms = synonym_path();
    p.embeddings = embeddings;
    if (!wordlists.empty()) p.wordlists = fs::path(wordlists);
    return p;
  }
};

struct SplitArgs {
  std::uint64_t seed = 1;
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Seed for splitting and training")->capture_default_str();
    cmd->add_option("--train-fraction", train)->capture_default_str();
    cmd->add_option("--val-fraction", val)->capture_default_str();
    cmd->add_option("--test-fraction", test)->capture_default_str();
  }
  SplitFractions fractions() const { return {train, val, test}; }
};

json metrics_json(const Metrics& m) {
  json j;
  j["misclass_rate"] = m.misclass_rate;
  j["true_mse"] = m.true_mse;
  j["mean_cross_entropy"] = m.mean_cross_entropy;
  j["count"] = m.count;
  return j;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::unordered_set<std::string> corpus_vocabulary(const Corpus& corpus, const textprep::WordLists& lists) {
  std::unordered_set<std::string> vocab;
  for (const auto& p : corpus.posts) {
    for (auto& t : message_tokens(p.message, lists).tokens) vocab.insert(std::move(t));
  }
  return vocab;
}

Corpus subsample(const Corpus& corpus, std::size_t max_posts, std::uint64_t seed) {
  if (max_posts == 0 || corpus.size() <= max_posts) return corpus;
  Corpus out = corpus;
  Rng rng(seed ^ 0x5eedULL);
  shuffle<Post>(out.posts, rng);
  out.posts.resize(max_posts);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const CorpusArgs& in, const std::string& output) {
  LoadReport report;
  const Corpus corpus = in.load(&report);
  save_corpus(corpus, output);
  json j;
  j["records"] = report.records;
  j["dropped_empty"] = report.dropped_empty;
  j["written"] = corpus.size();
  j["output"] = output;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_stats(const CorpusArgs& in, int max_threshold, bool csv) {
  const StatsReport stats = corpus_stats(in.load(), max_threshold);
  std::cout << (csv ? stats.to_csv() : stats.to_json()) << '\n';
  return 0;
}

struct FallbackArgs {
  std::vector<std::string> sentence_files;
  std::string output;
  double test_fraction = 0.2;
  std::size_t max_sentences = 0;
  SvmConfig svm;
};

int cmd_train_fallback(const CorpusArgs& in, const ResourceArgs& res, const FallbackArgs& args, std::uint64_t seed) {
  const auto lists = res.lists();
  const Lexicon lex = load_lexicon(res.emolex, res.synonym_path());
  std::vector<textprep::TokenSequence> sentences;
  auto add_text = [&](const std::string& text) {
    for (auto& s : textprep::sentences_of(text, lists)) sentences.push_back(std::move(s));
  };
  if (!in.path.empty()) {
    for (const auto& p : in.load().posts) {
      add_text(p.message);
      for (const auto& c : p.comments) add_text(c);
    }
  }
  for (const auto& file : args.sentence_files) {
    std::ifstream f(file);
    if (!f) throw std::runtime_error("cannot open " + file);
    std::string line;
    while (std::getline(f, line)) add_text(line);
  }
  auto annotated = miner::lexicon_annotated(sentences, lex);
  const std::size_t n = annotated.sentences.size();
  if (n < 2) throw std::runtime_error("fewer than two lexicon-annotated sentences");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle<std::size_t>(order, rng);
  if (args.max_sentences > 0 && order.size() > args.max_sentences) order.resize(args.max_sentences);
  const auto n_test = static_cast<std::size_t>(std::llround(args.test_fraction * static_cast<double>(order.size())));
  std::vector<textprep::TokenSequence> tr_s, te_s;
  std::vector<EmotionVector> tr_y, te_y;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k < n_test) {
      te_s.push_back(annotated.sentences[i]);
      te_y.push_back(annotated.labels[i]);
    } else {
      tr_s.push_back(annotated.sentences[i]);
      tr_y.push_back(annotated.labels[i]);
    }
  }
  SvmConfig cfg = args.svm;
  cfg.seed = seed;
  const FallbackClassifier clf = FallbackClassifier::train(tr_s, tr_y, cfg);
  const std::string out = args.output.empty() ? (fs::path(res.artifacts) / "fallback.json").string() : args.output;
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  clf.save(out);

  json j;
  j["annotated_sentences"] = n;
  j["train"] = tr_s.size();
  j["test"] = te_s.size();
  j["vocabulary"] = clf.tfidf().dimension();
  if (!te_s.empty()) {
    std::vector<SparseVector> x;
    for (const auto& s : te_s) x.push_back(vectorize(clf.tfidf(), s));
    const PrReport pr = evaluate_pr(clf.svm(), x, te_y);
    j["macro_average_precision"] = pr.macro_average_precision;
    for (int e = 0; e < k_num_emotions; ++e) {
      const double ap = pr.curves[static_cast<std::size_t>(e)].average_precision;
      j["average_precision"][std::string(k_emotion_names[static_cast<std::size_t>(e)])] =
          std::isfinite(ap) ? json(ap) : json(nullptr);
    }
  }
  j["output"] = out;
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct NetArgs {
  std::string output;
  std::string history;
  std::size_t max_posts = 0;
  bool include_likes = false;
  int epochs = 50;
  int batch = 0;
  int patience = 10;
  double lr = 1e-3;
  double dropout = 0.5;
  double l2 = 1e-3;
  int max_len_cap = k_max_len_cap;
  // cnn
  std::vector<int> heights{3, 4, 5};
  int filters = 40;
  std::string filter_mode = "per_height";
  // rnn
  int hidden = 50;
  int dim = 50;

  void add(CLI::App* cmd, ModelKind kind) {
    cmd->add_option("--output", output, "Model prefix (writes <prefix>.ckpt and <prefix>.json)");
    cmd->add_option("--history", history, "Write training history to <path>.csv and <path>.json");
    cmd->add_option("--max-posts", max_posts, "Train on a seeded subsample of this many posts");
    cmd->add_flag("--include-likes", include_likes, "Predict 6 classes including likes");
    cmd->add_option("--epochs", epochs)->capture_default_str()->check(CLI::NonNegativeNumber);
    cmd->add_option("--batch", batch, "Minibatch size (default 16 for cnn, 100 for rnn)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--patience", patience, "Early-stopping patience, 0 disables")->capture_default_str();
    cmd->add_option("--lr", lr)->capture_default_str();
    cmd->add_option("--dropout", dropout)->capture_default_str();
    cmd->add_option("--l2", l2)->capture_default_str();
    cmd->add_option("--max-len-cap", max_len_cap)->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--dim", dim, "Embedding dimension")->capture_default_str()->check(CLI::PositiveNumber);
    if (kind == ModelKind::cnn) {
      cmd->add_option("--heights", heights)->capture_default_str()->delimiter(',');
      cmd->add_option("--filters", filters)->capture_default_str()->check(CLI::PositiveNumber);
      cmd->add_option("--filter-mode", filter_mode)->capture_default_str()->check(
          CLI::IsMember({"per_height", "total"}));
    } else {
      cmd->add_option("--hidden", hidden)->capture_default_str()->check(CLI::PositiveNumber);
    }
  }

  TrainingOptions training(int default_batch) const {
    TrainingOptions t;
    t.batch_size = batch > 0 ? batch : default_batch;
    t.epochs = epochs;
    t.patience = patience;
    t.dropout = dropout;
    t.l2 = l2;
    t.optimizer.learning_rate = lr;
    return t;
  }

  CnnConfig cnn_config() const {
    CnnConfig c;
    c.heights = heights;
    c.filters = filters;
    c.filter_mode = filter_mode == "total" ? FilterCountMode::total : FilterCountMode::per_height;
    c.embedding_dim = dim;
    c.classes = include_likes ? 6 : 5;
    c.training = training(16);
    return c;
  }

  LstmConfig lstm_config() const {
    LstmConfig c;
    c.hidden = hidden;
    c.embedding_dim = dim;
    c.classes = include_likes ? 6 : 5;
    c.training = training(100);
    return c;
  }
};

template <typename Model>
json run_training(Model& model, const EncodedCorpus& tr, const EncodedCorpus& va, const EncodedCorpus& te,
                  const EmbeddingTable& table, std::uint64_t seed, const NetArgs& args) {
  const TrainingHistory history = train(model, tr, va, table, seed);
  if (!args.history.empty()) {
    write_file(args.history + ".csv", history.to_csv());
    write_file(args.history + ".json", history.to_json() + "\n");
  }
  json j;
  j["epochs_run"] = static_cast<int>(history.epochs.size()) - 1;
  j["best_epoch"] = history.best_epoch;
  j["stopped_early"] = history.stopped_early;
  j["initial_train_loss"] = history.epochs.front().train_loss;
  j["final_train_loss"] = history.epochs.back().train_loss;
  j["train"] = metrics_json(evaluate(model, tr, table));
  if (!te.empty()) j["test"] = metrics_json(evaluate(model, te, table));
  return j;
}

int cmd_train_net(ModelKind kind, const CorpusArgs& in, const ResourceArgs& res, const SplitArgs& sp,
                  const NetArgs& args) {
  const auto lists = res.lists();
  const Corpus corpus = subsample(in.load(), args.max_posts, sp.seed);
  const auto vocab = corpus_vocabulary(corpus, lists);
  GloveReport glove;
  const EmbeddingTable table = load_glove(res.embeddings, args.dim, &glove, &vocab);
  const CorpusSplit parts = split(corpus, sp.fractions(), sp.seed);
  const EncodedCorpus tr = encode_corpus(parts.train, table, args.include_likes, lists);
  const EncodedCorpus va = encode_corpus(parts.val, table, args.include_likes, lists);
  const EncodedCorpus te = encode_corpus(parts.test, table, args.include_likes, lists);
  if (tr.empty()) throw std::runtime_error("training split is empty");

  const fs::path prefix =
      args.output.empty() ? fs::path(res.artifacts) / std::string(model_kind_name(kind)) : fs::path(args.output);
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());

  json j;
  j["model"] = model_kind_name(kind);
  j["posts"] = corpus.size();
  j["split"] = {{"train", tr.size()}, {"val", va.size()}, {"test", te.size()}};
  j["skipped_degenerate"] = tr.skipped_degenerate + va.skipped_degenerate + te.skipped_degenerate;
  j["embeddings_loaded"] = glove.loaded;
  if (kind == ModelKind::cnn) {
    CnnConfig c = args.cnn_config();
    c.max_len = choose_max_len(tr, c.max_height(), args.max_len_cap);
    CnnModel<float> model(c);
    model.initialize(sp.seed);
    j["result"] = run_training(model, tr, va, te, table, sp.seed, args);
    save_model(model, prefix);
  } else {
    LstmConfig c = args.lstm_config();
    c.max_len = choose_max_len(tr, 1, args.max_len_cap);
    LstmModel<float> model(c);
    model.initialize(sp.seed);
    j["result"] = run_training(model, tr, va, te, table, sp.seed, args);
    save_model(model, prefix);
  }
  j["output"] = prefix.string();
  std::cout << j.dump(2) << '\n';
  return 0;
}

/// Components with the networks but a placeholder ensemble.
Pipeline network_pipeline(const ResourceArgs& res) {
  const ArtifactPaths paths = res.paths();
  PipelineComponents c;
  c.wordlists = res.lists();
  c.lexicon = load_lexicon(paths.emolex, paths.synonyms);
  if (fs::exists(paths.fallback())) c.fallback = FallbackClassifier::load(paths.fallback());
  c.cnn = load_cnn<double>(paths.cnn_prefix());
  c.rnn = load_lstm<double>(paths.rnn_prefix());
  c.embeddings = load_glove(paths.embeddings, c.cnn.config().embedding_dim);
  c.ensemble = averaging_model();
  return Pipeline(std::move(c));
}

struct EnsembleData {
  std::vector<EnsembleInput> inputs;
  std::vector<Eigen::VectorXd> targets;
};

EnsembleData ensemble_data(const Pipeline& pipeline, const Corpus& corpus) {
  EnsembleData d;
  for (const auto& p : corpus.posts) {
    Eigen::VectorXd target;
    try {
      target = reaction_distribution(p, false).weights;
    } catch (const DegenerateDistribution&) {
      continue;
    }
    d.inputs.push_back(pipeline.ensemble_input(p.message, p.comments));
    d.targets.push_back(std::move(target));
  }
  return d;
}

int cmd_fit_ensemble(const CorpusArgs& in, const ResourceArgs& res, const SplitArgs& sp, const std::string& features,
                     double ridge) {
  const Pipeline pipeline = network_pipeline(res);
  const CorpusSplit parts = split(in.load(), sp.fractions(), sp.seed);
  const EnsembleData d = ensemble_data(pipeline, parts.train);
  const RegressionModel model = fit_regression(d.inputs, d.targets, FeatureLayout::parse(features), ridge);
  const fs::path out = res.paths().ensemble();
  model.save(out);
  json j;
  j["layout"] = model.layout.to_string();
  j["samples"] = model.samples;
  j["ridge"] = model.ridge;
  j["training_sse"] = model.training_sse;
  j["output"] = out.string();
  std::cout << j.dump(2) << '\n';
  return 0;
}

Metrics score(const std::vector<Eigen::VectorXd>& predictions, const std::vector<Eigen::VectorXd>& targets) {
  return score_distributions(predictions, targets);
}

int cmd_evaluate(const CorpusArgs& in, const ResourceArgs& res, const SplitArgs& sp,
                 const std::vector<std::string>& feature_sets, bool as_json) {
  const Pipeline pipeline = network_pipeline(res);
  const CorpusSplit parts = split(in.load(), sp.fractions(), sp.seed);
  const EnsembleData tr = ensemble_data(pipeline, parts.train);
  const EnsembleData te = ensemble_data(pipeline, parts.test);
  if (te.inputs.empty()) throw std::runtime_error("test split is empty");

  std::vector<std::pair<std::string, Metrics>> rows;
  std::vector<Eigen::VectorXd> cnn, rnn, avg;
  for (const auto& x : te.inputs) {
    cnn.push_back(x.cnn);
    rnn.push_back(x.rnn);
    avg.push_back(average_networks(x.cnn, x.rnn));
  }
  rows.emplace_back("cnn (network)", score(cnn, te.targets));
  rows.emplace_back("rnn (network)", score(rnn, te.targets));
  rows.emplace_back("avg (network mean)", score(avg, te.targets));
  for (const auto& f : feature_sets) {
    const RegressionModel model = fit_regression(tr.inputs, tr.targets, FeatureLayout::parse(f));
    std::vector<Eigen::VectorXd> pred;
    for (const auto& x : te.inputs) pred.push_back(predict_final(model, x));
    rows.emplace_back("ensemble " + model.layout.to_string(), score(pred, te.targets));
  }

  if (as_json) {
    json j = json::array();
    for (const auto& [name, m] : rows) {
      json r = metrics_json(m);
      r["variant"] = name;
      j.push_back(std::move(r));
    }
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << std::left << std::setw(34) << "variant" << std::setw(16) << "misclass_rate" << std::setw(14)
            << "true_mse" << "cross_entropy\n";
  std::cout << std::fixed << std::setprecision(4);
  for (const auto& [name, m] : rows) {
    std::cout << std::setw(34) << name << std::setw(16) << m.misclass_rate << std::setw(14) << m.true_mse
              << m.mean_cross_entropy << '\n';
  }
  std::cout << "test posts: " << te.inputs.size() << ", ensemble fit on " << tr.inputs.size() << " posts\n";
  return 0;
}

int cmd_cross_validate(ModelKind kind, const CorpusArgs& in, const ResourceArgs& res, const SplitArgs& sp,
                       const NetArgs& args, int runs) {
  const auto lists = res.lists();
  const Corpus corpus = subsample(in.load(), args.max_posts, sp.seed);
  const auto vocab = corpus_vocabulary(corpus, lists);
  const EmbeddingTable table = load_glove(res.embeddings, args.dim, nullptr, &vocab);
  CrossValidationOptions options;
  options.runs = runs;
  options.base_seed = sp.seed;
  options.fractions = sp.fractions();
  options.include_like = args.include_likes;
  const MetricSummary s = cross_validate(kind, corpus, table, args.cnn_config(), args.lstm_config(), options, lists);
  json j;
  j["model"] = model_kind_name(kind);
  j["runs"] = runs;
  j["mean"] = metrics_json(s.mean);
  j["stddev"] = metrics_json(s.stddev);
  j["per_run"] = json::array();
  for (const auto& m : s.runs) j["per_run"].push_back(metrics_json(m));
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_predict(const ResourceArgs& res, const std::string& text, const std::string& comments_file) {
  std::vector<std::string> comments;
  if (!comments_file.empty()) {
    std::ifstream f(comments_file);
    if (!f) throw std::runtime_error("cannot open " + comments_file);
    std::string line;
    while (std::getline(f, line)) {
      if (!line.empty()) comments.push_back(line);
    }
  }
  const Pipeline pipeline = Pipeline::load(res.paths());
  std::cout << pipeline.predict(text, comments).to_json() << '\n';
  return 0;
}

Server* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_serve(const ResourceArgs& res, ServerConfig config) {
  std::shared_ptr<const Pipeline> pipeline;
  try {
    pipeline = std::make_shared<const Pipeline>(Pipeline::load(res.paths()));
  } catch (const std::exception& e) {
    std::cerr << "models not loaded (" << e.what() << "); /predict will answer 503\n";
  }
  Server server(config, pipeline);
  const int port = server.bind();
  std::cerr << "listening on http://" << server.config().host << ':' << port << '\n';
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facebook reaction distribution prediction"};
  app.require_subcommand(1);

  CorpusArgs corpus;
  ResourceArgs res;
  SplitArgs sp;

  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write it as JSON lines");
  std::string ingest_out;
  corpus.add(ingest);
  ingest->add_option("--output", ingest_out, "Output .jsonl file")->required();

  auto* stats = app.add_subcommand("stats", "Reaction threshold curve and dominant-type agreement");
  int max_threshold = 10;
  bool stats_csv = false;
  corpus.add(stats);
  stats->add_option("--max-threshold", max_threshold)->capture_default_str()->check(CLI::PositiveNumber);
  stats->add_flag("--csv", stats_csv, "Emit CSV instead of JSON");

  auto* fallback = app.add_subcommand("train-fallback", "Train the TF-IDF + linear SVM sentence annotator");
  FallbackArgs fb;
  corpus.add(fallback, false);
  res.add(fallback, false);
  fallback->add_option("--sentences", fb.sentence_files, "Plain-text files, one or more sentences per line")
      ->check(CLI::ExistingFile);
  fallback->add_option("--output", fb.output, "Output file (default <artifacts>/fallback.json)");
  fallback->add_option("--test-fraction", fb.test_fraction)->capture_default_str()->check(CLI::Range(0.0, 0.9));
  fallback->add_option("--max-sentences", fb.max_sentences, "Use at most this many annotated sentences");
  fallback->add_option("--lambda", fb.svm.lambda)->capture_default_str();
  fallback->add_option("--svm-epochs", fb.svm.epochs)->capture_default_str();
  fallback->add_option("--seed", sp.seed)->capture_default_str();

  NetArgs cnn_args;
  auto* train_cnn = app.add_subcommand("train-cnn", "Train the convolutional predictor");
  corpus.add(train_cnn);
  res.add(train_cnn, true);
  sp.add(train_cnn);
  cnn_args.add(train_cnn, ModelKind::cnn);

  NetArgs rnn_args;
  auto* train_rnn = app.add_subcommand("train-rnn", "Train the LSTM predictor");
  corpus.add(train_rnn);
  res.add(train_rnn, true);
  sp.add(train_rnn);
  rnn_args.add(train_rnn, ModelKind::rnn);

  auto* fit = app.add_subcommand("fit-ensemble", "Fit the regression re-estimator on the training split");
  std::string fit_features = "avg+emotions";
  double ridge = k_default_ridge;
  corpus.add(fit);
  res.add(fit, true);
  sp.add(fit);
  fit->add_option("--features", fit_features, "Feature blocks joined by '+': cnn, rnn, avg, emotions")
      ->capture_default_str();
  fit->add_option("--ridge", ridge)->capture_default_str();

  auto* eval = app.add_subcommand("evaluate", "Score networks and ensemble variants on the test split");
  std::vector<std::string> eval_features;
  bool eval_json = false;
  int cv_runs = 0;
  std::string cv_model = "cnn";
  NetArgs cv_args;
  corpus.add(eval);
  res.add(eval, true);
  sp.add(eval);
  eval->add_option("--features", eval_features,
                   "Ensemble feature sets to fit and score (repeatable), e.g. emotions+cnn");
  eval->add_flag("--json", eval_json, "Emit JSON rows");
  eval->add_option("--cross-validate", cv_runs, "Retrain --model on this many seeded splits and report mean/std")
      ->check(CLI::Range(2, 1000));
  eval->add_option("--model", cv_model, "Network for --cross-validate")->check(CLI::IsMember({"cnn", "rnn"}));
  eval->add_option("--max-posts", cv_args.max_posts, "Cross-validate on a seeded subsample");
  eval->add_option("--epochs", cv_args.epochs, "Epochs per cross-validation run")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Predict reactions and emotions for one post");
  std::string text, comments_file;
  res.add(predict, true);
  predict->add_option("--text", text, "Post message")->required();
  predict->add_option("--comments-file", comments_file, "File with one comment per line")->check(CLI::ExistingFile);

  auto* serve = app.add_subcommand("serve", "HTTP service: GET /health, POST /predict");
  ServerConfig server_config;
  try {
    server_config.apply_environment();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  res.add(serve, true);
  serve->add_option("--host", server_config.host)->capture_default_str();
  serve->add_option("--port", server_config.port)->capture_default_str()->check(CLI::Range(0, 65535));
  serve->add_option("--cors-origin", server_config.cors_origin)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failed = &app;
    for (const auto* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(corpus, ingest_out);
    if (*stats) return cmd_stats(corpus, max_threshold, stats_csv);
    if (*fallback) return cmd_train_fallback(corpus, res, fb, sp.seed);
    if (*train_cnn) return cmd_train_net(ModelKind::cnn, corpus, res, sp, cnn_args);
    if (*train_rnn) return cmd_train_net(ModelKind::rnn, corpus, res, sp, rnn_args);
    if (*fit) return cmd_fit_ensemble(corpus, res, sp, fit_features, ridge);
    if (*eval) {
      if (cv_runs > 0) return cmd_cross_validate(parse_model_kind(cv_model), corpus, res, sp, cv_args, cv_runs);
      if (eval_features.empty()) eval_features = {"avg+emotions", "emotions+cnn", "emotions+rnn", "cnn+rnn+emotions"};
      return cmd_evaluate(corpus, res, sp, eval_features, eval_json);
    }
    if (*predict) return cmd_predict(res, text, comments_file);
    if (*serve) return cmd_serve(res, server_config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
