#include "emoreact/pipeline.hpp"

#include <json.hpp>

#include "emoreact/checkpoint.hpp"

namespace emoreact {

using json = nlohmann::ordered_json;

namespace {

json reaction_object(const Eigen::VectorXd& v) {
  json j = json::object();
  for (Eigen::Index i = 0; i < v.size() && i < static_cast<Eigen::Index>(k_num_reactions); ++i) {
    j[std::string(k_reaction_names[static_cast<std::size_t>(i)])] = v[i];
  }
  return j;
}

json emotion_object(const EmotionVector& v) {
  json j = json::object();
  for (int i = 0; i < k_num_emotions; ++i) j[std::string(k_emotion_names[static_cast<std::size_t>(i)])] = v[i];
  return j;
}

}  // namespace

std::string Prediction::to_json() const {
  json j;
  j["reactions"] = reaction_object(reactions);
  j["emotions"] = emotion_object(emotions);
  j["highlights"] = json::array();
  for (const auto& h : highlights) {
    json e;
    e["token"] = h.token;
    e["emotions"] = emotion_object(h.emotions);
    e["negated"] = h.negated;
    e["negation_cue"] = h.negation_cue;
    j["highlights"].push_back(std::move(e));
  }
  j["components"]["cnn"] = reaction_object(cnn);
  j["components"]["rnn"] = reaction_object(rnn);
  j["components"]["averaged"] = reaction_object(averaged);
  return j.dump();
}

Lexicon load_lexicon(const std::filesystem::path& emolex, const std::optional<std::filesystem::path>& synonyms) {
  Lexicon lex = load_emolex(emolex);
  if (synonyms) lex = expand_with_synonyms(lex, load_synonyms(*synonyms));
  return lex;
}

Pipeline::Pipeline(PipelineComponents components) : components_(std::move(components)) {
  const auto& c = components_;
  if (c.cnn.config().classes != 5 || c.rnn.config().classes != 5) {
    throw ModelError("the pipeline needs 5-class networks");
  }
  if (c.cnn.config().embedding_dim != c.embeddings.dimension() ||
      c.rnn.config().embedding_dim != c.embeddings.dimension()) {
    throw ModelError("network embedding dimension differs from the embedding table");
  }
  if (c.ensemble.weights.rows() != c.ensemble.layout.width() + 1 || c.ensemble.weights.cols() != 5) {
    throw EnsembleError("ensemble model is not fitted for 5 reactions");
  }
}

Pipeline Pipeline::load(const ArtifactPaths& paths) {
  if (paths.embeddings.empty()) throw ModelError("no embedding file given");
  PipelineComponents c;
  c.wordlists = paths.wordlists ? textprep::WordLists::load(*paths.wordlists) : textprep::WordLists::builtin();
  c.lexicon = load_lexicon(paths.emolex, paths.synonyms);
  if (std::filesystem::exists(paths.fallback())) c.fallback = FallbackClassifier::load(paths.fallback());
  c.cnn = load_cnn<double>(paths.cnn_prefix());
  c.rnn = load_lstm<double>(paths.rnn_prefix());
  c.embeddings = load_glove(paths.embeddings, c.cnn.config().embedding_dim);
  c.ensemble = RegressionModel::load(paths.ensemble());
  return Pipeline(std::move(c));
}

EnsembleInput Pipeline::ensemble_input(const std::string& text, const std::vector<std::string>& comments) const {
  const auto& c = components_;
  const auto tokens = message_tokens(text, c.wordlists);
  const auto rows = token_rows(tokens, c.embeddings);
  EnsembleInput in;
  in.cnn = c.cnn.predict(embed_rows<double>(rows, c.embeddings, c.cnn.config().max_len)).transpose();
  in.rnn = c.rnn.predict(embed_rows<double>(rows, c.embeddings, c.rnn.config().max_len)).transpose();
  in.emotions = miner::text_emotions(text, comments, c.lexicon, c.fallback ? &*c.fallback : nullptr, c.miner_options,
                                     c.wordlists);
  return in;
}

Prediction Pipeline::predict(const std::string& text, const std::vector<std::string>& comments) const {
  const auto& c = components_;
  const EnsembleInput in = ensemble_input(text, comments);
  Prediction p;
  p.cnn = in.cnn;
  p.rnn = in.rnn;
  p.averaged = average_networks(in.cnn, in.rnn);
  p.emotions = in.emotions;
  p.reactions = predict_final(c.ensemble, in);
  for (const auto& sentence : textprep::sentences_of(text, c.wordlists)) {
    auto h = miner::highlight(sentence, c.lexicon);
    p.highlights.insert(p.highlights.end(), h.begin(), h.end());
  }
  return p;
}

std::string Pipeline::versions_json() const {
  const auto& c = components_;
  json j;
  j["checkpoint_format"] = k_checkpoint_version;
  j["cnn"]["heights"] = c.cnn.config().heights;
  j["cnn"]["filters"] = c.cnn.config().total_filters();
  j["cnn"]["max_len"] = c.cnn.config().max_len;
  j["cnn"]["parameters"] = c.cnn.params().scalar_count();
  j["rnn"]["hidden"] = c.rnn.config().hidden;
  j["rnn"]["max_len"] = c.rnn.config().max_len;
  j["rnn"]["parameters"] = c.rnn.params().scalar_count();
  j["ensemble"]["layout"] = c.ensemble.layout.to_string();
  j["ensemble"]["samples"] = c.ensemble.samples;
  j["lexicon"]["words"] = c.lexicon.size();
  j["lexicon"]["synonyms"] = c.lexicon.count(Lexicon::Origin::synonym);
  j["fallback"] = c.fallback.has_value();
  j["embeddings"] = c.embeddings.size();
  return j.dump();
}

}  // namespace emoreact
