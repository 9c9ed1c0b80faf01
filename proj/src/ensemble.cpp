#include "emoreact/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace emoreact {

using json = nlohmann::ordered_json;

namespace {

constexpr Eigen::Index k_reaction_width = 5;

void require_distribution(const Eigen::VectorXd& d, const char* what) {
  if (d.size() != k_reaction_width) throw EnsembleError(std::string(what) + " must have 5 entries");
  if (!d.allFinite() || (d.array() < 0.0).any() || !(d.sum() > 0.0)) {
    throw EnsembleError(std::string(what) + " is not a distribution");
  }
}

}  // namespace

Eigen::VectorXd average_networks(const Eigen::VectorXd& cnn, const Eigen::VectorXd& rnn) {
  require_distribution(cnn, "cnn distribution");
  require_distribution(rnn, "rnn distribution");
  Eigen::VectorXd mean = 0.5 * (cnn + rnn);
  return mean / mean.sum();
}

std::string_view feature_block_name(FeatureBlock block) {
  switch (block) {
    case FeatureBlock::cnn: return "cnn";
    case FeatureBlock::rnn: return "rnn";
    case FeatureBlock::avg: return "avg";
    case FeatureBlock::emotions: return "emotions";
  }
  return "?";
}

FeatureLayout FeatureLayout::parse(std::string_view spec) {
  FeatureLayout layout;
  layout.blocks.clear();
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t plus = spec.find_first_of("+,", start);
    if (plus == std::string_view::npos) plus = spec.size();
    const std::string_view name = spec.substr(start, plus - start);
    FeatureBlock block;
    if (name == "cnn") block = FeatureBlock::cnn;
    else if (name == "rnn" || name == "lstm") block = FeatureBlock::rnn;
    else if (name == "avg") block = FeatureBlock::avg;
    else if (name == "emotions") block = FeatureBlock::emotions;
    else throw EnsembleError("unknown feature block '" + std::string(name) + "'");
    for (auto b : layout.blocks) {
      if (b == block) throw EnsembleError("feature block '" + std::string(name) + "' listed twice");
    }
    layout.blocks.push_back(block);
    start = plus + 1;
  }
  return layout;
}

std::string FeatureLayout::to_string() const {
  std::string out;
  for (auto b : blocks) {
    if (!out.empty()) out += '+';
    out += feature_block_name(b);
  }
  return out;
}

Eigen::Index FeatureLayout::width() const {
  Eigen::Index w = 0;
  for (auto b : blocks) w += b == FeatureBlock::emotions ? k_num_emotions : k_reaction_width;
  return w;
}

Eigen::VectorXd FeatureLayout::features(const EnsembleInput& input) const {
  Eigen::VectorXd f(width());
  Eigen::Index at = 0;
  for (auto b : blocks) {
    switch (b) {
      case FeatureBlock::cnn:
        require_distribution(input.cnn, "cnn distribution");
        f.segment(at, k_reaction_width) = input.cnn;
        at += k_reaction_width;
        break;
      case FeatureBlock::rnn:
        require_distribution(input.rnn, "rnn distribution");
        f.segment(at, k_reaction_width) = input.rnn;
        at += k_reaction_width;
        break;
      case FeatureBlock::avg:
        f.segment(at, k_reaction_width) = average_networks(input.cnn, input.rnn);
        at += k_reaction_width;
        break;
      case FeatureBlock::emotions:
        f.segment(at, k_num_emotions) = input.emotions;
        at += k_num_emotions;
        break;
    }
  }
  return f;
}

Eigen::VectorXd RegressionModel::predict_raw(const EnsembleInput& input) const {
  const Eigen::Index p = layout.width();
  if (weights.rows() != p + 1) throw EnsembleError("regression weights do not match the feature layout");
  Eigen::RowVectorXd x(p + 1);
  x.head(p) = layout.features(input).transpose();
  x(p) = 1.0;
  return (x * weights).transpose();
}

RegressionModel fit_regression(std::span<const EnsembleInput> inputs, std::span<const Eigen::VectorXd> targets,
                               const FeatureLayout& layout, double ridge) {
  if (inputs.size() != targets.size()) throw EnsembleError("input and target counts differ");
  if (inputs.empty()) throw EnsembleError("cannot fit a regression on zero samples");
  if (layout.blocks.empty()) throw EnsembleError("feature layout is empty");
  if (!(ridge >= 0.0)) throw EnsembleError("ridge must be >= 0");
  const Eigen::Index p = layout.width() + 1;
  const Eigen::Index n = static_cast<Eigen::Index>(inputs.size());
  const Eigen::Index k = targets.front().size();

  Eigen::MatrixXd x(n, p);
  Eigen::MatrixXd y(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& t = targets[static_cast<std::size_t>(i)];
    if (t.size() != k) throw EnsembleError("targets have inconsistent sizes");
    x.row(i).head(p - 1) = layout.features(inputs[static_cast<std::size_t>(i)]).transpose();
    x(i, p - 1) = 1.0;
    y.row(i) = t.transpose();
  }
  if (!x.allFinite() || !y.allFinite()) throw EnsembleError("non-finite regression input");

  RegressionModel model;
  model.layout = layout;
  model.samples = static_cast<std::size_t>(n);
  model.ridge = n < p ? std::max(ridge, k_underdetermined_ridge) : ridge;
  if (n < p) {
    std::fprintf(stderr, "emoreact: %lld samples for %lld coefficients, using ridge %g\n", static_cast<long long>(n),
                 static_cast<long long>(p), model.ridge);
  }

  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += model.ridge;
  const Eigen::LDLT<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success || !solver.isPositive()) {
    throw EnsembleError("normal equations are singular; increase the ridge");
  }
  model.weights = solver.solve(x.transpose() * y);
  if (!model.weights.allFinite()) throw EnsembleError("normal equations are singular; increase the ridge");
  model.training_sse = (x * model.weights - y).squaredNorm();
  return model;
}

RegressionModel averaging_model() {
  RegressionModel m;
  m.layout.blocks = {FeatureBlock::avg};
  m.weights = Eigen::MatrixXd::Zero(k_reaction_width + 1, k_reaction_width);
  m.weights.topRows(k_reaction_width).setIdentity();
  return m;
}

Eigen::VectorXd predict_final(const RegressionModel& model, const EnsembleInput& input) {
  Eigen::VectorXd raw = model.predict_raw(input).cwiseMax(0.0);
  const double mass = raw.allFinite() ? raw.sum() : 0.0;
  if (!(mass > 0.0)) return average_networks(input.cnn, input.rnn);
  return raw / mass;
}

std::string RegressionModel::to_json() const {
  json j;
  j["format"] = "emoreact-ensemble";
  j["version"] = 1;
  j["layout"] = layout.to_string();
  j["ridge"] = ridge;
  j["samples"] = samples;
  j["training_sse"] = training_sse;
  j["weights"] = json::array();
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < weights.cols(); ++c) row.push_back(weights(r, c));
    j["weights"].push_back(std::move(row));
  }
  return j.dump(2);
}

RegressionModel RegressionModel::from_json(const std::string& text) {
  RegressionModel m;
  try {
    const json j = json::parse(text);
    if (j.value("format", std::string()) != "emoreact-ensemble") throw EnsembleError("not an ensemble model file");
    if (j.value("version", 0) != 1) throw EnsembleError("unsupported ensemble model version");
    m.layout = FeatureLayout::parse(j.at("layout").get<std::string>());
    m.ridge = j.value("ridge", 0.0);
    m.samples = j.value("samples", std::size_t{0});
    m.training_sse = j.value("training_sse", 0.0);
    const auto& rows = j.at("weights");
    if (!rows.is_array() || rows.empty()) throw EnsembleError("ensemble weights missing");
    const Eigen::Index cols = static_cast<Eigen::Index>(rows.front().size());
    m.weights.resize(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != cols) throw EnsembleError("ragged ensemble weights");
      for (Eigen::Index c = 0; c < cols; ++c) m.weights(static_cast<Eigen::Index>(r), c) = rows[r][c].get<double>();
    }
  } catch (const json::exception& e) {
    throw EnsembleError(std::string("invalid ensemble model: ") + e.what());
  }
  if (m.weights.rows() != m.layout.width() + 1) throw EnsembleError("ensemble weights do not match the layout");
  if (!m.weights.allFinite()) throw EnsembleError("ensemble weights are not finite");
  return m;
}

void RegressionModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw EnsembleError("cannot write " + path.string());
  out << to_json() << '\n';
}

RegressionModel RegressionModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw EnsembleError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return from_json(s.str());
}

}  // namespace emoreact
