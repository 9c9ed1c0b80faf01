#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "emoreact/lexicon.hpp"

namespace emoreact {

class EnsembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-post inputs to the re-estimator: both network distributions over the
/// five non-like reactions and the mined emotion distribution.
struct EnsembleInput {
  Eigen::VectorXd cnn;
  Eigen::VectorXd rnn;
  EmotionVector emotions = EmotionVector::Constant(1.0 / k_num_emotions);
};

/// Element-wise mean of two distributions, renormalized.
Eigen::VectorXd average_networks(const Eigen::VectorXd& cnn, const Eigen::VectorXd& rnn);

enum class FeatureBlock { cnn, rnn, avg, emotions };

std::string_view feature_block_name(FeatureBlock block);

/// Ordered feature blocks, e.g. "avg+emotions" (the default) or "emotions+cnn".
struct FeatureLayout {
  std::vector<FeatureBlock> blocks{FeatureBlock::avg, FeatureBlock::emotions};

  static FeatureLayout parse(std::string_view spec);
  std::string to_string() const;
  Eigen::Index width() const;
  /// Features without the intercept.
  Eigen::VectorXd features(const EnsembleInput& input) const;
};

struct RegressionModel {
  FeatureLayout layout;
  /// (features + 1) x outputs; the last row is the intercept.
  Eigen::MatrixXd weights;
  double ridge = 0.0;
  std::size_t samples = 0;
  /// Sum of squared raw residuals on the fitting set.
  double training_sse = 0.0;

  Eigen::VectorXd predict_raw(const EnsembleInput& input) const;

  std::string to_json() const;
  static RegressionModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static RegressionModel load(const std::filesystem::path& path);
};

inline constexpr double k_default_ridge = 1e-8;
/// Ridge used when there are fewer samples than coefficients.
inline constexpr double k_underdetermined_ridge = 1e-3;

/// Per-output least squares on the normal equations with a small ridge on all
/// coefficients: (X'X + ridge I) W = X'Y.
RegressionModel fit_regression(std::span<const EnsembleInput> inputs, std::span<const Eigen::VectorXd> targets,
                               const FeatureLayout& layout = {}, double ridge = k_default_ridge);

/// Identity map on the averaged network block ("avg" layout, zero intercept).
RegressionModel averaging_model();

/// Raw prediction clamped at zero and L1-normalized; falls back to the
/// averaged network distribution when nothing positive remains.
Eigen::VectorXd predict_final(const RegressionModel& model, const EnsembleInput& input);

}  // namespace emoreact
