#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace emoreact {

/// Facebook reaction types in canonical order. `like` is kept last so the
/// first five entries are exactly the set the predictors work on.
enum class Reaction : std::uint8_t { love = 0, wow, haha, sad, angry, like };

inline constexpr std::size_t k_num_reactions = 6;
inline constexpr std::size_t k_num_predicted_reactions = 5;

inline constexpr std::array<std::string_view, k_num_reactions> k_reaction_names = {
    "love", "wow", "haha", "sad", "angry", "like"};

std::string_view reaction_name(Reaction r);

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record that failed to parse. `line()` is 1-based.
class ParseError : public DatasetError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DegenerateDistribution : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

struct ReactionCounts {
  std::array<std::int64_t, k_num_reactions> counts{};

  std::int64_t& operator[](Reaction r) { return counts[static_cast<std::size_t>(r)]; }
  std::int64_t operator[](Reaction r) const { return counts[static_cast<std::size_t>(r)]; }

  /// Sum over all reactions, or over the non-like ones only.
  std::int64_t total(bool count_likes) const;
};

struct Post {
  std::string id;
  std::string message;
  std::vector<std::string> comments;
  ReactionCounts reactions;
};

/// A point on the probability simplex over (love, wow, haha, sad, angry),
/// followed by `like` when `includes_like` is set.
struct ReactionDistribution {
  Eigen::VectorXd weights;
  bool includes_like = false;

  Eigen::Index size() const { return weights.size(); }
};

struct Corpus {
  std::vector<Post> posts;
  std::string source;
  std::string filter;

  std::size_t size() const { return posts.size(); }
  bool empty() const { return posts.empty(); }
};

enum class CorpusFormat { json_lines, csv };

CorpusFormat parse_corpus_format(std::string_view name);

struct LoadOptions {
  /// Drop posts whose message is empty after text normalization.
  bool drop_empty_messages = true;
};

struct LoadReport {
  std::size_t records = 0;
  std::size_t dropped_empty = 0;
};

/// Reads a corpus file. JSON-lines records carry {id, message, comments, reactions};
/// CSV files carry a header naming id, message, comments, and one column per
/// reaction, with comments separated by `|||`.
Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                   const LoadOptions& options = {}, LoadReport* report = nullptr);

Corpus parse_corpus_jsonl(std::istream& in, const LoadOptions& options = {},
                          LoadReport* report = nullptr);
Corpus parse_corpus_csv(std::istream& in, const LoadOptions& options = {},
                        LoadReport* report = nullptr);

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

Corpus filter_by_threshold(const Corpus& corpus, std::int64_t min_reactions, bool count_likes);

/// Throws DegenerateDistribution when every included count is zero.
ReactionDistribution reaction_distribution(const Post& post, bool include_like);

struct ThresholdRow {
  int threshold = 0;
  std::size_t posts_with_likes = 0;
  std::size_t posts_without_likes = 0;
  /// Aggregate non-like reaction shares over posts surviving the non-like threshold.
  Eigen::Matrix<double, 5, 1> reaction_shares = Eigen::Matrix<double, 5, 1>::Zero();
};

struct StatsReport {
  std::size_t total_posts = 0;
  std::vector<ThresholdRow> thresholds;
  /// Mean share of non-like reaction mass held by the dominant non-like type,
  /// over posts with at least two distinct non-like types. Undefined (NaN) when
  /// no post qualifies.
  double dominant_agreement = 0.0;
  std::size_t multi_type_posts = 0;
  /// Same statistic with likes counted as a reaction type.
  double dominant_agreement_with_likes = 0.0;
  std::size_t multi_type_posts_with_likes = 0;

  std::string to_json() const;
  std::string to_csv() const;
};

StatsReport corpus_stats(const Corpus& corpus, int max_threshold = 10);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  Corpus train;
  Corpus val;
  Corpus test;
};

CorpusSplit split(const Corpus& corpus, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace emoreact
