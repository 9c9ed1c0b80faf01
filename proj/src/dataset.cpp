#include "emoreact/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "emoreact/random.hpp"
#include "emoreact/textprep.hpp"

namespace emoreact {
namespace {

using nlohmann::json;

std::optional<Reaction> parse_reaction(std::string_view name) {
  for (std::size_t i = 0; i < k_num_reactions; ++i) {
    if (k_reaction_names[i] == name) return static_cast<Reaction>(i);
  }
  return std::nullopt;
}

std::int64_t parse_count(const json& value, std::size_t line, std::string_view key) {
  std::int64_t n = 0;
  if (value.is_number_integer()) {
    n = value.get<std::int64_t>();
  } else if (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>()) {
    n = static_cast<std::int64_t>(value.get<double>());
  } else if (value.is_null()) {
    n = 0;
  } else {
    throw ParseError(line, "reaction '" + std::string(key) + "' is not an integer count");
  }
  if (n < 0) throw ParseError(line, "reaction '" + std::string(key) + "' is negative");
  return n;
}

bool keep_post(const Post& post, const LoadOptions& options, LoadReport* report) {
  if (options.drop_empty_messages && textprep::preprocess(post.message).empty()) {
    if (report != nullptr) ++report->dropped_empty;
    return false;
  }
  return true;
}

void check_unique(Corpus& corpus, const std::vector<std::size_t>& lines) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.posts.size(); ++i) {
    if (!seen.insert(corpus.posts[i].id).second) {
      throw ParseError(lines[i], "duplicate post id '" + corpus.posts[i].id + "'");
    }
  }
}

// RFC 4180 record reader: quoted fields may contain separators, quotes ("")
// and newlines. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  char ch = 0;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line;
      fields.push_back(std::move(field));
      return true;
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  if (quoted) throw ParseError(line, "unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::vector<std::string> split_comments(const std::string& cell) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= cell.size()) {
    const std::size_t pos = cell.find("|||", start);
    std::string part = cell.substr(start, pos == std::string::npos ? std::string::npos : pos - start);
    const auto first = part.find_first_not_of(" \t");
    if (first != std::string::npos) {
      const auto last = part.find_last_not_of(" \t");
      out.push_back(part.substr(first, last - first + 1));
    }
    if (pos == std::string::npos) break;
    start = pos + 3;
  }
  return out;
}

}  // namespace

std::string_view reaction_name(Reaction r) { return k_reaction_names[static_cast<std::size_t>(r)]; }

ParseError::ParseError(std::size_t line, const std::string& what)
    : DatasetError("line " + std::to_string(line) + ": " + what), line_(line) {}

std::int64_t ReactionCounts::total(bool count_likes) const {
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < k_num_predicted_reactions; ++i) sum += counts[i];
  if (count_likes) sum += (*this)[Reaction::like];
  return sum;
}

CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "jsonl" || name == "json-lines" || name == "json_lines") return CorpusFormat::json_lines;
  if (name == "csv") return CorpusFormat::csv;
  throw DatasetError("unknown corpus format '" + std::string(name) + "' (expected jsonl or csv)");
}

Corpus parse_corpus_jsonl(std::istream& in, const LoadOptions& options, LoadReport* report) {
  Corpus corpus;
  std::vector<std::size_t> lines;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(line, "record is not a JSON object");
    if (report != nullptr) ++report->records;

    Post post;
    try {
      if (auto it = record.find("id"); it != record.end()) {
        post.id = it->is_string() ? it->get<std::string>() : it->dump();
      } else {
        post.id = std::to_string(line);
      }
      if (auto it = record.find("message"); it != record.end() && !it->is_null()) {
        post.message = it->get<std::string>();
      }
      if (auto it = record.find("comments"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError(line, "comments must be an array of strings");
        for (const auto& c : *it) post.comments.push_back(c.get<std::string>());
      }
    } catch (const json::type_error& e) {
      throw ParseError(line, std::string("wrong field type: ") + e.what());
    }
    if (auto it = record.find("reactions"); it != record.end() && !it->is_null()) {
      if (!it->is_object()) throw ParseError(line, "reactions must be an object");
      for (const auto& [key, value] : it->items()) {
        if (auto r = parse_reaction(key)) post.reactions[*r] = parse_count(value, line, key);
      }
    }
    if (keep_post(post, options, report)) {
      corpus.posts.push_back(std::move(post));
      lines.push_back(line);
    }
  }
  check_unique(corpus, lines);
  return corpus;
}

Corpus parse_corpus_csv(std::istream& in, const LoadOptions& options, LoadReport* report) {
  Corpus corpus;
  std::vector<std::size_t> lines;
  std::vector<std::string> fields;
  std::size_t line = 1;
  if (!read_csv_record(in, fields, line)) return corpus;

  int id_col = -1;
  int message_col = -1;
  int comments_col = -1;
  std::array<int, k_num_reactions> reaction_cols;
  reaction_cols.fill(-1);
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name = fields[i];
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    const int col = static_cast<int>(i);
    if (name == "id") id_col = col;
    else if (name == "message") message_col = col;
    else if (name == "comments") comments_col = col;
    else if (auto r = parse_reaction(name)) reaction_cols[static_cast<std::size_t>(*r)] = col;
  }
  if (message_col < 0) throw ParseError(1, "CSV header has no 'message' column");

  for (;;) {
    const std::size_t record_line = line;
    if (!read_csv_record(in, fields, line)) break;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (report != nullptr) ++report->records;
    auto cell = [&](int col) -> std::string {
      return col >= 0 && static_cast<std::size_t>(col) < fields.size() ? fields[static_cast<std::size_t>(col)]
                                                                         : std::string{};
    };
    Post post;
    post.id = id_col >= 0 ? cell(id_col) : std::to_string(record_line);
    post.message = cell(message_col);
    if (comments_col >= 0) post.comments = split_comments(cell(comments_col));
    for (std::size_t r = 0; r < k_num_reactions; ++r) {
      const std::string value = cell(reaction_cols[r]);
      if (value.empty()) continue;
      std::size_t used = 0;
      long long n = 0;
      try {
        n = std::stoll(value, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != value.size() || n < 0) {
        throw ParseError(record_line, "reaction '" + std::string(k_reaction_names[r]) + "' is not a count");
      }
      post.reactions.counts[r] = n;
    }
    if (keep_post(post, options, report)) {
      corpus.posts.push_back(std::move(post));
      lines.push_back(record_line);
    }
  }
  check_unique(corpus, lines);
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, CorpusFormat format, const LoadOptions& options,
                   LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open corpus file " + path.string());
  LoadReport local;
  LoadReport* r = report != nullptr ? report : &local;
  Corpus corpus = format == CorpusFormat::csv ? parse_corpus_csv(in, options, r) : parse_corpus_jsonl(in, options, r);
  corpus.source = path.string();
  corpus.filter = options.drop_empty_messages ? "dropped " + std::to_string(r->dropped_empty) + " empty messages"
                                              : "none";
  if (r->dropped_empty > 0) {
    std::clog << "load_corpus: dropped " << r->dropped_empty << " posts with empty messages\n";
  }
  return corpus;
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& post : corpus.posts) {
    nlohmann::ordered_json record;
    record["id"] = post.id;
    record["message"] = post.message;
    record["comments"] = post.comments;
    nlohmann::ordered_json reactions;
    reactions["like"] = post.reactions[Reaction::like];
    for (std::size_t i = 0; i < k_num_predicted_reactions; ++i) reactions[std::string(k_reaction_names[i])] = post.reactions.counts[i];
    record["reactions"] = reactions;
    out << record.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError("cannot write corpus file " + path.string());
  write_corpus_jsonl(corpus, out);
}

Corpus filter_by_threshold(const Corpus& corpus, std::int64_t min_reactions, bool count_likes) {
  if (min_reactions < 0) throw DatasetError("min_reactions must be >= 0");
  Corpus out;
  out.source = corpus.source;
  out.filter = (corpus.filter.empty() ? "" : corpus.filter + "; ") + "total " +
               (count_likes ? "reactions" : "non-like reactions") + " >= " + std::to_string(min_reactions);
  std::copy_if(corpus.posts.begin(), corpus.posts.end(), std::back_inserter(out.posts),
               [&](const Post& p) { return p.reactions.total(count_likes) >= min_reactions; });
  return out;
}

ReactionDistribution reaction_distribution(const Post& post, bool include_like) {
  const std::size_t n = include_like ? k_num_reactions : k_num_predicted_reactions;
  const std::int64_t total = post.reactions.total(include_like);
  if (total <= 0) {
    throw DegenerateDistribution("post '" + post.id + "' has no counted reactions");
  }
  ReactionDistribution d;
  d.includes_like = include_like;
  d.weights.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    d.weights[static_cast<Eigen::Index>(i)] = static_cast<double>(post.reactions.counts[i]) / static_cast<double>(total);
  }
  return d;
}

namespace {

// Share of the dominant type among posts with at least two nonzero types.
std::pair<double, std::size_t> dominant_agreement(const Corpus& corpus, bool with_likes) {
  const std::size_t n = with_likes ? k_num_reactions : k_num_predicted_reactions;
  double sum = 0.0;
  std::size_t posts = 0;
  for (const auto& p : corpus.posts) {
    std::int64_t total = 0;
    std::int64_t best = 0;
    int types = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t c = p.reactions.counts[i];
      total += c;
      best = std::max(best, c);
      types += c > 0 ? 1 : 0;
    }
    if (types < 2) continue;
    sum += static_cast<double>(best) / static_cast<double>(total);
    ++posts;
  }
  return {posts == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(posts), posts};
}

}  // namespace

StatsReport corpus_stats(const Corpus& corpus, int max_threshold) {
  StatsReport report;
  report.total_posts = corpus.size();
  for (int t = 1; t <= max_threshold; ++t) {
    ThresholdRow row;
    row.threshold = t;
    Eigen::Matrix<double, 5, 1> mass = Eigen::Matrix<double, 5, 1>::Zero();
    for (const auto& p : corpus.posts) {
      if (p.reactions.total(true) >= t) ++row.posts_with_likes;
      if (p.reactions.total(false) >= t) {
        ++row.posts_without_likes;
        for (int i = 0; i < 5; ++i) mass[i] += static_cast<double>(p.reactions.counts[static_cast<std::size_t>(i)]);
      }
    }
    if (mass.sum() > 0) row.reaction_shares = mass / mass.sum();
    report.thresholds.push_back(row);
  }
  std::tie(report.dominant_agreement, report.multi_type_posts) = dominant_agreement(corpus, false);
  std::tie(report.dominant_agreement_with_likes, report.multi_type_posts_with_likes) = dominant_agreement(corpus, true);
  return report;
}

std::string StatsReport::to_json() const {
  nlohmann::ordered_json j;
  j["total_posts"] = total_posts;
  auto number_or_null = [](double v) { return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v); };
  j["dominant_agreement"] = number_or_null(dominant_agreement);
  j["multi_type_posts"] = multi_type_posts;
  j["dominant_agreement_with_likes"] = number_or_null(dominant_agreement_with_likes);
  j["multi_type_posts_with_likes"] = multi_type_posts_with_likes;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : thresholds) {
    nlohmann::ordered_json row;
    row["threshold"] = r.threshold;
    row["posts_with_likes"] = r.posts_with_likes;
    row["posts_without_likes"] = r.posts_without_likes;
    nlohmann::ordered_json shares;
    for (int i = 0; i < 5; ++i) shares[std::string(k_reaction_names[static_cast<std::size_t>(i)])] = r.reaction_shares[i];
    row["reaction_shares"] = shares;
    rows.push_back(row);
  }
  j["thresholds"] = rows;
  return j.dump(2);
}

std::string StatsReport::to_csv() const {
  std::ostringstream out;
  out << "threshold,posts_with_likes,posts_without_likes";
  for (int i = 0; i < 5; ++i) out << ",share_" << k_reaction_names[static_cast<std::size_t>(i)];
  out << '\n';
  for (const auto& r : thresholds) {
    out << r.threshold << ',' << r.posts_with_likes << ',' << r.posts_without_likes;
    for (int i = 0; i < 5; ++i) out << ',' << r.reaction_shares[i];
    out << '\n';
  }
  return out.str();
}

CorpusSplit split(const Corpus& corpus, const SplitFractions& f, std::uint64_t seed) {
  const std::array<double, 3> fr{f.train, f.val, f.test};
  for (double x : fr) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DatasetError("split fractions must be non-negative");
  }
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw DatasetError("split fractions must sum to 1");
  const int nonzero = static_cast<int>(std::count_if(fr.begin(), fr.end(), [](double x) { return x > 0.0; }));
  const std::size_t n = corpus.size();
  if (nonzero == 3 && n < 3) throw DatasetError("corpus too small for a three-way split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(std::span<std::size_t>(order), rng);

  const auto n_train = std::min(n, static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n))));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n))));

  CorpusSplit out;
  for (Corpus* c : {&out.train, &out.val, &out.test}) {
    c->source = corpus.source;
    c->filter = corpus.filter;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dest = i < n_train ? out.train : (i < n_train + n_val ? out.val : out.test);
    dest.posts.push_back(corpus.posts[order[i]]);
  }
  return out;
}

}  // namespace emoreact
