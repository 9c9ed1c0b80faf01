#include "emoreact/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emoreact::textprep {
namespace detail {
extern const std::string_view k_builtin_stopwords;
extern const std::string_view k_builtin_adverbs;
extern const std::string_view k_builtin_participles;
}  // namespace detail

namespace {

constexpr std::array<std::string_view, 13> k_negations = {
    "no", "not", "rather", "wont", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere", "cannot", "without"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }
bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_url(std::string_view t) { return starts_with(t, "http://") || starts_with(t, "https://") || starts_with(t, "www."); }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

// Replaces every run of three or more identical code points with one.
std::string collapse_runs(std::string_view s) {
  std::vector<std::string_view> cps;
  for (std::size_t i = 0; i < s.size();) {
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(s[i])), s.size() - i);
    cps.push_back(s.substr(i, len));
    i += len;
  }
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < cps.size();) {
    std::size_t j = i + 1;
    while (j < cps.size() && cps[j] == cps[i]) ++j;
    const std::size_t run = j - i;
    for (std::size_t k = 0; k < (run >= 3 ? 1 : run); ++k) out.append(cps[i]);
    i = j;
  }
  return out;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::unordered_set<std::string> parse_list(std::string_view body) {
  std::unordered_set<std::string> out;
  for (auto word : split_whitespace(body)) {
    if (!word.empty() && word.front() != '#') out.insert(ascii_lower(word));
  }
  return out;
}

std::unordered_set<std::string> read_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open word list " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_list(buf.str());
}

std::string_view trim_punct(std::string_view t) {
  auto strip = [](char c) { return is_ascii_punct(c) && c != '_'; };
  while (!t.empty() && strip(t.front())) t.remove_prefix(1);
  while (!t.empty() && strip(t.back())) t.remove_suffix(1);
  return t;
}

}  // namespace

std::string_view tag_name(Tag t) {
  switch (t) {
    case Tag::RB: return "RB";
    case Tag::VBN: return "VBN";
    case Tag::OTHER: return "OTHER";
  }
  return "OTHER";
}

const WordLists& WordLists::builtin() {
  static const WordLists lists{parse_list(detail::k_builtin_stopwords), parse_list(detail::k_builtin_adverbs),
                               parse_list(detail::k_builtin_participles)};
  return lists;
}

WordLists WordLists::load(const std::filesystem::path& dir) {
  return WordLists{read_list(dir / "stopwords.txt"), read_list(dir / "adverbs.txt"), read_list(dir / "participles.txt")};
}

bool is_negation(std::string_view token) {
  if (std::find(k_negations.begin(), k_negations.end(), token) != k_negations.end()) return true;
  return ends_with(token, "n't");
}

std::string preprocess(std::string_view raw) {
  std::string out;
  for (auto piece : split_whitespace(raw)) {
    const std::string lowered = ascii_lower(piece);
    std::string cleaned;
    cleaned.reserve(lowered.size());
    for (char c : lowered) {
      if (c != '#') cleaned.push_back(c);
    }
    cleaned = collapse_runs(cleaned);

    std::string token;
    if (is_url(lowered) || is_url(cleaned)) {
      token = "__url__";
    } else if (starts_with(cleaned, "@")) {
      token = "__at_user__";
    } else if (cleaned.empty() || std::any_of(cleaned.begin(), cleaned.end(), is_digit)) {
      continue;
    } else {
      token = std::move(cleaned);
    }
    if (!out.empty()) out.push_back(' ');
    out += token;
  }
  return out;
}

std::vector<Tag> pos_tag_lite(const std::vector<std::string>& tokens, const WordLists& lists) {
  std::vector<Tag> tags;
  tags.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (lists.adverbs.contains(t) || (t.size() > 2 && ends_with(t, "ly"))) {
      tags.push_back(Tag::RB);
    } else if (lists.participles.contains(t) || (t.size() > 3 && (ends_with(t, "ed") || ends_with(t, "en")))) {
      tags.push_back(Tag::VBN);
    } else {
      tags.push_back(Tag::OTHER);
    }
  }
  return tags;
}

TokenSequence tokenize(std::string_view text, const WordLists& lists) {
  TokenSequence seq;
  for (auto piece : split_whitespace(text)) {
    const std::string_view t = trim_punct(piece);
    if (t.empty()) continue;
    std::string token(t);
    if (!is_negation(token) && lists.stopwords.contains(token)) continue;
    seq.tokens.push_back(std::move(token));
  }
  seq.tags = pos_tag_lite(seq.tokens, lists);
  return seq;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  auto emit = [&out](std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    if (e > b) out.emplace_back(s.substr(b, e - b));
  };
  auto terminal = [](char c) { return c == '.' || c == '?' || c == '!'; };
  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!terminal(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && terminal(text[j])) ++j;
    if (j == text.size() || is_space(text[j])) {
      emit(text.substr(start, i - start));
      start = j;
    }
    i = j;
  }
  emit(text.substr(start));
  return out;
}

std::vector<TokenSequence> sentences_of(std::string_view raw, const WordLists& lists) {
  std::vector<TokenSequence> out;
  for (const auto& s : split_sentences(preprocess(raw))) {
    TokenSequence ts = tokenize(s, lists);
    if (!ts.empty()) out.push_back(std::move(ts));
  }
  return out;
}

}  // namespace emoreact::textprep
