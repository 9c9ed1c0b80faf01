#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "emoreact/dataset.hpp"
#include "emoreact/lexicon.hpp"
#include "emoreact/models.hpp"
#include "emoreact/pipeline.hpp"

namespace emoreact::testing {

std::filesystem::path source_dir();
std::filesystem::path data_dir();

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

struct SyntheticOptions {
  /// Probability that a post's words come from a reaction other than its dominant one.
  double label_noise = 0.2;
  /// Likes per non-like reaction, drawn uniformly from this range.
  double like_ratio_min = 3.0;
  double like_ratio_max = 12.0;
};

/// Seeded stand-in corpus: message words are tied to the dominant reaction,
/// likes outnumber all other reactions, comments use lexicon words.
Corpus synthetic_corpus(std::size_t posts, std::uint64_t seed, const SyntheticOptions& options = {});

/// Every word synthetic_corpus can emit.
std::vector<std::string> synthetic_vocabulary();

/// Writes `word v1 .. vdim` lines with standard-normal entries scaled by `scale`.
void write_random_glove(const std::filesystem::path& path, const std::vector<std::string>& words, int dim,
                        std::uint64_t seed, double scale = 0.5);

/// Small hand-made lexicon: happy = joy only, sad = sadness, angry = anger+disgust, ...
Lexicon fixture_lexicon();

/// Real EmoLex from data/, optionally synonym-expanded. Cached per flag.
const Lexicon& shipped_lexicon(bool expanded);

/// Pipeline with randomly initialized small networks, random ensemble
/// weights and random embeddings over the synthetic vocabulary.
PipelineComponents random_components(std::uint64_t seed, int dim = 12);

}  // namespace emoreact::testing
