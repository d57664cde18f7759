// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic Reddit-like corpus with topic structure and a planted binary
// attribute, for end-to-end runs without private data.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "author2vec/baselines.hpp"
#include "author2vec/corpus.hpp"

namespace a2v {

struct SyntheticConfig {
  std::size_t authors = 200;
  std::size_t posts_per_author = 60;  ///< posts that survive the default filter
  std::size_t junk_posts_per_author = 3;  ///< URL-only, repetitive or too short
  std::size_t vocabulary = 800;
  std::size_t topics = 16;
  std::size_t topics_per_author = 3;
  std::size_t topic_words = 60;
  double topic_share = 0.8;  ///< fraction of words drawn from the post's topic
  std::size_t min_words = 22;
  std::size_t max_words = 48;
  std::string attribute = "trait";
  /// Per-word probability of a marker word for authors with / without the
  /// attribute; a weak text-level cue.
  double marker_rate_positive = 0.006;
  double marker_rate_negative = 0.004;
  std::size_t marker_words = 8;
  std::size_t wordvec_dim = 32;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<Post> posts;
  LabelTable labels;  ///< attribute (0/1) and a random "mbti" code per author
  std::vector<std::string> words;
  WordVectorTable wordvec;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& config);

/// Writes posts.jsonl, labels.csv, vocab.txt (tokenizer vocabulary) and
/// wordvec.txt into `dir`.
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace a2v
