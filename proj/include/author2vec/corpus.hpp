// SPDX-License-Identifier: Apache-2.0
#pragma once

// Post ingestion, filtering, subword tokenization and authorship splits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "author2vec/common.hpp"

namespace a2v {

struct Post {
  std::string author_id;
  std::int64_t created_at = 0;  ///< unix seconds
  std::string subreddit;
  std::string text;
};

struct AuthorRecord {
  std::string author_id;
  std::vector<Post> posts;  ///< chronological, oldest first
  std::map<std::string, std::string> labels;
};

/// Ordered subword inventory; continuation pieces carry the "##" prefix.
class TokenizerVocab {
 public:
  static constexpr std::string_view kContinuation = "##";

  TokenizerVocab(std::vector<std::string> tokens, std::string unk_token = "[UNK]");

  /// One token per line; line index is the token id.
  static TokenizerVocab load(const std::filesystem::path& path, std::string unk_token = "[UNK]");
  void save(const std::filesystem::path& path) const;

  bool contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }
  int id(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& unk_token() const noexcept { return unk_; }
  std::size_t size() const noexcept { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  std::string unk_;
};

/// Lowercase, split on whitespace and punctuation, then greedy longest-match
/// subword segmentation. Words without a full segmentation emit the unk token.
std::vector<std::string> tokenize(std::string_view text, const TokenizerVocab& vocab);

/// The pre-tokenization step alone (lowercase + whitespace/punctuation split).
std::vector<std::string> basic_split(std::string_view text);

enum class JunkRule { char_repetition, url_only };

struct FilterPolicy {
  std::size_t min_tokens_per_post = 20;
  std::size_t min_posts_per_author = 20;  ///< authors need strictly more posts than this
  std::size_t max_posts_per_author = 500;
  std::vector<JunkRule> junk_rules{JunkRule::char_repetition, JunkRule::url_only};
  double max_char_run_ratio = 0.5;
  /// Generic exclusion lists (case-insensitive): posts containing any keyword,
  /// or posted in any listed subreddit, are dropped.
  std::vector<std::string> excluded_keywords;
  std::vector<std::string> excluded_subreddits;

  static FilterPolicy pretraining() { return {}; }
  /// Keeps authors with at least 10 posts.
  static FilterPolicy mbti() {
    FilterPolicy p;
    p.min_posts_per_author = 9;
    return p;
  }

  void validate() const;
};

bool is_repetitive(std::string_view text, double max_run_ratio);
bool is_url_only(std::string_view text);

/// Loads a JSON-lines post dump ({author, created_utc, subreddit, body}).
struct LoadStats {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  std::size_t empty_bodies = 0;
};
std::vector<AuthorRecord> load_corpus(const std::filesystem::path& path, LoadStats* stats = nullptr);
std::vector<AuthorRecord> group_posts(std::vector<Post> posts, LoadStats* stats = nullptr);

/// CSV `author_id,attribute,value` -> author -> attribute -> value.
using LabelTable = std::map<std::string, std::map<std::string, std::string>>;
LabelTable load_labels(const std::filesystem::path& path);
void save_labels(const LabelTable& labels, const std::filesystem::path& path);
void attach_labels(std::vector<AuthorRecord>& corpus, const LabelTable& labels);

void save_corpus(const std::vector<AuthorRecord>& corpus, const std::filesystem::path& path);

/// Why posts were removed; accumulated by filter_posts when requested.
struct DropCounts {
  std::size_t too_short = 0;
  std::size_t repetitive = 0;
  std::size_t url_only = 0;
  std::size_t excluded = 0;
  std::size_t over_cap = 0;
  std::size_t authors_too_few_posts = 0;
};

AuthorRecord filter_posts(const AuthorRecord& author, const TokenizerVocab& vocab,
                          const FilterPolicy& policy, DropCounts* drops = nullptr);
std::vector<AuthorRecord> filter_authors(std::vector<AuthorRecord> corpus, const FilterPolicy& policy,
                                         DropCounts* drops = nullptr);

struct AuthorshipSplit {
  std::vector<AuthorRecord> train;
  std::vector<AuthorRecord> test;
};

/// Picks `count` distinct indices out of [0, n), returned ascending.
std::vector<std::size_t> choose_heldout_indices(std::size_t n, std::size_t count, std::uint64_t seed);

/// Keeps authors with more than `min_valid_posts` posts and moves exactly
/// `test_posts_per_author` of each one's posts into the test partition.
/// The choice per author depends only on (seed, author_id).
AuthorshipSplit split_authorship_eval(const std::vector<AuthorRecord>& corpus,
                                      std::size_t min_valid_posts = 80,
                                      std::size_t test_posts_per_author = 40, std::uint64_t seed = 0);

enum class MbtiAxis { ei = 0, sn = 1, tf = 2, jp = 3 };
inline constexpr std::array<MbtiAxis, 4> kMbtiAxes{MbtiAxis::ei, MbtiAxis::sn, MbtiAxis::tf, MbtiAxis::jp};
std::string_view mbti_axis_name(MbtiAxis axis);

/// One letter per axis, e.g. "INTP" -> {I, N, T, P}.
std::array<char, 4> mbti_axis_labels(std::string_view type_code);

}  // namespace a2v
