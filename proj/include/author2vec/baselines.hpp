// SPDX-License-Identifier: Apache-2.0
#pragma once

// Count-based and prediction-based user embedders: TF-IDF + LSI, LDA
// (collapsed Gibbs), and word-vector averaging.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "author2vec/common.hpp"
#include "author2vec/svd.hpp"

namespace a2v {

using TokenList = std::vector<std::string>;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class BowDictionary {
 public:
  BowDictionary() = default;
  BowDictionary(std::vector<std::string> tokens, std::vector<std::size_t> doc_freq, std::size_t num_docs,
                std::size_t min_df, double max_df_frac);

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t num_docs() const noexcept { return num_docs_; }
  std::size_t min_df() const noexcept { return min_df_; }
  double max_df_frac() const noexcept { return max_df_frac_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::size_t>& doc_freq() const noexcept { return doc_freq_; }
  /// -1 when absent.
  int column(const std::string& token) const;

 private:
  std::vector<std::string> tokens_;  // lexicographic
  std::vector<std::size_t> doc_freq_;
  std::unordered_map<std::string, int> columns_;
  std::size_t num_docs_ = 0;
  std::size_t min_df_ = 1;
  double max_df_frac_ = 1.0;
};

/// Keeps tokens with min_df <= df and df / N <= max_df_frac; ids are lexicographic.
BowDictionary build_dictionary(std::span<const TokenList> docs, std::size_t min_df = 10, double max_df_frac = 0.30);

/// Raw counts over dictionary columns (out-of-dictionary tokens ignored).
Eigen::SparseVector<double> count_vector(const TokenList& doc, const BowDictionary& dict);
/// tf = raw count, idf = ln(N / df).
Eigen::VectorXd idf_weights(const BowDictionary& dict);
Eigen::SparseVector<double> tfidf_vector(const TokenList& doc, const BowDictionary& dict);
SparseRows tfidf_matrix(std::span<const TokenList> docs, const BowDictionary& dict);
SparseRows count_matrix(std::span<const TokenList> docs, const BowDictionary& dict);

/// Flags a user vector that fell back to a default (no usable tokens).
struct UserVector {
  Eigen::VectorXd values;
  bool warning = false;
};

struct LsiModel {
  BowDictionary dictionary;
  Eigen::VectorXd idf;
  Eigen::MatrixXd projection;  ///< terms x rank, orthonormal columns
  Eigen::VectorXd singular_values;

  std::size_t rank() const noexcept { return static_cast<std::size_t>(projection.cols()); }
  /// Projects one (already weighted) term vector.
  Eigen::VectorXd project(const Eigen::SparseVector<double>& weighted) const;
  Eigen::VectorXd embed_post(const TokenList& post) const;
};

LsiModel fit_lsi(const SparseRows& tfidf, const BowDictionary& dict, std::size_t rank, std::uint64_t seed,
                 const RandomizedSvdOptions& options = {});

enum class LsiUserMode { concat_doc, mean_post };
UserVector lsi_user_embedding(std::span<const TokenList> author_posts, const LsiModel& model, LsiUserMode mode);

void save_lsi(const LsiModel& model, const std::filesystem::path& path);
LsiModel load_lsi(const std::filesystem::path& path);

struct LdaConfig {
  std::size_t topics = 20;
  double alpha = -1.0;  ///< <= 0 means 50 / K
  double beta = 0.01;
  std::size_t iterations = 500;
  std::size_t inference_sweeps = 50;
  std::uint64_t seed = 0;
};

struct LdaModel {
  Eigen::MatrixXd topic_word;  ///< K x V counts (integral values)
  Eigen::VectorXd topic_totals;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t inference_sweeps = 50;
  std::uint64_t seed = 0;
  BowDictionary dictionary;

  std::size_t topics() const noexcept { return static_cast<std::size_t>(topic_word.rows()); }
  std::size_t vocab_size() const noexcept { return static_cast<std::size_t>(topic_word.cols()); }
  /// Smoothed topic-word distributions; each row sums to one.
  Eigen::MatrixXd phi() const;
};

/// Per-sweep hook, used by tests to check count conservation.
struct LdaTrace {
  std::vector<double> token_counts;  ///< sum of topic-word counts after each sweep
  std::vector<std::vector<int>> final_assignments;
  Eigen::MatrixXd doc_topic;  ///< D x K counts after the final sweep
};

LdaModel fit_lda(const SparseRows& counts, const BowDictionary& dict, const LdaConfig& config,
                 LdaTrace* trace = nullptr);

/// Fold-in on the concatenated document with the topic-word counts frozen.
UserVector lda_user_embedding(std::span<const TokenList> author_posts, const LdaModel& model);
UserVector lda_infer(const Eigen::SparseVector<double>& counts, const LdaModel& model, std::uint64_t doc_seed);

void save_lda(const LdaModel& model, const std::filesystem::path& path);
LdaModel load_lda(const std::filesystem::path& path);

class WordVectorTable {
 public:
  WordVectorTable() = default;
  explicit WordVectorTable(std::size_t width) : width_(width) {}

  /// Text format: header "count dim", then one "token v1 ... vdim" per line.
  static WordVectorTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void add(const std::string& token, Eigen::VectorXd vec);
  const Eigen::VectorXd* find(const std::string& token) const;
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return index_.size(); }

 private:
  std::size_t width_ = 0;
  std::vector<std::string> tokens_;
  std::vector<Eigen::VectorXd> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

UserVector wordvec_user_embedding(std::span<const TokenList> author_posts, const WordVectorTable& table);

}  // namespace a2v
