// SPDX-License-Identifier: Apache-2.0
#pragma once

// Authorship-classification pre-training, checkpoints, and author embedding.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "author2vec/embedstore.hpp"
#include "author2vec/model.hpp"
#include "author2vec/nn/adam.hpp"

namespace a2v {

struct PretrainConfig {
  std::size_t min_posts = 10;  ///< posts per training example, inclusive range
  std::size_t max_posts = 40;
  std::size_t batch_size = 16;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  ///< multiplied into the learning rate after each epoch
  double clip_norm = 5.0;
  bool use_all_posts = false;
  std::size_t posts_per_draw = 25;  ///< each author is drawn ceil(posts / this) times per epoch
  std::size_t patience = 5;  ///< epochs without held-out top-5 improvement; 0 disables
  std::size_t threads = 1;
  ModelShape shape;  ///< input_dim and classes are taken from the data

  void validate() const;
  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct TrainingExample {
  nn::Matrix<float> sequence;  ///< dim x steps, chronological
  std::vector<std::size_t> rows;  ///< which posts were drawn, ascending
  Eigen::Index target = 0;
};

/// Draws a size uniformly from [min_posts, min(max_posts, rows)] and that many
/// distinct posts, kept in chronological order.
TrainingExample sample_training_example(const PostEmbeddingMatrix& author, Eigen::Index target,
                                        const PretrainConfig& config, std::mt19937_64& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  std::size_t train_samples = 0;
  bool has_heldout = false;
  double heldout_loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
};

struct PretrainHooks {
  /// Class id of train[i]; identity when empty.
  std::vector<Eigen::Index> class_of;
  /// Called after every epoch with the current parameters and optimizer state.
  std::function<void(const AuthorVecModel&, const EpochLog&, const nn::AdamState<float>&)> on_epoch;
};

struct PretrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  ///< 1-based; parameters of this epoch are kept
  bool stopped_early = false;
};

struct HeldoutScores {
  double loss = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
};

/// Splits every author's rows the way split_authorship_eval splits posts.
struct EmbeddingSplit {
  std::vector<PostEmbeddingMatrix> train;
  std::vector<PostEmbeddingMatrix> heldout;
};
EmbeddingSplit split_embeddings(std::span<const PostEmbeddingMatrix> authors, std::size_t min_valid_posts,
                                std::size_t heldout_per_author, std::uint64_t seed);

/// Model with a head sized for `classes` authors.
AuthorVecModel make_pretrain_model(const PretrainConfig& config, std::size_t input_dim, std::size_t classes);

/// Trains `model` in place. `heldout[i]` holds held-out posts of `train[i]`;
/// pass an empty span to train on everything without evaluation.
/// On a non-finite loss the model is reset to the last completed epoch and
/// NumericError is thrown.
PretrainResult pretrain(AuthorVecModel& model, std::span<const PostEmbeddingMatrix> train,
                        std::span<const PostEmbeddingMatrix> heldout, const PretrainConfig& config,
                        const PretrainHooks& hooks = {});

/// Each held-out author's full sequence scored once (training-mode sparsity).
HeldoutScores evaluate_heldout(const AuthorVecModel& model, std::span<const PostEmbeddingMatrix> heldout,
                               std::span<const Eigen::Index> classes, std::size_t threads = 1);

nlohmann::json epoch_log_json(std::span<const EpochLog> log);

// -------------------------------------------------------------- checkpoints

inline constexpr std::string_view kCheckpointMagic = "AV1CKPT_";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  AuthorVecModel model;
  std::map<std::string, std::string> metadata;
  std::optional<nn::AdamState<float>> optimizer;  ///< moments follow the model's block order
};

void save_checkpoint(const AuthorVecModel& model, const std::map<std::string, std::string>& metadata,
                     const std::filesystem::path& path, const nn::AdamState<float>* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------- embedding

struct AuthorEmbedding {
  std::string author_id;
  Eigen::VectorXf vector;
};

/// Full chronological sequence, inference sparsity, head unused.
AuthorEmbedding embed_author(const AuthorVecModel& model, const PostEmbeddingMatrix& author);
std::vector<AuthorEmbedding> embed_authors(const AuthorVecModel& model, std::span<const PostEmbeddingMatrix> authors,
                                           std::size_t threads = 1);

/// AV1EMBED file with one row per author.
void write_author_embeddings(std::span<const AuthorEmbedding> embeddings, const std::filesystem::path& path);
std::vector<AuthorEmbedding> read_author_embeddings(const std::filesystem::path& path);
/// `author_id,idx:value,...` with only the nonzero entries.
void write_sparse_csv(std::span<const AuthorEmbedding> embeddings, const std::filesystem::path& path);

}  // namespace a2v
