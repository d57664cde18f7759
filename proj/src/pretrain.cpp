// SPDX-License-Identifier: Apache-2.0
#include "author2vec/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "author2vec/binary_io.hpp"
#include "author2vec/evalharness.hpp"
#include "author2vec/nn/adam.hpp"
#include "author2vec/parallel.hpp"

namespace a2v {

namespace {

nn::Matrix<float> sequence_of(const PostEmbeddingMatrix& author) { return author.values.transpose(); }

std::string pooling_name(nn::Pooling p) { return p == nn::Pooling::final ? "final" : "mean"; }

nn::Pooling pooling_from(const std::string& s) {
  if (s == "final") return nn::Pooling::final;
  if (s == "mean") return nn::Pooling::mean;
  throw ConfigError("unknown pooling '" + s + "' (expected final or mean)");
}

}  // namespace

void PretrainConfig::validate() const {
  if (min_posts < 1) throw ConfigError("pretrain.min_posts must be >= 1");
  if (max_posts < min_posts) throw ConfigError("pretrain.max_posts must be >= pretrain.min_posts");
  if (batch_size == 0) throw ConfigError("pretrain.batch_size must be positive");
  if (posts_per_draw == 0) throw ConfigError("pretrain.posts_per_draw must be positive");
  if (!(learning_rate > 0)) throw ConfigError("pretrain.learning_rate must be positive");
  if (!(lr_decay > 0)) throw ConfigError("pretrain.lr_decay must be positive");
  if (!(clip_norm > 0)) throw ConfigError("pretrain.clip_norm must be positive");
}

nlohmann::json PretrainConfig::to_json() const {
  return {{"min_posts", min_posts},
          {"max_posts", max_posts},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"learning_rate", learning_rate},
          {"lr_decay", lr_decay},
          {"clip_norm", clip_norm},
          {"use_all_posts", use_all_posts},
          {"posts_per_draw", posts_per_draw},
          {"patience", patience},
          {"hidden", shape.hidden},
          {"code_dim", shape.code_dim},
          {"k_train", shape.k_train},
          {"k_infer", shape.k_infer},
          {"head_hidden", shape.head_hidden},
          {"pooling", pooling_name(shape.pooling)}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  try {
    c.min_posts = j.value("min_posts", c.min_posts);
    c.max_posts = j.value("max_posts", c.max_posts);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.use_all_posts = j.value("use_all_posts", c.use_all_posts);
    c.posts_per_draw = j.value("posts_per_draw", c.posts_per_draw);
    c.patience = j.value("patience", c.patience);
    c.shape.hidden = j.value("hidden", c.shape.hidden);
    c.shape.code_dim = j.value("code_dim", c.shape.code_dim);
    c.shape.k_train = j.value("k_train", c.shape.k_train);
    c.shape.k_infer = j.value("k_infer", c.shape.k_infer);
    c.shape.head_hidden = j.value("head_hidden", c.shape.head_hidden);
    c.shape.pooling = pooling_from(j.value("pooling", std::string("final")));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingExample sample_training_example(const PostEmbeddingMatrix& author, Eigen::Index target,
                                        const PretrainConfig& config, std::mt19937_64& rng) {
  const std::size_t rows = author.rows();
  if (rows < config.min_posts) {
    throw DataError("author " + author.author_id + " has " + std::to_string(rows) + " posts, fewer than the " +
                    std::to_string(config.min_posts) + " a training example needs");
  }
  const std::size_t hi = std::min(config.max_posts, rows);
  std::uniform_int_distribution<std::size_t> size_dist(config.min_posts, hi);
  const std::size_t size = size_dist(rng);

  std::vector<std::size_t> pool(rows);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  TrainingExample ex;
  ex.rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
  std::sort(ex.rows.begin(), ex.rows.end());
  ex.sequence.resize(static_cast<Eigen::Index>(author.dim()), static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < size; ++i) {
    ex.sequence.col(static_cast<Eigen::Index>(i)) = author.values.row(static_cast<Eigen::Index>(ex.rows[i])).transpose();
  }
  ex.target = target;
  return ex;
}

EmbeddingSplit split_embeddings(std::span<const PostEmbeddingMatrix> authors, std::size_t min_valid_posts,
                                std::size_t heldout_per_author, std::uint64_t seed) {
  if (min_valid_posts <= heldout_per_author) throw ConfigError("min_valid_posts must exceed heldout_per_author");
  EmbeddingSplit split;
  for (const auto& a : authors) {
    if (a.rows() <= min_valid_posts) continue;
    const auto held = choose_heldout_indices(a.rows(), heldout_per_author, mix_seed(seed, a.author_id));
    std::vector<Eigen::Index> keep;
    std::size_t h = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (h < held.size() && held[h] == i) {
        ++h;
      } else {
        keep.push_back(static_cast<Eigen::Index>(i));
      }
    }
    PostEmbeddingMatrix train{a.author_id, RowMatrixF(static_cast<Eigen::Index>(keep.size()), a.values.cols())};
    PostEmbeddingMatrix test{a.author_id, RowMatrixF(static_cast<Eigen::Index>(held.size()), a.values.cols())};
    for (std::size_t i = 0; i < keep.size(); ++i) train.values.row(static_cast<Eigen::Index>(i)) = a.values.row(keep[i]);
    for (std::size_t i = 0; i < held.size(); ++i) {
      test.values.row(static_cast<Eigen::Index>(i)) = a.values.row(static_cast<Eigen::Index>(held[i]));
    }
    split.train.push_back(std::move(train));
    split.heldout.push_back(std::move(test));
  }
  if (split.train.empty()) {
    throw DataError("no author has more than " + std::to_string(min_valid_posts) + " post embeddings");
  }
  return split;
}

AuthorVecModel make_pretrain_model(const PretrainConfig& config, std::size_t input_dim, std::size_t classes) {
  if (classes < 2) throw DataError("pre-training needs at least 2 authors, got " + std::to_string(classes));
  ModelShape shape = config.shape;
  shape.input_dim = input_dim;
  shape.classes = classes;
  return AuthorVecModel(shape, mix_seed(config.seed, "model-init"));
}

HeldoutScores evaluate_heldout(const AuthorVecModel& model, std::span<const PostEmbeddingMatrix> heldout,
                               std::span<const Eigen::Index> classes, std::size_t threads) {
  HeldoutScores s;
  if (heldout.empty()) return s;
  const auto n = static_cast<Eigen::Index>(heldout.size());
  Eigen::MatrixXd scores(n, static_cast<Eigen::Index>(model.shape().classes));
  std::vector<double> losses(heldout.size());
  parallel_for(heldout.size(), threads, [&](std::size_t i) {
    const auto logits = model.logits(sequence_of(heldout[i]), nn::SparsityMode::train);
    scores.row(static_cast<Eigen::Index>(i)) = logits.cast<double>().transpose();
    losses[i] = static_cast<double>(nn::softmax_xent(logits, classes[i]).loss);
  });
  std::vector<int> truth(classes.begin(), classes.end());
  s.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(n);
  s.top1 = topk_accuracy(scores, truth, 1);
  s.top5 = topk_accuracy(scores, truth, std::min<std::size_t>(5, static_cast<std::size_t>(scores.cols())));
  return s;
}

PretrainResult pretrain(AuthorVecModel& model, std::span<const PostEmbeddingMatrix> train,
                        std::span<const PostEmbeddingMatrix> heldout, const PretrainConfig& config,
                        const PretrainHooks& hooks) {
  config.validate();
  if (!model.has_head()) throw ConfigError("model has no authorship head (stripped); it cannot be pre-trained");
  if (train.size() < 2) throw DataError("pre-training needs at least 2 authors");
  if (model.shape().classes != train.size()) {
    throw ConfigError("model head has " + std::to_string(model.shape().classes) + " classes but " +
                      std::to_string(train.size()) + " authors were given");
  }
  const bool evaluate = !config.use_all_posts && !heldout.empty();
  if (evaluate && heldout.size() != train.size()) throw DataError("held-out split does not align with training authors");

  std::vector<Eigen::Index> class_of(train.size());
  if (hooks.class_of.empty()) {
    std::iota(class_of.begin(), class_of.end(), Eigen::Index{0});
  } else {
    if (hooks.class_of.size() != train.size()) throw ConfigError("class_of must map every training author");
    class_of = hooks.class_of;
  }
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].dim() != model.shape().input_dim) {
      throw DataError("post embedding width " + std::to_string(train[i].dim()) + " of author " + train[i].author_id +
                      " does not match model input " + std::to_string(model.shape().input_dim));
    }
    if (train[i].rows() < config.min_posts) {
      throw DataError("author " + train[i].author_id + " has fewer than " + std::to_string(config.min_posts) +
                      " training posts");
    }
    if (evaluate && heldout[i].author_id != train[i].author_id) {
      throw DataError("held-out split does not align with training authors at " + train[i].author_id);
    }
  }

  std::mt19937_64 rng(mix_seed(config.seed, "pretrain-schedule"));
  nn::AdamState<float> adam;
  adam.learning_rate = config.learning_rate;

  PretrainResult result;
  AuthorVecModel last_good = model;
  AuthorVecModel best = model;
  double best_top5 = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> schedule;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const std::size_t draws = (train[i].rows() + config.posts_per_draw - 1) / config.posts_per_draw;
      schedule.insert(schedule.end(), std::max<std::size_t>(draws, 1), i);
    }
    std::shuffle(schedule.begin(), schedule.end(), rng);

    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = adam.learning_rate;
    double loss_sum = 0.0;
    auto params = model.params();
    for (std::size_t start = 0; start < schedule.size(); start += config.batch_size) {
      const std::size_t end = std::min(schedule.size(), start + config.batch_size);
      std::vector<TrainingExample> batch;
      for (std::size_t b = start; b < end; ++b) {
        batch.push_back(sample_training_example(train[schedule[b]], class_of[schedule[b]], config, rng));
      }
      std::vector<std::vector<nn::Matrix<float>>> per_sample(batch.size());
      std::vector<float> losses(batch.size());
      parallel_for(batch.size(), config.threads, [&](std::size_t b) {
        per_sample[b] = nn::zeros_like(params);
        losses[b] = model.loss_and_grad(batch[b].sequence, batch[b].target, per_sample[b]).loss;
      });
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (!std::isfinite(losses[b])) {
          model = last_good;
          throw NumericError("non-finite training loss in epoch " + std::to_string(epoch) +
                             "; parameters reset to the end of epoch " + std::to_string(epoch - 1));
        }
        loss_sum += static_cast<double>(losses[b]);
      }
      auto grads = std::move(per_sample[0]);
      for (std::size_t b = 1; b < batch.size(); ++b) {
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += per_sample[b][p];
      }
      const float scale = 1.0f / static_cast<float>(batch.size());
      for (auto& g : grads) g *= scale;
      nn::clip_global_norm(grads, static_cast<float>(config.clip_norm));
      try {
        nn::adam_step(adam, params, grads);
      } catch (const NumericError&) {
        model = last_good;
        throw;
      }
    }
    entry.train_samples = schedule.size();
    entry.train_loss = loss_sum / static_cast<double>(schedule.size());

    bool improved = true;
    if (evaluate) {
      const auto scores = evaluate_heldout(model, heldout, class_of, config.threads);
      entry.has_heldout = true;
      entry.heldout_loss = scores.loss;
      entry.top1 = scores.top1;
      entry.top5 = scores.top5;
      improved = scores.top5 > best_top5 || (scores.top5 == best_top5 && scores.loss < best_loss);
    }
    if (!std::isfinite(entry.train_loss) || (evaluate && !std::isfinite(entry.heldout_loss))) {
      model = last_good;
      throw NumericError("non-finite loss in epoch " + std::to_string(epoch));
    }
    result.log.push_back(entry);
    last_good = model;
    if (hooks.on_epoch) hooks.on_epoch(model, entry, adam);

    if (improved) {
      best_top5 = entry.top5;
      best_loss = entry.heldout_loss;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      result.stopped_early = true;
      break;
    }
    adam.learning_rate *= config.lr_decay;
  }
  if (evaluate) model = std::move(best);
  return result;
}

nlohmann::json epoch_log_json(std::span<const EpochLog> log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log) {
    nlohmann::json j{{"epoch", e.epoch},
                     {"learning_rate", e.learning_rate},
                     {"train_loss", e.train_loss},
                     {"train_samples", e.train_samples}};
    if (e.has_heldout) {
      j["heldout_loss"] = e.heldout_loss;
      j["top1"] = e.top1;
      j["top5"] = e.top5;
    }
    out.push_back(std::move(j));
  }
  return out;
}

// -------------------------------------------------------------- checkpoints

void save_checkpoint(const AuthorVecModel& model, const std::map<std::string, std::string>& metadata,
                     const std::filesystem::path& path, const nn::AdamState<float>* optimizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const auto& s = model.shape();
  binio::put_magic(out, kCheckpointMagic);
  binio::put_u32(out, kCheckpointVersion);
  for (auto v : {s.input_dim, s.hidden, s.code_dim, s.k_train, s.k_infer, s.classes}) binio::put_u64(out, v);
  binio::put_u8(out, s.pooling == nn::Pooling::final ? 0 : 1);
  binio::put_u32(out, static_cast<std::uint32_t>(s.head_hidden.size()));
  for (auto h : s.head_hidden) binio::put_u64(out, h);

  binio::put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    binio::put_string(out, k);
    binio::put_u32(out, static_cast<std::uint32_t>(v.size()));
    out.write(v.data(), static_cast<std::streamsize>(v.size()));
  }

  // params() is non-const only because it hands out mutable references.
  auto params = const_cast<AuthorVecModel&>(model).params();
  const bool has_moments = optimizer && optimizer->first.size() == params.size();
  binio::put_u8(out, optimizer ? 1 : 0);
  if (optimizer) {
    binio::put_u64(out, optimizer->step);
    for (double v : {optimizer->learning_rate, optimizer->beta1, optimizer->beta2, optimizer->epsilon}) {
      binio::put_f64(out, v);
    }
    binio::put_u8(out, has_moments ? 1 : 0);
    if (has_moments) {
      for (const auto* moments : {&optimizer->first, &optimizer->second}) {
        for (std::size_t b = 0; b < params.size(); ++b) {
          const auto& m = (*moments)[b];
          if (m.rows() != params[b].value->rows() || m.cols() != params[b].value->cols()) {
            throw DataError("optimizer moment shape does not match block " + params[b].name);
          }
          for (Eigen::Index i = 0; i < m.size(); ++i) binio::put_f32(out, m.data()[i]);
        }
      }
    }
  }

  binio::put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    binio::put_string(out, p.name);
    binio::put_u64(out, static_cast<std::uint64_t>(p.value->rows()));
    binio::put_u64(out, static_cast<std::uint64_t>(p.value->cols()));
    for (Eigen::Index i = 0; i < p.value->size(); ++i) binio::put_f32(out, p.value->data()[i]);
  }
  out.flush();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  if (!binio::check_magic(in, kCheckpointMagic)) throw DataError(path.string() + " is not a checkpoint (bad magic)");
  const auto version = binio::get_u32(in, "checkpoint version");
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

  ModelShape shape;
  shape.input_dim = binio::get_u64(in, "input_dim");
  shape.hidden = binio::get_u64(in, "hidden");
  shape.code_dim = binio::get_u64(in, "code_dim");
  shape.k_train = binio::get_u64(in, "k_train");
  shape.k_infer = binio::get_u64(in, "k_infer");
  shape.classes = binio::get_u64(in, "classes");
  const auto pooling = binio::get_u8(in, "pooling");
  if (pooling > 1) throw DataError("checkpoint: unknown pooling code " + std::to_string(pooling));
  shape.pooling = pooling == 0 ? nn::Pooling::final : nn::Pooling::mean;
  const auto n_head = binio::get_u32(in, "head depth");
  if (n_head > 64) throw DataError("checkpoint: implausible head depth " + std::to_string(n_head));
  shape.head_hidden.clear();
  for (std::uint32_t i = 0; i < n_head; ++i) shape.head_hidden.push_back(binio::get_u64(in, "head width"));
  try {
    shape.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: invalid model shape: ") + e.what());
  }

  Checkpoint ck;
  const auto n_meta = binio::get_u32(in, "metadata count");
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = binio::get_string(in, "metadata key");
    const auto len = binio::get_u32(in, "metadata value length");
    std::string value(len, '\0');
    binio::read_exact(in, value.data(), len, "metadata value");
    ck.metadata.emplace(std::move(key), std::move(value));
  }

  ck.model = AuthorVecModel(shape, 0);
  if (shape.classes < 2) ck.model.strip_head();
  auto params = ck.model.params();
  const auto has_optimizer = binio::get_u8(in, "optimizer flag");
  if (has_optimizer > 1) throw DataError("checkpoint: bad optimizer flag " + std::to_string(has_optimizer));
  if (has_optimizer) {
    nn::AdamState<float> adam;
    const auto step = binio::get_u64(in, "optimizer step");
    for (double* v : {&adam.learning_rate, &adam.beta1, &adam.beta2, &adam.epsilon}) {
      *v = binio::get_f64(in, "optimizer setting");
      if (!std::isfinite(*v)) throw NonFiniteValueError("checkpoint optimizer setting is non-finite");
    }
    const auto has_moments = binio::get_u8(in, "optimizer moments flag");
    if (has_moments > 1) throw DataError("checkpoint: bad optimizer moments flag");
    if (has_moments) {
      adam.reset(params);
      for (auto* moments : {&adam.first, &adam.second}) {
        for (std::size_t b = 0; b < params.size(); ++b) {
          auto& m = (*moments)[b];
          for (Eigen::Index i = 0; i < m.size(); ++i) {
            const float v = binio::get_f32(in, "optimizer moment");
            if (!std::isfinite(v)) throw NonFiniteValueError("checkpoint optimizer moment for " + params[b].name + " is non-finite");
            m.data()[i] = v;
          }
        }
      }
    }
    adam.step = step;
    ck.optimizer = std::move(adam);
  }
  const auto n_blocks = binio::get_u32(in, "block count");
  if (n_blocks != params.size()) {
    throw DataError("checkpoint has " + std::to_string(n_blocks) + " parameter blocks, expected " +
                    std::to_string(params.size()));
  }
  for (auto& p : params) {
    const auto name = binio::get_string(in, "block name");
    const auto rows = binio::get_u64(in, "block rows");
    const auto cols = binio::get_u64(in, "block cols");
    if (name != p.name || rows != static_cast<std::uint64_t>(p.value->rows()) ||
        cols != static_cast<std::uint64_t>(p.value->cols())) {
      throw DataError("checkpoint block '" + name + "' does not match expected '" + p.name + "'");
    }
    for (Eigen::Index i = 0; i < p.value->size(); ++i) {
      const float v = binio::get_f32(in, p.name);
      if (!std::isfinite(v)) throw NonFiniteValueError("checkpoint block " + p.name + " holds a non-finite value");
      p.value->data()[i] = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint has trailing bytes");
  return ck;
}

// ---------------------------------------------------------------- embedding

AuthorEmbedding embed_author(const AuthorVecModel& model, const PostEmbeddingMatrix& author) {
  if (author.dim() != model.shape().input_dim) {
    throw DataError("post embedding width " + std::to_string(author.dim()) + " of author " + author.author_id +
                    " does not match model input " + std::to_string(model.shape().input_dim));
  }
  if (author.rows() == 0) throw DataError("author " + author.author_id + " has no posts to embed");
  return {author.author_id, model.encode(sequence_of(author), nn::SparsityMode::infer)};
}

std::vector<AuthorEmbedding> embed_authors(const AuthorVecModel& model, std::span<const PostEmbeddingMatrix> authors,
                                           std::size_t threads) {
  std::vector<AuthorEmbedding> out(authors.size());
  parallel_for(authors.size(), threads, [&](std::size_t i) { out[i] = embed_author(model, authors[i]); });
  return out;
}

void write_author_embeddings(std::span<const AuthorEmbedding> embeddings, const std::filesystem::path& path) {
  std::vector<PostEmbeddingMatrix> rows;
  rows.reserve(embeddings.size());
  for (const auto& e : embeddings) rows.push_back({e.author_id, e.vector.transpose()});
  write_embeddings(rows, path);
}

std::vector<AuthorEmbedding> read_author_embeddings(const std::filesystem::path& path) {
  std::vector<AuthorEmbedding> out;
  for (auto& m : read_embeddings(path)) {
    if (m.rows() != 1) {
      throw DataError("author embedding file " + path.string() + " has " + std::to_string(m.rows()) +
                      " rows for author " + m.author_id + " (expected 1)");
    }
    out.push_back({m.author_id, m.values.row(0).transpose()});
  }
  return out;
}

void write_sparse_csv(std::span<const AuthorEmbedding> embeddings, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(9);
  for (const auto& e : embeddings) {
    out << e.author_id;
    for (Eigen::Index i = 0; i < e.vector.size(); ++i) {
      if (e.vector[i] != 0.0f) out << ',' << i << ':' << e.vector[i];
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace a2v
