// SPDX-License-Identifier: Apache-2.0
#include "author2vec/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "author2vec/baselines.hpp"
#include "author2vec/corpus.hpp"
#include "author2vec/embedstore.hpp"
#include "author2vec/evalharness.hpp"
#include "author2vec/manifest.hpp"
#include "author2vec/parallel.hpp"
#include "author2vec/pretrain.hpp"
#include "author2vec/synthetic.hpp"
#include "author2vec/viz.hpp"

namespace a2v::cli {

namespace fs = std::filesystem;
using nlohmann::json;

json default_config() {
  json d = json::parse(R"({
    "seed": 0,
    "threads": 1,
    "output": "runs/default",
    "synth": {
      "authors": 200, "posts_per_author": 60, "junk_posts_per_author": 3, "vocabulary": 800,
      "topics": 16, "topics_per_author": 3, "topic_words": 60, "topic_share": 0.8,
      "min_words": 22, "max_words": 48, "attribute": "trait",
      "marker_rate_positive": 0.006, "marker_rate_negative": 0.004, "marker_words": 8, "wordvec_dim": 32
    },
    "corpus": {
      "posts": null, "labels": null, "vocab": null, "wordvec": null,
      "filter": {
        "preset": "pretraining", "min_tokens_per_post": null, "min_posts_per_author": null,
        "max_posts_per_author": null, "max_char_run_ratio": null,
        "excluded_keywords": [], "excluded_subreddits": []
      }
    },
    "embedder": {
      "kind": "stub", "path": null, "dim": 3072, "author_weight": 0.6, "content_weight": 0.8,
      "plant": null
    },
    "pretrain": {
      "min_valid_posts": 80, "heldout_posts": 40
    },
    "baselines": {
      "min_df": 10, "max_df_frac": 0.3,
      "lsi": {"rank": 500, "mode": "concat_doc"},
      "lda": {"topics": 20, "alpha": -1.0, "beta": 0.01, "iterations": 500, "inference_sweeps": 50}
    },
    "eval": {
      "attribute": {"gender": "gender", "depression": "depression", "mbti": "mbti", "custom": null},
      "embeddings": ["author2vec", "lsi", "lda", "wordvec"],
      "probes": [{"kind": "logreg", "l2": 1.0}, {"kind": "mlp", "hidden": [256]}],
      "fold": {"scheme": "kfold", "k": 10, "stratify": true},
      "shuffled_control": true
    },
    "viz": {
      "embedding": "author2vec", "attribute": "gender", "perplexity": 30.0, "iterations": 1000,
      "learning_rate": 200.0
    }
  })");
  auto pretrain = PretrainConfig{}.to_json();
  pretrain.erase("seed");
  d["pretrain"].merge_patch(pretrain);
  return d;
}

namespace {

// ------------------------------------------------------------------- config

void check_known_keys(const json& given, const json& defaults, const std::string& prefix) {
  if (!given.is_object() || !defaults.is_object() || defaults.empty()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    check_known_keys(value, defaults.at(key), path);
  }
}

struct Context {
  json config;
  fs::path root;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::ostream* out = nullptr;

  std::ostream& log() const { return *out; }
  fs::path stage(const std::string& name) const { return root / name; }
  std::uint64_t stage_seed(std::string_view name) const { return mix_seed(seed, name); }

  /// Stable name for an input path: relative to the run root when inside it.
  std::string key_for(const fs::path& p) const {
    const auto abs = fs::weakly_canonical(fs::absolute(p));
    const auto rel = abs.lexically_relative(fs::weakly_canonical(fs::absolute(root)));
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.lexically_normal().generic_string();
  }

  /// Config snapshot stored in manifests; excludes settings that do not
  /// affect artifact bytes (output location, worker count).
  json snapshot(std::initializer_list<const char*> sections) const {
    json s{{"seed", seed}};
    for (const char* name : sections) s[name] = config.at(name);
    return s;
  }
};

fs::path corpus_path(const Context& ctx, const char* key, const char* fallback) {
  const auto& v = ctx.config["corpus"][key];
  if (v.is_null()) return ctx.root / "data" / fallback;
  return fs::path(v.get<std::string>());
}

fs::path require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + ": no such file " + p.string());
  return p;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

FilterPolicy filter_from(const json& j) {
  const auto preset = j.value("preset", std::string("pretraining"));
  FilterPolicy p;
  if (preset == "pretraining") {
    p = FilterPolicy::pretraining();
  } else if (preset == "mbti") {
    p = FilterPolicy::mbti();
  } else {
    throw ConfigError("corpus.filter.preset must be 'pretraining' or 'mbti', got '" + preset + "'");
  }
  p.min_tokens_per_post = get_or(j, "min_tokens_per_post", p.min_tokens_per_post);
  p.min_posts_per_author = get_or(j, "min_posts_per_author", p.min_posts_per_author);
  p.max_posts_per_author = get_or(j, "max_posts_per_author", p.max_posts_per_author);
  p.max_char_run_ratio = get_or(j, "max_char_run_ratio", p.max_char_run_ratio);
  p.excluded_keywords = get_or(j, "excluded_keywords", p.excluded_keywords);
  p.excluded_subreddits = get_or(j, "excluded_subreddits", p.excluded_subreddits);
  p.validate();
  return p;
}

SyntheticConfig synth_from(const json& j, std::uint64_t seed) {
  SyntheticConfig c;
  c.authors = j.at("authors");
  c.posts_per_author = j.at("posts_per_author");
  c.junk_posts_per_author = j.at("junk_posts_per_author");
  c.vocabulary = j.at("vocabulary");
  c.topics = j.at("topics");
  c.topics_per_author = j.at("topics_per_author");
  c.topic_words = j.at("topic_words");
  c.topic_share = j.at("topic_share");
  c.min_words = j.at("min_words");
  c.max_words = j.at("max_words");
  c.attribute = j.at("attribute");
  c.marker_rate_positive = j.at("marker_rate_positive");
  c.marker_rate_negative = j.at("marker_rate_negative");
  c.marker_words = j.at("marker_words");
  c.wordvec_dim = j.at("wordvec_dim");
  c.seed = seed;
  return c;
}

StubEmbedderConfig stub_from(const json& j, std::uint64_t seed) {
  StubEmbedderConfig c;
  c.dim = j.at("dim");
  c.author_weight = j.at("author_weight");
  c.content_weight = j.at("content_weight");
  c.seed = seed;
  if (c.dim == 0) throw ConfigError("embedder.dim must be positive");
  if (!j.at("plant").is_null()) {
    const auto& p = j.at("plant");
    c.plant = PlantedAttribute{p.at("attribute").get<std::string>(), p.value("value", std::string("1")),
                               p.at("strength").get<double>()};
  }
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void make_stage_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// ------------------------------------------------------------------- stages

int cmd_synth(const Context& ctx) {
  const auto dir = ctx.stage("data");
  make_stage_dir(dir);
  const auto corpus = make_synthetic_corpus(synth_from(ctx.config.at("synth"), ctx.stage_seed("synth")));
  write_synthetic_corpus(corpus, dir);
  Manifest m;
  m.stage = "synth";
  m.config = ctx.snapshot({"synth"});
  write_manifest(m, dir, {"posts.jsonl", "labels.csv", "vocab.txt", "wordvec.txt"});
  ctx.log() << "synth: " << corpus.posts.size() << " posts by " << corpus.labels.size() << " authors -> "
            << dir.string() << '\n';
  return 0;
}

int cmd_ingest(const Context& ctx) {
  const auto posts_path = require_file(corpus_path(ctx, "posts", "posts.jsonl"), "corpus.posts");
  const auto vocab_path = require_file(corpus_path(ctx, "vocab", "vocab.txt"), "corpus.vocab");
  const auto labels_path = corpus_path(ctx, "labels", "labels.csv");
  const bool has_labels = fs::exists(labels_path);
  if (!ctx.config["corpus"]["labels"].is_null() && !has_labels) require_file(labels_path, "corpus.labels");
  const auto& emb = ctx.config.at("embedder");
  const auto kind = emb.at("kind").get<std::string>();
  if (kind != "stub" && kind != "external") throw ConfigError("embedder.kind must be 'stub' or 'external'");
  const auto policy = filter_from(ctx.config.at("corpus").at("filter"));

  const auto vocab = TokenizerVocab::load(vocab_path);
  LoadStats load_stats;
  auto authors = load_corpus(posts_path, &load_stats);
  DropCounts drops;
  for (auto& a : authors) a = filter_posts(a, vocab, policy, &drops);
  authors = filter_authors(std::move(authors), policy, &drops);
  LabelTable labels;
  if (has_labels) {
    const auto all = load_labels(labels_path);
    for (const auto& a : authors) {
      if (auto it = all.find(a.author_id); it != all.end()) labels.emplace(it->first, it->second);
    }
    attach_labels(authors, labels);
  }
  if (authors.empty()) throw DataError("no author survived filtering");

  const auto dir = ctx.stage("ingest");
  make_stage_dir(dir);
  save_corpus(authors, dir / "corpus.jsonl");
  save_labels(labels, dir / "labels.csv");

  std::size_t posts = 0, min_posts = SIZE_MAX, max_posts = 0;
  for (const auto& a : authors) {
    posts += a.posts.size();
    min_posts = std::min(min_posts, a.posts.size());
    max_posts = std::max(max_posts, a.posts.size());
  }
  json histo = json::object();
  for (const auto& [_, attrs] : labels) {
    for (const auto& [attr, value] : attrs) {
      auto& slot = histo[attr][value];
      slot = slot.is_null() ? 1 : slot.get<int>() + 1;
    }
  }
  const json stats{{"authors", authors.size()},
                   {"posts", posts},
                   {"posts_per_author", {{"min", min_posts}, {"max", max_posts}}},
                   {"loaded", {{"lines", load_stats.lines}, {"duplicates", load_stats.duplicates},
                               {"empty_bodies", load_stats.empty_bodies}}},
                   {"dropped", {{"too_short", drops.too_short}, {"repetitive", drops.repetitive},
                                {"url_only", drops.url_only}, {"excluded", drops.excluded},
                                {"over_cap", drops.over_cap}, {"authors_too_few_posts", drops.authors_too_few_posts}}},
                   {"labels", histo}};
  write_json(dir / "stats.json", stats);

  std::vector<std::string> outputs{"corpus.jsonl", "labels.csv", "stats.json"};
  if (kind == "stub") {
    const StubEmbedder embedder(stub_from(emb, ctx.stage_seed("stub-embedder")));
    std::vector<PostEmbeddingMatrix> matrices(authors.size());
    parallel_for(authors.size(), ctx.threads, [&](std::size_t i) { matrices[i] = embedder.embed_author(authors[i]); });
    write_embeddings(matrices, dir / "post_embeddings.av1");
    outputs.push_back("post_embeddings.av1");
  }

  Manifest m;
  m.stage = "ingest";
  m.config = ctx.snapshot({"corpus", "embedder"});
  m.inputs[ctx.key_for(posts_path)] = sha256_file(posts_path);
  m.inputs[ctx.key_for(vocab_path)] = sha256_file(vocab_path);
  if (has_labels) m.inputs[ctx.key_for(labels_path)] = sha256_file(labels_path);
  write_manifest(m, dir, outputs);
  ctx.log() << "ingest: " << authors.size() << " authors, " << posts << " posts kept -> " << dir.string() << '\n';
  return 0;
}

struct LoadedCorpus {
  std::vector<AuthorRecord> authors;
  std::string hash;
};

LoadedCorpus load_ingested_corpus(const Context& ctx) {
  const auto dir = ctx.stage("ingest");
  LoadedCorpus c;
  c.hash = verify_artifact(dir, "corpus.jsonl");
  c.authors = load_corpus(dir / "corpus.jsonl");
  return c;
}

struct LoadedEmbeddings {
  std::vector<PostEmbeddingMatrix> matrices;
  std::string key;
  std::string hash;
};

LoadedEmbeddings load_post_embeddings(const Context& ctx) {
  const auto& emb = ctx.config.at("embedder");
  LoadedEmbeddings e;
  if (emb.at("kind") == "stub") {
    e.hash = verify_artifact(ctx.stage("ingest"), "post_embeddings.av1");
    e.key = "ingest/post_embeddings.av1";
    e.matrices = read_embeddings(ctx.stage("ingest") / "post_embeddings.av1");
    return e;
  }
  if (emb.at("path").is_null()) throw ConfigError("embedder.path is required when embedder.kind is 'external'");
  const fs::path path = require_file(emb.at("path").get<std::string>(), "embedder.path");
  e.hash = sha256_file(path);
  e.key = ctx.key_for(path);
  e.matrices = read_embeddings(path);
  // External files must describe exactly the ingested posts.
  const auto corpus = load_ingested_corpus(ctx);
  std::map<std::string, std::size_t> rows;
  for (const auto& m : e.matrices) rows[m.author_id] = m.rows();
  for (const auto& a : corpus.authors) {
    const auto it = rows.find(a.author_id);
    if (it == rows.end()) throw DataError("external embeddings lack author " + a.author_id);
    if (it->second != a.posts.size()) {
      throw DataError("external embeddings hold " + std::to_string(it->second) + " rows for author " + a.author_id +
                      " but the ingested corpus has " + std::to_string(a.posts.size()) + " posts");
    }
  }
  return e;
}

PretrainConfig pretrain_config(const Context& ctx) {
  auto pc = PretrainConfig::from_json(ctx.config.at("pretrain"));
  pc.seed = ctx.stage_seed("pretrain");
  pc.threads = ctx.threads;
  return pc;
}

int cmd_pretrain(const Context& ctx) {
  const auto pc = pretrain_config(ctx);
  const auto& section = ctx.config.at("pretrain");
  const auto posts = load_post_embeddings(ctx);

  EmbeddingSplit split;
  if (pc.use_all_posts) {
    for (const auto& m : posts.matrices) {
      if (m.rows() >= pc.min_posts) split.train.push_back(m);
    }
  } else {
    split = split_embeddings(posts.matrices, section.at("min_valid_posts").get<std::size_t>(),
                             section.at("heldout_posts").get<std::size_t>(), ctx.stage_seed("heldout-split"));
  }
  if (split.train.size() < 2) throw DataError("pre-training needs at least 2 eligible authors");
  const auto dim = split.train.front().dim();
  auto model = make_pretrain_model(pc, dim, split.train.size());

  const auto dir = ctx.stage("pretrain");
  make_stage_dir(dir);
  std::string classes;
  for (const auto& m : split.train) classes += m.author_id + "\n";
  write_text(dir / "classes.txt", classes);

  PretrainHooks hooks;
  hooks.on_epoch = [&](const AuthorVecModel& current, const EpochLog& e, const nn::AdamState<float>& adam) {
    save_checkpoint(current, {{"epoch", std::to_string(e.epoch)}}, dir / "last.ckpt", &adam);
    auto& os = ctx.log();
    os << "epoch " << std::setw(3) << e.epoch << "  loss " << std::fixed << std::setprecision(4) << e.train_loss;
    if (e.has_heldout) os << "  heldout loss " << e.heldout_loss << "  top1 " << e.top1 << "  top5 " << e.top5;
    os << std::defaultfloat << '\n';
  };
  const auto result = pretrain(model, split.train, split.heldout, pc, hooks);

  HeldoutScores final_scores;
  std::vector<Eigen::Index> ids(split.train.size());
  std::iota(ids.begin(), ids.end(), Eigen::Index{0});
  if (!split.heldout.empty()) final_scores = evaluate_heldout(model, split.heldout, ids, ctx.threads);

  save_checkpoint(model, {{"best_epoch", std::to_string(result.best_epoch)}, {"config", pc.to_json().dump()}},
                  dir / "model.ckpt");
  json log{{"authors", split.train.size()},
           {"input_dim", dim},
           {"epochs", epoch_log_json(result.log)},
           {"best_epoch", result.best_epoch},
           {"stopped_early", result.stopped_early}};
  if (!split.heldout.empty()) {
    log["heldout"] = {{"posts_per_author", section.at("heldout_posts")},
                      {"loss", final_scores.loss},
                      {"top1", final_scores.top1},
                      {"top5", final_scores.top5}};
  }
  write_json(dir / "training_log.json", log);

  Manifest m;
  m.stage = "pretrain";
  m.config = ctx.snapshot({"pretrain", "embedder"});
  m.inputs[posts.key] = posts.hash;
  m.upstream["ingest"] = sha256_file(ctx.stage("ingest") / "manifest.json");
  write_manifest(m, dir, {"model.ckpt", "last.ckpt", "classes.txt", "training_log.json"});
  if (!split.heldout.empty()) {
    ctx.log() << "pretrain: best epoch " << result.best_epoch << ", held-out top1 " << final_scores.top1 << ", top5 "
              << final_scores.top5 << '\n';
  }
  return 0;
}

int cmd_embed(const Context& ctx) {
  const auto ckpt_hash = verify_artifact(ctx.stage("pretrain"), "model.ckpt");
  auto ck = load_checkpoint(ctx.stage("pretrain") / "model.ckpt");
  ck.model.strip_head();
  const auto posts = load_post_embeddings(ctx);
  const auto embeddings = embed_authors(ck.model, posts.matrices, ctx.threads);

  const auto dir = ctx.stage("embed");
  make_stage_dir(dir);
  write_author_embeddings(embeddings, dir / "author_embeddings.av1");
  write_sparse_csv(embeddings, dir / "author_embeddings.csv");
  save_checkpoint(ck.model, ck.metadata, dir / "encoder.ckpt");

  Manifest m;
  m.stage = "embed-authors";
  m.config = ctx.snapshot({"embedder"});
  m.inputs["pretrain/model.ckpt"] = ckpt_hash;
  m.inputs[posts.key] = posts.hash;
  m.upstream["pretrain"] = sha256_file(ctx.stage("pretrain") / "manifest.json");
  write_manifest(m, dir, {"author_embeddings.av1", "author_embeddings.csv", "encoder.ckpt"});
  ctx.log() << "embed-authors: " << embeddings.size() << " authors -> " << dir.string() << '\n';
  return 0;
}

int cmd_baseline(const Context& ctx, const std::string& kind) {
  if (kind != "lsi" && kind != "lda" && kind != "wordvec") {
    throw ConfigError("baseline kind must be lsi, lda or wordvec, got '" + kind + "'");
  }
  const auto& cfg = ctx.config.at("baselines");
  const auto corpus = load_ingested_corpus(ctx);
  const auto vocab_path = require_file(corpus_path(ctx, "vocab", "vocab.txt"), "corpus.vocab");
  const auto vocab = TokenizerVocab::load(vocab_path);

  std::vector<std::vector<TokenList>> per_author(corpus.authors.size());
  parallel_for(corpus.authors.size(), ctx.threads, [&](std::size_t i) {
    for (const auto& p : corpus.authors[i].posts) per_author[i].push_back(tokenize(p.text, vocab));
  });
  std::vector<TokenList> docs;
  for (const auto& a : per_author) docs.insert(docs.end(), a.begin(), a.end());

  const auto dir = ctx.stage("baseline-" + kind);
  make_stage_dir(dir);
  Manifest m;
  m.stage = "baseline-" + kind;
  m.config = ctx.snapshot({"baselines"});
  m.inputs["ingest/corpus.jsonl"] = corpus.hash;
  m.inputs[ctx.key_for(vocab_path)] = sha256_file(vocab_path);
  m.upstream["ingest"] = sha256_file(ctx.stage("ingest") / "manifest.json");
  std::vector<std::string> outputs{"user_embeddings.av1", "info.json"};

  std::vector<UserVector> users(corpus.authors.size());
  json info{{"kind", kind}, {"authors", corpus.authors.size()}, {"documents", docs.size()}};
  if (kind == "wordvec") {
    const auto table_path = require_file(corpus_path(ctx, "wordvec", "wordvec.txt"), "corpus.wordvec");
    const auto table = WordVectorTable::load(table_path);
    m.inputs[ctx.key_for(table_path)] = sha256_file(table_path);
    parallel_for(users.size(), ctx.threads, [&](std::size_t i) { users[i] = wordvec_user_embedding(per_author[i], table); });
    info["dim"] = table.width();
  } else {
    const auto dict = build_dictionary(docs, cfg.at("min_df").get<std::size_t>(), cfg.at("max_df_frac").get<double>());
    info["dictionary_size"] = dict.size();
    if (kind == "lsi") {
      const auto& lsi = cfg.at("lsi");
      const auto mode_name = lsi.at("mode").get<std::string>();
      if (mode_name != "concat_doc" && mode_name != "mean_post") throw ConfigError("baselines.lsi.mode must be concat_doc or mean_post");
      const auto mode = mode_name == "concat_doc" ? LsiUserMode::concat_doc : LsiUserMode::mean_post;
      std::size_t rank = lsi.at("rank");
      const std::size_t max_rank = std::min(dict.size(), docs.size());
      if (rank > max_rank) {
        info["warning"] = "rank " + std::to_string(rank) + " exceeds min(terms, documents); reduced to " +
                          std::to_string(max_rank);
        rank = max_rank;
      }
      const auto model = fit_lsi(tfidf_matrix(docs, dict), dict, rank, ctx.stage_seed("lsi"));
      save_lsi(model, dir / "lsi.bin");
      outputs.push_back("lsi.bin");
      parallel_for(users.size(), ctx.threads, [&](std::size_t i) { users[i] = lsi_user_embedding(per_author[i], model, mode); });
      info["rank"] = rank;
    } else {
      const auto& lda = cfg.at("lda");
      LdaConfig lc;
      lc.topics = lda.at("topics");
      lc.alpha = lda.at("alpha");
      lc.beta = lda.at("beta");
      lc.iterations = lda.at("iterations");
      lc.inference_sweeps = lda.at("inference_sweeps");
      lc.seed = ctx.stage_seed("lda");
      const auto model = fit_lda(count_matrix(docs, dict), dict, lc);
      save_lda(model, dir / "lda.bin");
      outputs.push_back("lda.bin");
      parallel_for(users.size(), ctx.threads, [&](std::size_t i) { users[i] = lda_user_embedding(per_author[i], model); });
      info["topics"] = lc.topics;
    }
  }

  std::vector<AuthorEmbedding> rows;
  std::vector<std::string> fallback;
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i].warning) fallback.push_back(corpus.authors[i].author_id);
    rows.push_back({corpus.authors[i].author_id, users[i].values.cast<float>()});
  }
  info["fallback_authors"] = fallback;
  write_author_embeddings(rows, dir / "user_embeddings.av1");
  write_json(dir / "info.json", info);
  write_manifest(m, dir, outputs);
  ctx.log() << "baseline " << kind << ": " << rows.size() << " user vectors";
  if (!fallback.empty()) ctx.log() << " (" << fallback.size() << " without usable tokens)";
  ctx.log() << " -> " << dir.string() << '\n';
  return 0;
}

struct EmbeddingSource {
  std::string stage;
  std::string file;
  std::string display;
};

EmbeddingSource source_for(const std::string& name) {
  if (name == "author2vec") return {"embed", "author_embeddings.av1", "Author2Vec"};
  if (name == "lsi") return {"baseline-lsi", "user_embeddings.av1", "LSI"};
  if (name == "lda") return {"baseline-lda", "user_embeddings.av1", "LDA"};
  if (name == "wordvec") return {"baseline-wordvec", "user_embeddings.av1", "WordVec"};
  throw ConfigError("unknown embedding '" + name + "' (expected author2vec, lsi, lda or wordvec)");
}

EmbeddingTable load_table(const Context& ctx, const EmbeddingSource& src, Manifest& m) {
  const auto dir = ctx.stage(src.stage);
  m.inputs[src.stage + "/" + src.file] = verify_artifact(dir, src.file);
  m.upstream[src.stage] = sha256_file(dir / "manifest.json");
  EmbeddingTable table;
  for (auto& e : read_author_embeddings(dir / src.file)) table.emplace(e.author_id, e.vector.cast<double>());
  return table;
}

ProbeSpec probe_from(const json& j, std::uint64_t seed) {
  const auto kind = j.at("kind").get<std::string>();
  ProbeSpec p;
  if (kind == "logreg") {
    p = ProbeSpec::logistic(j.value("l2", 1.0));
    p.max_iters = j.value("max_iters", p.max_iters);
  } else if (kind == "mlp") {
    p = ProbeSpec::mlp(j.at("hidden").get<std::vector<std::size_t>>(), j.value("l2", 1e-4));
    p.max_iters = j.value("max_iters", p.max_iters);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.patience = j.value("patience", p.patience);
    p.validation_fraction = j.value("validation_fraction", p.validation_fraction);
  } else {
    throw ConfigError("probe kind must be logreg or mlp, got '" + kind + "'");
  }
  p.seed = seed;
  p.validate();
  return p;
}

FoldPlan fold_from(const json& j, std::uint64_t seed) {
  FoldPlan plan;
  const auto scheme = j.at("scheme").get<std::string>();
  if (scheme == "kfold") {
    plan.scheme = FoldScheme::kfold;
  } else if (scheme == "kfold_reverse") {
    plan.scheme = FoldScheme::kfold_reverse;
  } else {
    throw ConfigError("eval.fold.scheme must be kfold or kfold_reverse");
  }
  plan.k = j.at("k");
  plan.stratify = j.at("stratify");
  plan.seed = seed;
  if (plan.k < 2) throw ConfigError("eval.fold.k must be >= 2");
  return plan;
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '-';
  return out;
}

void write_predictions(const fs::path& path, const std::vector<Prediction>& preds) {
  std::ostringstream os;
  os << "author_id,fold,truth,predicted\n";
  for (const auto& p : preds) os << p.author_id << ',' << p.fold << ',' << p.truth << ',' << p.predicted << '\n';
  write_text(path, os.str());
}

int cmd_eval(const Context& ctx, const std::string& task) {
  const auto& cfg = ctx.config.at("eval");
  if (!cfg.at("attribute").contains(task)) {
    throw ConfigError("eval task must be gender, depression, mbti or custom, got '" + task + "'");
  }
  if (cfg.at("attribute").at(task).is_null()) throw ConfigError("eval.attribute." + task + " is not set");
  const auto attribute = cfg.at("attribute").at(task).get<std::string>();
  const bool mbti = task == "mbti";

  Manifest m;
  m.stage = "eval-" + task;
  m.config = ctx.snapshot({"eval"});
  m.config["task"] = task;
  const auto ingest = ctx.stage("ingest");
  m.inputs["ingest/labels.csv"] = verify_artifact(ingest, "labels.csv");
  m.upstream["ingest"] = sha256_file(ingest / "manifest.json");
  AttributeLabels labels;
  for (const auto& [author, attrs] : load_labels(ingest / "labels.csv")) {
    if (auto it = attrs.find(attribute); it != attrs.end() && !it->second.empty()) labels[author] = it->second;
  }
  if (labels.empty()) throw DataError("no ingested author carries attribute '" + attribute + "'");

  std::vector<ProbeSpec> probes;
  for (const auto& p : cfg.at("probes")) probes.push_back(probe_from(p, ctx.stage_seed("probe")));
  const auto plan = fold_from(cfg.at("fold"), ctx.stage_seed("folds"));

  const auto dir = ctx.stage("eval-" + task);
  make_stage_dir(dir);
  std::vector<std::string> outputs;
  std::vector<EvalReport> reports;
  std::vector<MbtiReport> mbti_reports;
  json summary{{"task", task}, {"attribute", attribute}, {"authors", labels.size()}, {"rows", json::array()}};
  std::optional<EmbeddingTable> first_table;
  std::string first_display;

  for (const auto& p : probes) {
    for (const auto& name : cfg.at("embeddings")) {
      const auto src = source_for(name.get<std::string>());
      const auto table = load_table(ctx, src, m);
      if (!first_table) {
        first_table = table;
        first_display = src.display;
      }
      const std::string stem = slug(name.get<std::string>()) + "-" + slug(p.name());
      if (mbti) {
        auto r = mbti_axis_benchmark(table, labels, plan, p, src.display);
        write_json(dir / (stem + ".json"), r.to_json());
        r.types.write_csv(dir / (stem + "-types.csv"), true);
        outputs.insert(outputs.end(), {stem + ".json", stem + "-types.csv"});
        json row{{"embedding", src.display}, {"probe", p.name()}};
        for (const auto& axis : r.axes) row[axis.task] = {{"avg", axis.f1.avg}, {"std", axis.f1.std}};
        summary["rows"].push_back(row);
        mbti_reports.push_back(std::move(r));
      } else {
        auto r = run_benchmark(table, labels, plan, p, src.display, task);
        write_json(dir / (stem + ".json"), r.to_json());
        r.confusion.write_csv(dir / (stem + "-confusion.csv"), true);
        write_predictions(dir / (stem + "-predictions.csv"), r.predictions);
        outputs.insert(outputs.end(), {stem + ".json", stem + "-confusion.csv", stem + "-predictions.csv"});
        summary["rows"].push_back({{"embedding", src.display},
                                   {"probe", p.name()},
                                   {"avg", r.f1.avg},
                                   {"std", r.f1.std},
                                   {"min", r.f1.min},
                                   {"max", r.f1.max}});
        reports.push_back(std::move(r));
      }
    }
  }

  std::string table_text;
  if (mbti) {
    table_text = mbti_comparison_table(mbti_reports);
  } else {
    table_text = comparison_table(reports, "Weighted F1 on " + task + " (" + attribute + ")");
    std::vector<std::string> values;
    for (const auto& [_, v] : labels) values.push_back(v);
    const double chance = chance_weighted_f1(values);
    summary["chance_f1"] = chance;
    std::ostringstream extra;
    extra << std::fixed << std::setprecision(3) << "prior-matched chance F1: " << chance << '\n';

    if (cfg.at("shuffled_control").get<bool>() && first_table && !probes.empty()) {
      // Same embeddings, labels permuted across authors.
      std::vector<std::string> authors;
      for (const auto& [a, v] : labels) authors.push_back(a);
      std::mt19937_64 rng(ctx.stage_seed("shuffled-control"));
      std::shuffle(values.begin(), values.end(), rng);
      AttributeLabels shuffled;
      for (std::size_t i = 0; i < authors.size(); ++i) shuffled[authors[i]] = values[i];
      const auto control = run_benchmark(*first_table, shuffled, plan, probes.front(),
                                         first_display + " (shuffled labels)", task);
      write_json(dir / "control.json", control.to_json());
      outputs.push_back("control.json");
      summary["control"] = {{"embedding", control.embedding_name}, {"probe", control.probe.name()},
                            {"avg", control.f1.avg}, {"std", control.f1.std},
                            {"fold_f1", control.fold_f1}};
      extra << "control " << control.probe.name() << ' ' << control.embedding_name << ": " << control.f1.avg
            << " +/- " << control.f1.std << '\n';
    }
    table_text += extra.str();
  }
  write_text(dir / "table.txt", table_text);
  write_json(dir / "summary.json", summary);
  outputs.insert(outputs.end(), {"table.txt", "summary.json"});
  write_manifest(m, dir, outputs);
  ctx.log() << table_text;
  return 0;
}

int cmd_viz(const Context& ctx) {
  const auto& cfg = ctx.config.at("viz");
  const auto name = cfg.at("embedding").get<std::string>();
  const auto attribute = cfg.at("attribute").get<std::string>();
  Manifest m;
  m.stage = "viz";
  m.config = ctx.snapshot({"viz"});
  const auto table = load_table(ctx, source_for(name), m);
  const auto ingest = ctx.stage("ingest");
  m.inputs["ingest/labels.csv"] = verify_artifact(ingest, "labels.csv");
  const auto labels = load_labels(ingest / "labels.csv");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(table.size()), table.begin()->second.size());
  std::vector<std::string> ids;
  for (const auto& [id, v] : table) {
    x.row(static_cast<Eigen::Index>(ids.size())) = v.transpose();
    ids.push_back(id);
  }
  TsneConfig tc;
  tc.perplexity = cfg.at("perplexity");
  tc.iterations = cfg.at("iterations");
  tc.learning_rate = cfg.at("learning_rate");
  tc.seed = ctx.stage_seed("tsne");
  const auto result = tsne_project(x, tc);

  std::vector<ScatterPoint> points;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::string label;
    if (auto it = labels.find(ids[i]); it != labels.end()) {
      if (auto a = it->second.find(attribute); a != it->second.end()) label = a->second;
    }
    points.push_back({ids[i], result.coords(static_cast<Eigen::Index>(i), 0), result.coords(static_cast<Eigen::Index>(i), 1), label});
  }
  const auto dir = ctx.stage("viz");
  make_stage_dir(dir);
  const std::string stem = slug(name) + "-" + slug(attribute);
  export_scatter(points, dir / stem, source_for(name).display + " t-SNE, colored by " + attribute);
  write_manifest(m, dir, {stem + ".csv", stem + ".svg"});
  ctx.log() << "viz: " << points.size() << " points, final KL " << result.kl.back() << " -> " << (dir / stem).string()
            << ".svg\n";
  return 0;
}

int family_code(const Error& e) { return static_cast<int>(e.family()); }

}  // namespace

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json* node = &config;
  std::string part;
  std::istringstream path(key);
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i])) throw ConfigError("unknown config key '" + key + "'");
    node = &(*node)[parts[i]];
  }
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  *node = std::move(value);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Author2Vec: author embeddings pretrained on authorship classification", "author2vec"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string output;
  std::vector<std::string> overrides;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "global seed (overrides config)");
    sub->add_option("--threads", threads, "worker cap; 1 gives bitwise-reproducible outputs");
    sub->add_option("--output", output, "run root directory (overrides config)");
    sub->add_option("--set", overrides, "override a config key, e.g. --set pretrain.epochs=5");
  };
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus into <output>/data");
  auto* ingest = app.add_subcommand("ingest", "filter the corpus and embed posts");
  auto* pre = app.add_subcommand("pretrain", "authorship-classification pre-training");
  auto* embed = app.add_subcommand("embed-authors", "encode every author with the pretrained model");
  auto* baseline = app.add_subcommand("baseline", "fit a count/prediction-based user embedding");
  std::string baseline_kind;
  baseline->add_option("kind", baseline_kind, "lsi | lda | wordvec")->required();
  auto* eval = app.add_subcommand("eval", "downstream attribute classification benchmark");
  std::string task;
  eval->add_option("task", task, "gender | depression | mbti | custom")->required();
  auto* viz = app.add_subcommand("viz", "t-SNE scatter plot of an embedding");
  for (auto* sub : {synth, ingest, pre, embed, baseline, eval, viz}) add_common(sub);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorFamily::config);
  }

  try {
    json config = default_config();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config file " + config_path);
      json given;
      try {
        in >> given;
      } catch (const json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      check_known_keys(given, config, "");
      config.merge_patch(given);
    }
    for (const auto& o : overrides) apply_override(config, o);
    if (seed) config["seed"] = *seed;
    if (threads) config["threads"] = *threads;
    if (!output.empty()) config["output"] = output;

    Context ctx;
    ctx.config = config;
    ctx.seed = config.at("seed").get<std::uint64_t>();
    ctx.threads = std::max<std::size_t>(1, config.at("threads").get<std::size_t>());
    ctx.root = config.at("output").get<std::string>();
    ctx.out = &out;

    if (*synth) return cmd_synth(ctx);
    if (*ingest) return cmd_ingest(ctx);
    if (*pre) return cmd_pretrain(ctx);
    if (*embed) return cmd_embed(ctx);
    if (*baseline) return cmd_baseline(ctx, baseline_kind);
    if (*eval) return cmd_eval(ctx, task);
    if (*viz) return cmd_viz(ctx);
    return static_cast<int>(ErrorFamily::config);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return family_code(e);
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return static_cast<int>(ErrorFamily::config);
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return static_cast<int>(ErrorFamily::io);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace a2v::cli
