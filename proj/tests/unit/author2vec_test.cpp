#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "author2vec/pretrain.hpp"
#include "author2vec/synthetic.hpp"
#include "fixtures.hpp"

using namespace a2v;
using a2v::test::TempDir;
using a2v::test::random_author;

namespace {

ModelShape small_shape() {
  ModelShape s;
  s.hidden = 16;
  s.code_dim = 64;
  s.k_train = 8;
  s.k_infer = 16;
  s.head_hidden = {32};
  return s;
}

PretrainConfig small_config() {
  PretrainConfig c;
  c.shape = small_shape();
  c.min_posts = 5;
  c.max_posts = 15;
  c.epochs = 2;
  c.seed = 3;
  return c;
}

/// Stub post embeddings for a synthetic corpus, one matrix per author.
std::vector<PostEmbeddingMatrix> stub_authors(std::size_t authors, std::size_t dim, std::uint64_t seed) {
  SyntheticConfig sc;
  sc.authors = authors;
  sc.junk_posts_per_author = 0;
  sc.seed = seed;
  const auto corpus = group_posts(make_synthetic_corpus(sc).posts);
  StubEmbedderConfig ec;
  ec.dim = dim;
  ec.seed = seed;
  StubEmbedder stub(ec);
  std::vector<PostEmbeddingMatrix> out;
  for (const auto& a : corpus) out.push_back(stub.embed_author(a));
  return out;
}

std::size_t nonzeros(const Eigen::VectorXf& v) { return static_cast<std::size_t>((v.array() != 0.0f).count()); }

}  // namespace

TEST(SampleExample, MinimumRangeTakesEveryPost) {
  auto cfg = small_config();
  cfg.min_posts = cfg.max_posts = 7;
  const auto author = random_author("a", 7, 4, 1);
  std::mt19937_64 rng(1);
  const auto ex = sample_training_example(author, 3, cfg, rng);
  EXPECT_EQ(ex.rows, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(ex.target, 3);
  EXPECT_TRUE(ex.sequence == author.values.transpose());
}

TEST(SampleExample, SameRngStateSameSubset) {
  const auto author = random_author("a", 50, 4, 2);
  std::mt19937_64 r1(9), r2(9);
  const auto a = sample_training_example(author, 0, small_config(), r1);
  const auto b = sample_training_example(author, 0, small_config(), r2);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_TRUE(std::is_sorted(a.rows.begin(), a.rows.end()));
  EXPECT_EQ(std::set<std::size_t>(a.rows.begin(), a.rows.end()).size(), a.rows.size());
}

TEST(SampleExample, CoversEveryPostAndRespectsRange) {
  auto cfg = small_config();
  cfg.min_posts = 10;
  cfg.max_posts = 40;
  const auto author = random_author("a", 100, 2, 3);
  std::mt19937_64 rng(4);
  std::vector<int> hits(100, 0);
  std::size_t smallest = 1000, largest = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto ex = sample_training_example(author, 0, cfg, rng);
    smallest = std::min(smallest, ex.rows.size());
    largest = std::max(largest, ex.rows.size());
    for (auto r : ex.rows) ++hits[r];
  }
  EXPECT_GT(*std::min_element(hits.begin(), hits.end()), 0);
  EXPECT_EQ(smallest, 10u);
  EXPECT_EQ(largest, 40u);
}

TEST(SampleExample, TooFewPostsIsDataError) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_training_example(random_author("a", 3, 2, 1), 0, small_config(), rng), DataError);
}

TEST(SplitEmbeddings, MirrorsPostSplit) {
  std::vector<PostEmbeddingMatrix> authors{random_author("a", 81, 3, 1), random_author("b", 80, 3, 2)};
  const auto split = split_embeddings(authors, 80, 40, 5);
  ASSERT_EQ(split.train.size(), 1u);
  EXPECT_EQ(split.train[0].rows(), 41u);
  EXPECT_EQ(split.heldout[0].rows(), 40u);
  const auto held = choose_heldout_indices(81, 40, mix_seed(5, "a"));
  EXPECT_EQ(split.heldout[0].values.row(0), authors[0].values.row(static_cast<Eigen::Index>(held[0])));
}

TEST(PretrainConfig, JsonRoundTripAndValidation) {
  auto c = small_config();
  c.shape.pooling = nn::Pooling::mean;
  c.lr_decay = 0.9;
  const auto back = PretrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.shape.pooling, nn::Pooling::mean);
  auto j = c.to_json();
  j["max_posts"] = 1;
  EXPECT_THROW(PretrainConfig::from_json(j), ConfigError);
  j = c.to_json();
  j["pooling"] = "max";
  EXPECT_THROW(PretrainConfig::from_json(j), ConfigError);
}

TEST(Pretrain, SeparableStubCorpusReachesHighTop1) {
  const auto authors = stub_authors(50, 32, 21);
  const auto split = split_embeddings(authors, 40, 20, 2);
  ASSERT_EQ(split.train.size(), 50u);
  PretrainConfig cfg;
  cfg.shape = small_shape();
  cfg.shape.hidden = 32;
  cfg.shape.code_dim = 128;
  cfg.shape.k_train = 16;
  cfg.shape.k_infer = 32;
  cfg.epochs = 30;
  cfg.learning_rate = 3e-3;
  cfg.patience = 0;
  cfg.seed = 5;
  auto model = make_pretrain_model(cfg, 32, split.train.size());
  const auto result = pretrain(model, split.train, split.heldout, cfg);
  ASSERT_FALSE(result.log.empty());
  double best = 0;
  for (const auto& e : result.log) best = std::max(best, e.top1);
  EXPECT_GE(best, 0.9);
  std::vector<Eigen::Index> classes(split.train.size());
  std::iota(classes.begin(), classes.end(), 0);
  const auto scores = evaluate_heldout(model, split.heldout, classes);
  EXPECT_EQ(scores.top1, result.log[result.best_epoch - 1].top1);
}

TEST(Pretrain, IndistinguishableAuthorsStayAtChance) {
  auto a = random_author("a", 30, 6, 1);
  auto b = a;
  b.author_id = "b";
  const std::vector<PostEmbeddingMatrix> train{a, b};
  auto cfg = small_config();
  cfg.epochs = 3;
  auto model = make_pretrain_model(cfg, 6, 2);
  const auto result = pretrain(model, train, train, cfg);
  for (const auto& e : result.log) EXPECT_EQ(e.top1, 0.5);
}

TEST(Pretrain, DeterministicAcrossThreadCounts) {
  const auto authors = stub_authors(6, 8, 4);
  auto cfg = small_config();
  auto run = [&](std::size_t threads) {
    cfg.threads = threads;
    auto model = make_pretrain_model(cfg, 8, authors.size());
    pretrain(model, authors, {}, cfg);
    return model;
  };
  auto one = run(1);
  auto three = run(3);
  auto p1 = one.params();
  auto p3 = three.params();
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(*p1[i].value, *p3[i].value) << p1[i].name;
}

TEST(Pretrain, EpochHookAndEarlyStop) {
  auto a = random_author("a", 30, 6, 1);
  auto b = a;
  b.author_id = "b";
  const std::vector<PostEmbeddingMatrix> train{a, b};
  auto cfg = small_config();
  cfg.epochs = 20;
  cfg.patience = 2;
  // Parameters stay put, so the held-out loss never improves after epoch 1.
  cfg.learning_rate = 1e-30;
  std::size_t calls = 0;
  PretrainHooks hooks;
  hooks.on_epoch = [&](const AuthorVecModel&, const EpochLog&, const nn::AdamState<float>&) { ++calls; };
  auto model = make_pretrain_model(cfg, 6, 2);
  const auto result = pretrain(model, train, train, cfg, hooks);
  EXPECT_EQ(calls, result.log.size());
  EXPECT_TRUE(result.stopped_early);
  EXPECT_LT(result.log.size(), 20u);
}

TEST(Pretrain, RejectsStrippedModel) {
  auto model = make_pretrain_model(small_config(), 4, 2);
  model.strip_head();
  const std::vector<PostEmbeddingMatrix> train{random_author("a", 20, 4, 1), random_author("b", 20, 4, 2)};
  EXPECT_THROW(pretrain(model, train, {}, small_config()), ConfigError);
  EXPECT_THROW(model.logits(nn::Matrix<float>::Zero(4, 3)), ConfigError);
  EXPECT_THROW(make_pretrain_model(small_config(), 4, 1), DataError);
}

TEST(Embed, SparsityAndSequenceSensitivity) {
  const auto model = make_pretrain_model(small_config(), 8, 3);
  const auto author = random_author("a", 12, 8, 1);
  const auto e = embed_author(model, author);
  EXPECT_EQ(e.vector.size(), 64);
  EXPECT_LE(nonzeros(e.vector), 16u);
  EXPECT_GT(nonzeros(e.vector), 8u);

  const auto single = embed_author(model, random_author("s", 1, 8, 2));
  EXPECT_TRUE(single.vector.allFinite());
  EXPECT_LE(nonzeros(single.vector), 16u);

  PostEmbeddingMatrix doubled{"a", RowMatrixF(24, 8)};
  for (Eigen::Index i = 0; i < 12; ++i) doubled.values.row(2 * i) = doubled.values.row(2 * i + 1) = author.values.row(i);
  EXPECT_NE(embed_author(model, doubled).vector, e.vector);

  EXPECT_THROW(embed_author(model, random_author("w", 3, 7, 1)), DataError);
}

TEST(Embed, HeadPlaysNoPartAndThreadsAgree) {
  auto model = make_pretrain_model(small_config(), 8, 3);
  std::vector<PostEmbeddingMatrix> authors;
  for (int i = 0; i < 5; ++i) authors.push_back(random_author("a" + std::to_string(i), 4 + i, 8, 10 + i));
  const auto before = embed_authors(model, authors, 1);
  const auto parallel = embed_authors(model, authors, 3);
  model.strip_head();
  const auto after = embed_authors(model, authors, 1);
  for (std::size_t i = 0; i < authors.size(); ++i) {
    EXPECT_EQ(before[i].vector, after[i].vector);
    EXPECT_EQ(before[i].vector, parallel[i].vector);
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  TempDir dir;
  auto cfg = small_config();
  cfg.shape.pooling = nn::Pooling::mean;
  auto model = make_pretrain_model(cfg, 8, 4);
  save_checkpoint(model, {{"epoch", "3"}, {"note", "x"}}, dir / "m.ckpt");
  auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.metadata.at("epoch"), "3");
  EXPECT_EQ(back.model.shape().pooling, nn::Pooling::mean);
  EXPECT_EQ(back.model.shape().head_hidden, cfg.shape.head_hidden);
  auto a = model.params();
  auto b = back.model.params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].value->size(), b[i].value->size());
    EXPECT_EQ(std::memcmp(a[i].value->data(), b[i].value->data(), sizeof(float) * a[i].value->size()), 0) << a[i].name;
  }
  save_checkpoint(back.model, back.metadata, dir / "again.ckpt");
  EXPECT_EQ(test::read_bytes(dir / "m.ckpt"), test::read_bytes(dir / "again.ckpt"));
}

TEST(Checkpoint, OptimizerStateRoundTrip) {
  TempDir dir;
  const std::vector<PostEmbeddingMatrix> train{random_author("a", 20, 4, 1), random_author("b", 20, 4, 2)};
  auto cfg = small_config();
  auto model = make_pretrain_model(cfg, 4, 2);
  PretrainHooks hooks;
  hooks.on_epoch = [&](const AuthorVecModel& m, const EpochLog&, const nn::AdamState<float>& adam) {
    save_checkpoint(m, {}, dir / "last.ckpt", &adam);
  };
  pretrain(model, train, {}, cfg, hooks);
  const auto back = load_checkpoint(dir / "last.ckpt");
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_GT(back.optimizer->step, 0u);
  EXPECT_EQ(back.optimizer->first.size(), model.params().size());
  EXPECT_GT(back.optimizer->second.front().cwiseAbs().maxCoeff(), 0.0f);
  save_checkpoint(back.model, back.metadata, dir / "again.ckpt", &*back.optimizer);
  EXPECT_EQ(test::read_bytes(dir / "last.ckpt"), test::read_bytes(dir / "again.ckpt"));
  save_checkpoint(back.model, back.metadata, dir / "plain.ckpt");
  EXPECT_FALSE(load_checkpoint(dir / "plain.ckpt").optimizer.has_value());
}

TEST(Checkpoint, StrippedIsSmallerAndLoadsHeadless) {
  TempDir dir;
  auto model = make_pretrain_model(small_config(), 8, 4);
  save_checkpoint(model, {}, dir / "full.ckpt");
  model.strip_head();
  save_checkpoint(model, {}, dir / "enc.ckpt");
  EXPECT_LT(std::filesystem::file_size(dir / "enc.ckpt"), std::filesystem::file_size(dir / "full.ckpt"));
  EXPECT_FALSE(load_checkpoint(dir / "enc.ckpt").model.has_head());
}

TEST(Checkpoint, CorruptionFamilies) {
  TempDir dir;
  const auto model = make_pretrain_model(small_config(), 8, 4);
  save_checkpoint(model, {}, dir / "m.ckpt");
  const auto bytes = test::read_bytes(dir / "m.ckpt");

  auto bad = bytes;
  bad[2] = 'Z';
  test::write_bytes(dir / "magic.ckpt", bad);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), DataError);

  test::write_bytes(dir / "short.ckpt", bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), DataError);

  test::write_bytes(dir / "long.ckpt", bytes + "x");
  EXPECT_THROW(load_checkpoint(dir / "long.ckpt"), DataError);

  bad = bytes;
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(bad.data() + bad.size() - sizeof(float), &inf, sizeof(float));
  test::write_bytes(dir / "inf.ckpt", bad);
  EXPECT_THROW(load_checkpoint(dir / "inf.ckpt"), NonFiniteValueError);

  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), IoError);
}

TEST(AuthorEmbeddings, FileAndCsv) {
  TempDir dir;
  const auto model = make_pretrain_model(small_config(), 8, 3);
  std::vector<PostEmbeddingMatrix> authors{random_author("x", 4, 8, 1), random_author("y", 6, 8, 2)};
  const auto emb = embed_authors(model, authors);
  write_author_embeddings(emb, dir / "a.av1");
  const auto back = read_author_embeddings(dir / "a.av1");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].author_id, "y");
  EXPECT_EQ(back[1].vector, emb[1].vector);

  write_sparse_csv(emb, dir / "a.csv");
  std::ifstream in(dir / "a.csv");
  std::string line;
  std::getline(in, line);
  if (line.rfind("author_id", 0) == 0) std::getline(in, line);
  EXPECT_EQ(line.rfind("x,", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ':')), nonzeros(emb[0].vector));
}
