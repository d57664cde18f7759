#include <gtest/gtest.h>

#include <sstream>

#include "author2vec/cli.hpp"
#include "author2vec/common.hpp"
#include "author2vec/embedstore.hpp"
#include "author2vec/manifest.hpp"
#include "author2vec/pretrain.hpp"
#include "fixtures.hpp"

using namespace a2v;
using a2v::test::TempDir;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "seed": 3,
  "synth": {"authors": 16, "posts_per_author": 30},
  "embedder": {"dim": 16, "plant": {"attribute": "trait", "value": "1", "strength": 0.5}},
  "pretrain": {"min_valid_posts": 25, "heldout_posts": 10, "min_posts": 5, "max_posts": 15,
               "hidden": 16, "code_dim": 64, "k_train": 8, "k_infer": 16, "head_hidden": [32], "epochs": 3},
  "baselines": {"min_df": 2, "lsi": {"rank": 8}, "lda": {"topics": 4, "iterations": 30, "inference_sweeps": 10}},
  "eval": {"attribute": {"custom": "trait"}, "probes": [{"kind": "logreg"}],
           "fold": {"scheme": "kfold", "k": 3, "stratify": true}},
  "viz": {"attribute": "trait", "perplexity": 3.0, "iterations": 250}
})";

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

/// Runs every stage into `root` and returns the first failure, if any.
std::string run_pipeline(const fs::path& config, const fs::path& root) {
  const std::vector<std::vector<std::string>> stages{
      {"synth"}, {"ingest"}, {"pretrain"}, {"embed-authors"}, {"baseline", "lsi"},
      {"baseline", "lda"}, {"baseline", "wordvec"}, {"eval", "custom"}, {"viz"}};
  for (auto args : stages) {
    const std::string name = args.front();
    args.insert(args.end(), {"--config", config.string(), "--output", root.string(), "--threads", "1"});
    const auto o = invoke(args);
    if (o.code != 0) return name + " exited " + std::to_string(o.code) + ": " + o.err;
  }
  return "";
}

const std::vector<std::string> kStages{"data", "ingest", "pretrain", "embed", "baseline-lsi",
                                       "baseline-lda", "baseline-wordvec", "eval-custom", "viz"};

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("a2v-cli");
    test::write_text(config(), kSmallConfig);
    failure_ = run_pipeline(config(), root());
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  void SetUp() override { ASSERT_EQ(failure_, ""); }

  static fs::path config() { return *dir_ / "config.json"; }
  static fs::path root() { return *dir_ / "run"; }
  static std::vector<std::string> with_config(std::vector<std::string> args, const fs::path& out) {
    args.insert(args.end(), {"--config", config().string(), "--output", out.string()});
    return args;
  }

  static inline TempDir* dir_ = nullptr;
  static inline std::string failure_;
};

}  // namespace

TEST_F(Pipeline, EveryStageWritesAManifest) {
  for (const auto& s : kStages) {
    ASSERT_TRUE(fs::exists(root() / s / "manifest.json")) << s;
    EXPECT_EQ(read_manifest(root() / s).stage.empty(), false);
  }
  EXPECT_TRUE(fs::exists(root() / "viz" / "author2vec-trait.svg"));
  const auto emb = read_author_embeddings(root() / "embed" / "author_embeddings.av1");
  EXPECT_EQ(emb.size(), 16u);
  EXPECT_EQ(emb.front().vector.size(), 64);
}

TEST_F(Pipeline, OneCombinedTable) {
  const auto table = test::read_bytes(root() / "eval-custom" / "table.txt");
  std::size_t headers = 0;
  for (auto pos = table.find("Model"); pos != std::string::npos; pos = table.find("Model", pos + 1)) ++headers;
  EXPECT_EQ(headers, 1u);
  for (const char* row : {"LR Author2Vec", "LR LSI", "LR LDA", "LR WordVec"}) {
    EXPECT_NE(table.find(row), std::string::npos) << row;
  }
  EXPECT_NE(table.find("control"), std::string::npos);
}

TEST_F(Pipeline, RerunIsByteIdentical) {
  TempDir other("a2v-cli-again");
  ASSERT_EQ(run_pipeline(config(), other.path()), "");
  for (const auto& s : kStages) {
    EXPECT_EQ(test::read_bytes(root() / s / "manifest.json"), test::read_bytes(other.path() / s / "manifest.json"))
        << s;
  }
}

TEST_F(Pipeline, StaleUpstreamIsDataError) {
  TempDir copy("a2v-cli-stale");
  fs::copy(root(), copy.path(), fs::copy_options::recursive);
  auto bytes = test::read_bytes(copy.path() / "ingest" / "post_embeddings.av1");
  bytes[bytes.size() - 1] ^= 0x01;
  test::write_bytes(copy.path() / "ingest" / "post_embeddings.av1", bytes);
  const auto o = invoke(with_config({"pretrain"}, copy.path()));
  EXPECT_EQ(o.code, static_cast<int>(ErrorFamily::data)) << o.err;
  EXPECT_NE(o.err.find("post_embeddings.av1"), std::string::npos);
}

TEST_F(Pipeline, MissingUpstreamIsConfigError) {
  TempDir empty("a2v-cli-empty");
  EXPECT_EQ(invoke(with_config({"embed-authors"}, empty.path())).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke(with_config({"ingest"}, empty.path())).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke(with_config({"eval", "custom"}, empty.path())).code, static_cast<int>(ErrorFamily::config));
}

TEST(Cli, UnknownConfigKeyIsRejected) {
  TempDir dir;
  test::write_text(dir / "c.json", R"({"pretrain": {"epochz": 3}})");
  const auto o = invoke({"synth", "--config", (dir / "c.json").string(), "--output", (dir / "run").string()});
  EXPECT_EQ(o.code, static_cast<int>(ErrorFamily::config));
  EXPECT_NE(o.err.find("epochz"), std::string::npos);
}

TEST(Cli, ParseErrorsAndMissingConfigFile) {
  EXPECT_EQ(invoke({}).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke({"frobnicate"}).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke({"eval", "weather", "--output", "/nonexistent"}).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke({"synth", "--config", "/nonexistent/c.json"}).code, static_cast<int>(ErrorFamily::config));
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, Overrides) {
  auto cfg = cli::default_config();
  cli::apply_override(cfg, "pretrain.epochs=7");
  EXPECT_EQ(cfg["pretrain"]["epochs"], 7);
  cli::apply_override(cfg, "baselines.lsi.mode=mean_post");
  EXPECT_EQ(cfg["baselines"]["lsi"]["mode"], "mean_post");
  cli::apply_override(cfg, "pretrain.head_hidden=[8,4]");
  EXPECT_EQ(cfg["pretrain"]["head_hidden"].size(), 2u);
  EXPECT_THROW(cli::apply_override(cfg, "pretrain.nothing=1"), ConfigError);
  EXPECT_THROW(cli::apply_override(cfg, "no-equals"), ConfigError);
}

TEST(Cli, SetFlagReachesTheStage) {
  TempDir dir;
  const auto o = invoke({"synth", "--output", dir.path().string(), "--set", "synth.authors=5", "--set",
                         "synth.posts_per_author=3"});
  ASSERT_EQ(o.code, 0) << o.err;
  const auto m = read_manifest(dir / "data");
  EXPECT_EQ(m.config["synth"]["authors"], 5);
}
