#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "author2vec/baselines.hpp"
#include "fixtures.hpp"

using namespace a2v;
using a2v::test::TempDir;

namespace {

/// Documents drawn from two topics with disjoint vocabularies a0..a9 and b0..b9.
std::vector<TokenList> two_topic_docs(std::size_t docs, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 9);
  std::vector<TokenList> out;
  for (std::size_t d = 0; d < docs; ++d) {
    const std::string stem = d % 2 == 0 ? "a" : "b";
    TokenList doc;
    for (std::size_t i = 0; i < length; ++i) doc.push_back(stem + std::to_string(word(rng)));
    out.push_back(std::move(doc));
  }
  return out;
}

LdaModel fit_two_topics(std::uint64_t seed, LdaTrace* trace = nullptr) {
  const auto docs = two_topic_docs(40, 30, 1);
  const auto dict = build_dictionary(docs, 1, 1.0);
  LdaConfig cfg;
  cfg.topics = 2;
  cfg.alpha = 0.1;
  cfg.iterations = 200;
  cfg.seed = seed;
  return fit_lda(count_matrix(docs, dict), dict, cfg, trace);
}

}  // namespace

TEST(Dictionary, MinDocumentFrequency) {
  std::vector<TokenList> docs(1000, TokenList{"common"});
  for (int i = 0; i < 9; ++i) docs[static_cast<std::size_t>(i)].push_back("rare");
  for (int i = 0; i < 10; ++i) docs[static_cast<std::size_t>(100 + i)].push_back("ten");
  const auto dict = build_dictionary(docs, 10, 1.0);
  EXPECT_EQ(dict.column("rare"), -1);
  EXPECT_GE(dict.column("ten"), 0);
}

TEST(Dictionary, MaxDocumentFraction) {
  std::vector<TokenList> docs(100, TokenList{"x"});
  for (int i = 0; i < 31; ++i) docs[static_cast<std::size_t>(i)].push_back("frequent");
  for (int i = 0; i < 30; ++i) docs[static_cast<std::size_t>(50 + i)].push_back("edge");
  const auto dict = build_dictionary(docs, 1, 0.30);
  EXPECT_EQ(dict.column("frequent"), -1);
  EXPECT_GE(dict.column("edge"), 0);
  EXPECT_EQ(dict.column("x"), -1);
}

TEST(Dictionary, PermissiveKeepsEverythingSorted) {
  std::vector<TokenList> docs{{"b", "a"}, {"c"}, {"a", "a"}};
  const auto dict = build_dictionary(docs, 1, 1.0);
  EXPECT_EQ(dict.tokens(), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(dict.doc_freq(), (std::vector<std::size_t>{2, 1, 1}));
}

TEST(TfIdf, HandComputedWeight) {
  std::vector<TokenList> docs{{"t", "t", "u"}, {"u"}, {"v"}};
  const auto dict = build_dictionary(docs, 1, 1.0);
  const auto v = tfidf_vector(docs[0], dict);
  EXPECT_NEAR(v.coeff(dict.column("t")), 2 * std::log(3.0), 1e-12);
  EXPECT_NEAR(v.coeff(dict.column("u")), std::log(3.0 / 2.0), 1e-12);
  EXPECT_EQ(tfidf_vector({"zzz"}, dict).nonZeros(), 0);
  const auto m = tfidf_matrix(docs, dict);
  EXPECT_NEAR(m.coeff(0, dict.column("t")), 2 * std::log(3.0), 1e-12);
}

TEST(Lsi, UserModesAndDegenerateAuthors) {
  const auto docs = two_topic_docs(30, 12, 2);
  const auto dict = build_dictionary(docs, 1, 1.0);
  const auto model = fit_lsi(tfidf_matrix(docs, dict), dict, 5, 3);
  ASSERT_EQ(model.rank(), 5u);

  const std::vector<TokenList> one{docs[0]};
  const auto concat = lsi_user_embedding(one, model, LsiUserMode::concat_doc);
  const auto mean = lsi_user_embedding(one, model, LsiUserMode::mean_post);
  EXPECT_LT((concat.values - mean.values).norm(), 1e-12);

  const std::vector<TokenList> twice{docs[0], docs[0]};
  const auto doubled = lsi_user_embedding(twice, model, LsiUserMode::concat_doc);
  EXPECT_LT((doubled.values - 2.0 * concat.values).norm(), 1e-9);
  const double cos = doubled.values.dot(concat.values) / (doubled.values.norm() * concat.values.norm());
  EXPECT_NEAR(cos, 1.0, 1e-12);

  const auto empty = lsi_user_embedding({}, model, LsiUserMode::concat_doc);
  EXPECT_EQ(empty.values.norm(), 0.0);
  EXPECT_TRUE(empty.warning);
}

TEST(Lsi, DeterministicAndSaveLoad) {
  TempDir dir;
  const auto docs = two_topic_docs(30, 12, 4);
  const auto dict = build_dictionary(docs, 1, 1.0);
  const auto a = fit_lsi(tfidf_matrix(docs, dict), dict, 4, 9);
  const auto b = fit_lsi(tfidf_matrix(docs, dict), dict, 4, 9);
  EXPECT_EQ(a.projection, b.projection);
  save_lsi(a, dir / "lsi.bin");
  const auto c = load_lsi(dir / "lsi.bin");
  EXPECT_EQ(c.projection, a.projection);
  EXPECT_EQ(c.idf, a.idf);
  EXPECT_EQ(c.dictionary.tokens(), a.dictionary.tokens());
  EXPECT_EQ(a.embed_post(docs[3]), c.embed_post(docs[3]));
}

TEST(Lda, SingleTopicIsPointMass) {
  const auto docs = two_topic_docs(10, 10, 5);
  const auto dict = build_dictionary(docs, 1, 1.0);
  LdaConfig cfg;
  cfg.topics = 1;
  cfg.iterations = 5;
  const auto model = fit_lda(count_matrix(docs, dict), dict, cfg);
  for (const auto& d : docs) {
    const std::vector<TokenList> author{d};
    EXPECT_EQ(lda_user_embedding(author, model).values[0], 1.0);
  }
}

TEST(Lda, RecoversDisjointVocabularies) {
  LdaTrace trace;
  const auto model = fit_two_topics(7, &trace);
  const auto phi = model.phi();
  for (Eigen::Index k = 0; k < 2; ++k) {
    double a_mass = 0;
    for (std::size_t c = 0; c < model.dictionary.size(); ++c) {
      if (model.dictionary.tokens()[c][0] == 'a') a_mass += phi(k, static_cast<Eigen::Index>(c));
    }
    EXPECT_GE(std::max(a_mass, 1.0 - a_mass), 0.9) << "topic " << k;
  }
  for (double total : trace.token_counts) EXPECT_EQ(total, 40.0 * 30.0);
}

TEST(Lda, FoldInOnOneTopicDocument) {
  const auto model = fit_two_topics(8);
  const auto phi = model.phi();
  const Eigen::Index topic_a = phi(0, model.dictionary.column("a0")) > phi(1, model.dictionary.column("a0")) ? 0 : 1;
  const std::vector<TokenList> author{two_topic_docs(1, 30, 99)[0]};
  const auto u = lda_user_embedding(author, model);
  EXPECT_NEAR(u.values.sum(), 1.0, 1e-9);
  EXPECT_GE(u.values[topic_a], 0.9);
}

TEST(Lda, EmptyAuthorIsUniform) {
  const auto model = fit_two_topics(9);
  const auto u = lda_user_embedding({}, model);
  EXPECT_TRUE(u.warning);
  EXPECT_EQ(u.values[0], 0.5);
  EXPECT_EQ(u.values[1], 0.5);
}

TEST(Lda, SameSeedSameAssignments) {
  LdaTrace a, b;
  fit_two_topics(10, &a);
  fit_two_topics(10, &b);
  EXPECT_EQ(a.final_assignments, b.final_assignments);
}

TEST(Lda, SaveLoadRoundTrip) {
  TempDir dir;
  const auto model = fit_two_topics(11);
  save_lda(model, dir / "lda.bin");
  const auto back = load_lda(dir / "lda.bin");
  EXPECT_EQ(back.topic_word, model.topic_word);
  const std::vector<TokenList> author{{"a1", "a2", "b3"}};
  EXPECT_EQ(lda_user_embedding(author, back).values, lda_user_embedding(author, model).values);
  auto bytes = test::read_bytes(dir / "lda.bin");
  test::write_bytes(dir / "short.bin", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_lda(dir / "short.bin"), DataError);
}

TEST(WordVectors, Averaging) {
  WordVectorTable table(2);
  table.add("u", Eigen::Vector2d(1, 2));
  table.add("v", Eigen::Vector2d(3, -4));
  const std::vector<TokenList> one{{"u"}};
  EXPECT_EQ(wordvec_user_embedding(one, table).values, Eigen::Vector2d(1, 2));
  const std::vector<TokenList> two{{"u"}, {"v", "oov"}};
  EXPECT_EQ(wordvec_user_embedding(two, table).values, Eigen::Vector2d(2, -1));
  const std::vector<TokenList> none{{"oov"}};
  const auto z = wordvec_user_embedding(none, table);
  EXPECT_TRUE(z.warning);
  EXPECT_EQ(z.values.norm(), 0.0);
  EXPECT_THROW(table.add("w", Eigen::Vector3d(1, 2, 3)), DataError);
}

TEST(WordVectors, TextRoundTrip) {
  TempDir dir;
  WordVectorTable table(3);
  table.add("x", Eigen::Vector3d(0.1, -2.5, 1e-7));
  table.save(dir / "wv.txt");
  const auto back = WordVectorTable::load(dir / "wv.txt");
  ASSERT_NE(back.find("x"), nullptr);
  EXPECT_EQ(*back.find("x"), *table.find("x"));
}
