#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "author2vec/evalharness.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace a2v;
using a2v::test::gaussian_matrix;

namespace {

std::vector<std::string> repeat(const std::string& v, std::size_t n) { return std::vector<std::string>(n, v); }

std::vector<std::string> join(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// n authors whose labels are a noisy linear function of 4 features.
struct Labeled {
  EmbeddingTable embeddings;
  AttributeLabels labels;
};
Labeled linear_problem(std::size_t n, double noise, std::uint64_t seed) {
  const auto x = gaussian_matrix(static_cast<Eigen::Index>(n), 4, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> eps(0.0, noise);
  Labeled out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const std::string id = "u" + std::to_string(1000 + i);
    out.embeddings[id] = x.row(r).transpose();
    out.labels[id] = x(r, 0) - 0.5 * x(r, 1) + eps(rng) > 0 ? "pos" : "neg";
  }
  return out;
}

}  // namespace

TEST(WeightedF1, PerfectPrediction) {
  const std::vector<std::string> y{"a", "b", "b", "c"};
  EXPECT_EQ(weighted_f1(y, y), 1.0);
}

TEST(WeightedF1, FourSampleFixture) {
  // P_A = 1, R_A = 2/3 -> F1_A = 0.8; F1_B = 2/3; weighted 0.75 * 0.8 + 0.25 * 2/3
  const std::vector<std::string> t{"A", "A", "A", "B"};
  const std::vector<std::string> p{"A", "A", "B", "B"};
  EXPECT_DOUBLE_EQ(weighted_f1(t, p), 0.75 * 0.8 + 0.25 * 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(weighted_f1(t, p), oracle::weighted_f1(t, p));
}

TEST(WeightedF1, SixSeventhsTwoThirdsFixture) {
  // A: 15 true, 12 hit, 3 called B, 1 B called A -> F1_A = 24/28; B: 5 true, 4 hit -> F1_B = 8/12
  const auto t = join(repeat("A", 15), repeat("B", 5));
  const auto p = join(join(repeat("A", 12), repeat("B", 3)), join(repeat("B", 4), repeat("A", 1)));
  const double expected = 0.75 * 6.0 / 7.0 + 0.25 * 2.0 / 3.0;
  EXPECT_DOUBLE_EQ(weighted_f1(t, p), expected);
  EXPECT_NEAR(weighted_f1(t, p), 0.8095, 5e-5);
}

TEST(WeightedF1, MajorityPredictionOnImbalance) {
  const auto t = join(repeat("m", 4073), repeat("f", 729));
  const auto p = repeat("m", t.size());
  const double acc = 4073.0 / 4802.0;
  const double f1 = weighted_f1(t, p);
  EXPECT_DOUBLE_EQ(f1, acc * (2.0 * 4073 / (2.0 * 4073 + 729)));
  EXPECT_LT(f1, acc - 0.05);
}

TEST(WeightedF1, IntegerOverloadMatchesOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(37), p(37);
    std::vector<std::string> ts, ps;
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = cls(rng);
      p[i] = cls(rng);
      ts.push_back(std::to_string(t[i]));
      ps.push_back(std::to_string(p[i]));
    }
    EXPECT_DOUBLE_EQ(weighted_f1(t, p), oracle::weighted_f1(ts, ps));
  }
}

TEST(TopK, Fixtures) {
  Eigen::MatrixXd s(3, 3);
  s << 0.7, 0.2, 0.1,
       0.6, 0.1, 0.3,
       0.5, 0.4, 0.1;
  const std::vector<int> y{0, 1, 1};
  EXPECT_DOUBLE_EQ(topk_accuracy(s, y, 2), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(topk_accuracy(s, y, 3), 1.0);
  const std::vector<int> argmax{0, 0, 0};
  EXPECT_DOUBLE_EQ(topk_accuracy(s, y, 1), accuracy(y, argmax));
}

TEST(TopK, TiesFavorLowerIndexAndMatchOracle) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(1, 4, 0.25);
  EXPECT_EQ(topk_accuracy(s, std::vector<int>{1}, 1), 0.0);
  EXPECT_EQ(topk_accuracy(s, std::vector<int>{0}, 1), 1.0);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> score(0, 3), cls(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd m(9, 6);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = score(rng);
    std::vector<int> t(9);
    for (auto& v : t) v = cls(rng);
    for (std::size_t k = 1; k <= 6; ++k) EXPECT_DOUBLE_EQ(topk_accuracy(m, t, k), oracle::topk_accuracy(m, t, k));
  }
}

TEST(Folds, SingletonTestSets) {
  std::vector<std::string> labels(10, "x");
  const auto set = make_folds(labels, {FoldScheme::kfold, 10, 1, true});
  for (const auto& f : set.folds) EXPECT_EQ(f.test.size(), 1u);
  EXPECT_EQ(oracle::fold_violation(set, 10, 10, FoldScheme::kfold), "");
}

TEST(Folds, ReverseTrainsOnAboutATenth) {
  auto labels = join(repeat("m", 4073), repeat("f", 729));
  const auto set = make_folds(labels, {FoldScheme::kfold_reverse, 10, 5, true});
  for (const auto& f : set.folds) {
    EXPECT_GE(f.train.size(), 480u);
    EXPECT_LE(f.train.size(), 481u);
  }
  EXPECT_EQ(oracle::fold_violation(set, labels.size(), 10, FoldScheme::kfold_reverse), "");
}

TEST(Folds, PartitionInvariantsOverRandomSets) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = std::array<std::size_t, 3>{2, 5, 10}[trial % 3];
    std::uniform_int_distribution<std::size_t> size(k, 120);
    std::uniform_int_distribution<int> cls(0, 3);
    std::vector<std::string> labels(size(rng));
    for (auto& l : labels) l = "c" + std::to_string(cls(rng));
    for (auto scheme : {FoldScheme::kfold, FoldScheme::kfold_reverse}) {
      const auto set = make_folds(labels, {scheme, k, static_cast<std::uint64_t>(trial), trial % 2 == 0});
      EXPECT_EQ(oracle::fold_violation(set, labels.size(), k, scheme), "") << trial;
    }
  }
}

TEST(Folds, StratificationBalancesClasses) {
  const auto labels = join(repeat("a", 50), repeat("b", 20));
  const auto set = make_folds(labels, {FoldScheme::kfold, 10, 2, true});
  for (const auto& f : set.folds) {
    std::size_t b = 0;
    for (auto i : f.test) b += labels[i] == "b";
    EXPECT_EQ(b, 2u);
  }
}

TEST(Folds, MissingTrainingClassWarns) {
  const auto labels = join(repeat("a", 9), repeat("b", 1));
  const auto set = make_folds(labels, {FoldScheme::kfold_reverse, 5, 0, true});
  EXPECT_FALSE(set.warnings.empty());
  EXPECT_THROW(make_folds(labels, {FoldScheme::kfold, 1, 0, true}), ConfigError);
  EXPECT_THROW(make_folds(labels, {FoldScheme::kfold, 11, 0, true}), DataError);
}

TEST(Logistic, SeparablePairIsFit) {
  Eigen::MatrixXd x(2, 1);
  x << -1, 1;
  const std::vector<int> y{0, 1};
  const auto m = LogisticRegression::fit(x, y, ProbeSpec::logistic(1e-3));
  EXPECT_EQ(m.predict(x), y);
  EXPECT_EQ(m.predict_proba(x).rows(), 2);
  EXPECT_NEAR(m.predict_proba(x).row(0).sum(), 1.0, 1e-12);
}

TEST(Logistic, ReachesStationaryPoint) {
  const auto x = gaussian_matrix(80, 3, 7);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 80; ++i) y.push_back(x(i, 0) + 0.8 * x(i, 2) > 0.3 * std::sin(i) ? 1 : 0);
  auto spec = ProbeSpec::logistic(1.0);
  spec.max_iters = 20000;
  const auto m = LogisticRegression::fit(x, y, spec);
  EXPECT_LT(m.info().gradient_norm, 1e-6);
  // Independent gradient of the documented objective at the returned point.
  Eigen::VectorXd gw = Eigen::VectorXd::Zero(3);
  double gb = 0;
  for (Eigen::Index i = 0; i < 80; ++i) {
    const double s = x.row(i).dot(m.weights()) + m.bias();
    const double r = 1.0 / (1.0 + std::exp(-s)) - y[static_cast<std::size_t>(i)];
    gw += r * x.row(i).transpose() / 80.0;
    gb += r / 80.0;
  }
  gw += (1.0 / 80.0) * m.weights();
  EXPECT_LT(std::sqrt(gw.squaredNorm() + gb * gb), 1e-5);
}

TEST(Logistic, DuplicatedFeaturesPredictTheSame) {
  const auto x = gaussian_matrix(120, 3, 8);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 120; ++i) y.push_back(x(i, 0) - x(i, 1) + 0.7 * std::cos(3.0 * i) > 0 ? 1 : 0);
  Eigen::MatrixXd dup(120, 6);
  dup << x, x;
  auto spec = ProbeSpec::logistic(1e-4);
  spec.max_iters = 50000;
  const auto a = LogisticRegression::fit(x, y, spec);
  const auto b = LogisticRegression::fit(dup, y, spec);
  EXPECT_EQ(a.predict(x), b.predict(dup));
  EXPECT_LT((a.predict_proba(x) - b.predict_proba(dup)).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Logistic, ShuffledLabelsScoreNearChance) {
  auto data = linear_problem(400, 0.0, 9);
  std::vector<std::string> values;
  for (const auto& [_, v] : data.labels) values.push_back(v);
  std::mt19937_64 rng(10);
  std::shuffle(values.begin(), values.end(), rng);
  std::size_t i = 0;
  for (auto& [_, v] : data.labels) v = values[i++];
  const auto report = run_benchmark(data.embeddings, data.labels, {FoldScheme::kfold, 5, 3, true},
                                    ProbeSpec::logistic());
  std::vector<std::string> all;
  for (const auto& [_, v] : data.labels) all.push_back(v);
  const double chance = chance_weighted_f1(all);
  // Imbalanced guesses on noise can sit below the prior-matched chance F1, never far above it.
  EXPECT_LT(report.f1.avg, chance + 3 * report.f1.std);
  const double acc = fold_stats(report.fold_accuracy).avg;
  EXPECT_NEAR(acc, 0.5, 3 * std::sqrt(0.25 / 400.0));
}

TEST(OneVsRest, ThreeClassProbabilities) {
  Eigen::MatrixXd x(6, 2);
  x << 0, 5, 0.2, 5.1, 5, 0, 5.2, 0.1, -5, -5, -5.1, -4.9;
  const std::vector<int> y{0, 0, 1, 1, 2, 2};
  const auto m = OneVsRestLogistic::fit(x, y, 3, ProbeSpec::logistic(1e-2));
  EXPECT_EQ(m.predict(x), y);
  const auto p = m.predict_proba(x);
  for (Eigen::Index i = 0; i < 6; ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
}

TEST(Mlp, LearnsXor) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<int> y{0, 1, 1, 0};
  auto spec = ProbeSpec::mlp({16}, 0.0);
  spec.learning_rate = 0.05;
  spec.max_iters = 2000;
  spec.validation_fraction = 0.0;
  spec.seed = 1;
  const auto m = MlpProbe::fit(x, y, 2, spec);
  EXPECT_EQ(m.predict(x), y);
}

TEST(Mlp, IdenticalInputsPredictMajority) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(30, 3);
  std::vector<int> y(30, 1);
  for (int i = 0; i < 8; ++i) y[static_cast<std::size_t>(i)] = 0;
  auto spec = ProbeSpec::mlp({8});
  spec.seed = 2;
  const auto pred = MlpProbe::fit(x, y, 2, spec).predict(x);
  EXPECT_EQ(std::set<int>(pred.begin(), pred.end()), std::set<int>{1});
}

TEST(Mlp, SameSeedSameFoldScores) {
  const auto data = linear_problem(80, 0.3, 11);
  auto spec = ProbeSpec::mlp({8});
  spec.max_iters = 100;
  spec.seed = 4;
  const FoldPlan plan{FoldScheme::kfold, 4, 7, true};
  const auto a = run_benchmark(data.embeddings, data.labels, plan, spec);
  const auto b = run_benchmark(data.embeddings, data.labels, plan, spec);
  EXPECT_EQ(a.fold_f1, b.fold_f1);
}

TEST(ProbeSpec, Validation) {
  auto s = ProbeSpec::logistic(-1.0);
  EXPECT_THROW(s.validate(), ConfigError);
  auto m = ProbeSpec::mlp({});
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_EQ(ProbeSpec::mlp({256}).name(), "MLP");
  EXPECT_EQ(ProbeSpec::logistic().name(), "LR");
}

TEST(Benchmark, ReportContents) {
  const auto data = linear_problem(100, 0.1, 12);
  const auto r = run_benchmark(data.embeddings, data.labels, {FoldScheme::kfold, 5, 1, true}, ProbeSpec::logistic(),
                               "toy", "custom");
  EXPECT_EQ(r.fold_f1.size(), 5u);
  EXPECT_EQ(r.predictions.size(), 100u);
  EXPECT_EQ(r.confusion.counts.sum(), 100.0);
  EXPECT_GT(r.f1.avg, 0.85);
  const auto j = r.to_json();
  EXPECT_EQ(j["schema_version"], EvalReport::kSchemaVersion);
  EXPECT_EQ(j["folds"].size(), 5u);
  EXPECT_NE(r.text_table().find("Avg."), std::string::npos);
  const auto stats = fold_stats(r.fold_f1);
  EXPECT_DOUBLE_EQ(stats.avg, r.f1.avg);
}

TEST(Benchmark, MissingEmbeddingNamesAuthor) {
  auto data = linear_problem(20, 0.1, 13);
  data.labels["ghost"] = "pos";
  try {
    run_benchmark(data.embeddings, data.labels, {FoldScheme::kfold, 2, 1, true}, ProbeSpec::logistic());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(FoldStats, PopulationStd) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto s = fold_stats(v);
  EXPECT_DOUBLE_EQ(s.avg, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(1.25));
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 4);
}

TEST(Confusion, RowsNormalizeToOne) {
  auto cm = make_confusion({"a", "b", "c"});
  cm.add(0, 0);
  cm.add(0, 1);
  cm.add(1, 1);
  const auto n = cm.normalized();
  EXPECT_DOUBLE_EQ(n.row(0).sum(), 1.0);
  EXPECT_DOUBLE_EQ(n.row(1).sum(), 1.0);
  EXPECT_EQ(n.row(2).sum(), 0.0);
}

TEST(Chance, SumOfSquaredPriors) {
  const auto labels = join(repeat("a", 3), repeat("b", 1));
  EXPECT_DOUBLE_EQ(chance_weighted_f1(labels), 0.75 * 0.75 + 0.25 * 0.25);
}

TEST(Mbti, AxesAgreeWithCorpusLabels) {
  const auto& types = mbti_types();
  ASSERT_EQ(types.size(), 16u);
  EXPECT_EQ(std::set<std::string>(types.begin(), types.end()).size(), 16u);
  for (const auto& t : types) {
    const auto letters = mbti_axis_labels(t);
    EXPECT_EQ(std::string(letters.begin(), letters.end()), t);
  }
}

TEST(Mbti, AxisBenchmarkCombinesPredictions) {
  const auto& types = mbti_types();
  EmbeddingTable emb;
  AttributeLabels codes;
  std::mt19937_64 rng(14);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (std::size_t i = 0; i < 160; ++i) {
    const auto& t = types[i % 16];
    Eigen::VectorXd v(4);
    v << (t[0] == 'E') + noise(rng), (t[1] == 'S') + noise(rng), (t[2] == 'F') + noise(rng), (t[3] == 'P') + noise(rng);
    const std::string id = "m" + std::to_string(100 + i);
    emb[id] = v;
    codes[id] = t;
  }
  const auto r = mbti_axis_benchmark(emb, codes, {FoldScheme::kfold, 5, 2, true}, ProbeSpec::logistic(), "toy");
  EXPECT_EQ(r.types.counts.sum(), 160.0);
  for (const auto& axis : r.axes) EXPECT_GT(axis.f1.avg, 0.8);
  const auto n = r.types.normalized();
  for (Eigen::Index i = 0; i < 16; ++i) EXPECT_NEAR(n.row(i).sum(), 1.0, 1e-12);
  const std::array<MbtiReport, 1> one{r};
  EXPECT_NE(mbti_comparison_table(one).find("E/I"), std::string::npos);
}

TEST(Tables, ComparisonLayout) {
  const auto data = linear_problem(60, 0.1, 15);
  std::vector<EvalReport> reports;
  for (const std::string name : {"Author2Vec", "LSI"}) {
    reports.push_back(run_benchmark(data.embeddings, data.labels, {FoldScheme::kfold, 3, 1, true},
                                    ProbeSpec::logistic(), name));
  }
  const auto table = comparison_table(reports, "Weighted F1");
  EXPECT_NE(table.find("Model"), std::string::npos);
  EXPECT_NE(table.find("LR Author2Vec"), std::string::npos);
  EXPECT_NE(table.find("LR LSI"), std::string::npos);
}
