#include <gtest/gtest.h>

#include "author2vec/svd.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace a2v;
using a2v::test::gaussian_matrix;

TEST(JacobiOracle, AgreesWithKnownSpectrum) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(4, 3);
  d(0, 0) = 2;
  d(1, 1) = 5;
  d(2, 2) = 1;
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian_matrix(4, 4, 1)).householderQ();
  const auto sv = oracle::jacobi_singular_values(q * d);
  ASSERT_EQ(sv.size(), 3u);
  EXPECT_NEAR(sv[0], 5, 1e-12);
  EXPECT_NEAR(sv[1], 2, 1e-12);
  EXPECT_NEAR(sv[2], 1, 1e-12);
}

TEST(RandomizedSvd, RankOneReconstruction) {
  const Eigen::VectorXd u = gaussian_matrix(30, 1, 2).col(0);
  const Eigen::VectorXd v = gaussian_matrix(20, 1, 3).col(0);
  const Eigen::MatrixXd a = u * v.transpose();
  const auto s = randomized_svd(a, 1);
  const Eigen::MatrixXd rec = s.u * s.singular_values.asDiagonal() * s.v.transpose();
  EXPECT_LE((rec - a).norm(), 1e-6);
}

TEST(RandomizedSvd, MatchesOracleOnRandomMatrix) {
  const auto a = gaussian_matrix(50, 40, 4);
  const auto s = randomized_svd(a, 10);
  const auto ref = oracle::jacobi_singular_values(a);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(s.singular_values[i] / ref[i], 1.0, 1e-4) << i;
}

TEST(RandomizedSvd, LargeMatrixNeedsPowerIterations) {
  const auto a = gaussian_matrix(200, 180, 5);
  const auto s = randomized_svd(a, 20);
  const auto ref = oracle::jacobi_singular_values(a);
  EXPECT_GE(s.power_iterations, 2u);
  for (int i = 0; i < 20; ++i) EXPECT_NEAR(s.singular_values[i] / ref[i], 1.0, 1e-4) << i;
}

TEST(RandomizedSvd, IdentityHasUnitValues) {
  const auto s = randomized_svd(Eigen::MatrixXd(Eigen::MatrixXd::Identity(5, 5)), 5);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(s.singular_values[i], 1.0, 1e-12);
}

TEST(RandomizedSvd, FactorsAreOrthonormal) {
  const auto a = gaussian_matrix(60, 80, 6);
  const auto s = randomized_svd(a, 8);
  EXPECT_LT((s.u.transpose() * s.u - Eigen::MatrixXd::Identity(8, 8)).norm(), 1e-10);
  EXPECT_LT((s.v.transpose() * s.v - Eigen::MatrixXd::Identity(8, 8)).norm(), 1e-10);
  EXPECT_LT((a * s.v - s.u * s.singular_values.asDiagonal()).norm() / a.norm(), 1e-4);
}

TEST(RandomizedSvd, SparseInputAgreesWithDense) {
  Eigen::MatrixXd d = gaussian_matrix(40, 30, 7);
  d = d.unaryExpr([](double x) { return std::abs(x) > 1.0 ? x : 0.0; });
  const Eigen::SparseMatrix<double> sp = d.sparseView();
  const auto a = randomized_svd(d, 5, {.seed = 3});
  const auto b = randomized_svd(sp, 5, {.seed = 3});
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(a.singular_values[i], b.singular_values[i], 1e-9);
}

TEST(RandomizedSvd, DeterministicPerSeed) {
  const auto a = gaussian_matrix(70, 90, 8);
  const auto x = randomized_svd(a, 6, {.seed = 11});
  const auto y = randomized_svd(a, 6, {.seed = 11});
  EXPECT_EQ(x.u, y.u);
  EXPECT_EQ(x.singular_values, y.singular_values);
}

TEST(RandomizedSvd, RejectsBadRank) {
  const auto a = gaussian_matrix(5, 4, 9);
  EXPECT_THROW(randomized_svd(a, 0), ConfigError);
  EXPECT_THROW(randomized_svd(a, 5), ConfigError);
}
