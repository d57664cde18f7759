// SPDX-License-Identifier: Apache-2.0
#pragma once

// Randomized truncated SVD (range finder + subspace iteration).

#include <algorithm>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>

#include "author2vec/common.hpp"

namespace a2v {

struct RandomizedSvdOptions {
  std::size_t oversampling = 10;
  std::size_t min_power_iterations = 2;
  std::size_t max_power_iterations = 300;
  /// Stop once the leading `rank` singular values move less than this (relative).
  double convergence_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct TruncatedSvd {
  Eigen::MatrixXd u;  ///< rows x rank
  Eigen::VectorXd singular_values;  ///< descending
  Eigen::MatrixXd v;  ///< cols x rank
  std::size_t power_iterations = 0;
};

namespace detail {

inline Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

}  // namespace detail

/// Works for dense (`Eigen::MatrixXd`) and sparse (`Eigen::SparseMatrix<double>`) inputs.
template <typename Matrix>
TruncatedSvd randomized_svd(const Matrix& a, std::size_t rank, const RandomizedSvdOptions& opt = {}) {
  const auto m = static_cast<std::size_t>(a.rows());
  const auto n = static_cast<std::size_t>(a.cols());
  if (rank == 0) throw ConfigError("SVD rank must be >= 1");
  if (rank > std::min(m, n)) {
    throw ConfigError("SVD rank " + std::to_string(rank) + " exceeds min(rows, cols) = " +
                      std::to_string(std::min(m, n)));
  }
  auto width = static_cast<Eigen::Index>(std::min({rank + opt.oversampling, m, n}));
  // A sketch covering half the spectrum or more costs about as much as the
  // full one, and the full one needs no power iterations.
  if (2 * static_cast<std::size_t>(width) >= std::min(m, n)) width = static_cast<Eigen::Index>(std::min(m, n));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd omega(static_cast<Eigen::Index>(n), width);
  for (Eigen::Index j = 0; j < omega.cols(); ++j) {
    for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = normal(rng);
  }

  Eigen::MatrixXd q = detail::orthonormal_basis(a * omega);
  Eigen::VectorXd previous;
  TruncatedSvd out;
  const auto k = static_cast<Eigen::Index>(rank);
  for (std::size_t iter = 0;; ++iter) {
    const Eigen::MatrixXd b = q.transpose() * a;  // width x n
    Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues().head(k);
    bool converged = false;
    if (previous.size() == k) {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < k; ++i) {
        const double denom = std::max(s[i], 1e-300);
        worst = std::max(worst, std::abs(s[i] - previous[i]) / denom);
      }
      converged = worst < opt.convergence_tol;
    }
    // The range is exact when the sketch spans every column.
    const bool exact = static_cast<std::size_t>(width) == std::min(m, n);
    if (exact || (iter >= opt.min_power_iterations && converged) || iter >= opt.max_power_iterations) {
      out.u = q * svd.matrixU().leftCols(k);
      out.singular_values = s;
      out.v = svd.matrixV().leftCols(k);
      out.power_iterations = iter;
      return out;
    }
    previous = s;
    const Eigen::MatrixXd z = detail::orthonormal_basis(a.transpose() * q);
    q = detail::orthonormal_basis(a * z);
  }
}

}  // namespace a2v
