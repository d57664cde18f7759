// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact t-SNE and scatter-plot export.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "author2vec/common.hpp"

namespace a2v {

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  std::uint64_t seed = 0;
  double exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t pca_dims = 50;  ///< inputs wider than this are reduced first; 0 disables
  double perplexity_tolerance = 1e-5;
};

/// Conditional affinities p(j|i) for one row of squared distances, with the
/// Gaussian precision binary-searched so that 2^H(P_i) matches the perplexity.
struct RowAffinity {
  Eigen::VectorXd p;  ///< p(i|i) = 0, sums to 1
  double beta = 1.0;  ///< 1 / (2 sigma^2)
  double perplexity = 0.0;  ///< achieved
};
RowAffinity calibrate_row(const Eigen::VectorXd& squared_distances, std::size_t self, double perplexity,
                          double tolerance = 1e-5);

/// Row-stochastic conditional affinity matrix (before symmetrization).
struct Affinities {
  Eigen::MatrixXd conditional;
  std::vector<double> perplexities;
};
Affinities conditional_affinities(const Eigen::MatrixXd& x, double perplexity, double tolerance = 1e-5);

struct TsneResult {
  Eigen::MatrixXd coords;  ///< n x 2, centered
  std::vector<double> kl;  ///< KL(P || Q) after every iteration
  std::vector<double> perplexities;  ///< achieved per point
};

/// Exact O(n^2) t-SNE. Duplicate rows get a deterministic 1e-9 jitter.
TsneResult tsne_project(const Eigen::MatrixXd& vectors, const TsneConfig& config);

/// Mean silhouette coefficient under Euclidean distance.
double silhouette_score(const Eigen::MatrixXd& points, std::span<const int> labels);

struct ScatterPoint {
  std::string author_id;
  double x = 0.0;
  double y = 0.0;
  std::string label;  ///< empty = unlabeled, drawn gray
};

/// Writes `<stem>.csv` (author_id,x,y,label) and `<stem>.svg`.
void export_scatter(std::span<const ScatterPoint> points, const std::filesystem::path& stem,
                    const std::string& title = "");
std::vector<ScatterPoint> read_scatter_csv(const std::filesystem::path& path);

}  // namespace a2v
