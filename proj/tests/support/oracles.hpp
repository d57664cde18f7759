#pragma once

// Reference implementations written with plain loops, independent of the
// library code paths they check.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "author2vec/evalharness.hpp"
#include "author2vec/nn/gru.hpp"

namespace a2v::oracle {

/// Hidden states h_1..h_T of a GRU, computed one scalar at a time.
std::vector<std::vector<double>> gru_states(const nn::GruCell<double>& cell, const Eigen::MatrixXd& inputs,
                                            const std::vector<double>& h0);

/// All singular values, descending, by one-sided Jacobi rotations.
std::vector<double> jacobi_singular_values(const Eigen::MatrixXd& a);

double weighted_f1(const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred);

/// A row counts as a hit when fewer than k classes outrank the true one
/// (higher score, or equal score with a lower index).
double topk_accuracy(const Eigen::MatrixXd& scores, const std::vector<int>& y_true, std::size_t k);

/// exp of the Shannon entropy (nats) of a probability row.
double perplexity_of(const Eigen::VectorXd& p);

double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

/// Empty when `folds` is a valid plan over n items, else the first violation.
std::string fold_violation(const FoldSet& folds, std::size_t n, std::size_t k, FoldScheme scheme);

}  // namespace a2v::oracle
