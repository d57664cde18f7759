// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

namespace a2v::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Named view of one parameter block. Vectors are stored as n x 1 matrices so
/// every block has the same type.
template <typename T>
struct ParamRef {
  std::string name;
  Matrix<T>* value;
};

template <typename T>
struct ConstParamRef {
  std::string name;
  const Matrix<T>* value;
};

template <typename T>
std::vector<Matrix<T>> zeros_like(const std::vector<ParamRef<T>>& params) {
  std::vector<Matrix<T>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(Matrix<T>::Zero(p.value->rows(), p.value->cols()));
  return out;
}

template <typename T>
T squared_norm(const std::vector<Matrix<T>>& grads) {
  T total = 0;
  for (const auto& g : grads) total += g.squaredNorm();
  return total;
}

/// Scales all blocks so the global L2 norm is at most `max_norm`. Returns the pre-clip norm.
template <typename T>
T clip_global_norm(std::vector<Matrix<T>>& grads, T max_norm) {
  const T norm = std::sqrt(squared_norm(grads));
  if (norm > max_norm && norm > T(0)) {
    const T scale = max_norm / norm;
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void init_glorot_uniform(Matrix<T>& m, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(u(rng));
  }
}

template <typename T>
void init_orthogonal(Matrix<T>& m, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  // Sign fix makes the draw uniform over the orthogonal group.
  const Eigen::MatrixXd r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < std::min(q.cols(), r.rows()); ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  m = q.cast<T>();
}

}  // namespace a2v::nn
