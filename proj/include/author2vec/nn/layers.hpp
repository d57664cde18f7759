// SPDX-License-Identifier: Apache-2.0
#pragma once

// Dense layers, the K-sparse gate, and softmax cross-entropy.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "author2vec/common.hpp"
#include "author2vec/nn/params.hpp"

namespace a2v::nn {

enum class Activation { linear, relu };

template <typename T>
struct DenseLayer {
  Matrix<T> weights;  ///< out x in
  Matrix<T> bias;     ///< out x 1
  Activation activation = Activation::linear;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act)
      : weights(Matrix<T>::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in))),
        bias(Matrix<T>::Zero(static_cast<Eigen::Index>(out), 1)),
        activation(act) {}

  std::size_t in_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }
  std::size_t out_dim() const noexcept { return static_cast<std::size_t>(weights.rows()); }

  void init(std::mt19937_64& rng) {
    init_glorot_uniform(weights, rng);
    bias.setZero();
  }

  std::vector<ParamRef<T>> params(const std::string& prefix) {
    return {{prefix + ".weight", &weights}, {prefix + ".bias", &bias}};
  }
};

template <typename T>
struct DenseTrace {
  Vector<T> input;
  Vector<T> pre;  ///< W x + b
  Vector<T> output;
};

template <typename T>
DenseTrace<T> dense_forward(const DenseLayer<T>& layer, const Vector<T>& x) {
  if (static_cast<std::size_t>(x.size()) != layer.in_dim()) {
    throw DataError("dense layer expects width " + std::to_string(layer.in_dim()) + ", got " + std::to_string(x.size()));
  }
  DenseTrace<T> t;
  t.input = x;
  t.pre = layer.weights * x + layer.bias.col(0);
  t.output = layer.activation == Activation::relu ? Vector<T>(t.pre.cwiseMax(T(0))) : t.pre;
  return t;
}

/// Accumulates into `dweights`/`dbias`; returns the gradient w.r.t. the input.
template <typename T>
Vector<T> dense_backward(const DenseLayer<T>& layer, const DenseTrace<T>& trace, const Vector<T>& dout,
                         Matrix<T>& dweights, Matrix<T>& dbias) {
  Vector<T> dpre = dout;
  if (layer.activation == Activation::relu) {
    for (Eigen::Index i = 0; i < dpre.size(); ++i) {
      if (trace.pre[i] <= T(0)) dpre[i] = T(0);
    }
  }
  dweights.noalias() += dpre * trace.input.transpose();
  dbias.col(0) += dpre;
  return layer.weights.transpose() * dpre;
}

// ------------------------------------------------------------------ K-sparse

enum class SparsityMode { train, infer };

template <typename T>
struct KSparseLayer {
  DenseLayer<T> projection;
  std::size_t k_train = 32;
  std::size_t k_infer = 64;

  KSparseLayer() = default;
  KSparseLayer(std::size_t in, std::size_t out, std::size_t k_tr, std::size_t k_inf)
      : projection(in, out, Activation::linear), k_train(k_tr), k_infer(k_inf) {
    validate();
  }

  void validate() const {
    if (!(k_train > 0 && k_train <= k_infer && k_infer <= projection.out_dim())) {
      throw ConfigError("K-sparse layer requires 0 < k_train <= k_infer <= width");
    }
  }
  std::size_t k_for(SparsityMode mode) const noexcept { return mode == SparsityMode::train ? k_train : k_infer; }
};

/// Indices of the k largest |values|, ties broken by lowest index; returned ascending.
template <typename T>
std::vector<Eigen::Index> top_k_abs(const Vector<T>& values, std::size_t k) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  k = std::min(k, idx.size());
  auto by_magnitude = [&](Eigen::Index a, Eigen::Index b) {
    const T ma = std::abs(values[a]);
    const T mb = std::abs(values[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), by_magnitude);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <typename T>
struct KSparseTrace {
  DenseTrace<T> dense;
  std::vector<Eigen::Index> support;
  Vector<T> output;
};

/// `fixed_support`, when given, replaces the top-k selection (used to hold the
/// gate fixed under finite-difference perturbation).
template <typename T>
KSparseTrace<T> ksparse_forward(const KSparseLayer<T>& layer, const Vector<T>& x, SparsityMode mode,
                                const std::vector<Eigen::Index>* fixed_support = nullptr) {
  KSparseTrace<T> t;
  t.dense = dense_forward(layer.projection, x);
  t.support = fixed_support ? *fixed_support : top_k_abs(t.dense.output, layer.k_for(mode));
  t.output = Vector<T>::Zero(t.dense.output.size());
  for (auto i : t.support) t.output[i] = t.dense.output[i];
  return t;
}

/// Gradient passes through the surviving support only.
template <typename T>
Vector<T> ksparse_backward(const KSparseLayer<T>& layer, const KSparseTrace<T>& trace, const Vector<T>& dout,
                           Matrix<T>& dweights, Matrix<T>& dbias) {
  Vector<T> gated = Vector<T>::Zero(dout.size());
  for (auto i : trace.support) gated[i] = dout[i];
  return dense_backward(layer.projection, trace.dense, gated, dweights, dbias);
}

// -------------------------------------------------------------------- losses

template <typename T>
Vector<T> softmax(const Vector<T>& logits) {
  const T max = logits.maxCoeff();
  Vector<T> e = (logits.array() - max).exp();
  return e / e.sum();
}

template <typename T>
struct LossAndGrad {
  T loss;
  Vector<T> grad;
};

/// Stable log-sum-exp cross-entropy; gradient = softmax - one_hot(target).
template <typename T>
LossAndGrad<T> softmax_xent(const Vector<T>& logits, Eigen::Index target) {
  if (logits.size() < 2) throw DataError("softmax cross-entropy needs at least two classes");
  if (target < 0 || target >= logits.size()) throw DataError("target class out of range");
  const T max = logits.maxCoeff();
  const Vector<T> shifted = logits.array() - max;
  const T log_z = std::log(shifted.array().exp().sum());
  LossAndGrad<T> out;
  out.loss = log_z - shifted[target];
  out.grad = (shifted.array() - log_z).exp();
  out.grad[target] -= T(1);
  return out;
}

}  // namespace a2v::nn
