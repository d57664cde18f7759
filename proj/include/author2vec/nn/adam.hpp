// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "author2vec/common.hpp"
#include "author2vec/nn/params.hpp"

namespace a2v::nn {

template <typename T>
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix<T>> first;
  std::vector<Matrix<T>> second;

  void reset(const std::vector<ParamRef<T>>& params) {
    first = zeros_like(params);
    second = zeros_like(params);
    step = 0;
  }
};

/// Bias-corrected Adam. Moments are created on the first call.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<ParamRef<T>>& params, const std::vector<Matrix<T>>& grads) {
  if (grads.size() != params.size()) throw DataError("Adam: gradient count does not match parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].value->rows() || grads[i].cols() != params[i].value->cols()) {
      throw DataError("Adam: gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i].allFinite()) throw NumericError("Adam: non-finite gradient in parameter block " + params[i].name);
  }
  if (state.first.size() != params.size()) state.reset(params);

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T lr_t = static_cast<T>(state.learning_rate * std::sqrt(c2) / c1);
  const T eps_t = static_cast<T>(state.epsilon * std::sqrt(c2));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first[i];
    auto& v = state.second[i];
    m = b1 * m + (T(1) - b1) * grads[i];
    v = b2 * v + (T(1) - b2) * grads[i].cwiseProduct(grads[i]);
    params[i].value->array() -= lr_t * m.array() / (v.array().sqrt() + eps_t);
  }
}

}  // namespace a2v::nn
