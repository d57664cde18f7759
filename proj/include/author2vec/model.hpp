// SPDX-License-Identifier: Apache-2.0
#pragma once

// The author encoder: Bi-GRU over a post-embedding sequence, a K-sparse
// linear code layer, and (while pre-training) an MLP authorship head.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "author2vec/common.hpp"
#include "author2vec/nn/gru.hpp"
#include "author2vec/nn/layers.hpp"
#include "author2vec/nn/params.hpp"

namespace a2v {

struct ModelShape {
  std::size_t input_dim = 3072;
  std::size_t hidden = 512;
  std::size_t code_dim = 768;
  std::size_t k_train = 32;
  std::size_t k_infer = 64;
  std::vector<std::size_t> head_hidden{256};
  std::size_t classes = 0;
  nn::Pooling pooling = nn::Pooling::final;

  void validate() const {
    if (input_dim == 0 || hidden == 0 || code_dim == 0) throw ConfigError("model widths must be positive");
    if (!(k_train > 0 && k_train <= k_infer && k_infer <= code_dim)) {
      throw ConfigError("K-sparse layer requires 0 < k_train <= k_infer <= code_dim");
    }
    for (auto h : head_hidden) {
      if (h == 0) throw ConfigError("head hidden widths must be positive");
    }
  }
};

template <typename T>
class BasicAuthorVecModel {
 public:
  using Matrix = nn::Matrix<T>;
  using Vector = nn::Vector<T>;

  BasicAuthorVecModel() = default;

  /// Builds and initializes a model; a head is attached when shape.classes >= 2.
  BasicAuthorVecModel(const ModelShape& shape, std::uint64_t seed) : shape_(shape) {
    shape_.validate();
    fwd_ = nn::GruCell<T>(shape.input_dim, shape.hidden);
    bwd_ = nn::GruCell<T>(shape.input_dim, shape.hidden);
    sparse_ = nn::KSparseLayer<T>(2 * shape.hidden, shape.code_dim, shape.k_train, shape.k_infer);
    std::mt19937_64 rng(seed);
    fwd_.init(rng);
    bwd_.init(rng);
    sparse_.projection.init(rng);
    if (shape.classes >= 2) {
      std::size_t in = shape.code_dim;
      for (auto h : shape.head_hidden) {
        head_.emplace_back(in, h, nn::Activation::relu);
        head_.back().init(rng);
        in = h;
      }
      head_.emplace_back(in, shape.classes, nn::Activation::linear);
      head_.back().init(rng);
    } else {
      shape_.classes = 0;
    }
  }

  const ModelShape& shape() const noexcept { return shape_; }
  bool has_head() const noexcept { return !head_.empty(); }

  nn::GruCell<T>& forward_cell() noexcept { return fwd_; }
  nn::GruCell<T>& backward_cell() noexcept { return bwd_; }
  nn::KSparseLayer<T>& sparse() noexcept { return sparse_; }
  std::vector<nn::DenseLayer<T>>& head() noexcept { return head_; }
  const std::vector<nn::DenseLayer<T>>& head() const noexcept { return head_; }

  /// Parameter blocks in a fixed order: encoder first, then head layers.
  std::vector<nn::ParamRef<T>> params() {
    auto out = fwd_.params("gru_fwd");
    for (auto& p : bwd_.params("gru_bwd")) out.push_back(p);
    for (auto& p : sparse_.projection.params("ksparse")) out.push_back(p);
    for (std::size_t i = 0; i < head_.size(); ++i) {
      for (auto& p : head_[i].params("head." + std::to_string(i))) out.push_back(p);
    }
    return out;
  }

  /// Drops the authorship head; encoding is unaffected.
  void strip_head() {
    head_.clear();
    shape_.classes = 0;
  }

  /// `sequence` is input_dim x steps (one column per post).
  Vector encode(const Matrix& sequence, nn::SparsityMode mode) const {
    check_input(sequence);
    const auto bi = nn::bigru_encode(fwd_, bwd_, sequence, shape_.pooling);
    return nn::ksparse_forward(sparse_, bi.output, mode).output;
  }

  Vector logits(const Matrix& sequence, nn::SparsityMode mode = nn::SparsityMode::train) const {
    require_head();
    Vector x = encode(sequence, mode);
    for (const auto& layer : head_) x = nn::dense_forward(layer, x).output;
    return x;
  }

  struct SampleResult {
    T loss;
    Vector logits;
    std::vector<Eigen::Index> support;
  };

  /// Cross-entropy for one (sequence, author) pair; gradients are added into
  /// `grads`, aligned with params().
  SampleResult loss_and_grad(const Matrix& sequence, Eigen::Index target, std::vector<Matrix>& grads,
                             const std::vector<Eigen::Index>* fixed_support = nullptr) const {
    require_head();
    check_input(sequence);
    const auto bi = nn::bigru_encode(fwd_, bwd_, sequence, shape_.pooling);
    const auto ks = nn::ksparse_forward(sparse_, bi.output, nn::SparsityMode::train, fixed_support);
    std::vector<nn::DenseTrace<T>> traces;
    traces.reserve(head_.size());
    Vector x = ks.output;
    for (const auto& layer : head_) {
      traces.push_back(nn::dense_forward(layer, x));
      x = traces.back().output;
    }
    auto lg = nn::softmax_xent(x, target);

    // Block offsets follow params(): 9 + 9 GRU, 2 K-sparse, 2 per head layer.
    constexpr std::size_t kSparseAt = 18;
    constexpr std::size_t kHeadAt = 20;
    Vector d = lg.grad;
    for (std::size_t i = head_.size(); i-- > 0;) {
      d = nn::dense_backward(head_[i], traces[i], d, grads[kHeadAt + 2 * i], grads[kHeadAt + 2 * i + 1]);
    }
    const Vector dbi = nn::ksparse_backward(sparse_, ks, d, grads[kSparseAt], grads[kSparseAt + 1]);
    const auto gb = nn::bigru_backward(fwd_, bwd_, bi, dbi);
    add_cell(grads, 0, gb.forward);
    add_cell(grads, 9, gb.backward);
    return {lg.loss, std::move(x), ks.support};
  }

  T loss(const Matrix& sequence, Eigen::Index target, const std::vector<Eigen::Index>* fixed_support = nullptr) const {
    require_head();
    check_input(sequence);
    const auto bi = nn::bigru_encode(fwd_, bwd_, sequence, shape_.pooling);
    Vector x = nn::ksparse_forward(sparse_, bi.output, nn::SparsityMode::train, fixed_support).output;
    for (const auto& layer : head_) x = nn::dense_forward(layer, x).output;
    return nn::softmax_xent(x, target).loss;
  }

 private:
  void require_head() const {
    if (head_.empty()) throw ConfigError("model has no authorship head (stripped); it can only embed");
  }
  void check_input(const Matrix& sequence) const {
    if (static_cast<std::size_t>(sequence.rows()) != shape_.input_dim) {
      throw DataError("post embedding width " + std::to_string(sequence.rows()) + " does not match model input " +
                      std::to_string(shape_.input_dim));
    }
    if (sequence.cols() == 0) throw DataError("cannot encode an empty post sequence");
  }
  static void add_cell(std::vector<Matrix>& grads, std::size_t at, const nn::GruCell<T>& g) {
    grads[at + 0] += g.wz;
    grads[at + 1] += g.wr;
    grads[at + 2] += g.wh;
    grads[at + 3] += g.uz;
    grads[at + 4] += g.ur;
    grads[at + 5] += g.uh;
    grads[at + 6] += g.bz;
    grads[at + 7] += g.br;
    grads[at + 8] += g.bh;
  }

  ModelShape shape_;
  nn::GruCell<T> fwd_;
  nn::GruCell<T> bwd_;
  nn::KSparseLayer<T> sparse_;
  std::vector<nn::DenseLayer<T>> head_;
};

using AuthorVecModel = BasicAuthorVecModel<float>;

}  // namespace a2v
