// SPDX-License-Identifier: Apache-2.0
#pragma once

// GRU cell with hand-derived backprop-through-time, and the bidirectional
// encoder built from two cells.
//
//   z_t  = sigmoid(Wz x_t + Uz h_{t-1} + bz)
//   r_t  = sigmoid(Wr x_t + Ur h_{t-1} + br)
//   h~_t = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)
//   h_t  = (1 - z_t) * h_{t-1} + z_t * h~_t
//
// A masked step copies h_{t-1} forward and receives no parameter gradient.

#include <span>
#include <string>
#include <vector>

#include "author2vec/common.hpp"
#include "author2vec/nn/params.hpp"

namespace a2v::nn {

template <typename T>
struct GruCell {
  Matrix<T> wz, wr, wh;  ///< hidden x input
  Matrix<T> uz, ur, uh;  ///< hidden x hidden
  Matrix<T> bz, br, bh;  ///< hidden x 1

  GruCell() = default;
  GruCell(std::size_t input, std::size_t hidden) {
    const auto i = static_cast<Eigen::Index>(input);
    const auto h = static_cast<Eigen::Index>(hidden);
    wz = wr = wh = Matrix<T>::Zero(h, i);
    uz = ur = uh = Matrix<T>::Zero(h, h);
    bz = br = bh = Matrix<T>::Zero(h, 1);
  }

  std::size_t input_size() const noexcept { return static_cast<std::size_t>(wz.cols()); }
  std::size_t hidden_size() const noexcept { return static_cast<std::size_t>(wz.rows()); }

  /// Scaled-uniform input matrices, orthogonal recurrent matrices, zero biases.
  void init(std::mt19937_64& rng) {
    for (auto* w : {&wz, &wr, &wh}) init_glorot_uniform(*w, rng);
    for (auto* u : {&uz, &ur, &uh}) init_orthogonal(*u, rng);
    for (auto* b : {&bz, &br, &bh}) b->setZero();
  }

  std::vector<ParamRef<T>> params(const std::string& prefix) {
    return {{prefix + ".w_z", &wz}, {prefix + ".w_r", &wr}, {prefix + ".w_h", &wh},
            {prefix + ".u_z", &uz}, {prefix + ".u_r", &ur}, {prefix + ".u_h", &uh},
            {prefix + ".b_z", &bz}, {prefix + ".b_r", &br}, {prefix + ".b_h", &bh}};
  }

  /// Same-shaped zero cell, used as a gradient accumulator.
  GruCell zeros() const { return GruCell(input_size(), hidden_size()); }

  GruCell& operator+=(const GruCell& o) {
    wz += o.wz; wr += o.wr; wh += o.wh;
    uz += o.uz; ur += o.ur; uh += o.uh;
    bz += o.bz; br += o.br; bh += o.bh;
    return *this;
  }
};

template <typename T>
struct GruTrace {
  Matrix<T> inputs;  ///< input x T
  Matrix<T> h;       ///< hidden x (T + 1); column 0 is h0
  Matrix<T> z, r, cand;  ///< hidden x T
  std::vector<bool> mask;  ///< empty = every step active

  Eigen::Index steps() const noexcept { return inputs.cols(); }
  bool active(Eigen::Index t) const { return mask.empty() || mask[static_cast<std::size_t>(t)]; }
  /// hidden x T, excluding h0.
  auto states() const { return h.rightCols(steps()); }
  Vector<T> final_state() const { return h.col(steps()); }
};

namespace detail {
template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}
}  // namespace detail

template <typename T>
GruTrace<T> gru_forward(const GruCell<T>& cell, const Matrix<T>& inputs, const Vector<T>& h0,
                        std::vector<bool> mask = {}) {
  const auto steps = inputs.cols();
  const auto H = static_cast<Eigen::Index>(cell.hidden_size());
  if (steps == 0) throw DataError("GRU input sequence is empty");
  if (static_cast<std::size_t>(inputs.rows()) != cell.input_size()) {
    throw DataError("GRU input width " + std::to_string(inputs.rows()) + " does not match cell width " +
                    std::to_string(cell.input_size()));
  }
  if (h0.size() != H) throw DataError("GRU initial state has the wrong width");
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != steps) throw DataError("GRU mask length mismatch");

  GruTrace<T> t;
  t.inputs = inputs;
  t.mask = std::move(mask);
  t.h.resize(H, steps + 1);
  t.h.col(0) = h0;
  t.z = Matrix<T>::Zero(H, steps);
  t.r = Matrix<T>::Zero(H, steps);
  t.cand = Matrix<T>::Zero(H, steps);

  // Input projections for every step at once.
  const Matrix<T> xz = (cell.wz * inputs).colwise() + cell.bz.col(0);
  const Matrix<T> xr = (cell.wr * inputs).colwise() + cell.br.col(0);
  const Matrix<T> xh = (cell.wh * inputs).colwise() + cell.bh.col(0);

  Vector<T> rh(H);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const auto prev = t.h.col(s);
    if (!t.active(s)) {
      t.h.col(s + 1) = prev;
      continue;
    }
    t.z.col(s) = (xz.col(s) + cell.uz * prev).unaryExpr([](T v) { return detail::sigmoid(v); });
    t.r.col(s) = (xr.col(s) + cell.ur * prev).unaryExpr([](T v) { return detail::sigmoid(v); });
    rh = t.r.col(s).cwiseProduct(prev);
    t.cand.col(s) = (xh.col(s) + cell.uh * rh).array().tanh();
    t.h.col(s + 1) = prev + t.z.col(s).cwiseProduct(t.cand.col(s) - prev);
  }
  return t;
}

template <typename T>
struct GruGrads {
  GruCell<T> params;
  Matrix<T> inputs;  ///< input x T
  Vector<T> h0;
};

/// `upstream` is hidden x T: dLoss/dh_t for every step (zero columns where the
/// loss does not read h_t directly).
template <typename T>
GruGrads<T> gru_backward(const GruCell<T>& cell, const GruTrace<T>& trace, const Matrix<T>& upstream) {
  const auto steps = trace.steps();
  const auto H = static_cast<Eigen::Index>(cell.hidden_size());
  if (upstream.rows() != H || upstream.cols() != steps) throw DataError("GRU upstream gradient has the wrong shape");

  Matrix<T> az = Matrix<T>::Zero(H, steps);
  Matrix<T> ar = Matrix<T>::Zero(H, steps);
  Matrix<T> ah = Matrix<T>::Zero(H, steps);
  Matrix<T> rh_all = Matrix<T>::Zero(H, steps);

  Vector<T> dh_next = Vector<T>::Zero(H);
  Vector<T> dh(H), d_rh(H);
  for (Eigen::Index s = steps - 1; s >= 0; --s) {
    dh = upstream.col(s) + dh_next;
    if (!trace.active(s)) {
      dh_next = dh;
      continue;
    }
    const auto prev = trace.h.col(s);
    const auto z = trace.z.col(s);
    const auto r = trace.r.col(s);
    const auto c = trace.cand.col(s);

    ah.col(s) = dh.cwiseProduct(z).cwiseProduct((Vector<T>::Ones(H) - c.cwiseProduct(c)));
    az.col(s) = dh.cwiseProduct(c - prev).cwiseProduct(z.cwiseProduct(Vector<T>::Ones(H) - z));
    d_rh.noalias() = cell.uh.transpose() * ah.col(s);
    ar.col(s) = d_rh.cwiseProduct(prev).cwiseProduct(r.cwiseProduct(Vector<T>::Ones(H) - r));
    rh_all.col(s) = r.cwiseProduct(prev);

    dh_next = dh.cwiseProduct(Vector<T>::Ones(H) - z) + d_rh.cwiseProduct(r);
    dh_next.noalias() += cell.uz.transpose() * az.col(s);
    dh_next.noalias() += cell.ur.transpose() * ar.col(s);
  }

  GruGrads<T> g{cell.zeros(), Matrix<T>(), dh_next};
  const auto& x = trace.inputs;
  const auto hprev = trace.h.leftCols(steps);
  g.params.wz.noalias() = az * x.transpose();
  g.params.wr.noalias() = ar * x.transpose();
  g.params.wh.noalias() = ah * x.transpose();
  g.params.uz.noalias() = az * hprev.transpose();
  g.params.ur.noalias() = ar * hprev.transpose();
  g.params.uh.noalias() = ah * rh_all.transpose();
  g.params.bz = az.rowwise().sum();
  g.params.br = ar.rowwise().sum();
  g.params.bh = ah.rowwise().sum();
  g.inputs.noalias() = cell.wz.transpose() * az;
  g.inputs.noalias() += cell.wr.transpose() * ar;
  g.inputs.noalias() += cell.wh.transpose() * ah;
  return g;
}

// ------------------------------------------------------------ bidirectional

enum class Pooling { final, mean };

template <typename T>
Matrix<T> reverse_columns(const Matrix<T>& m) {
  return m.rowwise().reverse();
}

template <typename T>
struct BiGruTrace {
  GruTrace<T> forward;
  GruTrace<T> backward;  ///< run over the reversed sequence
  Pooling pooling = Pooling::final;
  Vector<T> output;  ///< [forward summary ; backward summary]
};

namespace detail {
template <typename T>
Vector<T> pool(const GruTrace<T>& t, Pooling pooling) {
  if (pooling == Pooling::final) return t.final_state();
  Vector<T> sum = Vector<T>::Zero(t.h.rows());
  Eigen::Index n = 0;
  for (Eigen::Index s = 0; s < t.steps(); ++s) {
    if (!t.active(s)) continue;
    sum += t.h.col(s + 1);
    ++n;
  }
  return n > 0 ? Vector<T>(sum / T(n)) : sum;
}

template <typename T>
Matrix<T> unpool(const GruTrace<T>& t, Pooling pooling, const Vector<T>& dsummary) {
  Matrix<T> up = Matrix<T>::Zero(t.h.rows(), t.steps());
  if (pooling == Pooling::final) {
    up.col(t.steps() - 1) = dsummary;
    return up;
  }
  Eigen::Index n = 0;
  for (Eigen::Index s = 0; s < t.steps(); ++s) n += t.active(s) ? 1 : 0;
  if (n == 0) return up;
  for (Eigen::Index s = 0; s < t.steps(); ++s) {
    if (t.active(s)) up.col(s) = dsummary / T(n);
  }
  return up;
}
}  // namespace detail

/// Sequence columns are time steps. Output is [fwd summary ; bwd summary].
template <typename T>
BiGruTrace<T> bigru_encode(const GruCell<T>& fwd, const GruCell<T>& bwd, const Matrix<T>& sequence,
                           Pooling pooling = Pooling::final, std::vector<bool> mask = {}) {
  if (sequence.cols() == 0) throw DataError("cannot encode an empty post sequence");
  BiGruTrace<T> t;
  t.pooling = pooling;
  std::vector<bool> reversed_mask(mask.rbegin(), mask.rend());
  const Vector<T> h0f = Vector<T>::Zero(static_cast<Eigen::Index>(fwd.hidden_size()));
  const Vector<T> h0b = Vector<T>::Zero(static_cast<Eigen::Index>(bwd.hidden_size()));
  t.forward = gru_forward(fwd, sequence, h0f, std::move(mask));
  t.backward = gru_forward(bwd, Matrix<T>(reverse_columns(sequence)), h0b, std::move(reversed_mask));
  const auto hf = static_cast<Eigen::Index>(fwd.hidden_size());
  const auto hb = static_cast<Eigen::Index>(bwd.hidden_size());
  t.output.resize(hf + hb);
  t.output.head(hf) = detail::pool(t.forward, pooling);
  t.output.tail(hb) = detail::pool(t.backward, pooling);
  return t;
}

template <typename T>
struct BiGruGrads {
  GruCell<T> forward;
  GruCell<T> backward;
  Matrix<T> inputs;  ///< input x T, in original time order
};

template <typename T>
BiGruGrads<T> bigru_backward(const GruCell<T>& fwd, const GruCell<T>& bwd, const BiGruTrace<T>& trace,
                             const Vector<T>& doutput) {
  const auto hf = static_cast<Eigen::Index>(fwd.hidden_size());
  const auto hb = static_cast<Eigen::Index>(bwd.hidden_size());
  auto gf = gru_backward(fwd, trace.forward, detail::unpool(trace.forward, trace.pooling, Vector<T>(doutput.head(hf))));
  auto gb = gru_backward(bwd, trace.backward, detail::unpool(trace.backward, trace.pooling, Vector<T>(doutput.tail(hb))));
  BiGruGrads<T> g{std::move(gf.params), std::move(gb.params), std::move(gf.inputs)};
  g.inputs += reverse_columns(gb.inputs);
  return g;
}

}  // namespace a2v::nn
