// Copyright 2026 The ispc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Building blocks of the sequence classifier. Sequences are stored one frame
// per column (features x T). Functions taking a `valid_length` treat columns
// at or beyond it as padding: they are never read.

#ifndef ISPC_NN_LAYERS_HPP_
#define ISPC_NN_LAYERS_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <optional>

#include "ispc/error.hpp"
#include "ispc/nn/model.hpp"

namespace ispc::nn {

template <typename Scalar>
struct LstmTrace {
  Matrix<Scalar> gates;   // 4 n_L x T, activated
  Matrix<Scalar> cells;   // n_L x T
  Matrix<Scalar> hidden;  // n_L x T, the outputs y_t
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return (S(1) + (-x).exp()).inverse();
}

/// LSTM with forget gate and no peepholes, zero initial state:
///   i, f, o = sigmoid(.), g = tanh(.), c_t = f c_{t-1} + i g, y_t = o tanh(c_t).
template <typename Scalar>
LstmTrace<Scalar> lstm_forward(const LstmLayer<Scalar>& p, const Matrix<Scalar>& inputs) {
  const Eigen::Index n = p.units(), T = inputs.cols();
  if (p.input_weight.cols() != inputs.rows()) throw UsageError("LSTM input size mismatch");
  LstmTrace<Scalar> tr;
  tr.gates.noalias() = p.input_weight * inputs;
  tr.gates.colwise() += p.bias;
  tr.cells.resize(n, T);
  tr.hidden.resize(n, T);
  Vector<Scalar> h = Vector<Scalar>::Zero(n), c = Vector<Scalar>::Zero(n);
  for (Eigen::Index t = 0; t < T; ++t) {
    auto a = tr.gates.col(t);
    a.noalias() += p.recurrent_weight * h;
    a.head(3 * n) = sigmoid(a.head(3 * n).array()).matrix();
    a.tail(n) = a.tail(n).array().tanh().matrix();
    c = a.segment(n, n).cwiseProduct(c) + a.head(n).cwiseProduct(a.tail(n));
    h = a.segment(2 * n, n).cwiseProduct(c.array().tanh().matrix());
    tr.cells.col(t) = c;
    tr.hidden.col(t) = h;
  }
  return tr;
}

/// Backpropagation through time. `d_hidden` holds dLoss/dy_t from the layer
/// above; gradients are accumulated into `grad`. Returns dLoss/dinputs.
template <typename Scalar>
Matrix<Scalar> lstm_backward(const LstmLayer<Scalar>& p, const Matrix<Scalar>& inputs,
                             const LstmTrace<Scalar>& tr, const Matrix<Scalar>& d_hidden,
                             LstmLayer<Scalar>& grad) {
  const Eigen::Index n = p.units(), T = inputs.cols();
  Matrix<Scalar> d_pre(4 * n, T);
  Vector<Scalar> dh_next = Vector<Scalar>::Zero(n), dc_next = Vector<Scalar>::Zero(n);
  Vector<Scalar> dh(n), dc(n), tanh_c(n);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto i = tr.gates.col(t).head(n).array();
    const auto f = tr.gates.col(t).segment(n, n).array();
    const auto o = tr.gates.col(t).segment(2 * n, n).array();
    const auto g = tr.gates.col(t).tail(n).array();
    dh = d_hidden.col(t) + dh_next;
    tanh_c = tr.cells.col(t).array().tanh().matrix();
    dc = (dh.array() * o * (Scalar(1) - tanh_c.array().square())).matrix() + dc_next;
    auto col = d_pre.col(t);
    col.head(n) = (dc.array() * g * i * (Scalar(1) - i)).matrix();
    if (t > 0)
      col.segment(n, n) = (dc.array() * tr.cells.col(t - 1).array() * f * (Scalar(1) - f)).matrix();
    else
      col.segment(n, n).setZero();
    col.segment(2 * n, n) = (dh.array() * tanh_c.array() * o * (Scalar(1) - o)).matrix();
    col.tail(n) = (dc.array() * i * (Scalar(1) - g.square())).matrix();
    dc_next = (dc.array() * f).matrix();
    dh_next.noalias() = p.recurrent_weight.transpose() * col;
  }
  grad.input_weight.noalias() += d_pre * inputs.transpose();
  if (T > 1)
    grad.recurrent_weight.noalias() += d_pre.rightCols(T - 1) * tr.hidden.leftCols(T - 1).transpose();
  grad.bias += d_pre.rowwise().sum();
  return p.input_weight.transpose() * d_pre;
}

// ---------------------------------------------------------------------------
// Pooling heads. `y` is n_L x (>= valid_length).

inline Eigen::Index resolve_length(Eigen::Index cols, std::optional<Eigen::Index> valid) {
  const Eigen::Index T = valid.value_or(cols);
  if (T < 1 || T > cols) throw UsageError("pooling over an empty or overlong sequence");
  return T;
}

/// z = y at the last valid frame.
template <typename Scalar>
Vector<Scalar> pool_last(const Matrix<Scalar>& y, std::optional<Eigen::Index> valid = {}) {
  return y.col(resolve_length(y.cols(), valid) - 1);
}

/// z = (1/T) sum_t y_t over valid frames.
template <typename Scalar>
Vector<Scalar> pool_mean(const Matrix<Scalar>& y, std::optional<Eigen::Index> valid = {}) {
  const Eigen::Index T = resolve_length(y.cols(), valid);
  return y.leftCols(T).rowwise().sum() / static_cast<Scalar>(T);
}

/// alpha_t = softmax_t(u . y_t) over valid frames (max-subtracted); padded
/// frames get weight 0.
template <typename Scalar>
Vector<Scalar> attention_weights(const Vector<Scalar>& u, const Matrix<Scalar>& y,
                                 std::optional<Eigen::Index> valid = {}) {
  const Eigen::Index T = resolve_length(y.cols(), valid);
  if (u.size() != y.rows()) throw UsageError("attention vector size mismatch");
  Vector<Scalar> alpha = Vector<Scalar>::Zero(y.cols());
  Vector<Scalar> scores = y.leftCols(T).transpose() * u;
  scores.array() -= scores.maxCoeff();
  alpha.head(T) = scores.array().exp().matrix();
  alpha.head(T) /= alpha.head(T).sum();
  return alpha;
}

/// z = sum_t alpha_t y_t.
template <typename Scalar>
Vector<Scalar> pool_attention(const Vector<Scalar>& u, const Matrix<Scalar>& y,
                              std::optional<Eigen::Index> valid = {}) {
  const Eigen::Index T = resolve_length(y.cols(), valid);
  const Vector<Scalar> alpha = attention_weights(u, y, T);
  return y.leftCols(T) * alpha.head(T);
}

/// Numerically stable softmax.
template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  Vector<Scalar> p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

}  // namespace ispc::nn

#endif  // ISPC_NN_LAYERS_HPP_
