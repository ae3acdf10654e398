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

#ifndef ISPC_NN_NETWORK_HPP_
#define ISPC_NN_NETWORK_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "ispc/error.hpp"
#include "ispc/nn/layers.hpp"
#include "ispc/nn/model.hpp"
#include "ispc/random.hpp"

namespace ispc::nn {

/// Value stored in padded rows. Any leak of padding into a computation
/// turns the result into NaN.
template <typename Scalar>
inline const Scalar kMaskValue = std::numeric_limits<Scalar>::quiet_NaN();

/// Fixed-length inputs: each item is L x n_B (one frame per row), rows at or
/// beyond its valid length hold kMaskValue.
template <typename Scalar>
struct PaddedBatch {
  std::vector<Matrix<Scalar>> inputs;
  std::vector<int> valid_lengths;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }

  void push_back(Matrix<Scalar> padded, int valid_length, int label) {
    if (valid_length < 1 || valid_length > padded.rows())
      throw UsageError("valid length must lie in [1, L]");
    inputs.push_back(std::move(padded));
    valid_lengths.push_back(valid_length);
    labels.push_back(label);
  }
};

/// Activations of one forward pass, kept for backpropagation.
template <typename Scalar>
struct ItemTrace {
  Matrix<Scalar> inputs;  // n_B x T
  Matrix<Scalar> dense1;  // n_D1 x T, after ReLU
  LstmTrace<Scalar> lstm;
  Vector<Scalar> alpha;   // T, attention pooling only
  Vector<Scalar> pooled;
  Vector<Scalar> dense2_pre;
  Vector<Scalar> dropout_mask;  // 0 or 1/(1-rate); ones at inference
  Vector<Scalar> dense2;        // after ReLU and dropout
  Vector<Scalar> logits;
  Vector<Scalar> probs;
};

/// One utterance through the network. Only the first `valid_length` rows of
/// `padded` are read. Dropout is sampled from `rng` when `training`.
template <typename Scalar>
ItemTrace<Scalar> forward_item(const SequenceModel<Scalar>& m, const Matrix<Scalar>& padded,
                               int valid_length, bool training, Rng* rng = nullptr) {
  const NetConfig& cfg = m.config;
  if (padded.cols() != cfg.input_bands) throw UsageError("input band count mismatch");
  if (valid_length < 1 || valid_length > padded.rows()) throw UsageError("invalid sequence length");
  if (valid_length > cfg.max_length) throw UsageError("sequence longer than the model's L");

  ItemTrace<Scalar> tr;
  tr.inputs = padded.topRows(valid_length).transpose();
  tr.dense1.noalias() = m.dense1_weight * tr.inputs;
  tr.dense1.colwise() += m.dense1_bias;
  tr.dense1 = tr.dense1.cwiseMax(Scalar(0));
  tr.lstm = lstm_forward(m.lstm, tr.dense1);

  switch (cfg.pooling) {
    case Pooling::Last: tr.pooled = pool_last(tr.lstm.hidden); break;
    case Pooling::Mean: tr.pooled = pool_mean(tr.lstm.hidden); break;
    case Pooling::Attention:
      tr.alpha = attention_weights(m.attention, tr.lstm.hidden);
      tr.pooled = tr.lstm.hidden * tr.alpha;
      break;
  }

  tr.dense2_pre = m.dense2_weight * tr.pooled + m.dense2_bias;
  tr.dropout_mask = Vector<Scalar>::Ones(tr.dense2_pre.size());
  if (training && cfg.dropout_rate > 0.0) {
    if (rng == nullptr) throw UsageError("training forward pass needs a dropout stream");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - cfg.dropout_rate));
    for (Eigen::Index k = 0; k < tr.dropout_mask.size(); ++k)
      tr.dropout_mask(k) = u(*rng) < cfg.dropout_rate ? Scalar(0) : keep_scale;
  }
  tr.dense2 = tr.dense2_pre.cwiseMax(Scalar(0)).cwiseProduct(tr.dropout_mask);
  tr.logits = m.output_weight * tr.dense2 + m.output_bias;
  tr.probs = softmax(tr.logits);
  return tr;
}

/// Backpropagates dLoss/dlogits through one trace, accumulating into `grad`.
template <typename Scalar>
void backward_item(const SequenceModel<Scalar>& m, const ItemTrace<Scalar>& tr,
                   const Vector<Scalar>& d_logits, SequenceModel<Scalar>& grad) {
  grad.output_weight.noalias() += d_logits * tr.dense2.transpose();
  grad.output_bias += d_logits;

  Vector<Scalar> d_dense2 = m.output_weight.transpose() * d_logits;
  for (Eigen::Index k = 0; k < d_dense2.size(); ++k)
    d_dense2(k) = tr.dense2_pre(k) > Scalar(0) ? d_dense2(k) * tr.dropout_mask(k) : Scalar(0);
  grad.dense2_weight.noalias() += d_dense2 * tr.pooled.transpose();
  grad.dense2_bias += d_dense2;
  const Vector<Scalar> d_pooled = m.dense2_weight.transpose() * d_dense2;

  const auto& y = tr.lstm.hidden;
  const Eigen::Index T = y.cols();
  Matrix<Scalar> d_hidden = Matrix<Scalar>::Zero(y.rows(), T);
  switch (m.config.pooling) {
    case Pooling::Last: d_hidden.col(T - 1) = d_pooled; break;
    case Pooling::Mean: d_hidden.colwise() = d_pooled / static_cast<Scalar>(T); break;
    case Pooling::Attention: {
      const Vector<Scalar> d_alpha = y.transpose() * d_pooled;
      const Scalar mix = tr.alpha.dot(d_alpha);
      const Vector<Scalar> d_score = tr.alpha.cwiseProduct((d_alpha.array() - mix).matrix());
      grad.attention.noalias() += y * d_score;
      d_hidden.noalias() = d_pooled * tr.alpha.transpose();
      d_hidden.noalias() += m.attention * d_score.transpose();
      break;
    }
  }

  Matrix<Scalar> d_dense1 = lstm_backward(m.lstm, tr.dense1, tr.lstm, d_hidden, grad.lstm);
  d_dense1 = (tr.dense1.array() > Scalar(0)).select(d_dense1.array(), Scalar(0)).matrix();
  grad.dense1_weight.noalias() += d_dense1 * tr.inputs.transpose();
  grad.dense1_bias += d_dense1.rowwise().sum();
}

/// Class probabilities for every item (inference: no dropout), n x n_C.
template <typename Scalar>
Matrix<Scalar> forward(const SequenceModel<Scalar>& m, const PaddedBatch<Scalar>& batch) {
  Matrix<Scalar> out(batch.size(), m.config.classes);
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.row(i) = forward_item(m, batch.inputs[i], batch.valid_lengths[i], false).probs.transpose();
  return out;
}

/// Arg-max class per item; ties go to the lower class index.
template <typename Scalar>
std::vector<int> predict(const SequenceModel<Scalar>& m, const PaddedBatch<Scalar>& batch) {
  const Matrix<Scalar> p = forward(m, batch);
  std::vector<int> out(batch.size());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

template <typename Scalar>
struct LossAndGrad {
  double loss = 0.0;  // mean cross-entropy
  SequenceModel<Scalar> grad;
  Matrix<Scalar> probs;  // items x n_C
};

/// Mean categorical cross-entropy over `indices` of the batch and its
/// gradient. Items are processed in the given order; dropout masks are drawn
/// from a stream seeded by `dropout_seed` when `training`.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const SequenceModel<Scalar>& m, const PaddedBatch<Scalar>& batch,
                                  std::span<const std::size_t> indices, bool training,
                                  std::uint64_t dropout_seed = 0) {
  if (indices.empty()) throw UsageError("loss over an empty batch");
  LossAndGrad<Scalar> out;
  out.grad = SequenceModel<Scalar>::zeros(m.config);
  out.probs.resize(static_cast<Eigen::Index>(indices.size()), m.config.classes);
  Rng rng(dropout_seed);
  const auto scale = static_cast<Scalar>(1.0 / static_cast<double>(indices.size()));
  double total = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    const int label = batch.labels.at(i);
    if (label < 0 || label >= m.config.classes) throw UsageError("label out of range");
    const ItemTrace<Scalar> tr = forward_item(m, batch.inputs[i], batch.valid_lengths[i], training, &rng);
    const Scalar shift = tr.logits.maxCoeff();
    const double log_norm =
        static_cast<double>(shift) + std::log(static_cast<double>((tr.logits.array() - shift).exp().sum()));
    total += log_norm - static_cast<double>(tr.logits(label));
    Vector<Scalar> d_logits = tr.probs;
    d_logits(label) -= Scalar(1);
    d_logits *= scale;
    backward_item(m, tr, d_logits, out.grad);
    out.probs.row(static_cast<Eigen::Index>(k)) = tr.probs.transpose();
  }
  out.loss = total / static_cast<double>(indices.size());
  return out;
}

/// Whole-batch convenience overload.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const SequenceModel<Scalar>& m, const PaddedBatch<Scalar>& batch,
                                  bool training, std::uint64_t dropout_seed = 0) {
  std::vector<std::size_t> all(batch.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_grad(m, batch, std::span<const std::size_t>(all), training, dropout_seed);
}

}  // namespace ispc::nn

#endif  // ISPC_NN_NETWORK_HPP_
