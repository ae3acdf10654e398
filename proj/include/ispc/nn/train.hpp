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

#ifndef ISPC_NN_TRAIN_HPP_
#define ISPC_NN_TRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ispc/nn/network.hpp"

namespace ispc::nn {

template <typename Scalar>
struct AdamState {
  SequenceModel<Scalar> first_moment;
  SequenceModel<Scalar> second_moment;
  long step = 0;

  explicit AdamState(const NetConfig& cfg)
      : first_moment(SequenceModel<Scalar>::zeros(cfg)),
        second_moment(SequenceModel<Scalar>::zeros(cfg)) {}
};

/// One bias-corrected Adam update; advances state.step first, so the first
/// call uses t = 1.
template <typename Scalar>
void adam_step(SequenceModel<Scalar>& params, const SequenceModel<Scalar>& grads,
               AdamState<Scalar>& state, const TrainConfig& cfg) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const auto b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, t));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, t));
  const auto lr = static_cast<Scalar>(cfg.learning_rate);
  const auto eps = static_cast<Scalar>(cfg.epsilon);
  zip_tensors(
      [&](const char*, auto& p, const auto& g, auto& m, auto& v) {
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
      },
      params, grads, state.first_moment, state.second_moment);
}

template <typename Scalar>
double global_norm(const SequenceModel<Scalar>& g) {
  double sq = 0.0;
  zip_tensors([&](const char*, const auto& t) { sq += static_cast<double>(t.squaredNorm()); }, g);
  return std::sqrt(sq);
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw UsageError("accuracy needs equal-length, nonempty inputs");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_loss = 0.0;
  double valid_accuracy = 0.0;
};

/// Inference-mode mean cross-entropy and accuracy over a whole batch.
template <typename Scalar>
std::pair<double, double> evaluate(const SequenceModel<Scalar>& m, const PaddedBatch<Scalar>& batch) {
  const Matrix<Scalar> p = forward(m, batch);
  double loss = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const int label = batch.labels[static_cast<std::size_t>(i)];
    loss -= std::log(std::max(static_cast<double>(p(i, label)), 1e-300));
    Eigen::Index best = 0;
    p.row(i).maxCoeff(&best);
    correct += best == label;
  }
  const auto n = static_cast<double>(p.rows());
  return {loss / n, static_cast<double>(correct) / n};
}

template <typename Scalar>
struct TrainResult {
  SequenceModel<Scalar> model;  // best validation snapshot
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_valid_accuracy = 0.0;
  double best_valid_loss = 0.0;
};

/// Mini-batch Adam training. Weights start from init_model(seed "init"),
/// batches are reshuffled every epoch, and the snapshot with the highest
/// validation accuracy is returned; equal accuracies are ranked by
/// validation loss. Throws NumericError on a non-finite loss.
template <typename Scalar>
TrainResult<Scalar> train(const NetConfig& net, const TrainConfig& cfg,
                          const PaddedBatch<Scalar>& train_set, const PaddedBatch<Scalar>& valid_set,
                          const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  net.validate();
  cfg.validate();
  if (train_set.empty() || valid_set.empty()) throw DataError("training and validation sets must be nonempty");

  TrainResult<Scalar> result;
  SequenceModel<Scalar> model = init_model<Scalar>(net, derive_seed(cfg.seed, "init"));
  AdamState<Scalar> adam(net);
  Rng shuffle_rng = make_rng(cfg.seed, "shuffle");
  result.model = model;
  result.best_valid_accuracy = -1.0;
  result.best_valid_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, step = 0; start < order.size(); start += batch, ++step) {
      const std::size_t count = std::min(batch, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      const std::uint64_t dropout_seed =
          derive_seed(cfg.seed, "dropout/" + std::to_string(epoch) + "/" + std::to_string(step));
      auto lg = loss_and_grad(model, train_set, idx, true, dropout_seed);
      if (!std::isfinite(lg.loss))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      if (cfg.clip_gradients) {
        const double norm = global_norm(lg.grad);
        if (norm > cfg.clip_norm) {
          const auto s = static_cast<Scalar>(cfg.clip_norm / norm);
          zip_tensors([&](const char*, auto& t) { t *= s; }, lg.grad);
        }
      }
      adam_step(model, lg.grad, adam, cfg);
      loss_sum += lg.loss * static_cast<double>(count);
      for (std::size_t k = 0; k < count; ++k) {
        Eigen::Index best = 0;
        lg.probs.row(static_cast<Eigen::Index>(k)).maxCoeff(&best);
        correct += best == train_set.labels[idx[k]];
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    std::tie(rec.valid_loss, rec.valid_accuracy) = evaluate(model, valid_set);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.valid_accuracy > result.best_valid_accuracy ||
        (rec.valid_accuracy == result.best_valid_accuracy && rec.valid_loss < result.best_valid_loss)) {
      result.best_valid_accuracy = rec.valid_accuracy;
      result.best_valid_loss = rec.valid_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

}  // namespace ispc::nn

#endif  // ISPC_NN_TRAIN_HPP_
