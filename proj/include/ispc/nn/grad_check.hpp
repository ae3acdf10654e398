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

#ifndef ISPC_NN_GRAD_CHECK_HPP_
#define ISPC_NN_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "ispc/nn/network.hpp"

namespace ispc::nn {

/// Relative errors below this magnitude of both operands are measured
/// against the floor instead.
inline constexpr double kGradCheckFloor = 1e-8;

inline double relative_error(double analytic, double numeric, double floor = kGradCheckFloor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::map<std::string, double> per_tensor;
  std::size_t entries_checked = 0;
};

/// The tiny network used for gradient checks: L=6, n_B=3, n_D1=2, n_L=4,
/// n_D2=3, n_C=3, dropout off.
inline NetConfig tiny_net_config(Pooling pooling) {
  NetConfig cfg;
  cfg.max_length = 6;
  cfg.input_bands = 3;
  cfg.dense1_units = 2;
  cfg.lstm_units = 4;
  cfg.dense2_units = 3;
  cfg.classes = 3;
  cfg.dropout_rate = 0.0;
  cfg.pooling = pooling;
  return cfg;
}

/// A batch of `items` random utterances with random valid lengths in
/// [1, L]; padded rows hold the mask value.
template <typename Scalar>
PaddedBatch<Scalar> random_batch(const NetConfig& cfg, int items, std::uint64_t seed) {
  Rng rng = make_rng(seed, "batch");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> length(1, cfg.max_length);
  std::uniform_int_distribution<int> label(0, cfg.classes - 1);
  PaddedBatch<Scalar> batch;
  for (int i = 0; i < items; ++i) {
    const int T = length(rng);
    Matrix<Scalar> x = Matrix<Scalar>::Constant(cfg.max_length, cfg.input_bands, kMaskValue<Scalar>);
    for (int t = 0; t < T; ++t)
      for (int b = 0; b < cfg.input_bands; ++b) x(t, b) = static_cast<Scalar>(normal(rng));
    batch.push_back(std::move(x), T, label(rng));
  }
  return batch;
}

/// Compares the analytic gradient of the inference-mode loss with central
/// finite differences for every entry of every tensor, attention included.
/// Non-attention heads get a random attention vector only if one exists.
inline GradCheckReport grad_check(const NetConfig& cfg, std::uint64_t seed, double step = 1e-5,
                                  int items = 4) {
  if (cfg.dropout_rate != 0.0) throw UsageError("gradient check requires dropout off");
  SequenceModel<double> model = init_model<double>(cfg, derive_seed(seed, "init"));
  // Perturb away from the structured initialization (zero biases, constant u).
  Rng rng = make_rng(seed, "perturb");
  std::normal_distribution<double> normal(0.0, 0.3);
  zip_tensors([&](const char*, auto& t) { t = t.unaryExpr([&](double v) { return v + normal(rng); }); },
              model);
  const PaddedBatch<double> batch = random_batch<double>(cfg, items, seed);

  const LossAndGrad<double> analytic = loss_and_grad(model, batch, false);
  GradCheckReport report;
  SequenceModel<double> probe = model;
  zip_tensors(
      [&](const char* name, auto& p, const auto& g) {
        double worst = 0.0;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          const double saved = p.data()[k];
          p.data()[k] = saved + step;
          const double up = loss_and_grad(probe, batch, false).loss;
          p.data()[k] = saved - step;
          const double down = loss_and_grad(probe, batch, false).loss;
          p.data()[k] = saved;
          const double numeric = (up - down) / (2.0 * step);
          worst = std::max(worst, relative_error(g.data()[k], numeric));
          ++report.entries_checked;
        }
        report.per_tensor[name] = worst;
        report.max_relative_error = std::max(report.max_relative_error, worst);
      },
      probe, analytic.grad);
  return report;
}

}  // namespace ispc::nn

#endif  // ISPC_NN_GRAD_CHECK_HPP_
