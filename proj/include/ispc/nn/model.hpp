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

#ifndef ISPC_NN_MODEL_HPP_
#define ISPC_NN_MODEL_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "ispc/nn/config.hpp"
#include "ispc/random.hpp"

namespace ispc::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// LSTM parameters, gates stacked as [input, forget, output, candidate].
template <typename Scalar>
struct LstmLayer {
  Matrix<Scalar> input_weight;      // 4 n_L x n_in
  Matrix<Scalar> recurrent_weight;  // 4 n_L x n_L
  Vector<Scalar> bias;              // 4 n_L

  Eigen::Index units() const { return recurrent_weight.cols(); }
};

/// Full parameter set. Also used as the gradient container, which mirrors
/// the parameters one-to-one.
template <typename Scalar>
struct SequenceModel {
  NetConfig config;
  Matrix<Scalar> dense1_weight;  // n_D1 x n_B
  Vector<Scalar> dense1_bias;
  LstmLayer<Scalar> lstm;
  Vector<Scalar> attention;  // n_L, empty unless pooling == Attention
  Matrix<Scalar> dense2_weight;  // n_D2 x n_L
  Vector<Scalar> dense2_bias;
  Matrix<Scalar> output_weight;  // n_C x n_D2
  Vector<Scalar> output_bias;

  static SequenceModel zeros(const NetConfig& cfg) {
    cfg.validate();
    SequenceModel m;
    m.config = cfg;
    const int nl = cfg.lstm_units;
    m.dense1_weight = Matrix<Scalar>::Zero(cfg.dense1_units, cfg.input_bands);
    m.dense1_bias = Vector<Scalar>::Zero(cfg.dense1_units);
    m.lstm.input_weight = Matrix<Scalar>::Zero(4 * nl, cfg.dense1_units);
    m.lstm.recurrent_weight = Matrix<Scalar>::Zero(4 * nl, nl);
    m.lstm.bias = Vector<Scalar>::Zero(4 * nl);
    m.attention = Vector<Scalar>::Zero(cfg.pooling == Pooling::Attention ? nl : 0);
    m.dense2_weight = Matrix<Scalar>::Zero(cfg.dense2_units, nl);
    m.dense2_bias = Vector<Scalar>::Zero(cfg.dense2_units);
    m.output_weight = Matrix<Scalar>::Zero(cfg.classes, cfg.dense2_units);
    m.output_bias = Vector<Scalar>::Zero(cfg.classes);
    return m;
  }

  template <typename Other>
  SequenceModel<Other> cast() const {
    SequenceModel<Other> m;
    m.config = config;
    m.dense1_weight = dense1_weight.template cast<Other>();
    m.dense1_bias = dense1_bias.template cast<Other>();
    m.lstm.input_weight = lstm.input_weight.template cast<Other>();
    m.lstm.recurrent_weight = lstm.recurrent_weight.template cast<Other>();
    m.lstm.bias = lstm.bias.template cast<Other>();
    m.attention = attention.template cast<Other>();
    m.dense2_weight = dense2_weight.template cast<Other>();
    m.dense2_bias = dense2_bias.template cast<Other>();
    m.output_weight = output_weight.template cast<Other>();
    m.output_bias = output_bias.template cast<Other>();
    return m;
  }
};

/// Calls f(name, tensor_a, tensor_b, ...) for every parameter tensor of the
/// given models, in a fixed order. The attention vector is visited even when
/// it is empty.
template <typename F, typename... Models>
void zip_tensors(F&& f, Models&... ms) {
  f("dense1.weight", ms.dense1_weight...);
  f("dense1.bias", ms.dense1_bias...);
  f("lstm.input_weight", ms.lstm.input_weight...);
  f("lstm.recurrent_weight", ms.lstm.recurrent_weight...);
  f("lstm.bias", ms.lstm.bias...);
  f("attention", ms.attention...);
  f("dense2.weight", ms.dense2_weight...);
  f("dense2.bias", ms.dense2_bias...);
  f("output.weight", ms.output_weight...);
  f("output.bias", ms.output_bias...);
}

template <typename Scalar>
std::size_t parameter_count(const SequenceModel<Scalar>& m) {
  std::size_t n = 0;
  zip_tensors([&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); }, m);
  return n;
}

/// Glorot-uniform weights, zero biases except the forget gate (1.0), and
/// every attention component set to 1/L.
template <typename Scalar>
SequenceModel<Scalar> init_model(const NetConfig& cfg, std::uint64_t seed) {
  auto m = SequenceModel<Scalar>::zeros(cfg);
  Rng rng(seed);
  auto glorot = [&rng](auto& w, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<Scalar>(u(rng));
  };
  const int nl = cfg.lstm_units;
  glorot(m.dense1_weight, cfg.input_bands, cfg.dense1_units);
  glorot(m.lstm.input_weight, cfg.dense1_units, 4 * nl);
  glorot(m.lstm.recurrent_weight, nl, 4 * nl);
  m.lstm.bias.segment(nl, nl).setConstant(Scalar(1));
  if (cfg.pooling == Pooling::Attention)
    m.attention.setConstant(static_cast<Scalar>(1.0 / cfg.max_length));
  glorot(m.dense2_weight, nl, cfg.dense2_units);
  glorot(m.output_weight, cfg.dense2_units, cfg.classes);
  return m;
}

}  // namespace ispc::nn

#endif  // ISPC_NN_MODEL_HPP_
