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

#ifndef ISPC_NN_CONFIG_HPP_
#define ISPC_NN_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "ispc/error.hpp"

namespace ispc::nn {

/// How the LSTM output sequence is reduced to one utterance vector.
enum class Pooling { Last, Mean, Attention };

inline std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Last: return "last";
    case Pooling::Mean: return "mean";
    case Pooling::Attention: return "attention";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "last") return Pooling::Last;
  if (s == "mean") return Pooling::Mean;
  if (s == "attention") return Pooling::Attention;
  throw UsageError("unknown pooling '" + std::string(s) + "' (last|mean|attention)");
}

/// Architecture: dense(ReLU) -> LSTM -> pooling -> dense(ReLU, dropout) ->
/// dense -> softmax. Defaults are the canonical sizes.
struct NetConfig {
  int max_length = 700;   // padded sequence length L
  int input_bands = 32;   // n_B
  int dense1_units = 32;  // n_D1
  int lstm_units = 128;   // n_L
  int dense2_units = 50;  // n_D2
  int classes = 3;        // n_C
  double dropout_rate = 0.33;
  Pooling pooling = Pooling::Attention;

  void validate() const {
    if (max_length < 1 || input_bands < 1 || dense1_units < 1 || lstm_units < 1 ||
        dense2_units < 1 || classes < 2)
      throw UsageError("network sizes must be positive (and at least 2 classes)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw UsageError("dropout rate must lie in [0,1)");
  }
};

struct TrainConfig {
  double learning_rate = 0.0002;
  int batch_size = 32;
  int max_epochs = 40;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool clip_gradients = false;
  double clip_norm = 5.0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be positive");
    if (batch_size < 1 || max_epochs < 1) throw UsageError("batch size and epochs must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw UsageError("Adam betas must lie in [0,1)");
    if (!(epsilon > 0.0)) throw UsageError("Adam epsilon must be positive");
  }
};

}  // namespace ispc::nn

#endif  // ISPC_NN_CONFIG_HPP_
