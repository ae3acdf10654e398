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

// Model checkpoints: a tensor container with magic "ISPCMODL1" whose JSON
// header carries the network config, seed, epoch and metrics.

#ifndef ISPC_NN_CHECKPOINT_HPP_
#define ISPC_NN_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>

#include "ispc/nn/model.hpp"
#include "json.hpp"

namespace ispc::nn {

inline constexpr const char* kCheckpointMagic = "ISPCMODL1";

nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  SequenceModel<double> model;
  std::uint64_t seed = 0;
  int epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

/// Tensors are stored as float32.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws DataError on a bad magic, a missing tensor or a shape mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ispc::nn

#endif  // ISPC_NN_CHECKPOINT_HPP_
