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

#include "ispc/nn/checkpoint.hpp"

#include <string>
#include <vector>

#include "ispc/container.hpp"
#include "ispc/error.hpp"

namespace ispc::nn {

nlohmann::json to_json(const NetConfig& cfg) {
  return {{"max_length", cfg.max_length},     {"input_bands", cfg.input_bands},
          {"dense1_units", cfg.dense1_units}, {"lstm_units", cfg.lstm_units},
          {"dense2_units", cfg.dense2_units}, {"classes", cfg.classes},
          {"dropout_rate", cfg.dropout_rate}, {"pooling", pooling_name(cfg.pooling)}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig cfg;
  try {
    cfg.max_length = j.at("max_length").get<int>();
    cfg.input_bands = j.at("input_bands").get<int>();
    cfg.dense1_units = j.at("dense1_units").get<int>();
    cfg.lstm_units = j.at("lstm_units").get<int>();
    cfg.dense2_units = j.at("dense2_units").get<int>();
    cfg.classes = j.at("classes").get<int>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.pooling = parse_pooling(j.at("pooling").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed network config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::vector<NamedTensor> tensors;
  zip_tensors(
      [&](const char* name, const auto& t) {
        tensors.push_back({name, Eigen::MatrixXd(t)});
      },
      ckpt.model);
  nlohmann::json header = {{"format", kCheckpointMagic},
                           {"config", to_json(ckpt.model.config)},
                           {"seed", ckpt.seed},
                           {"epoch", ckpt.epoch},
                           {"metrics", ckpt.metrics}};
  write_tensor_container(path, kCheckpointMagic, std::move(header), tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const TensorContainer c = read_tensor_container(path, kCheckpointMagic);
  Checkpoint ckpt;
  ckpt.model = SequenceModel<double>::zeros(net_config_from_json(c.header.at("config")));
  ckpt.seed = c.header.value("seed", std::uint64_t{0});
  ckpt.epoch = c.header.value("epoch", 0);
  ckpt.metrics = c.header.value("metrics", nlohmann::json::object());
  zip_tensors(
      [&](const char* name, auto& t) {
        const Eigen::MatrixXd& v = c.at(name);
        if (v.rows() != t.rows() || v.cols() != t.cols())
          throw DataError(path.string() + ": tensor '" + name + "' has the wrong shape");
        t = v;
      },
      ckpt.model);
  return ckpt;
}

}  // namespace ispc::nn
