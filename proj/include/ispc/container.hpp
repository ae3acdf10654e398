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

// Binary containers shared by models and feature files.
//
// Tensor container (models):
//   magic bytes (e.g. "ISPCMODL1", "ISPCSVM1")
//   uint32 LE  header length N
//   N bytes    UTF-8 JSON header; header["tensors"] lists {name, rows, cols}
//   payload    float32 LE, row-major, tensors in header order
//
// Feature matrix file:
//   16-byte header: "ISPCFEAT" | uint32 LE version | uint32 LE flags (0)
//   uint32 LE rows | uint32 LE cols
//   rows*cols float32 LE, row-major

#ifndef ISPC_CONTAINER_HPP_
#define ISPC_CONTAINER_HPP_

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ispc {

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct TensorContainer {
  nlohmann::json header;
  std::vector<NamedTensor> tensors;

  /// Throws DataError when the tensor is absent.
  const Eigen::MatrixXd& at(std::string_view name) const;
  bool contains(std::string_view name) const;
};

void write_tensor_container(const std::filesystem::path& path,
                            std::string_view magic, nlohmann::json header,
                            const std::vector<NamedTensor>& tensors);

TensorContainer read_tensor_container(const std::filesystem::path& path,
                                      std::string_view magic);

inline constexpr std::uint32_t kFeatureFileVersion = 1;

void write_feature_matrix(const std::filesystem::path& path,
                          const Eigen::MatrixXd& values);

Eigen::MatrixXd read_feature_matrix(const std::filesystem::path& path);

/// Rounds to `digits` significant decimal digits (report serialization).
double round_significant(double value, int digits = 9);

}  // namespace ispc

#endif  // ISPC_CONTAINER_HPP_
