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

#include "ispc/container.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "ispc/error.hpp"

namespace ispc {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  if (pos + 4 > in.size()) throw DataError("truncated container");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_matrix(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c))));
}

Eigen::MatrixXd get_matrix(const std::string& in, std::size_t& pos,
                           std::uint32_t rows, std::uint32_t cols) {
  const std::size_t bytes = std::size_t{rows} * cols * 4;
  if (pos + bytes > in.size()) throw DataError("truncated tensor payload");
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) {
      m(r, c) = std::bit_cast<float>(get_u32(in, pos));
      pos += 4;
    }
  return m;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

const Eigen::MatrixXd& TensorContainer::at(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw DataError("container has no tensor '" + std::string(name) + "'");
}

bool TensorContainer::contains(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void write_tensor_container(const std::filesystem::path& path,
                            std::string_view magic, nlohmann::json header,
                            const std::vector<NamedTensor>& tensors) {
  nlohmann::json directory = nlohmann::json::array();
  for (const auto& t : tensors)
    directory.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  header["tensors"] = directory;
  const std::string text = header.dump();

  std::string bytes(magic);
  put_u32(bytes, static_cast<std::uint32_t>(text.size()));
  bytes += text;
  for (const auto& t : tensors) put_matrix(bytes, t.value);
  spit(path, bytes);
}

TensorContainer read_tensor_container(const std::filesystem::path& path,
                                      std::string_view magic) {
  const std::string bytes = slurp(path);
  if (bytes.compare(0, magic.size(), magic) != 0)
    throw DataError(path.string() + ": bad magic, expected " + std::string(magic));
  std::size_t pos = magic.size();
  const std::uint32_t len = get_u32(bytes, pos);
  pos += 4;
  if (pos + len > bytes.size()) throw DataError("truncated container header");

  TensorContainer out;
  try {
    out.header = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  pos += len;
  for (const auto& entry : out.header.at("tensors")) {
    NamedTensor t;
    t.name = entry.at("name").get<std::string>();
    t.value = get_matrix(bytes, pos, entry.at("rows").get<std::uint32_t>(),
                         entry.at("cols").get<std::uint32_t>());
    out.tensors.push_back(std::move(t));
  }
  return out;
}

void write_feature_matrix(const std::filesystem::path& path,
                          const Eigen::MatrixXd& values) {
  std::string bytes = "ISPCFEAT";
  put_u32(bytes, kFeatureFileVersion);
  put_u32(bytes, 0);
  put_u32(bytes, static_cast<std::uint32_t>(values.rows()));
  put_u32(bytes, static_cast<std::uint32_t>(values.cols()));
  put_matrix(bytes, values);
  spit(path, bytes);
}

Eigen::MatrixXd read_feature_matrix(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() < 24 || bytes.compare(0, 8, "ISPCFEAT") != 0)
    throw DataError(path.string() + ": not an ISPCFEAT file");
  if (get_u32(bytes, 8) != kFeatureFileVersion)
    throw DataError(path.string() + ": unsupported feature file version");
  std::size_t pos = 24;
  Eigen::MatrixXd m = get_matrix(bytes, pos, get_u32(bytes, 16), get_u32(bytes, 20));
  if (pos != bytes.size()) throw DataError(path.string() + ": trailing bytes");
  return m;
}

double round_significant(double value, int digits) {
  if (!std::isfinite(value) || value == 0.0) return value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

}  // namespace ispc
