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

#ifndef ISPC_MANIFEST_HPP_
#define ISPC_MANIFEST_HPP_

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ispc {

/// Intelligibility level; the numeric value is the class index.
enum class Level : int { Low = 0, Medium = 1, High = 2 };

inline constexpr int kNumLevels = 3;
inline constexpr std::array<Level, 3> kAllLevels = {Level::Low, Level::Medium, Level::High};

std::string_view level_name(Level level);  // "L", "M", "H"

/// Bins a 0-100 intelligibility score: 0-33 low, 34-66 medium, 67-100 high.
/// Throws DataError outside [0, 100].
Level bin_score(int score);

struct ManifestRecord {
  std::filesystem::path path;  // absolute after reading
  std::string speaker_id;
  int score = 0;

  Level level() const { return bin_score(score); }
};

using Manifest = std::vector<ManifestRecord>;

/// Reads `path,speaker_id,score` CSV. Relative paths resolve against the
/// manifest's directory.
Manifest read_manifest(const std::filesystem::path& csv);

/// Writes paths relative to the manifest's directory when possible.
void write_manifest(const std::filesystem::path& csv, const Manifest& manifest);

}  // namespace ispc

#endif  // ISPC_MANIFEST_HPP_
