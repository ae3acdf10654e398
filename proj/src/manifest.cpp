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

#include "ispc/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ispc/error.hpp"

namespace ispc {

std::string_view level_name(Level level) {
  switch (level) {
    case Level::Low: return "L";
    case Level::Medium: return "M";
    case Level::High: return "H";
  }
  return "?";
}

Level bin_score(int score) {
  if (score < 0 || score > 100)
    throw DataError("intelligibility score out of range [0,100]: " + std::to_string(score));
  if (score <= 33) return Level::Low;
  if (score <= 66) return Level::Medium;
  return Level::High;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

Manifest read_manifest(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw DataError("cannot open manifest " + csv.string());
  const auto base = csv.parent_path();

  std::string line;
  if (!std::getline(in, line) || trim(line) != "path,speaker_id,score")
    throw DataError(csv.string() + ": expected header 'path,speaker_id,score'");

  Manifest out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != 3)
      throw DataError(csv.string() + ":" + std::to_string(line_no) + ": expected 3 columns");

    ManifestRecord r;
    r.path = cells[0];
    if (r.path.is_relative()) r.path = base / r.path;
    r.speaker_id = cells[1];
    const auto& s = cells[2];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r.score);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw DataError(csv.string() + ":" + std::to_string(line_no) + ": score is not an integer");
    bin_score(r.score);  // range check
    if (r.speaker_id.empty())
      throw DataError(csv.string() + ":" + std::to_string(line_no) + ": empty speaker_id");
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::filesystem::path& csv, const Manifest& manifest) {
  std::ofstream out(csv);
  if (!out) throw DataError("cannot write manifest " + csv.string());
  const auto base = csv.parent_path();
  out << "path,speaker_id,score\n";
  for (const auto& r : manifest) {
    auto p = r.path;
    {
      std::error_code ec;
      auto rel = std::filesystem::relative(std::filesystem::absolute(p),
                                           std::filesystem::absolute(base), ec);
      if (!ec && !rel.empty()) p = rel;
    }
    out << p.generic_string() << ',' << r.speaker_id << ',' << r.score << '\n';
  }
}

}  // namespace ispc
