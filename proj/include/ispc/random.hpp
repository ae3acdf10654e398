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

#ifndef ISPC_RANDOM_HPP_
#define ISPC_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace ispc {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a label, so that
// every component draws from its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

inline Rng make_rng(std::uint64_t seed, std::string_view label) {
  return Rng(derive_seed(seed, label));
}

}  // namespace ispc

#endif  // ISPC_RANDOM_HPP_
