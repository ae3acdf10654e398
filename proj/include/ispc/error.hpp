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

#ifndef ISPC_ERROR_HPP_
#define ISPC_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <vector>

namespace ispc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Missing, malformed or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure such as a NaN loss during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Non-fatal diagnostics collected while processing.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace ispc

#endif  // ISPC_ERROR_HPP_
