// Copyright 2026 the tempair authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace tempair {

// Covariance that is singular (or numerically not positive definite).
class SingularCovarianceError : public std::runtime_error {
 public:
  explicit SingularCovarianceError(const std::string& what)
      : std::runtime_error(what) {}
};

// Dense-oracle problem size exceeds the cost guard.
class SizeLimitError : public std::runtime_error {
 public:
  explicit SizeLimitError(const std::string& what) : std::runtime_error(what) {}
};

// Operation requested on a chain with no retained samples.
class EmptyChainError : public std::runtime_error {
 public:
  explicit EmptyChainError(const std::string& what)
      : std::runtime_error(what) {}
};

// Malformed experiment configuration (rejected before any compute).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tempair
