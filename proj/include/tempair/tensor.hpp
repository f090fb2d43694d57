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

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>

namespace tempair {

// Channel-major image: data index (c*height + h)*width + w.
struct ImageTensor {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  Eigen::VectorXd data;

  ImageTensor() = default;
  ImageTensor(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w) {
    data = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c * h * w));
  }

  std::size_t size() const { return channels * height * width; }

  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data(static_cast<Eigen::Index>((c * height + h) * width + w));
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data(static_cast<Eigen::Index>((c * height + h) * width + w));
  }

  void require_square() const {
    if (height != width) {
      throw std::invalid_argument("operation requires a square image");
    }
  }
};

}  // namespace tempair
