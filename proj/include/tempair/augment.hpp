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
#include <cstdint>
#include <variant>
#include <vector>

#include "tempair/tensor.hpp"

namespace tempair::augment {

// Additive Gaussian noise x + eta, eta ~ N(0, Sigma_eta). A 1x1 covariance is
// broadcast i.i.d. to every coordinate; a d x d covariance must match the
// flattened input dimension.
struct AdditiveGaussian {
  Eigen::MatrixXd sigma_eta;
};

inline AdditiveGaussian additive_gaussian_iso(double variance) {
  AdditiveGaussian a;
  a.sigma_eta = Eigen::MatrixXd::Constant(1, 1, variance);
  return a;
}

// Uniform draw from the 8 symmetries of the square (4 rotations x flip).
struct Rot90Flip {};

// Rotation by an angle uniform in [-max_degrees, +max_degrees], bilinear
// interpolation, zero fill outside the grid.
struct SmallRotation {
  double max_degrees = 10.0;
};

// Zero-pad by pad_pixels, then take a uniformly random height x width window.
struct Crop {
  std::size_t pad_pixels = 1;
};

struct Composition;

using AugmentationSpec =
    std::variant<AdditiveGaussian, Rot90Flip, SmallRotation, Crop, Composition>;

// Ordered application of child specs.
struct Composition {
  std::vector<AugmentationSpec> steps;
};

void validate_spec(const AugmentationSpec& spec);

// Deterministic in (spec, x, seed).
ImageTensor apply(const AugmentationSpec& spec, const ImageTensor& x,
                  std::uint64_t seed);
Eigen::VectorXd apply(const AugmentationSpec& spec, const Eigen::VectorXd& x,
                      std::uint64_t seed);

// Fixed bank of B transform seeds derived from a master seed; epoch e replays
// bank entry (e mod B), so the set of augmentations per source is fixed.
struct AugmentationBank {
  AugmentationSpec spec;
  std::size_t B = 1;
  std::vector<std::uint64_t> seeds;

  std::uint64_t seed_for_epoch(std::size_t epoch) const {
    return seeds[epoch % B];
  }
};

AugmentationBank make_bank(const AugmentationSpec& spec, std::size_t B,
                           std::uint64_t master_seed);

struct LabeledImage {
  ImageTensor image;
  int label = 0;
};

struct AugmentedImage {
  ImageTensor image;
  int label = 0;
  std::size_t source = 0;
};

// One augmentation per source using the epoch's bank entry; labels are copied
// unchanged and each row keeps its source index.
std::vector<AugmentedImage> augment_dataset(
    const std::vector<LabeledImage>& data, const AugmentationBank& bank,
    std::size_t epoch);

// All B bank entries per source: n*B rows grouped by source.
std::vector<AugmentedImage> expand_full_bank(
    const std::vector<LabeledImage>& data, const AugmentationBank& bank);

}  // namespace tempair::augment
