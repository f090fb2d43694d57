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

#include <cstdint>
#include <string>
#include <vector>

#include "cli/config.hpp"
#include "tempair/augment.hpp"

namespace tempair::cli {

// Two-class single-channel images whose labels are invariant to p4m:
// class 0 is an axis-aligned center bar (either orientation), class 1 a
// centered cross. Pixel noise is added per image; a fraction of labels can
// be flipped to model irreducible error.
std::vector<augment::LabeledImage> make_synthetic_dataset(
    std::size_t n, std::size_t size, double noise_sd, double label_flip_prob,
    std::uint64_t seed);

// Plain pixel CSV: one image per line, "label,p0,p1,...". Single channel;
// the side length is the square root of the pixel count.
std::vector<augment::LabeledImage> load_pixel_csv(const std::string& path);

struct TrainTest {
  std::vector<augment::LabeledImage> train;
  std::vector<augment::LabeledImage> test;
};

// Builds the configured dataset: synthetic (train gets label flips, test is
// clean) or user CSV files.
TrainTest load_dataset(const NetworkConfig& config, std::uint64_t seed);

// The conv or G-conv classifier described by the config; G channel counts
// follow the parameter-parity rule.
net::NetworkSpec build_network(const NetworkConfig& config,
                               std::size_t image_size);

}  // namespace tempair::cli
