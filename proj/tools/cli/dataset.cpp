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

#include "cli/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "tempair/errors.hpp"
#include "tempair/rng.hpp"

namespace tempair::cli {

std::vector<augment::LabeledImage> make_synthetic_dataset(
    std::size_t n, std::size_t size, double noise_sd, double label_flip_prob,
    std::uint64_t seed) {
  Rng rng(seed);
  std::vector<augment::LabeledImage> out;
  out.reserve(n);
  const std::size_t lo = size / 2 - 1;  // two-pixel band through the center
  const std::size_t hi = size / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.uniform_int(2));
    const bool horizontal = rng.uniform_int(2) == 0;
    const double intensity = rng.uniform(0.8, 1.2);
    // Secondary-bar strength relative to the primary bar. The class ranges
    // overlap on [0.25, 0.55], so even the optimal classifier keeps genuine
    // predictive uncertainty there; both classes stay closed under p4m.
    const double ghost = label == 0 ? rng.uniform(0.0, 0.55)
                                    : rng.uniform(0.25, 1.0);

    ImageTensor img(1, size, size);
    auto paint_h = [&](double value) {
      for (std::size_t r : {lo, hi}) {
        for (std::size_t c = 0; c < size; ++c) img.at(0, r, c) += value;
      }
    };
    auto paint_v = [&](double value) {
      for (std::size_t c : {lo, hi}) {
        for (std::size_t r = 0; r < size; ++r) img.at(0, r, c) += value;
      }
    };
    if (horizontal) {
      paint_h(intensity);
      paint_v(intensity * ghost);
    } else {
      paint_v(intensity);
      paint_h(intensity * ghost);
    }
    for (Eigen::Index j = 0; j < img.data.size(); ++j) {
      img.data(j) += noise_sd * rng.normal();
    }

    // The flip draw is unconditional so the image stream does not depend on
    // the flip probability.
    int reported = label;
    if (rng.uniform() < label_flip_prob) reported = 1 - reported;
    out.push_back(augment::LabeledImage{std::move(img), reported});
  }
  return out;
}

std::vector<augment::LabeledImage> load_pixel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  std::vector<augment::LabeledImage> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
    }
    if (values.size() < 2) {
      throw ConfigError("each dataset row needs a label and pixels");
    }
    const std::size_t pixels = values.size() - 1;
    const auto side =
        static_cast<std::size_t>(std::lround(std::sqrt(
            static_cast<double>(pixels))));
    if (side * side != pixels) {
      throw ConfigError("pixel count " + std::to_string(pixels) +
                        " is not a square");
    }
    augment::LabeledImage row;
    row.label = static_cast<int>(values[0]);
    row.image = ImageTensor(1, side, side);
    for (std::size_t i = 0; i < pixels; ++i) {
      row.image.data(static_cast<Eigen::Index>(i)) = values[i + 1];
    }
    out.push_back(std::move(row));
  }
  if (out.empty()) throw ConfigError("dataset '" + path + "' is empty");
  return out;
}

TrainTest load_dataset(const NetworkConfig& config, std::uint64_t seed) {
  TrainTest out;
  if (const auto* syn = std::get_if<SyntheticDataConfig>(&config.dataset)) {
    out.train = make_synthetic_dataset(syn->n_train, syn->size, syn->noise_sd,
                                       syn->label_flip_prob,
                                       derive_seed(seed, 11));
    out.test = make_synthetic_dataset(syn->n_test, syn->size, syn->noise_sd,
                                      0.0, derive_seed(seed, 12));
  } else {
    const auto& csv = std::get<CsvDataConfig>(config.dataset);
    out.train = load_pixel_csv(csv.train);
    out.test = load_pixel_csv(csv.test);
  }
  return out;
}

net::NetworkSpec build_network(const NetworkConfig& config,
                               std::size_t image_size) {
  const auto pair = net::make_paired_specs(
      net::TensorShape{1, 1, image_size, image_size}, config.channels,
      config.classes, config.group, config.stride, config.padding);
  return config.architecture == "conv" ? pair.conv : pair.gconv;
}

}  // namespace tempair::cli
