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

#include <json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tempair/augment.hpp"
#include "tempair/net.hpp"
#include "tempair/sampler.hpp"

namespace tempair::cli {

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct GaussianMeanConfig {
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  double sigma_sq = 1.0;
  double sigma_eta_sq = 1.0;
  std::size_t cases = 100;
  std::size_t max_n = 8;
  std::size_t max_b = 16;
  std::optional<double> force_temperature;
};

struct KlGridConfig {
  std::vector<std::size_t> b_values;
  std::vector<double> sigma_eps_sq_values;
  std::vector<double> sigma_eta_sq_values;
};

struct SyntheticDataConfig {
  std::size_t n_train = 32;
  std::size_t n_test = 32;
  std::size_t size = 16;
  double label_flip_prob = 0.125;
  double noise_sd = 0.1;
};

struct CsvDataConfig {
  std::string train;
  std::string test;
};

struct NetworkConfig {
  std::string architecture = "gconv";  // "gconv" or "conv"
  net::Group group = net::Group::P4M;
  std::size_t stride = 1;
  net::Padding padding = net::Padding::Circular;
  std::vector<std::size_t> channels = {8, 8};
  std::size_t classes = 2;
  std::variant<SyntheticDataConfig, CsvDataConfig> dataset;
};

struct SamplerSection {
  double alpha0 = 0.01;
  std::size_t cycle_len = 8;
  std::size_t burn_in = 32;
  std::size_t epochs = 96;
  std::size_t batch_size = 8;
  double temperature = 1.0;
  sampler::TemperMode mode = sampler::TemperMode::TemperLikelihood;
  bool precondition = true;
};

struct SweepSection {
  std::vector<double> temperatures;
  std::vector<sampler::TemperMode> modes;
  // Scale the base step size with T so hot chains mix as fast as cold ones.
  // A pure fairness device: step sizes never change the stationary target.
  bool alpha_scales_with_t = false;
  // Independent chains averaged per sweep point.
  std::size_t chains_per_point = 1;
};

struct AugmentationSection {
  augment::AugmentationSpec spec;
  std::size_t bank_size = 1;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::optional<GaussianMeanConfig> gaussian_mean;
  std::optional<KlGridConfig> kl_grid;
  std::optional<NetworkConfig> network;
  double prior_sigma_sq = 1.0;
  std::optional<AugmentationSection> augmentation;
  SamplerSection sampler;
  std::optional<SweepSection> sweep;
  OutputConfig output;
  nlohmann::json echo;  // the verbatim document, copied into every run
};

// Parses and validates the JSON document; unknown keys are rejected.
// Throws tempair::ConfigError.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);

augment::AugmentationSpec parse_augmentation_spec(const nlohmann::json& doc);

}  // namespace tempair::cli
