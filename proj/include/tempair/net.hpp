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

#include "tempair/augment.hpp"
#include "tempair/group.hpp"
#include "tempair/tensor.hpp"

namespace tempair::net {

enum class Padding { Zero, Circular };

struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
};

struct Conv2d {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t k = 3;
  std::size_t stride = 1;
  Padding padding = Padding::Circular;
};

// First G-layer: lifts a plain image to a feature map indexed by the group.
struct GConvLift {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t k = 3;
  Group group = Group::P4M;
  std::size_t stride = 1;
  Padding padding = Padding::Circular;
};

// Group-to-group G-convolution; input must already be group-indexed.
struct GConvGG {
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t k = 3;
  Group group = Group::P4M;
  std::size_t stride = 1;
  Padding padding = Padding::Circular;
};

// Global average over group elements and spatial positions, per channel.
struct GroupSpatialGAP {};

struct ReLU {};

struct Softmax {};

using LayerSpec =
    std::variant<Dense, Conv2d, GConvLift, GConvGG, GroupSpatialGAP, ReLU,
                 Softmax>;

struct TensorShape {
  std::size_t channels = 0;
  std::size_t group = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * group * height * width; }
  bool operator==(const TensorShape&) const = default;
};

// Flat feature map; index ((c*group + g)*height + h)*width + w.
struct FeatureMap {
  TensorShape shape;
  Eigen::VectorXd data;

  explicit FeatureMap(TensorShape s = {})
      : shape(s),
        data(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.size()))) {}

  double& at(std::size_t c, std::size_t g, std::size_t h, std::size_t w) {
    return data(static_cast<Eigen::Index>(
        ((c * shape.group + g) * shape.height + h) * shape.width + w));
  }
  double at(std::size_t c, std::size_t g, std::size_t h, std::size_t w) const {
    return data(static_cast<Eigen::Index>(
        ((c * shape.group + g) * shape.height + h) * shape.width + w));
  }
};

FeatureMap to_feature_map(const ImageTensor& image);

using ParamVector = Eigen::VectorXd;

struct NetworkSpec {
  TensorShape input;
  std::vector<LayerSpec> layers;

  // Output shape of each layer; throws std::invalid_argument naming the
  // offending layer index on any mismatch.
  std::vector<TensorShape> shapes() const;
  std::size_t param_count() const;
  // (offset, length) of each layer's slice of the flat parameter vector.
  std::vector<std::pair<std::size_t, std::size_t>> param_layout() const;
  void validate() const;
};

std::size_t layer_param_count(const LayerSpec& layer);

// He-style deterministic initialization; biases zero.
ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed);

// Full forward pass; returns the final activation (class probabilities when
// the spec ends in Softmax).
Eigen::VectorXd forward(const NetworkSpec& spec, const ParamVector& params,
                        const FeatureMap& x);

// Forward through the first n_layers layers only.
FeatureMap forward_prefix(const NetworkSpec& spec, const ParamVector& params,
                          const FeatureMap& x, std::size_t n_layers);

// Reference realization of the group action on feature maps: spatial
// rotation/flip plus left-multiplication permutation of the group axis.
// Plain maps (group = 1) transform spatially only.
FeatureMap group_act_on_feature_map(GroupElement g, const FeatureMap& map);

struct ClassifiedExample {
  FeatureMap x;
  int label = 0;
};

struct RegressionExample {
  FeatureMap x;
  double target = 0.0;
};

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

// Mean cross-entropy of the terminal softmax over the batch, with
// reverse-mode parameter gradient.
LossGrad loss_and_grad(const NetworkSpec& spec, const ParamVector& params,
                       const std::vector<ClassifiedExample>& batch);

// Mean Gaussian negative log-likelihood for scalar-output specs.
LossGrad loss_and_grad_gaussian(const NetworkSpec& spec,
                                const ParamVector& params,
                                const std::vector<RegressionExample>& batch,
                                double noise_var);

// Max-abs difference between forward_prefix(g . x) and the group-acted
// forward_prefix(x).
double equivariance_deviation(const NetworkSpec& spec,
                              const ParamVector& params, const FeatureMap& x,
                              GroupElement g, std::size_t prefix_layers);

// Mean total variation between predicted class probabilities over all
// unordered pairs of the bank's augmentations of x.
double total_variation_invariance(const NetworkSpec& spec,
                                  const ParamVector& params,
                                  const ImageTensor& x,
                                  const augment::AugmentationBank& bank);

// Literal group-sum evaluation of a G-convolution, kept as a slow oracle for
// small inputs; equals the filter-transformation fast path.
FeatureMap gconv_forward_reference(const LayerSpec& layer,
                                   const Eigen::VectorXd& layer_params,
                                   const FeatureMap& in);

// Paired conv / G-conv classifier specs whose parameter totals match within
// ~10%: G-channel counts are the conv ones divided by sqrt(|G|), rounded.
struct PairedSpecs {
  NetworkSpec conv;
  NetworkSpec gconv;
};
PairedSpecs make_paired_specs(TensorShape input,
                              const std::vector<std::size_t>& conv_channels,
                              std::size_t classes, Group group,
                              std::size_t stride, Padding padding);

}  // namespace tempair::net
