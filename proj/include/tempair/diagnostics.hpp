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
#include <functional>
#include <vector>

#include "tempair/augment.hpp"
#include "tempair/linreg.hpp"
#include "tempair/net.hpp"
#include "tempair/sampler.hpp"

namespace tempair::diagnostics {

// Residuals grouped by source sample, augmentation order preserved.
struct GroupedResiduals {
  std::vector<std::pair<std::size_t, Eigen::VectorXd>> groups;

  void validate() const;
  // Common group size; throws on unbalanced designs.
  std::size_t balanced_size() const;
};

// Regression residuals y - f(x_tilde), grouped by the set's group index.
GroupedResiduals residual_series(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const linreg::AugmentedRegressionSet& data);

// Classifier residuals 1 - p(true class), grouped by source.
GroupedResiduals residual_series(
    const net::NetworkSpec& spec, const net::ParamVector& params,
    const std::vector<augment::AugmentedImage>& data);

// One-way ANOVA intraclass correlation on a balanced design:
// (MS_between - MS_within) / (MS_between + (B-1) MS_within).
double intraclass_correlation(const GroupedResiduals& residuals);

// Pooled Pearson correlation over within-group augmentation pairs.
double empirical_error_correlation(const GroupedResiduals& residuals);

// B / T.
double effective_sample_size(std::size_t B, double temperature);

// Mean total variation over a probe set, one value per chain sample.
std::vector<double> chain_total_variation(
    const sampler::Chain& chain, const net::NetworkSpec& spec,
    const std::vector<ImageTensor>& probe,
    const augment::AugmentationBank& bank);

}  // namespace tempair::diagnostics
