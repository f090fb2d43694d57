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
#include <optional>
#include <vector>

namespace tempair::conjugate {

// Gaussian mean-estimation model with additive Gaussian augmentations:
// data x | mu ~ N(mu, sigma_sq), prior mu ~ N(mu0, sigma0_sq), and each
// augmentation adds independent N(0, sigma_eta_sq) noise.
struct GaussianMeanModel {
  double mu0 = 0.0;
  double sigma0_sq = 1.0;
  double sigma_sq = 1.0;
  double sigma_eta_sq = 0.0;

  void validate() const;  // throws std::invalid_argument on bad variances
};

// B augmentations of each of n scalar sources. Row i of `values` holds the
// B augmentations of source i.
struct AugmentedScalarSet {
  Eigen::MatrixXd values;  // n x B
  std::optional<Eigen::VectorXd> provenance;  // the unaugmented sources

  std::size_t n() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t B() const { return static_cast<std::size_t>(values.cols()); }
  double sum() const { return values.sum(); }
  void validate() const;
};

struct GaussianPosterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Draws entry (i,b) = sources[i] + eta with eta ~ N(0, sigma_eta_sq),
// deterministically in `seed`.
AugmentedScalarSet augment_gaussian(const GaussianMeanModel& model,
                                    const std::vector<double>& sources,
                                    std::size_t B, std::uint64_t seed);

// Exact posterior over mu under the correlated covariance (block-diagonal
// with per-source blocks sigma_eta_sq*I + sigma_sq*11^T), via the closed form.
GaussianPosterior correlated_posterior(const GaussianMeanModel& model,
                                       const AugmentedScalarSet& data);

// Posterior over mu when the Bn entries are (wrongly) treated as i.i.d.
// N(mu, sigma_sq + sigma_eta_sq) and the likelihood is tempered by 1/T.
GaussianPosterior iid_tempered_posterior(const GaussianMeanModel& model,
                                         const AugmentedScalarSet& data,
                                         double temperature);

// The temperature at which the tempered i.i.d. posterior equals the
// correlated one: T* = (sigma_eta_sq + B*sigma_sq) / (sigma_eta_sq + sigma_sq).
double optimal_temperature(const GaussianMeanModel& model, std::size_t B);

// Brute-force reference: materializes the full Bn x Bn covariance and runs
// generic Gaussian conjugacy through a dense factorization. Guarded to
// Bn <= 4096.
GaussianPosterior dense_posterior_oracle(const GaussianMeanModel& model,
                                         const AugmentedScalarSet& data);

}  // namespace tempair::conjugate
