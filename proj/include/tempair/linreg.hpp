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
#include <functional>
#include <vector>

#include "tempair/augment.hpp"

namespace tempair::linreg {

// Linear-regression data-generating process y = theta_star^T x + eps under
// additive augmentations x + eta, eta ~ N(0, Sigma_eta), with a Gaussian
// prior over the weights.
struct LinearAugModel {
  Eigen::VectorXd theta_star;
  double sigma_eps_sq = 1.0;
  Eigen::MatrixXd sigma_eta;
  Eigen::VectorXd prior_mean;
  Eigen::MatrixXd prior_cov;

  void validate() const;
};

// The per-source block diag_term * I_B + shared_term * 11^T.
struct BlockCovariance {
  std::size_t B = 1;
  double diag_term = 1.0;
  double shared_term = 0.0;

  bool positive_definite() const {
    return diag_term > 0.0 &&
           diag_term + static_cast<double>(B) * shared_term > 0.0;
  }
  // Dense materialization, for oracles.
  Eigen::MatrixXd dense() const;
  // Sherman-Morrison closed forms.
  Eigen::MatrixXd inverse() const;
  double trace_inverse() const;
  double log_det() const;
};

// Augmented design: rows sharing a group index come from one source sample.
// Sets produced by the augmentation process also share the imposed response
// within a group; check_shared_responses enforces that stronger form.
struct AugmentedRegressionSet {
  Eigen::MatrixXd X_tilde;                // (nB) x d
  Eigen::VectorXd y;                      // nB
  std::vector<std::size_t> group_index;   // nB

  void validate() const;
  void check_shared_responses() const;
};

// Draws n sources x ~ N(0, I), responses y = theta_star'x + eps, and B
// additive augmentations per source, all sharing the source response.
AugmentedRegressionSet simulate_augmented_regression(const LinearAugModel& model,
                                                     std::size_t n,
                                                     std::size_t B,
                                                     std::uint64_t seed);

struct GaussianVectorPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// sigma_eps_sq / (sigma_eps_sq + var_delta), the correlation of two
// augmentation errors sharing one source error.
double error_correlation(double sigma_eps_sq, double var_delta);

// Closed form for the linear model: sigma_eps_sq /
// (sigma_eps_sq + theta_star^T Sigma_eta theta_star).
double linear_error_correlation(const LinearAugModel& model);

struct DeltaVarianceEstimate {
  double variance = 0.0;
  double mean = 0.0;  // should be ~0: augmentations induce no bias
};

// Monte Carlo estimate of var(f(x) - f(R_eta(x))) over i.i.d. eta.
DeltaVarianceEstimate delta_variance_mc(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const augment::AugmentationSpec& augmenter, const Eigen::VectorXd& x,
    std::size_t draws, std::uint64_t seed);

// Posterior over weights under the correlated per-group covariance, with
// the block inverse applied in Sherman-Morrison form.
GaussianVectorPosterior gls_posterior(const AugmentedRegressionSet& data,
                                      const BlockCovariance& cov,
                                      const Eigen::VectorXd& prior_mean,
                                      const Eigen::MatrixXd& prior_cov);

// Posterior when rows are treated i.i.d. with likelihood covariance
// (noise_var * T) * I.
GaussianVectorPosterior iid_tempered_linreg_posterior(
    const AugmentedRegressionSet& data, double noise_var, double temperature,
    const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_cov);

// KL(N(mean1, cov1) || N(mean2, cov2)).
double kl_gaussians(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                    const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2);

// KL-optimal temperature T* = (sigma_eps_sq + sigma_eta_sq) * Tr(Sigma^-1) / B
// for Sigma = sigma_eta_sq * I + sigma_eps_sq * 11^T.
double optimal_kl_temperature(double sigma_eps_sq, double sigma_eta_sq,
                              std::size_t B);

// KL divergence remaining at T*: 0.5 * [log|Sigma| - B log(B / Tr(Sigma^-1))].
double kl_residual_mismatch(double sigma_eps_sq, double sigma_eta_sq,
                            std::size_t B);

struct LogisticLatentReport {
  double agreement_rate = 0.0;
  double latent_error_correlation = 0.0;
};

// Latent-variable classification: z = f(x) + eps, eps ~ Logistic(0,1),
// y = 1{z >= 0}. Reports how often all pair sign constraints hold under a
// shared eps and the empirical correlation of the implied errors eps + delta.
LogisticLatentReport logistic_latent_sim(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const augment::AugmentationSpec& augmenter, const Eigen::VectorXd& x,
    std::size_t B, std::size_t draws, std::uint64_t seed);

}  // namespace tempair::linreg
