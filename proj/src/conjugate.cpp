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

#include "tempair/conjugate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tempair/errors.hpp"
#include "tempair/rng.hpp"

namespace tempair::conjugate {

namespace {

constexpr std::size_t kDenseSizeGuard = 4096;

void require_no_singular_block(const GaussianMeanModel& model, std::size_t B) {
  if (B > 1 && model.sigma_eta_sq == 0.0) {
    throw SingularCovarianceError(
        "block covariance is singular: B = " + std::to_string(B) +
        " augmentations with sigma_eta_sq = 0 (sigma_sq = " +
        std::to_string(model.sigma_sq) + ")");
  }
}

}  // namespace

void GaussianMeanModel::validate() const {
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) {
    throw std::invalid_argument("sigma0_sq must be positive and finite");
  }
  if (!(sigma_sq > 0.0) || !std::isfinite(sigma_sq)) {
    throw std::invalid_argument("sigma_sq must be positive and finite");
  }
  if (sigma_eta_sq < 0.0 || !std::isfinite(sigma_eta_sq)) {
    throw std::invalid_argument("sigma_eta_sq must be >= 0 and finite");
  }
  if (!std::isfinite(mu0)) {
    throw std::invalid_argument("mu0 must be finite");
  }
}

void AugmentedScalarSet::validate() const {
  if (values.rows() < 1 || values.cols() < 1) {
    throw std::invalid_argument("augmented set needs n >= 1 and B >= 1");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("augmented set contains non-finite entries");
  }
  if (provenance && provenance->size() != values.rows()) {
    throw std::invalid_argument("provenance length must equal n");
  }
}

AugmentedScalarSet augment_gaussian(const GaussianMeanModel& model,
                                    const std::vector<double>& sources,
                                    std::size_t B, std::uint64_t seed) {
  model.validate();
  if (B == 0) throw std::invalid_argument("B must be >= 1");
  if (sources.empty()) throw std::invalid_argument("sources must be nonempty");

  const std::size_t n = sources.size();
  const double eta_sd = std::sqrt(model.sigma_eta_sq);
  AugmentedScalarSet out;
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(B));
  out.provenance = Eigen::Map<const Eigen::VectorXd>(
      sources.data(), static_cast<Eigen::Index>(n));

  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < B; ++b) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) =
          sources[i] + eta_sd * rng.normal();
    }
  }
  return out;
}

GaussianPosterior correlated_posterior(const GaussianMeanModel& model,
                                       const AugmentedScalarSet& data) {
  model.validate();
  data.validate();
  const auto B = data.B();
  require_no_singular_block(model, B);

  // 1^T Sigma^-1 1 per block is B / (sigma_eta_sq + B*sigma_sq); the same
  // factor weights the data sum (Sherman-Morrison applied to each block).
  const double denom =
      model.sigma_eta_sq + static_cast<double>(B) * model.sigma_sq;
  const double data_precision =
      static_cast<double>(B * data.n()) / denom;
  const double precision = data_precision + 1.0 / model.sigma0_sq;
  GaussianPosterior post;
  post.mean = (data.sum() / denom + model.mu0 / model.sigma0_sq) / precision;
  post.variance = 1.0 / precision;
  return post;
}

GaussianPosterior iid_tempered_posterior(const GaussianMeanModel& model,
                                         const AugmentedScalarSet& data,
                                         double temperature) {
  model.validate();
  data.validate();
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be positive and finite");
  }

  const double noise = temperature * (model.sigma_sq + model.sigma_eta_sq);
  const double data_precision =
      static_cast<double>(data.B() * data.n()) / noise;
  const double precision = data_precision + 1.0 / model.sigma0_sq;
  GaussianPosterior post;
  post.mean = (model.mu0 / model.sigma0_sq + data.sum() / noise) / precision;
  post.variance = 1.0 / precision;
  return post;
}

double optimal_temperature(const GaussianMeanModel& model, std::size_t B) {
  model.validate();
  if (B == 0) throw std::invalid_argument("B must be >= 1");
  const double denom = model.sigma_eta_sq + model.sigma_sq;
  if (denom == 0.0) {
    throw std::invalid_argument(
        "optimal temperature undefined for sigma_eta_sq = sigma_sq = 0");
  }
  return (model.sigma_eta_sq + static_cast<double>(B) * model.sigma_sq) /
         denom;
}

GaussianPosterior dense_posterior_oracle(const GaussianMeanModel& model,
                                         const AugmentedScalarSet& data) {
  model.validate();
  data.validate();
  const std::size_t n = data.n();
  const std::size_t B = data.B();
  const std::size_t m = n * B;
  if (m > kDenseSizeGuard) {
    throw SizeLimitError("dense oracle limited to Bn <= " +
                         std::to_string(kDenseSizeGuard) + ", got " +
                         std::to_string(m));
  }
  require_no_singular_block(model, B);

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                              static_cast<Eigen::Index>(m));
  Eigen::VectorXd x(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < B; ++b) {
      const auto row = static_cast<Eigen::Index>(i * B + b);
      x(row) = data.values(static_cast<Eigen::Index>(i),
                           static_cast<Eigen::Index>(b));
      for (std::size_t bp = 0; bp < B; ++bp) {
        const auto col = static_cast<Eigen::Index>(i * B + bp);
        cov(row, col) = model.sigma_sq + (b == bp ? model.sigma_eta_sq : 0.0);
      }
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    // Jitter floor for near-singular inputs; a genuinely singular covariance
    // still fails and is reported.
    const double jitter = 1e-10 * cov.trace();
    cov.diagonal().array() += jitter;
    llt.compute(cov);
    if (llt.info() != Eigen::Success) {
      throw SingularCovarianceError(
          "dense covariance is not positive definite (sigma_sq = " +
          std::to_string(model.sigma_sq) + ", sigma_eta_sq = " +
          std::to_string(model.sigma_eta_sq) + ")");
    }
  }

  const Eigen::VectorXd ones =
      Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m));
  const Eigen::VectorXd cov_inv_ones = llt.solve(ones);
  const double quad = ones.dot(cov_inv_ones);
  const double cross = x.dot(cov_inv_ones);

  const double precision = quad + 1.0 / model.sigma0_sq;
  GaussianPosterior post;
  post.mean = (cross + model.mu0 / model.sigma0_sq) / precision;
  post.variance = 1.0 / precision;
  return post;
}

}  // namespace tempair::conjugate
