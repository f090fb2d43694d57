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

#include "tempair/linreg.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "tempair/errors.hpp"
#include "tempair/rng.hpp"

namespace tempair::linreg {

namespace {

void check_symmetric_psd(const Eigen::MatrixXd& m, const char* name,
                         bool strict) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument(std::string(name) + " must be square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double min_eig = es.eigenvalues().minCoeff();
  if (strict ? !(min_eig > 0.0) : min_eig < -1e-10 * scale) {
    throw std::invalid_argument(std::string(name) +
                                (strict ? " must be positive definite"
                                        : " must be positive semidefinite"));
  }
}

Eigen::LLT<Eigen::MatrixXd> factor_pd(const Eigen::MatrixXd& m,
                                      const char* name) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError(std::string(name) +
                                  " is not positive definite");
  }
  return llt;
}

}  // namespace

void LinearAugModel::validate() const {
  if (theta_star.size() == 0) {
    throw std::invalid_argument("theta_star must be nonempty");
  }
  if (!(sigma_eps_sq > 0.0)) {
    throw std::invalid_argument("sigma_eps_sq must be positive");
  }
  if (sigma_eta.rows() != theta_star.size()) {
    throw std::invalid_argument("Sigma_eta dimension mismatch");
  }
  check_symmetric_psd(sigma_eta, "Sigma_eta", /*strict=*/false);
  if (prior_mean.size() != theta_star.size() ||
      prior_cov.rows() != theta_star.size()) {
    throw std::invalid_argument("prior dimension mismatch");
  }
  check_symmetric_psd(prior_cov, "prior_cov", /*strict=*/true);
}

Eigen::MatrixXd BlockCovariance::dense() const {
  const auto b = static_cast<Eigen::Index>(B);
  return diag_term * Eigen::MatrixXd::Identity(b, b) +
         shared_term * Eigen::MatrixXd::Ones(b, b);
}

Eigen::MatrixXd BlockCovariance::inverse() const {
  if (!positive_definite()) {
    throw SingularCovarianceError(
        "block covariance singular: diag_term = " + std::to_string(diag_term) +
        ", shared_term = " + std::to_string(shared_term) +
        ", B = " + std::to_string(B));
  }
  const auto b = static_cast<Eigen::Index>(B);
  const double correction =
      shared_term / (diag_term + static_cast<double>(B) * shared_term);
  return (Eigen::MatrixXd::Identity(b, b) -
          correction * Eigen::MatrixXd::Ones(b, b)) /
         diag_term;
}

double BlockCovariance::trace_inverse() const {
  if (!positive_definite()) {
    throw SingularCovarianceError("block covariance singular in trace");
  }
  const double nB = static_cast<double>(B);
  const double correction = shared_term / (diag_term + nB * shared_term);
  return nB * (1.0 - correction) / diag_term;
}

double BlockCovariance::log_det() const {
  if (!positive_definite()) {
    throw SingularCovarianceError("block covariance singular in log-det");
  }
  const double nB = static_cast<double>(B);
  return std::log(diag_term + nB * shared_term) +
         (nB - 1.0) * std::log(diag_term);
}

void AugmentedRegressionSet::validate() const {
  const auto rows = X_tilde.rows();
  if (rows == 0) throw std::invalid_argument("empty design matrix");
  if (y.size() != rows ||
      group_index.size() != static_cast<std::size_t>(rows)) {
    throw std::invalid_argument("design, response and groups must align");
  }
}

void AugmentedRegressionSet::check_shared_responses() const {
  validate();
  std::map<std::size_t, double> seen;
  for (Eigen::Index i = 0; i < X_tilde.rows(); ++i) {
    const auto [it, inserted] = seen.emplace(group_index[i], y(i));
    if (!inserted && it->second != y(i)) {
      throw std::invalid_argument(
          "rows of group " + std::to_string(group_index[i]) +
          " carry different responses");
    }
  }
}

AugmentedRegressionSet simulate_augmented_regression(
    const LinearAugModel& model, std::size_t n, std::size_t B,
    std::uint64_t seed) {
  model.validate();
  if (n == 0 || B == 0) throw std::invalid_argument("need n >= 1 and B >= 1");
  const Eigen::Index d = model.theta_star.size();
  Rng rng(seed);
  augment::AdditiveGaussian noise{model.sigma_eta};

  AugmentedRegressionSet out;
  out.X_tilde.resize(static_cast<Eigen::Index>(n * B), d);
  out.y.resize(static_cast<Eigen::Index>(n * B));
  out.group_index.reserve(n * B);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXd x(d);
    for (Eigen::Index j = 0; j < d; ++j) x(j) = rng.normal();
    const double y =
        model.theta_star.dot(x) + std::sqrt(model.sigma_eps_sq) * rng.normal();
    for (std::size_t b = 0; b < B; ++b) {
      const auto row = static_cast<Eigen::Index>(i * B + b);
      out.X_tilde.row(row) =
          augment::apply(augment::AugmentationSpec(noise), x, rng.next_u64())
              .transpose();
      out.y(row) = y;
      out.group_index.push_back(i);
    }
  }
  out.check_shared_responses();
  return out;
}

double error_correlation(double sigma_eps_sq, double var_delta) {
  if (!(sigma_eps_sq > 0.0)) {
    throw std::invalid_argument("sigma_eps_sq must be positive");
  }
  if (var_delta < 0.0) {
    throw std::invalid_argument("var_delta must be >= 0");
  }
  return sigma_eps_sq / (sigma_eps_sq + var_delta);
}

double linear_error_correlation(const LinearAugModel& model) {
  model.validate();
  const double var_delta =
      model.theta_star.dot(model.sigma_eta * model.theta_star);
  return error_correlation(model.sigma_eps_sq, std::max(var_delta, 0.0));
}

DeltaVarianceEstimate delta_variance_mc(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const augment::AugmentationSpec& augmenter, const Eigen::VectorXd& x,
    std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw std::invalid_argument("need at least 2 draws");
  const double fx = predictor(x);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double delta =
        fx - predictor(augment::apply(augmenter, x, derive_seed(seed, i)));
    sum += delta;
    sum_sq += delta * delta;
  }
  const double n = static_cast<double>(draws);
  DeltaVarianceEstimate est;
  est.mean = sum / n;
  est.variance = std::max(0.0, (sum_sq - sum * sum / n) / (n - 1.0));
  return est;
}

GaussianVectorPosterior gls_posterior(const AugmentedRegressionSet& data,
                                      const BlockCovariance& cov,
                                      const Eigen::VectorXd& prior_mean,
                                      const Eigen::MatrixXd& prior_cov) {
  data.validate();
  if (!cov.positive_definite()) {
    throw SingularCovarianceError(
        "per-group covariance singular: diag_term = " +
        std::to_string(cov.diag_term) +
        ", shared_term = " + std::to_string(cov.shared_term));
  }
  const Eigen::Index d = data.X_tilde.cols();
  if (prior_mean.size() != d || prior_cov.rows() != d) {
    throw std::invalid_argument("prior dimension mismatch");
  }

  // Collect rows per group; every group must have exactly cov.B rows.
  std::map<std::size_t, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < data.X_tilde.rows(); ++i) {
    groups[data.group_index[i]].push_back(i);
  }

  const double correction =
      cov.shared_term /
      (cov.diag_term + static_cast<double>(cov.B) * cov.shared_term);

  Eigen::MatrixXd xt_sinv_x = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd xt_sinv_y = Eigen::VectorXd::Zero(d);
  for (const auto& [gid, rows] : groups) {
    if (rows.size() != cov.B) {
      throw std::invalid_argument(
          "group " + std::to_string(gid) + " has " +
          std::to_string(rows.size()) + " rows, expected B = " +
          std::to_string(cov.B));
    }
    Eigen::MatrixXd xg(static_cast<Eigen::Index>(rows.size()), d);
    Eigen::VectorXd yg(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xg.row(static_cast<Eigen::Index>(r)) = data.X_tilde.row(rows[r]);
      yg(static_cast<Eigen::Index>(r)) = data.y(rows[r]);
    }
    // Sigma^-1 = (I - correction * 11^T) / diag_term per block.
    const Eigen::VectorXd col_sums = xg.colwise().sum();
    xt_sinv_x +=
        (xg.transpose() * xg - correction * col_sums * col_sums.transpose()) /
        cov.diag_term;
    xt_sinv_y += (xg.transpose() * yg -
                  correction * col_sums * yg.sum()) /
                 cov.diag_term;
  }

  const auto prior_llt = factor_pd(prior_cov, "prior covariance");
  const Eigen::MatrixXd prior_precision =
      prior_llt.solve(Eigen::MatrixXd::Identity(d, d));

  const Eigen::MatrixXd precision = prior_precision + xt_sinv_x;
  const auto post_llt = factor_pd(precision, "posterior precision");
  GaussianVectorPosterior post;
  post.cov = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
  post.mean = post_llt.solve(prior_precision * prior_mean + xt_sinv_y);
  return post;
}

GaussianVectorPosterior iid_tempered_linreg_posterior(
    const AugmentedRegressionSet& data, double noise_var, double temperature,
    const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_cov) {
  data.validate();
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument("noise_var must be positive");
  }
  const Eigen::Index d = data.X_tilde.cols();
  if (prior_mean.size() != d || prior_cov.rows() != d) {
    throw std::invalid_argument("prior dimension mismatch");
  }

  const double scale = 1.0 / (temperature * noise_var);
  const auto prior_llt = factor_pd(prior_cov, "prior covariance");
  const Eigen::MatrixXd prior_precision =
      prior_llt.solve(Eigen::MatrixXd::Identity(d, d));

  const Eigen::MatrixXd precision =
      prior_precision + scale * data.X_tilde.transpose() * data.X_tilde;
  const auto post_llt = factor_pd(precision, "posterior precision");
  GaussianVectorPosterior post;
  post.cov = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
  post.mean = post_llt.solve(prior_precision * prior_mean +
                             scale * data.X_tilde.transpose() * data.y);
  return post;
}

double kl_gaussians(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                    const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
  const Eigen::Index dim = mean1.size();
  if (mean2.size() != dim || cov1.rows() != dim || cov2.rows() != dim ||
      cov1.cols() != dim || cov2.cols() != dim) {
    throw std::invalid_argument("KL arguments must share one dimension");
  }
  const auto llt1 = factor_pd(cov1, "cov1");
  const auto llt2 = factor_pd(cov2, "cov2");

  auto log_det = [](const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  };

  const Eigen::VectorXd diff = mean2 - mean1;
  const double trace_term = llt2.solve(cov1).trace();
  const double quad_term = diff.dot(llt2.solve(diff));
  return 0.5 * (log_det(llt2) - log_det(llt1) - static_cast<double>(dim) +
                trace_term + quad_term);
}

namespace {

BlockCovariance single_source_block(double sigma_eps_sq, double sigma_eta_sq,
                         std::size_t B) {
  if (B == 0) throw std::invalid_argument("B must be >= 1");
  if (!(sigma_eps_sq > 0.0) || sigma_eta_sq < 0.0) {
    throw std::invalid_argument("variances must be positive");
  }
  BlockCovariance cov;
  cov.B = B;
  cov.diag_term = sigma_eta_sq;
  cov.shared_term = sigma_eps_sq;
  if (B == 1) {
    // A single augmentation collapses the block to the scalar
    // sigma_eta_sq + sigma_eps_sq; fold it into the diagonal so the
    // Sherman-Morrison form stays valid at sigma_eta_sq = 0.
    cov.diag_term = sigma_eta_sq + sigma_eps_sq;
    cov.shared_term = 0.0;
  }
  if (!cov.positive_definite()) {
    throw SingularCovarianceError(
        "single-source block covariance singular: sigma_eta_sq = " +
        std::to_string(sigma_eta_sq) + " with B = " + std::to_string(B));
  }
  return cov;
}

}  // namespace

double optimal_kl_temperature(double sigma_eps_sq, double sigma_eta_sq,
                              std::size_t B) {
  const BlockCovariance cov = single_source_block(sigma_eps_sq, sigma_eta_sq, B);
  return (sigma_eps_sq + sigma_eta_sq) * cov.trace_inverse() /
         static_cast<double>(B);
}

double kl_residual_mismatch(double sigma_eps_sq, double sigma_eta_sq,
                            std::size_t B) {
  const BlockCovariance cov = single_source_block(sigma_eps_sq, sigma_eta_sq, B);
  const double nB = static_cast<double>(B);
  return 0.5 * (cov.log_det() - nB * std::log(nB / cov.trace_inverse()));
}

LogisticLatentReport logistic_latent_sim(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const augment::AugmentationSpec& augmenter, const Eigen::VectorXd& x,
    std::size_t B, std::size_t draws, std::uint64_t seed) {
  if (draws < 100) throw std::invalid_argument("need at least 100 draws");
  if (B == 0) throw std::invalid_argument("B must be >= 1");

  Rng rng(derive_seed(seed, 0));
  const double fx = predictor(x);

  std::size_t pairs = 0;
  std::size_t agreeing = 0;
  // Pooled second moments of implied-error pairs (both orders).
  double s1 = 0.0, s2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
  std::size_t count = 0;

  std::vector<double> f_aug(B);
  for (std::size_t d = 0; d < draws; ++d) {
    const double eps = rng.logistic();
    const bool label = fx + eps >= 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      f_aug[b] = predictor(augment::apply(
          augmenter, x, derive_seed(seed, 1 + d * B + b)));
    }
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t bp = b + 1; bp < B; ++bp) {
        // Shared-eps satisfiability of both sign constraints.
        const bool ok_b = (f_aug[b] + eps >= 0.0) == label;
        const bool ok_bp = (f_aug[bp] + eps >= 0.0) == label;
        ++pairs;
        if (ok_b && ok_bp) ++agreeing;

        const double eb = eps + (fx - f_aug[b]);
        const double ebp = eps + (fx - f_aug[bp]);
        for (const auto& [u, v] :
             {std::pair{eb, ebp}, std::pair{ebp, eb}}) {
          s1 += u;
          s2 += v;
          s11 += u * u;
          s22 += v * v;
          s12 += u * v;
          ++count;
        }
      }
    }
  }

  LogisticLatentReport rep;
  rep.agreement_rate =
      pairs == 0 ? 1.0
                 : static_cast<double>(agreeing) / static_cast<double>(pairs);
  if (count == 0) {
    rep.latent_error_correlation = 1.0;  // B = 1: vacuous
    return rep;
  }
  const double n = static_cast<double>(count);
  const double cov = s12 / n - (s1 / n) * (s2 / n);
  const double var_u = s11 / n - (s1 / n) * (s1 / n);
  const double var_v = s22 / n - (s2 / n) * (s2 / n);
  const double denom = std::sqrt(std::max(var_u, 0.0) * std::max(var_v, 0.0));
  rep.latent_error_correlation = denom > 0.0 ? cov / denom : 1.0;
  return rep;
}

}  // namespace tempair::linreg
