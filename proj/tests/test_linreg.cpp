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

#include <doctest.h>

#include <cmath>

#include "tempair/conjugate.hpp"
#include "tempair/errors.hpp"
#include "tempair/rng.hpp"
#include "test_support.hpp"

using namespace tempair;
using namespace tempair::linreg;
using tempair::testing::close;
using tempair::testing::rel_err;

namespace {

// Independent oracle: evaluate the single-source KL as a function of T via the
// generic Gaussian KL on dense matrices and minimize by golden section.
double kl_of_temperature(double T, double sigma_eps_sq, double sigma_eta_sq,
                         std::size_t B) {
  const auto b = static_cast<Eigen::Index>(B);
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(b);
  const Eigen::MatrixXd tempered =
      ((sigma_eps_sq + sigma_eta_sq) / T) *
      Eigen::MatrixXd::Identity(b, b);
  const Eigen::MatrixXd correlated =
      sigma_eta_sq * Eigen::MatrixXd::Identity(b, b) +
      sigma_eps_sq * Eigen::MatrixXd::Ones(b, b);
  return kl_gaussians(mu, tempered, mu, correlated);
}

double golden_section_kl_min(double sigma_eps_sq, double sigma_eta_sq,
                             std::size_t B, double lo = 1e-3,
                             double hi = 100.0) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = kl_of_temperature(c, sigma_eps_sq, sigma_eta_sq, B);
  double fd = kl_of_temperature(d, sigma_eps_sq, sigma_eta_sq, B);
  for (int it = 0; it < 120 && (b - a) > 1e-8; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = kl_of_temperature(c, sigma_eps_sq, sigma_eta_sq, B);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = kl_of_temperature(d, sigma_eps_sq, sigma_eta_sq, B);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("error correlation closed form") {
  CHECK(error_correlation(1.0, 0.0) == 1.0);
  CHECK(error_correlation(1.0, 1e12) <= 1e-11);
  CHECK(close(error_correlation(1.0, 3.0), 0.25, 1e-12));
  CHECK_THROWS_AS(error_correlation(-1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(error_correlation(1.0, -0.5), std::invalid_argument);

  SUBCASE("monotone decreasing in var_delta, always in (0, 1]") {
    double prev = 2.0;
    for (double v = 0.0; v < 20.0; v += 0.37) {
      const double r = error_correlation(0.7, v);
      CHECK(r > 0.0);
      CHECK(r <= 1.0);
      CHECK(r < prev);
      prev = r;
    }
  }

  SUBCASE("Monte Carlo pair simulation agrees") {
    // Pairs (eps + d1, eps + d2) sharing eps, var(d) = 3.
    Rng rng(2024);
    const std::size_t n = 100000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eps = rng.normal();
      const double u = eps + std::sqrt(3.0) * rng.normal();
      const double v = eps + std::sqrt(3.0) * rng.normal();
      s1 += u;
      s2 += v;
      s11 += u * u;
      s22 += v * v;
      s12 += u * v;
    }
    const double nn = static_cast<double>(n);
    const double r =
        (s12 / nn - s1 * s2 / (nn * nn)) /
        std::sqrt((s11 / nn - s1 * s1 / (nn * nn)) *
                  (s22 / nn - s2 * s2 / (nn * nn)));
    const double se = (1.0 - 0.25 * 0.25) / std::sqrt(nn);
    CHECK(std::abs(r - error_correlation(1.0, 3.0)) < 3.0 * se);
  }
}

TEST_CASE("linear error correlation") {
  LinearAugModel m;
  m.sigma_eps_sq = 1.0;
  m.prior_mean = Eigen::VectorXd::Zero(2);
  m.prior_cov = Eigen::MatrixXd::Identity(2, 2);

  SUBCASE("model orthogonal to the augmentation subspace is invariant") {
    m.theta_star = Eigen::VectorXd(2);
    m.theta_star << 1.0, -1.0;
    m.sigma_eta = Eigen::MatrixXd(2, 2);
    m.sigma_eta << 0.8, 0.8, 0.8, 0.8;
    CHECK(linear_error_correlation(m) == 1.0);
  }

  SUBCASE("no augmentation randomness") {
    m.theta_star = Eigen::VectorXd(2);
    m.theta_star << 0.3, 2.0;
    m.sigma_eta = Eigen::MatrixXd::Zero(2, 2);
    CHECK(linear_error_correlation(m) == 1.0);
  }

  SUBCASE("diagonal case against Monte Carlo") {
    m.theta_star = Eigen::VectorXd(2);
    m.theta_star << 1.0, 0.0;
    m.sigma_eta = Eigen::VectorXd({{3.0, 7.0}}).asDiagonal();
    CHECK(close(linear_error_correlation(m), 0.25, 1e-12));

    // Simulate augmentation errors eps - eta' theta and correlate.
    Rng rng(7);
    const std::size_t n = 100000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double eps = rng.normal();
      const double u = eps - std::sqrt(3.0) * rng.normal();
      const double v = eps - std::sqrt(3.0) * rng.normal();
      s1 += u;
      s2 += v;
      s11 += u * u;
      s22 += v * v;
      s12 += u * v;
    }
    const double nn = static_cast<double>(n);
    const double r =
        (s12 / nn - s1 * s2 / (nn * nn)) /
        std::sqrt((s11 / nn - s1 * s1 / (nn * nn)) *
                  (s22 / nn - s2 * s2 / (nn * nn)));
    const double se = (1.0 - 0.0625) / std::sqrt(nn);
    CHECK(std::abs(r - 0.25) < 3.0 * se);
  }
}

TEST_CASE("delta variance Monte Carlo") {
  SUBCASE("constant predictor is fully invariant") {
    const auto est = delta_variance_mc(
        [](const Eigen::VectorXd&) { return 3.0; },
        augment::additive_gaussian_iso(2.0), Eigen::VectorXd::Zero(3), 500,
        1);
    CHECK(est.variance == 0.0);
    CHECK(est.mean == 0.0);
  }

  SUBCASE("linear predictor matches the closed form") {
    Eigen::VectorXd theta(2);
    theta << 1.5, -0.5;
    Eigen::MatrixXd sigma(2, 2);
    sigma << 2.0, 0.3, 0.3, 1.0;
    augment::AdditiveGaussian aug{sigma};
    const double expected = theta.dot(sigma * theta);

    const std::size_t draws = 200000;
    const auto est = delta_variance_mc(
        [&](const Eigen::VectorXd& v) { return theta.dot(v); }, aug,
        Eigen::VectorXd::Ones(2), draws, 77);
    const double se =
        expected * std::sqrt(2.0 / static_cast<double>(draws - 1));
    CHECK(std::abs(est.variance - expected) < 3.0 * se);
    CHECK(std::abs(est.mean) <
          3.0 * std::sqrt(expected / static_cast<double>(draws)));
  }

  SUBCASE("deterministic in the seed") {
    const auto f = [](const Eigen::VectorXd& v) { return v.sum(); };
    const auto spec = augment::additive_gaussian_iso(1.0);
    const auto a = delta_variance_mc(f, spec, Eigen::VectorXd::Zero(2), 2, 9);
    const auto b = delta_variance_mc(f, spec, Eigen::VectorXd::Zero(2), 2, 9);
    CHECK(a.variance == b.variance);
    CHECK(a.mean == b.mean);
    CHECK_THROWS_AS(delta_variance_mc(f, spec, Eigen::VectorXd::Zero(2), 1, 9),
                    std::invalid_argument);
  }
}

TEST_CASE("Sherman-Morrison block identities") {
  Rng rng(55);
  for (std::size_t B : {1, 2, 3, 8, 17, 64}) {
    BlockCovariance cov;
    cov.B = B;
    cov.diag_term = rng.uniform(0.05, 3.0);
    cov.shared_term = rng.uniform(0.0, 2.0);
    const Eigen::MatrixXd direct = cov.dense().inverse();
    const Eigen::MatrixXd closed = cov.inverse();
    CHECK((direct - closed).cwiseAbs().maxCoeff() <
          1e-10 * direct.cwiseAbs().maxCoeff());
    CHECK(rel_err(cov.trace_inverse(), direct.trace()) < 1e-10);
    CHECK(rel_err(cov.log_det(),
                  std::log(cov.dense().determinant())) < 1e-8);
  }
}

TEST_CASE("GLS posterior") {
  Rng rng(99);

  SUBCASE("diagonal covariance equals the i.i.d. T = 1 posterior") {
    const Eigen::Index d = 3;
    AugmentedRegressionSet data;
    data.X_tilde.resize(12, d);
    data.y.resize(12);
    for (Eigen::Index i = 0; i < 12; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) data.X_tilde(i, j) = rng.normal();
    }
    for (std::size_t g = 0; g < 4; ++g) {
      const double y = rng.normal();
      for (std::size_t b = 0; b < 3; ++b) {
        data.y(static_cast<Eigen::Index>(3 * g + b)) = y;
        data.group_index.push_back(g);
      }
    }
    BlockCovariance cov{3, 1.7, 0.0};
    const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(d);
    const Eigen::MatrixXd prior_cov = 2.0 * Eigen::MatrixXd::Identity(d, d);

    const auto gls = gls_posterior(data, cov, prior_mean, prior_cov);
    const auto iid =
        iid_tempered_linreg_posterior(data, 1.7, 1.0, prior_mean, prior_cov);
    CHECK((gls.mean - iid.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((gls.cov - iid.cov).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("d = 1 all-ones design reproduces the conjugate module") {
    conjugate::GaussianMeanModel cm{0.4, 2.0, 1.0, 0.7};
    conjugate::AugmentedScalarSet cdata;
    cdata.values.resize(2, 3);
    cdata.values << 0.5, 1.5, -0.2, 2.0, 1.1, 0.9;
    const auto expected = conjugate::correlated_posterior(cm, cdata);

    // Responses are the augmented scalars themselves; groups mark which
    // entries share a source (and hence a covariance block).
    AugmentedRegressionSet data;
    data.X_tilde = Eigen::MatrixXd::Ones(6, 1);
    data.y.resize(6);
    data.y << 0.5, 1.5, -0.2, 2.0, 1.1, 0.9;
    data.group_index = {0, 0, 0, 1, 1, 1};

    BlockCovariance cov{3, cm.sigma_eta_sq, cm.sigma_sq};
    Eigen::VectorXd prior_mean(1);
    prior_mean << cm.mu0;
    Eigen::MatrixXd prior_cov(1, 1);
    prior_cov << cm.sigma0_sq;

    const auto post = gls_posterior(data, cov, prior_mean, prior_cov);
    CHECK(rel_err(post.mean(0), expected.mean) < 1e-10);
    CHECK(rel_err(post.cov(0, 0), expected.variance) < 1e-10);
  }

  SUBCASE("degenerate limit approaches the single-observation posterior") {
    Eigen::VectorXd xrow(2);
    xrow << 0.7, -1.2;
    const double y = 0.9;
    const std::size_t B = 5;
    AugmentedRegressionSet data;
    data.X_tilde.resize(static_cast<Eigen::Index>(B), 2);
    data.y.resize(static_cast<Eigen::Index>(B));
    for (std::size_t b = 0; b < B; ++b) {
      data.X_tilde.row(static_cast<Eigen::Index>(b)) = xrow.transpose();
      data.y(static_cast<Eigen::Index>(b)) = y;
      data.group_index.push_back(0);
    }
    const double sigma_eps_sq = 0.8;
    BlockCovariance cov{B, 1e-6, sigma_eps_sq};
    const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd prior_cov = Eigen::MatrixXd::Identity(2, 2);
    const auto post = gls_posterior(data, cov, prior_mean, prior_cov);

    AugmentedRegressionSet single;
    single.X_tilde = xrow.transpose();
    single.y.resize(1);
    single.y << y;
    single.group_index = {0};
    const auto ref = iid_tempered_linreg_posterior(single, sigma_eps_sq, 1.0,
                                                   prior_mean, prior_cov);
    CHECK((post.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-3);
    CHECK((post.cov - ref.cov).cwiseAbs().maxCoeff() < 1e-3);
  }

  SUBCASE("singular block rejected") {
    AugmentedRegressionSet data;
    data.X_tilde = Eigen::MatrixXd::Ones(2, 1);
    data.y = Eigen::VectorXd::Zero(2);
    data.group_index = {0, 0};
    BlockCovariance cov{2, 0.0, 1.0};
    CHECK_THROWS_AS(gls_posterior(data, cov, Eigen::VectorXd::Zero(1),
                                  Eigen::MatrixXd::Identity(1, 1)),
                    SingularCovarianceError);
  }
}

TEST_CASE("tempered i.i.d. linear regression posterior") {
  Rng rng(1234);
  const Eigen::Index d = 2;
  AugmentedRegressionSet data;
  data.X_tilde.resize(6, d);
  data.y.resize(6);
  for (Eigen::Index i = 0; i < 6; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.X_tilde(i, j) = rng.normal();
    data.y(i) = rng.normal();
    data.group_index.push_back(static_cast<std::size_t>(i));
  }
  const Eigen::VectorXd prior_mean = Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd prior_cov = Eigen::MatrixXd::Identity(d, d);

  SUBCASE("duplicating rows B times at T = B recovers the T = 1 posterior") {
    const std::size_t B = 4;
    AugmentedRegressionSet dup;
    dup.X_tilde.resize(6 * static_cast<Eigen::Index>(B), d);
    dup.y.resize(6 * static_cast<Eigen::Index>(B));
    for (Eigen::Index i = 0; i < 6; ++i) {
      for (std::size_t b = 0; b < B; ++b) {
        const auto row = i * static_cast<Eigen::Index>(B) +
                         static_cast<Eigen::Index>(b);
        dup.X_tilde.row(row) = data.X_tilde.row(i);
        dup.y(row) = data.y(i);
        dup.group_index.push_back(static_cast<std::size_t>(i));
      }
    }
    const auto base =
        iid_tempered_linreg_posterior(data, 1.3, 1.0, prior_mean, prior_cov);
    const auto tempered = iid_tempered_linreg_posterior(
        dup, 1.3, static_cast<double>(B), prior_mean, prior_cov);
    CHECK((base.mean - tempered.mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((base.cov - tempered.cov).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("T = 2 halves the likelihood precision") {
    const auto t1 =
        iid_tempered_linreg_posterior(data, 1.0, 1.0, prior_mean, prior_cov);
    const auto t2 =
        iid_tempered_linreg_posterior(data, 1.0, 2.0, prior_mean, prior_cov);
    const Eigen::MatrixXd prior_precision =
        Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd lik1 = t1.cov.inverse() - prior_precision;
    const Eigen::MatrixXd lik2 = t2.cov.inverse() - prior_precision;
    CHECK((lik1 - 2.0 * lik2).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("invalid temperature") {
    CHECK_THROWS_AS(iid_tempered_linreg_posterior(data, 1.0, 0.0, prior_mean,
                                                  prior_cov),
                    std::invalid_argument);
  }
}

TEST_CASE("Gaussian KL divergence") {
  SUBCASE("identical arguments give zero") {
    Eigen::VectorXd mu(2);
    mu << 0.3, -1.0;
    Eigen::MatrixXd cov(2, 2);
    cov << 2.0, 0.5, 0.5, 1.0;
    CHECK(std::abs(kl_gaussians(mu, cov, mu, cov)) < 1e-12);
  }

  SUBCASE("hand-evaluated 1-D case") {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd c1(1, 1), c2(1, 1);
    c1 << 1.0;
    c2 << 2.0;
    const double expected = 0.5 * (std::log(2.0) - 1.0 + 0.5);
    CHECK(close(kl_gaussians(mu, c1, mu, c2), expected, 1e-12));
    CHECK(close(kl_gaussians(mu, c1, mu, c2), 0.09657, 1e-4));
  }

  SUBCASE("asymmetric") {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd c1(1, 1), c2(1, 1);
    c1 << 1.0;
    c2 << 3.0;
    CHECK(kl_gaussians(mu, c1, mu, c2) != kl_gaussians(mu, c2, mu, c1));
  }

  SUBCASE("non-PD covariance rejected") {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd good = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(kl_gaussians(mu, bad, mu, good), SingularCovarianceError);
  }
}

TEST_CASE("KL-optimal temperature") {
  SUBCASE("B = 1 gives T* = 1 with zero KL") {
    CHECK(close(optimal_kl_temperature(1.0, 1.0, 1), 1.0, 1e-12));
    CHECK(std::abs(kl_of_temperature(1.0, 1.0, 1.0, 1)) < 1e-12);
    CHECK(std::abs(kl_residual_mismatch(1.0, 1.0, 1)) < 1e-12);
  }

  SUBCASE("unit variances at B = 2") {
    CHECK(close(optimal_kl_temperature(1.0, 1.0, 2), 4.0 / 3.0, 1e-12));
    CHECK(close(kl_residual_mismatch(1.0, 1.0, 2), 0.5 * std::log(4.0 / 3.0),
                1e-12));
    CHECK(close(kl_residual_mismatch(1.0, 1.0, 2), 0.14384, 1e-4));
  }

  SUBCASE("i.i.d. limit") {
    CHECK(close(optimal_kl_temperature(1.0, 1e8, 4), 1.0, 1e-6));
  }

  SUBCASE("matches the numeric KL minimizer on a randomized grid") {
    Rng rng(66);
    for (int rep = 0; rep < 25; ++rep) {
      const double eps = rng.uniform(0.1, 3.0);
      const double eta = rng.uniform(0.1, 3.0);
      const std::size_t B = 1 + rng.uniform_int(32);
      const double closed = optimal_kl_temperature(eps, eta, B);
      const double numeric = golden_section_kl_min(eps, eta, B);
      CHECK(std::abs(closed - numeric) < 1e-6 * std::max(1.0, closed));
      // The closed-form optimum beats both its neighbours.
      const double at = kl_of_temperature(closed, eps, eta, B);
      CHECK(at <= kl_of_temperature(closed * 1.01, eps, eta, B) + 1e-12);
      CHECK(at <= kl_of_temperature(closed * 0.99, eps, eta, B) + 1e-12);
      // And evaluates to the stated residual mismatch.
      CHECK(rel_err(at, kl_residual_mismatch(eps, eta, B)) < 1e-8);
    }
  }

  SUBCASE("residual mismatch positive iff B >= 2") {
    Rng rng(31);
    for (int rep = 0; rep < 25; ++rep) {
      const double eps = rng.uniform(0.1, 3.0);
      const double eta = rng.uniform(0.1, 3.0);
      CHECK(std::abs(kl_residual_mismatch(eps, eta, 1)) < 1e-12);
      const std::size_t B = 2 + rng.uniform_int(31);
      CHECK(kl_residual_mismatch(eps, eta, B) > 0.0);
    }
  }

  SUBCASE("singular block rejected") {
    CHECK_THROWS_AS(optimal_kl_temperature(1.0, 0.0, 3),
                    SingularCovarianceError);
  }
}

TEST_CASE("logistic latent-variable simulation") {
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(2);

  SUBCASE("perfectly invariant predictor") {
    const auto rep = logistic_latent_sim(
        [](const Eigen::VectorXd&) { return 0.4; },
        augment::additive_gaussian_iso(1.0), x, 4, 500, 3);
    CHECK(std::abs(rep.agreement_rate - 1.0) < 1e-12);
    CHECK(std::abs(rep.latent_error_correlation - 1.0) < 1e-12);
  }

  SUBCASE("B = 1 agrees vacuously") {
    const auto rep = logistic_latent_sim(
        [](const Eigen::VectorXd& v) { return v.sum(); },
        augment::additive_gaussian_iso(1.0), x, 1, 200, 3);
    CHECK(rep.agreement_rate == 1.0);
  }

  SUBCASE("strongly non-invariant predictor decorrelates") {
    // var(delta) = 100 * ||theta||^2 >> logistic variance pi^2/3.
    Eigen::VectorXd theta(2);
    theta << 5.0, 5.0;
    const auto rep = logistic_latent_sim(
        [&](const Eigen::VectorXd& v) { return theta.dot(v); },
        augment::additive_gaussian_iso(4.0), x, 4, 4000, 9);
    CHECK(rep.latent_error_correlation < 0.5);
  }

  SUBCASE("draw floor enforced") {
    CHECK_THROWS_AS(
        logistic_latent_sim([](const Eigen::VectorXd&) { return 0.0; },
                            augment::additive_gaussian_iso(1.0), x, 2, 99, 1),
        std::invalid_argument);
  }
}
