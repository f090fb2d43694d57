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

#include "tempair/diagnostics.hpp"

#include <doctest.h>

#include <cmath>

#include "tempair/conjugate.hpp"
#include "tempair/errors.hpp"
#include "tempair/rng.hpp"
#include "test_support.hpp"

using namespace tempair;
using namespace tempair::diagnostics;
using tempair::testing::close;

namespace {

GroupedResiduals iid_normal_groups(std::size_t k, std::size_t B,
                                   std::uint64_t seed) {
  Rng rng(seed);
  GroupedResiduals out;
  out.groups.reserve(k);
  for (std::size_t g = 0; g < k; ++g) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(B));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
    out.groups.emplace_back(g, std::move(v));
  }
  return out;
}

}  // namespace

TEST_CASE("residual series for regression predictors") {
  linreg::LinearAugModel model;
  model.theta_star = Eigen::VectorXd(2);
  model.theta_star << 1.0, -1.0;
  model.sigma_eps_sq = 1.0;
  model.sigma_eta = Eigen::MatrixXd(2, 2);
  model.sigma_eta << 0.5, 0.5, 0.5, 0.5;  // augmentations along (1, 1)
  model.prior_mean = Eigen::VectorXd::Zero(2);
  model.prior_cov = Eigen::MatrixXd::Identity(2, 2);

  const auto data = linreg::simulate_augmented_regression(model, 6, 4, 13);

  SUBCASE("perfect predictor leaves zero residuals") {
    // The invariant true model: theta* is orthogonal to the augmentation
    // subspace, so y - theta*'x_tilde equals the source noise, and a
    // predictor that adds that noise back per group is exact. Instead use
    // noiseless responses.
    auto noiseless = model;
    noiseless.sigma_eps_sq = 1e-18;
    const auto clean =
        linreg::simulate_augmented_regression(noiseless, 5, 3, 17);
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        clean);
    for (const auto& [src, values] : res.groups) {
      CHECK(values.cwiseAbs().maxCoeff() < 1e-8);
    }
  }

  SUBCASE("invariant predictor gives identical residuals within groups") {
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        data);
    REQUIRE(res.groups.size() == 6);
    for (const auto& [src, values] : res.groups) {
      REQUIRE(values.size() == 4);
      for (Eigen::Index i = 1; i < values.size(); ++i) {
        CHECK(std::abs(values(i) - values(0)) < 1e-10);
      }
    }
  }

  SUBCASE("constant predictor on constant labels is constant") {
    linreg::AugmentedRegressionSet flat;
    flat.X_tilde = Eigen::MatrixXd::Random(6, 2);
    flat.y = Eigen::VectorXd::Constant(6, 2.0);
    flat.group_index = {0, 0, 1, 1, 2, 2};
    const auto res = residual_series(
        [](const Eigen::VectorXd&) { return 0.5; }, flat);
    for (const auto& [src, values] : res.groups) {
      CHECK((values.array() - 1.5).abs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("intraclass correlation") {
  SUBCASE("constant within, varying between gives one") {
    GroupedResiduals res;
    res.groups.emplace_back(0, Eigen::VectorXd::Constant(3, 1.0));
    res.groups.emplace_back(1, Eigen::VectorXd::Constant(3, -1.0));
    res.groups.emplace_back(2, Eigen::VectorXd::Constant(3, 0.5));
    CHECK(close(intraclass_correlation(res), 1.0, 1e-12));
  }

  SUBCASE("independent residuals give near-zero ICC") {
    const auto res = iid_normal_groups(2000, 5, 77);
    CHECK(std::abs(intraclass_correlation(res)) <= 0.1);
  }

  SUBCASE("perfectly correlated regression residuals give ICC ~ 1") {
    linreg::LinearAugModel model;
    model.theta_star = Eigen::VectorXd(2);
    model.theta_star << 0.7, 0.3;
    model.sigma_eps_sq = 1.0;
    model.sigma_eta = Eigen::MatrixXd::Zero(2, 2);  // var(delta) = 0
    model.prior_mean = Eigen::VectorXd::Zero(2);
    model.prior_cov = Eigen::MatrixXd::Identity(2, 2);
    const auto data = linreg::simulate_augmented_regression(model, 50, 4, 3);
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        data);
    CHECK(intraclass_correlation(res) >= 0.99);
  }

  SUBCASE("unbalanced groups rejected") {
    GroupedResiduals res;
    res.groups.emplace_back(0, Eigen::VectorXd::Constant(3, 1.0));
    res.groups.emplace_back(1, Eigen::VectorXd::Constant(2, 1.0));
    CHECK_THROWS_AS(intraclass_correlation(res), std::invalid_argument);
  }

  SUBCASE("needs at least two groups of two") {
    GroupedResiduals res;
    res.groups.emplace_back(0, Eigen::VectorXd::Constant(3, 1.0));
    CHECK_THROWS_AS(intraclass_correlation(res), std::invalid_argument);
  }
}

TEST_CASE("empirical error correlation") {
  SUBCASE("simulated linear model approaches the A.4 closed form") {
    linreg::LinearAugModel model;
    model.theta_star = Eigen::VectorXd(1);
    model.theta_star << 1.0;
    model.sigma_eps_sq = 1.0;
    model.sigma_eta = Eigen::MatrixXd(1, 1);
    model.sigma_eta << 3.0;  // theta' Sigma theta = 3 -> correlation 0.25
    model.prior_mean = Eigen::VectorXd::Zero(1);
    model.prior_cov = Eigen::MatrixXd::Identity(1, 1);

    const std::size_t groups = 10000;
    const auto data =
        linreg::simulate_augmented_regression(model, groups, 2, 29);
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        data);
    const double r = empirical_error_correlation(res);
    const double se = (1.0 - 0.25 * 0.25) / std::sqrt(
        static_cast<double>(groups));
    CHECK(std::abs(r - 0.25) < 3.0 * se);
  }

  SUBCASE("invariant case returns essentially one") {
    linreg::LinearAugModel model;
    model.theta_star = Eigen::VectorXd(2);
    model.theta_star << 1.0, -1.0;
    model.sigma_eps_sq = 1.0;
    model.sigma_eta = Eigen::MatrixXd(2, 2);
    model.sigma_eta << 1.0, 1.0, 1.0, 1.0;
    model.prior_mean = Eigen::VectorXd::Zero(2);
    model.prior_cov = Eigen::MatrixXd::Identity(2, 2);
    const auto data =
        linreg::simulate_augmented_regression(model, 200, 3, 31);
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        data);
    CHECK(empirical_error_correlation(res) >= 0.999);
  }

  SUBCASE("independent residuals decorrelate") {
    const auto res = iid_normal_groups(10000, 3, 41);
    CHECK(std::abs(empirical_error_correlation(res)) <= 0.05);
  }
}

TEST_CASE("ICC and empirical correlation agree in rank order") {
  // Ladder of invariance gaps: larger var(delta) must lower both measures.
  std::vector<double> icc_values;
  std::vector<double> corr_values;
  for (const double eta_var : {0.0, 0.3, 1.0, 3.0, 10.0}) {
    linreg::LinearAugModel model;
    model.theta_star = Eigen::VectorXd(1);
    model.theta_star << 1.0;
    model.sigma_eps_sq = 1.0;
    model.sigma_eta = Eigen::MatrixXd(1, 1);
    model.sigma_eta << eta_var;
    model.prior_mean = Eigen::VectorXd::Zero(1);
    model.prior_cov = Eigen::MatrixXd::Identity(1, 1);
    const auto data =
        linreg::simulate_augmented_regression(model, 4000, 3, 101);
    const auto res = residual_series(
        [&](const Eigen::VectorXd& x) { return model.theta_star.dot(x); },
        data);
    icc_values.push_back(intraclass_correlation(res));
    corr_values.push_back(empirical_error_correlation(res));
  }
  for (std::size_t i = 1; i < icc_values.size(); ++i) {
    CHECK(icc_values[i] < icc_values[i - 1]);
    CHECK(corr_values[i] < corr_values[i - 1]);
    CHECK(icc_values[i] > 0.0);
    CHECK(corr_values[i] > 0.0);
  }
}

TEST_CASE("effective sample size") {
  CHECK(effective_sample_size(150, 150.0) == 1.0);
  CHECK(effective_sample_size(150, 1.0) == 150.0);

  conjugate::GaussianMeanModel model{0.0, 1.0, 1.0, 1.0};
  const double t_star = conjugate::optimal_temperature(model, 4);
  CHECK(close(effective_sample_size(4, t_star), 1.6, 1e-12));

  CHECK_THROWS_AS(effective_sample_size(4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(effective_sample_size(0, 1.0), std::invalid_argument);

  // ESS lies in [1, B] exactly when T lies in [1, B].
  for (const double t : {1.0, 2.0, 7.5, 16.0}) {
    const double ess = effective_sample_size(16, t);
    CHECK(ess >= 1.0);
    CHECK(ess <= 16.0);
  }
  CHECK(effective_sample_size(16, 0.5) > 16.0);
  CHECK(effective_sample_size(16, 32.0) < 1.0);
}

TEST_CASE("chain total variation series") {
  const auto bank = augment::make_bank(augment::Rot90Flip{}, 4, 19);
  Rng rng(23);
  std::vector<ImageTensor> probe;
  for (int i = 0; i < 3; ++i) {
    ImageTensor img(1, 8, 8);
    for (Eigen::Index j = 0; j < img.data.size(); ++j) {
      img.data(j) = rng.normal();
    }
    probe.push_back(std::move(img));
  }

  net::NetworkSpec stride1;
  stride1.input = net::TensorShape{1, 1, 8, 8};
  stride1.layers = {net::GConvLift{1, 2, 3, net::Group::P4M, 1,
                                   net::Padding::Circular},
                    net::ReLU{}, net::GroupSpatialGAP{}, net::Dense{2, 2},
                    net::Softmax{}};
  net::NetworkSpec stride2 = stride1;
  stride2.layers[0] = net::GConvLift{1, 2, 3, net::Group::P4M, 2,
                                     net::Padding::Circular};

  sampler::Chain chain1, chain2;
  for (const std::uint64_t seed : {100, 200}) {
    chain1.samples.push_back(net::init_params(stride1, seed));
    chain2.samples.push_back(net::init_params(stride2, seed));
  }

  SUBCASE("invariant network stays at machine-level total variation") {
    const auto series = chain_total_variation(chain1, stride1, probe, bank);
    REQUIRE(series.size() == chain1.samples.size());
    for (const double tv : series) CHECK(tv <= 1e-6);
  }

  SUBCASE("strided variant sits strictly above on matched seeds") {
    const auto inv = chain_total_variation(chain1, stride1, probe, bank);
    const auto strided = chain_total_variation(chain2, stride2, probe, bank);
    REQUIRE(inv.size() == strided.size());
    for (std::size_t i = 0; i < inv.size(); ++i) {
      CHECK(strided[i] > inv[i]);
    }
  }

  SUBCASE("empty chain rejected") {
    sampler::Chain empty;
    CHECK_THROWS_AS(chain_total_variation(empty, stride1, probe, bank),
                    EmptyChainError);
  }
}
