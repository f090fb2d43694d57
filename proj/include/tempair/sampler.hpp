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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "tempair/augment.hpp"
#include "tempair/net.hpp"
#include "tempair/rng.hpp"

namespace tempair::sampler {

enum class TemperMode { TemperPosterior, TemperLikelihood };

struct SgMcmcConfig {
  double alpha0 = 0.1;          // base step size at T = 1
  std::size_t cycle_len = 50;   // epochs per cycle
  std::size_t burn_in = 0;      // epochs before sampling starts
  std::size_t epochs = 0;
  std::size_t batch_size = 1;
  double temperature = 1.0;
  TemperMode mode = TemperMode::TemperLikelihood;
  std::size_t dataset_scale = 0;  // N in the energy estimator (Bn or n)
  bool precondition = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct TraceRow {
  std::size_t epoch = 0;
  double step_size = 0.0;
  double energy_estimate = 0.0;
  double grad_norm = 0.0;
};

struct Chain {
  std::vector<Eigen::VectorXd> samples;
  std::vector<std::size_t> sample_epochs;
  std::vector<TraceRow> trace;
};

// Zero-mean isotropic Gaussian prior over the flat parameter vector.
// energy includes the (p/2) log(2 pi sigma^2) normalization constant, so
// energy differences between parameter values reduce to the quadratic term.
struct PriorSpec {
  double sigma_prior_sq = 1.0;

  double energy(const Eigen::VectorXd& params) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& params) const;
};

// Per-datum negative log-likelihood interface consumed by the sampler. The
// epoch hook lets augmented streams regenerate their working set.
// add_nll_grad accumulates the parameter gradient and returns the datum's
// NLL, so one pass serves both the update and the energy trace.
class DataLikelihood {
 public:
  virtual ~DataLikelihood() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t param_dim() const = 0;
  virtual double nll(const Eigen::VectorXd& params, std::size_t index) const = 0;
  virtual double add_nll_grad(const Eigen::VectorXd& params, std::size_t index,
                              Eigen::VectorXd& acc) const = 0;
  virtual void begin_epoch(std::size_t /*epoch*/) {}
};

// Scalar Gaussian mean estimation: entries treated i.i.d. N(mu, noise_var);
// the 1-parameter embedding of the conjugate model.
class GaussianMeanLikelihood final : public DataLikelihood {
 public:
  GaussianMeanLikelihood(Eigen::VectorXd observations, double noise_var);

  std::size_t size() const override {
    return static_cast<std::size_t>(observations_.size());
  }
  std::size_t param_dim() const override { return 1; }
  double nll(const Eigen::VectorXd& params, std::size_t index) const override;
  double add_nll_grad(const Eigen::VectorXd& params, std::size_t index,
                      Eigen::VectorXd& acc) const override;

 private:
  Eigen::VectorXd observations_;
  double noise_var_;
};

// Classification likelihood of a micro-network over a fixed or augmented
// dataset; with a bank, each epoch replays bank entry (epoch mod B).
class NetClassificationLikelihood final : public DataLikelihood {
 public:
  NetClassificationLikelihood(net::NetworkSpec spec,
                              std::vector<augment::LabeledImage> data,
                              std::optional<augment::AugmentationBank> bank);

  std::size_t size() const override { return working_.size(); }
  std::size_t param_dim() const override { return spec_.param_count(); }
  double nll(const Eigen::VectorXd& params, std::size_t index) const override;
  double add_nll_grad(const Eigen::VectorXd& params, std::size_t index,
                      Eigen::VectorXd& acc) const override;
  void begin_epoch(std::size_t epoch) override;

  const net::NetworkSpec& spec() const { return spec_; }

 private:
  net::NetworkSpec spec_;
  std::vector<augment::LabeledImage> data_;
  std::optional<augment::AugmentationBank> bank_;
  std::vector<net::ClassifiedExample> working_;
};

// Full-dataset posterior energy -log p(theta | data) up to its additive
// constant: sum of per-datum NLLs plus the prior energy.
double posterior_energy(const Eigen::VectorXd& params,
                        const DataLikelihood& likelihood,
                        const PriorSpec& prior);

// Minibatch gradient estimate of the (tempered) posterior energy.
// TemperLikelihood: (N / (T |S|)) sum grad nll + grad prior;
// TemperPosterior: (1/T) [(N / |S|) sum grad nll + grad prior].
Eigen::VectorXd minibatch_grad(const Eigen::VectorXd& params,
                               const DataLikelihood& likelihood,
                               std::span<const std::size_t> batch,
                               const PriorSpec& prior,
                               std::size_t dataset_scale, double temperature,
                               TemperMode mode,
                               double* batch_nll_sum = nullptr);

// theta <- theta - (alpha/2) grad + sqrt(alpha) * noise_scale . xi.
// noise_scale may be empty (unit) or per-coordinate.
void sgld_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               double step_size, const Eigen::VectorXd& noise_scale, Rng& rng);

// alpha_t = (alpha0 / 2) (cos(pi (t mod C) / C) + 1).
double cyclical_step_size(std::size_t epoch, const SgMcmcConfig& config);

// Layer-wise RMS preconditioner state: one running mean of grad^2 per layer.
struct PreconditionerState {
  std::vector<std::pair<std::size_t, std::size_t>> layout;
  Eigen::VectorXd v;  // one entry per layer
  bool initialized = false;
};

PreconditionerState make_preconditioner_state(
    std::vector<std::pair<std::size_t, std::size_t>> layout);

struct PreconditionResult {
  Eigen::VectorXd grad;       // drift-scaled gradient
  Eigen::VectorXd noise_std;  // per-coordinate noise multiplier
};

// Scales drift by 1/(sqrt(v)+eps) and noise std by 1/sqrt(sqrt(v)+eps),
// layer-uniform, preserving the Langevin drift/noise relation.
PreconditionResult precondition(const Eigen::VectorXd& grad,
                                PreconditionerState& state);

// Runs epochs of shuffled minibatches of SGLD updates; retains one sample at
// the end of each completed post-burn-in cycle. Deterministic in the seed.
Chain run_chain(DataLikelihood& likelihood, const PriorSpec& prior,
                const SgMcmcConfig& config, const Eigen::VectorXd& init,
                const std::vector<std::pair<std::size_t, std::size_t>>*
                    precondition_layout = nullptr);

// Bayesian model average over the chain's samples.
Eigen::VectorXd bma_predict(const Chain& chain, const net::NetworkSpec& spec,
                            const net::FeatureMap& x);

}  // namespace tempair::sampler
