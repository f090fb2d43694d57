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

#include "tempair/sampler.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tempair/errors.hpp"

namespace tempair::sampler {

void SgMcmcConfig::validate() const {
  if (!(alpha0 > 0.0)) throw ConfigError("alpha0 must be positive");
  if (cycle_len == 0) throw ConfigError("cycle_len must be >= 1");
  if (epochs < burn_in) throw ConfigError("epochs must be >= burn_in");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive and finite");
  }
}

double PriorSpec::energy(const Eigen::VectorXd& params) const {
  const double p = static_cast<double>(params.size());
  return 0.5 * params.squaredNorm() / sigma_prior_sq +
         0.5 * p * std::log(2.0 * std::numbers::pi * sigma_prior_sq);
}

Eigen::VectorXd PriorSpec::grad(const Eigen::VectorXd& params) const {
  return params / sigma_prior_sq;
}

GaussianMeanLikelihood::GaussianMeanLikelihood(Eigen::VectorXd observations,
                                               double noise_var)
    : observations_(std::move(observations)), noise_var_(noise_var) {
  if (observations_.size() == 0) {
    throw std::invalid_argument("need at least one observation");
  }
  if (!(noise_var_ > 0.0)) {
    throw std::invalid_argument("noise variance must be positive");
  }
}

double GaussianMeanLikelihood::nll(const Eigen::VectorXd& params,
                                   std::size_t index) const {
  const double r = observations_(static_cast<Eigen::Index>(index)) - params(0);
  return 0.5 * r * r / noise_var_ +
         0.5 * std::log(2.0 * std::numbers::pi * noise_var_);
}

double GaussianMeanLikelihood::add_nll_grad(const Eigen::VectorXd& params,
                                            std::size_t index,
                                            Eigen::VectorXd& acc) const {
  acc(0) +=
      (params(0) - observations_(static_cast<Eigen::Index>(index))) /
      noise_var_;
  return nll(params, index);
}

NetClassificationLikelihood::NetClassificationLikelihood(
    net::NetworkSpec spec, std::vector<augment::LabeledImage> data,
    std::optional<augment::AugmentationBank> bank)
    : spec_(std::move(spec)), data_(std::move(data)), bank_(std::move(bank)) {
  spec_.validate();
  if (data_.empty()) throw std::invalid_argument("dataset must be nonempty");
  begin_epoch(0);
}

void NetClassificationLikelihood::begin_epoch(std::size_t epoch) {
  if (!bank_ && !working_.empty()) return;  // fixed dataset, already built
  working_.clear();
  working_.reserve(data_.size());
  if (bank_) {
    for (auto& row : augment::augment_dataset(data_, *bank_, epoch)) {
      working_.push_back(
          net::ClassifiedExample{net::to_feature_map(row.image), row.label});
    }
  } else {
    for (const auto& row : data_) {
      working_.push_back(
          net::ClassifiedExample{net::to_feature_map(row.image), row.label});
    }
  }
}

double NetClassificationLikelihood::nll(const Eigen::VectorXd& params,
                                        std::size_t index) const {
  const auto& ex = working_.at(index);
  const net::FeatureMap logits = net::forward_prefix(
      spec_, params, ex.x, spec_.layers.size() - 1);
  const double m = logits.data.maxCoeff();
  const double lse = m + std::log((logits.data.array() - m).exp().sum());
  return lse - logits.data(ex.label);
}

double NetClassificationLikelihood::add_nll_grad(const Eigen::VectorXd& params,
                                                 std::size_t index,
                                                 Eigen::VectorXd& acc) const {
  const auto lg = net::loss_and_grad(spec_, params, {working_.at(index)});
  acc += lg.grad;
  return lg.loss;
}

double posterior_energy(const Eigen::VectorXd& params,
                        const DataLikelihood& likelihood,
                        const PriorSpec& prior) {
  if (likelihood.size() == 0) {
    throw std::invalid_argument("dataset must be nonempty");
  }
  double energy = prior.energy(params);
  for (std::size_t i = 0; i < likelihood.size(); ++i) {
    energy += likelihood.nll(params, i);
  }
  return energy;
}

Eigen::VectorXd minibatch_grad(const Eigen::VectorXd& params,
                               const DataLikelihood& likelihood,
                               std::span<const std::size_t> batch,
                               const PriorSpec& prior,
                               std::size_t dataset_scale, double temperature,
                               TemperMode mode, double* batch_nll_sum) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (dataset_scale < batch.size()) {
    throw std::invalid_argument("dataset_scale must be >= batch size");
  }
  Eigen::VectorXd lik_grad = Eigen::VectorXd::Zero(params.size());
  double nll_sum = 0.0;
  for (const std::size_t i : batch) {
    nll_sum += likelihood.add_nll_grad(params, i, lik_grad);
  }
  if (batch_nll_sum) *batch_nll_sum = nll_sum;
  const double n_over_s =
      static_cast<double>(dataset_scale) / static_cast<double>(batch.size());
  if (mode == TemperMode::TemperLikelihood) {
    return (n_over_s / temperature) * lik_grad + prior.grad(params);
  }
  return (n_over_s * lik_grad + prior.grad(params)) / temperature;
}

void sgld_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
               double step_size, const Eigen::VectorXd& noise_scale,
               Rng& rng) {
  if (step_size < 0.0) {
    throw std::invalid_argument("step size must be >= 0");
  }
  const double root = std::sqrt(step_size);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double scale = noise_scale.size() ? noise_scale(i) : 1.0;
    params(i) += -0.5 * step_size * grad(i) + root * scale * rng.normal();
  }
}

double cyclical_step_size(std::size_t epoch, const SgMcmcConfig& config) {
  const double frac = static_cast<double>(epoch % config.cycle_len) /
                      static_cast<double>(config.cycle_len);
  return 0.5 * config.alpha0 * (std::cos(std::numbers::pi * frac) + 1.0);
}

PreconditionerState make_preconditioner_state(
    std::vector<std::pair<std::size_t, std::size_t>> layout) {
  PreconditionerState state;
  state.layout = std::move(layout);
  state.v = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(state.layout.size()));
  return state;
}

PreconditionResult precondition(const Eigen::VectorXd& grad,
                                PreconditionerState& state) {
  constexpr double kEps = 1e-8;
  PreconditionResult out;
  out.grad = grad;
  out.noise_std = Eigen::VectorXd::Ones(grad.size());
  for (std::size_t l = 0; l < state.layout.size(); ++l) {
    const auto [offset, len] = state.layout[l];
    if (len == 0) continue;  // parameterless layer
    if (offset + len > static_cast<std::size_t>(grad.size())) {
      throw std::invalid_argument("preconditioner layout mismatch");
    }
    const auto seg = grad.segment(static_cast<Eigen::Index>(offset),
                                  static_cast<Eigen::Index>(len));
    const double mean_sq = seg.squaredNorm() / static_cast<double>(len);
    double& v = state.v(static_cast<Eigen::Index>(l));
    v = state.initialized ? 0.99 * v + 0.01 * mean_sq : mean_sq;
    const double drift_scale = 1.0 / (std::sqrt(v) + kEps);
    const double noise_scale = 1.0 / std::sqrt(std::sqrt(v) + kEps);
    out.grad.segment(static_cast<Eigen::Index>(offset),
                     static_cast<Eigen::Index>(len)) = drift_scale * seg;
    out.noise_std
        .segment(static_cast<Eigen::Index>(offset),
                 static_cast<Eigen::Index>(len))
        .setConstant(noise_scale);
  }
  state.initialized = true;
  return out;
}

Chain run_chain(DataLikelihood& likelihood, const PriorSpec& prior,
                const SgMcmcConfig& config, const Eigen::VectorXd& init,
                const std::vector<std::pair<std::size_t, std::size_t>>*
                    precondition_layout) {
  config.validate();
  if (static_cast<std::size_t>(init.size()) != likelihood.param_dim()) {
    throw ConfigError("initial parameter vector has dimension " +
                      std::to_string(init.size()) + ", expected " +
                      std::to_string(likelihood.param_dim()));
  }

  Rng rng(config.seed);
  Eigen::VectorXd params = init;
  Eigen::VectorXd unit_noise;  // empty means unit scale

  PreconditionerState pstate = make_preconditioner_state(
      precondition_layout
          ? *precondition_layout
          : std::vector<std::pair<std::size_t, std::size_t>>{
                {0, likelihood.param_dim()}});

  Chain chain;
  chain.trace.reserve(config.epochs);
  std::vector<std::size_t> order;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    likelihood.begin_epoch(epoch);
    const std::size_t n = likelihood.size();
    if (n == 0) throw ConfigError("likelihood produced an empty epoch");
    if (config.dataset_scale < n) {
      throw ConfigError("dataset_scale " +
                        std::to_string(config.dataset_scale) +
                        " smaller than the working set " + std::to_string(n));
    }

    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    const double alpha = cyclical_step_size(epoch, config);
    const double step = config.mode == TemperMode::TemperLikelihood
                            ? config.temperature * alpha
                            : alpha;

    double energy_acc = 0.0;
    double grad_norm_acc = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      const std::span<const std::size_t> batch(order.data() + start, len);

      double batch_nll = 0.0;
      const Eigen::VectorXd grad =
          minibatch_grad(params, likelihood, batch, prior,
                         config.dataset_scale, config.temperature,
                         config.mode, &batch_nll);

      energy_acc += batch_nll * static_cast<double>(config.dataset_scale) /
                        static_cast<double>(len) +
                    prior.energy(params);
      grad_norm_acc += grad.norm();
      ++batches;

      if (config.precondition) {
        const auto pre = precondition(grad, pstate);
        sgld_step(params, pre.grad, step, pre.noise_std, rng);
      } else {
        sgld_step(params, grad, step, unit_noise, rng);
      }
    }

    chain.trace.push_back(TraceRow{
        epoch, step, energy_acc / static_cast<double>(batches),
        grad_norm_acc / static_cast<double>(batches)});

    const bool cycle_end = (epoch + 1) % config.cycle_len == 0;
    if (cycle_end && epoch >= config.burn_in) {
      chain.samples.push_back(params);
      chain.sample_epochs.push_back(epoch);
    }
  }
  return chain;
}

Eigen::VectorXd bma_predict(const Chain& chain, const net::NetworkSpec& spec,
                            const net::FeatureMap& x) {
  if (chain.samples.empty()) {
    throw EmptyChainError("chain holds no samples");
  }
  Eigen::VectorXd acc;
  for (const auto& sample : chain.samples) {
    const Eigen::VectorXd p = net::forward(spec, sample, x);
    if (acc.size() == 0) {
      acc = p;
    } else {
      acc += p;
    }
  }
  return acc / static_cast<double>(chain.samples.size());
}

}  // namespace tempair::sampler
