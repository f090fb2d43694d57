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

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "tempair/errors.hpp"

namespace tempair::diagnostics {

void GroupedResiduals::validate() const {
  if (groups.empty()) throw std::invalid_argument("no residual groups");
  for (const auto& [source, values] : groups) {
    if (values.size() == 0) {
      throw std::invalid_argument("group " + std::to_string(source) +
                                  " is empty");
    }
    if (!values.allFinite()) {
      throw std::invalid_argument("group " + std::to_string(source) +
                                  " has non-finite residuals");
    }
  }
}

std::size_t GroupedResiduals::balanced_size() const {
  validate();
  const std::size_t B = static_cast<std::size_t>(groups.front().second.size());
  for (const auto& [source, values] : groups) {
    if (static_cast<std::size_t>(values.size()) != B) {
      throw std::invalid_argument(
          "unbalanced design: group " + std::to_string(source) + " has " +
          std::to_string(values.size()) + " residuals, expected " +
          std::to_string(B));
    }
  }
  return B;
}

GroupedResiduals residual_series(
    const std::function<double(const Eigen::VectorXd&)>& predictor,
    const linreg::AugmentedRegressionSet& data) {
  data.validate();
  std::map<std::size_t, std::vector<double>> by_group;
  for (Eigen::Index i = 0; i < data.X_tilde.rows(); ++i) {
    by_group[data.group_index[i]].push_back(
        data.y(i) - predictor(data.X_tilde.row(i).transpose()));
  }
  GroupedResiduals out;
  out.groups.reserve(by_group.size());
  for (const auto& [source, values] : by_group) {
    out.groups.emplace_back(
        source, Eigen::Map<const Eigen::VectorXd>(
                    values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

GroupedResiduals residual_series(
    const net::NetworkSpec& spec, const net::ParamVector& params,
    const std::vector<augment::AugmentedImage>& data) {
  if (data.empty()) throw std::invalid_argument("no data rows");
  std::map<std::size_t, std::vector<double>> by_group;
  for (const auto& row : data) {
    const Eigen::VectorXd p =
        net::forward(spec, params, net::to_feature_map(row.image));
    if (row.label < 0 || row.label >= p.size()) {
      throw std::invalid_argument("label out of range");
    }
    by_group[row.source].push_back(1.0 - p(row.label));
  }
  GroupedResiduals out;
  out.groups.reserve(by_group.size());
  for (const auto& [source, values] : by_group) {
    out.groups.emplace_back(
        source, Eigen::Map<const Eigen::VectorXd>(
                    values.data(), static_cast<Eigen::Index>(values.size())));
  }
  return out;
}

double intraclass_correlation(const GroupedResiduals& residuals) {
  const std::size_t B = residuals.balanced_size();
  const std::size_t k = residuals.groups.size();
  if (k < 2 || B < 2) {
    throw std::invalid_argument(
        "ICC needs at least 2 groups of at least 2 residuals");
  }

  double grand = 0.0;
  for (const auto& [source, values] : residuals.groups) grand += values.sum();
  grand /= static_cast<double>(k * B);

  double ss_between = 0.0;
  double ss_within = 0.0;
  for (const auto& [source, values] : residuals.groups) {
    const double gm = values.mean();
    ss_between += (gm - grand) * (gm - grand);
    ss_within += (values.array() - gm).square().sum();
  }
  const double ms_between = static_cast<double>(B) * ss_between /
                            static_cast<double>(k - 1);
  const double ms_within =
      ss_within / static_cast<double>(k * (B - 1));
  const double denom =
      ms_between + static_cast<double>(B - 1) * ms_within;
  if (denom == 0.0) return 0.0;  // all residuals identical everywhere
  return (ms_between - ms_within) / denom;
}

double empirical_error_correlation(const GroupedResiduals& residuals) {
  const std::size_t B = residuals.balanced_size();
  if (B < 2) {
    throw std::invalid_argument("need at least 2 augmentations per group");
  }
  double s1 = 0.0, s11 = 0.0, s12 = 0.0;
  std::size_t count = 0;
  for (const auto& [source, values] : residuals.groups) {
    for (std::size_t a = 0; a < B; ++a) {
      for (std::size_t b = 0; b < B; ++b) {
        if (a == b) continue;
        // Both orders enter, so the pooled marginals coincide.
        s1 += values(static_cast<Eigen::Index>(a));
        s11 += values(static_cast<Eigen::Index>(a)) *
               values(static_cast<Eigen::Index>(a));
        s12 += values(static_cast<Eigen::Index>(a)) *
               values(static_cast<Eigen::Index>(b));
        ++count;
      }
    }
  }
  const double n = static_cast<double>(count);
  const double mean = s1 / n;
  const double var = s11 / n - mean * mean;
  if (var <= 0.0) return 1.0;  // degenerate: all pooled residuals equal
  return (s12 / n - mean * mean) / var;
}

double effective_sample_size(std::size_t B, double temperature) {
  if (B == 0) throw std::invalid_argument("B must be >= 1");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("temperature must be positive");
  }
  return static_cast<double>(B) / temperature;
}

std::vector<double> chain_total_variation(
    const sampler::Chain& chain, const net::NetworkSpec& spec,
    const std::vector<ImageTensor>& probe,
    const augment::AugmentationBank& bank) {
  if (chain.samples.empty()) throw EmptyChainError("chain holds no samples");
  if (probe.empty()) throw std::invalid_argument("probe set is empty");
  if (bank.B < 2) {
    throw std::invalid_argument("bank must hold at least 2 augmentations");
  }
  std::vector<double> series;
  series.reserve(chain.samples.size());
  for (const auto& sample : chain.samples) {
    double acc = 0.0;
    for (const auto& x : probe) {
      acc += net::total_variation_invariance(spec, sample, x, bank);
    }
    series.push_back(acc / static_cast<double>(probe.size()));
  }
  return series;
}

}  // namespace tempair::diagnostics
