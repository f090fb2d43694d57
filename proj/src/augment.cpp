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

#include "tempair/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tempair/group.hpp"
#include "tempair/rng.hpp"

namespace tempair::augment {

namespace {

// Factor A with A A^T = Sigma for a symmetric PSD Sigma; tolerates the
// slightly negative eigenvalues allowed by the type invariant.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) {
    throw std::invalid_argument("covariance eigendecomposition failed");
  }
  const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
  const double tol = 1e-10 * std::max(scale, 1.0);
  Eigen::VectorXd lambda = es.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -tol) {
      throw std::invalid_argument(
          "augmentation covariance is not positive semidefinite");
    }
    lambda(i) = std::max(lambda(i), 0.0);
  }
  return es.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

void check_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() ||
      (m - m.transpose()).cwiseAbs().maxCoeff() >
          1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("augmentation covariance must be symmetric");
  }
}

Eigen::VectorXd sample_noise(const AdditiveGaussian& spec, Eigen::Index dim,
                             Rng& rng) {
  if (spec.sigma_eta.rows() == 1 && spec.sigma_eta.cols() == 1) {
    const double sd = std::sqrt(spec.sigma_eta(0, 0));
    Eigen::VectorXd eta(dim);
    for (Eigen::Index i = 0; i < dim; ++i) eta(i) = sd * rng.normal();
    return eta;
  }
  if (spec.sigma_eta.rows() != dim) {
    throw std::invalid_argument(
        "covariance dimension " + std::to_string(spec.sigma_eta.rows()) +
        " does not match input dimension " + std::to_string(dim));
  }
  const Eigen::MatrixXd factor = psd_factor(spec.sigma_eta);
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z(i) = rng.normal();
  return factor * z;
}

ImageTensor transform_by_element(net::GroupElement g, const ImageTensor& x) {
  x.require_square();
  ImageTensor out(x.channels, x.height, x.width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t r = 0; r < x.height; ++r) {
      for (std::size_t w = 0; w < x.width; ++w) {
        const auto [sr, sc] = net::source_coords(g, r, w, x.height);
        out.at(c, r, w) = x.at(c, sr, sc);
      }
    }
  }
  return out;
}

ImageTensor rotate_bilinear(const ImageTensor& x, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cy = 0.5 * static_cast<double>(x.height - 1);
  const double cx = 0.5 * static_cast<double>(x.width - 1);

  ImageTensor out(x.channels, x.height, x.width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t r = 0; r < x.height; ++r) {
      for (std::size_t w = 0; w < x.width; ++w) {
        const double dy = static_cast<double>(r) - cy;
        const double dx = static_cast<double>(w) - cx;
        const double sy = cy + cos_t * dy - sin_t * dx;
        const double sx = cx + sin_t * dy + cos_t * dx;
        const double fy = std::floor(sy);
        const double fx = std::floor(sx);
        const double wy = sy - fy;
        const double wx = sx - fx;

        double acc = 0.0;
        for (int oy = 0; oy <= 1; ++oy) {
          for (int ox = 0; ox <= 1; ++ox) {
            const double py = fy + oy;
            const double px = fx + ox;
            if (py < 0 || px < 0 || py >= static_cast<double>(x.height) ||
                px >= static_cast<double>(x.width)) {
              continue;  // zero fill
            }
            const double weight = (oy ? wy : 1.0 - wy) * (ox ? wx : 1.0 - wx);
            acc += weight * x.at(c, static_cast<std::size_t>(py),
                                 static_cast<std::size_t>(px));
          }
        }
        out.at(c, r, w) = acc;
      }
    }
  }
  return out;
}

ImageTensor pad_then_crop(const ImageTensor& x, std::size_t pad, Rng& rng) {
  const std::size_t oy = rng.uniform_int(2 * pad + 1);
  const std::size_t ox = rng.uniform_int(2 * pad + 1);
  ImageTensor out(x.channels, x.height, x.width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t r = 0; r < x.height; ++r) {
      for (std::size_t w = 0; w < x.width; ++w) {
        // Window position (r, w) in the padded image is (r + oy, w + ox);
        // source pixel is that minus pad, zero when outside.
        const long long sr = static_cast<long long>(r + oy) -
                             static_cast<long long>(pad);
        const long long sc = static_cast<long long>(w + ox) -
                             static_cast<long long>(pad);
        if (sr < 0 || sc < 0 || sr >= static_cast<long long>(x.height) ||
            sc >= static_cast<long long>(x.width)) {
          out.at(c, r, w) = 0.0;
        } else {
          out.at(c, r, w) = x.at(c, static_cast<std::size_t>(sr),
                                 static_cast<std::size_t>(sc));
        }
      }
    }
  }
  return out;
}

}  // namespace

void validate_spec(const AugmentationSpec& spec) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian>) {
          check_symmetric(s.sigma_eta);
          psd_factor(s.sigma_eta);  // throws when not PSD
        } else if constexpr (std::is_same_v<T, SmallRotation>) {
          if (!(s.max_degrees > 0.0) || s.max_degrees > 45.0) {
            throw std::invalid_argument("max_degrees must be in (0, 45]");
          }
        } else if constexpr (std::is_same_v<T, Crop>) {
          if (s.pad_pixels < 1) {
            throw std::invalid_argument("pad_pixels must be >= 1");
          }
        } else if constexpr (std::is_same_v<T, Composition>) {
          if (s.steps.empty()) {
            throw std::invalid_argument("composition must be nonempty");
          }
          for (const auto& step : s.steps) validate_spec(step);
        }
      },
      spec);
}

ImageTensor apply(const AugmentationSpec& spec, const ImageTensor& x,
                  std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> ImageTensor {
        using T = std::decay_t<decltype(s)>;
        Rng rng(seed);
        if constexpr (std::is_same_v<T, AdditiveGaussian>) {
          ImageTensor out = x;
          out.data += sample_noise(s, x.data.size(), rng);
          return out;
        } else if constexpr (std::is_same_v<T, Rot90Flip>) {
          const auto idx = rng.uniform_int(8);
          return transform_by_element(net::group_element(net::Group::P4M, idx),
                                      x);
        } else if constexpr (std::is_same_v<T, SmallRotation>) {
          const double angle = rng.uniform(-s.max_degrees, s.max_degrees);
          return rotate_bilinear(x, angle);
        } else if constexpr (std::is_same_v<T, Crop>) {
          return pad_then_crop(x, s.pad_pixels, rng);
        } else {
          static_assert(std::is_same_v<T, Composition>);
          ImageTensor out = x;
          for (std::size_t i = 0; i < s.steps.size(); ++i) {
            out = apply(s.steps[i], out, derive_seed(seed, i + 1));
          }
          return out;
        }
      },
      spec);
}

Eigen::VectorXd apply(const AugmentationSpec& spec, const Eigen::VectorXd& x,
                      std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AdditiveGaussian>) {
          Rng rng(seed);
          return x + sample_noise(s, x.size(), rng);
        } else if constexpr (std::is_same_v<T, Composition>) {
          Eigen::VectorXd out = x;
          for (std::size_t i = 0; i < s.steps.size(); ++i) {
            out = apply(s.steps[i], out, derive_seed(seed, i + 1));
          }
          return out;
        } else {
          throw std::invalid_argument(
              "geometric augmentations apply to images, not vectors");
        }
      },
      spec);
}

AugmentationBank make_bank(const AugmentationSpec& spec, std::size_t B,
                           std::uint64_t master_seed) {
  if (B == 0) throw std::invalid_argument("bank size B must be >= 1");
  validate_spec(spec);
  AugmentationBank bank;
  bank.spec = spec;
  bank.B = B;
  bank.seeds.resize(B);
  std::uint64_t state = master_seed;
  for (std::size_t b = 0; b < B; ++b) {
    bank.seeds[b] = splitmix64_next(state);
  }
  return bank;
}

std::vector<AugmentedImage> augment_dataset(
    const std::vector<LabeledImage>& data, const AugmentationBank& bank,
    std::size_t epoch) {
  const std::uint64_t epoch_seed = bank.seed_for_epoch(epoch);
  std::vector<AugmentedImage> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    AugmentedImage row;
    row.image = apply(bank.spec, data[i].image, derive_seed(epoch_seed, i));
    row.label = data[i].label;
    row.source = i;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<AugmentedImage> expand_full_bank(
    const std::vector<LabeledImage>& data, const AugmentationBank& bank) {
  std::vector<AugmentedImage> out;
  out.reserve(data.size() * bank.B);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t b = 0; b < bank.B; ++b) {
      AugmentedImage row;
      row.image =
          apply(bank.spec, data[i].image, derive_seed(bank.seeds[b], i));
      row.label = data[i].label;
      row.source = i;
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace tempair::augment
