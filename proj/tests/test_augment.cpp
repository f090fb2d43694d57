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

#include <doctest.h>

#include <cmath>
#include <map>

#include "tempair/net.hpp"
#include "tempair/rng.hpp"

using namespace tempair;
using namespace tempair::augment;

namespace {

ImageTensor random_image(std::size_t c, std::size_t h, std::size_t w,
                         std::uint64_t seed) {
  Rng rng(seed);
  ImageTensor img(c, h, w);
  for (Eigen::Index i = 0; i < img.data.size(); ++i) {
    img.data(i) = rng.normal();
  }
  return img;
}

}  // namespace

TEST_CASE("rot90-flip transforms") {
  const ImageTensor img = random_image(2, 6, 6, 1);

  SUBCASE("some seed draws the identity element") {
    bool found = false;
    for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
      const auto out = apply(Rot90Flip{}, img, seed);
      found = out.data == img.data;
    }
    CHECK(found);
  }

  SUBCASE("transform then group inverse restores the image bit-exactly") {
    // Exercised through the reference group action used by the net module.
    const auto map = net::to_feature_map(img);
    for (std::size_t i = 0; i < 8; ++i) {
      const auto g = net::group_element(net::Group::P4M, i);
      const auto acted = net::group_act_on_feature_map(g, map);
      const auto restored =
          net::group_act_on_feature_map(net::inverse(g), acted);
      CHECK(restored.data == map.data);
    }
  }

  SUBCASE("90-degree rotation applied twice equals the 180-degree element") {
    const auto map = net::to_feature_map(img);
    const net::GroupElement rot90{1, false};
    const net::GroupElement rot180{2, false};
    const auto twice = net::group_act_on_feature_map(
        rot90, net::group_act_on_feature_map(rot90, map));
    const auto once = net::group_act_on_feature_map(rot180, map);
    CHECK(twice.data == once.data);
  }

  SUBCASE("non-square image rejected") {
    const ImageTensor rect = random_image(1, 4, 6, 2);
    CHECK_THROWS_AS(apply(Rot90Flip{}, rect, 0), std::invalid_argument);
  }
}

TEST_CASE("additive gaussian moments") {
  SUBCASE("sample covariance approaches Sigma_eta") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 1.5, 0.6, 0.6, 0.9;
    AdditiveGaussian spec{sigma};
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);

    const std::size_t n = 100000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(2);
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::VectorXd eta = apply(AugmentationSpec(spec), x, 1000 + i);
      mean += eta;
      acc += eta * eta.transpose();
    }
    mean /= static_cast<double>(n);
    const Eigen::MatrixXd cov =
        acc / static_cast<double>(n) - mean * mean.transpose();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double se = std::sqrt(
            (sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) /
            static_cast<double>(n));
        CHECK(std::abs(cov(i, j) - sigma(i, j)) < 3.0 * se);
      }
    }
  }

  SUBCASE("isotropic broadcast applies to images") {
    const ImageTensor img = random_image(1, 4, 4, 5);
    const auto out = apply(additive_gaussian_iso(0.0), img, 3);
    CHECK(out.data == img.data);
  }

  SUBCASE("rank-deficient covariance is accepted") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 1.0, 1.0, 1.0, 1.0;  // rank one
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const auto eta = apply(AugmentationSpec(AdditiveGaussian{sigma}), x, 11);
    CHECK(std::abs(eta(0) - eta(1)) < 1e-12);
  }

  SUBCASE("indefinite covariance rejected") {
    Eigen::MatrixXd sigma(2, 2);
    sigma << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(validate_spec(AugmentationSpec(AdditiveGaussian{sigma})),
                    std::invalid_argument);
  }
}

TEST_CASE("geometric transforms preserve shape") {
  const ImageTensor img = random_image(3, 8, 8, 9);
  for (const AugmentationSpec spec :
       {AugmentationSpec(Rot90Flip{}), AugmentationSpec(SmallRotation{10.0}),
        AugmentationSpec(Crop{2}),
        AugmentationSpec(Composition{{Rot90Flip{}, Crop{1}}})}) {
    const auto out = apply(spec, img, 17);
    CHECK(out.channels == img.channels);
    CHECK(out.height == img.height);
    CHECK(out.width == img.width);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(validate_spec(AugmentationSpec(SmallRotation{0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_spec(AugmentationSpec(SmallRotation{60.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_spec(AugmentationSpec(Crop{0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_spec(AugmentationSpec(Composition{})),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_spec(AugmentationSpec(SmallRotation{45.0})));
}

TEST_CASE("augmentation banks") {
  SUBCASE("same master seed reproduces the bank") {
    const auto a = make_bank(Rot90Flip{}, 16, 99);
    const auto b = make_bank(Rot90Flip{}, 16, 99);
    CHECK(a.seeds == b.seeds);
  }

  SUBCASE("B = 1 replays one transform forever") {
    const auto bank = make_bank(Rot90Flip{}, 1, 5);
    for (std::size_t e = 0; e < 10; ++e) {
      CHECK(bank.seed_for_epoch(e) == bank.seeds[0]);
    }
  }

  SUBCASE("each seed of a B = 150 bank is used exactly twice in 300 epochs") {
    const auto bank = make_bank(Rot90Flip{}, 150, 7);
    std::map<std::uint64_t, int> counts;
    for (std::size_t e = 0; e < 300; ++e) ++counts[bank.seed_for_epoch(e)];
    CHECK(counts.size() == 150);
    for (const auto& [seed, count] : counts) CHECK(count == 2);
  }

  SUBCASE("empty bank rejected") {
    CHECK_THROWS_AS(make_bank(Rot90Flip{}, 0, 1), std::invalid_argument);
  }
}

TEST_CASE("dataset augmentation") {
  std::vector<LabeledImage> data;
  for (int i = 0; i < 4; ++i) {
    data.push_back(LabeledImage{random_image(1, 6, 6, 100 + i), i % 2});
  }

  SUBCASE("identity spec keeps images and attaches group indices") {
    const auto bank = make_bank(additive_gaussian_iso(0.0), 3, 1);
    const auto out = augment_dataset(data, bank, 0);
    REQUIRE(out.size() == data.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].image.data == data[i].image.data);
      CHECK(out[i].label == data[i].label);
      CHECK(out[i].source == i);
    }
  }

  SUBCASE("full-bank expansion yields n*B rows in source groups of B") {
    const auto bank = make_bank(Rot90Flip{}, 5, 2);
    const auto out = expand_full_bank(data, bank);
    REQUIRE(out.size() == 20);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].source == i / 5);
      CHECK(out[i].label == data[i / 5].label);
    }
  }

  SUBCASE("fixed bank replays identically") {
    const auto bank = make_bank(Composition{{Rot90Flip{}, Crop{1}}}, 4, 11);
    const auto a = expand_full_bank(data, bank);
    const auto b = expand_full_bank(data, bank);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image.data == b[i].image.data);
    }
    // And the per-epoch view replays when the epoch index wraps.
    const auto e0 = augment_dataset(data, bank, 0);
    const auto e4 = augment_dataset(data, bank, 4);
    for (std::size_t i = 0; i < e0.size(); ++i) {
      CHECK(e0[i].image.data == e4[i].image.data);
    }
  }
}
