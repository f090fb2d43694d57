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

#include "tempair/net.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tempair/rng.hpp"

namespace tempair::net {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

[[noreturn]] void layer_error(std::size_t index, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(index) + ": " + what);
}

// Unified geometry for the correlation core, with channel and group axes
// flattened into one channel index.
struct ConvGeometry {
  std::size_t in_flat = 0;   // in_ch * in_group
  std::size_t out_flat = 0;  // out_ch * out_group
  std::size_t out_group = 1;
  std::size_t k = 0;
  std::size_t pad = 0;
  std::size_t stride = 1;
  Padding padding = Padding::Circular;
  std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

// Source-plane index of every (output position, kernel tap) pair, -1 when a
// zero-padded tap falls outside the grid. Shared across all channel pairs.
std::vector<long long> tap_table(const ConvGeometry& geo) {
  std::vector<long long> taps(geo.out_h * geo.out_w * geo.k * geo.k);
  std::size_t j = 0;
  for (std::size_t oh = 0; oh < geo.out_h; ++oh) {
    for (std::size_t ow = 0; ow < geo.out_w; ++ow) {
      for (std::size_t kh = 0; kh < geo.k; ++kh) {
        for (std::size_t kw = 0; kw < geo.k; ++kw) {
          long long ih = static_cast<long long>(oh * geo.stride + kh) -
                         static_cast<long long>(geo.pad);
          long long iw = static_cast<long long>(ow * geo.stride + kw) -
                         static_cast<long long>(geo.pad);
          if (geo.padding == Padding::Circular) {
            const long long h = static_cast<long long>(geo.in_h);
            const long long w = static_cast<long long>(geo.in_w);
            ih = ((ih % h) + h) % h;
            iw = ((iw % w) + w) % w;
          } else if (ih < 0 || iw < 0 ||
                     ih >= static_cast<long long>(geo.in_h) ||
                     iw >= static_cast<long long>(geo.in_w)) {
            taps[j++] = -1;
            continue;
          }
          taps[j++] = ih * static_cast<long long>(geo.in_w) + iw;
        }
      }
    }
  }
  return taps;
}

// out[co][oh][ow] = bias[co / out_group] + sum_{ci,kh,kw} W[co][ci][kh][kw]
// * in[ci][oh*stride + kh - pad][ow*stride + kw - pad].
void correlate_forward(const ConvGeometry& geo, const double* weights,
                       const double* bias, const double* in, double* out) {
  const std::size_t in_plane = geo.in_h * geo.in_w;
  const std::size_t out_plane = geo.out_h * geo.out_w;
  const std::size_t kk = geo.k * geo.k;
  const auto taps = tap_table(geo);
  for (std::size_t co = 0; co < geo.out_flat; ++co) {
    const double b = bias[co / geo.out_group];
    double* out_ch = out + co * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) out_ch[i] = b;
    for (std::size_t ci = 0; ci < geo.in_flat; ++ci) {
      const double* in_ch = in + ci * in_plane;
      const double* w_base = weights + (co * geo.in_flat + ci) * kk;
      const long long* tap = taps.data();
      for (std::size_t pos = 0; pos < out_plane; ++pos) {
        double acc = 0.0;
        for (std::size_t t = 0; t < kk; ++t) {
          const long long src = tap[t];
          if (src >= 0) acc += w_base[t] * in_ch[src];
        }
        out_ch[pos] += acc;
        tap += kk;
      }
    }
  }
}

void correlate_backward(const ConvGeometry& geo, const double* weights,
                        const double* in, const double* grad_out,
                        double* grad_weights, double* grad_bias,
                        double* grad_in) {
  const std::size_t in_plane = geo.in_h * geo.in_w;
  const std::size_t out_plane = geo.out_h * geo.out_w;
  const std::size_t kk = geo.k * geo.k;
  const auto taps = tap_table(geo);
  for (std::size_t co = 0; co < geo.out_flat; ++co) {
    const double* go_ch = grad_out + co * out_plane;
    for (std::size_t i = 0; i < out_plane; ++i) {
      grad_bias[co / geo.out_group] += go_ch[i];
    }
    for (std::size_t ci = 0; ci < geo.in_flat; ++ci) {
      const double* in_ch = in + ci * in_plane;
      double* gin_ch = grad_in ? grad_in + ci * in_plane : nullptr;
      const double* w_base = weights + (co * geo.in_flat + ci) * kk;
      double* gw_base = grad_weights + (co * geo.in_flat + ci) * kk;
      const long long* tap = taps.data();
      for (std::size_t pos = 0; pos < out_plane; ++pos) {
        const double g = go_ch[pos];
        if (g != 0.0) {
          for (std::size_t t = 0; t < kk; ++t) {
            const long long src = tap[t];
            if (src < 0) continue;
            gw_base[t] += g * in_ch[src];
            if (gin_ch) gin_ch[src] += g * w_base[t];
          }
        }
        tap += kk;
      }
    }
  }
}

// Index table realizing the filter transformation of a G-convolution:
// transformed[j] = base[table[j]]. The lift transform rotates/flips kernels
// spatially; the group-to-group transform additionally permutes the filter's
// group axis by left multiplication.
std::vector<std::size_t> filter_table(Group group, std::size_t out_ch,
                                      std::size_t in_ch, std::size_t in_group,
                                      std::size_t k) {
  const std::size_t gsz = group_size(group);
  std::vector<std::size_t> table(out_ch * gsz * in_ch * in_group * k * k);
  std::size_t j = 0;
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t s = 0; s < gsz; ++s) {
      const GroupElement elem_s = group_element(group, s);
      const GroupElement s_inv = inverse(elem_s);
      for (std::size_t i = 0; i < in_ch; ++i) {
        for (std::size_t sp = 0; sp < in_group; ++sp) {
          // Base filter slot: group index s^-1 * s'.
          const std::size_t src_group =
              in_group == 1
                  ? 0
                  : group_index(group,
                                compose(s_inv, group_element(group, sp)));
          const std::size_t base_slice =
              ((o * in_ch + i) * in_group + src_group) * k * k;
          for (std::size_t kh = 0; kh < k; ++kh) {
            for (std::size_t kw = 0; kw < k; ++kw) {
              const auto [sh, sw] = source_coords(elem_s, kh, kw, k);
              table[j++] = base_slice + sh * k + sw;
            }
          }
        }
      }
    }
  }
  return table;
}

struct LayerShapes {
  TensorShape in;
  TensorShape out;
};

TensorShape infer_output(const LayerSpec& layer, const TensorShape& in,
                         std::size_t index, bool is_last) {
  return std::visit(
      [&](const auto& l) -> TensorShape {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Dense>) {
          if (l.in != in.size()) {
            layer_error(index, "dense expects input size " +
                                   std::to_string(l.in) + ", got " +
                                   std::to_string(in.size()));
          }
          if (l.out == 0) layer_error(index, "dense output must be nonzero");
          return TensorShape{l.out, 1, 1, 1};
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          if (in.group != 1) {
            layer_error(index, "conv2d expects a plain (non group-indexed) "
                               "input");
          }
          if (in.channels != l.in_ch) {
            layer_error(index, "conv2d expects " + std::to_string(l.in_ch) +
                                   " channels, got " +
                                   std::to_string(in.channels));
          }
          if (l.k % 2 == 0 || l.k == 0 || l.k > in.height || l.k > in.width) {
            layer_error(index, "kernel must be odd and fit the input");
          }
          if (l.stride == 0) layer_error(index, "stride must be >= 1");
          return TensorShape{l.out_ch, 1, ceil_div(in.height, l.stride),
                             ceil_div(in.width, l.stride)};
        } else if constexpr (std::is_same_v<T, GConvLift>) {
          if (in.group != 1) {
            layer_error(index, "lift layer expects a plain input");
          }
          if (in.channels != l.in_ch) {
            layer_error(index, "lift expects " + std::to_string(l.in_ch) +
                                   " channels, got " +
                                   std::to_string(in.channels));
          }
          if (l.k % 2 == 0 || l.k == 0 || l.k > in.height || l.k > in.width) {
            layer_error(index, "kernel must be odd and fit the input");
          }
          if (l.stride == 0) layer_error(index, "stride must be >= 1");
          return TensorShape{l.out_ch, group_size(l.group),
                             ceil_div(in.height, l.stride),
                             ceil_div(in.width, l.stride)};
        } else if constexpr (std::is_same_v<T, GConvGG>) {
          if (in.group != group_size(l.group)) {
            layer_error(index,
                        "group-to-group layer expects group-indexed input of "
                        "size " +
                            std::to_string(group_size(l.group)) + ", got " +
                            std::to_string(in.group));
          }
          if (in.channels != l.in_ch) {
            layer_error(index, "expects " + std::to_string(l.in_ch) +
                                   " channels, got " +
                                   std::to_string(in.channels));
          }
          if (l.k % 2 == 0 || l.k == 0 || l.k > in.height || l.k > in.width) {
            layer_error(index, "kernel must be odd and fit the input");
          }
          if (l.stride == 0) layer_error(index, "stride must be >= 1");
          return TensorShape{l.out_ch, group_size(l.group),
                             ceil_div(in.height, l.stride),
                             ceil_div(in.width, l.stride)};
        } else if constexpr (std::is_same_v<T, GroupSpatialGAP>) {
          return TensorShape{in.channels, 1, 1, 1};
        } else if constexpr (std::is_same_v<T, ReLU>) {
          return in;
        } else {
          static_assert(std::is_same_v<T, Softmax>);
          if (in.group != 1 || in.height != 1 || in.width != 1) {
            layer_error(index, "softmax expects a flat vector input");
          }
          if (!is_last) layer_error(index, "softmax must be terminal");
          return in;
        }
      },
      layer);
}

ConvGeometry make_geometry(std::size_t in_ch, std::size_t in_group,
                           std::size_t out_ch, std::size_t out_group,
                           std::size_t k, std::size_t stride, Padding padding,
                           const TensorShape& in, const TensorShape& out) {
  ConvGeometry geo;
  geo.in_flat = in_ch * in_group;
  geo.out_flat = out_ch * out_group;
  geo.out_group = out_group;
  geo.k = k;
  geo.pad = (k - 1) / 2;
  geo.stride = stride;
  geo.padding = padding;
  geo.in_h = in.height;
  geo.in_w = in.width;
  geo.out_h = out.height;
  geo.out_w = out.width;
  return geo;
}

FeatureMap forward_layer(const LayerSpec& layer, const TensorShape& in_shape,
                         const TensorShape& out_shape,
                         const double* params, const FeatureMap& in) {
  FeatureMap out(out_shape);
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Dense>) {
          Eigen::Map<const Eigen::MatrixXd> w(params,
                                              static_cast<Eigen::Index>(l.out),
                                              static_cast<Eigen::Index>(l.in));
          Eigen::Map<const Eigen::VectorXd> b(params + l.out * l.in,
                                              static_cast<Eigen::Index>(l.out));
          out.data = w * in.data + b;
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          const auto geo = make_geometry(l.in_ch, 1, l.out_ch, 1, l.k,
                                         l.stride, l.padding, in_shape,
                                         out_shape);
          correlate_forward(geo, params,
                            params + l.out_ch * l.in_ch * l.k * l.k,
                            in.data.data(), out.data.data());
        } else if constexpr (std::is_same_v<T, GConvLift> ||
                             std::is_same_v<T, GConvGG>) {
          const std::size_t in_group =
              std::is_same_v<T, GConvLift> ? 1 : group_size(l.group);
          const std::size_t gsz = group_size(l.group);
          const auto table =
              filter_table(l.group, l.out_ch, l.in_ch, in_group, l.k);
          Eigen::VectorXd transformed(
              static_cast<Eigen::Index>(table.size()));
          for (std::size_t j = 0; j < table.size(); ++j) {
            transformed(static_cast<Eigen::Index>(j)) = params[table[j]];
          }
          const auto geo = make_geometry(l.in_ch, in_group, l.out_ch, gsz,
                                         l.k, l.stride, l.padding, in_shape,
                                         out_shape);
          correlate_forward(
              geo, transformed.data(),
              params + l.out_ch * l.in_ch * in_group * l.k * l.k,
              in.data.data(), out.data.data());
        } else if constexpr (std::is_same_v<T, GroupSpatialGAP>) {
          const std::size_t per =
              in_shape.group * in_shape.height * in_shape.width;
          for (std::size_t c = 0; c < in_shape.channels; ++c) {
            out.data(static_cast<Eigen::Index>(c)) =
                in.data
                    .segment(static_cast<Eigen::Index>(c * per),
                             static_cast<Eigen::Index>(per))
                    .mean();
          }
        } else if constexpr (std::is_same_v<T, ReLU>) {
          out.data = in.data.cwiseMax(0.0);
        } else {
          static_assert(std::is_same_v<T, Softmax>);
          const double m = in.data.maxCoeff();
          out.data = (in.data.array() - m).exp();
          out.data /= out.data.sum();
        }
      },
      layer);
  return out;
}

// Gradient w.r.t. input and parameters of one layer, given the cached input
// activation and the gradient at the output.
FeatureMap backward_layer(const LayerSpec& layer, const TensorShape& in_shape,
                          const TensorShape& out_shape, const double* params,
                          const FeatureMap& in, const FeatureMap& out,
                          const FeatureMap& grad_out, double* grad_params,
                          bool need_input_grad) {
  FeatureMap grad_in(in_shape);
  std::visit(
      [&](const auto& l) {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Dense>) {
          Eigen::Map<const Eigen::MatrixXd> w(params,
                                              static_cast<Eigen::Index>(l.out),
                                              static_cast<Eigen::Index>(l.in));
          Eigen::Map<Eigen::MatrixXd> gw(grad_params,
                                         static_cast<Eigen::Index>(l.out),
                                         static_cast<Eigen::Index>(l.in));
          Eigen::Map<Eigen::VectorXd> gb(grad_params + l.out * l.in,
                                         static_cast<Eigen::Index>(l.out));
          gw.noalias() += grad_out.data * in.data.transpose();
          gb += grad_out.data;
          grad_in.data.noalias() = w.transpose() * grad_out.data;
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          const auto geo = make_geometry(l.in_ch, 1, l.out_ch, 1, l.k,
                                         l.stride, l.padding, in_shape,
                                         out_shape);
          correlate_backward(geo, params, in.data.data(),
                             grad_out.data.data(), grad_params,
                             grad_params + l.out_ch * l.in_ch * l.k * l.k,
                             need_input_grad ? grad_in.data.data() : nullptr);
        } else if constexpr (std::is_same_v<T, GConvLift> ||
                             std::is_same_v<T, GConvGG>) {
          const std::size_t in_group =
              std::is_same_v<T, GConvLift> ? 1 : group_size(l.group);
          const std::size_t gsz = group_size(l.group);
          const std::size_t n_weights =
              l.out_ch * l.in_ch * in_group * l.k * l.k;
          const auto table =
              filter_table(l.group, l.out_ch, l.in_ch, in_group, l.k);
          Eigen::VectorXd transformed(
              static_cast<Eigen::Index>(table.size()));
          for (std::size_t j = 0; j < table.size(); ++j) {
            transformed(static_cast<Eigen::Index>(j)) = params[table[j]];
          }
          Eigen::VectorXd grad_transformed =
              Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.size()));
          const auto geo = make_geometry(l.in_ch, in_group, l.out_ch, gsz,
                                         l.k, l.stride, l.padding, in_shape,
                                         out_shape);
          correlate_backward(geo, transformed.data(), in.data.data(),
                             grad_out.data.data(), grad_transformed.data(),
                             grad_params + n_weights,
                             need_input_grad ? grad_in.data.data() : nullptr);
          // The transformation is a pure index permutation (with fan-out
          // |G| for the lift), so its adjoint is scatter-add.
          for (std::size_t j = 0; j < table.size(); ++j) {
            grad_params[table[j]] +=
                grad_transformed(static_cast<Eigen::Index>(j));
          }
        } else if constexpr (std::is_same_v<T, GroupSpatialGAP>) {
          const std::size_t per =
              in_shape.group * in_shape.height * in_shape.width;
          for (std::size_t c = 0; c < in_shape.channels; ++c) {
            grad_in.data
                .segment(static_cast<Eigen::Index>(c * per),
                         static_cast<Eigen::Index>(per))
                .setConstant(grad_out.data(static_cast<Eigen::Index>(c)) /
                             static_cast<double>(per));
          }
        } else if constexpr (std::is_same_v<T, ReLU>) {
          grad_in.data =
              (in.data.array() > 0.0).select(grad_out.data, 0.0);
        } else {
          static_assert(std::is_same_v<T, Softmax>);
          const double dot = out.data.dot(grad_out.data);
          grad_in.data =
              out.data.array() * (grad_out.data.array() - dot);
        }
      },
      layer);
  return grad_in;
}

std::vector<FeatureMap> run_forward(const NetworkSpec& spec,
                                    const ParamVector& params,
                                    const FeatureMap& x,
                                    std::size_t n_layers) {
  const auto shapes = spec.shapes();
  const auto layout = spec.param_layout();
  if (x.shape != spec.input) {
    throw std::invalid_argument("input shape does not match the spec");
  }
  std::vector<FeatureMap> acts;
  acts.reserve(n_layers + 1);
  acts.push_back(x);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const TensorShape in_shape = i == 0 ? spec.input : shapes[i - 1];
    acts.push_back(forward_layer(spec.layers[i], in_shape, shapes[i],
                                 params.data() + layout[i].first,
                                 acts.back()));
  }
  return acts;
}

// Backprop from grad at the output of layer `last` down to the parameters.
void run_backward(const NetworkSpec& spec, const ParamVector& params,
                  const std::vector<FeatureMap>& acts, std::size_t last,
                  FeatureMap grad, ParamVector& grad_params) {
  const auto shapes = spec.shapes();
  const auto layout = spec.param_layout();
  for (std::size_t i = last + 1; i-- > 0;) {
    const TensorShape in_shape = i == 0 ? spec.input : shapes[i - 1];
    grad = backward_layer(spec.layers[i], in_shape, shapes[i],
                          params.data() + layout[i].first, acts[i],
                          acts[i + 1], grad,
                          grad_params.data() + layout[i].first, i > 0);
  }
}

}  // namespace

FeatureMap to_feature_map(const ImageTensor& image) {
  FeatureMap map(TensorShape{image.channels, 1, image.height, image.width});
  map.data = image.data;
  return map;
}

std::vector<TensorShape> NetworkSpec::shapes() const {
  if (input.size() == 0) {
    throw std::invalid_argument("network input shape is empty");
  }
  std::vector<TensorShape> out;
  out.reserve(layers.size());
  TensorShape cur = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    cur = infer_output(layers[i], cur, i, i + 1 == layers.size());
    out.push_back(cur);
  }
  return out;
}

std::size_t layer_param_count(const LayerSpec& layer) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, Dense>) {
          return l.out * l.in + l.out;
        } else if constexpr (std::is_same_v<T, Conv2d>) {
          return l.out_ch * l.in_ch * l.k * l.k + l.out_ch;
        } else if constexpr (std::is_same_v<T, GConvLift>) {
          return l.out_ch * l.in_ch * l.k * l.k + l.out_ch;
        } else if constexpr (std::is_same_v<T, GConvGG>) {
          return l.out_ch * l.in_ch * group_size(l.group) * l.k * l.k +
                 l.out_ch;
        } else {
          return 0;
        }
      },
      layer);
}

std::size_t NetworkSpec::param_count() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += layer_param_count(l);
  return total;
}

std::vector<std::pair<std::size_t, std::size_t>> NetworkSpec::param_layout()
    const {
  std::vector<std::pair<std::size_t, std::size_t>> layout;
  layout.reserve(layers.size());
  std::size_t offset = 0;
  for (const auto& l : layers) {
    const std::size_t count = layer_param_count(l);
    layout.emplace_back(offset, count);
    offset += count;
  }
  return layout;
}

void NetworkSpec::validate() const { (void)shapes(); }

ParamVector init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params =
      ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  const auto layout = spec.param_layout();
  Rng rng(seed);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto [offset, count] = layout[i];
    if (count == 0) continue;
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          std::size_t fan_in = 0;
          std::size_t n_weights = 0;
          if constexpr (std::is_same_v<T, Dense>) {
            fan_in = l.in;
            n_weights = l.out * l.in;
          } else if constexpr (std::is_same_v<T, Conv2d> ||
                               std::is_same_v<T, GConvLift>) {
            fan_in = l.in_ch * l.k * l.k;
            n_weights = l.out_ch * l.in_ch * l.k * l.k;
          } else if constexpr (std::is_same_v<T, GConvGG>) {
            fan_in = l.in_ch * group_size(l.group) * l.k * l.k;
            n_weights = l.out_ch * l.in_ch * group_size(l.group) * l.k * l.k;
          }
          const double scale =
              std::sqrt(2.0 / static_cast<double>(std::max<std::size_t>(
                                  fan_in, 1)));
          for (std::size_t j = 0; j < n_weights; ++j) {
            params(static_cast<Eigen::Index>(offset + j)) =
                scale * rng.normal();
          }
        },
        spec.layers[i]);
  }
  return params;
}

Eigen::VectorXd forward(const NetworkSpec& spec, const ParamVector& params,
                        const FeatureMap& x) {
  if (static_cast<std::size_t>(params.size()) != spec.param_count()) {
    throw std::invalid_argument("parameter vector length mismatch");
  }
  return run_forward(spec, params, x, spec.layers.size()).back().data;
}

FeatureMap forward_prefix(const NetworkSpec& spec, const ParamVector& params,
                          const FeatureMap& x, std::size_t n_layers) {
  if (n_layers > spec.layers.size()) {
    throw std::invalid_argument("prefix longer than the network");
  }
  return run_forward(spec, params, x, n_layers).back();
}

FeatureMap group_act_on_feature_map(GroupElement g, const FeatureMap& map) {
  if (map.shape.height != map.shape.width) {
    throw std::invalid_argument(
        "group action requires a square spatial grid");
  }
  const std::size_t gsz = map.shape.group;
  Group grp = Group::P4M;
  if (gsz == 1) {
    grp = Group::P4M;  // spatial action only
  } else if (gsz == 4) {
    grp = Group::P4;
    if (g.flip) {
      throw std::invalid_argument("flip element acting on a p4-indexed map");
    }
  } else if (gsz == 8) {
    grp = Group::P4M;
  } else {
    throw std::invalid_argument("feature map group axis must be 1, 4 or 8");
  }

  const GroupElement g_inv = inverse(g);
  FeatureMap out(map.shape);
  for (std::size_t c = 0; c < map.shape.channels; ++c) {
    for (std::size_t j = 0; j < gsz; ++j) {
      const std::size_t src_g =
          gsz == 1 ? 0
                   : group_index(grp, compose(g_inv, group_element(grp, j)));
      for (std::size_t r = 0; r < map.shape.height; ++r) {
        for (std::size_t w = 0; w < map.shape.width; ++w) {
          const auto [sr, sc] = source_coords(g, r, w, map.shape.height);
          out.at(c, j, r, w) = map.at(c, src_g, sr, sc);
        }
      }
    }
  }
  return out;
}

LossGrad loss_and_grad(const NetworkSpec& spec, const ParamVector& params,
                       const std::vector<ClassifiedExample>& batch) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (spec.layers.empty() ||
      !std::holds_alternative<Softmax>(spec.layers.back())) {
    throw std::invalid_argument(
        "classification loss requires a terminal softmax layer");
  }
  const std::size_t logits_layer = spec.layers.size() - 1;
  const auto shapes = spec.shapes();
  const std::size_t classes = shapes.back().channels;

  LossGrad result;
  result.grad =
      ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  for (const auto& ex : batch) {
    if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= classes) {
      throw std::invalid_argument("label out of range");
    }
    const auto acts = run_forward(spec, params, ex.x, logits_layer);
    const Eigen::VectorXd& logits = acts.back().data;
    const double m = logits.maxCoeff();
    const Eigen::VectorXd shifted = (logits.array() - m).exp();
    const double z = shifted.sum();
    result.loss += std::log(z) + m - logits(ex.label);

    FeatureMap grad(shapes[logits_layer - 1]);
    grad.data = shifted / z;
    grad.data(ex.label) -= 1.0;
    run_backward(spec, params, acts, logits_layer - 1, std::move(grad),
                 result.grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv_n;
  result.grad *= inv_n;
  return result;
}

LossGrad loss_and_grad_gaussian(const NetworkSpec& spec,
                                const ParamVector& params,
                                const std::vector<RegressionExample>& batch,
                                double noise_var) {
  if (batch.empty()) throw std::invalid_argument("batch must be nonempty");
  if (!(noise_var > 0.0)) {
    throw std::invalid_argument("noise variance must be positive");
  }
  const auto shapes = spec.shapes();
  if (shapes.back().size() != 1) {
    throw std::invalid_argument("regression loss requires a scalar output");
  }
  const double log_norm =
      0.5 * std::log(2.0 * std::numbers::pi * noise_var);

  LossGrad result;
  result.grad =
      ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  for (const auto& ex : batch) {
    const auto acts = run_forward(spec, params, ex.x, spec.layers.size());
    const double f = acts.back().data(0);
    const double resid = f - ex.target;
    result.loss += 0.5 * resid * resid / noise_var + log_norm;

    FeatureMap grad(shapes.back());
    grad.data(0) = resid / noise_var;
    run_backward(spec, params, acts, spec.layers.size() - 1, std::move(grad),
                 result.grad);
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv_n;
  result.grad *= inv_n;
  return result;
}

double equivariance_deviation(const NetworkSpec& spec,
                              const ParamVector& params, const FeatureMap& x,
                              GroupElement g, std::size_t prefix_layers) {
  const FeatureMap transformed_in = group_act_on_feature_map(g, x);
  const FeatureMap lhs =
      forward_prefix(spec, params, transformed_in, prefix_layers);
  const FeatureMap rhs = group_act_on_feature_map(
      g, forward_prefix(spec, params, x, prefix_layers));
  return (lhs.data - rhs.data).cwiseAbs().maxCoeff();
}

double total_variation_invariance(const NetworkSpec& spec,
                                  const ParamVector& params,
                                  const ImageTensor& x,
                                  const augment::AugmentationBank& bank) {
  if (bank.B < 2) {
    throw std::invalid_argument(
        "total variation needs at least 2 augmentations");
  }
  std::vector<Eigen::VectorXd> probs;
  probs.reserve(bank.B);
  for (std::size_t b = 0; b < bank.B; ++b) {
    probs.push_back(forward(
        spec, params,
        to_feature_map(augment::apply(bank.spec, x, bank.seeds[b]))));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < bank.B; ++a) {
    for (std::size_t b = a + 1; b < bank.B; ++b) {
      total += 0.5 * (probs[a] - probs[b]).cwiseAbs().sum();
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

namespace {

// Offset action of g = R^r F^m about the origin: flip then rotate.
std::pair<long long, long long> offset_act(GroupElement g, long long dr,
                                           long long dc) {
  if (g.flip) dc = -dc;
  for (int i = 0; i < g.rotation; ++i) {
    const long long nr = -dc;
    const long long nc = dr;
    dr = nr;
    dc = nc;
  }
  return {dr, dc};
}

long long wrap_centered(long long d, long long n) {
  d = ((d % n) + n) % n;
  if (d >= n / 2 + (n % 2)) d -= n;
  return d;
}

}  // namespace

FeatureMap gconv_forward_reference(const LayerSpec& layer,
                                   const Eigen::VectorXd& layer_params,
                                   const FeatureMap& in) {
  const bool is_lift = std::holds_alternative<GConvLift>(layer);
  if (!is_lift && !std::holds_alternative<GConvGG>(layer)) {
    throw std::invalid_argument("reference evaluator handles G-conv layers");
  }
  if (in.shape.height > 32 || in.shape.width > 32) {
    throw std::invalid_argument("reference evaluator is for small inputs");
  }

  std::size_t out_ch, in_ch, k, stride;
  Group group;
  Padding padding;
  if (is_lift) {
    const auto& l = std::get<GConvLift>(layer);
    out_ch = l.out_ch;
    in_ch = l.in_ch;
    k = l.k;
    stride = l.stride;
    group = l.group;
    padding = l.padding;
  } else {
    const auto& l = std::get<GConvGG>(layer);
    out_ch = l.out_ch;
    in_ch = l.in_ch;
    k = l.k;
    stride = l.stride;
    group = l.group;
    padding = l.padding;
  }
  const std::size_t gsz = group_size(group);
  const std::size_t in_group = is_lift ? 1 : gsz;
  const long long pad = static_cast<long long>((k - 1) / 2);
  const long long center = pad;

  TensorShape out_shape{out_ch, gsz, ceil_div(in.shape.height, stride),
                        ceil_div(in.shape.width, stride)};
  FeatureMap out(out_shape);
  const double* weights = layer_params.data();
  const double* bias = layer_params.data() + out_ch * in_ch * in_group * k * k;

  // out(o, h=(t,s)) = sum over input-domain elements g=(y,s') and channels
  // of f(i, g) * psi(o, i, h^-1 g), with h^-1 g = (s^-1 (y - t), s^-1 s').
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t s = 0; s < gsz; ++s) {
      const GroupElement s_elem = group_element(group, s);
      const GroupElement s_inv = inverse(s_elem);
      for (std::size_t oh = 0; oh < out_shape.height; ++oh) {
        for (std::size_t ow = 0; ow < out_shape.width; ++ow) {
          const long long th = static_cast<long long>(oh * stride);
          const long long tw = static_cast<long long>(ow * stride);
          double acc = bias[o];
          for (std::size_t i = 0; i < in_ch; ++i) {
            for (std::size_t sp = 0; sp < in_group; ++sp) {
              const std::size_t filter_group =
                  is_lift
                      ? 0
                      : group_index(group,
                                    compose(s_inv, group_element(group, sp)));
              for (std::size_t yh = 0; yh < in.shape.height; ++yh) {
                for (std::size_t yw = 0; yw < in.shape.width; ++yw) {
                  long long dh = static_cast<long long>(yh) - th;
                  long long dw = static_cast<long long>(yw) - tw;
                  if (padding == Padding::Circular) {
                    dh = wrap_centered(dh,
                                       static_cast<long long>(in.shape.height));
                    dw = wrap_centered(dw,
                                       static_cast<long long>(in.shape.width));
                  }
                  const auto [rh, rw] = offset_act(s_inv, dh, dw);
                  const long long kh = center + rh;
                  const long long kw = center + rw;
                  if (kh < 0 || kw < 0 || kh >= static_cast<long long>(k) ||
                      kw >= static_cast<long long>(k)) {
                    continue;
                  }
                  acc += in.at(i, sp, yh, yw) *
                         weights[((o * in_ch + i) * in_group + filter_group) *
                                     k * k +
                                 static_cast<std::size_t>(kh) * k +
                                 static_cast<std::size_t>(kw)];
                }
              }
            }
          }
          out.at(o, s, oh, ow) = acc;
        }
      }
    }
  }
  return out;
}

PairedSpecs make_paired_specs(TensorShape input,
                              const std::vector<std::size_t>& conv_channels,
                              std::size_t classes, Group group,
                              std::size_t stride, Padding padding) {
  if (conv_channels.empty()) {
    throw std::invalid_argument("need at least one conv layer");
  }
  const double root = std::sqrt(static_cast<double>(group_size(group)));
  auto gch = [&](std::size_t c) {
    return std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(static_cast<double>(c) /
                                                root)));
  };

  PairedSpecs out;
  out.conv.input = input;
  out.gconv.input = input;
  std::size_t prev_c = input.channels;
  std::size_t prev_g = input.channels;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    const std::size_t c = conv_channels[i];
    out.conv.layers.push_back(Conv2d{prev_c, c, 3, stride, padding});
    out.conv.layers.push_back(ReLU{});
    if (i == 0) {
      out.gconv.layers.push_back(
          GConvLift{prev_g, gch(c), 3, group, stride, padding});
    } else {
      out.gconv.layers.push_back(
          GConvGG{prev_g, gch(c), 3, group, stride, padding});
    }
    out.gconv.layers.push_back(ReLU{});
    prev_c = c;
    prev_g = gch(c);
  }
  out.conv.layers.push_back(GroupSpatialGAP{});
  out.conv.layers.push_back(Dense{prev_c, classes});
  out.conv.layers.push_back(Softmax{});
  out.gconv.layers.push_back(GroupSpatialGAP{});
  out.gconv.layers.push_back(Dense{prev_g, classes});
  out.gconv.layers.push_back(Softmax{});
  return out;
}

}  // namespace tempair::net
