/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#pragma once

// Inference-only layer engine.
//
// Layers form a small tree (residual blocks nest child chains).  A resolve
// pass infers every shape once and assigns parameter slots; apply functions
// then run batches with no per-call shape work.  Convolutions use "same"
// padding (left/top gets the smaller half), pooling uses "valid" windows.
//
// All floating-point reductions (matrix products via gemm.hpp, pooling sums)
// run in a fixed element order, so results never depend on how examples were
// grouped into batches.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nrf/activations.hpp"
#include "nrf/errors.hpp"
#include "nrf/gemm.hpp"
#include "nrf/tensor.hpp"

namespace nrf {

enum class LayerKind {
  dense,
  conv2d,
  max_pool,
  avg_pool,
  global_avg_pool,
  batch_norm,
  activation,
  flatten,
  residual,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::avg_pool: return "avg_pool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::activation: return "activation";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual: return "residual";
  }
  return "unknown";
}

struct Layer {
  LayerKind kind = LayerKind::flatten;
  std::string name;

  int units = 0;                                       // dense
  int filters = 0, kernel_h = 0, kernel_w = 0, stride = 1;  // conv2d
  int window = 0, pool_stride = 0;                     // max_pool / avg_pool
  double epsilon = 1e-5;                               // batch_norm
  Activation act{};                                    // activation
  std::vector<Layer> body;                             // residual main path
  std::vector<Layer> shortcut;                         // residual projection; empty = identity
  /// Residual only: with skip=false the block computes the main path alone.
  /// Shortcut parameter slots are still assigned so weight draws stay aligned
  /// between the two settings.
  bool skip = true;

  // Filled by resolve_layers.
  Shape in_shape, out_shape;
  int slot = -1;
};

// Constructors keep preset builders terse.
inline Layer dense_layer(std::string name, int units) {
  Layer l;
  l.kind = LayerKind::dense;
  l.name = std::move(name);
  l.units = units;
  return l;
}
inline Layer conv2d_layer(std::string name, int filters, int kh, int kw, int stride = 1) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.name = std::move(name);
  l.filters = filters;
  l.kernel_h = kh;
  l.kernel_w = kw;
  l.stride = stride;
  return l;
}
inline Layer pool_layer(std::string name, LayerKind kind, int window, int stride) {
  Layer l;
  l.kind = kind;
  l.name = std::move(name);
  l.window = window;
  l.pool_stride = stride;
  return l;
}
inline Layer global_avg_pool_layer(std::string name) {
  Layer l;
  l.kind = LayerKind::global_avg_pool;
  l.name = std::move(name);
  return l;
}
inline Layer batch_norm_layer(std::string name, double epsilon = 1e-5) {
  Layer l;
  l.kind = LayerKind::batch_norm;
  l.name = std::move(name);
  l.epsilon = epsilon;
  return l;
}
inline Layer activation_layer(std::string name, Activation act) {
  Layer l;
  l.kind = LayerKind::activation;
  l.name = std::move(name);
  l.act = act;
  return l;
}
inline Layer flatten_layer(std::string name) {
  Layer l;
  l.kind = LayerKind::flatten;
  l.name = std::move(name);
  return l;
}
inline Layer residual_layer(std::string name, std::vector<Layer> body,
                            std::vector<Layer> shortcut) {
  Layer l;
  l.kind = LayerKind::residual;
  l.name = std::move(name);
  l.body = std::move(body);
  l.shortcut = std::move(shortcut);
  return l;
}

/// Parameter tensors for one slot.  Which members are populated depends on
/// the owning layer's kind.
struct LayerParams {
  Tensor kernel;  // dense: (in, units); conv2d: (kh, kw, cin, cout)
  Tensor bias;    // dense/conv2d: (units/cout), zero at init
  Tensor bn_scale, bn_shift, bn_mean, bn_var;  // batch_norm: (channels) each
};

/// What build_network must draw or construct for one slot.
struct SlotInfo {
  LayerKind kind = LayerKind::dense;
  std::string layer_name;
  Shape kernel_shape;           // dense/conv2d
  int bias_len = 0;             // dense/conv2d
  std::int64_t fan_in = 0, fan_out = 0;
  int channels = 0;             // batch_norm
};

namespace detail {

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

inline void require(bool ok, const std::string& layer_name, const std::string& msg) {
  if (!ok) throw shape_error(layer_name + ": " + msg);
}

}  // namespace detail

/// Infer shapes through a chain, assign parameter slots, and collect slot
/// descriptors.  Returns the chain's output shape.
inline Shape resolve_layers(std::vector<Layer>& layers, Shape in,
                            std::vector<SlotInfo>& slots) {
  Shape cur = std::move(in);
  for (Layer& l : layers) {
    l.in_shape = cur;
    switch (l.kind) {
      case LayerKind::dense: {
        detail::require(cur.size() == 1, l.name,
                        "dense needs a flat input, got " + shape_to_string(cur) +
                            " (insert flatten)");
        detail::require(l.units >= 1, l.name, "units must be >= 1");
        SlotInfo s;
        s.kind = l.kind;
        s.layer_name = l.name;
        s.kernel_shape = {cur[0], l.units};
        s.bias_len = l.units;
        s.fan_in = cur[0];
        s.fan_out = l.units;
        l.slot = static_cast<int>(slots.size());
        slots.push_back(std::move(s));
        cur = {l.units};
        break;
      }
      case LayerKind::conv2d: {
        detail::require(cur.size() == 3, l.name,
                        "conv2d needs an (H, W, C) input, got " + shape_to_string(cur));
        detail::require(l.filters >= 1 && l.kernel_h >= 1 && l.kernel_w >= 1 && l.stride >= 1,
                        l.name, "invalid conv parameters");
        SlotInfo s;
        s.kind = l.kind;
        s.layer_name = l.name;
        s.kernel_shape = {l.kernel_h, l.kernel_w, cur[2], l.filters};
        s.bias_len = l.filters;
        s.fan_in = static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * cur[2];
        s.fan_out = static_cast<std::int64_t>(l.kernel_h) * l.kernel_w * l.filters;
        l.slot = static_cast<int>(slots.size());
        slots.push_back(std::move(s));
        cur = {detail::ceil_div(cur[0], l.stride), detail::ceil_div(cur[1], l.stride),
               l.filters};
        break;
      }
      case LayerKind::max_pool:
      case LayerKind::avg_pool: {
        detail::require(cur.size() == 3, l.name,
                        "pooling needs an (H, W, C) input, got " + shape_to_string(cur));
        detail::require(l.window >= 1 && l.pool_stride >= 1, l.name, "invalid pool parameters");
        detail::require(cur[0] >= l.window && cur[1] >= l.window, l.name,
                        "window larger than input " + shape_to_string(cur));
        cur = {(cur[0] - l.window) / l.pool_stride + 1, (cur[1] - l.window) / l.pool_stride + 1,
               cur[2]};
        break;
      }
      case LayerKind::global_avg_pool: {
        detail::require(cur.size() == 3, l.name,
                        "global_avg_pool needs an (H, W, C) input, got " + shape_to_string(cur));
        cur = {cur[2]};
        break;
      }
      case LayerKind::batch_norm: {
        detail::require(!cur.empty(), l.name, "batch_norm needs a non-empty shape");
        SlotInfo s;
        s.kind = l.kind;
        s.layer_name = l.name;
        s.channels = cur.back();
        l.slot = static_cast<int>(slots.size());
        slots.push_back(std::move(s));
        break;
      }
      case LayerKind::activation:
      case LayerKind::flatten: {
        if (l.kind == LayerKind::flatten) {
          cur = {static_cast<int>(shape_numel(cur))};
        }
        break;
      }
      case LayerKind::residual: {
        const Shape saved = cur;
        Shape body_out = resolve_layers(l.body, saved, slots);
        Shape short_out = l.shortcut.empty() ? saved : resolve_layers(l.shortcut, saved, slots);
        detail::require(body_out == short_out, l.name,
                        "residual paths disagree: body " + shape_to_string(body_out) +
                            " vs shortcut " + shape_to_string(short_out));
        cur = body_out;
        break;
      }
    }
    l.out_shape = cur;
  }
  return cur;
}

/// Contiguous batch of `count` examples sharing an example shape.
struct Slab {
  Shape eshape;
  int count = 0;
  std::vector<float> data;

  std::size_t example_numel() const { return shape_numel(eshape); }
};

/// Reusable scratch buffers and numeric options for forward passes.  One per
/// thread.
struct Workspace {
  std::vector<float> im2col;
  /// Accumulate matrix products in 64-bit floats (default is 32-bit).
  bool accumulate_f64 = false;
};

namespace detail {

inline void add_bias_rows(float* out, const float* bias, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = out + r * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

}  // namespace detail

inline Slab apply_dense(const Layer& l, const LayerParams& p, const Slab& x, Workspace& ws) {
  const int d = l.in_shape[0];
  const int u = l.units;
  Slab out;
  out.eshape = {u};
  out.count = x.count;
  out.data.resize(static_cast<std::size_t>(x.count) * u);
  if (ws.accumulate_f64) {
    gemm<double>(x.data.data(), p.kernel.ptr(), out.data.data(), static_cast<std::size_t>(x.count),
                 static_cast<std::size_t>(d), static_cast<std::size_t>(u));
  } else {
    gemm<float>(x.data.data(), p.kernel.ptr(), out.data.data(), static_cast<std::size_t>(x.count),
                static_cast<std::size_t>(d), static_cast<std::size_t>(u));
  }
  detail::add_bias_rows(out.data.data(), p.bias.ptr(), static_cast<std::size_t>(x.count),
                        static_cast<std::size_t>(u));
  return out;
}

inline Slab apply_conv2d(const Layer& l, const LayerParams& p, const Slab& x, Workspace& ws) {
  const int h = l.in_shape[0], w = l.in_shape[1], cin = l.in_shape[2];
  const int ho = l.out_shape[0], wo = l.out_shape[1], cout = l.filters;
  const int kh = l.kernel_h, kw = l.kernel_w, s = l.stride;
  // "same" padding: total = max((out-1)*stride + kernel - in, 0), smaller
  // half on the top/left.
  const int pad_h = std::max((ho - 1) * s + kh - h, 0);
  const int pad_w = std::max((wo - 1) * s + kw - w, 0);
  const int pt = pad_h / 2, pl = pad_w / 2;

  const std::size_t patch = static_cast<std::size_t>(kh) * kw * cin;
  const std::size_t positions = static_cast<std::size_t>(ho) * wo;
  ws.im2col.resize(positions * patch);

  Slab out;
  out.eshape = {ho, wo, cout};
  out.count = x.count;
  out.data.resize(static_cast<std::size_t>(x.count) * positions * cout);

  const std::size_t in_stride = x.example_numel();
  for (int e = 0; e < x.count; ++e) {
    const float* src = x.data.data() + static_cast<std::size_t>(e) * in_stride;
    float* col = ws.im2col.data();
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * s - pt + ky;
          if (iy < 0 || iy >= h) {
            for (int i = 0; i < kw * cin; ++i) *col++ = 0.0f;
            continue;
          }
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * s - pl + kx;
            if (ix < 0 || ix >= w) {
              for (int c = 0; c < cin; ++c) *col++ = 0.0f;
            } else {
              const float* px = src + (static_cast<std::size_t>(iy) * w + ix) * cin;
              for (int c = 0; c < cin; ++c) *col++ = px[c];
            }
          }
        }
      }
    }
    float* dst = out.data.data() + static_cast<std::size_t>(e) * positions * cout;
    if (ws.accumulate_f64) {
      gemm<double>(ws.im2col.data(), p.kernel.ptr(), dst, positions, patch,
                   static_cast<std::size_t>(cout));
    } else {
      gemm<float>(ws.im2col.data(), p.kernel.ptr(), dst, positions, patch,
                  static_cast<std::size_t>(cout));
    }
    detail::add_bias_rows(dst, p.bias.ptr(), positions, static_cast<std::size_t>(cout));
  }
  return out;
}

inline Slab apply_pool(const Layer& l, const Slab& x) {
  const int h = l.in_shape[0], w = l.in_shape[1], c = l.in_shape[2];
  const int ho = l.out_shape[0], wo = l.out_shape[1];
  const int win = l.window, s = l.pool_stride;
  const bool is_max = l.kind == LayerKind::max_pool;
  const float inv_area = 1.0f / static_cast<float>(win * win);

  Slab out;
  out.eshape = l.out_shape;
  out.count = x.count;
  out.data.resize(static_cast<std::size_t>(x.count) * shape_numel(l.out_shape));

  const std::size_t in_stride = x.example_numel();
  const std::size_t out_stride = out.example_numel();
  for (int e = 0; e < x.count; ++e) {
    const float* src = x.data.data() + static_cast<std::size_t>(e) * in_stride;
    float* dst = out.data.data() + static_cast<std::size_t>(e) * out_stride;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        for (int ch = 0; ch < c; ++ch) {
          float acc = is_max ? -std::numeric_limits<float>::infinity() : 0.0f;
          for (int ky = 0; ky < win; ++ky) {
            const float* row = src + (static_cast<std::size_t>(oy * s + ky) * w + ox * s) * c + ch;
            for (int kx = 0; kx < win; ++kx) {
              const float v = row[static_cast<std::size_t>(kx) * c];
              acc = is_max ? (v > acc ? v : acc) : acc + v;
            }
          }
          dst[(static_cast<std::size_t>(oy) * wo + ox) * c + ch] =
              is_max ? acc : acc * inv_area;
        }
      }
    }
  }
  return out;
}

inline Slab apply_global_avg_pool(const Layer& l, const Slab& x) {
  const int h = l.in_shape[0], w = l.in_shape[1], c = l.in_shape[2];
  const float inv = 1.0f / static_cast<float>(h * w);
  Slab out;
  out.eshape = {c};
  out.count = x.count;
  out.data.assign(static_cast<std::size_t>(x.count) * c, 0.0f);
  const std::size_t in_stride = x.example_numel();
  for (int e = 0; e < x.count; ++e) {
    const float* src = x.data.data() + static_cast<std::size_t>(e) * in_stride;
    float* dst = out.data.data() + static_cast<std::size_t>(e) * c;
    for (int i = 0; i < h * w; ++i) {
      const float* px = src + static_cast<std::size_t>(i) * c;
      for (int ch = 0; ch < c; ++ch) dst[ch] += px[ch];
    }
    for (int ch = 0; ch < c; ++ch) dst[ch] *= inv;
  }
  return out;
}

inline Slab apply_batch_norm(const Layer& l, const LayerParams& p, const Slab& x) {
  const int c = l.in_shape.back();
  // Fold the affine map into one multiplier and offset per channel.
  std::vector<float> mul(static_cast<std::size_t>(c)), off(static_cast<std::size_t>(c));
  for (int ch = 0; ch < c; ++ch) {
    const double m = static_cast<double>(p.bn_scale.data[ch]) /
                     std::sqrt(static_cast<double>(p.bn_var.data[ch]) + l.epsilon);
    mul[ch] = static_cast<float>(m);
    off[ch] = static_cast<float>(p.bn_shift.data[ch] - p.bn_mean.data[ch] * m);
  }
  Slab out;
  out.eshape = x.eshape;
  out.count = x.count;
  out.data.resize(x.data.size());
  const std::size_t rows = x.data.size() / static_cast<std::size_t>(c);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = x.data.data() + r * c;
    float* dst = out.data.data() + r * c;
    for (int ch = 0; ch < c; ++ch) dst[ch] = std::fma(src[ch], mul[ch], off[ch]);
  }
  return out;
}

inline Slab apply_activation(const Layer& l, const Slab& x) {
  Slab out;
  out.eshape = x.eshape;
  out.count = x.count;
  out.data.resize(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = l.act(x.data[i]);
  return out;
}

inline bool slab_all_finite(const Slab& s) {
  for (float v : s.data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Run a resolved chain over a batch.  With `check` set, every layer output
/// is scanned and the first non-finite value raises a numeric_error naming
/// the layer.
inline Slab run_layers(const std::vector<Layer>& layers, const std::vector<LayerParams>& params,
                       Slab x, Workspace& ws, bool check = false) {
  for (const Layer& l : layers) {
    switch (l.kind) {
      case LayerKind::dense:
        x = apply_dense(l, params[static_cast<std::size_t>(l.slot)], x, ws);
        break;
      case LayerKind::conv2d:
        x = apply_conv2d(l, params[static_cast<std::size_t>(l.slot)], x, ws);
        break;
      case LayerKind::max_pool:
      case LayerKind::avg_pool:
        x = apply_pool(l, x);
        break;
      case LayerKind::global_avg_pool:
        x = apply_global_avg_pool(l, x);
        break;
      case LayerKind::batch_norm:
        x = apply_batch_norm(l, params[static_cast<std::size_t>(l.slot)], x);
        break;
      case LayerKind::activation:
        x = apply_activation(l, x);
        break;
      case LayerKind::flatten:
        x.eshape = {static_cast<int>(x.example_numel())};
        break;
      case LayerKind::residual: {
        if (!l.skip) {
          x = run_layers(l.body, params, std::move(x), ws, check);
          break;
        }
        Slab saved = x;  // copy for the shortcut path
        Slab body_out = run_layers(l.body, params, std::move(x), ws, check);
        Slab short_out =
            l.shortcut.empty() ? std::move(saved)
                               : run_layers(l.shortcut, params, std::move(saved), ws, check);
        for (std::size_t i = 0; i < body_out.data.size(); ++i) {
          body_out.data[i] += short_out.data[i];
        }
        x = std::move(body_out);
        break;
      }
    }
    if (check && !slab_all_finite(x)) {
      throw numeric_error("non-finite output at layer '" + l.name + "' (" +
                          layer_kind_name(l.kind) + ")");
    }
  }
  return x;
}

}  // namespace nrf
