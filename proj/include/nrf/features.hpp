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

// Random-feature embeddings and kernel estimation.
//
// Feature column j of an extraction is the scalar output of the network
// built from (base_seed, stream_index=j).  With the scaling flag set the
// matrix holds column values divided by sqrt(n), so the Euclidean inner
// product of two rows is the n-sample kernel estimate for those examples.
// Because columns depend only on their own stream index, a prefix of a wider
// extraction is the narrower extraction (up to the scale factor), and a
// value computed later for a new example is bit-identical to what the
// original run would have produced.

#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "nrf/architectures.hpp"
#include "nrf/errors.hpp"
#include "nrf/gemm.hpp"
#include "nrf/network.hpp"
#include "nrf/tensor.hpp"

namespace nrf {

struct FeatureMatrix {
  std::int64_t num_examples = 0;  // N (rows)
  std::int64_t num_features = 0;  // n (columns, one per network)
  std::vector<float> values;      // row-major N x n
  ArchitectureSpec arch;
  std::uint64_t base_seed = 0;
  bool scaled = true;
  /// Hash of the dataset the rows were computed from; 0 when unknown.
  std::uint64_t dataset_fingerprint = 0;

  const float* row(std::int64_t i) const {
    return values.data() + i * num_features;
  }
  float* row(std::int64_t i) { return values.data() + i * num_features; }
};

struct ExtractOptions {
  /// Worker threads; columns are split into contiguous ranges, and the
  /// result is identical for any worker count.
  int workers = 1;
  /// Divide by sqrt(n) (the embedding definition).  Off stores raw logits.
  bool scale = true;
  /// Examples per forward batch; affects speed only, never results.
  int chunk = 64;
  /// 64-bit accumulation inside matrix products.
  bool accumulate_f64 = false;
};

namespace detail {

inline void extract_columns(const ResolvedNet& net, const Tensor& inputs, FeatureMatrix& out,
                            std::uint64_t base_seed, std::int64_t j_begin, std::int64_t j_end,
                            const ExtractOptions& opts) {
  Workspace ws;
  ws.accumulate_f64 = opts.accumulate_f64;
  const int total = batch_size(inputs);
  const std::size_t example_len = shape_numel(net.input_shape);
  const std::int64_t n = out.num_features;
  Tensor chunk_batch;
  for (std::int64_t j = j_begin; j < j_end; ++j) {
    const NetworkInstance inst = build_network(net, base_seed, static_cast<std::uint64_t>(j));
    for (int start = 0; start < total; start += opts.chunk) {
      const int count = std::min(opts.chunk, total - start);
      Shape bshape = net.input_shape;
      bshape.insert(bshape.begin(), count);
      chunk_batch.shape = bshape;
      chunk_batch.data.assign(
          inputs.data.begin() + static_cast<std::size_t>(start) * example_len,
          inputs.data.begin() + static_cast<std::size_t>(start + count) * example_len);
      const Tensor logits = forward(net, inst, chunk_batch, ws);
      for (int e = 0; e < count; ++e) {
        out.values[static_cast<std::size_t>(start + e) * n + j] = logits.data[e];
      }
    }
  }
}

}  // namespace detail

/// Build n scalar-output networks and collect their responses to the batch.
inline FeatureMatrix extract_features(const ArchitectureSpec& arch, const Tensor& inputs,
                                      std::int64_t n, std::uint64_t base_seed,
                                      const ExtractOptions& opts = {}) {
  if (arch.output_dim != 1) {
    throw head_dim_error("extract_features needs a scalar head (output_dim=1), got " +
                         std::to_string(arch.output_dim));
  }
  if (n < 1) throw config_error("extract_features: n must be >= 1");
  const ResolvedNet net = resolve_architecture(arch, example_shape(inputs));
  const int num_examples = batch_size(inputs);

  FeatureMatrix out;
  out.num_examples = num_examples;
  out.num_features = n;
  out.arch = arch;
  out.base_seed = base_seed;
  out.scaled = opts.scale;
  out.values.resize(static_cast<std::size_t>(num_examples) * static_cast<std::size_t>(n));

  const int workers = static_cast<int>(std::min<std::int64_t>(std::max(opts.workers, 1), n));
  if (workers == 1) {
    detail::extract_columns(net, inputs, out, base_seed, 0, n, opts);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    const std::int64_t per = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::int64_t j0 = w * per;
      const std::int64_t j1 = std::min<std::int64_t>(j0 + per, n);
      pool.emplace_back([&, w, j0, j1] {
        try {
          detail::extract_columns(net, inputs, out, base_seed, j0, j1, opts);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  if (opts.scale) {
    const float inv = static_cast<float>(1.0 / std::sqrt(static_cast<double>(n)));
    for (float& v : out.values) v *= inv;
  }
  return out;
}

/// First new_n columns as a standalone matrix.  Raw (unscaled) values are
/// copied bit-exactly; scaled values are rescaled from 1/sqrt(n) to
/// 1/sqrt(new_n), which matches a direct extraction to within float
/// round-off.
inline FeatureMatrix slice_features(const FeatureMatrix& fm, std::int64_t new_n) {
  if (new_n < 1 || new_n > fm.num_features) {
    throw config_error("slice_features: requested " + std::to_string(new_n) + " of " +
                       std::to_string(fm.num_features) + " columns");
  }
  FeatureMatrix out;
  out.num_examples = fm.num_examples;
  out.num_features = new_n;
  out.arch = fm.arch;
  out.base_seed = fm.base_seed;
  out.scaled = fm.scaled;
  out.dataset_fingerprint = fm.dataset_fingerprint;
  out.values.resize(static_cast<std::size_t>(fm.num_examples) * new_n);
  const float factor =
      fm.scaled ? static_cast<float>(std::sqrt(static_cast<double>(fm.num_features) /
                                               static_cast<double>(new_n)))
                : 1.0f;
  for (std::int64_t i = 0; i < fm.num_examples; ++i) {
    const float* src = fm.row(i);
    float* dst = out.row(i);
    for (std::int64_t j = 0; j < new_n; ++j) dst[j] = src[j] * factor;
  }
  return out;
}

struct KernelEstimate {
  double value = 0.0;
  std::int64_t n = 0;
  /// Unbiased sample variance of the per-network products; value's standard
  /// error is sqrt(variance / n).
  double variance = 0.0;
};

struct KernelOptions {
  /// Compute the estimate with exactly the operations the scaled-feature
  /// inner product uses, making it bit-identical to gram() entries.
  bool match_feature_dot = false;
  bool accumulate_f64 = false;
};

/// Kernel estimates for many input pairs sharing one set of n networks.
/// xs and x2s are batches of equal length; result[i] estimates the kernel of
/// (xs[i], x2s[i]).
inline std::vector<KernelEstimate> estimate_kernel_pairs(const ArchitectureSpec& arch,
                                                         const Tensor& xs, const Tensor& x2s,
                                                         std::int64_t n, std::uint64_t base_seed,
                                                         const KernelOptions& opts = {}) {
  if (n < 1) throw config_error("estimate_kernel: n must be >= 1");
  if (xs.shape != x2s.shape) {
    throw shape_error("estimate_kernel_pairs: mismatched pair batches " +
                      shape_to_string(xs.shape) + " vs " + shape_to_string(x2s.shape));
  }
  const ResolvedNet net = resolve_architecture(arch, example_shape(xs));
  const int pairs = batch_size(xs);
  const int k = arch.output_dim;

  // One batch holding xs then x2s.
  Shape bshape = xs.shape;
  bshape[0] = 2 * pairs;
  Tensor both(bshape);
  std::copy(xs.data.begin(), xs.data.end(), both.data.begin());
  std::copy(x2s.data.begin(), x2s.data.end(), both.data.begin() + xs.data.size());

  Workspace ws;
  ws.accumulate_f64 = opts.accumulate_f64;
  std::vector<KernelEstimate> result(static_cast<std::size_t>(pairs));
  for (auto& r : result) r.n = n;

  // Welford accumulators for the per-network products.
  std::vector<double> mean(static_cast<std::size_t>(pairs), 0.0);
  std::vector<double> m2(static_cast<std::size_t>(pairs), 0.0);

  // Scaled float features per pair side, kept only for match_feature_dot.
  std::vector<float> fa, fb;
  const float fscale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(n)));
  if (opts.match_feature_dot) {
    fa.resize(static_cast<std::size_t>(pairs) * static_cast<std::size_t>(n));
    fb.resize(static_cast<std::size_t>(pairs) * static_cast<std::size_t>(n));
  }

  for (std::int64_t i = 0; i < n; ++i) {
    const NetworkInstance inst = build_network(net, base_seed, static_cast<std::uint64_t>(i));
    const Tensor logits = forward(net, inst, both, ws);
    for (int p = 0; p < pairs; ++p) {
      const std::size_t pa = static_cast<std::size_t>(p) * k;
      const std::size_t pb = static_cast<std::size_t>(pairs + p) * k;
      const double prod = dot_f64(&logits.data[pa], &logits.data[pb],
                                  static_cast<std::size_t>(k));
      if (opts.match_feature_dot) {
        fa[static_cast<std::size_t>(p) * n + i] = logits.data[pa] * fscale;
        fb[static_cast<std::size_t>(p) * n + i] = logits.data[pb] * fscale;
      }
      const double delta = prod - mean[static_cast<std::size_t>(p)];
      mean[static_cast<std::size_t>(p)] += delta / static_cast<double>(i + 1);
      m2[static_cast<std::size_t>(p)] = std::fma(delta, prod - mean[static_cast<std::size_t>(p)],
                                                 m2[static_cast<std::size_t>(p)]);
    }
  }
  for (int p = 0; p < pairs; ++p) {
    if (opts.match_feature_dot) {
      // The literal scaled-feature dot product, bit-identical to gram().
      result[static_cast<std::size_t>(p)].value =
          dot_f64(&fa[static_cast<std::size_t>(p) * n], &fb[static_cast<std::size_t>(p) * n],
                  static_cast<std::size_t>(n));
    } else {
      result[static_cast<std::size_t>(p)].value = mean[static_cast<std::size_t>(p)];
    }
    result[static_cast<std::size_t>(p)].variance =
        n > 1 ? m2[static_cast<std::size_t>(p)] / static_cast<double>(n - 1) : 0.0;
  }
  return result;
}

/// Finite-sample kernel estimate for one pair.
inline KernelEstimate estimate_kernel(const ArchitectureSpec& arch, const Tensor& x,
                                      const Tensor& x2, std::int64_t n, std::uint64_t base_seed,
                                      const KernelOptions& opts = {}) {
  Shape bshape = x.shape;
  bshape.insert(bshape.begin(), 1);
  return estimate_kernel_pairs(arch, x.reshaped(bshape), x2.reshaped(bshape), n, base_seed,
                               opts)[0];
}

/// G = Phi Phi^T in double precision, computed symmetrically.
inline std::vector<double> gram(const FeatureMatrix& fm) {
  const std::int64_t N = fm.num_examples;
  std::vector<double> g(static_cast<std::size_t>(N) * static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t j = i; j < N; ++j) {
      const double v = dot_f64(fm.row(i), fm.row(j), static_cast<std::size_t>(fm.num_features));
      g[static_cast<std::size_t>(i) * N + j] = v;
      g[static_cast<std::size_t>(j) * N + i] = v;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Closed-form oracles.

/// Expected product of two linear responses with iid zero-mean weights of
/// standard deviation sigma: sigma^2 <x, x2>.
inline double analytic_linear_kernel(double sigma, const Tensor& x, const Tensor& x2) {
  if (x.numel() != x2.numel()) {
    throw shape_error("analytic_linear_kernel: size mismatch");
  }
  return sigma * sigma * dot_f64(x.ptr(), x2.ptr(), x.numel());
}

/// Expected product of two one-hidden-layer ReLU network outputs (width H,
/// Gaussian weights, no biases): the degree-1 arc-cosine form
/// sigma_v^2 H sigma_w^2 (|x||x2|/2pi)(sin t + (pi - t) cos t).
inline double analytic_relu_one_hidden_kernel(int hidden, double sigma_w, double sigma_v,
                                              const Tensor& x, const Tensor& x2) {
  if (x.numel() != x2.numel()) {
    throw shape_error("analytic_relu_one_hidden_kernel: size mismatch");
  }
  const double nx = std::sqrt(dot_f64(x.ptr(), x.ptr(), x.numel()));
  const double ny = std::sqrt(dot_f64(x2.ptr(), x2.ptr(), x2.numel()));
  if (nx == 0.0 || ny == 0.0) {
    throw angle_error("analytic_relu_one_hidden_kernel: zero-norm input, angle undefined");
  }
  double c = dot_f64(x.ptr(), x2.ptr(), x.numel()) / (nx * ny);
  c = std::min(1.0, std::max(-1.0, c));
  const double theta = std::acos(c);
  constexpr double kPi = 3.14159265358979323846;
  return sigma_v * sigma_v * static_cast<double>(hidden) * sigma_w * sigma_w *
         (nx * ny / (2.0 * kPi)) * (std::sin(theta) + (kPi - theta) * std::cos(theta));
}

}  // namespace nrf
