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

// Materialization of randomly initialized networks and the forward pass.
//
// All weights of one network come from a single random stream
// (base_seed, stream_index), drawn in slot order (depth-first through
// residual bodies, then shortcuts).  Biases are zero and BatchNorm holds
// identity statistics, so neither consumes draws; toggling BatchNorm on or
// off therefore leaves every other tensor's draws unchanged.

#include <cstdint>
#include <string>
#include <vector>

#include "nrf/architectures.hpp"
#include "nrf/errors.hpp"
#include "nrf/init.hpp"
#include "nrf/layers.hpp"
#include "nrf/rng.hpp"
#include "nrf/tensor.hpp"

namespace nrf {

struct NetworkInstance {
  std::uint64_t base_seed = 0;
  std::uint64_t stream_index = 0;
  std::vector<LayerParams> params;
  /// Human-readable notes about init-scheme fallbacks, one per affected slot.
  std::vector<std::string> provenance;
};

namespace detail {

/// Orthogonal-family schemes degrade on shapes where they are undefined or
/// degenerate; everything else passes through.  Notes record the substitution.
inline InitScheme effective_scheme(const InitScheme& scheme, const SlotInfo& slot,
                                   std::vector<std::string>& notes) {
  InitScheme s = scheme;
  const bool is_dense = slot.kernel_shape.size() == 2;
  if (s.kind == InitKind::delta_orthogonal && is_dense) {
    s.kind = InitKind::orthogonal;
    notes.push_back(slot.layer_name + ": delta_orthogonal is conv-only, used orthogonal");
  }
  const bool orthogonal_family =
      s.kind == InitKind::orthogonal || s.kind == InitKind::delta_orthogonal;
  if (orthogonal_family && slot.kernel_shape.back() == 1) {
    s.kind = InitKind::lecun_normal;
    notes.push_back(slot.layer_name + ": orthogonal init on a 1-column matrix, used lecun_normal");
  }
  return s;
}

inline Tensor draw_kernel(const InitScheme& scheme, const SlotInfo& slot, RngStream& stream) {
  const Shape& shape = slot.kernel_shape;
  if (scheme.kind == InitKind::orthogonal && shape.size() == 4) {
    // Convolution kernels orthogonalize as (kh*kw*cin, cout) matrices.
    const Shape flat = {shape[0] * shape[1] * shape[2], shape[3]};
    Tensor t = init_tensor(scheme, flat, slot.fan_in, slot.fan_out, stream);
    return t.reshaped(shape);
  }
  return init_tensor(scheme, shape, slot.fan_in, slot.fan_out, stream);
}

}  // namespace detail

inline NetworkInstance build_network(const ResolvedNet& net, std::uint64_t base_seed,
                                     std::uint64_t stream_index) {
  NetworkInstance inst;
  inst.base_seed = base_seed;
  inst.stream_index = stream_index;
  inst.params.resize(net.slots.size());
  RngStream stream = derive_stream(base_seed, stream_index);
  const InitScheme arch_scheme = net.arch.resolved_init();

  for (std::size_t i = 0; i < net.slots.size(); ++i) {
    const SlotInfo& slot = net.slots[i];
    LayerParams& p = inst.params[i];
    if (slot.kind == LayerKind::batch_norm) {
      const Shape cshape = {slot.channels};
      p.bn_scale = Tensor(cshape, std::vector<float>(static_cast<std::size_t>(slot.channels), 1.0f));
      p.bn_shift = Tensor(cshape);
      p.bn_mean = Tensor(cshape);
      p.bn_var = Tensor(cshape, std::vector<float>(static_cast<std::size_t>(slot.channels), 1.0f));
      continue;
    }
    const InitScheme scheme = detail::effective_scheme(arch_scheme, slot, inst.provenance);
    p.kernel = detail::draw_kernel(scheme, slot, stream);
    p.bias = Tensor({slot.bias_len});
  }
  return inst;
}

/// Logits for a batch: (N, output_dim).  Shape-checked against the resolved
/// input.  Non-finite outputs raise a numeric_error naming the layer and the
/// offending example.
inline Tensor forward(const ResolvedNet& net, const NetworkInstance& inst, const Tensor& batch,
                      Workspace& ws) {
  if (batch.rank() < 2 || example_shape(batch) != net.input_shape) {
    throw shape_error("forward: batch example shape " +
                      shape_to_string(batch.rank() >= 2 ? example_shape(batch) : batch.shape) +
                      " does not match network input " + shape_to_string(net.input_shape));
  }
  Slab x;
  x.eshape = net.input_shape;
  x.count = batch.dim(0);
  x.data = batch.data;
  Slab out = run_layers(net.layers, inst.params, std::move(x), ws, /*check=*/false);

  const int k = net.arch.output_dim;
  for (int e = 0; e < out.count; ++e) {
    for (int j = 0; j < k; ++j) {
      if (!std::isfinite(out.data[static_cast<std::size_t>(e) * k + j])) {
        // Re-run the offending example with per-layer checks to name the
        // first layer that produced a non-finite value.
        Slab one;
        one.eshape = net.input_shape;
        one.count = 1;
        const std::size_t len = shape_numel(net.input_shape);
        one.data.assign(batch.data.begin() + static_cast<std::size_t>(e) * len,
                        batch.data.begin() + static_cast<std::size_t>(e + 1) * len);
        try {
          run_layers(net.layers, inst.params, std::move(one), ws, /*check=*/true);
          throw numeric_error("non-finite logit");
        } catch (const numeric_error& err) {
          throw numeric_error(std::string(err.what()) + " [example " + std::to_string(e) +
                              ", base_seed=" + std::to_string(inst.base_seed) +
                              ", stream_index=" + std::to_string(inst.stream_index) + "]");
        }
      }
    }
  }

  Tensor logits({out.count, k});
  logits.data = std::move(out.data);
  return logits;
}

/// Single-example convenience wrapper.
inline std::vector<float> forward_one(const ResolvedNet& net, const NetworkInstance& inst,
                                      const Tensor& example, Workspace& ws) {
  Shape bshape = example.shape;
  bshape.insert(bshape.begin(), 1);
  Tensor batch = example.reshaped(bshape);
  return forward(net, inst, batch, ws).data;
}

}  // namespace nrf
