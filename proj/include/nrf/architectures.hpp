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

// Architecture presets and their resolution into concrete layer chains.
//
// A spec is a small declarative value (preset + multipliers + activation +
// init scheme); resolve_architecture turns it into a shape-checked layer
// tree for a given input shape.  Specs serialize to canonical JSON with all
// fields present, which is what feature-cache manifests embed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "nrf/activations.hpp"
#include "nrf/errors.hpp"
#include "nrf/init.hpp"
#include "nrf/layers.hpp"

namespace nrf {

enum class PresetKind {
  linear,
  one_hidden,
  mlp,
  cnn_s,
  cnn_m,
  lenet,
  resnet18_cifar,
  resnet_deeper,
};

inline const char* preset_name(PresetKind p) {
  switch (p) {
    case PresetKind::linear: return "linear";
    case PresetKind::one_hidden: return "one_hidden";
    case PresetKind::mlp: return "mlp";
    case PresetKind::cnn_s: return "cnn_s";
    case PresetKind::cnn_m: return "cnn_m";
    case PresetKind::lenet: return "lenet";
    case PresetKind::resnet18_cifar: return "resnet18_cifar";
    case PresetKind::resnet_deeper: return "resnet_deeper";
  }
  return "unknown";
}

inline PresetKind parse_preset(const std::string& name) {
  for (PresetKind p :
       {PresetKind::linear, PresetKind::one_hidden, PresetKind::mlp, PresetKind::cnn_s,
        PresetKind::cnn_m, PresetKind::lenet, PresetKind::resnet18_cifar,
        PresetKind::resnet_deeper}) {
    if (name == preset_name(p)) return p;
  }
  throw config_error("unknown preset '" + name + "'");
}

inline bool is_resnet(PresetKind p) {
  return p == PresetKind::resnet18_cifar || p == PresetKind::resnet_deeper;
}

struct ArchitectureSpec {
  PresetKind preset = PresetKind::mlp;
  double width_multiplier = 1.0;
  /// MLP only: replicates the hidden-layer block (two dense+activation).
  int depth_multiplier = 1;
  /// resnet_deeper only: basic blocks per stage (resnet18_cifar uses 2).
  int resnet_depth = 3;
  /// Unset means the preset default (relu).
  std::optional<Activation> activation;
  /// Unset means the preset default: he_normal for resnet presets,
  /// glorot_normal otherwise.
  std::optional<InitScheme> init;
  /// Resnet presets only; unset means true there, false elsewhere.
  std::optional<bool> use_batchnorm;
  /// Resnet presets only; unset means true.
  std::optional<bool> use_skip;
  int output_dim = 1;

  Activation resolved_activation() const {
    return activation ? *activation : Activation::make(ActKind::relu);
  }
  InitScheme resolved_init() const {
    if (init) return *init;
    InitScheme s;
    s.kind = is_resnet(preset) ? InitKind::he_normal : InitKind::glorot_normal;
    return s;
  }
  bool resolved_use_batchnorm() const {
    return use_batchnorm ? *use_batchnorm : is_resnet(preset);
  }
  bool resolved_use_skip() const { return use_skip ? *use_skip : true; }

  /// Hidden width / filter count under the width multiplier: nearest
  /// integer, at least 1.
  int scaled(int base) const {
    const long w = std::lround(static_cast<double>(base) * width_multiplier);
    return static_cast<int>(w < 1 ? 1 : w);
  }

  void validate() const {
    if (width_multiplier <= 0.0) {
      throw config_error("width_multiplier must be positive");
    }
    if (depth_multiplier < 1) throw config_error("depth_multiplier must be >= 1");
    if (resnet_depth < 1) throw config_error("resnet_depth must be >= 1");
    if (output_dim < 1) throw config_error("output_dim must be >= 1");
    if (depth_multiplier != 1 && preset != PresetKind::mlp) {
      throw config_error("depth_multiplier is only defined for the mlp preset");
    }
    if (!is_resnet(preset)) {
      if (use_batchnorm && *use_batchnorm) {
        throw config_error(std::string("use_batchnorm is not available for preset ") +
                           preset_name(preset));
      }
      if (use_skip && !*use_skip) {
        throw config_error(std::string("use_skip only applies to resnet presets, not ") +
                           preset_name(preset));
      }
    }
  }

  /// Compact identifier for report rows, e.g. "cnn_s_w0.5" or
  /// "resnet18_cifar_nobn".
  std::string label() const {
    std::string s = preset_name(preset);
    if (preset == PresetKind::resnet_deeper) s += std::to_string(resnet_depth);
    if (width_multiplier != 1.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "_w%g", width_multiplier);
      s += buf;
    }
    if (depth_multiplier != 1) s += "_d" + std::to_string(depth_multiplier);
    if (is_resnet(preset)) {
      if (!resolved_use_batchnorm()) s += "_nobn";
      if (!resolved_use_skip()) s += "_noskip";
    }
    if (output_dim != 1) s += "_k" + std::to_string(output_dim);
    return s;
  }
};

inline std::string init_label(const InitScheme& s) {
  std::string out = init_kind_name(s.kind);
  if (s.kind == InitKind::plain_normal) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "(%g)", s.sigma);
    out += buf;
  }
  if (!s.truncated &&
      (s.kind == InitKind::glorot_normal || s.kind == InitKind::he_normal ||
       s.kind == InitKind::lecun_normal || s.kind == InitKind::plain_normal)) {
    out += "_untruncated";
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON serialization.  Output is canonical: every field present, keys sorted
// by nlohmann's object ordering.  Parsing is strict: unknown keys are errors.

inline nlohmann::json activation_to_json(const Activation& a) {
  return {{"kind", act_kind_name(a.kind)}, {"slope", a.slope}, {"gain", a.gain}};
}

inline Activation activation_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed = {"kind", "slope", "gain"};
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw config_error("unknown key '" + key + "' in activation");
  }
  if (!j.contains("kind")) throw config_error("activation requires 'kind'");
  const ActKind kind = parse_act_kind(j.at("kind").get<std::string>());
  const double slope = j.contains("slope") ? j.at("slope").get<double>() : -1.0;
  const double gain = j.contains("gain") ? j.at("gain").get<double>() : 0.0;
  return Activation::make(kind, slope, gain);
}

inline nlohmann::json init_to_json(const InitScheme& s) {
  return {{"kind", init_kind_name(s.kind)}, {"truncated", s.truncated}, {"sigma", s.sigma}};
}

inline InitScheme init_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed = {"kind", "truncated", "sigma"};
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw config_error("unknown key '" + key + "' in init scheme");
  }
  if (!j.contains("kind")) throw config_error("init scheme requires 'kind'");
  InitScheme s;
  s.kind = parse_init_kind(j.at("kind").get<std::string>());
  if (j.contains("truncated")) s.truncated = j.at("truncated").get<bool>();
  if (j.contains("sigma")) {
    s.sigma = j.at("sigma").get<double>();
    if (s.sigma <= 0.0) throw config_error("init sigma must be positive");
  }
  return s;
}

inline nlohmann::json arch_to_json(const ArchitectureSpec& a) {
  return {{"preset", preset_name(a.preset)},
          {"width_multiplier", a.width_multiplier},
          {"depth_multiplier", a.depth_multiplier},
          {"resnet_depth", a.resnet_depth},
          {"activation", activation_to_json(a.resolved_activation())},
          {"init", init_to_json(a.resolved_init())},
          {"use_batchnorm", a.resolved_use_batchnorm()},
          {"use_skip", a.resolved_use_skip()},
          {"output_dim", a.output_dim}};
}

inline ArchitectureSpec arch_from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed = {
      "preset",        "width_multiplier", "depth_multiplier", "resnet_depth", "activation",
      "init",          "use_batchnorm",    "use_skip",         "output_dim"};
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw config_error("unknown key '" + key + "' in architecture");
  }
  if (!j.contains("preset")) throw config_error("architecture requires 'preset'");
  ArchitectureSpec a;
  a.preset = parse_preset(j.at("preset").get<std::string>());
  if (j.contains("width_multiplier")) a.width_multiplier = j.at("width_multiplier").get<double>();
  if (j.contains("depth_multiplier")) a.depth_multiplier = j.at("depth_multiplier").get<int>();
  if (j.contains("resnet_depth")) a.resnet_depth = j.at("resnet_depth").get<int>();
  if (j.contains("activation")) a.activation = activation_from_json(j.at("activation"));
  if (j.contains("init")) a.init = init_from_json(j.at("init"));
  if (j.contains("use_batchnorm")) a.use_batchnorm = j.at("use_batchnorm").get<bool>();
  if (j.contains("use_skip")) a.use_skip = j.at("use_skip").get<bool>();
  if (j.contains("output_dim")) a.output_dim = j.at("output_dim").get<int>();
  a.validate();
  return a;
}

/// Canonical single-line JSON used in cache manifests.
inline std::string arch_to_manifest_string(const ArchitectureSpec& a) {
  return arch_to_json(a).dump();
}

// ---------------------------------------------------------------------------
// Preset layer chains.

namespace detail {

inline void push_act(std::vector<Layer>& out, const ArchitectureSpec& a, int& act_idx) {
  out.push_back(activation_layer("act" + std::to_string(++act_idx), a.resolved_activation()));
}

inline std::vector<Layer> build_resnet_chain(const ArchitectureSpec& a, int blocks_per_stage) {
  const bool bn = a.resolved_use_batchnorm();
  const bool skip = a.resolved_use_skip();
  std::vector<Layer> out;
  out.push_back(conv2d_layer("stem.conv", a.scaled(64), 3, 3, 1));
  if (bn) out.push_back(batch_norm_layer("stem.bn"));
  out.push_back(activation_layer("stem.act", a.resolved_activation()));

  int in_c = a.scaled(64);
  const int stage_base[4] = {64, 128, 256, 512};
  for (int s = 0; s < 4; ++s) {
    const int c = a.scaled(stage_base[s]);
    for (int b = 0; b < blocks_per_stage; ++b) {
      const int stride = (s > 0 && b == 0) ? 2 : 1;
      const std::string base = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      std::vector<Layer> body;
      body.push_back(conv2d_layer(base + ".conv1", c, 3, 3, stride));
      if (bn) body.push_back(batch_norm_layer(base + ".bn1"));
      body.push_back(activation_layer(base + ".act1", a.resolved_activation()));
      body.push_back(conv2d_layer(base + ".conv2", c, 3, 3, 1));
      if (bn) body.push_back(batch_norm_layer(base + ".bn2"));

      std::vector<Layer> shortcut;
      if (stride != 1 || in_c != c) {
        shortcut.push_back(conv2d_layer(base + ".down.conv", c, 1, 1, stride));
        if (bn) shortcut.push_back(batch_norm_layer(base + ".down.bn"));
      }
      Layer res = residual_layer(base, std::move(body), std::move(shortcut));
      res.skip = skip;
      out.push_back(std::move(res));
      out.push_back(activation_layer(base + ".act2", a.resolved_activation()));
      in_c = c;
    }
  }
  out.push_back(global_avg_pool_layer("gap"));
  out.push_back(dense_layer("head", a.output_dim));
  return out;
}

}  // namespace detail

/// Layer chain for a spec, independent of input shape.
inline std::vector<Layer> preset_layers(const ArchitectureSpec& a) {
  a.validate();
  std::vector<Layer> out;
  int act_idx = 0;
  switch (a.preset) {
    case PresetKind::linear:
      out.push_back(flatten_layer("flatten"));
      out.push_back(dense_layer("head", a.output_dim));
      break;
    case PresetKind::one_hidden:
      out.push_back(flatten_layer("flatten"));
      out.push_back(dense_layer("dense1", a.scaled(128)));
      detail::push_act(out, a, act_idx);
      out.push_back(dense_layer("head", a.output_dim));
      break;
    case PresetKind::mlp: {
      out.push_back(flatten_layer("flatten"));
      int d = 0;
      for (int rep = 0; rep < a.depth_multiplier; ++rep) {
        for (int i = 0; i < 2; ++i) {
          out.push_back(dense_layer("dense" + std::to_string(++d), a.scaled(128)));
          detail::push_act(out, a, act_idx);
        }
      }
      out.push_back(dense_layer("head", a.output_dim));
      break;
    }
    case PresetKind::cnn_s:
      out.push_back(conv2d_layer("conv1", a.scaled(32), 5, 5));
      detail::push_act(out, a, act_idx);
      out.push_back(pool_layer("pool1", LayerKind::max_pool, 2, 2));
      out.push_back(conv2d_layer("conv2", a.scaled(64), 5, 5));
      detail::push_act(out, a, act_idx);
      out.push_back(pool_layer("pool2", LayerKind::max_pool, 2, 2));
      out.push_back(flatten_layer("flatten"));
      out.push_back(dense_layer("dense1", a.scaled(512)));
      detail::push_act(out, a, act_idx);
      out.push_back(dense_layer("head", a.output_dim));
      break;
    case PresetKind::cnn_m: {
      const int filters[4] = {32, 64, 64, 32};
      for (int i = 0; i < 4; ++i) {
        out.push_back(conv2d_layer("conv" + std::to_string(i + 1), a.scaled(filters[i]), 5, 5));
        detail::push_act(out, a, act_idx);
        if (i < 2) {
          out.push_back(pool_layer("pool" + std::to_string(i + 1), LayerKind::max_pool, 2, 2));
        }
      }
      out.push_back(flatten_layer("flatten"));
      out.push_back(dense_layer("dense1", a.scaled(512)));
      detail::push_act(out, a, act_idx);
      out.push_back(dense_layer("head", a.output_dim));
      break;
    }
    case PresetKind::lenet:
      out.push_back(conv2d_layer("conv1", a.scaled(6), 5, 5));
      detail::push_act(out, a, act_idx);
      out.push_back(pool_layer("pool1", LayerKind::avg_pool, 2, 2));
      out.push_back(conv2d_layer("conv2", a.scaled(16), 5, 5));
      detail::push_act(out, a, act_idx);
      out.push_back(pool_layer("pool2", LayerKind::avg_pool, 2, 2));
      out.push_back(flatten_layer("flatten"));
      out.push_back(dense_layer("dense1", a.scaled(120)));
      detail::push_act(out, a, act_idx);
      out.push_back(dense_layer("dense2", a.scaled(84)));
      detail::push_act(out, a, act_idx);
      out.push_back(dense_layer("head", a.output_dim));
      break;
    case PresetKind::resnet18_cifar:
      out = detail::build_resnet_chain(a, 2);
      break;
    case PresetKind::resnet_deeper:
      out = detail::build_resnet_chain(a, a.resnet_depth);
      break;
  }
  return out;
}

/// A spec resolved against a concrete example shape: shape-checked layers
/// plus the slot table build_network will fill.
struct ResolvedNet {
  ArchitectureSpec arch;
  Shape input_shape;   // one example, e.g. (32, 32, 3)
  Shape output_shape;  // (output_dim)
  std::vector<Layer> layers;
  std::vector<SlotInfo> slots;
};

inline ResolvedNet resolve_architecture(const ArchitectureSpec& arch, const Shape& example_shape) {
  ResolvedNet net;
  net.arch = arch;
  net.input_shape = example_shape;
  net.layers = preset_layers(arch);
  net.output_shape = resolve_layers(net.layers, example_shape, net.slots);
  if (net.output_shape != Shape{arch.output_dim}) {
    throw shape_error("preset resolution produced output " + shape_to_string(net.output_shape) +
                      ", expected (" + std::to_string(arch.output_dim) + ")");
  }
  return net;
}

namespace detail {

inline int count_bn_main(const std::vector<Layer>& layers) {
  int n = 0;
  for (const Layer& l : layers) {
    if (l.kind == LayerKind::batch_norm) ++n;
    if (l.kind == LayerKind::residual) n += count_bn_main(l.body);
  }
  return n;
}

}  // namespace detail

/// Number of BatchNorm layers on the straight-through path (residual
/// shortcuts excluded).  Drives the predicted near-identity scale factor
/// (1+eps)^(-L/2) at default initialization.
inline int count_main_path_batch_norms(const ResolvedNet& net) {
  return detail::count_bn_main(net.layers);
}

}  // namespace nrf
