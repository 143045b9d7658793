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

#include <cmath>
#include <cstdio>
#include <string>

#include "nrf/errors.hpp"

namespace nrf {

enum class ActKind {
  identity,
  relu,
  leaky_relu,
  elu,
  sigmoid,
  tanh,
  scaled_leaky_relu,
};

inline const char* act_kind_name(ActKind k) {
  switch (k) {
    case ActKind::identity: return "identity";
    case ActKind::relu: return "relu";
    case ActKind::leaky_relu: return "leaky_relu";
    case ActKind::elu: return "elu";
    case ActKind::sigmoid: return "sigmoid";
    case ActKind::tanh: return "tanh";
    case ActKind::scaled_leaky_relu: return "scaled_leaky_relu";
  }
  return "unknown";
}

inline ActKind parse_act_kind(const std::string& name) {
  for (ActKind k : {ActKind::identity, ActKind::relu, ActKind::leaky_relu, ActKind::elu,
                    ActKind::sigmoid, ActKind::tanh, ActKind::scaled_leaky_relu}) {
    if (name == act_kind_name(k)) return k;
  }
  throw config_error("unknown activation '" + name + "'");
}

/// Gain that keeps E[f(Z)^2] = 1 for Z ~ N(0,1) under a leaky rectifier with
/// the given negative slope.
inline double variance_preserving_gain(double slope) {
  return std::sqrt(2.0 / (1.0 + slope * slope));
}

struct Activation {
  ActKind kind = ActKind::relu;
  /// Negative-side slope for the leaky rectifiers.
  double slope = 0.0;
  /// Output gain for scaled_leaky_relu; <= 0 means derive the
  /// variance-preserving value from the slope.
  double gain = 0.0;

  static Activation make(ActKind kind, double slope = -1.0, double gain = 0.0) {
    Activation a;
    a.kind = kind;
    if (slope < 0.0) {
      slope = kind == ActKind::leaky_relu ? 0.1 : kind == ActKind::scaled_leaky_relu ? 0.3 : 0.0;
    }
    if (slope >= 1.0) {
      throw config_error("activation slope must lie in [0, 1), got " + std::to_string(slope));
    }
    a.slope = slope;
    if (kind == ActKind::scaled_leaky_relu) {
      a.gain = gain > 0.0 ? gain : variance_preserving_gain(slope);
    } else {
      a.gain = 1.0;
    }
    return a;
  }

  float operator()(float x) const {
    switch (kind) {
      case ActKind::identity:
        return x;
      case ActKind::relu:
        return x > 0.0f ? x : 0.0f;
      case ActKind::leaky_relu:
        return x > 0.0f ? x : static_cast<float>(slope) * x;
      case ActKind::elu:
        return x > 0.0f ? x : std::expm1(x);
      case ActKind::sigmoid: {
        if (x >= 0.0f) {
          return 1.0f / (1.0f + std::exp(-x));
        }
        const float e = std::exp(x);
        return e / (1.0f + e);
      }
      case ActKind::tanh:
        return std::tanh(x);
      case ActKind::scaled_leaky_relu: {
        const float g = static_cast<float>(gain);
        return x > 0.0f ? g * x : g * static_cast<float>(slope) * x;
      }
    }
    return x;
  }

  /// Compact label for reports, e.g. "leaky_relu(0.1)".
  std::string label() const {
    if (kind == ActKind::leaky_relu || kind == ActKind::scaled_leaky_relu) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%s(%g)", act_kind_name(kind), slope);
      return buf;
    }
    return act_kind_name(kind);
  }
};

}  // namespace nrf
