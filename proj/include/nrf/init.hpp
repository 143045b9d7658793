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

// Weight initialization schemes.
//
// All draws come from the caller's RngStream in a documented, stable order
// (row-major element order; orthogonal schemes fill their Gaussian seed
// matrix row-major before factorization), so a weight tensor is a pure
// function of (scheme, shape, stream state).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nrf/errors.hpp"
#include "nrf/rng.hpp"
#include "nrf/tensor.hpp"

namespace nrf {

enum class InitKind {
  glorot_normal,
  glorot_uniform,
  he_normal,
  he_uniform,
  lecun_normal,
  orthogonal,
  delta_orthogonal,
  plain_normal,
  zeros,
};

struct InitScheme {
  InitKind kind = InitKind::glorot_normal;
  /// Normal-family draws are truncated to two standard deviations and
  /// rescaled so the requested variance is preserved exactly.
  bool truncated = true;
  /// Standard deviation for plain_normal; ignored elsewhere.
  double sigma = 1.0;
};

inline const char* init_kind_name(InitKind k) {
  switch (k) {
    case InitKind::glorot_normal: return "glorot_normal";
    case InitKind::glorot_uniform: return "glorot_uniform";
    case InitKind::he_normal: return "he_normal";
    case InitKind::he_uniform: return "he_uniform";
    case InitKind::lecun_normal: return "lecun_normal";
    case InitKind::orthogonal: return "orthogonal";
    case InitKind::delta_orthogonal: return "delta_orthogonal";
    case InitKind::plain_normal: return "plain_normal";
    case InitKind::zeros: return "zeros";
  }
  return "unknown";
}

inline InitKind parse_init_kind(const std::string& name) {
  for (InitKind k : {InitKind::glorot_normal, InitKind::glorot_uniform, InitKind::he_normal,
                     InitKind::he_uniform, InitKind::lecun_normal, InitKind::orthogonal,
                     InitKind::delta_orthogonal, InitKind::plain_normal, InitKind::zeros}) {
    if (name == init_kind_name(k)) return k;
  }
  throw config_error("unknown init scheme '" + name + "'");
}

struct FanPair {
  std::int64_t fan_in = 0;
  std::int64_t fan_out = 0;
};

/// Fan convention: dense (in, out) uses the axes directly; conv
/// (kh, kw, cin, cout) multiplies the receptive field into both fans.
inline FanPair compute_fans(const Shape& shape) {
  if (shape.size() == 2) {
    return {shape[0], shape[1]};
  }
  if (shape.size() == 4) {
    const std::int64_t rf = static_cast<std::int64_t>(shape[0]) * shape[1];
    return {rf * shape[2], rf * shape[3]};
  }
  throw shape_error("fan computation needs a 2-D or 4-D shape, got " + shape_to_string(shape));
}

namespace detail {

/// Thin Householder QR of an m x n (m >= n) iid standard normal matrix,
/// returning Q with orthonormal columns, column-major, sign-fixed so the
/// factorization has a positive R diagonal.  With the sign fix the result is
/// Haar distributed over matrices with orthonormal columns.
inline std::vector<double> haar_orthonormal_colmajor(int m, int n, RngStream& stream) {
  std::vector<double> a(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      a[static_cast<std::size_t>(j) * m + i] = stream.normal();
    }
  }
  std::vector<double> beta(static_cast<std::size_t>(n), 0.0);
  std::vector<double> rdiag(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    double* col = a.data() + static_cast<std::size_t>(j) * m;
    double norm2 = 0.0;
    for (int i = j; i < m; ++i) norm2 += col[i] * col[i];
    const double norm = std::sqrt(norm2);
    if (norm == 0.0) {
      rdiag[static_cast<std::size_t>(j)] = 0.0;
      continue;
    }
    const double alpha = col[j] >= 0.0 ? -norm : norm;
    rdiag[static_cast<std::size_t>(j)] = alpha;
    col[j] -= alpha;
    double vnorm2 = 0.0;
    for (int i = j; i < m; ++i) vnorm2 += col[i] * col[i];
    if (vnorm2 == 0.0) continue;
    beta[static_cast<std::size_t>(j)] = 2.0 / vnorm2;
    for (int c = j + 1; c < n; ++c) {
      double* rhs = a.data() + static_cast<std::size_t>(c) * m;
      double s = 0.0;
      for (int i = j; i < m; ++i) s += col[i] * rhs[i];
      s *= beta[static_cast<std::size_t>(j)];
      for (int i = j; i < m; ++i) rhs[i] -= s * col[i];
    }
  }
  // Accumulate the thin Q by applying reflectors to I in reverse order.
  std::vector<double> q(static_cast<std::size_t>(m) * n, 0.0);
  for (int j = 0; j < n; ++j) q[static_cast<std::size_t>(j) * m + j] = 1.0;
  for (int j = n - 1; j >= 0; --j) {
    const double b = beta[static_cast<std::size_t>(j)];
    if (b == 0.0) continue;
    const double* v = a.data() + static_cast<std::size_t>(j) * m;
    for (int c = j; c < n; ++c) {
      double* qc = q.data() + static_cast<std::size_t>(c) * m;
      double s = 0.0;
      for (int i = j; i < m; ++i) s += v[i] * qc[i];
      s *= b;
      for (int i = j; i < m; ++i) qc[i] -= s * v[i];
    }
  }
  for (int j = 0; j < n; ++j) {
    if (rdiag[static_cast<std::size_t>(j)] < 0.0) {
      double* qc = q.data() + static_cast<std::size_t>(j) * m;
      for (int i = 0; i < m; ++i) qc[i] = -qc[i];
    }
  }
  return q;
}

/// Row-major rows x cols matrix whose smaller dimension is orthonormal.
inline std::vector<double> orthogonal_matrix(int rows, int cols, RngStream& stream) {
  const bool tall = rows >= cols;
  const int m = tall ? rows : cols;
  const int n = tall ? cols : rows;
  const std::vector<double> q = haar_orthonormal_colmajor(m, n, stream);
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = tall ? q[static_cast<std::size_t>(j) * m + i]
                            : q[static_cast<std::size_t>(i) * m + j];
      w[static_cast<std::size_t>(i) * cols + j] = v;
    }
  }
  return w;
}

}  // namespace detail

/// Draw a weight tensor.  Fans are passed explicitly so callers with exotic
/// layouts stay in control; see compute_fans for the standard convention.
inline Tensor init_tensor(const InitScheme& scheme, const Shape& shape, std::int64_t fan_in,
                          std::int64_t fan_out, RngStream& stream) {
  if (shape.empty()) throw shape_error("init_tensor: empty shape");
  Tensor out{shape};
  const std::size_t n = out.numel();

  const auto require_fans = [&](bool need_out) {
    if (fan_in <= 0 || (need_out && fan_out <= 0)) {
      throw fan_error(std::string("degenerate fan for ") + init_kind_name(scheme.kind) +
                      ": fan_in=" + std::to_string(fan_in) +
                      " fan_out=" + std::to_string(fan_out));
    }
  };
  const auto fill_normal = [&](double sd) {
    if (scheme.truncated) {
      for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = static_cast<float>(stream.truncated_normal() * sd);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        out.data[i] = static_cast<float>(stream.normal() * sd);
      }
    }
  };
  const auto fill_uniform = [&](double limit) {
    for (std::size_t i = 0; i < n; ++i) {
      out.data[i] = static_cast<float>(stream.uniform(-limit, limit));
    }
  };

  switch (scheme.kind) {
    case InitKind::glorot_normal:
      require_fans(true);
      fill_normal(std::sqrt(2.0 / static_cast<double>(fan_in + fan_out)));
      break;
    case InitKind::glorot_uniform:
      require_fans(true);
      fill_uniform(std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
      break;
    case InitKind::he_normal:
      require_fans(false);
      fill_normal(std::sqrt(2.0 / static_cast<double>(fan_in)));
      break;
    case InitKind::he_uniform:
      require_fans(false);
      fill_uniform(std::sqrt(6.0 / static_cast<double>(fan_in)));
      break;
    case InitKind::lecun_normal:
      require_fans(false);
      fill_normal(std::sqrt(1.0 / static_cast<double>(fan_in)));
      break;
    case InitKind::plain_normal:
      fill_normal(scheme.sigma);
      break;
    case InitKind::zeros:
      break;
    case InitKind::orthogonal: {
      if (shape.size() != 2) {
        throw shape_error("orthogonal init needs a 2-D shape, got " + shape_to_string(shape));
      }
      const std::vector<double> w = detail::orthogonal_matrix(shape[0], shape[1], stream);
      for (std::size_t i = 0; i < n; ++i) out.data[i] = static_cast<float>(w[i]);
      break;
    }
    case InitKind::delta_orthogonal: {
      if (shape.size() != 4) {
        throw shape_error("delta_orthogonal init needs a 4-D conv shape, got " +
                          shape_to_string(shape));
      }
      const int kh = shape[0], kw = shape[1], cin = shape[2], cout = shape[3];
      if (kh % 2 == 0 || kw % 2 == 0) {
        throw shape_error("delta_orthogonal needs odd spatial dims, got " +
                          shape_to_string(shape));
      }
      const std::vector<double> h = detail::orthogonal_matrix(cin, cout, stream);
      const int cy = kh / 2, cx = kw / 2;
      const std::size_t base =
          (static_cast<std::size_t>(cy) * kw + cx) * static_cast<std::size_t>(cin) * cout;
      for (int ci = 0; ci < cin; ++ci) {
        for (int co = 0; co < cout; ++co) {
          out.data[base + static_cast<std::size_t>(ci) * cout + co] =
              static_cast<float>(h[static_cast<std::size_t>(ci) * cout + co]);
        }
      }
      break;
    }
  }
  return out;
}

/// Overload using the standard fan convention for the given shape.
inline Tensor init_tensor(const InitScheme& scheme, const Shape& shape, RngStream& stream) {
  switch (scheme.kind) {
    case InitKind::plain_normal:
    case InitKind::zeros:
    case InitKind::orthogonal:
    case InitKind::delta_orthogonal:
      return init_tensor(scheme, shape, 1, 1, stream);
    default: {
      const FanPair f = compute_fans(shape);
      return init_tensor(scheme, shape, f.fan_in, f.fan_out, stream);
    }
  }
}

}  // namespace nrf
