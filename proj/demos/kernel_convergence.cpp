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

// Shows the sampled kernel estimate closing in on its closed form as the
// number of networks grows: a single hidden relu layer with unit normal
// weights converges to the first-order arc-cosine kernel.

#include <cmath>
#include <cstdio>

#include "nrf/nrf.hpp"

int main() {
  const int dim = 64;
  nrf::Tensor x({1, dim}), y({1, dim});
  auto stream = nrf::derive_stream(7, 0);
  for (int i = 0; i < dim; ++i) {
    x.data[static_cast<std::size_t>(i)] = static_cast<float>(stream.normal());
    y.data[static_cast<std::size_t>(i)] =
        static_cast<float>(0.8 * x.data[static_cast<std::size_t>(i)] + 0.5 * stream.normal());
  }

  nrf::ArchitectureSpec arch;
  arch.preset = nrf::PresetKind::one_hidden;
  arch.activation = nrf::Activation::make(nrf::ActKind::relu);
  nrf::InitScheme unit;
  unit.kind = nrf::InitKind::plain_normal;
  unit.sigma = 1.0;
  unit.truncated = false;
  arch.init = unit;

  double nx = 0.0, ny = 0.0, xy = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double a = x.data[static_cast<std::size_t>(i)];
    const double b = y.data[static_cast<std::size_t>(i)];
    nx += a * a;
    ny += b * b;
    xy += a * b;
  }
  const double pi = std::acos(-1.0);
  const double g = std::acos(xy / std::sqrt(nx * ny));
  const double closed = 128.0 * std::sqrt(nx * ny) / (2.0 * pi) *
                        (std::sin(g) + (pi - g) * std::cos(g));

  std::printf("closed form: %.4f\n", closed);
  std::printf("%8s  %12s  %10s  %10s\n", "n", "estimate", "std err", "rel err");
  for (std::int64_t n : {16, 64, 256, 1024, 4096, 16384}) {
    const nrf::KernelEstimate e = nrf::estimate_kernel(arch, x, y, n, 42);
    std::printf("%8lld  %12.4f  %10.4f  %9.2f%%\n", static_cast<long long>(n), e.value,
                std::sqrt(e.variance / static_cast<double>(e.n)),
                100.0 * std::fabs(e.value - closed) / closed);
  }
  return 0;
}
