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

// End-to-end walk on synthetic data: sample Gaussian blobs, extract random
// network features at a few widths, and fit a linear probe on each. Accuracy
// climbing with the feature count is the whole library in one page.

#include <cstdio>
#include <vector>

#include "nrf/nrf.hpp"

int main() {
  const auto [train, test] = nrf::synth_blobs(5, 200, 32, 1.6, 11);

  nrf::ArchitectureSpec arch;
  arch.preset = nrf::PresetKind::mlp;
  arch.width_multiplier = 0.25;
  arch.activation = nrf::Activation::make(nrf::ActKind::relu);

  nrf::OptSettings probe_opt;
  probe_opt.standardize = true;

  std::printf("%8s  %10s  %10s\n", "n", "train acc", "test acc");
  for (std::int64_t n : {16, 64, 256, 1024}) {
    nrf::FeatureMatrix ftr = nrf::extract_features(arch, train.images, n, 99);
    nrf::FeatureMatrix fte = nrf::extract_features(arch, test.images, n, 99);
    nrf::ProbeModel probe = nrf::train_probe(ftr, train.labels, 1e-2, probe_opt);
    const double tr = nrf::accuracy(probe, ftr, train.labels);
    const double te = nrf::accuracy(probe, fte, test.labels);
    std::printf("%8lld  %9.1f%%  %9.1f%%\n", static_cast<long long>(n),
                100.0 * tr, 100.0 * te);
  }
  return 0;
}
