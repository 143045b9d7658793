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

// Umbrella header: the whole feature laboratory.

#include "nrf/activations.hpp"    // IWYU pragma: export
#include "nrf/architectures.hpp"  // IWYU pragma: export
#include "nrf/config.hpp"         // IWYU pragma: export
#include "nrf/datasets.hpp"       // IWYU pragma: export
#include "nrf/errors.hpp"         // IWYU pragma: export
#include "nrf/feature_cache.hpp"  // IWYU pragma: export
#include "nrf/features.hpp"       // IWYU pragma: export
#include "nrf/gemm.hpp"           // IWYU pragma: export
#include "nrf/harness.hpp"        // IWYU pragma: export
#include "nrf/init.hpp"           // IWYU pragma: export
#include "nrf/layers.hpp"         // IWYU pragma: export
#include "nrf/network.hpp"        // IWYU pragma: export
#include "nrf/probe.hpp"          // IWYU pragma: export
#include "nrf/report.hpp"         // IWYU pragma: export
#include "nrf/rng.hpp"            // IWYU pragma: export
#include "nrf/tensor.hpp"         // IWYU pragma: export

namespace nrf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nrf
