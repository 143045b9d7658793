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

#include <stdexcept>
#include <string>

namespace nrf {

/// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer dimension mismatches and invalid shapes.
struct shape_error : error {
  explicit shape_error(const std::string& what) : error(what) {}
};

/// Zero or negative fan passed to a fan-scaled initializer.
struct fan_error : error {
  explicit fan_error(const std::string& what) : error(what) {}
};

/// Non-finite values produced where the contract requires finite output.
struct numeric_error : error {
  explicit numeric_error(const std::string& what) : error(what) {}
};

/// Malformed or truncated on-disk data (bad magic, wrong length, ...).
struct format_error : error {
  explicit format_error(const std::string& what) : error(what) {}
};

/// Feature cache whose dataset fingerprint does not match the loaded data.
struct stale_cache_error : format_error {
  explicit stale_cache_error(const std::string& what) : format_error(what) {}
};

/// Invalid experiment configuration (unknown keys, bad grid values, ...).
struct config_error : error {
  explicit config_error(const std::string& what) : error(what) {}
};

/// Cosine similarity requested for a zero-norm weight row.
struct cosine_error : error {
  explicit cosine_error(const std::string& what) : error(what) {}
};

/// Feature extraction requested from a network whose head is not scalar.
struct head_dim_error : shape_error {
  explicit head_dim_error(const std::string& what) : shape_error(what) {}
};

/// Closed-form kernel evaluated at a zero-norm input (angle undefined).
struct angle_error : error {
  explicit angle_error(const std::string& what) : error(what) {}
};

/// Filesystem failures (missing file, short write, ...).
struct io_error : error {
  explicit io_error(const std::string& what) : error(what) {}
};

}  // namespace nrf
