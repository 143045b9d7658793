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

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "nrf/errors.hpp"

namespace nrf {

using Shape = std::vector<int>;

inline std::string shape_to_string(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ')';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw shape_error("negative dimension in shape " + shape_to_string(s));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

/// Dense row-major float tensor.  Image batches use NHWC layout.
struct Tensor {
  Shape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0f) {}
  Tensor(Shape s, std::vector<float> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
      throw shape_error("tensor data size " + std::to_string(data.size()) +
                        " does not match shape " + shape_to_string(shape));
    }
  }

  std::size_t numel() const { return data.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

  float* ptr() { return data.data(); }
  const float* ptr() const { return data.data(); }

  /// Reinterpret with a new shape of identical element count.
  Tensor reshaped(Shape s) const {
    if (shape_numel(s) != numel()) {
      throw shape_error("cannot reshape " + shape_to_string(shape) + " to " + shape_to_string(s));
    }
    Tensor out;
    out.shape = std::move(s);
    out.data = data;
    return out;
  }

  // Convenience accessors for tests and small call sites.  Hot loops index
  // raw pointers directly.
  float& at(std::initializer_list<int> idx) {
    return data[flat_index(idx)];
  }
  float at(std::initializer_list<int> idx) const {
    return data[flat_index(idx)];
  }

 private:
  std::size_t flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank()) {
      throw shape_error("index rank " + std::to_string(idx.size()) + " vs tensor rank " +
                        std::to_string(rank()));
    }
    std::size_t flat = 0;
    int i = 0;
    for (int v : idx) {
      const int d = shape[static_cast<std::size_t>(i)];
      if (v < 0 || v >= d) {
        throw shape_error("index " + std::to_string(v) + " out of range for dim " +
                          std::to_string(d));
      }
      flat = flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(v);
      ++i;
    }
    return flat;
  }
};

/// Number of examples in a batch tensor (first axis).
inline int batch_size(const Tensor& t) {
  if (t.rank() < 1) throw shape_error("batch tensor must have at least one axis");
  return t.dim(0);
}

/// Shape of one example within a batch tensor.
inline Shape example_shape(const Tensor& t) {
  if (t.rank() < 2) throw shape_error("batch tensor must have at least two axes");
  return Shape(t.shape.begin() + 1, t.shape.end());
}

}  // namespace nrf
