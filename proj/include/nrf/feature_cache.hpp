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

// Binary serialization for feature matrices and probe models.
//
// Feature cache ("NRF1"), all integers little-endian:
//   offset 0   4 bytes   magic "NRF1"
//          4   u32       format version (1)
//          8   u64       N, number of examples (rows)
//         16   u64       n, number of features (columns)
//         24   u64       base_seed
//         32   u8        scaled flag (1 = values divided by sqrt(n))
//         33   3 bytes   reserved, zero
//         36   u32       L, length of the architecture manifest
//         40   L bytes   canonical architecture JSON (single line, UTF-8)
//       40+L   u64       dataset fingerprint (0 = unknown)
//       48+L   N*n f32   row-major feature values
// The header is the seed manifest: (architecture, base_seed, n, scaled)
// regenerates the values bit-exactly.
//
// Probe model ("PRB1"):
//   magic "PRB1", u32 version (1), u32 k_classes, u64 n, f64 l2,
//   k*n f64 row-major weights, k f64 biases.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nrf/architectures.hpp"
#include "nrf/errors.hpp"
#include "nrf/features.hpp"
#include "nrf/probe.hpp"

namespace nrf {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace detail {

inline void put_bytes(std::ofstream& out, const void* p, std::size_t len) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(len));
}

template <typename T>
inline void put_scalar(std::ofstream& out, T v) {
  put_bytes(out, &v, sizeof(v));
}

struct ByteReader {
  std::vector<unsigned char> bytes;
  std::size_t pos = 0;
  std::string label;

  void need(std::size_t len, const char* what) const {
    if (pos + len > bytes.size()) {
      throw format_error(label + ": truncated while reading " + std::string(what) +
                         " (have " + std::to_string(bytes.size()) + " bytes, need " +
                         std::to_string(pos + len) + ")");
    }
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t len, const char* what) {
    need(len, what);
    std::string s(reinterpret_cast<const char*>(bytes.data()) + pos, len);
    pos += len;
    return s;
  }
};

inline ByteReader open_reader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  ByteReader r;
  r.label = path;
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  r.bytes.resize(static_cast<std::size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(r.bytes.data()), len);
  if (!in) throw io_error("short read on " + path);
  return r;
}

}  // namespace detail

inline void save_features(const FeatureMatrix& fm, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  detail::put_bytes(out, "NRF1", 4);
  detail::put_scalar<std::uint32_t>(out, 1);
  detail::put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(fm.num_examples));
  detail::put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(fm.num_features));
  detail::put_scalar<std::uint64_t>(out, fm.base_seed);
  const unsigned char flags[4] = {static_cast<unsigned char>(fm.scaled ? 1 : 0), 0, 0, 0};
  detail::put_bytes(out, flags, 4);
  const std::string manifest = arch_to_manifest_string(fm.arch);
  detail::put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(manifest.size()));
  detail::put_bytes(out, manifest.data(), manifest.size());
  detail::put_scalar<std::uint64_t>(out, fm.dataset_fingerprint);
  detail::put_bytes(out, fm.values.data(), fm.values.size() * sizeof(float));
  if (!out) throw io_error("write failed on " + path);
}

/// Load a feature cache.  A nonzero expected_fingerprint must match the
/// stored one; mismatch means the cache was written for different data.
inline FeatureMatrix load_features(const std::string& path,
                                   std::uint64_t expected_fingerprint = 0) {
  detail::ByteReader r = detail::open_reader(path);
  if (r.get_string(4, "magic") != "NRF1") throw format_error(path + ": bad magic");
  const std::uint32_t version = r.get<std::uint32_t>("version");
  if (version != 1) {
    throw format_error(path + ": unsupported version " + std::to_string(version));
  }
  FeatureMatrix fm;
  fm.num_examples = static_cast<std::int64_t>(r.get<std::uint64_t>("N"));
  fm.num_features = static_cast<std::int64_t>(r.get<std::uint64_t>("n"));
  fm.base_seed = r.get<std::uint64_t>("base_seed");
  r.need(4, "flags");
  fm.scaled = r.bytes[r.pos] != 0;
  r.pos += 4;
  const std::uint32_t manifest_len = r.get<std::uint32_t>("manifest length");
  const std::string manifest = r.get_string(manifest_len, "architecture manifest");
  try {
    fm.arch = arch_from_json(nlohmann::json::parse(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": unparsable architecture manifest: " + e.what());
  }
  fm.dataset_fingerprint = r.get<std::uint64_t>("dataset fingerprint");

  const std::size_t count =
      static_cast<std::size_t>(fm.num_examples) * static_cast<std::size_t>(fm.num_features);
  r.need(count * sizeof(float), "feature values");
  if (r.bytes.size() - r.pos != count * sizeof(float)) {
    throw format_error(path + ": expected " + std::to_string(r.pos + count * sizeof(float)) +
                       " bytes total, got " + std::to_string(r.bytes.size()));
  }
  fm.values.resize(count);
  std::memcpy(fm.values.data(), r.bytes.data() + r.pos, count * sizeof(float));

  if (expected_fingerprint != 0 && fm.dataset_fingerprint != expected_fingerprint) {
    throw stale_cache_error(path + ": cache fingerprint " +
                            std::to_string(fm.dataset_fingerprint) +
                            " does not match the loaded dataset (" +
                            std::to_string(expected_fingerprint) + ")");
  }
  return fm;
}

inline void save_probe(const ProbeModel& model, const std::string& path) {
  ProbeModel folded;
  const ProbeModel* m = &model;
  if (!model.feat_mean.empty()) {
    // Fold the standardization transform into equivalent raw-space weights:
    // W((x - mu) * s) + b  ==  (W * s) x + (b - W (mu * s)).
    folded = model;
    folded.feat_mean.clear();
    folded.feat_inv_std.clear();
    for (int c = 0; c < model.k_classes; ++c) {
      double shift = 0.0;
      for (std::int64_t j = 0; j < model.n_features; ++j) {
        const std::size_t idx = static_cast<std::size_t>(c) * model.n_features +
                                static_cast<std::size_t>(j);
        const double ws = model.w[idx] * model.feat_inv_std[static_cast<std::size_t>(j)];
        folded.w[idx] = ws;
        shift = std::fma(ws, model.feat_mean[static_cast<std::size_t>(j)], shift);
      }
      folded.b[static_cast<std::size_t>(c)] -= shift;
    }
    m = &folded;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  detail::put_bytes(out, "PRB1", 4);
  detail::put_scalar<std::uint32_t>(out, 1);
  detail::put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(m->k_classes));
  detail::put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(m->n_features));
  detail::put_scalar<double>(out, m->l2);
  detail::put_bytes(out, m->w.data(), m->w.size() * sizeof(double));
  detail::put_bytes(out, m->b.data(), m->b.size() * sizeof(double));
  if (!out) throw io_error("write failed on " + path);
}

inline ProbeModel load_probe(const std::string& path) {
  detail::ByteReader r = detail::open_reader(path);
  if (r.get_string(4, "magic") != "PRB1") throw format_error(path + ": bad magic");
  const std::uint32_t version = r.get<std::uint32_t>("version");
  if (version != 1) {
    throw format_error(path + ": unsupported version " + std::to_string(version));
  }
  ProbeModel m;
  m.k_classes = static_cast<int>(r.get<std::uint32_t>("k_classes"));
  m.n_features = static_cast<std::int64_t>(r.get<std::uint64_t>("n"));
  m.l2 = r.get<double>("l2");
  const std::size_t wlen =
      static_cast<std::size_t>(m.k_classes) * static_cast<std::size_t>(m.n_features);
  r.need(wlen * sizeof(double) + static_cast<std::size_t>(m.k_classes) * sizeof(double),
         "weights");
  m.w.resize(wlen);
  std::memcpy(m.w.data(), r.bytes.data() + r.pos, wlen * sizeof(double));
  r.pos += wlen * sizeof(double);
  m.b.resize(static_cast<std::size_t>(m.k_classes));
  std::memcpy(m.b.data(), r.bytes.data() + r.pos, m.b.size() * sizeof(double));
  r.pos += m.b.size() * sizeof(double);
  if (r.pos != r.bytes.size()) {
    throw format_error(path + ": " + std::to_string(r.bytes.size() - r.pos) +
                       " trailing bytes");
  }
  return m;
}

}  // namespace nrf
