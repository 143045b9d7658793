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

// Deterministic dataset loading, normalization, and subsampling.
//
// Loaders are pure functions of the files on disk; every split carries a
// content fingerprint so cached feature files can detect the dataset they
// were extracted from.  All randomized operations (synthetic blobs, balanced
// subsampling) draw from auxiliary streams in the top half of the stream
// index space, so they can never collide with feature-column streams.

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nrf/errors.hpp"
#include "nrf/rng.hpp"
#include "nrf/tensor.hpp"

namespace nrf {

struct DatasetSplit {
  std::string name;
  Tensor images;  // N x H x W x C, or N x D for flat data
  std::vector<int> labels;
  std::vector<std::string> class_names;
  std::uint64_t fingerprint = 0;
};

// Auxiliary stream indices (all above kAuxStreamBase; see rng.hpp).
inline constexpr std::uint64_t kSubsampleStream = kAuxStreamBase + 2;
inline constexpr std::uint64_t kBlobMeansStream = kAuxStreamBase + 16;
inline constexpr std::uint64_t kBlobTrainStream = kAuxStreamBase + 17;
inline constexpr std::uint64_t kBlobTestStream = kAuxStreamBase + 18;

namespace detail {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline void fnv1a_byte(std::uint64_t& h, unsigned char b) {
  h ^= b;
  h *= kFnvPrime;
}

inline void fnv1a_u32(std::uint64_t& h, std::uint32_t v) {
  fnv1a_byte(h, static_cast<unsigned char>(v));
  fnv1a_byte(h, static_cast<unsigned char>(v >> 8));
  fnv1a_byte(h, static_cast<unsigned char>(v >> 16));
  fnv1a_byte(h, static_cast<unsigned char>(v >> 24));
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
  if (!in) throw io_error("short read on " + path.string());
  return bytes;
}

/// Reads a file that may or may not be gzip-compressed; looks for `name`
/// first, then `name.gz`.  zlib's transparent mode handles both encodings.
inline std::vector<unsigned char> read_maybe_gz(const std::filesystem::path& dir,
                                                const std::string& name) {
  std::filesystem::path path = dir / name;
  if (!std::filesystem::exists(path)) {
    const std::filesystem::path gz = dir / (name + ".gz");
    if (!std::filesystem::exists(gz)) {
      throw io_error("missing " + path.string() + " (also tried .gz)");
    }
    path = gz;
  }
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw io_error("cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  for (;;) {
    const int got = gzread(f, buf, sizeof(buf));
    if (got < 0) {
      gzclose(f);
      throw format_error("decompression error in " + path.string());
    }
    if (got == 0) break;
    bytes.insert(bytes.end(), buf, buf + got);
  }
  gzclose(f);
  return bytes;
}

inline std::uint32_t read_u32_be(const unsigned char* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline constexpr float kInv255 = 1.0f / 255.0f;

}  // namespace detail

/// Content hash over shape, pixel bits, and labels.  Class names are
/// deliberately excluded: renaming classes does not change the data.
inline std::uint64_t fingerprint_split(const Tensor& images, const std::vector<int>& labels) {
  std::uint64_t h = detail::kFnvOffset;
  detail::fnv1a_u32(h, static_cast<std::uint32_t>(images.rank()));
  for (int d : images.shape) detail::fnv1a_u32(h, static_cast<std::uint32_t>(d));
  for (float v : images.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    detail::fnv1a_u32(h, bits);
  }
  for (int y : labels) detail::fnv1a_u32(h, static_cast<std::uint32_t>(y));
  return h;
}

namespace detail {

inline void parse_cifar_records(const std::vector<unsigned char>& bytes,
                                const std::string& file_label, std::size_t record_len,
                                std::size_t label_offset, DatasetSplit& out,
                                std::size_t& cursor_example) {
  if (bytes.size() % record_len != 0) {
    const std::size_t records = bytes.size() / record_len;
    throw format_error(file_label + ": expected a multiple of " + std::to_string(record_len) +
                       " bytes, got " + std::to_string(bytes.size()) + " (next multiple " +
                       std::to_string((records + 1) * record_len) + ")");
  }
  const std::size_t records = bytes.size() / record_len;
  const std::size_t pixel_offset = record_len - 3072;
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec = bytes.data() + r * record_len;
    out.labels[cursor_example] = rec[label_offset];
    float* img = out.images.ptr() + cursor_example * 3072;
    // Planar R,G,B to interleaved HWC.
    const unsigned char* px = rec + pixel_offset;
    for (int hw = 0; hw < 1024; ++hw) {
      img[hw * 3 + 0] = static_cast<float>(px[hw]) * kInv255;
      img[hw * 3 + 1] = static_cast<float>(px[1024 + hw]) * kInv255;
      img[hw * 3 + 2] = static_cast<float>(px[2048 + hw]) * kInv255;
    }
    ++cursor_example;
  }
}

inline DatasetSplit make_cifar_split(std::string name, int num,
                                     std::vector<std::string> class_names) {
  DatasetSplit s;
  s.name = std::move(name);
  s.images = Tensor({num, 32, 32, 3});
  s.labels.assign(static_cast<std::size_t>(num), 0);
  s.class_names = std::move(class_names);
  return s;
}

}  // namespace detail

/// Standard binary-version batch files: 1 label byte + 3072 pixel bytes
/// (red, green, blue planes) per record; pixels scaled to [0, 1].
inline std::pair<DatasetSplit, DatasetSplit> load_cifar10(const std::string& dir) {
  const std::vector<std::string> names = {"airplane", "automobile", "bird",  "cat",  "deer",
                                          "dog",      "frog",       "horse", "ship", "truck"};
  DatasetSplit train = detail::make_cifar_split("cifar10", 50000, names);
  DatasetSplit test = detail::make_cifar_split("cifar10", 10000, names);

  const std::filesystem::path base(dir);
  std::size_t cursor = 0;
  for (int b = 1; b <= 5; ++b) {
    const std::string fname = "data_batch_" + std::to_string(b) + ".bin";
    const auto bytes = detail::read_file_bytes(base / fname);
    if (bytes.size() != 10000u * 3073u) {
      throw format_error(fname + ": expected " + std::to_string(10000u * 3073u) +
                         " bytes, got " + std::to_string(bytes.size()));
    }
    detail::parse_cifar_records(bytes, fname, 3073, 0, train, cursor);
  }
  const auto bytes = detail::read_file_bytes(base / "test_batch.bin");
  if (bytes.size() != 10000u * 3073u) {
    throw format_error("test_batch.bin: expected " + std::to_string(10000u * 3073u) +
                       " bytes, got " + std::to_string(bytes.size()));
  }
  std::size_t test_cursor = 0;
  detail::parse_cifar_records(bytes, "test_batch.bin", 3073, 0, test, test_cursor);

  train.fingerprint = fingerprint_split(train.images, train.labels);
  test.fingerprint = fingerprint_split(test.images, test.labels);
  return {std::move(train), std::move(test)};
}

namespace detail {

inline std::vector<std::string> cifar100_fine_names() {
  return {"apple",       "aquarium_fish", "baby",         "bear",       "beaver",
          "bed",         "bee",           "beetle",       "bicycle",    "bottle",
          "bowl",        "boy",           "bridge",       "bus",        "butterfly",
          "camel",       "can",           "castle",       "caterpillar", "cattle",
          "chair",       "chimpanzee",    "clock",        "cloud",      "cockroach",
          "couch",       "crab",          "crocodile",    "cup",        "dinosaur",
          "dolphin",     "elephant",      "flatfish",     "forest",     "fox",
          "girl",        "hamster",       "house",        "kangaroo",   "keyboard",
          "lamp",        "lawn_mower",    "leopard",      "lion",       "lizard",
          "lobster",     "man",           "maple_tree",   "motorcycle", "mountain",
          "mouse",       "mushroom",      "oak_tree",     "orange",     "orchid",
          "otter",       "palm_tree",     "pear",         "pickup_truck", "pine_tree",
          "plain",       "plate",         "poppy",        "porcupine",  "possum",
          "rabbit",      "raccoon",       "ray",          "road",       "rocket",
          "rose",        "sea",           "seal",         "shark",      "shrew",
          "skunk",       "skyscraper",    "snail",        "snake",      "spider",
          "squirrel",    "streetcar",     "sunflower",    "sweet_pepper", "table",
          "tank",        "telephone",     "television",   "tiger",      "tractor",
          "train",       "trout",         "tulip",        "turtle",     "wardrobe",
          "whale",       "willow_tree",   "wolf",         "woman",      "worm"};
}

inline std::vector<std::string> cifar100_coarse_names() {
  return {"aquatic_mammals",
          "fish",
          "flowers",
          "food_containers",
          "fruit_and_vegetables",
          "household_electrical_devices",
          "household_furniture",
          "insects",
          "large_carnivores",
          "large_man-made_outdoor_things",
          "large_natural_outdoor_scenes",
          "large_omnivores_and_herbivores",
          "medium_mammals",
          "non-insect_invertebrates",
          "people",
          "reptiles",
          "small_mammals",
          "trees",
          "vehicles_1",
          "vehicles_2"};
}

}  // namespace detail

/// Binary-version files train.bin / test.bin with records of 1 coarse label
/// byte + 1 fine label byte + 3072 pixel bytes.  `fine` selects which label
/// set the split exposes.
inline std::pair<DatasetSplit, DatasetSplit> load_cifar100(const std::string& dir,
                                                           bool fine = true) {
  const std::string name = fine ? "cifar100" : "cifar100_coarse";
  const auto class_names =
      fine ? detail::cifar100_fine_names() : detail::cifar100_coarse_names();
  const std::size_t label_offset = fine ? 1 : 0;

  DatasetSplit train = detail::make_cifar_split(name, 50000, class_names);
  DatasetSplit test = detail::make_cifar_split(name, 10000, class_names);

  const std::filesystem::path base(dir);
  const auto train_bytes = detail::read_file_bytes(base / "train.bin");
  if (train_bytes.size() != 50000u * 3074u) {
    throw format_error("train.bin: expected " + std::to_string(50000u * 3074u) +
                       " bytes, got " + std::to_string(train_bytes.size()));
  }
  std::size_t cursor = 0;
  detail::parse_cifar_records(train_bytes, "train.bin", 3074, label_offset, train, cursor);
  const auto test_bytes = detail::read_file_bytes(base / "test.bin");
  if (test_bytes.size() != 10000u * 3074u) {
    throw format_error("test.bin: expected " + std::to_string(10000u * 3074u) + " bytes, got " +
                       std::to_string(test_bytes.size()));
  }
  cursor = 0;
  detail::parse_cifar_records(test_bytes, "test.bin", 3074, label_offset, test, cursor);

  train.fingerprint = fingerprint_split(train.images, train.labels);
  test.fingerprint = fingerprint_split(test.images, test.labels);
  return {std::move(train), std::move(test)};
}

namespace detail {

inline Tensor parse_idx_images(const std::vector<unsigned char>& bytes,
                               const std::string& file_label) {
  if (bytes.size() < 16) throw format_error(file_label + ": truncated IDX header");
  const std::uint32_t magic = read_u32_be(bytes.data());
  if (magic != 0x00000803u) {
    throw format_error(file_label + ": bad image magic " + std::to_string(magic));
  }
  const int n = static_cast<int>(read_u32_be(bytes.data() + 4));
  const int rows = static_cast<int>(read_u32_be(bytes.data() + 8));
  const int cols = static_cast<int>(read_u32_be(bytes.data() + 12));
  const std::size_t expected =
      16 + static_cast<std::size_t>(n) * static_cast<std::size_t>(rows) *
               static_cast<std::size_t>(cols);
  if (bytes.size() != expected) {
    throw format_error(file_label + ": expected " + std::to_string(expected) + " bytes, got " +
                       std::to_string(bytes.size()));
  }
  Tensor images({n, rows, cols, 1});
  const unsigned char* px = bytes.data() + 16;
  for (std::size_t i = 0; i < images.numel(); ++i) {
    images.data[i] = static_cast<float>(px[i]) * kInv255;
  }
  return images;
}

inline std::vector<int> parse_idx_labels(const std::vector<unsigned char>& bytes,
                                         const std::string& file_label, int k_classes) {
  if (bytes.size() < 8) throw format_error(file_label + ": truncated IDX header");
  const std::uint32_t magic = read_u32_be(bytes.data());
  if (magic != 0x00000801u) {
    throw format_error(file_label + ": bad label magic " + std::to_string(magic));
  }
  const std::size_t n = read_u32_be(bytes.data() + 4);
  if (bytes.size() != 8 + n) {
    throw format_error(file_label + ": expected " + std::to_string(8 + n) + " bytes, got " +
                       std::to_string(bytes.size()));
  }
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = bytes[8 + i];
    if (y >= k_classes) {
      throw format_error(file_label + ": label " + std::to_string(y) + " out of range");
    }
    labels[i] = y;
  }
  return labels;
}

}  // namespace detail

/// IDX-format digit images (optionally gzip-compressed), big-endian headers,
/// pixels scaled to [0, 1].
inline std::pair<DatasetSplit, DatasetSplit> load_mnist_idx(const std::string& dir) {
  const std::filesystem::path base(dir);
  DatasetSplit train, test;
  train.name = test.name = "mnist";
  train.class_names = test.class_names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};

  train.images = detail::parse_idx_images(detail::read_maybe_gz(base, "train-images-idx3-ubyte"),
                                          "train-images-idx3-ubyte");
  train.labels = detail::parse_idx_labels(detail::read_maybe_gz(base, "train-labels-idx1-ubyte"),
                                          "train-labels-idx1-ubyte", 10);
  test.images = detail::parse_idx_images(detail::read_maybe_gz(base, "t10k-images-idx3-ubyte"),
                                         "t10k-images-idx3-ubyte");
  test.labels = detail::parse_idx_labels(detail::read_maybe_gz(base, "t10k-labels-idx1-ubyte"),
                                         "t10k-labels-idx1-ubyte", 10);

  if (batch_size(train.images) != static_cast<int>(train.labels.size()) ||
      batch_size(test.images) != static_cast<int>(test.labels.size())) {
    throw format_error("image/label counts disagree");
  }
  train.fingerprint = fingerprint_split(train.images, train.labels);
  test.fingerprint = fingerprint_split(test.images, test.labels);
  return {std::move(train), std::move(test)};
}

/// Gaussian blobs with unit covariance and class means at
/// separation * (random unit direction).  Train and test each hold per_class
/// examples per class, ordered by class.  A non-empty image_shape reshapes
/// examples to a pseudo-image (its element count must equal dim).
inline std::pair<DatasetSplit, DatasetSplit> synth_blobs(int k_classes, int per_class, int dim,
                                                         double separation, std::uint64_t seed,
                                                         const Shape& image_shape = {}) {
  if (dim < 1) throw config_error("synth_blobs: dim must be >= 1");
  if (k_classes < 1 || per_class < 1) {
    throw config_error("synth_blobs: k_classes and per_class must be >= 1");
  }
  if (!image_shape.empty() && shape_numel(image_shape) != static_cast<std::size_t>(dim)) {
    throw shape_error("synth_blobs: image shape " + shape_to_string(image_shape) +
                      " does not hold " + std::to_string(dim) + " values");
  }

  std::vector<double> means(static_cast<std::size_t>(k_classes) * dim);
  RngStream mean_stream = derive_stream(seed, kBlobMeansStream);
  for (int c = 0; c < k_classes; ++c) {
    double* mu = means.data() + static_cast<std::size_t>(c) * dim;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int j = 0; j < dim; ++j) {
        mu[j] = mean_stream.normal();
        norm = std::fma(mu[j], mu[j], norm);
      }
      norm = std::sqrt(norm);
    } while (norm == 0.0);
    for (int j = 0; j < dim; ++j) mu[j] = mu[j] / norm * separation;
  }

  auto make_split = [&](std::uint64_t stream_index) {
    DatasetSplit s;
    s.name = "blobs";
    const int num = k_classes * per_class;
    Shape shape = {num, dim};
    if (!image_shape.empty()) {
      shape = image_shape;
      shape.insert(shape.begin(), num);
    }
    s.images = Tensor(shape);
    s.labels.resize(static_cast<std::size_t>(num));
    for (int c = 0; c < k_classes; ++c) {
      s.class_names.push_back("blob_" + std::to_string(c));
    }
    RngStream stream = derive_stream(seed, stream_index);
    for (int c = 0; c < k_classes; ++c) {
      const double* mu = means.data() + static_cast<std::size_t>(c) * dim;
      for (int i = 0; i < per_class; ++i) {
        const int e = c * per_class + i;
        s.labels[static_cast<std::size_t>(e)] = c;
        float* row = s.images.ptr() + static_cast<std::size_t>(e) * dim;
        for (int j = 0; j < dim; ++j) {
          row[j] = static_cast<float>(mu[j] + stream.normal());
        }
      }
    }
    s.fingerprint = fingerprint_split(s.images, s.labels);
    return s;
  };
  return {make_split(kBlobTrainStream), make_split(kBlobTestStream)};
}

enum class NormalizeMode { none, unit_range, per_channel_standardize };

inline const char* normalize_mode_name(NormalizeMode m) {
  switch (m) {
    case NormalizeMode::none: return "none";
    case NormalizeMode::unit_range: return "unit_range";
    case NormalizeMode::per_channel_standardize: return "per_channel_standardize";
  }
  return "?";
}

inline NormalizeMode parse_normalize_mode(const std::string& s) {
  if (s == "none") return NormalizeMode::none;
  if (s == "unit_range") return NormalizeMode::unit_range;
  if (s == "per_channel_standardize") return NormalizeMode::per_channel_standardize;
  throw config_error("unknown normalize mode '" + s + "'");
}

/// Statistics computed on a reference (train) split and applied elsewhere.
struct NormalizeStats {
  NormalizeMode mode = NormalizeMode::none;
  double range_lo = 0.0, range_hi = 1.0;  // unit_range
  std::vector<double> channel_mean;       // per_channel_standardize
  std::vector<double> channel_inv_std;
  /// Channels whose standard deviation hit the epsilon floor.
  std::vector<int> degenerate_channels;
};

inline NormalizeStats compute_normalize_stats(const DatasetSplit& split, NormalizeMode mode) {
  NormalizeStats st;
  st.mode = mode;
  if (mode == NormalizeMode::none) return st;
  if (mode == NormalizeMode::unit_range) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (float v : split.images.data) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
    }
    st.range_lo = lo;
    st.range_hi = hi;
    if (!(hi > lo)) st.degenerate_channels.push_back(-1);
    return st;
  }
  const std::size_t channels =
      static_cast<std::size_t>(split.images.dim(split.images.rank() - 1));
  const std::size_t per_image = shape_numel(example_shape(split.images));
  const std::size_t spatial = per_image / channels;
  const std::size_t count = static_cast<std::size_t>(batch_size(split.images)) * spatial;
  st.channel_mean.assign(channels, 0.0);
  st.channel_inv_std.assign(channels, 0.0);
  std::vector<double> var(channels, 0.0);
  const float* p = split.images.ptr();
  for (std::size_t i = 0; i < split.images.numel(); ++i) {
    st.channel_mean[i % channels] += p[i];
  }
  for (double& m : st.channel_mean) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < split.images.numel(); ++i) {
    const double d = p[i] - st.channel_mean[i % channels];
    var[i % channels] = std::fma(d, d, var[i % channels]);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(count));
    if (sd < 1e-8) st.degenerate_channels.push_back(static_cast<int>(c));
    st.channel_inv_std[c] = 1.0 / std::max(sd, 1e-8);
  }
  return st;
}

inline DatasetSplit apply_normalize(const DatasetSplit& split, const NormalizeStats& st) {
  DatasetSplit out = split;
  if (st.mode == NormalizeMode::none) return out;
  float* p = out.images.ptr();
  if (st.mode == NormalizeMode::unit_range) {
    const double span = st.range_hi - st.range_lo;
    const double inv = span > 0.0 ? 1.0 / span : 1.0;
    for (std::size_t i = 0; i < out.images.numel(); ++i) {
      p[i] = static_cast<float>((p[i] - st.range_lo) * inv);
    }
  } else {
    const std::size_t channels = st.channel_mean.size();
    for (std::size_t i = 0; i < out.images.numel(); ++i) {
      p[i] = static_cast<float>((p[i] - st.channel_mean[i % channels]) *
                                st.channel_inv_std[i % channels]);
    }
  }
  out.fingerprint = fingerprint_split(out.images, out.labels);
  return out;
}

/// Normalize one split with statistics computed from itself.
inline DatasetSplit normalize(const DatasetSplit& split, NormalizeMode mode) {
  return apply_normalize(split, compute_normalize_stats(split, mode));
}

/// Normalize train and test together; statistics come from train only.
inline std::pair<DatasetSplit, DatasetSplit> normalize_pair(const DatasetSplit& train,
                                                            const DatasetSplit& test,
                                                            NormalizeMode mode,
                                                            NormalizeStats* stats_out = nullptr) {
  const NormalizeStats st = compute_normalize_stats(train, mode);
  if (stats_out != nullptr) *stats_out = st;
  return {apply_normalize(train, st), apply_normalize(test, st)};
}

/// Exactly per_class examples of each class, chosen by a seeded shuffle of
/// each class's index list; output keeps the original example order.
inline DatasetSplit subsample(const DatasetSplit& split, int per_class, std::uint64_t seed) {
  const int k = static_cast<int>(split.class_names.size());
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < split.labels.size(); ++i) {
    by_class[static_cast<std::size_t>(split.labels[i])].push_back(static_cast<int>(i));
  }
  RngStream stream = derive_stream(seed, kSubsampleStream);
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(k) * per_class);
  for (int c = 0; c < k; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (static_cast<int>(idx.size()) < per_class) {
      throw config_error("subsample: class " + std::to_string(c) + " has " +
                         std::to_string(idx.size()) + " examples, need " +
                         std::to_string(per_class));
    }
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(stream.next_below(i));
      std::swap(idx[i - 1], idx[j]);
    }
    selected.insert(selected.end(), idx.begin(), idx.begin() + per_class);
  }
  std::sort(selected.begin(), selected.end());

  DatasetSplit out;
  out.name = split.name;
  out.class_names = split.class_names;
  const std::size_t per_image = shape_numel(example_shape(split.images));
  Shape shape = split.images.shape;
  shape[0] = static_cast<int>(selected.size());
  out.images = Tensor(shape);
  out.labels.resize(selected.size());
  for (std::size_t r = 0; r < selected.size(); ++r) {
    const std::size_t src = static_cast<std::size_t>(selected[r]);
    std::copy(split.images.data.begin() + src * per_image,
              split.images.data.begin() + (src + 1) * per_image,
              out.images.data.begin() + r * per_image);
    out.labels[r] = split.labels[src];
  }
  out.fingerprint = fingerprint_split(out.images, out.labels);
  return out;
}

}  // namespace nrf
