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

// Ablation runner.
//
// A grid cell is (architecture, n, trial).  Trial t shifts the base seed by
// t * 2^32 so per-trial column streams stay disjoint.  Within one
// (architecture, trial) the runner extracts features once at the largest n
// of the grid and serves smaller n values as rescaled column prefixes, which
// by construction equals extracting them directly.  Failed cells keep their
// report rows with an error tag so grids stay rectangular.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nrf/config.hpp"
#include "nrf/datasets.hpp"
#include "nrf/errors.hpp"
#include "nrf/feature_cache.hpp"
#include "nrf/features.hpp"
#include "nrf/probe.hpp"
#include "nrf/report.hpp"

namespace nrf {

/// Stream index for the validation-split shuffle of a cell.
inline constexpr std::uint64_t kValSplitStream = kAuxStreamBase + 1;

/// Seed offset between consecutive trials.
inline constexpr std::uint64_t kTrialSeedStep = std::uint64_t{1} << 32;

/// The flattened images of a split, viewed as a feature matrix (the
/// raw-pixel baseline).
inline FeatureView raw_pixel_view(const DatasetSplit& split) {
  return FeatureView(split.images.ptr(), batch_size(split.images),
                     static_cast<std::int64_t>(shape_numel(example_shape(split.images))));
}

/// Deterministic shuffled split of [0, num) into (rest, validation) index
/// lists, both ascending.  The validation part holds
/// max(1, round(num * fraction)) entries.
inline std::pair<std::vector<int>, std::vector<int>> validation_split(int num, double fraction,
                                                                      std::uint64_t seed) {
  if (num < 2) throw config_error("validation split needs at least 2 examples");
  int val_count = static_cast<int>(std::lround(num * fraction));
  val_count = std::max(1, std::min(val_count, num - 1));
  std::vector<int> idx(static_cast<std::size_t>(num));
  for (int i = 0; i < num; ++i) idx[static_cast<std::size_t>(i)] = i;
  RngStream stream = derive_stream(seed, kValSplitStream);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<int> val(idx.begin(), idx.begin() + val_count);
  std::vector<int> rest(idx.begin() + val_count, idx.end());
  std::sort(val.begin(), val.end());
  std::sort(rest.begin(), rest.end());
  return {std::move(rest), std::move(val)};
}

namespace detail {

struct GatheredRows {
  std::vector<float> values;
  std::vector<int> labels;
  std::int64_t cols = 0;
  FeatureView view() const {
    return FeatureView(values.data(), static_cast<std::int64_t>(labels.size()), cols);
  }
};

inline GatheredRows gather_rows(const FeatureView& src, const std::vector<int>& labels,
                                const std::vector<int>& rows) {
  GatheredRows out;
  out.cols = src.num_features;
  out.values.resize(rows.size() * static_cast<std::size_t>(src.num_features));
  out.labels.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const float* s = src.row(rows[r]);
    std::copy(s, s + src.num_features,
              out.values.data() + r * static_cast<std::size_t>(src.num_features));
    out.labels[r] = labels[static_cast<std::size_t>(rows[r])];
  }
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Tune, retrain on the full training features, and fill the metrics of a
/// prepared row.  `seed` drives only the validation-split shuffle.
inline void probe_cell(const FeatureView& train_features, const std::vector<int>& train_labels,
                       const FeatureView& test_features, const std::vector<int>& test_labels,
                       int k_classes, std::uint64_t seed, const ProbeConfig& probe,
                       ReportRow& row) {
  const auto [rest_idx, val_idx] = validation_split(
      static_cast<int>(train_features.num_examples), probe.val_fraction, seed);
  const GatheredRows sub = gather_rows(train_features, train_labels, rest_idx);
  const GatheredRows val = gather_rows(train_features, train_labels, val_idx);
  const auto [best_l2, tuned] = tune_l2(sub.view(), sub.labels, val.view(), val.labels,
                                        probe.l2_grid, probe.opt, k_classes);
  (void)tuned;
  const ProbeModel final_model =
      train_probe(train_features, train_labels, best_l2, probe.opt, k_classes);
  row.best_l2 = best_l2;
  row.train_acc = accuracy(final_model, train_features, train_labels);
  row.test_acc = accuracy(final_model, test_features, test_labels);
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

/// Cache path for one extraction, keyed by everything that determines the
/// bytes: dataset fingerprint, architecture, seed, n, and the split role.
inline std::string cache_path(const std::string& cache_dir, const DatasetSplit& split,
                              const ArchitectureSpec& arch, std::uint64_t seed, std::int64_t n,
                              const char* role) {
  return cache_dir + "/" + split.name + "_" + hex64(split.fingerprint) + "_" + arch.label() +
         "_s" + hex64(seed) + "_n" + std::to_string(n) + "_" + role + ".nrf1";
}

inline FeatureMatrix extract_or_load(const DatasetSplit& split, const ArchitectureSpec& arch,
                                     std::int64_t n, std::uint64_t seed,
                                     const ExtractOptions& opts, const std::string& cache_dir,
                                     const char* role) {
  if (!cache_dir.empty()) {
    const std::string path = cache_path(cache_dir, split, arch, seed, n, role);
    if (std::filesystem::exists(path)) {
      return load_features(path, split.fingerprint);
    }
    FeatureMatrix fm = extract_features(arch, split.images, n, seed, opts);
    fm.dataset_fingerprint = split.fingerprint;
    std::filesystem::create_directories(cache_dir);
    save_features(fm, path);
    return fm;
  }
  FeatureMatrix fm = extract_features(arch, split.images, n, seed, opts);
  fm.dataset_fingerprint = split.fingerprint;
  return fm;
}

}  // namespace detail

/// Options shared by run_experiment and run_ablation.
struct HarnessOptions {
  int workers = 1;
  int extract_chunk = 64;
  bool record_timing = true;
  std::string cache_dir;
};

inline HarnessOptions harness_options(const ExperimentConfig& c) {
  HarnessOptions h;
  h.workers = c.workers;
  h.extract_chunk = c.extract_chunk;
  h.record_timing = c.record_timing;
  h.cache_dir = c.cache_dir;
  return h;
}

/// Materialize the configured dataset: load, subsample, then normalize with
/// train statistics.  `data_dir_override` replaces the configured directory
/// when non-empty.
inline std::pair<DatasetSplit, DatasetSplit> load_dataset(
    const DatasetSpec& spec, const std::string& data_dir_override = "") {
  const std::string dir = data_dir_override.empty() ? spec.dir : data_dir_override;
  std::pair<DatasetSplit, DatasetSplit> splits;
  if (spec.name == "cifar10") {
    splits = load_cifar10(dir);
  } else if (spec.name == "cifar100") {
    splits = load_cifar100(dir, true);
  } else if (spec.name == "cifar100_coarse") {
    splits = load_cifar100(dir, false);
  } else if (spec.name == "mnist") {
    splits = load_mnist_idx(dir);
  } else if (spec.name == "blobs") {
    splits = synth_blobs(spec.blobs.k_classes, spec.blobs.per_class, spec.blobs.dim,
                         spec.blobs.separation, spec.blobs.seed, spec.blobs.image_shape);
  } else {
    throw config_error("unknown dataset '" + spec.name + "'");
  }
  if (spec.subsample_per_class > 0) {
    splits.first = subsample(splits.first, spec.subsample_per_class, spec.subsample_seed);
    const int test_per_class =
        std::min(spec.subsample_per_class,
                 static_cast<int>(splits.second.labels.size() /
                                  splits.second.class_names.size()));
    splits.second = subsample(splits.second, test_per_class, spec.subsample_seed);
  }
  if (spec.normalize != NormalizeMode::none) {
    splits = normalize_pair(splits.first, splits.second, spec.normalize);
  }
  return splits;
}

/// One grid cell end to end: extract train and test features under the same
/// seed manifest, tune l2 on a deterministic validation split, retrain on
/// the full training features, and evaluate.
inline ReportRow run_experiment(const DatasetSplit& train, const DatasetSplit& test,
                                const ArchitectureSpec& arch, std::int64_t n,
                                std::uint64_t base_seed, const ProbeConfig& probe,
                                const HarnessOptions& opts = {}, int trial = 0) {
  ReportRow row;
  row.dataset = train.name;
  row.arch = arch.label();
  row.init = init_label(arch.resolved_init());
  row.activation = arch.resolved_activation().label();
  row.n = n;
  row.trial = trial;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ExtractOptions ex;
    ex.workers = opts.workers;
    ex.chunk = opts.extract_chunk;
    const FeatureMatrix train_fm =
        detail::extract_or_load(train, arch, n, base_seed, ex, opts.cache_dir, "train");
    const FeatureMatrix test_fm =
        detail::extract_or_load(test, arch, n, base_seed, ex, opts.cache_dir, "test");
    detail::probe_cell(train_fm, train.labels, test_fm, test.labels,
                       static_cast<int>(train.class_names.size()), base_seed, probe, row);
    row.wall_time_s = opts.record_timing ? detail::seconds_since(t0) : 0.0;
  } catch (const std::exception& e) {
    row.error = e.what();
    row.wall_time_s = opts.record_timing ? detail::seconds_since(t0) : 0.0;
  }
  return row;
}

/// Cartesian product of the configured grids, trials included.  Within one
/// (architecture, trial) pair the largest n is extracted once and smaller n
/// values are served as rescaled prefixes; extraction time is attributed to
/// the largest-n row, probe time to each row.
inline Report run_ablation(const ExperimentConfig& config,
                           const std::string& data_dir_override = "") {
  config.validate();
  const auto [train, test] = load_dataset(config.dataset, data_dir_override);
  const HarnessOptions opts = harness_options(config);
  const int k_classes = static_cast<int>(train.class_names.size());

  std::int64_t n_max = 0;
  for (std::int64_t n : config.n_grid) n_max = std::max(n_max, n);

  Report report;
  report.rows.resize(config.archs.size() * config.n_grid.size() *
                     static_cast<std::size_t>(config.trials));
  auto row_slot = [&](std::size_t arch_idx, std::size_t n_idx, int trial) -> ReportRow& {
    return report.rows[(arch_idx * config.n_grid.size() + n_idx) *
                           static_cast<std::size_t>(config.trials) +
                       static_cast<std::size_t>(trial)];
  };

  for (std::size_t a = 0; a < config.archs.size(); ++a) {
    const ArchitectureSpec& arch = config.archs[a];
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(trial) *
                                                        kTrialSeedStep;
      for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
        ReportRow& row = row_slot(a, ni, trial);
        row.dataset = train.name;
        row.arch = arch.label();
        row.init = init_label(arch.resolved_init());
        row.activation = arch.resolved_activation().label();
        row.n = config.n_grid[ni];
        row.trial = trial;
      }

      FeatureMatrix train_fm, test_fm;
      const auto t_extract = std::chrono::steady_clock::now();
      try {
        ExtractOptions ex;
        ex.workers = opts.workers;
        ex.chunk = opts.extract_chunk;
        train_fm =
            detail::extract_or_load(train, arch, n_max, seed, ex, opts.cache_dir, "train");
        test_fm = detail::extract_or_load(test, arch, n_max, seed, ex, opts.cache_dir, "test");
      } catch (const std::exception& e) {
        const double t = detail::seconds_since(t_extract);
        for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
          ReportRow& row = row_slot(a, ni, trial);
          row.error = e.what();
          row.wall_time_s = opts.record_timing ? t : 0.0;
        }
        continue;
      }
      const double extract_time = detail::seconds_since(t_extract);

      for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
        const std::int64_t n = config.n_grid[ni];
        ReportRow& row = row_slot(a, ni, trial);
        const auto t_probe = std::chrono::steady_clock::now();
        try {
          FeatureMatrix sliced_train, sliced_test;
          const FeatureMatrix* tr = &train_fm;
          const FeatureMatrix* te = &test_fm;
          if (n != n_max) {
            sliced_train = slice_features(train_fm, n);
            sliced_test = slice_features(test_fm, n);
            tr = &sliced_train;
            te = &sliced_test;
          }
          detail::probe_cell(*tr, train.labels, *te, test.labels, k_classes,
                             seed, config.probe, row);
          double t = detail::seconds_since(t_probe);
          if (n == n_max) t += extract_time;
          row.wall_time_s = opts.record_timing ? t : 0.0;
        } catch (const std::exception& e) {
          row.error = e.what();
          row.wall_time_s = opts.record_timing ? detail::seconds_since(t_probe) : 0.0;
        }
      }
    }
  }
  return report;
}

}  // namespace nrf
