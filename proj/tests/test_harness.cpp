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
#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "nrf/nrf.hpp"

namespace {

namespace fs = std::filesystem;

nrf::ExperimentConfig small_blob_config() {
  nrf::ExperimentConfig cfg;
  cfg.dataset.name = "blobs";
  cfg.dataset.blobs.k_classes = 3;
  cfg.dataset.blobs.per_class = 30;
  cfg.dataset.blobs.dim = 12;
  cfg.dataset.blobs.separation = 2.5;
  cfg.dataset.blobs.seed = 5;
  nrf::ArchitectureSpec mlp;
  mlp.preset = nrf::PresetKind::mlp;
  mlp.width_multiplier = 0.0625;
  nrf::ArchitectureSpec linear;
  linear.preset = nrf::PresetKind::linear;
  cfg.archs = {mlp, linear};
  cfg.n_grid = {8, 32};
  cfg.base_seed = 42;
  cfg.trials = 3;
  cfg.probe.l2_grid = {1e-4, 1e-2};
  cfg.record_timing = false;
  return cfg;
}

}  // namespace

TEST_CASE("validation split partitions deterministically", "[harness]") {
  const auto [rest, val] = nrf::validation_split(100, 0.1, 7);
  REQUIRE(val.size() == 10);
  REQUIRE(rest.size() == 90);
  CHECK(std::is_sorted(rest.begin(), rest.end()));
  CHECK(std::is_sorted(val.begin(), val.end()));
  std::set<int> all(rest.begin(), rest.end());
  all.insert(val.begin(), val.end());
  CHECK(all.size() == 100);
  CHECK(*all.begin() == 0);
  CHECK(*all.rbegin() == 99);

  const auto [rest2, val2] = nrf::validation_split(100, 0.1, 7);
  CHECK(val2 == val);
  CHECK(rest2 == rest);
  const auto [rest3, val3] = nrf::validation_split(100, 0.1, 8);
  CHECK(val3 != val);

  // Rounding floors at one example and caps at num - 1.
  CHECK(nrf::validation_split(10, 0.01, 1).second.size() == 1);
  CHECK(nrf::validation_split(2, 0.49, 1).second.size() == 1);
  CHECK(nrf::validation_split(4, 0.9, 1).second.size() == 3);
  CHECK_THROWS_AS(nrf::validation_split(1, 0.1, 1), nrf::config_error);
}

TEST_CASE("raw pixel view flattens examples in place", "[harness]") {
  const auto [train, test] = nrf::synth_blobs(2, 5, 12, 1.0, 3, {2, 2, 3});
  const nrf::FeatureView view = nrf::raw_pixel_view(train);
  CHECK(view.num_examples == 10);
  CHECK(view.num_features == 12);
  CHECK(view.data == train.images.ptr());
}

TEST_CASE("experiments repeat bit for bit without timing", "[harness]") {
  const auto [train, test] = nrf::synth_blobs(3, 25, 10, 2.0, 9);
  nrf::ArchitectureSpec arch;
  arch.preset = nrf::PresetKind::mlp;
  arch.width_multiplier = 0.0625;
  nrf::ProbeConfig probe;
  probe.l2_grid = {1e-4, 1e-2};
  nrf::HarnessOptions opts;
  opts.record_timing = false;

  const nrf::ReportRow a = nrf::run_experiment(train, test, arch, 16, 7, probe, opts);
  const nrf::ReportRow b = nrf::run_experiment(train, test, arch, 16, 7, probe, opts);
  REQUIRE(a.error.empty());
  CHECK(a.dataset == "blobs");
  CHECK(a.arch == arch.label());
  CHECK(a.init == "glorot_normal");
  CHECK(a.activation == "relu");
  CHECK(a.n == 16);
  CHECK(a.trial == 0);
  CHECK(a.wall_time_s == 0.0);
  CHECK(b.train_acc == a.train_acc);
  CHECK(b.test_acc == a.test_acc);
  CHECK(b.best_l2 == a.best_l2);

  nrf::HarnessOptions timed;
  const nrf::ReportRow c = nrf::run_experiment(train, test, arch, 16, 7, probe, timed);
  CHECK(c.wall_time_s > 0.0);
  CHECK(c.train_acc == a.train_acc);
}

TEST_CASE("ablation grids are rectangular and ordered", "[harness]") {
  const nrf::ExperimentConfig cfg = small_blob_config();
  const nrf::Report report = nrf::run_ablation(cfg);
  REQUIRE(report.rows.size() == 12);  // 2 archs x 2 n x 3 trials

  // Row order: architecture, then n in grid order, then trial.
  std::size_t r = 0;
  for (const auto& arch : cfg.archs) {
    for (std::int64_t n : cfg.n_grid) {
      for (int trial = 0; trial < cfg.trials; ++trial, ++r) {
        CHECK(report.rows[r].arch == arch.label());
        CHECK(report.rows[r].n == n);
        CHECK(report.rows[r].trial == trial);
      }
    }
  }
  for (const auto& row : report.rows) {
    CHECK(row.error.empty());
    CHECK(row.train_acc >= 0.0);
    CHECK(row.test_acc >= 0.0);
    CHECK(row.wall_time_s == 0.0);
  }
  // One aggregate per (arch, n) cell, each over 3 trials.
  const auto cells = nrf::aggregate_report(report);
  REQUIRE(cells.size() == 4);
  for (const auto& c : cells) CHECK(c.trials == 3);
}

TEST_CASE("ablation reruns are byte-identical", "[harness]") {
  const nrf::ExperimentConfig cfg = small_blob_config();
  const nrf::Report first = nrf::run_ablation(cfg);
  const nrf::Report second = nrf::run_ablation(cfg);
  CHECK(nrf::report_to_csv(first) == nrf::report_to_csv(second));
  CHECK(nrf::report_to_json(first).dump() == nrf::report_to_json(second).dump());
}

TEST_CASE("prefix-served cells match direct extraction", "[harness]") {
  nrf::ExperimentConfig cfg = small_blob_config();
  cfg.trials = 1;
  const nrf::Report report = nrf::run_ablation(cfg);  // n_max = 32 serves n = 8

  const auto [train, test] = nrf::load_dataset(cfg.dataset);
  nrf::HarnessOptions opts = nrf::harness_options(cfg);
  const nrf::ReportRow direct =
      nrf::run_experiment(train, test, cfg.archs[0], 8, cfg.base_seed, cfg.probe, opts);

  const nrf::ReportRow& served = report.rows[0];
  REQUIRE(served.arch == cfg.archs[0].label());
  REQUIRE(served.n == 8);
  CHECK(served.best_l2 == direct.best_l2);
  // Rescaled prefixes differ from a direct extraction by float round-off
  // only; accuracies on 90 examples stay within one flipped example.
  CHECK(std::abs(served.train_acc - direct.train_acc) <= 1.0 / 90 + 1e-12);
  CHECK(std::abs(served.test_acc - direct.test_acc) <= 1.0 / 90 + 1e-12);
}

TEST_CASE("failed cells keep their rows and error text", "[harness]") {
  nrf::ExperimentConfig cfg = small_blob_config();
  nrf::ArchitectureSpec conv;
  conv.preset = nrf::PresetKind::cnn_s;  // needs image input, blobs are flat
  cfg.archs = {conv, cfg.archs[1]};
  cfg.trials = 1;
  const nrf::Report report = nrf::run_ablation(cfg);
  REQUIRE(report.rows.size() == 4);

  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(report.rows[r].failed());
    CHECK_FALSE(report.rows[r].error.empty());
    CHECK(std::isnan(report.rows[r].train_acc));
    CHECK(std::isnan(report.rows[r].test_acc));
  }
  for (std::size_t r = 2; r < 4; ++r) {
    CHECK_FALSE(report.rows[r].failed());
    CHECK(report.rows[r].test_acc > 0.5);
  }
  // Failed metrics render as nan in the CSV view.
  const std::string csv = nrf::report_to_csv(report);
  CHECK(csv.find(",nan,nan,nan,0.000000") != std::string::npos);
}

TEST_CASE("feature caches are written, reused, and checked", "[harness]") {
  const fs::path cache = fs::temp_directory_path() / "nrf_harness_cache";
  fs::remove_all(cache);
  nrf::ExperimentConfig cfg = small_blob_config();
  cfg.trials = 1;
  cfg.archs = {cfg.archs[1]};  // linear only
  cfg.cache_dir = cache.string();

  const nrf::Report first = nrf::run_ablation(cfg);
  REQUIRE(fs::exists(cache));
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(cache)) {
    ++files;
    CHECK(entry.path().extension() == ".nrf1");
  }
  CHECK(files == 2);  // train and test at n_max

  const nrf::Report second = nrf::run_ablation(cfg);  // served from cache
  CHECK(nrf::report_to_csv(first) == nrf::report_to_csv(second));

  // A cache written for different data is rejected, and the cell records it.
  const auto [train, test] = nrf::load_dataset(cfg.dataset);
  const std::string path = nrf::detail::cache_path(cfg.cache_dir, train, cfg.archs[0],
                                                   cfg.base_seed, 32, "train");
  nrf::FeatureMatrix bogus = nrf::load_features(path);
  bogus.dataset_fingerprint = 1234;
  nrf::save_features(bogus, path);
  const nrf::Report stale = nrf::run_ablation(cfg);
  REQUIRE(stale.rows.size() == 2);
  for (const auto& row : stale.rows) {
    CHECK(row.failed());
    CHECK(row.error.find("fingerprint") != std::string::npos);
  }
  fs::remove_all(cache);
}

TEST_CASE("dataset loading applies subsample and normalize", "[harness]") {
  nrf::DatasetSpec spec;
  spec.name = "blobs";
  spec.blobs.k_classes = 3;
  spec.blobs.per_class = 40;
  spec.blobs.dim = 6;
  spec.blobs.separation = 2.0;
  spec.blobs.seed = 21;
  spec.subsample_per_class = 15;
  spec.normalize = nrf::NormalizeMode::unit_range;

  const auto [train, test] = nrf::load_dataset(spec);
  CHECK(train.labels.size() == 45);
  CHECK(test.labels.size() == 45);
  float lo = 1e30f, hi = -1e30f;
  for (float v : train.images.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0f);
  CHECK(hi == 1.0f);

  nrf::DatasetSpec unknown;
  unknown.name = "imagenet";
  CHECK_THROWS_AS(nrf::load_dataset(unknown), nrf::config_error);
}

TEST_CASE("trial seeds shift by a fixed stride", "[harness]") {
  CHECK(nrf::kTrialSeedStep == (std::uint64_t{1} << 32));
  const auto [train, test] = nrf::synth_blobs(3, 20, 8, 2.0, 9);
  nrf::ArchitectureSpec arch;
  arch.preset = nrf::PresetKind::linear;
  nrf::ProbeConfig probe;
  probe.l2_grid = {1e-3};
  nrf::HarnessOptions opts;
  opts.record_timing = false;

  // An explicit trial-1 run equals the corresponding ablation row.
  nrf::ExperimentConfig cfg = small_blob_config();
  cfg.dataset.blobs.k_classes = 3;
  cfg.dataset.blobs.per_class = 20;
  cfg.dataset.blobs.dim = 8;
  cfg.dataset.blobs.separation = 2.0;
  cfg.dataset.blobs.seed = 9;
  cfg.archs = {arch};
  cfg.n_grid = {16};
  cfg.trials = 2;
  cfg.probe.l2_grid = {1e-3};
  const nrf::Report report = nrf::run_ablation(cfg);
  REQUIRE(report.rows.size() == 2);
  const nrf::ReportRow direct = nrf::run_experiment(
      train, test, arch, 16, cfg.base_seed + nrf::kTrialSeedStep, cfg.probe, opts, 1);
  CHECK(report.rows[1].trial == 1);
  CHECK(report.rows[1].train_acc == direct.train_acc);
  CHECK(report.rows[1].test_acc == direct.test_acc);
  CHECK(report.rows[1].best_l2 == direct.best_l2);
  // Different trials see different feature draws.
  CHECK(report.rows[0].test_acc != report.rows[1].test_acc);
}

TEST_CASE("random linear features track the raw-pixel baseline", "[harness]") {
  const auto [train, test] = nrf::synth_blobs(4, 60, 16, 1.5, 31);
  nrf::ProbeConfig probe;
  probe.l2_grid = {1e-4, 1e-2, 1e0};

  nrf::ReportRow raw_row;
  nrf::detail::probe_cell(nrf::raw_pixel_view(train), train.labels,
                          nrf::raw_pixel_view(test), test.labels, 4, 11, probe, raw_row);

  nrf::ArchitectureSpec linear;
  linear.preset = nrf::PresetKind::linear;
  nrf::HarnessOptions opts;
  opts.record_timing = false;
  const nrf::ReportRow lin = nrf::run_experiment(train, test, linear, 512, 11, probe, opts);
  REQUIRE(lin.error.empty());

  CHECK(raw_row.test_acc > 0.5);  // the task is learnable
  CHECK(std::abs(lin.test_acc - raw_row.test_acc) <= 0.1);
}
