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

// Command-line front end: feature extraction, kernel estimates, linear
// probes, ablation grids, and probe-weight inspection.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nrf/nrf.hpp"

namespace {

// Shared --dataset / --data-dir / preprocessing flags.  The data directory
// defaults to $NRF_DATA_DIR/<dataset> for file-backed datasets.
struct DatasetArgs {
  std::string name = "blobs";
  std::string dir;
  int subsample = 0;
  std::string normalize = "none";
  std::uint64_t subsample_seed = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dataset", name,
                    "Dataset: cifar10, cifar100, cifar100_coarse, mnist, blobs")
        ->capture_default_str();
    cmd->add_option("--data-dir", dir,
                    "Dataset directory (default $NRF_DATA_DIR/<dataset>)");
    cmd->add_option("--subsample", subsample, "Per-class training subsample (0 = full)")
        ->capture_default_str();
    cmd->add_option("--normalize", normalize,
                    "Pixel normalization: none, unit_range, per_channel_standardize")
        ->capture_default_str();
    cmd->add_option("--subsample-seed", subsample_seed, "Seed for the subsample draw")
        ->capture_default_str();
  }

  nrf::DatasetSpec spec() const {
    nrf::DatasetSpec s;
    s.name = name;
    s.dir = dir;
    if (s.dir.empty() && name != "blobs") {
      const char* env = std::getenv("NRF_DATA_DIR");
      if (env == nullptr) {
        throw nrf::config_error("--data-dir not given and NRF_DATA_DIR is unset");
      }
      s.dir = std::string(env) + "/" + name;
    }
    s.subsample_per_class = subsample;
    s.normalize = nrf::parse_normalize_mode(normalize);
    s.subsample_seed = subsample_seed;
    return s;
  }
};

// Architecture flags mirroring ArchitectureSpec.  Tri-state toggles use
// "default" so resnet presets keep their own defaults.
struct ArchArgs {
  std::string preset = "mlp";
  double width = 1.0;
  int depth = 1;
  int resnet_depth = 3;
  std::string activation;  // empty = preset default
  double slope = -1.0;
  std::string init;  // empty = preset default
  double sigma = 1.0;
  bool untruncated = false;
  std::string batchnorm = "default";
  std::string skip = "default";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--preset", preset,
                    "Architecture preset: linear, one_hidden, mlp, cnn_s, cnn_m, lenet, "
                    "resnet18_cifar, resnet_deeper")
        ->capture_default_str();
    cmd->add_option("--width", width, "Width multiplier")->capture_default_str();
    cmd->add_option("--depth", depth, "Depth multiplier (mlp only)")->capture_default_str();
    cmd->add_option("--resnet-depth", resnet_depth, "Blocks per stage (resnet_deeper only)")
        ->capture_default_str();
    cmd->add_option("--activation", activation,
                    "Activation: identity, relu, leaky_relu, elu, sigmoid, tanh, "
                    "scaled_leaky_relu (default: preset)");
    cmd->add_option("--slope", slope, "Negative slope for the leaky activations");
    cmd->add_option("--init", init,
                    "Weight scheme: glorot_normal, glorot_uniform, he_normal, he_uniform, "
                    "lecun_normal, orthogonal, delta_orthogonal, plain_normal, zeros "
                    "(default: preset)");
    cmd->add_option("--sigma", sigma, "Standard deviation for plain_normal")
        ->capture_default_str();
    cmd->add_flag("--untruncated", untruncated, "Draw from untruncated normals");
    cmd->add_option("--batchnorm", batchnorm, "Inference BatchNorm: default, on, off")
        ->capture_default_str();
    cmd->add_option("--skip", skip, "Residual shortcuts: default, on, off")
        ->capture_default_str();
  }

  static std::optional<bool> tri_state(const std::string& v, const char* flag) {
    if (v == "default") return std::nullopt;
    if (v == "on") return true;
    if (v == "off") return false;
    throw nrf::config_error(std::string(flag) + " must be default, on, or off");
  }

  nrf::ArchitectureSpec spec() const {
    nrf::ArchitectureSpec a;
    a.preset = nrf::parse_preset(preset);
    a.width_multiplier = width;
    a.depth_multiplier = depth;
    a.resnet_depth = resnet_depth;
    if (!activation.empty()) {
      a.activation = nrf::Activation::make(nrf::parse_act_kind(activation), slope);
    }
    if (!init.empty()) {
      nrf::InitScheme s;
      s.kind = nrf::parse_init_kind(init);
      s.truncated = !untruncated;
      s.sigma = sigma;
      a.init = s;
    }
    a.use_batchnorm = tri_state(batchnorm, "--batchnorm");
    a.use_skip = tri_state(skip, "--skip");
    a.validate();
    return a;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw nrf::io_error("cannot write " + path);
  out << text;
}

const nrf::DatasetSplit& pick_split(const std::pair<nrf::DatasetSplit, nrf::DatasetSplit>& both,
                                    const std::string& split) {
  if (split == "train") return both.first;
  if (split == "test") return both.second;
  throw nrf::config_error("--split must be train or test");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-network feature laboratory"};
  app.require_subcommand(1);

  // extract: dataset + architecture + n + seed -> feature cache file.
  auto* extract = app.add_subcommand("extract", "Extract a feature matrix to a cache file");
  DatasetArgs ex_data;
  ArchArgs ex_arch;
  std::string ex_split = "train";
  std::int64_t ex_n = 256;
  std::uint64_t ex_seed = 0;
  int ex_workers = 1;
  std::string ex_out;
  ex_data.add_to(extract);
  ex_arch.add_to(extract);
  extract->add_option("--split", ex_split, "Which split to featurize: train or test")
      ->capture_default_str();
  extract->add_option("--n", ex_n, "Number of random networks (feature columns)")
      ->capture_default_str();
  extract->add_option("--seed", ex_seed, "Base seed")->capture_default_str();
  extract->add_option("--workers", ex_workers, "Extraction threads")->capture_default_str();
  extract->add_option("--out", ex_out, "Output cache path")->required();

  // kernel: estimate the prior kernel between two examples.
  auto* kernel = app.add_subcommand("kernel", "Estimate the prior kernel for an example pair");
  DatasetArgs ke_data;
  ArchArgs ke_arch;
  std::string ke_split = "test";
  std::int64_t ke_i = 0, ke_j = 1, ke_n = 256;
  std::uint64_t ke_seed = 0;
  ke_data.add_to(kernel);
  ke_arch.add_to(kernel);
  kernel->add_option("--split", ke_split, "Split holding the examples")->capture_default_str();
  kernel->add_option("--i", ke_i, "First example index")->capture_default_str();
  kernel->add_option("--j", ke_j, "Second example index")->capture_default_str();
  kernel->add_option("--n", ke_n, "Number of sampled networks")->capture_default_str();
  kernel->add_option("--seed", ke_seed, "Base seed")->capture_default_str();

  // probe: train and evaluate a linear probe on cached features.
  auto* probe = app.add_subcommand("probe", "Train a linear probe on cached features");
  DatasetArgs pr_data;
  std::string pr_train_cache, pr_test_cache, pr_model_out;
  std::vector<double> pr_l2_grid = nrf::default_l2_grid();
  double pr_val_fraction = 0.1;
  bool pr_standardize = false;
  pr_data.add_to(probe);
  probe->add_option("--train-cache", pr_train_cache, "Training feature cache")->required();
  probe->add_option("--test-cache", pr_test_cache, "Test feature cache")->required();
  probe->add_option("--l2-grid", pr_l2_grid, "Ridge strengths to tune over")
      ->capture_default_str();
  probe->add_option("--val-fraction", pr_val_fraction, "Validation fraction for tuning")
      ->capture_default_str();
  probe->add_flag("--standardize", pr_standardize, "Standardize features inside the probe");
  probe->add_option("--out", pr_model_out, "Save the trained probe model here");

  // ablate: run a configured grid and emit the report.
  auto* ablate = app.add_subcommand("ablate", "Run an ablation grid from a config file");
  std::string ab_config, ab_data_dir, ab_out;
  std::string ab_format = "csv";
  int ab_workers = 0;
  ablate->add_option("--config", ab_config, "Experiment config (JSON)")->required();
  ablate->add_option("--data-dir", ab_data_dir, "Override the configured dataset directory");
  ablate->add_option("--out", ab_out, "Report output path")->required();
  ablate->add_option("--format", ab_format, "Report format: csv or json")
      ->capture_default_str();
  ablate->add_option("--workers", ab_workers, "Override configured extraction threads");

  // cosine: class-similarity matrix of a probe's weight rows.
  auto* cosine = app.add_subcommand("cosine", "Class-similarity CSV from a probe model");
  std::string co_model, co_out;
  std::vector<std::string> co_names;
  int co_class = -1, co_count = 3;
  cosine->add_option("--model", co_model, "Probe model file")->required();
  cosine->add_option("--class-names", co_names, "Class names (default: class indices)");
  cosine->add_option("--class", co_class, "Also list nearest/farthest classes for this index");
  cosine->add_option("--count", co_count, "List length for --class")->capture_default_str();
  cosine->add_option("--out", co_out, "Output path (default stdout)");

  // proba: per-example class probabilities for external visualization.
  auto* proba = app.add_subcommand("proba", "Per-example class probabilities from a probe");
  DatasetArgs pb_data;
  std::string pb_model, pb_cache, pb_out;
  pb_data.add_to(proba);
  proba->add_option("--model", pb_model, "Probe model file")->required();
  proba->add_option("--cache", pb_cache, "Feature cache to score")->required();
  proba->add_option("--out", pb_out, "Output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*extract) {
      const auto both = nrf::load_dataset(ex_data.spec());
      const nrf::DatasetSplit& split = pick_split(both, ex_split);
      nrf::ExtractOptions opts;
      opts.workers = ex_workers;
      nrf::FeatureMatrix fm =
          nrf::extract_features(ex_arch.spec(), split.images, ex_n, ex_seed, opts);
      fm.dataset_fingerprint = split.fingerprint;
      nrf::save_features(fm, ex_out);
      std::printf("%s %s: %lld examples x %lld features -> %s\n", split.name.c_str(),
                  ex_split.c_str(), static_cast<long long>(fm.num_examples),
                  static_cast<long long>(fm.num_features), ex_out.c_str());
    } else if (*kernel) {
      const auto both = nrf::load_dataset(ke_data.spec());
      const nrf::DatasetSplit& split = pick_split(both, ke_split);
      const int num = nrf::batch_size(split.images);
      if (ke_i < 0 || ke_j < 0 || ke_i >= num || ke_j >= num) {
        throw nrf::config_error("example indices must lie in [0, " + std::to_string(num) + ")");
      }
      const std::size_t per = nrf::shape_numel(nrf::example_shape(split.images));
      nrf::Tensor x(nrf::example_shape(split.images));
      nrf::Tensor y(nrf::example_shape(split.images));
      std::copy_n(split.images.ptr() + static_cast<std::size_t>(ke_i) * per, per, x.ptr());
      std::copy_n(split.images.ptr() + static_cast<std::size_t>(ke_j) * per, per, y.ptr());
      const nrf::KernelEstimate est =
          nrf::estimate_kernel(ke_arch.spec(), x, y, ke_n, ke_seed);
      std::printf("kappa(%lld, %lld) = %.8g  (n=%lld, se=%.3g)\n",
                  static_cast<long long>(ke_i), static_cast<long long>(ke_j), est.value,
                  static_cast<long long>(est.n), std::sqrt(est.variance / est.n));
    } else if (*probe) {
      const auto [train, test] = nrf::load_dataset(pr_data.spec());
      const nrf::FeatureMatrix train_fm = nrf::load_features(pr_train_cache, train.fingerprint);
      const nrf::FeatureMatrix test_fm = nrf::load_features(pr_test_cache, test.fingerprint);
      nrf::OptSettings opt;
      opt.standardize = pr_standardize;
      const auto [rest_idx, val_idx] = nrf::validation_split(
          static_cast<int>(train_fm.num_examples), pr_val_fraction, train_fm.base_seed);
      const auto sub = nrf::detail::gather_rows(train_fm, train.labels, rest_idx);
      const auto val = nrf::detail::gather_rows(train_fm, train.labels, val_idx);
      const auto [best_l2, tuned] =
          nrf::tune_l2(sub.view(), sub.labels, val.view(), val.labels, pr_l2_grid, opt);
      (void)tuned;
      const nrf::ProbeModel model = nrf::train_probe(train_fm, train.labels, best_l2, opt);
      std::printf("l2=%g  train_acc=%.4f  test_acc=%.4f\n", best_l2,
                  nrf::accuracy(model, train_fm, train.labels),
                  nrf::accuracy(model, test_fm, test.labels));
      if (!pr_model_out.empty()) {
        nrf::save_probe(model, pr_model_out);
        std::printf("model -> %s\n", pr_model_out.c_str());
      }
    } else if (*ablate) {
      nrf::ExperimentConfig config = nrf::load_config(ab_config);
      if (ab_workers > 0) config.workers = ab_workers;
      const nrf::Report report = nrf::run_ablation(config, ab_data_dir);
      nrf::emit_report(report, nrf::parse_report_format(ab_format), ab_out);
      int failed = 0;
      for (const auto& row : report.rows) failed += row.failed() ? 1 : 0;
      std::printf("%zu rows (%d failed) -> %s\n", report.rows.size(), failed, ab_out.c_str());
    } else if (*cosine) {
      const nrf::ProbeModel model = nrf::load_probe(co_model);
      const std::vector<double> c = nrf::class_cosine(model);
      const int k = model.k_classes;
      std::vector<std::string> names = co_names;
      if (names.empty()) {
        for (int i = 0; i < k; ++i) names.push_back("class_" + std::to_string(i));
      }
      if (static_cast<int>(names.size()) != k) {
        throw nrf::config_error("--class-names needs exactly " + std::to_string(k) + " names");
      }
      std::string text;
      for (int i = 0; i < k; ++i) {
        text += names[static_cast<std::size_t>(i)];
        for (int j = 0; j < k; ++j) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), ",%.6f", c[static_cast<std::size_t>(i) * k + j]);
          text += buf;
        }
        text += '\n';
      }
      write_text(co_out, text);
      if (co_class >= 0) {
        const auto [top, bottom] = nrf::top_bottom_classes(c, k, co_class, co_count);
        std::printf("nearest to %s:", names[static_cast<std::size_t>(co_class)].c_str());
        for (int t : top) std::printf(" %s", names[static_cast<std::size_t>(t)].c_str());
        std::printf("\nfarthest from %s:", names[static_cast<std::size_t>(co_class)].c_str());
        for (int b : bottom) std::printf(" %s", names[static_cast<std::size_t>(b)].c_str());
        std::printf("\n");
      }
    } else if (*proba) {
      const auto [train, test] = nrf::load_dataset(pb_data.spec());
      const nrf::ProbeModel model = nrf::load_probe(pb_model);
      const nrf::FeatureMatrix fm = nrf::load_features(pb_cache);
      if (fm.dataset_fingerprint != 0 && fm.dataset_fingerprint != train.fingerprint &&
          fm.dataset_fingerprint != test.fingerprint) {
        throw nrf::stale_cache_error("cache " + pb_cache +
                                     " was not extracted from this dataset");
      }
      write_text(pb_out, nrf::proba_csv(model, fm, train.class_names));
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
