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

// Declarative experiment configuration.
//
// Configs are versioned JSON with a closed schema: any key the parser does
// not know is an error, which catches typos before they silently change a
// grid.  See config_from_json for the full key list.

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/architectures.hpp"
#include "nrf/datasets.hpp"
#include "nrf/errors.hpp"
#include "nrf/probe.hpp"

namespace nrf {

struct BlobParams {
  int k_classes = 4;
  int per_class = 50;
  int dim = 16;
  double separation = 3.0;
  std::uint64_t seed = 7;
  /// Optional pseudo-image shape (H W C); empty keeps examples flat.  Lets
  /// convolutional presets run on synthetic data.
  Shape image_shape;
};

struct DatasetSpec {
  std::string name;  // cifar10 | cifar100 | cifar100_coarse | mnist | blobs
  std::string dir;   // directory for file-backed datasets
  int subsample_per_class = 0;  // 0 = full split
  NormalizeMode normalize = NormalizeMode::none;
  std::uint64_t subsample_seed = 1;
  BlobParams blobs;  // used when name == "blobs"
};

struct ProbeConfig {
  std::vector<double> l2_grid = default_l2_grid();
  OptSettings opt;
  double val_fraction = 0.1;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<ArchitectureSpec> archs;
  std::vector<std::int64_t> n_grid;
  std::uint64_t base_seed = 0;
  int trials = 1;
  ProbeConfig probe;
  std::string output_dir = ".";
  std::string cache_dir;     // empty = no feature caching
  bool record_timing = true;  // false zeroes wall_time_s for byte-stable reports
  int workers = 1;
  int extract_chunk = 64;

  void validate() const {
    if (archs.empty()) throw config_error("config needs at least one architecture");
    if (n_grid.empty()) throw config_error("config needs a non-empty n grid");
    for (std::int64_t n : n_grid) {
      if (n < 1) throw config_error("n grid entry " + std::to_string(n) + " must be >= 1");
    }
    if (trials < 1) throw config_error("trials must be >= 1");
    if (probe.l2_grid.empty()) throw config_error("probe l2 grid must be non-empty");
    for (double l2 : probe.l2_grid) {
      if (l2 < 0.0) throw config_error("l2 grid entries must be nonnegative");
    }
    if (!(probe.val_fraction > 0.0 && probe.val_fraction < 0.5)) {
      throw config_error("val_fraction must lie in (0, 0.5)");
    }
    if (workers < 1) throw config_error("workers must be >= 1");
    if (extract_chunk < 1) throw config_error("extract_chunk must be >= 1");
    for (const auto& a : archs) a.validate();
    if (dataset.name.empty()) throw config_error("dataset name is required");
    if (dataset.subsample_per_class < 0) {
      throw config_error("subsample_per_class must be >= 0");
    }
  }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw config_error("unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::reject_unknown_keys(
      j,
      {"schema_version", "dataset", "archs", "n_grid", "base_seed", "trials", "probe",
       "output_dir", "cache_dir", "record_timing", "workers", "extract_chunk"},
      "config");
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1) {
    throw config_error("config schema_version must be 1");
  }
  ExperimentConfig c;

  if (!j.contains("dataset")) throw config_error("config requires 'dataset'");
  const auto& jd = j.at("dataset");
  detail::reject_unknown_keys(
      jd, {"name", "dir", "subsample_per_class", "normalize", "subsample_seed", "blobs"},
      "dataset");
  if (!jd.contains("name")) throw config_error("dataset requires 'name'");
  c.dataset.name = jd.at("name").get<std::string>();
  if (jd.contains("dir")) c.dataset.dir = jd.at("dir").get<std::string>();
  if (jd.contains("subsample_per_class")) {
    c.dataset.subsample_per_class = jd.at("subsample_per_class").get<int>();
  }
  if (jd.contains("normalize")) {
    c.dataset.normalize = parse_normalize_mode(jd.at("normalize").get<std::string>());
  }
  if (jd.contains("subsample_seed")) {
    c.dataset.subsample_seed = jd.at("subsample_seed").get<std::uint64_t>();
  }
  if (jd.contains("blobs")) {
    const auto& jb = jd.at("blobs");
    detail::reject_unknown_keys(
        jb, {"k_classes", "per_class", "dim", "separation", "seed", "image_shape"},
        "dataset.blobs");
    if (jb.contains("k_classes")) c.dataset.blobs.k_classes = jb.at("k_classes").get<int>();
    if (jb.contains("per_class")) c.dataset.blobs.per_class = jb.at("per_class").get<int>();
    if (jb.contains("dim")) c.dataset.blobs.dim = jb.at("dim").get<int>();
    if (jb.contains("separation")) {
      c.dataset.blobs.separation = jb.at("separation").get<double>();
    }
    if (jb.contains("seed")) c.dataset.blobs.seed = jb.at("seed").get<std::uint64_t>();
    if (jb.contains("image_shape")) {
      c.dataset.blobs.image_shape = jb.at("image_shape").get<Shape>();
    }
  }

  if (!j.contains("archs")) throw config_error("config requires 'archs'");
  for (const auto& ja : j.at("archs")) c.archs.push_back(arch_from_json(ja));
  if (!j.contains("n_grid")) throw config_error("config requires 'n_grid'");
  c.n_grid = j.at("n_grid").get<std::vector<std::int64_t>>();
  if (j.contains("base_seed")) c.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("trials")) c.trials = j.at("trials").get<int>();

  if (j.contains("probe")) {
    const auto& jp = j.at("probe");
    detail::reject_unknown_keys(jp,
                                {"l2_grid", "max_iterations", "tolerance", "history",
                                 "standardize", "val_fraction"},
                                "probe");
    if (jp.contains("l2_grid")) c.probe.l2_grid = jp.at("l2_grid").get<std::vector<double>>();
    if (jp.contains("max_iterations")) {
      c.probe.opt.max_iterations = jp.at("max_iterations").get<int>();
    }
    if (jp.contains("tolerance")) c.probe.opt.tolerance = jp.at("tolerance").get<double>();
    if (jp.contains("history")) c.probe.opt.history = jp.at("history").get<int>();
    if (jp.contains("standardize")) c.probe.opt.standardize = jp.at("standardize").get<bool>();
    if (jp.contains("val_fraction")) c.probe.val_fraction = jp.at("val_fraction").get<double>();
  }

  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("cache_dir")) c.cache_dir = j.at("cache_dir").get<std::string>();
  if (j.contains("record_timing")) c.record_timing = j.at("record_timing").get<bool>();
  if (j.contains("workers")) c.workers = j.at("workers").get<int>();
  if (j.contains("extract_chunk")) c.extract_chunk = j.at("extract_chunk").get<int>();

  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json jd = {{"name", c.dataset.name},
                       {"dir", c.dataset.dir},
                       {"subsample_per_class", c.dataset.subsample_per_class},
                       {"normalize", normalize_mode_name(c.dataset.normalize)},
                       {"subsample_seed", c.dataset.subsample_seed}};
  if (c.dataset.name == "blobs") {
    jd["blobs"] = {{"k_classes", c.dataset.blobs.k_classes},
                   {"per_class", c.dataset.blobs.per_class},
                   {"dim", c.dataset.blobs.dim},
                   {"separation", c.dataset.blobs.separation},
                   {"seed", c.dataset.blobs.seed}};
    if (!c.dataset.blobs.image_shape.empty()) {
      jd["blobs"]["image_shape"] = c.dataset.blobs.image_shape;
    }
  }
  nlohmann::json archs = nlohmann::json::array();
  for (const auto& a : c.archs) archs.push_back(arch_to_json(a));
  return {{"schema_version", 1},
          {"dataset", jd},
          {"archs", archs},
          {"n_grid", c.n_grid},
          {"base_seed", c.base_seed},
          {"trials", c.trials},
          {"probe",
           {{"l2_grid", c.probe.l2_grid},
            {"max_iterations", c.probe.opt.max_iterations},
            {"tolerance", c.probe.opt.tolerance},
            {"history", c.probe.opt.history},
            {"standardize", c.probe.opt.standardize},
            {"val_fraction", c.probe.val_fraction}}},
          {"output_dir", c.output_dir},
          {"cache_dir", c.cache_dir},
          {"record_timing", c.record_timing},
          {"workers", c.workers},
          {"extract_chunk", c.extract_chunk}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace nrf
