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

// Experiment reports.
//
// One row per (grid cell, trial).  Failed cells keep their row with an error
// string and NaN metrics so ablation grids stay rectangular.  The CSV view
// has the fixed 10-column header below with floats printed as %.6f (failed
// metrics print "nan"); the JSON view carries full-precision values plus the
// error field and per-cell aggregates, and round-trips exactly.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nrf/errors.hpp"
#include "nrf/probe.hpp"

namespace nrf {

struct ReportRow {
  std::string dataset;
  std::string arch;
  std::string init;
  std::string activation;
  std::int64_t n = 0;
  int trial = 0;
  double train_acc = std::numeric_limits<double>::quiet_NaN();
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double best_l2 = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty = success

  bool failed() const { return !error.empty(); }
};

struct Report {
  std::vector<ReportRow> rows;
};

/// Mean and standard deviation over the successful trials of one grid cell.
struct CellAggregate {
  std::string dataset;
  std::string arch;
  std::string init;
  std::string activation;
  std::int64_t n = 0;
  int trials = 0;  // successful trials only
  double train_mean = 0.0, train_std = 0.0;
  double test_mean = 0.0, test_std = 0.0;
};

/// Aggregates in first-appearance order of (dataset, arch, init, activation,
/// n).  Population standard deviation, so one trial gives std 0.
inline std::vector<CellAggregate> aggregate_report(const Report& report) {
  std::vector<CellAggregate> cells;
  auto find_cell = [&](const ReportRow& r) -> CellAggregate& {
    for (auto& c : cells) {
      if (c.dataset == r.dataset && c.arch == r.arch && c.init == r.init &&
          c.activation == r.activation && c.n == r.n) {
        return c;
      }
    }
    CellAggregate c;
    c.dataset = r.dataset;
    c.arch = r.arch;
    c.init = r.init;
    c.activation = r.activation;
    c.n = r.n;
    cells.push_back(c);
    return cells.back();
  };
  // First pass: means.
  for (const auto& r : report.rows) {
    CellAggregate& c = find_cell(r);
    if (r.failed()) continue;
    ++c.trials;
    c.train_mean += r.train_acc;
    c.test_mean += r.test_acc;
  }
  for (auto& c : cells) {
    if (c.trials > 0) {
      c.train_mean /= c.trials;
      c.test_mean /= c.trials;
    }
  }
  // Second pass: spreads.
  for (const auto& r : report.rows) {
    if (r.failed()) continue;
    CellAggregate& c = find_cell(r);
    const double dt = r.train_acc - c.train_mean;
    const double de = r.test_acc - c.test_mean;
    c.train_std += dt * dt;
    c.test_std += de * de;
  }
  for (auto& c : cells) {
    if (c.trials > 0) {
      c.train_std = std::sqrt(c.train_std / c.trials);
      c.test_std = std::sqrt(c.test_std / c.trials);
    }
  }
  return cells;
}

namespace detail {

inline std::string fixed6(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

inline constexpr const char* kReportCsvHeader =
    "dataset,arch,init,activation,n,trial,train_acc,test_acc,best_l2,wall_time_s";

inline std::string report_to_csv(const Report& report) {
  std::string out = kReportCsvHeader;
  out += '\n';
  for (const auto& r : report.rows) {
    out += r.dataset + ',' + r.arch + ',' + r.init + ',' + r.activation + ',';
    out += std::to_string(r.n) + ',' + std::to_string(r.trial) + ',';
    out += detail::fixed6(r.train_acc) + ',' + detail::fixed6(r.test_acc) + ',';
    out += detail::fixed6(r.best_l2) + ',' + detail::fixed6(r.wall_time_s) + '\n';
  }
  return out;
}

namespace detail {

inline nlohmann::json metric_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline double metric_from(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return v.get<double>();
}

}  // namespace detail

inline nlohmann::json report_to_json(const Report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"dataset", r.dataset},
                    {"arch", r.arch},
                    {"init", r.init},
                    {"activation", r.activation},
                    {"n", r.n},
                    {"trial", r.trial},
                    {"train_acc", detail::metric_or_null(r.train_acc)},
                    {"test_acc", detail::metric_or_null(r.test_acc)},
                    {"best_l2", detail::metric_or_null(r.best_l2)},
                    {"wall_time_s", detail::metric_or_null(r.wall_time_s)},
                    {"error", r.error}});
  }
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& c : aggregate_report(report)) {
    nlohmann::json a = {{"dataset", c.dataset}, {"arch", c.arch},
                        {"init", c.init},       {"activation", c.activation},
                        {"n", c.n},             {"trials", c.trials}};
    if (c.trials > 0) {
      a["train_acc_mean"] = c.train_mean;
      a["train_acc_std"] = c.train_std;
      a["test_acc_mean"] = c.test_mean;
      a["test_acc_std"] = c.test_std;
    } else {
      a["train_acc_mean"] = nullptr;
      a["train_acc_std"] = nullptr;
      a["test_acc_mean"] = nullptr;
      a["test_acc_std"] = nullptr;
    }
    aggregates.push_back(a);
  }
  return {{"schema_version", 1}, {"rows", rows}, {"aggregates", aggregates}};
}

inline Report report_from_json(const nlohmann::json& j) {
  for (const auto& [key, _] : j.items()) {
    if (key != "schema_version" && key != "rows" && key != "aggregates") {
      throw config_error("unknown key '" + key + "' in report");
    }
  }
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1) {
    throw format_error("report schema_version must be 1");
  }
  static const std::set<std::string> row_keys = {"dataset", "arch",     "init",   "activation",
                                                 "n",       "trial",    "train_acc",
                                                 "test_acc", "best_l2", "wall_time_s",
                                                 "error"};
  Report report;
  for (const auto& jr : j.at("rows")) {
    for (const auto& [key, _] : jr.items()) {
      if (!row_keys.count(key)) throw config_error("unknown key '" + key + "' in report row");
    }
    ReportRow r;
    r.dataset = jr.at("dataset").get<std::string>();
    r.arch = jr.at("arch").get<std::string>();
    r.init = jr.at("init").get<std::string>();
    r.activation = jr.at("activation").get<std::string>();
    r.n = jr.at("n").get<std::int64_t>();
    r.trial = jr.at("trial").get<int>();
    r.train_acc = detail::metric_from(jr, "train_acc");
    r.test_acc = detail::metric_from(jr, "test_acc");
    r.best_l2 = detail::metric_from(jr, "best_l2");
    r.wall_time_s = detail::metric_from(jr, "wall_time_s");
    r.error = jr.at("error").get<std::string>();
    report.rows.push_back(std::move(r));
  }
  return report;
}

enum class ReportFormat { csv, json };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw config_error("unknown report format '" + s + "'");
}

inline void emit_report(const Report& report, ReportFormat format, const std::string& path) {
  if (report.rows.empty()) throw config_error("cannot emit an empty report");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot write " + path);
  if (format == ReportFormat::csv) {
    out << report_to_csv(report);
  } else {
    out << report_to_json(report).dump(2) << '\n';
  }
  if (!out) throw io_error("write failed on " + path);
}

/// Per-example class probabilities as CSV, header = class names.
inline std::string proba_csv(const ProbeModel& model, const FeatureView& features,
                             const std::vector<std::string>& class_names) {
  if (static_cast<int>(class_names.size()) != model.k_classes) {
    throw shape_error("class name count does not match probe classes");
  }
  const std::vector<double> proba = predict_proba(model, features);
  std::string out;
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    if (c) out += ',';
    out += class_names[c];
  }
  out += '\n';
  for (std::int64_t i = 0; i < features.num_examples; ++i) {
    for (int c = 0; c < model.k_classes; ++c) {
      if (c) out += ',';
      out += detail::fixed6(proba[static_cast<std::size_t>(i) * model.k_classes + c]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace nrf
