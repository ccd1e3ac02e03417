// Copyright 2026 The wdwada Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Repeated-run experiments and result reporting.
//
// Layout of an experiment directory:
//   experiment.json        effective ExperimentSpec
//   dataset.json           split manifest
//   summary.json           per-run metrics and the AUC confidence interval
//   run_000/model.{bin,json}
//   run_000/trainlog.jsonl one EpochRecord per line
//   run_000/metrics.json   MetricsReport on target_test
//   run_000/roc.csv

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdwada/data.hpp"
#include "wdwada/metrics.hpp"
#include "wdwada/networks.hpp"
#include "wdwada/training.hpp"

namespace wdwada {

struct CsvSource {
  std::filesystem::path source;
  std::filesystem::path target;
  CsvSchema schema;
};

struct ExperimentSpec {
  std::string task = "task";
  TrainConfig train;  // train.seed is the seed of run 0; run r uses train.seed + r
  ModelConfig model;
  std::optional<CsvSource> csv;
  std::optional<ShiftSpec> synthetic;
  std::size_t source_sample = 0;  // 0: every source row
  std::size_t target_sample = 0;  // 0: every target row
  double train_frac = 0.8;
  std::uint64_t split_seed = 0;
  std::size_t runs = 5;
  std::size_t jobs = 1;
  std::filesystem::path output_dir = "results";

  // Exactly one data source, runs >= 1, jobs >= 1, valid nested configs.
  void validate() const;
};

nlohmann::json experiment_spec_to_json(const ExperimentSpec& spec);
// Keys absent from `j` keep their value in `base`.
ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, ExperimentSpec base = {});
ExperimentSpec load_experiment_file(const std::filesystem::path& path, ExperimentSpec base = {});

// Loads or generates the two domains and applies the split.
DomainDataset load_experiment_data(const ExperimentSpec& spec);

struct RunResult {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  MetricsReport report;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::optional<RobustnessSummary> auc_summary;  // present when runs >= 2
};

// Trains spec.runs models and writes the directory layout above. Runs may
// execute on spec.jobs threads; each run writes only its own subdirectory.
// A NumericalError aborts with the partial training log left on disk.
ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* progress = nullptr);

// Comparison table over finished experiment directories.
struct ReportCell {
  std::string task;
  TrainMode mode = TrainMode::kWdWada;
  double precision = 0.0;  // means over runs
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::optional<RobustnessSummary> auc_summary;
  std::filesystem::path source_dir;
};

struct Report {
  std::vector<ReportCell> cells;
};

// Throws DataError naming the offending file when a result is missing or corrupt.
Report collect_report(const std::vector<std::filesystem::path>& dirs);
// Rows: task x {Precision, F1-score, AUC, AUC 95% CI}; one column per mode present.
std::string render_report(const Report& report);
nlohmann::json to_json(const Report& report);
// Writes report.json, table.txt and roc_<task>_<mode>.csv (the run with the
// median AUC) into out_dir.
void write_report(const Report& report, const std::filesystem::path& out_dir);

std::string column_label(TrainMode mode);

}  // namespace wdwada
