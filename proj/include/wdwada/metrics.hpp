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

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace wdwada {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A score >= threshold predicts the positive class. Labels must be 0 or 1.
ConfusionCounts confusion(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

PrecisionRecallF1 prf1(const ConfusionCounts& counts);

// Rank-based (Mann-Whitney) AUC with midranks for ties. Throws MetricError
// unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// ROC vertices from (0,0) to (1,1), one per distinct score. Tied scores form a
// single diagonal step, so the trapezoidal area equals auc().
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> labels);
double trapezoid_area(std::span<const RocPoint> points);

struct MetricsReport {
  double threshold = 0.5;
  ConfusionCounts counts;
  PrecisionRecallF1 scores;
  double auc = 0.0;
  std::vector<RocPoint> roc;
};

MetricsReport evaluate(std::span<const double> scores, std::span<const double> labels, double threshold = 0.5);

struct RobustnessSummary {
  std::vector<double> values;
  double confidence = 0.95;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (k - 1)
  double half_width = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
};

// mean +- t_{(1+confidence)/2, k-1} * s / sqrt(k). Requires k >= 2.
RobustnessSummary robustness_summary(std::span<const double> values, double confidence = 0.95);

nlohmann::json to_json(const MetricsReport& report, bool include_roc = false);
nlohmann::json to_json(const RobustnessSummary& summary);
MetricsReport metrics_report_from_json(const nlohmann::json& j);
RobustnessSummary robustness_summary_from_json(const nlohmann::json& j);

// Two columns with header "fpr,tpr".
void write_roc_csv(std::span<const RocPoint> points, const std::filesystem::path& path);

}  // namespace wdwada
