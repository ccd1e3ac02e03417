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

#include "wdwada/metrics.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "wdwada/errors.hpp"

namespace wdwada {
namespace {

void check_inputs(const char* what, std::span<const double> scores, std::span<const double> labels) {
  if (scores.empty()) throw ContractError(std::string(what) + ": empty input");
  if (scores.size() != labels.size()) {
    throw ContractError(std::string(what) + ": " + std::to_string(scores.size()) + " scores but " +
                        std::to_string(labels.size()) + " labels");
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw ContractError(std::string(what) + ": labels must be 0 or 1");
  }
}

double ratio(std::size_t num, std::size_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

// Indices sorted by descending score; stable so equal scores keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

ConfusionCounts confusion(std::span<const double> scores, std::span<const double> labels, double threshold) {
  check_inputs("confusion", scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1.0;
    if (predicted && actual) {
      ++c.tp;
    } else if (predicted) {
      ++c.fp;
    } else if (actual) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

PrecisionRecallF1 prf1(const ConfusionCounts& c) {
  PrecisionRecallF1 r;
  r.precision = ratio(c.tp, c.tp + c.fp, r.precision_undefined);
  r.recall = ratio(c.tp, c.tp + c.fn, r.recall_undefined);
  const double denom = r.precision + r.recall;
  if (denom == 0.0) {
    r.f1_undefined = true;
    r.f1 = 0.0;
  } else {
    r.f1 = 2.0 * r.precision * r.recall / denom;
  }
  return r;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_inputs("auc", scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the midrank keeps the arithmetic in integers until the end.
  double pos_rank_sum2 = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank2 = static_cast<double>(i + 1 + j);  // 2 * (i+1 + j)/2
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) {
        pos_rank_sum2 += midrank2;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc requires both classes to be present");
  const double u2 = pos_rank_sum2 - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u2 / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const double> labels) {
  check_inputs("roc_curve", scores, labels);
  std::size_t n_pos = 0;
  for (double y : labels) n_pos += y == 1.0 ? 1 : 0;
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("roc_curve requires both classes to be present");

  const auto order = descending_order(scores);
  std::vector<RocPoint> points{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1.0) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    points.push_back({static_cast<double>(fp) / double(n_neg), static_cast<double>(tp) / double(n_pos)});
    i = j;
  }
  return points;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

MetricsReport evaluate(std::span<const double> scores, std::span<const double> labels, double threshold) {
  MetricsReport r;
  r.threshold = threshold;
  r.counts = confusion(scores, labels, threshold);
  r.scores = prf1(r.counts);
  r.auc = auc(scores, labels);
  r.roc = roc_curve(scores, labels);
  return r;
}

RobustnessSummary robustness_summary(std::span<const double> values, double confidence) {
  if (values.size() < 2) throw ContractError("robustness_summary needs at least two runs");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ContractError("confidence must lie in (0, 1)");
  RobustnessSummary s;
  s.values.assign(values.begin(), values.end());
  s.confidence = confidence;
  const double k = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / k;
  const bool constant = std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; });
  if (constant) {
    // Summation rounding must not turn identical runs into a nonzero width.
    s.mean = values[0];
  } else {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (k - 1.0));
  }
  boost::math::students_t dist(k - 1.0);
  const double t = boost::math::quantile(dist, 0.5 + confidence / 2.0);
  s.half_width = t * s.sd / std::sqrt(k);
  s.lower = s.mean - s.half_width;
  s.upper = s.mean + s.half_width;
  return s;
}

nlohmann::json to_json(const MetricsReport& r, bool include_roc) {
  nlohmann::json j = {
      {"threshold", r.threshold},
      {"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}}},
      {"precision", r.scores.precision},
      {"recall", r.scores.recall},
      {"f1", r.scores.f1},
      {"auc", r.auc},
      {"undefined",
       {{"precision", r.scores.precision_undefined},
        {"recall", r.scores.recall_undefined},
        {"f1", r.scores.f1_undefined}}},
  };
  if (include_roc) {
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& p : r.roc) roc.push_back({p.fpr, p.tpr});
    j["roc_points"] = roc;
  }
  return j;
}

nlohmann::json to_json(const RobustnessSummary& s) {
  return {{"values", s.values}, {"confidence", s.confidence}, {"mean", s.mean},   {"sd", s.sd},
          {"lower", s.lower},   {"upper", s.upper},           {"half_width", s.half_width}, {"width", s.width()}};
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.threshold = j.at("threshold").get<double>();
  const auto& c = j.at("counts");
  r.counts = {c.at("tp").get<std::size_t>(), c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>(),
              c.at("fn").get<std::size_t>()};
  r.scores.precision = j.at("precision").get<double>();
  r.scores.recall = j.at("recall").get<double>();
  r.scores.f1 = j.at("f1").get<double>();
  if (j.contains("undefined")) {
    const auto& u = j.at("undefined");
    r.scores.precision_undefined = u.value("precision", false);
    r.scores.recall_undefined = u.value("recall", false);
    r.scores.f1_undefined = u.value("f1", false);
  }
  r.auc = j.at("auc").get<double>();
  if (j.contains("roc_points")) {
    for (const auto& p : j.at("roc_points")) r.roc.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return r;
}

RobustnessSummary robustness_summary_from_json(const nlohmann::json& j) {
  RobustnessSummary s;
  s.values = j.at("values").get<std::vector<double>>();
  s.confidence = j.at("confidence").get<double>();
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  s.lower = j.at("lower").get<double>();
  s.upper = j.at("upper").get<double>();
  s.half_width = j.at("half_width").get<double>();
  return s;
}

void write_roc_csv(std::span<const RocPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "fpr,tpr\n";
  for (const auto& p : points) out << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace wdwada
