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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wdwada/tensor.hpp"

namespace wdwada {

// Parsed numeric table. `values` is row-major with feature_names.size() columns.
struct RawTable {
  std::vector<std::string> feature_names;
  std::vector<double> values;
  std::vector<double> labels;  // 0 or 1
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return feature_names.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * cols() + col]; }
};

struct CsvSchema {
  std::string label_column = "label";
  std::vector<std::string> feature_columns;  // empty: every column except the label
  std::string positive_label = "1";
  // When set, label cells matching neither literal drop the row.
  std::optional<std::string> negative_label;
  char delimiter = ',';
};

// Rows whose feature cells do not parse as finite numbers are dropped and
// counted in RawTable::dropped_rows. Label literals compare case-insensitively
// after trimming.
RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
// Writes feature columns followed by a 0/1 label column, full round-trip precision.
void write_csv(const RawTable& table, const std::filesystem::path& path, const std::string& label_column = "label",
               char delimiter = ',');

struct LabeledPartition {
  Tensor features;  // [n x d]
  Tensor labels;    // [n]
  std::size_t size() const { return labels.numel(); }
};

// Features only; target training labels never reach adaptation code.
struct UnlabeledPartition {
  Tensor features;
  std::size_t size() const { return features.dim(0); }
};

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> sd;  // population sd; constant columns use 1
};

struct SplitRecord {
  std::uint64_t seed = 0;
  double train_frac = 0.8;
  std::vector<std::size_t> source_rows;
  std::vector<std::size_t> target_train_rows;
  std::vector<std::size_t> target_test_rows;
};

class DomainDataset {
 public:
  DomainDataset(LabeledPartition source_train, UnlabeledPartition target_train, LabeledPartition target_test,
                Tensor target_train_labels, std::vector<std::string> feature_names, NormalizationStats stats,
                SplitRecord record);

  const LabeledPartition& source_train() const { return source_train_; }
  const UnlabeledPartition& target_train() const { return target_train_; }
  const LabeledPartition& target_test() const { return target_test_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const NormalizationStats& normalization() const { return stats_; }
  const SplitRecord& record() const { return record_; }
  std::size_t feature_dim() const { return feature_names_.size(); }

  // Labeled view of the target training rows. Only the target-only baseline,
  // which is an oracle by definition, may use this.
  LabeledPartition reveal_target_train_labels() const;

 private:
  LabeledPartition source_train_;
  UnlabeledPartition target_train_;
  LabeledPartition target_test_;
  Tensor target_train_labels_;
  std::vector<std::string> feature_names_;
  NormalizationStats stats_;
  SplitRecord record_;
};

// Samples source_sample source rows and target_sample target rows, splits the
// target rows train_frac / (1 - train_frac) and z-scores every partition with
// source_train statistics.
DomainDataset make_splits(const RawTable& source, const RawTable& target, std::size_t source_sample,
                          std::size_t target_sample, double train_frac, std::uint64_t seed);

// Rebuilds the exact split described by a manifest written by dataset_manifest().
DomainDataset apply_split_manifest(const RawTable& source, const RawTable& target, const nlohmann::json& manifest);
nlohmann::json dataset_manifest(const DomainDataset& dataset);

// Parametric two-domain generator.
//
// Each class is a Gaussian mixture with `components` equally weighted
// components and identity covariance. A random unit direction `axis` carries
// the domain shift; the mixture components of each class are spread along that
// same axis (class 1 by +-positive_spread, class 0 by +-negative_spread), and
// class 1 is further offset by class_separation along a random direction
// orthogonal to it. The target domain moves every sample by `shift` along the
// axis and multiplies the covariance by cov_scale.
struct ShiftSpec {
  std::size_t d = 38;
  double prior_source = 0.10;
  double prior_target = 0.05;
  double shift = 2.0;
  double cov_scale = 1.0;
  std::size_t components = 2;
  double class_separation = 1.5;
  double positive_spread = 2.0;
  double negative_spread = 0.5;
  std::size_t n_source = 20000;
  std::size_t n_target = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json shift_spec_to_json(const ShiftSpec& spec);
ShiftSpec shift_spec_from_json(const nlohmann::json& j);

struct SyntheticDomains {
  RawTable source;
  RawTable target;
  std::vector<double> axis;        // unit shift direction
  std::vector<double> separation;  // unit class-offset direction
};

SyntheticDomains generate_shifted_domains(const ShiftSpec& spec);

// Row indices of one epoch, shuffled by (seed, epoch). A final batch with
// fewer than two rows is dropped.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t partition_size, std::size_t batch_size,
                                                 std::uint64_t seed, std::uint64_t epoch);

}  // namespace wdwada
