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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>

#include "wdwada/data.hpp"
#include "wdwada/errors.hpp"
#include "wdwada/metrics.hpp"

namespace wdwada {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("wdwada_data_" + std::to_string(counter_++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name, std::ios::binary) << text;
    return path_ / name;
  }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Held-out AUC of a logistic regression separating source rows from target rows.
double domain_auc(const RawTable& source, const RawTable& target) {
  const std::size_t d = source.cols();
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < source.rows(); ++i) {
    x.emplace_back(source.values.begin() + std::ptrdiff_t(i * d), source.values.begin() + std::ptrdiff_t((i + 1) * d));
    y.push_back(0.0);
  }
  for (std::size_t i = 0; i < target.rows(); ++i) {
    x.emplace_back(target.values.begin() + std::ptrdiff_t(i * d), target.values.begin() + std::ptrdiff_t((i + 1) * d));
    y.push_back(1.0);
  }
  std::vector<std::size_t> train, test;
  for (std::size_t i = 0; i < x.size(); ++i) (i % 2 ? test : train).push_back(i);
  std::vector<double> w(d + 1, 0.0);
  for (int epoch = 0; epoch < 200; ++epoch) {
    std::vector<double> g(d + 1, 0.0);
    for (auto i : train) {
      double z = w[d];
      for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
      const double r = 1.0 / (1.0 + std::exp(-z)) - y[i];
      for (std::size_t j = 0; j < d; ++j) g[j] += r * x[i][j];
      g[d] += r;
    }
    for (std::size_t j = 0; j <= d; ++j) w[j] -= 0.5 * g[j] / double(train.size());
  }
  std::vector<double> scores, labels;
  for (auto i : test) {
    double z = w[d];
    for (std::size_t j = 0; j < d; ++j) z += w[j] * x[i][j];
    scores.push_back(z);
    labels.push_back(y[i]);
  }
  return auc(scores, labels);
}

TEST(LoadCsv, WellFormed) {
  TempDir dir;
  const auto p = dir.write("a.csv", "a,b,label\n1,2,1\n3,4,0\n5,6.5,1\n");
  const RawTable t = load_csv(p);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 2u);
  EXPECT_EQ(t.at(2, 1), 6.5);
  EXPECT_EQ(t.labels, (std::vector<double>{1, 0, 1}));
  EXPECT_EQ(t.dropped_rows, 0u);
}

TEST(LoadCsv, NonNumericCellDropsRow) {
  TempDir dir;
  const auto p = dir.write("a.csv", "a,b,label\n1,2,1\n3,oops,0\n5,6,0\n7,nan,1\n");
  const RawTable t = load_csv(p);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.dropped_rows, 2u);
  const auto p2 = dir.write("b.csv", "a,b,label\n1,2,1\n3,x,0\n");
  EXPECT_EQ(load_csv(p2).dropped_rows, 1u);
}

TEST(LoadCsv, LabelLiterals) {
  TempDir dir;
  const auto p = dir.write("loans.csv",
                           "amount,rate,loan_status\n1000,0.1,Charged Off\n2000,0.2,Fully Paid\n"
                           "3000,0.3,\" charged off \"\n4000,0.4,Current\n");
  CsvSchema schema;
  schema.label_column = "loan_status";
  schema.positive_label = "charged off";
  schema.negative_label = "fully paid";
  const RawTable t = load_csv(p, schema);
  EXPECT_EQ(t.labels, (std::vector<double>{1, 0, 1}));
  EXPECT_EQ(t.dropped_rows, 1u);
}

TEST(LoadCsv, SelectedColumnsDelimiterAndQuotes) {
  TempDir dir;
  const auto p = dir.write("s.csv", "\xEF\xBB\xBFid;\"x;1\";y;label\r\n7;1.5;2;1\r\n8;2.5;3;0\r\n");
  CsvSchema schema;
  schema.delimiter = ';';
  schema.feature_columns = {"x;1"};
  const RawTable t = load_csv(p, schema);
  EXPECT_EQ(t.cols(), 1u);
  EXPECT_EQ(t.values, (std::vector<double>{1.5, 2.5}));
}

TEST(LoadCsv, Errors) {
  TempDir dir;
  EXPECT_THROW(load_csv(dir.write("nolabel.csv", "a,b\n1,2\n")), SchemaError);
  EXPECT_THROW(load_csv(dir.write("empty.csv", "")), DataError);
  EXPECT_THROW(load_csv(dir.path() / "missing.csv"), DataError);
  EXPECT_THROW(load_csv(dir.write("header_only.csv", "a,label\n")), DataError);
  CsvSchema schema;
  schema.feature_columns = {"zzz"};
  EXPECT_THROW(load_csv(dir.write("cols.csv", "a,label\n1,1\n"), schema), SchemaError);
}

TEST(WriteCsv, RoundTripsExactly) {
  TempDir dir;
  RawTable t;
  t.feature_names = {"f0", "f1"};
  t.values = {0.1, -1e-300, 1.0 / 3.0, 12345.678};
  t.labels = {1, 0};
  write_csv(t, dir.path() / "t.csv");
  const RawTable back = load_csv(dir.path() / "t.csv");
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.labels, t.labels);
}

RawTable synthetic_table(std::size_t n, std::size_t d, std::uint64_t seed) {
  ShiftSpec s;
  s.d = d;
  s.n_source = n;
  s.n_target = n;
  s.seed = seed;
  return generate_shifted_domains(s).source;
}

TEST(MakeSplits, SizesAndDisjointness) {
  const RawTable source = synthetic_table(3000, 6, 1), target = synthetic_table(2500, 6, 2);
  const DomainDataset ds = make_splits(source, target, 2000, 2000, 0.8, 7);
  EXPECT_EQ(ds.source_train().size(), 2000u);
  EXPECT_EQ(ds.target_train().size(), 1600u);
  EXPECT_EQ(ds.target_test().size(), 400u);
  EXPECT_EQ(ds.feature_dim(), 6u);
  std::set<std::size_t> train(ds.record().target_train_rows.begin(), ds.record().target_train_rows.end());
  for (auto r : ds.record().target_test_rows) EXPECT_EQ(train.count(r), 0u);
  EXPECT_EQ(train.size(), 1600u);
}

TEST(MakeSplits, NormalizesWithSourceStatistics) {
  const RawTable source = synthetic_table(3000, 5, 3), target = synthetic_table(1000, 5, 4);
  const DomainDataset ds = make_splits(source, target, 2500, 1000, 0.8, 1);
  const Tensor& x = ds.source_train().features;
  for (std::size_t j = 0; j < 5; ++j) {
    double m = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < x.dim(0); ++i) m += x.at(i, j);
    m /= double(x.dim(0));
    for (std::size_t i = 0; i < x.dim(0); ++i) ss += (x.at(i, j) - m) * (x.at(i, j) - m);
    EXPECT_LT(std::abs(m), 1e-10);
    EXPECT_NEAR(std::sqrt(ss / double(x.dim(0))), 1.0, 1e-10);
  }
}

TEST(MakeSplits, StatsIgnoreTargetData) {
  const RawTable source = synthetic_table(1000, 4, 5);
  RawTable target = synthetic_table(500, 4, 6);
  const auto a = make_splits(source, target, 800, 500, 0.8, 3);
  for (auto& v : target.values) v = v * 100.0 + 7.0;
  const auto b = make_splits(source, target, 800, 500, 0.8, 3);
  EXPECT_EQ(a.normalization().mean, b.normalization().mean);
  EXPECT_EQ(a.normalization().sd, b.normalization().sd);
}

TEST(MakeSplits, DeterministicAndManifestReproduces) {
  const RawTable source = synthetic_table(1000, 4, 7), target = synthetic_table(600, 4, 8);
  const auto a = make_splits(source, target, 900, 500, 0.8, 11);
  const auto b = make_splits(source, target, 900, 500, 0.8, 11);
  EXPECT_EQ(a.record().source_rows, b.record().source_rows);
  EXPECT_EQ(a.record().target_test_rows, b.record().target_test_rows);
  const auto c = apply_split_manifest(source, target, dataset_manifest(a));
  EXPECT_EQ(c.source_train().features, a.source_train().features);
  EXPECT_EQ(c.target_train().features, a.target_train().features);
  EXPECT_EQ(c.target_test().labels, a.target_test().labels);
  EXPECT_EQ(dataset_manifest(c).dump(), dataset_manifest(a).dump());
}

TEST(MakeSplits, Errors) {
  const RawTable source = synthetic_table(100, 4, 9), target = synthetic_table(100, 4, 10);
  EXPECT_THROW(make_splits(source, target, 101, 50, 0.8, 0), DataError);
  EXPECT_THROW(make_splits(source, target, 50, 101, 0.8, 0), DataError);
  EXPECT_THROW(make_splits(source, target, 50, 50, 1.0, 0), ConfigError);
  const RawTable narrow = synthetic_table(100, 3, 11);
  EXPECT_THROW(make_splits(source, narrow, 50, 50, 0.8, 0), DataError);
}

TEST(MakeSplits, TargetLabelsOnlyThroughOracleView) {
  const RawTable source = synthetic_table(500, 4, 12), target = synthetic_table(500, 4, 13);
  const auto ds = make_splits(source, target, 400, 400, 0.75, 2);
  const LabeledPartition oracle = ds.reveal_target_train_labels();
  EXPECT_EQ(oracle.features, ds.target_train().features);
  ASSERT_EQ(oracle.size(), 300u);
  for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(oracle.labels[i], target.labels[ds.record().target_train_rows[i]]);
}

TEST(Synthetic, BitReproducibleAndShaped) {
  ShiftSpec s;
  s.n_source = 500;
  s.n_target = 200;
  s.seed = 7;
  const auto a = generate_shifted_domains(s), b = generate_shifted_domains(s);
  EXPECT_EQ(a.source.values, b.source.values);
  EXPECT_EQ(a.target.values, b.target.values);
  EXPECT_EQ(a.source.cols(), 38u);
  EXPECT_EQ(a.target.rows(), 200u);
  double dot = 0.0;
  for (std::size_t j = 0; j < 38; ++j) dot += a.axis[j] * a.separation[j];
  EXPECT_NEAR(dot, 0.0, 1e-12);
}

TEST(Synthetic, ExpectedPositiveCount) {
  ShiftSpec s;
  s.n_target = 2000;
  s.n_source = 10;
  s.prior_target = 0.05;
  std::size_t total = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    s.seed = seed;
    const auto t = generate_shifted_domains(s).target;
    total += static_cast<std::size_t>(std::count(t.labels.begin(), t.labels.end(), 1.0));
  }
  EXPECT_NEAR(double(total) / 20.0, 100.0, 10.0);
}

TEST(Synthetic, ValidationRejectsBadSpecs) {
  ShiftSpec s;
  s.shift = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.prior_source = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = {};
  s.cov_scale = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Synthetic, DomainDiscriminationOracle) {
  ShiftSpec s;
  s.n_source = 2000;
  s.n_target = 2000;
  s.prior_target = s.prior_source;
  s.shift = 0.0;
  s.seed = 3;
  const auto same = generate_shifted_domains(s);
  EXPECT_NEAR(domain_auc(same.source, same.target), 0.5, 0.05);
  s.shift = 4.0;
  const auto far = generate_shifted_domains(s);
  EXPECT_GT(domain_auc(far.source, far.target), 0.95);
}

TEST(Synthetic, NoShiftMeansAgree) {
  ShiftSpec s;
  s.n_source = 10000;
  s.n_target = 10000;
  s.prior_target = s.prior_source;
  s.shift = 0.0;
  s.seed = 5;
  const auto dom = generate_shifted_domains(s);
  const std::size_t d = s.d;
  const double n = 10000.0;
  for (std::size_t j = 0; j < d; ++j) {
    double ms = 0, mt = 0, vs = 0, vt = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
      ms += dom.source.at(i, j);
      mt += dom.target.at(i, j);
    }
    ms /= n;
    mt /= n;
    for (std::size_t i = 0; i < 10000; ++i) {
      vs += (dom.source.at(i, j) - ms) * (dom.source.at(i, j) - ms);
      vt += (dom.target.at(i, j) - mt) * (dom.target.at(i, j) - mt);
    }
    // Standard error of a difference of two independent means.
    const double se = std::sqrt(vs / (n - 1) / n + vt / (n - 1) / n);
    EXPECT_LT(std::abs(ms - mt), 3.0 * se) << "coordinate " << j;
  }
}

TEST(Synthetic, CsvOutputIsByteStable) {
  TempDir dir;
  ShiftSpec s;
  s.n_source = 50;
  s.n_target = 20;
  s.seed = 9;
  write_csv(generate_shifted_domains(s).source, dir.path() / "a.csv");
  write_csv(generate_shifted_domains(s).source, dir.path() / "b.csv");
  EXPECT_EQ(slurp(dir.path() / "a.csv"), slurp(dir.path() / "b.csv"));
}

TEST(BatchIter, SizesAndCoverage) {
  const auto b = batch_iter(100, 32, 1, 0);
  ASSERT_EQ(b.size(), 4u);
  EXPECT_EQ(b[0].size(), 32u);
  EXPECT_EQ(b[3].size(), 4u);
  std::vector<int> seen(100, 0);
  for (const auto& batch : b) {
    for (auto i : batch) ++seen[i];
  }
  for (int c : seen) EXPECT_EQ(c, 1);
  EXPECT_EQ(batch_iter(65, 32, 1, 0).size(), 2u);  // trailing singleton dropped
}

TEST(BatchIter, OrderDependsOnSeedAndEpoch) {
  EXPECT_EQ(batch_iter(50, 8, 3, 2), batch_iter(50, 8, 3, 2));
  EXPECT_NE(batch_iter(50, 8, 3, 2), batch_iter(50, 8, 3, 3));
  EXPECT_NE(batch_iter(50, 8, 3, 2), batch_iter(50, 8, 4, 2));
  EXPECT_THROW(batch_iter(10, 0, 0, 0), ConfigError);
}

}  // namespace
}  // namespace wdwada
