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

#include "wdwada/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "wdwada/errors.hpp"

namespace wdwada {
namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Splits one CSV record; double quotes group cells and "" escapes a quote.
std::vector<std::string> split_record(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::size_t> sample_rows(std::size_t population, std::size_t count, std::mt19937_64& rng,
                                     const char* what) {
  if (count > population) {
    throw DataError(std::string(what) + ": requested " + std::to_string(count) + " rows but only " +
                    std::to_string(population) + " are available");
  }
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first `count` slots are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

Tensor gather_features(const RawTable& table, const std::vector<std::size_t>& rows, const NormalizationStats& stats) {
  const std::size_t d = table.cols();
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (table.at(rows[i], j) - stats.mean[j]) / stats.sd[j];
  }
  return out;
}

Tensor gather_labels(const RawTable& table, const std::vector<std::size_t>& rows) {
  Tensor out({rows.size()});
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = table.labels[rows[i]];
  return out;
}

NormalizationStats compute_stats(const RawTable& table, const std::vector<std::size_t>& rows) {
  const std::size_t d = table.cols();
  NormalizationStats s;
  s.mean.assign(d, 0.0);
  s.sd.assign(d, 0.0);
  const double n = static_cast<double>(rows.size());
  for (auto r : rows)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += table.at(r, j);
  for (auto& m : s.mean) m /= n;
  for (auto r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = table.at(r, j) - s.mean[j];
      s.sd[j] += dev * dev;
    }
  }
  for (auto& v : s.sd) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

void check_compatible(const RawTable& source, const RawTable& target) {
  if (source.cols() == 0) throw DataError("source table has no feature columns");
  if (source.cols() != target.cols()) {
    throw DataError("source has " + std::to_string(source.cols()) + " features but target has " +
                    std::to_string(target.cols()));
  }
}

DomainDataset assemble(const RawTable& source, const RawTable& target, SplitRecord record,
                       std::optional<NormalizationStats> stats_override = std::nullopt) {
  if (record.source_rows.empty() || record.target_train_rows.empty() || record.target_test_rows.empty()) {
    throw DataError("every partition must hold at least one row");
  }
  NormalizationStats stats = stats_override ? *stats_override : compute_stats(source, record.source_rows);
  LabeledPartition src{gather_features(source, record.source_rows, stats), gather_labels(source, record.source_rows)};
  UnlabeledPartition tt{gather_features(target, record.target_train_rows, stats)};
  Tensor tt_labels = gather_labels(target, record.target_train_rows);
  LabeledPartition test{gather_features(target, record.target_test_rows, stats),
                        gather_labels(target, record.target_test_rows)};
  return DomainDataset(std::move(src), std::move(tt), std::move(test), std::move(tt_labels), source.feature_names,
                       std::move(stats), std::move(record));
}

std::vector<double> random_unit(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<double> v(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = n01(rng);
      norm += x * x;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

}  // namespace

RawTable load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw DataError(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_record(line, schema.delimiter);

  auto column_of = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t label_col = column_of(schema.label_column);
  std::vector<std::size_t> feature_cols;
  RawTable table;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == label_col) continue;
      feature_cols.push_back(i);
      table.feature_names.push_back(header[i]);
    }
  } else {
    for (const auto& name : schema.feature_columns) {
      feature_cols.push_back(column_of(name));
      table.feature_names.push_back(name);
    }
  }
  if (feature_cols.empty()) throw SchemaError(path.string() + ": no feature columns");

  const std::string pos = lower(trim(schema.positive_label));
  const std::optional<std::string> neg =
      schema.negative_label ? std::optional<std::string>(lower(trim(*schema.negative_label))) : std::nullopt;

  std::vector<double> row(feature_cols.size());
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_record(line, schema.delimiter);
    if (cells.size() != header.size()) {
      ++table.dropped_rows;
      continue;
    }
    const std::string label = lower(cells[label_col]);
    double y = 0.0;
    if (label == pos) {
      y = 1.0;
    } else if (neg && label != *neg) {
      ++table.dropped_rows;
      continue;
    }
    bool ok = true;
    for (std::size_t j = 0; j < feature_cols.size() && ok; ++j) {
      auto v = parse_number(cells[feature_cols[j]]);
      if (v) {
        row[j] = *v;
      } else {
        ok = false;
      }
    }
    if (!ok) {
      ++table.dropped_rows;
      continue;
    }
    table.values.insert(table.values.end(), row.begin(), row.end());
    table.labels.push_back(y);
  }
  if (table.rows() == 0) throw DataError(path.string() + " holds no usable rows");
  return table;
}

void write_csv(const RawTable& table, const std::filesystem::path& path, const std::string& label_column,
               char delimiter) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& name : table.feature_names) out << name << delimiter;
  out << label_column << '\n';
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.cols(); ++j) out << format_double(table.at(i, j)) << delimiter;
    out << (table.labels[i] == 1.0 ? '1' : '0') << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

DomainDataset::DomainDataset(LabeledPartition source_train, UnlabeledPartition target_train,
                             LabeledPartition target_test, Tensor target_train_labels,
                             std::vector<std::string> feature_names, NormalizationStats stats, SplitRecord record)
    : source_train_(std::move(source_train)),
      target_train_(std::move(target_train)),
      target_test_(std::move(target_test)),
      target_train_labels_(std::move(target_train_labels)),
      feature_names_(std::move(feature_names)),
      stats_(std::move(stats)),
      record_(std::move(record)) {
  const std::size_t d = feature_names_.size();
  if (source_train_.features.dim(1) != d || target_train_.features.dim(1) != d || target_test_.features.dim(1) != d) {
    throw DataError("partitions disagree on the feature dimension");
  }
}

LabeledPartition DomainDataset::reveal_target_train_labels() const {
  return {target_train_.features, target_train_labels_};
}

DomainDataset make_splits(const RawTable& source, const RawTable& target, std::size_t source_sample,
                          std::size_t target_sample, double train_frac, std::uint64_t seed) {
  check_compatible(source, target);
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  SplitRecord record;
  record.seed = seed;
  record.train_frac = train_frac;
  record.source_rows = sample_rows(source.rows(), source_sample, rng, "source sample");
  auto target_rows = sample_rows(target.rows(), target_sample, rng, "target sample");
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(target_sample)));
  record.target_train_rows.assign(target_rows.begin(), target_rows.begin() + std::ptrdiff_t(n_train));
  record.target_test_rows.assign(target_rows.begin() + std::ptrdiff_t(n_train), target_rows.end());
  return assemble(source, target, std::move(record));
}

nlohmann::json dataset_manifest(const DomainDataset& ds) {
  const auto& r = ds.record();
  return {
      {"seed", r.seed},
      {"train_frac", r.train_frac},
      {"feature_names", ds.feature_names()},
      {"source_rows", r.source_rows},
      {"target_train_rows", r.target_train_rows},
      {"target_test_rows", r.target_test_rows},
      {"normalization", {{"mean", ds.normalization().mean}, {"sd", ds.normalization().sd}}},
  };
}

DomainDataset apply_split_manifest(const RawTable& source, const RawTable& target, const nlohmann::json& manifest) {
  check_compatible(source, target);
  SplitRecord record;
  NormalizationStats stats;
  try {
    record.seed = manifest.at("seed").get<std::uint64_t>();
    record.train_frac = manifest.at("train_frac").get<double>();
    record.source_rows = manifest.at("source_rows").get<std::vector<std::size_t>>();
    record.target_train_rows = manifest.at("target_train_rows").get<std::vector<std::size_t>>();
    record.target_test_rows = manifest.at("target_test_rows").get<std::vector<std::size_t>>();
    stats.mean = manifest.at("normalization").at("mean").get<std::vector<double>>();
    stats.sd = manifest.at("normalization").at("sd").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid dataset manifest: ") + e.what());
  }
  auto in_range = [](const std::vector<std::size_t>& rows, std::size_t n) {
    return std::all_of(rows.begin(), rows.end(), [n](std::size_t r) { return r < n; });
  };
  if (!in_range(record.source_rows, source.rows()) || !in_range(record.target_train_rows, target.rows()) ||
      !in_range(record.target_test_rows, target.rows()) || stats.mean.size() != source.cols() ||
      stats.sd.size() != source.cols()) {
    throw DataError("dataset manifest does not match the supplied tables");
  }
  return assemble(source, target, std::move(record), std::move(stats));
}

void ShiftSpec::validate() const {
  if (d < 2) throw ConfigError("synthetic data needs d >= 2");
  if (!(prior_source > 0.0 && prior_source < 1.0) || !(prior_target > 0.0 && prior_target < 1.0)) {
    throw ConfigError("class priors must lie in (0, 1)");
  }
  if (!std::isfinite(shift) || shift < 0.0) throw ConfigError("shift magnitude must be finite and >= 0");
  if (!std::isfinite(cov_scale) || cov_scale <= 0.0) throw ConfigError("cov_scale must be finite and > 0");
  if (components == 0) throw ConfigError("components must be >= 1");
  if (!std::isfinite(class_separation) || !std::isfinite(positive_spread) || !std::isfinite(negative_spread) ||
      positive_spread < 0.0 || negative_spread < 0.0) {
    throw ConfigError("mixture geometry must be finite with non-negative spreads");
  }
  if (n_source == 0 || n_target == 0) throw ConfigError("domain sizes must be positive");
}

nlohmann::json shift_spec_to_json(const ShiftSpec& s) {
  return {{"d", s.d},
          {"prior_source", s.prior_source},
          {"prior_target", s.prior_target},
          {"shift", s.shift},
          {"cov_scale", s.cov_scale},
          {"components", s.components},
          {"class_separation", s.class_separation},
          {"positive_spread", s.positive_spread},
          {"negative_spread", s.negative_spread},
          {"n_source", s.n_source},
          {"n_target", s.n_target},
          {"seed", s.seed}};
}

ShiftSpec shift_spec_from_json(const nlohmann::json& j) {
  ShiftSpec s;
  try {
    s.d = j.value("d", s.d);
    s.prior_source = j.value("prior_source", s.prior_source);
    s.prior_target = j.value("prior_target", s.prior_target);
    s.shift = j.value("shift", s.shift);
    s.cov_scale = j.value("cov_scale", s.cov_scale);
    s.components = j.value("components", s.components);
    s.class_separation = j.value("class_separation", s.class_separation);
    s.positive_spread = j.value("positive_spread", s.positive_spread);
    s.negative_spread = j.value("negative_spread", s.negative_spread);
    s.n_source = j.value("n_source", s.n_source);
    s.n_target = j.value("n_target", s.n_target);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticDomains generate_shifted_domains(const ShiftSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  SyntheticDomains out;
  out.axis = random_unit(spec.d, rng);
  // Class offset direction: random, then made orthogonal to the shift axis.
  auto sep = random_unit(spec.d, rng);
  const double proj = std::inner_product(sep.begin(), sep.end(), out.axis.begin(), 0.0);
  double norm = 0.0;
  for (std::size_t j = 0; j < spec.d; ++j) {
    sep[j] -= proj * out.axis[j];
    norm += sep[j] * sep[j];
  }
  norm = std::sqrt(norm);
  for (auto& x : sep) x /= norm;
  out.separation = sep;

  // Component k of K sits at offset -1 + 2k/(K-1) along the axis (0 for K = 1).
  auto offset = [&](std::size_t k) {
    return spec.components == 1 ? 0.0 : -1.0 + 2.0 * double(k) / double(spec.components - 1);
  };

  std::vector<std::string> names(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) names[j] = "f" + std::to_string(j);

  auto draw = [&](std::size_t n, double prior, double shift, double sd_scale) {
    RawTable t;
    t.feature_names = names;
    t.values.resize(n * spec.d);
    t.labels.resize(n);
    std::bernoulli_distribution label(prior);
    std::uniform_int_distribution<std::size_t> component(0, spec.components - 1);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      const bool positive = label(rng);
      const double spread = positive ? spec.positive_spread : spec.negative_spread;
      const double along = spread * offset(component(rng)) + shift;
      const double across = positive ? spec.class_separation : 0.0;
      for (std::size_t j = 0; j < spec.d; ++j) {
        t.values[i * spec.d + j] = along * out.axis[j] + across * sep[j] + sd_scale * n01(rng);
      }
      t.labels[i] = positive ? 1.0 : 0.0;
    }
    return t;
  };
  out.source = draw(spec.n_source, spec.prior_source, 0.0, 1.0);
  out.target = draw(spec.n_target, spec.prior_target, spec.shift, std::sqrt(spec.cov_scale));
  return out;
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t partition_size, std::size_t batch_size,
                                                 std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<std::size_t> order(partition_size);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32), 0x5eedu};
  std::mt19937_64 rng(seq);
  for (std::size_t i = partition_size; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < partition_size; start += batch_size) {
    const std::size_t end = std::min(partition_size, start + batch_size);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + std::ptrdiff_t(start), order.begin() + std::ptrdiff_t(end));
  }
  return batches;
}

}  // namespace wdwada
