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

#include "wdwada/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "wdwada/checkpoint.hpp"
#include "wdwada/errors.hpp"

namespace wdwada {
namespace fs = std::filesystem;

namespace {

constexpr TrainMode kColumnOrder[] = {TrainMode::kTargetOnlyCnn, TrainMode::kSourceOnlyCnn, TrainMode::kDann,
                                      TrainMode::kWdAda, TrainMode::kWdWada};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt JSON in " + path.string() + ": " + e.what());
  }
}

nlohmann::json schema_to_json(const CsvSchema& s) {
  nlohmann::json j = {{"label_column", s.label_column},
                      {"feature_columns", s.feature_columns},
                      {"positive_label", s.positive_label},
                      {"delimiter", std::string(1, s.delimiter)}};
  j["negative_label"] = s.negative_label ? nlohmann::json(*s.negative_label) : nlohmann::json(nullptr);
  return j;
}

CsvSchema schema_from_json(const nlohmann::json& j, CsvSchema s) {
  s.label_column = j.value("label_column", s.label_column);
  s.feature_columns = j.value("feature_columns", s.feature_columns);
  s.positive_label = j.value("positive_label", s.positive_label);
  if (j.contains("negative_label")) {
    const auto& n = j.at("negative_label");
    if (n.is_null()) {
      s.negative_label.reset();
    } else {
      s.negative_label = n.get<std::string>();
    }
  }
  if (j.contains("delimiter")) {
    const auto d = j.at("delimiter").get<std::string>();
    if (d.size() != 1) throw ConfigError("delimiter must be a single character");
    s.delimiter = d[0];
  }
  return s;
}

std::string run_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%03zu", index);
  return buf;
}

RunResult run_once(const ExperimentSpec& spec, const DomainDataset& data, std::size_t index) {
  RunResult result;
  result.index = index;
  result.seed = spec.train.seed + index;
  const fs::path dir = spec.output_dir / run_dir_name(index);
  fs::create_directories(dir);

  TrainConfig cfg = spec.train;
  cfg.seed = result.seed;
  ModelBundle model = init_model(result.seed, spec.model);

  std::ofstream log(dir / "trainlog.jsonl", std::ios::binary | std::ios::trunc);
  if (!log) throw DataError("cannot write " + (dir / "trainlog.jsonl").string());
  train_mode(model, data, cfg, [&](const EpochRecord& rec) { log << to_json(rec).dump() << '\n' << std::flush; });

  const LabeledPartition& test = data.target_test();
  const Tensor probs = predict_proba(model, test.features);
  if (!probs.all_finite()) throw NumericalError("non-finite predictions on target_test");
  result.report = evaluate(probs.data(), test.labels.data(), cfg.threshold);

  save_checkpoint(model, dir / "model");
  write_json(dir / "metrics.json", to_json(result.report, true));
  write_roc_csv(result.report.roc, dir / "roc.csv");
  return result;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (csv.has_value() == synthetic.has_value()) {
    throw ConfigError("exactly one data source is required (csv paths or a synthetic spec)");
  }
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train_frac must lie in (0, 1)");
  if (task.empty()) throw ConfigError("task name must not be empty");
  if (synthetic) synthetic->validate();
  train.validate();
  compute_shape_chain(model);
}

nlohmann::json experiment_spec_to_json(const ExperimentSpec& s) {
  nlohmann::json data;
  if (s.csv) {
    data = {{"kind", "csv"},
            {"source", s.csv->source.generic_string()},
            {"target", s.csv->target.generic_string()},
            {"schema", schema_to_json(s.csv->schema)}};
  } else if (s.synthetic) {
    data = {{"kind", "synthetic"}, {"spec", shift_spec_to_json(*s.synthetic)}};
  }
  return {{"task", s.task},
          {"data", data},
          {"source_sample", s.source_sample},
          {"target_sample", s.target_sample},
          {"train_frac", s.train_frac},
          {"split_seed", s.split_seed},
          {"runs", s.runs},
          {"jobs", s.jobs},
          {"train", train_config_to_json(s.train)},
          {"model", model_config_to_json(s.model)},
          {"output_dir", s.output_dir.generic_string()}};
}

ExperimentSpec experiment_spec_from_json(const nlohmann::json& j, ExperimentSpec s) {
  try {
    s.task = j.value("task", s.task);
    s.source_sample = j.value("source_sample", s.source_sample);
    s.target_sample = j.value("target_sample", s.target_sample);
    s.train_frac = j.value("train_frac", s.train_frac);
    s.split_seed = j.value("split_seed", s.split_seed);
    s.runs = j.value("runs", s.runs);
    s.jobs = j.value("jobs", s.jobs);
    if (j.contains("output_dir")) s.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("mode")) s.train.mode = train_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("train")) s.train = train_config_from_json(j.at("train"), s.train);
    if (j.contains("loss")) s.train = train_config_from_json({{"loss", j.at("loss")}}, s.train);
    if (j.contains("model")) {
      nlohmann::json merged = model_config_to_json(s.model);
      merged.update(j.at("model"));
      s.model = model_config_from_json(merged);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      const auto kind = d.at("kind").get<std::string>();
      if (kind == "csv") {
        CsvSource c = s.csv.value_or(CsvSource{});
        c.source = d.at("source").get<std::string>();
        c.target = d.at("target").get<std::string>();
        if (d.contains("schema")) c.schema = schema_from_json(d.at("schema"), c.schema);
        s.csv = c;
        s.synthetic.reset();
      } else if (kind == "synthetic") {
        nlohmann::json merged = shift_spec_to_json(s.synthetic.value_or(ShiftSpec{}));
        if (d.contains("spec")) merged.update(d.at("spec"));
        s.synthetic = shift_spec_from_json(merged);
        s.csv.reset();
      } else {
        throw ConfigError("data.kind must be \"csv\" or \"synthetic\", got \"" + kind + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid experiment spec: ") + e.what());
  }
  return s;
}

ExperimentSpec load_experiment_file(const fs::path& path, ExperimentSpec base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read experiment file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corrupt experiment file " + path.string() + ": " + e.what());
  }
  return experiment_spec_from_json(j, std::move(base));
}

DomainDataset load_experiment_data(const ExperimentSpec& spec) {
  RawTable source, target;
  if (spec.csv) {
    source = load_csv(spec.csv->source, spec.csv->schema);
    target = load_csv(spec.csv->target, spec.csv->schema);
  } else if (spec.synthetic) {
    auto domains = generate_shifted_domains(*spec.synthetic);
    source = std::move(domains.source);
    target = std::move(domains.target);
  } else {
    throw ConfigError("no data source configured");
  }
  const std::size_t ns = spec.source_sample ? spec.source_sample : source.rows();
  const std::size_t nt = spec.target_sample ? spec.target_sample : target.rows();
  return make_splits(source, target, ns, nt, spec.train_frac, spec.split_seed);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, std::ostream* progress) {
  spec.validate();
  const DomainDataset data = load_experiment_data(spec);
  if (data.feature_dim() != spec.model.input_len) {
    throw DimensionError("data has " + std::to_string(data.feature_dim()) + " features but the model expects " +
                         std::to_string(spec.model.input_len));
  }
  std::error_code ec;
  fs::create_directories(spec.output_dir, ec);
  if (ec || !fs::is_directory(spec.output_dir)) {
    throw DataError("cannot create output directory " + spec.output_dir.string());
  }
  write_json(spec.output_dir / "experiment.json", experiment_spec_to_json(spec));
  write_json(spec.output_dir / "dataset.json", dataset_manifest(data));

  ExperimentResult result;
  result.runs.resize(spec.runs);
  std::vector<std::exception_ptr> errors(spec.runs);
  std::mutex out_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < spec.runs; r = next++) {
      try {
        result.runs[r] = run_once(spec, data, r);
        if (progress) {
          std::lock_guard lock(out_mutex);
          *progress << to_string(spec.train.mode) << " run " << r << " seed " << result.runs[r].seed
                    << ": auc " << fixed3(result.runs[r].report.auc) << " f1 " << fixed3(result.runs[r].report.scores.f1)
                    << " precision " << fixed3(result.runs[r].report.scores.precision) << '\n';
        }
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(spec.jobs, spec.runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> aucs;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : result.runs) {
    aucs.push_back(r.report.auc);
    runs.push_back({{"run", r.index},
                    {"seed", r.seed},
                    {"dir", run_dir_name(r.index)},
                    {"precision", r.report.scores.precision},
                    {"recall", r.report.scores.recall},
                    {"f1", r.report.scores.f1},
                    {"auc", r.report.auc}});
  }
  nlohmann::json summary = {{"task", spec.task}, {"mode", to_string(spec.train.mode)}, {"runs", runs}};
  if (aucs.size() >= 2) {
    result.auc_summary = robustness_summary(aucs, 0.95);
    summary["auc_ci"] = to_json(*result.auc_summary);
  } else {
    summary["auc_ci"] = nullptr;
  }
  write_json(spec.output_dir / "summary.json", summary);
  return result;
}

std::string column_label(TrainMode mode) {
  switch (mode) {
    case TrainMode::kTargetOnlyCnn: return "CNN-target";
    case TrainMode::kSourceOnlyCnn: return "CNN";
    case TrainMode::kDann: return "DANN";
    case TrainMode::kWdAda: return "WD-ADA";
    case TrainMode::kWdWada: return "WD-WADA";
  }
  return "?";
}

Report collect_report(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw ConfigError("report needs at least one result directory");
  Report report;
  for (const auto& dir : dirs) {
    const fs::path file = dir / "summary.json";
    const nlohmann::json j = read_json(file);
    ReportCell cell;
    cell.source_dir = dir;
    try {
      cell.task = j.at("task").get<std::string>();
      cell.mode = train_mode_from_string(j.at("mode").get<std::string>());
      std::vector<double> p, r, f, a;
      for (const auto& run : j.at("runs")) {
        p.push_back(run.at("precision").get<double>());
        r.push_back(run.at("recall").get<double>());
        f.push_back(run.at("f1").get<double>());
        a.push_back(run.at("auc").get<double>());
      }
      if (a.empty()) throw DataError("no runs");
      cell.precision = mean_of(p);
      cell.recall = mean_of(r);
      cell.f1 = mean_of(f);
      cell.auc = mean_of(a);
      if (j.contains("auc_ci") && !j.at("auc_ci").is_null()) {
        cell.auc_summary = robustness_summary_from_json(j.at("auc_ci"));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt result file " + file.string() + ": " + e.what());
    } catch (const Error& e) {
      throw DataError("corrupt result file " + file.string() + ": " + e.what());
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

std::string render_report(const Report& report) {
  std::vector<std::string> tasks;
  std::vector<TrainMode> modes;
  std::map<std::pair<std::string, TrainMode>, const ReportCell*> index;
  for (const auto& c : report.cells) {
    if (std::find(tasks.begin(), tasks.end(), c.task) == tasks.end()) tasks.push_back(c.task);
    index[{c.task, c.mode}] = &c;  // later directories win
  }
  for (auto m : kColumnOrder) {
    for (const auto& c : report.cells) {
      if (c.mode == m) {
        modes.push_back(m);
        break;
      }
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Task", "Metric"};
  for (auto m : modes) header.push_back(column_label(m));
  rows.push_back(header);
  for (const auto& task : tasks) {
    const char* metrics[] = {"Precision", "F1-score", "AUC", "AUC 95% CI"};
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<std::string> row{k == 0 ? task : "", metrics[k]};
      for (auto m : modes) {
        auto it = index.find({task, m});
        if (it == index.end()) {
          row.push_back("-");
          continue;
        }
        const ReportCell& c = *it->second;
        switch (k) {
          case 0: row.push_back(fixed2(c.precision)); break;
          case 1: row.push_back(fixed2(c.f1)); break;
          case 2: row.push_back(fixed2(c.auc)); break;
          default:
            row.push_back(c.auc_summary ? "[" + fixed3(c.auc_summary->lower) + ", " + fixed3(c.auc_summary->upper) + "]"
                                        : "-");
        }
      }
      rows.push_back(std::move(row));
    }
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      const auto& cell = rows[r][i];
      if (i < 2) {
        out << cell << std::string(width[i] - cell.size(), ' ');
      } else {
        out << std::string(width[i] - cell.size(), ' ') << cell;
      }
      out << (i + 1 < rows[r].size() ? "  " : "");
    }
    out << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w + 2;
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return out.str();
}

nlohmann::json to_json(const Report& report) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"task", c.task},
                     {"mode", to_string(c.mode)},
                     {"column", column_label(c.mode)},
                     {"precision", c.precision},
                     {"recall", c.recall},
                     {"f1", c.f1},
                     {"auc", c.auc},
                     {"auc_ci", c.auc_summary ? to_json(*c.auc_summary) : nlohmann::json(nullptr)},
                     {"source_dir", c.source_dir.generic_string()}});
  }
  return {{"cells", cells}};
}

void write_report(const Report& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw DataError("cannot create report directory " + out_dir.string());
  write_json(out_dir / "report.json", to_json(report));
  write_text(out_dir / "table.txt", render_report(report));
  for (const auto& c : report.cells) {
    const fs::path summary_file = c.source_dir / "summary.json";
    const nlohmann::json summary = read_json(summary_file);
    std::vector<std::pair<double, std::string>> runs;
    try {
      for (const auto& run : summary.at("runs")) {
        runs.emplace_back(run.at("auc").get<double>(), run.at("dir").get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt result file " + summary_file.string() + ": " + e.what());
    }
    std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const fs::path metrics_file = c.source_dir / runs[(runs.size() - 1) / 2].second / "metrics.json";
    MetricsReport m;
    try {
      m = metrics_report_from_json(read_json(metrics_file));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt result file " + metrics_file.string() + ": " + e.what());
    }
    write_roc_csv(m.roc, out_dir / ("roc_" + c.task + "_" + to_string(c.mode) + ".csv"));
  }
}

}  // namespace wdwada
