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

// wdwada synth | train | report
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wdwada/data.hpp"
#include "wdwada/errors.hpp"
#include "wdwada/experiment.hpp"

namespace fs = std::filesystem;
using namespace wdwada;

namespace {

constexpr int kUsageError = 2;
constexpr int kNumericalError = 3;

struct SynthArgs {
  ShiftSpec spec;
  fs::path out = ".";
};

void add_shift_flags(CLI::App& cmd, ShiftSpec& s) {
  cmd.add_option("--d", s.d, "Feature count");
  cmd.add_option("--shift", s.shift, "Target shift along the shift axis");
  cmd.add_option("--cov-scale", s.cov_scale, "Target covariance multiplier");
  cmd.add_option("--prior-source", s.prior_source, "Positive rate in the source domain");
  cmd.add_option("--prior-target", s.prior_target, "Positive rate in the target domain");
  cmd.add_option("--components", s.components, "Mixture components per class");
  cmd.add_option("--class-separation", s.class_separation, "Class offset orthogonal to the shift axis");
  cmd.add_option("--positive-spread", s.positive_spread, "Positive-class component spread along the shift axis");
  cmd.add_option("--negative-spread", s.negative_spread, "Negative-class component spread along the shift axis");
  cmd.add_option("--n-source", s.n_source, "Source rows to generate");
  cmd.add_option("--n-target", s.n_target, "Target rows to generate");
}

int cmd_synth(const SynthArgs& args) {
  args.spec.validate();
  const auto domains = generate_shifted_domains(args.spec);
  std::error_code ec;
  fs::create_directories(args.out, ec);
  if (ec || !fs::is_directory(args.out)) throw DataError("cannot create output directory " + args.out.string());
  write_csv(domains.source, args.out / "source.csv");
  write_csv(domains.target, args.out / "target.csv");
  nlohmann::json manifest = {{"spec", shift_spec_to_json(args.spec)},
                             {"source_rows", domains.source.rows()},
                             {"target_rows", domains.target.rows()},
                             {"axis", domains.axis},
                             {"separation", domains.separation},
                             {"files", {"source.csv", "target.csv"}}};
  std::ofstream out(args.out / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + (args.out / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  std::cout << "wrote " << domains.source.rows() << " source and " << domains.target.rows() << " target rows to "
            << args.out.string() << '\n';
  return 0;
}

// Flag values are collected separately so they can be layered over the
// experiment file after it is read.
struct TrainFlags {
  std::string config, mode, task, out, source, target, label_column, positive_label, negative_label, alpha,
      penalty_layer, optimizer;
  bool synthetic = false;
  ShiftSpec shift;
  std::size_t runs = 0, jobs = 0, epochs = 0, batch_size = 0, n_critic = 0, source_sample = 0, target_sample = 0,
              warmup = 0;
  std::uint64_t seed = 0, split_seed = 0;
  double lr = 0, lr_critic = 0, rho = 0, gamma = 0, lambda = 0, train_frac = 0, threshold = 0, pretrain_fraction = 0;
};

ExperimentSpec resolve_spec(const CLI::App& cmd, const TrainFlags& f) {
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  ExperimentSpec spec;
  if (!f.config.empty()) spec = load_experiment_file(f.config, spec);

  if (given("--source") != given("--target")) throw ConfigError("--source and --target must be given together");
  if (given("--source") && given("--synthetic")) throw ConfigError("choose either --source/--target or --synthetic");
  if (given("--source")) {
    CsvSource c = spec.csv.value_or(CsvSource{});
    c.source = f.source;
    c.target = f.target;
    spec.csv = c;
    spec.synthetic.reset();
  }
  if (spec.csv) {
    if (given("--label-column")) spec.csv->schema.label_column = f.label_column;
    if (given("--positive-label")) spec.csv->schema.positive_label = f.positive_label;
    if (given("--negative-label")) spec.csv->schema.negative_label = f.negative_label;
  }
  const bool shift_flags = given("--d") || given("--shift") || given("--cov-scale") || given("--prior-source") ||
                           given("--prior-target") || given("--components") || given("--class-separation") ||
                           given("--positive-spread") || given("--negative-spread") || given("--n-source") ||
                           given("--n-target") || given("--data-seed");
  if (given("--synthetic") || (shift_flags && !given("--source"))) {
    ShiftSpec s = spec.synthetic.value_or(ShiftSpec{});
    if (given("--d")) s.d = f.shift.d;
    if (given("--shift")) s.shift = f.shift.shift;
    if (given("--cov-scale")) s.cov_scale = f.shift.cov_scale;
    if (given("--prior-source")) s.prior_source = f.shift.prior_source;
    if (given("--prior-target")) s.prior_target = f.shift.prior_target;
    if (given("--components")) s.components = f.shift.components;
    if (given("--class-separation")) s.class_separation = f.shift.class_separation;
    if (given("--positive-spread")) s.positive_spread = f.shift.positive_spread;
    if (given("--negative-spread")) s.negative_spread = f.shift.negative_spread;
    if (given("--n-source")) s.n_source = f.shift.n_source;
    if (given("--n-target")) s.n_target = f.shift.n_target;
    if (given("--data-seed")) s.seed = f.shift.seed;
    spec.synthetic = s;
    spec.csv.reset();
  }

  if (given("--mode")) spec.train.mode = train_mode_from_string(f.mode);
  if (given("--task")) spec.task = f.task;
  if (given("--out")) spec.output_dir = f.out;
  if (given("--runs")) spec.runs = f.runs;
  if (given("--jobs")) spec.jobs = f.jobs;
  if (given("--seed")) spec.train.seed = f.seed;
  if (given("--split-seed")) spec.split_seed = f.split_seed;
  if (given("--source-sample")) spec.source_sample = f.source_sample;
  if (given("--target-sample")) spec.target_sample = f.target_sample;
  if (given("--train-frac")) spec.train_frac = f.train_frac;
  if (given("--epochs")) spec.train.epochs = f.epochs;
  if (given("--batch-size")) spec.train.batch_size = f.batch_size;
  if (given("--n-critic")) spec.train.n_critic = f.n_critic;
  if (given("--lr")) spec.train.lr_generator = f.lr;
  if (given("--lr-critic")) spec.train.lr_critic = f.lr_critic;
  if (given("--pretrain-fraction")) spec.train.pretrain_fraction = f.pretrain_fraction;
  if (given("--critic-warmup")) spec.train.critic_warmup_steps = f.warmup;
  if (given("--threshold")) spec.train.threshold = f.threshold;
  if (given("--rho")) spec.train.loss.rho = f.rho;
  if (given("--gamma")) spec.train.loss.gamma = f.gamma;
  if (given("--lambda")) spec.train.loss.lambda_domain = f.lambda;
  if (given("--alpha")) {
    if (f.alpha == "auto") {
      spec.train.loss.alpha_pos.reset();
    } else {
      try {
        std::size_t used = 0;
        spec.train.loss.alpha_pos = std::stod(f.alpha, &used);
        if (used != f.alpha.size()) throw std::invalid_argument(f.alpha);
      } catch (const std::exception&) {
        throw ConfigError("--alpha must be a number or 'auto', got '" + f.alpha + "'");
      }
    }
  }
  if (given("--optimizer")) spec.train.optimizer.kind = optimizer_kind_from_string(f.optimizer);
  if (given("--penalty-layer")) {
    if (f.penalty_layer == "input") {
      spec.model.penalty_layer = PenaltyLayer::kInput;
    } else if (f.penalty_layer == "first_hidden") {
      spec.model.penalty_layer = PenaltyLayer::kFirstHidden;
    } else {
      throw ConfigError("--penalty-layer must be 'input' or 'first_hidden'");
    }
  }
  if (spec.synthetic) spec.model.input_len = spec.synthetic->d;
  spec.validate();
  return spec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein adversarial domain adaptation toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic source/target domain pair");
  add_shift_flags(*synth_cmd, synth.spec);
  synth_cmd->add_option("--seed", synth.spec.seed, "Generator seed");
  synth_cmd->add_option("-o,--out", synth.out, "Output directory")->required();

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train one mode for several seeds and evaluate on target_test");
  train_cmd->add_option("--config", tf.config, "Experiment JSON file (flags override it)");
  train_cmd->add_option("--mode", tf.mode, "target_only_cnn | source_only_cnn | dann | wd_ada | wd_wada");
  train_cmd->add_option("--task", tf.task, "Task name used in reports");
  train_cmd->add_option("-o,--out", tf.out, "Output directory");
  train_cmd->add_option("--runs", tf.runs, "Number of seeds (default 5)");
  train_cmd->add_option("--jobs", tf.jobs, "Runs trained in parallel");
  train_cmd->add_option("--seed", tf.seed, "Seed of the first run");
  train_cmd->add_option("--source", tf.source, "Source-domain CSV");
  train_cmd->add_option("--target", tf.target, "Target-domain CSV");
  train_cmd->add_option("--label-column", tf.label_column, "Label column name");
  train_cmd->add_option("--positive-label", tf.positive_label, "Label literal of the positive class");
  train_cmd->add_option("--negative-label", tf.negative_label, "Label literal of the negative class");
  train_cmd->add_flag("--synthetic", tf.synthetic, "Use the synthetic generator as data source");
  add_shift_flags(*train_cmd, tf.shift);
  train_cmd->add_option("--data-seed", tf.shift.seed, "Synthetic generator seed");
  train_cmd->add_option("--split-seed", tf.split_seed, "Sampling and split seed");
  train_cmd->add_option("--source-sample", tf.source_sample, "Source rows to sample (0: all)");
  train_cmd->add_option("--target-sample", tf.target_sample, "Target rows to sample (0: all)");
  train_cmd->add_option("--train-frac", tf.train_frac, "Target train fraction");
  train_cmd->add_option("--epochs", tf.epochs, "Total epochs including pretraining");
  train_cmd->add_option("--batch-size", tf.batch_size, "Mini-batch size");
  train_cmd->add_option("--n-critic", tf.n_critic, "Critic steps per generator step");
  train_cmd->add_option("--lr", tf.lr, "Extractor and classifier learning rate");
  train_cmd->add_option("--lr-critic", tf.lr_critic, "Critic learning rate");
  train_cmd->add_option("--pretrain-fraction", tf.pretrain_fraction, "Share of epochs spent pretraining");
  train_cmd->add_option("--critic-warmup", tf.warmup, "Critic-only steps before adversarial training");
  train_cmd->add_option("--threshold", tf.threshold, "Decision threshold");
  train_cmd->add_option("--rho", tf.rho, "Gradient penalty weight");
  train_cmd->add_option("--gamma", tf.gamma, "Focal exponent (wd_wada)");
  train_cmd->add_option("--alpha", tf.alpha, "Positive-class weight or 'auto' (wd_wada)");
  train_cmd->add_option("--lambda", tf.lambda, "Domain loss weight");
  train_cmd->add_option("--optimizer", tf.optimizer, "adam | sgd");
  train_cmd->add_option("--penalty-layer", tf.penalty_layer, "input | first_hidden");

  std::vector<std::string> report_dirs;
  std::string report_out = "report";
  auto* report_cmd = app.add_subcommand("report", "Compare finished experiment directories");
  report_cmd->add_option("dirs", report_dirs, "Experiment directories")->required();
  report_cmd->add_option("-o,--out", report_out, "Directory for report.json, table.txt and ROC CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth);
    if (*train_cmd) {
      const ExperimentSpec spec = resolve_spec(*train_cmd, tf);
      const auto result = run_experiment(spec, &std::cout);
      if (result.auc_summary) {
        std::cout << "auc mean " << result.auc_summary->mean << " 95% CI [" << result.auc_summary->lower << ", "
                  << result.auc_summary->upper << "]\n";
      }
      std::cout << "results in " << spec.output_dir.string() << '\n';
      return 0;
    }
    if (*report_cmd) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      const Report report = collect_report(dirs);
      write_report(report, report_out);
      std::cout << render_report(report);
      return 0;
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}
