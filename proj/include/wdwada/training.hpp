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

// Source pretraining and alternating adversarial adaptation.
//
// One adversarial iteration on a (source, target) batch pair:
//   1. n_critic critic updates ascending  L_wd - rho * L_grad  (extractor frozen)
//   2. one extractor+classifier update descending
//        classification_loss(source) + lambda_domain * L_wd   (critic frozen)
// with L_wd = mean D(G_f(x_t)) - mean D(G_f(x_s)). The penalty is evaluated at
// random interpolates of paired source/target features and only shapes the
// critic. In dann mode the critic is a logistic domain classifier trained with
// binary cross-entropy, which the extractor maximizes.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "wdwada/data.hpp"
#include "wdwada/losses.hpp"
#include "wdwada/networks.hpp"
#include "wdwada/params.hpp"

namespace wdwada {

enum class TrainMode { kTargetOnlyCnn, kSourceOnlyCnn, kDann, kWdAda, kWdWada };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(std::string_view text);
bool is_adversarial(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kWdWada;
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t n_critic = 5;
  double lr_generator = 1e-3;
  double lr_critic = 1e-3;
  LossConfig loss;
  OptimizerConfig optimizer;
  // Share of epochs spent on source pretraining in adversarial modes.
  double pretrain_fraction = 0.25;
  // Critic-only updates between pretraining and the first adversarial epoch.
  std::size_t critic_warmup_steps = 0;
  // Index of the first epoch; keeps shuffles aligned when phases are chained.
  std::size_t epoch_offset = 0;
  double threshold = 0.5;

  void validate() const;
  // The loss actually used by the mode: wd_ada and dann drop the focal term
  // and class weight (gamma = 0, alpha = 1).
  LossConfig effective_loss() const;
  std::size_t pretrain_epochs() const;
};

nlohmann::json train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct EvalSnapshot {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // "pretrain", "adversarial" or "supervised"
  double classification_loss = 0.0;
  std::optional<double> wasserstein;       // mean critic-step L_wd
  std::optional<double> gradient_penalty;  // mean critic-step L_grad
  std::optional<double> domain_loss;       // dann domain-classifier BCE
  std::optional<EvalSnapshot> eval;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

// wall_seconds lives under "meta" so everything else is reproducible byte-for-byte.
nlohmann::json to_json(const EpochRecord& record);
EpochRecord epoch_record_from_json(const nlohmann::json& j);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Cross-entropy training of G_y . G_f on labeled data for config.epochs epochs.
TrainLog pretrain_source(ModelBundle& model, const LabeledPartition& source, const TrainConfig& config,
                         const LabeledPartition* eval = nullptr, const EpochCallback& on_epoch = {});

// config.epochs adversarial epochs. An epoch is one pass over the source
// split; target batches cycle through the target split.
TrainLog adversarial_train(ModelBundle& model, const LabeledPartition& source, const UnlabeledPartition& target,
                           const TrainConfig& config, const LabeledPartition* eval = nullptr,
                           const EpochCallback& on_epoch = {});

// Full protocol for config.mode: pretraining (all epochs for the CNN
// baselines, pretrain_epochs() otherwise) followed by adversarial epochs.
// Evaluates on target_test after every epoch.
TrainLog train_mode(ModelBundle& model, const DomainDataset& data, const TrainConfig& config,
                    const EpochCallback& on_epoch = {});

struct CriticStepStats {
  double wasserstein = 0.0;
  double gradient_penalty = 0.0;
};

// One critic ascent step on fixed features (rows are paired for interpolation).
CriticStepStats critic_step(ModelBundle& model, const Tensor& source_features, const Tensor& target_features,
                            const TrainConfig& config, std::mt19937_64& rng);

// One domain-classifier descent step (dann); returns its BCE.
double domain_classifier_step(ModelBundle& model, const Tensor& source_features, const Tensor& target_features,
                              const TrainConfig& config);

// One extractor+classifier step; returns the classification loss.
double generator_step(ModelBundle& model, const Tensor& source_x, const Tensor& source_y, const Tensor& target_x,
                      const TrainConfig& config, const LossConfig& loss);

EvalSnapshot evaluate_snapshot(const ModelBundle& model, const LabeledPartition& data, double threshold);

}  // namespace wdwada
