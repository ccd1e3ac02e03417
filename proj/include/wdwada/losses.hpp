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

// Scalar training objectives. All of them are built from differentiable tape
// ops, so each works both as a value and as a gradient source.

#pragma once

#include <functional>
#include <optional>
#include <span>

#include "wdwada/autodiff.hpp"

namespace wdwada {

struct LossConfig {
  double rho = 10.0;    // gradient-penalty coefficient
  double gamma = 2.0;   // focal exponent
  // Positive-class weight. Unset means n_negative / n_positive of the source
  // training split, filled in by the training loop.
  std::optional<double> alpha_pos;
  double lambda_domain = 1.0;

  void validate() const;
  double alpha_or(double fallback) const { return alpha_pos.value_or(fallback); }
};

// n_negative / n_positive; throws DataError when either class is absent.
double class_balance_weight(std::span<const double> labels);

// -(1/n) sum [y log p + (1 - y) log(1 - p)], logs clamped at kLogFloor.
Var cross_entropy(Var probs, const Tensor& labels);

// -(1/n) sum [alpha y (1-p)^gamma log p + (1-y) p^gamma log(1-p)].
// gamma = 0 and alpha = 1 reproduce cross_entropy exactly.
Var weighted_focal_loss(Var probs, const Tensor& labels, double gamma, double alpha_pos);
Var weighted_focal_loss(Var probs, const Tensor& labels, const LossConfig& config);

// mean(target) - mean(source). The critic maximizes it, the extractor minimizes it.
Var wasserstein_objective(Var target_scores, Var source_scores);

// mean_i (||d critic(h)_i / d h_i||_2 - 1)^2. `points` must be a trainable
// node on a tape with grad mode enabled: the inner gradient is recorded so
// the penalty can itself be differentiated.
using CriticFn = std::function<Var(Var)>;
Var gradient_penalty(const CriticFn& critic, Var points);

// l_wd - rho * l_grad.
Var adversarial_objective(Var l_wd, Var l_grad, double rho);
Var adversarial_objective(Var l_wd, Var l_grad, const LossConfig& config);

// Value-only helpers on plain tensors.
double cross_entropy(const Tensor& probs, const Tensor& labels);
double weighted_focal_loss(const Tensor& probs, const Tensor& labels, double gamma, double alpha_pos);
double wasserstein_objective(const Tensor& target_scores, const Tensor& source_scores);

}  // namespace wdwada
