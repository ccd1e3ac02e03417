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

#include "wdwada/losses.hpp"

#include <cmath>
#include <string>

#include "wdwada/errors.hpp"

namespace wdwada {
namespace {

void check_batch(const char* what, const Tensor& probs, const Tensor& labels) {
  if (probs.rank() != 1 || labels.shape() != probs.shape()) {
    throw DimensionError(std::string(what) + ": probabilities " + shape_string(probs.shape()) + " and labels " +
                         shape_string(labels.shape()) + " must be equal-length vectors");
  }
}

void check_nonempty(const char* what, const Tensor& t) {
  // A zero-length tensor cannot be constructed, so only scalars need a guard.
  if (t.rank() != 1) throw ContractError(std::string(what) + ": expected a batch vector, got " + shape_string(t.shape()));
}

Tensor complement(const Tensor& labels) {
  Tensor out(labels.shape());
  for (std::size_t i = 0; i < labels.numel(); ++i) out[i] = 1.0 - labels[i];
  return out;
}

Tensor scaled(const Tensor& t, double factor) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.numel(); ++i) out[i] = t[i] * factor;
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (!std::isfinite(rho) || rho < 0.0) throw ConfigError("rho must be finite and >= 0");
  if (!std::isfinite(gamma) || gamma < 0.0) throw ConfigError("focal exponent gamma must be finite and >= 0");
  if (alpha_pos && (!std::isfinite(*alpha_pos) || *alpha_pos <= 0.0)) {
    throw ConfigError("alpha_pos must be finite and > 0");
  }
  if (!std::isfinite(lambda_domain) || lambda_domain < 0.0) throw ConfigError("lambda_domain must be finite and >= 0");
}

double class_balance_weight(std::span<const double> labels) {
  std::size_t pos = 0;
  for (double y : labels) pos += y > 0.5 ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("class weighting needs both classes in the source split");
  return static_cast<double>(neg) / static_cast<double>(pos);
}

Var cross_entropy(Var probs, const Tensor& labels) {
  check_batch("cross_entropy", probs.value(), labels);
  Tape& tape = probs.tape();
  Var pos = mul(tape.constant(labels), log(probs));
  Var neg = mul(tape.constant(complement(labels)), log(add_scalar(scale(probs, -1.0), 1.0)));
  return scale(mean(add(pos, neg)), -1.0);
}

Var weighted_focal_loss(Var probs, const Tensor& labels, double gamma, double alpha_pos) {
  check_batch("weighted_focal_loss", probs.value(), labels);
  if (!(gamma >= 0.0)) throw ConfigError("focal exponent must be >= 0, got " + std::to_string(gamma));
  if (!(alpha_pos > 0.0)) throw ConfigError("alpha_pos must be > 0, got " + std::to_string(alpha_pos));
  Tape& tape = probs.tape();
  Var one_minus = add_scalar(scale(probs, -1.0), 1.0);
  Var pos = mul(tape.constant(scaled(labels, alpha_pos)), mul(pow(one_minus, gamma), log(probs)));
  Var neg = mul(tape.constant(complement(labels)), mul(pow(probs, gamma), log(one_minus)));
  return scale(mean(add(pos, neg)), -1.0);
}

Var weighted_focal_loss(Var probs, const Tensor& labels, const LossConfig& config) {
  if (!config.alpha_pos) throw ConfigError("alpha_pos has not been resolved from the source split");
  return weighted_focal_loss(probs, labels, config.gamma, *config.alpha_pos);
}

Var wasserstein_objective(Var target_scores, Var source_scores) {
  check_nonempty("wasserstein_objective", target_scores.value());
  check_nonempty("wasserstein_objective", source_scores.value());
  return sub(mean(target_scores), mean(source_scores));
}

Var gradient_penalty(const CriticFn& critic, Var points) {
  Tape& tape = points.tape();
  if (!tape.grad_enabled() || !points.requires_grad()) {
    throw CapabilityError("gradient_penalty needs trainable points on a recording tape");
  }
  if (points.value().rank() != 2) {
    throw DimensionError("gradient_penalty expects [k x d] points, got " + shape_string(points.shape()));
  }
  Var scores = critic(points);
  // Rows are independent samples, so row i of d(sum scores)/dh is d score_i / d h_i.
  const Var wrt[] = {points};
  Var g = grad(sum(scores), wrt, /*create_graph=*/true)[0];
  return mean(pow(add_scalar(row_l2norm(g), -1.0), 2.0));
}

Var adversarial_objective(Var l_wd, Var l_grad, double rho) {
  if (!std::isfinite(rho) || rho < 0.0) throw ConfigError("rho must be finite and >= 0");
  return sub(l_wd, scale(l_grad, rho));
}

Var adversarial_objective(Var l_wd, Var l_grad, const LossConfig& config) {
  return adversarial_objective(l_wd, l_grad, config.rho);
}

double cross_entropy(const Tensor& probs, const Tensor& labels) {
  Tape tape;
  return cross_entropy(tape.constant(probs), labels).value().item();
}

double weighted_focal_loss(const Tensor& probs, const Tensor& labels, double gamma, double alpha_pos) {
  Tape tape;
  return weighted_focal_loss(tape.constant(probs), labels, gamma, alpha_pos).value().item();
}

double wasserstein_objective(const Tensor& target_scores, const Tensor& source_scores) {
  Tape tape;
  return wasserstein_objective(tape.constant(target_scores), tape.constant(source_scores)).value().item();
}

}  // namespace wdwada
