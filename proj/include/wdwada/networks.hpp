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

// Feature extractor, label classifier and domain critic.
//
// The extractor treats a tabular row as one channel of length input_len:
//   conv(16, k6, s2) -> relu -> maxpool(2, 2) -> conv(32, k6, s2) -> relu
//   -> maxpool(2, 2) -> flatten -> fc(64) relu -> fc(32)
// For 38 inputs the sequence lengths are 38 -> 17 -> 8 -> 2 -> 1, so the
// flattened conv output is 32 x 1 and the feature vector is 32-dimensional.
// The classifier is 32 -> 16 relu -> 1 sigmoid; the critic is
// 32 -> 64 relu -> 32 relu -> 1 with no output activation.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wdwada/autodiff.hpp"
#include "wdwada/params.hpp"

namespace wdwada {

enum class InitScheme { kHe, kZeros };

// Which critic representation the gradient penalty differentiates against.
enum class PenaltyLayer { kInput, kFirstHidden };

struct ModelConfig {
  std::size_t input_len = 38;
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t conv_kernel = 6;
  std::size_t conv_stride = 2;
  std::size_t pool_window = 2;
  std::size_t pool_stride = 2;
  std::size_t fc_hidden = 64;
  std::size_t feature_dim = 32;
  std::size_t classifier_hidden = 16;
  std::vector<std::size_t> critic_hidden{64, 32};
  // 0 means "feature_dim"; set explicitly to use the critic on raw inputs.
  std::size_t critic_input = 0;
  InitScheme init = InitScheme::kHe;
  PenaltyLayer penalty_layer = PenaltyLayer::kInput;

  std::size_t critic_input_dim() const { return critic_input ? critic_input : feature_dim; }
};

// Sequence lengths through the conv stack: input, conv1, pool1, conv2, pool2.
struct ShapeChain {
  std::size_t input = 0, conv1 = 0, pool1 = 0, conv2 = 0, pool2 = 0;
  std::size_t flattened = 0;  // conv2_filters * pool2
};

// Throws ConfigError naming the first layer whose input is too short.
ShapeChain compute_shape_chain(const ModelConfig& config);

// G_f, G_y and G_d parameters. Each network owns its optimizer state.
struct ModelBundle {
  ModelConfig config;
  ShapeChain chain;
  ParamStore extractor;
  ParamStore classifier;
  ParamStore critic;
};

ModelBundle init_model(std::uint64_t seed, const ModelConfig& config = {});

// Graph-level forward passes. `params` must be bound from the matching store.
Var extract_features(const ModelConfig& config, const BoundParams& params, Var batch);
Var classify(const ModelConfig& config, const BoundParams& params, Var features);  // [n] probabilities
Var classifier_logits(const ModelConfig& config, const BoundParams& params, Var features);  // [n]
Var criticize(const ModelConfig& config, const BoundParams& params, Var features);  // [n] scores
// Critic split at its first hidden layer: criticize == critic_from_hidden(critic_first_hidden(x)).
Var critic_first_hidden(const ModelConfig& config, const BoundParams& params, Var features);
Var critic_from_hidden(const ModelConfig& config, const BoundParams& params, Var hidden);

// Tensor-level conveniences that build a throwaway tape.
Tensor extract_features(const ModelBundle& model, const Tensor& batch);  // [n x input_len] -> [n x feature_dim]
Tensor classify(const ModelBundle& model, const Tensor& features);       // [n x feature_dim] -> [n]
Tensor criticize(const ModelBundle& model, const Tensor& features);      // [n x critic_input] -> [n]
Tensor predict_proba(const ModelBundle& model, const Tensor& batch);     // classify(extract_features(x))

}  // namespace wdwada
