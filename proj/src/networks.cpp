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

#include "wdwada/networks.hpp"

#include <cmath>
#include <random>

#include "wdwada/errors.hpp"

namespace wdwada {
namespace {

std::size_t layer_length(const char* layer, std::size_t len, std::size_t kernel, std::size_t stride) {
  if (kernel == 0 || stride == 0) {
    throw ConfigError(std::string("layer ") + layer + ": kernel and stride must be positive");
  }
  if (len < kernel) {
    throw ConfigError(std::string("layer ") + layer + ": input length " + std::to_string(len) +
                      " is shorter than window " + std::to_string(kernel));
  }
  return (len - kernel) / stride + 1;
}

void require_positive(const char* layer, std::size_t width) {
  if (width == 0) throw ConfigError(std::string("layer ") + layer + ": width must be positive");
}

class Initializer {
 public:
  Initializer(std::uint64_t seed, InitScheme scheme) : rng_(seed), scheme_(scheme) {}

  Tensor he(Shape shape, std::size_t fan_in) { return normal(std::move(shape), std::sqrt(2.0 / double(fan_in))); }

  Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out) {
    return normal(std::move(shape), std::sqrt(2.0 / double(fan_in + fan_out)));
  }

 private:
  Tensor normal(Shape shape, double sd) {
    Tensor t(std::move(shape));
    if (scheme_ == InitScheme::kZeros) return t;
    std::normal_distribution<double> dist(0.0, sd);
    for (auto& x : t.data()) x = dist(rng_);
    return t;
  }

  std::mt19937_64 rng_;
  InitScheme scheme_;
};

void add_dense(ParamStore& store, Initializer& init, const std::string& name, std::size_t in, std::size_t out,
               bool relu) {
  store.add(name + ".weight", relu ? init.he({in, out}, in) : init.xavier({in, out}, in, out));
  store.add(name + ".bias", Tensor({out}));
}

std::string critic_layer(std::size_t i) { return "critic.fc" + std::to_string(i + 1); }

Var require_columns(Var x, std::size_t cols, const char* what) {
  const Tensor& v = x.value();
  if (v.rank() != 2 || v.dim(1) != cols) {
    throw DimensionError(std::string(what) + ": expected [n x " + std::to_string(cols) + "], got " +
                         shape_string(v.shape()));
  }
  return x;
}

}  // namespace

ShapeChain compute_shape_chain(const ModelConfig& c) {
  require_positive("input", c.input_len);
  require_positive("conv1", c.conv1_filters);
  require_positive("conv2", c.conv2_filters);
  require_positive("fc1", c.fc_hidden);
  require_positive("fc2", c.feature_dim);
  require_positive("classifier.fc1", c.classifier_hidden);
  for (std::size_t i = 0; i < c.critic_hidden.size(); ++i) require_positive(critic_layer(i).c_str(), c.critic_hidden[i]);
  ShapeChain s;
  s.input = c.input_len;
  s.conv1 = layer_length("conv1", s.input, c.conv_kernel, c.conv_stride);
  s.pool1 = layer_length("pool1", s.conv1, c.pool_window, c.pool_stride);
  s.conv2 = layer_length("conv2", s.pool1, c.conv_kernel, c.conv_stride);
  s.pool2 = layer_length("pool2", s.conv2, c.pool_window, c.pool_stride);
  s.flattened = c.conv2_filters * s.pool2;
  return s;
}

ModelBundle init_model(std::uint64_t seed, const ModelConfig& config) {
  ModelBundle m;
  m.config = config;
  m.chain = compute_shape_chain(config);
  Initializer init(seed, config.init);

  const auto k = config.conv_kernel;
  m.extractor.add("extractor.conv1.weight", init.he({config.conv1_filters, 1, k}, k));
  m.extractor.add("extractor.conv1.bias", Tensor({config.conv1_filters}));
  m.extractor.add("extractor.conv2.weight",
                  init.he({config.conv2_filters, config.conv1_filters, k}, config.conv1_filters * k));
  m.extractor.add("extractor.conv2.bias", Tensor({config.conv2_filters}));
  add_dense(m.extractor, init, "extractor.fc1", m.chain.flattened, config.fc_hidden, true);
  add_dense(m.extractor, init, "extractor.fc2", config.fc_hidden, config.feature_dim, false);

  add_dense(m.classifier, init, "classifier.fc1", config.feature_dim, config.classifier_hidden, true);
  add_dense(m.classifier, init, "classifier.fc2", config.classifier_hidden, 1, false);

  std::size_t in = config.critic_input_dim();
  for (std::size_t i = 0; i < config.critic_hidden.size(); ++i) {
    add_dense(m.critic, init, critic_layer(i), in, config.critic_hidden[i], true);
    in = config.critic_hidden[i];
  }
  add_dense(m.critic, init, critic_layer(config.critic_hidden.size()), in, 1, false);
  return m;
}

Var extract_features(const ModelConfig& c, const BoundParams& p, Var batch) {
  require_columns(batch, c.input_len, "extract_features");
  const std::size_t n = batch.value().dim(0);
  Var x = reshape(batch, {n, 1, c.input_len});
  x = relu(conv1d(x, p["extractor.conv1.weight"], p["extractor.conv1.bias"], c.conv_stride));
  x = maxpool1d(x, c.pool_window, c.pool_stride);
  x = relu(conv1d(x, p["extractor.conv2.weight"], p["extractor.conv2.bias"], c.conv_stride));
  x = maxpool1d(x, c.pool_window, c.pool_stride);
  const auto flat = x.value().dim(1) * x.value().dim(2);
  x = reshape(x, {n, flat});
  x = relu(affine(x, p["extractor.fc1.weight"], p["extractor.fc1.bias"]));
  return affine(x, p["extractor.fc2.weight"], p["extractor.fc2.bias"]);
}

Var classifier_logits(const ModelConfig& c, const BoundParams& p, Var features) {
  require_columns(features, c.feature_dim, "classify");
  const std::size_t n = features.value().dim(0);
  Var h = relu(affine(features, p["classifier.fc1.weight"], p["classifier.fc1.bias"]));
  return reshape(affine(h, p["classifier.fc2.weight"], p["classifier.fc2.bias"]), {n});
}

Var classify(const ModelConfig& c, const BoundParams& p, Var features) {
  return sigmoid(classifier_logits(c, p, features));
}

Var critic_first_hidden(const ModelConfig& c, const BoundParams& p, Var features) {
  require_columns(features, c.critic_input_dim(), "criticize");
  if (c.critic_hidden.empty()) throw ConfigError("critic has no hidden layer");
  return relu(affine(features, p["critic.fc1.weight"], p["critic.fc1.bias"]));
}

Var critic_from_hidden(const ModelConfig& c, const BoundParams& p, Var hidden) {
  const std::size_t n = hidden.value().dim(0);
  Var h = hidden;
  const std::size_t layers = c.critic_hidden.size();
  for (std::size_t i = 1; i < layers; ++i) {
    const auto name = critic_layer(i);
    h = relu(affine(h, p[name + ".weight"], p[name + ".bias"]));
  }
  const auto out = critic_layer(layers);
  return reshape(affine(h, p[out + ".weight"], p[out + ".bias"]), {n});
}

Var criticize(const ModelConfig& c, const BoundParams& p, Var features) {
  require_columns(features, c.critic_input_dim(), "criticize");
  if (c.critic_hidden.empty()) {
    const std::size_t n = features.value().dim(0);
    return reshape(affine(features, p["critic.fc1.weight"], p["critic.fc1.bias"]), {n});
  }
  return critic_from_hidden(c, p, critic_first_hidden(c, p, features));
}

Tensor extract_features(const ModelBundle& model, const Tensor& batch) {
  Tape tape;
  NoGradGuard no_grad(tape);
  BoundParams p(tape, model.extractor, false);
  return extract_features(model.config, p, tape.constant(batch)).value();
}

Tensor classify(const ModelBundle& model, const Tensor& features) {
  Tape tape;
  NoGradGuard no_grad(tape);
  BoundParams p(tape, model.classifier, false);
  return classify(model.config, p, tape.constant(features)).value();
}

Tensor criticize(const ModelBundle& model, const Tensor& features) {
  Tape tape;
  NoGradGuard no_grad(tape);
  BoundParams p(tape, model.critic, false);
  return criticize(model.config, p, tape.constant(features)).value();
}

Tensor predict_proba(const ModelBundle& model, const Tensor& batch) {
  return classify(model, extract_features(model, batch));
}

}  // namespace wdwada
