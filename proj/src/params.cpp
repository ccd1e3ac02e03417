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

#include "wdwada/params.hpp"

#include <cmath>

#include "wdwada/errors.hpp"

namespace wdwada {

void ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  Tensor m(value.shape()), v(value.shape());
  entries_.push_back({std::move(name), std::move(value), std::move(m), std::move(v)});
}

void ParamStore::set(std::string_view name, Tensor value) {
  auto& entry = entries_[index_of(name)];
  if (entry.value.shape() != value.shape()) {
    throw DimensionError("parameter '" + entry.name + "' has shape " + shape_string(entry.value.shape()) +
                         ", got " + shape_string(value.shape()));
  }
  entry.value = std::move(value);
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

const Tensor& ParamStore::get(std::string_view name) const { return entries_[index_of(name)].value; }

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

void ParamStore::reset_state() {
  for (auto& e : entries_) {
    e.m = Tensor(e.value.shape());
    e.v = Tensor(e.value.shape());
  }
  steps_ = 0;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size() || a.steps_ != b.steps_) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || !(x.value == y.value) || !(x.m == y.m) || !(x.v == y.v)) return false;
  }
  return true;
}

void OptimizerConfig::validate() const {
  if (kind == Kind::kAdam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw ConfigError("adam requires 0 <= beta1, beta2 < 1 and epsilon > 0");
    }
  } else if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("sgd momentum must lie in [0, 1)");
  }
}

std::string to_string(OptimizerConfig::Kind kind) { return kind == OptimizerConfig::Kind::kAdam ? "adam" : "sgd"; }

OptimizerConfig::Kind optimizer_kind_from_string(std::string_view text) {
  if (text == "adam") return OptimizerConfig::Kind::kAdam;
  if (text == "sgd") return OptimizerConfig::Kind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

struct OptimizerAccess {
  static void step(ParamStore& store, std::span<const Tensor> grads, const OptimizerConfig& cfg, double lr) {
    auto& entries = store.entries_;
    if (grads.size() != entries.size()) {
      throw ContractError("optimizer_step: " + std::to_string(grads.size()) + " gradients for " +
                          std::to_string(entries.size()) + " parameters");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (grads[i].shape() != entries[i].value.shape()) {
        throw ContractError("optimizer_step: gradient for '" + entries[i].name + "' has shape " +
                            shape_string(grads[i].shape()) + ", expected " +
                            shape_string(entries[i].value.shape()));
      }
    }
    ++store.steps_;
    if (cfg.kind == OptimizerConfig::Kind::kAdam) {
      const double t = static_cast<double>(store.steps_);
      const double c1 = 1.0 - std::pow(cfg.beta1, t);
      const double c2 = 1.0 - std::pow(cfg.beta2, t);
      for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        for (std::size_t j = 0; j < e.value.numel(); ++j) {
          const double g = grads[i][j];
          e.m[j] = cfg.beta1 * e.m[j] + (1.0 - cfg.beta1) * g;
          e.v[j] = cfg.beta2 * e.v[j] + (1.0 - cfg.beta2) * g * g;
          const double mhat = e.m[j] / c1;
          const double vhat = e.v[j] / c2;
          e.value[j] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
      }
    } else {
      for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        for (std::size_t j = 0; j < e.value.numel(); ++j) {
          e.m[j] = cfg.momentum * e.m[j] + grads[i][j];
          e.value[j] -= lr * e.m[j];
        }
      }
    }
  }
};

void optimizer_step(ParamStore& params, std::span<const Tensor> grads, const OptimizerConfig& config,
                    double learning_rate) {
  OptimizerAccess::step(params, grads, config, learning_rate);
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store, bool trainable) : tape_(&tape), store_(&store) {
  vars_.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) vars_.push_back(tape.leaf(store.value(i), trainable));
}

Var BoundParams::operator[](std::string_view name) const { return vars_[store_->index_of(name)]; }

std::vector<Tensor> param_grads(Var loss, const BoundParams& params) {
  auto gs = grad(loss, params.vars());
  std::vector<Tensor> out;
  out.reserve(gs.size());
  for (const auto& g : gs) out.push_back(g.value());
  return out;
}

}  // namespace wdwada
