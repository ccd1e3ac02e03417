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

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wdwada/autodiff.hpp"
#include "wdwada/tensor.hpp"

namespace wdwada {

// Named parameters plus the optimizer state that belongs to them.
//
// Entries keep insertion order, which fixes the gradient order expected by
// optimizer_step. Moment tensors always have the shape of their parameter.
class ParamStore {
 public:
  void add(std::string name, Tensor value);
  void set(std::string_view name, Tensor value);  // shape must match

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  const Tensor& value(std::size_t i) const { return entries_[i].value; }
  std::vector<std::string> names() const;

  const Tensor& first_moment(std::size_t i) const { return entries_[i].m; }
  const Tensor& second_moment(std::size_t i) const { return entries_[i].v; }
  std::uint64_t steps() const { return steps_; }

  std::size_t parameter_count() const;

  // Clears moments and the step counter.
  void reset_state();

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  friend struct OptimizerAccess;

  struct Entry {
    std::string name;
    Tensor value;
    Tensor m;
    Tensor v;
  };

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::uint64_t steps_ = 0;
};

struct OptimizerConfig {
  enum class Kind { kAdam, kSgd };
  Kind kind = Kind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;  // sgd only

  void validate() const;
};

std::string to_string(OptimizerConfig::Kind kind);
OptimizerConfig::Kind optimizer_kind_from_string(std::string_view text);

// One update of every parameter; grads are in store order. Adam uses
// bias-corrected moments, SGD a classic velocity buffer.
void optimizer_step(ParamStore& params, std::span<const Tensor> grads, const OptimizerConfig& config,
                    double learning_rate);

// A ParamStore placed on a tape, either as trainable leaves or as constants.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store, bool trainable);

  Var operator[](std::string_view name) const;
  std::span<const Var> vars() const { return vars_; }
  Tape& tape() const { return *tape_; }

 private:
  Tape* tape_;
  const ParamStore* store_;
  std::vector<Var> vars_;
};

// Gradient values of `loss` with respect to each bound parameter, in store order.
std::vector<Tensor> param_grads(Var loss, const BoundParams& params);

}  // namespace wdwada
