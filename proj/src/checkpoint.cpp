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

#include "wdwada/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "wdwada/errors.hpp"

namespace wdwada {
namespace {

constexpr const char* kFormat = "wdwada-checkpoint";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

ParamStore* store_for(ModelBundle& m, const std::string& name) {
  if (name.rfind("extractor.", 0) == 0) return &m.extractor;
  if (name.rfind("classifier.", 0) == 0) return &m.classifier;
  if (name.rfind("critic.", 0) == 0) return &m.critic;
  return nullptr;
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {
      {"input_len", c.input_len},
      {"conv1_filters", c.conv1_filters},
      {"conv2_filters", c.conv2_filters},
      {"conv_kernel", c.conv_kernel},
      {"conv_stride", c.conv_stride},
      {"pool_window", c.pool_window},
      {"pool_stride", c.pool_stride},
      {"fc_hidden", c.fc_hidden},
      {"feature_dim", c.feature_dim},
      {"classifier_hidden", c.classifier_hidden},
      {"critic_hidden", c.critic_hidden},
      {"critic_input", c.critic_input},
      {"init", c.init == InitScheme::kHe ? "he" : "zeros"},
      {"penalty_layer", c.penalty_layer == PenaltyLayer::kInput ? "input" : "first_hidden"},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_len = j.value("input_len", c.input_len);
    c.conv1_filters = j.value("conv1_filters", c.conv1_filters);
    c.conv2_filters = j.value("conv2_filters", c.conv2_filters);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.conv_stride = j.value("conv_stride", c.conv_stride);
    c.pool_window = j.value("pool_window", c.pool_window);
    c.pool_stride = j.value("pool_stride", c.pool_stride);
    c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.classifier_hidden = j.value("classifier_hidden", c.classifier_hidden);
    c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
    c.critic_input = j.value("critic_input", c.critic_input);
    const auto init = j.value("init", std::string("he"));
    if (init == "he") {
      c.init = InitScheme::kHe;
    } else if (init == "zeros") {
      c.init = InitScheme::kZeros;
    } else {
      throw ConfigError("unknown init scheme '" + init + "'");
    }
    const auto layer = j.value("penalty_layer", std::string("input"));
    if (layer == "input") {
      c.penalty_layer = PenaltyLayer::kInput;
    } else if (layer == "first_hidden") {
      c.penalty_layer = PenaltyLayer::kFirstHidden;
    } else {
      throw ConfigError("unknown penalty layer '" + layer + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& stem) {
  nlohmann::json tensors = nlohmann::json::array();
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary | std::ios::trunc);
  if (!bin) throw DataError("cannot write checkpoint " + with_ext(stem, ".bin").string());
  std::size_t offset = 0;
  for (const ParamStore* store : {&model.extractor, &model.classifier, &model.critic}) {
    for (std::size_t i = 0; i < store->size(); ++i) {
      const Tensor& t = store->value(i);
      bin.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * 8));
      tensors.push_back({{"name", store->name(i)}, {"shape", t.shape()}, {"offset", offset}, {"count", t.numel()}});
      offset += t.numel();
    }
  }
  if (!bin) throw DataError("failed writing checkpoint " + with_ext(stem, ".bin").string());

  nlohmann::json manifest = {
      {"format", kFormat},
      {"version", kVersion},
      {"dtype", "float64-le"},
      {"model_config", model_config_to_json(model.config)},
      {"tensors", tensors},
  };
  std::ofstream js(with_ext(stem, ".json"), std::ios::trunc);
  if (!js) throw DataError("cannot write checkpoint manifest " + with_ext(stem, ".json").string());
  js << manifest.dump(2) << '\n';
}

ModelBundle load_checkpoint(const std::filesystem::path& stem) {
  std::ifstream js(with_ext(stem, ".json"));
  if (!js) throw DataError("cannot open checkpoint manifest " + with_ext(stem, ".json").string());
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint manifest " + with_ext(stem, ".json").string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw DataError("unsupported checkpoint format in " + with_ext(stem, ".json").string());
  }

  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw DataError("cannot open checkpoint " + with_ext(stem, ".bin").string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw DataError("checkpoint payload is not a whole number of doubles");
  std::vector<double> payload(bytes.size() / 8);
  std::memcpy(payload.data(), bytes.data(), bytes.size());

  ModelBundle model = init_model(0, model_config_from_json(manifest.at("model_config")));
  std::size_t seen = 0;
  for (const auto& entry : manifest.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto count = entry.at("count").get<std::size_t>();
    if (count != shape_numel(shape) || offset + count > payload.size()) {
      throw DataError("checkpoint tensor '" + name + "' is out of bounds");
    }
    ParamStore* store = store_for(model, name);
    if (!store || !store->contains(name)) throw DataError("checkpoint holds unknown tensor '" + name + "'");
    store->set(name, Tensor(shape, std::vector<double>(payload.begin() + std::ptrdiff_t(offset),
                                                       payload.begin() + std::ptrdiff_t(offset + count))));
    ++seen;
  }
  if (seen != model.extractor.size() + model.classifier.size() + model.critic.size()) {
    throw DataError("checkpoint is missing parameters");
  }
  return model;
}

}  // namespace wdwada
