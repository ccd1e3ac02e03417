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

// Model checkpoints are two files sharing a stem:
//   <stem>.bin   parameter values as little-endian IEEE-754 doubles, back to back
//   <stem>.json  manifest: model config plus {name, shape, offset, count} per tensor
// Only parameter values are stored; optimizer state is not.

#pragma once

#include <filesystem>

#include "json.hpp"
#include "wdwada/networks.hpp"

namespace wdwada {

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& stem);
ModelBundle load_checkpoint(const std::filesystem::path& stem);

}  // namespace wdwada
