// Copyright 2026 The GeoFuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "geofuse/core/autodiff.hpp"
#include "geofuse/core/params.hpp"
#include "geofuse/refine/model.hpp"
#include "geofuse/refine/optimizer.hpp"

namespace geofuse::refine {

using Json = nlohmann::ordered_json;

// File layout (little-endian):
//   "GEOFUSE\x1a" | u32 version | u64 header bytes | JSON header |
//   u32 record count | records: u32 name length, name, u32 rank, u64 dims[rank], f32 data
inline constexpr char kCheckpointMagic[8] = {'G', 'E', 'O', 'F', 'U', 'S', 'E', '\x1a'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Json header;
  std::vector<std::pair<std::string, ad::Mat<float>>> records;

  const ad::Mat<float>* find(const std::string& name) const;
};

// Writes to a temporary file next to `path`, then renames it into place.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

// SHA-256 over (name, shape, float32 bytes) of each parameter in order.
template <typename T>
std::string parameter_hash(const ParamList<T>& params);

Json model_config_to_json(const ModelConfig& c);
// Strict: unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_json(const Json& j);

// Parameter and optimizer records of a model.
void append_model(Checkpoint& ckpt, const Model<float>& model);
void append_optimizer(Checkpoint& ckpt, const AdamW<float>& opt);
// Loads parameters into an initialised model with matching structure.
void load_model(const Checkpoint& ckpt, Model<float>& model);
void load_optimizer(const Checkpoint& ckpt, AdamW<float>& opt);

// Rebuilds a model from header["model"] and the records; the refiner is
// attached when the checkpoint carries one.
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace geofuse::refine
