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

#include <string>
#include <vector>

#include "geofuse/metrics/eval.hpp"
#include "geofuse/refine/checkpoint.hpp"
#include "geofuse/refine/trainer.hpp"
#include "geofuse/scenekit/dataset.hpp"

namespace geofuse::app {

using Json = refine::Json;

inline constexpr const char* kOutputRootEnv = "GEOFUSE_OUT";

// Resolved run configuration: sections data, model, train, eval. Every key
// has a default; files and overrides may only set keys that exist.
class RunConfig {
 public:
  RunConfig();  // defaults

  static RunConfig from_json(const Json& j);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  // Dotted path such as "train.lr"; `value` is parsed as JSON when possible,
  // otherwise taken as a string.
  // Types must match the default. With `check` false the whole config is
  // not re-validated, so related keys can be changed one at a time.
  void set(const std::string& path, const std::string& value, bool check = true);
  void validate() const;

  const Json& json() const { return j_; }
  std::string dump() const { return j_.dump(2); }
  std::string hash() const;  // sha256 of the compact serialisation

  scenekit::DatasetConfig train_data() const;
  scenekit::DatasetConfig test_data() const;
  refine::ModelConfig model() const;
  refine::TrainConfig baseline_train() const;
  refine::TrainConfig refiner_train(refine::Ablation ablation = refine::Ablation::kNone) const;
  metrics::EvalSettings eval() const;
  int eval_iterations() const;
  int sweep_iterations() const;
  int eval_objects() const;  // 0 = all held-out objects
  int cost_repeats() const;
  int checkpoint_every() const;
  int log_every() const;

 private:
  Json j_;
};

Json default_config_json();

// Output root: --out flag if given, else $GEOFUSE_OUT, else "runs".
std::string output_root(const std::string& flag);

}  // namespace geofuse::app
