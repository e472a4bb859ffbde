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

#include <functional>
#include <string>
#include <vector>

#include "geofuse/app/config.hpp"
#include "geofuse/metrics/eval.hpp"

namespace geofuse::app {

using Logger = std::function<void(const std::string&)>;

// Layout under an output root.
struct Paths {
  std::string root;
  std::string base_override;  // baseline checkpoint outside the root
  std::string data() const { return root + "/data"; }
  std::string train_data() const { return data() + "/train"; }
  std::string test_data() const { return data() + "/test"; }
  std::string ckpt_dir() const { return root + "/ckpt"; }
  std::string base_ckpt() const { return base_override.empty() ? ckpt_dir() + "/base.gfck" : base_override; }
  // "proposed" for Ablation::kNone.
  std::string refine_ckpt(refine::Ablation a) const;
  std::string eval_dir() const { return root + "/eval"; }
};

std::string method_name(refine::Ablation a);  // "proposed" or the variant name

// Hash of the config a training stage depends on: data, model and train
// (the baseline ignores the refiner-only keys).
std::string training_hash(const RunConfig& cfg, refine::Stage stage);

// Writes <dir>/train, <dir>/test and <dir>/config.json.
void gen_data(const RunConfig& cfg, const std::string& dir, bool force, const Logger& log);

struct DataPair {
  scenekit::Dataset train, test;
};
DataPair load_data(const std::string& dir);

// Baseline training. A checkpoint at `path` with the same training hash is
// reused when complete and resumed otherwise (unless `fresh`). Writes the
// per-pass loss log next to it (<path>.log.csv).
void train_base(const RunConfig& cfg, const scenekit::Dataset& train, const std::string& path, bool fresh,
                const Logger& log);
// Refiner training on top of the baseline checkpoint `base`.
void train_refine(const RunConfig& cfg, const scenekit::Dataset& train, const std::string& base,
                  refine::Ablation ablation, const std::string& path, bool fresh, const Logger& log);

// Throws ValidationError when the checkpoint was trained on another dataset
// or under another training configuration, unless `allow_mismatch`.
void check_provenance(const refine::Checkpoint& ckpt, const RunConfig& cfg, const scenekit::Dataset& train,
                      bool allow_mismatch);

// Held-out objects for evaluation (eval.objects limits the count).
std::vector<metrics::EvalObject> eval_objects(const RunConfig& cfg, const DataPair& data);

struct AblationRow {
  std::string method;
  metrics::MetricsReport report;
};
// Baseline (1 pass), the four variants and the proposed configuration, each
// at eval.iterations passes. Trains missing refiner checkpoints.
std::vector<AblationRow> run_ablations(const RunConfig& cfg, const Paths& paths, const DataPair& data,
                                       const std::vector<metrics::EvalObject>& objects, const Logger& log);
std::string format_ablation_table(const std::vector<AblationRow>& rows);
void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows);

void ensure_dir(const std::string& dir);

}  // namespace geofuse::app
