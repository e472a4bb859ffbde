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
#include <optional>
#include <string>
#include <vector>

#include "geofuse/refine/checkpoint.hpp"
#include "geofuse/refine/loss.hpp"
#include "geofuse/refine/model.hpp"
#include "geofuse/refine/optimizer.hpp"
#include "geofuse/scenekit/dataset.hpp"

namespace geofuse::refine {

enum class Stage { kBaseline, kRefiner };
enum class Ablation { kNone, kRandomInit, kTokenConcat, kNormalOnly, kDepthOnly };

std::string to_string(Stage s);
std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& name);
const std::vector<Ablation>& all_ablations();  // the four variants, table order

// Model config with the ablation's switches applied.
ModelConfig apply_ablation(ModelConfig config, Ablation ablation);

struct TrainConfig {
  Stage stage = Stage::kBaseline;
  Ablation ablation = Ablation::kNone;
  int steps = 200;
  int unroll = 3;  // passes per refiner step, counting the frozen initial pass (baseline uses 1)
  int batch = 1;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.01;
  long horizon = 0;  // optimizer updates for the cosine schedule; 0 = derived from steps
  std::uint64_t seed = 0;
  int samples = 32;            // samples per ray for supervision renders
  bool jitter = true;          // stratified jitter on supervision renders
  int supervision_views = 0;   // 0 = all views of the object
  double tv_scale = 1e-3;
  LossWeights weights;

  int passes() const { return stage == Stage::kBaseline ? 1 : unroll; }
  void validate() const;
  Json to_json() const;
};

TrainConfig train_config_from_json(const Json& j);

struct StepLog {
  int step = 0;
  int pass = 0;  // unrolled iteration t
  double lr = 0;
  bool updated = false;
  LossBreakdown loss;
};

// Owns the optimizer and the per-object caches of the frozen stage-0 pass.
template <typename T>
class Trainer {
 public:
  Trainer(Model<T>& model, const scenekit::Dataset& data, const TrainConfig& config);

  // One unrolled step: for t = 0..passes-1 reconstruct, render the
  // supervision views, backpropagate and update immediately. Geometry fed to
  // pass t+1 is detached. Returns one entry per pass.
  std::vector<StepLog> step();

  int steps_done() const { return steps_done_; }
  void set_steps_done(int n) { steps_done_ = n; }
  AdamW<T>& optimizer() { return opt_; }
  const AdamW<T>& optimizer() const { return opt_; }
  const TrainConfig& config() const { return config_; }
  ParamList<T> trainable() const;

  // Object indices used at `step` (epoch-wise shuffles derived from the seed).
  std::vector<int> batch_objects(int step) const;

 private:
  struct Frozen {
    std::vector<encoders::TokenGrid<T>> semantic;
    ReconstructionState<T> state0;
    LossBreakdown loss0;
  };
  const Frozen& frozen(int object);
  LossResult<T> supervise(const ReconstructionState<T>& state, const scenekit::ObjectEntry& obj, int step, int pass,
                          int slot);

  Model<T>& model_;
  const scenekit::Dataset& data_;
  TrainConfig config_;
  AdamW<T> opt_;
  int steps_done_ = 0;
  std::vector<std::optional<Frozen>> frozen_;
};

using StepCallback = std::function<void(const std::vector<StepLog>&)>;

// Runs `trainer` until it has done config.steps steps.
template <typename T>
void run_training(Trainer<T>& trainer, const StepCallback& on_step = {});

// Header + records for a float model and its optimizer.
Checkpoint make_checkpoint(const Model<float>& model, const Trainer<float>& trainer, const scenekit::Dataset& data,
                           const Json& extra = Json::object());

// Restores optimizer moments and the step counter.
void resume_trainer(const Checkpoint& ckpt, Trainer<float>& trainer);

}  // namespace geofuse::refine
