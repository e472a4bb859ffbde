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

#include "geofuse/refine/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::refine {

std::string to_string(Stage s) {
  return s == Stage::kBaseline ? "baseline" : "refiner";
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kRandomInit: return "random-init";
    case Ablation::kTokenConcat: return "token-concat";
    case Ablation::kNormalOnly: return "normal-only";
    case Ablation::kDepthOnly: return "depth-only";
  }
  return "unknown";
}

Ablation ablation_from_string(const std::string& name) {
  for (Ablation a : {Ablation::kNone, Ablation::kRandomInit, Ablation::kTokenConcat, Ablation::kNormalOnly,
                     Ablation::kDepthOnly}) {
    if (to_string(a) == name) return a;
  }
  throw ValidationError("unknown ablation '" + name + "' (none, random-init, token-concat, normal-only, depth-only)");
}

const std::vector<Ablation>& all_ablations() {
  static const std::vector<Ablation> v{Ablation::kRandomInit, Ablation::kTokenConcat, Ablation::kNormalOnly,
                                       Ablation::kDepthOnly};
  return v;
}

ModelConfig apply_ablation(ModelConfig c, Ablation a) {
  switch (a) {
    case Ablation::kNone: break;
    case Ablation::kRandomInit: c.geoformer_random_init = true; break;
    case Ablation::kTokenConcat: c.fusion = geofuser::FusionMode::kTokenConcat; break;
    case Ablation::kNormalOnly: c.geometry_channels = {true, false}; break;
    case Ablation::kDepthOnly: c.geometry_channels = {false, true}; break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (steps < 0) throw ValidationError("train.steps must be >= 0");
  if (unroll < 1) throw ValidationError("train.unroll must be >= 1");
  if (batch < 1) throw ValidationError("train.batch must be >= 1");
  if (!(lr > 0)) throw ValidationError("train.lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ValidationError("train betas must be in [0,1)");
  if (weight_decay < 0) throw ValidationError("train.weight_decay must be >= 0");
  if (samples < 8) throw ValidationError("train.samples must be >= 8");
  if (supervision_views < 0) throw ValidationError("train.supervision_views must be >= 0");
  if (tv_scale < 0) throw ValidationError("train.tv_scale must be >= 0");
}

Json TrainConfig::to_json() const {
  Json j;
  j["stage"] = to_string(stage);
  j["ablation"] = to_string(ablation);
  j["steps"] = steps;
  j["unroll"] = unroll;
  j["batch"] = batch;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["weight_decay"] = weight_decay;
  j["horizon"] = horizon;
  j["seed"] = seed;
  j["samples"] = samples;
  j["jitter"] = jitter;
  j["supervision_views"] = supervision_views;
  j["tv_scale"] = tv_scale;
  j["weights"] = {{"rgb", weights.rgb},     {"perceptual", weights.perceptual},
                  {"mask", weights.mask},   {"depth", weights.depth},
                  {"normal", weights.normal}, {"regularizer", weights.regularizer}};
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  const std::string stage = j.value("stage", to_string(c.stage));
  if (stage != "baseline" && stage != "refiner") throw ValidationError("unknown stage '" + stage + "'");
  c.stage = stage == "baseline" ? Stage::kBaseline : Stage::kRefiner;
  c.ablation = ablation_from_string(j.value("ablation", to_string(c.ablation)));
  c.steps = j.value("steps", c.steps);
  c.unroll = j.value("unroll", c.unroll);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.horizon = j.value("horizon", c.horizon);
  c.seed = j.value("seed", c.seed);
  c.samples = j.value("samples", c.samples);
  c.jitter = j.value("jitter", c.jitter);
  c.supervision_views = j.value("supervision_views", c.supervision_views);
  c.tv_scale = j.value("tv_scale", c.tv_scale);
  if (j.contains("weights")) {
    const Json& w = j["weights"];
    c.weights.rgb = w.value("rgb", c.weights.rgb);
    c.weights.perceptual = w.value("perceptual", c.weights.perceptual);
    c.weights.mask = w.value("mask", c.weights.mask);
    c.weights.depth = w.value("depth", c.weights.depth);
    c.weights.normal = w.value("normal", c.weights.normal);
    c.weights.regularizer = w.value("regularizer", c.weights.regularizer);
  }
  c.validate();
  return c;
}

namespace {

LossBreakdown& accumulate(LossBreakdown& acc, const LossBreakdown& v, double w) {
  acc.rgb += w * v.rgb;
  acc.perceptual += w * v.perceptual;
  acc.mask += w * v.mask;
  acc.depth += w * v.depth;
  acc.normal += w * v.normal;
  acc.regularizer += w * v.regularizer;
  return acc;
}

}  // namespace

template <typename T>
Trainer<T>::Trainer(Model<T>& model, const scenekit::Dataset& data, const TrainConfig& config)
    : model_(model), data_(data), config_(config) {
  config_.validate();
  if (data_.objects.empty()) throw ValidationError("training dataset has no objects");
  if (data_.config.resolution % 4 != 0) throw ValidationError("training resolution must be divisible by 4");
  for (const auto& o : data_.objects) {
    if (o.conditioning.empty() || o.supervision.empty())
      throw ValidationError("object " + o.id + " lacks conditioning or supervision views");
  }
  const bool refiner = config_.stage == Stage::kRefiner;
  if (refiner && !model_.has_refiner) throw ValidationError("refiner stage needs a model with a refiner attached");
  model_.set_backbone_trainable(!refiner);
  if (model_.has_refiner) model_.set_refiner_trainable(refiner);
  AdamConfig ac;
  ac.lr = config_.lr;
  ac.beta1 = config_.beta1;
  ac.beta2 = config_.beta2;
  ac.weight_decay = config_.weight_decay;
  const long per_step = refiner ? config_.unroll - 1 : 1;
  ac.horizon = config_.horizon > 0 ? config_.horizon : std::max<long>(1, per_step * config_.steps);
  opt_ = AdamW<T>(ac);
  frozen_.resize(data_.objects.size());
}

template <typename T>
ParamList<T> Trainer<T>::trainable() const {
  return config_.stage == Stage::kBaseline ? model_.backbone_parameters() : model_.refiner_parameters();
}

template <typename T>
std::vector<int> Trainer<T>::batch_objects(int step) const {
  const int n = static_cast<int>(data_.objects.size());
  std::vector<int> out;
  std::vector<int> perm;
  long cached_epoch = -1;
  for (int b = 0; b < config_.batch; ++b) {
    const long g = static_cast<long>(step) * config_.batch + b;
    const long epoch = g / n;
    if (epoch != cached_epoch) {
      perm.resize(n);
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(derive_seed({config_.seed, 0x5eed, static_cast<std::uint64_t>(epoch)}));
      for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
      cached_epoch = epoch;
    }
    out.push_back(perm[g % n]);
  }
  return out;
}

template <typename T>
LossResult<T> Trainer<T>::supervise(const ReconstructionState<T>& state, const scenekit::ObjectEntry& obj, int step,
                                    int pass, int slot) {
  std::vector<int> views(obj.supervision.size());
  std::iota(views.begin(), views.end(), 0);
  if (config_.supervision_views > 0 && config_.supervision_views < static_cast<int>(views.size())) {
    Rng rng(derive_seed({config_.seed, 0x7e55, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(slot)}));
    for (int i = static_cast<int>(views.size()) - 1; i > 0; --i) std::swap(views[i], views[rng.uniform_int(0, i)]);
    views.resize(config_.supervision_views);
    std::sort(views.begin(), views.end());
  }
  std::vector<Var<T>> renders;
  std::vector<scenekit::ViewRecord> gts;
  for (int v : views) {
    triplane::RenderSettings s;
    s.resolution = data_.config.resolution;
    s.samples = config_.samples;
    s.chunk_rays = model_.config.chunk_rays;
    s.jitter = config_.jitter && step >= 0;
    s.seed = derive_seed({config_.seed, static_cast<std::uint64_t>(step), static_cast<std::uint64_t>(pass),
                          static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(v)});
    renders.push_back(triplane::render_view(state.triplane, model_.decoder.field, obj.supervision[v].camera, s));
    gts.push_back(obj.supervision[v]);
  }
  Var<T> reg;
  if (config_.tv_scale > 0) reg = density_tv(state.triplane, model_.decoder.field, config_.tv_scale);
  return loss_total(renders, gts, reg, config_.weights);
}

template <typename T>
const typename Trainer<T>::Frozen& Trainer<T>::frozen(int object) {
  auto& slot = frozen_[object];
  if (!slot) {
    const auto& obj = data_.objects[object];
    Frozen f;
    f.semantic = semantic_tokens(obj.conditioning, model_);
    f.state0 = reconstruct_once<T>(obj.conditioning, model_, nullptr, &f.semantic);
    // Logged only; deterministic (no jitter, step = -1).
    f.loss0 = supervise(f.state0, obj, -1, 0, 0).values;
    slot = std::move(f);
  }
  return *slot;
}

template <typename T>
std::vector<StepLog> Trainer<T>::step() {
  const int step = steps_done_;
  const bool refiner = config_.stage == Stage::kRefiner;
  const auto objs = batch_objects(step);
  const int B = static_cast<int>(objs.size());
  const double inv = 1.0 / B;
  std::vector<ReconstructionState<T>> prev(B);
  std::vector<StepLog> logs;
  const ParamList<T> params = trainable();
  for (int pass = 0; pass < config_.passes(); ++pass) {
    StepLog log;
    log.step = step;
    log.pass = pass;
    log.lr = opt_.learning_rate();
    if (refiner && pass == 0) {
      for (int b = 0; b < B; ++b) {
        const Frozen& f = frozen(objs[b]);
        prev[b] = f.state0;
        accumulate(log.loss, f.loss0, inv);
      }
      log.loss.total = weighted_total(log.loss, config_.weights);
      logs.push_back(log);
      continue;
    }
    for (int b = 0; b < B; ++b) {
      const auto& obj = data_.objects[objs[b]];
      const auto* sem = refiner ? &frozen(objs[b]).semantic : nullptr;
      ReconstructionState<T> state = reconstruct_once<T>(obj.conditioning, model_, pass == 0 ? nullptr : &prev[b], sem);
      const LossResult<T> res = supervise(state, obj, step, pass, b);
      std::ostringstream where;
      where << "step " << step << " pass " << pass << " object " << obj.id;
      check_finite(res.values, where.str());
      ad::backward(ad::scale(res.total, static_cast<T>(inv)));
      accumulate(log.loss, res.values, inv);
      state.triplane.planes = ad::detach(state.triplane.planes);
      prev[b] = std::move(state);
    }
    log.loss.total = weighted_total(log.loss, config_.weights);
    log.updated = opt_.step(params);
    logs.push_back(log);
  }
  ++steps_done_;
  return logs;
}

template <typename T>
void run_training(Trainer<T>& trainer, const StepCallback& on_step) {
  while (trainer.steps_done() < trainer.config().steps) {
    const auto logs = trainer.step();
    if (on_step) on_step(logs);
  }
}

template class Trainer<float>;
template class Trainer<double>;
template void run_training<float>(Trainer<float>&, const StepCallback&);
template void run_training<double>(Trainer<double>&, const StepCallback&);

Checkpoint make_checkpoint(const Model<float>& model, const Trainer<float>& trainer, const scenekit::Dataset& data,
                           const Json& extra) {
  Checkpoint ckpt;
  Json& h = ckpt.header;
  h["format"] = "geofuse-checkpoint";
  h["stage"] = to_string(trainer.config().stage);
  h["ablation"] = to_string(trainer.config().ablation);
  h["step"] = trainer.steps_done();
  h["seed"] = trainer.config().seed;
  h["has_refiner"] = model.has_refiner;
  h["model"] = model_config_to_json(model.config);
  h["train"] = trainer.config().to_json();
  const auto& oc = trainer.optimizer().config();
  h["optimizer"] = {{"name", "adamw"},
                    {"lr", oc.lr},
                    {"beta1", oc.beta1},
                    {"beta2", oc.beta2},
                    {"weight_decay", oc.weight_decay},
                    {"horizon", oc.horizon},
                    {"updates", trainer.optimizer().updates()}};
  Json seeds = Json::array();
  for (const auto& o : data.objects) seeds.push_back(o.scene_seed);
  h["dataset"] = {{"content_hash", data.content_hash}, {"manifest_hash", data.manifest_hash}, {"scene_seeds", seeds}};
  h["backbone_hash"] = parameter_hash(model.backbone_parameters());
  if (model.has_refiner) h["refiner_hash"] = parameter_hash(model.refiner_parameters());
  for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  append_model(ckpt, model);
  append_optimizer(ckpt, trainer.optimizer());
  return ckpt;
}

void resume_trainer(const Checkpoint& ckpt, Trainer<float>& trainer) {
  load_optimizer(ckpt, trainer.optimizer());
  trainer.set_steps_done(ckpt.header.value("step", 0));
}

}  // namespace geofuse::refine
