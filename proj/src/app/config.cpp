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

#include "geofuse/app/config.hpp"

#include <cstdlib>
#include <fstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/hash.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::app {

namespace {

refine::ModelConfig desk_model() {
  refine::ModelConfig c;
  c.encoder.image_size = 32;
  c.encoder.patch = 8;
  c.encoder.dim = 32;
  c.encoder.layers = 2;
  c.encoder.heads = 4;
  c.decoder.resolution = 8;
  c.decoder.dim = 32;
  c.decoder.layers = 2;
  c.decoder.heads = 4;
  c.render_samples = 32;
  c.chunk_rays = 128;
  return c;
}

bool same_kind(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) return !(a.is_number_integer() && !b.is_number_integer());
  return a.type() == b.type();
}

// Copies `src` into `dst`, rejecting keys that `dst` lacks.
void merge_strict(Json& dst, const Json& src, const std::string& where) {
  if (!src.is_object()) throw ValidationError("config section '" + where + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!dst.contains(it.key())) throw ValidationError("unknown config key '" + path + "'");
    Json& slot = dst[it.key()];
    if (slot.is_object()) {
      merge_strict(slot, it.value(), path);
    } else {
      if (!same_kind(slot, it.value())) throw ValidationError("config key '" + path + "' has the wrong type");
      slot = slot.is_number_float() ? Json(it.value().get<double>()) : it.value();
    }
  }
}

template <typename V>
V get(const Json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<V>();
}

}  // namespace

Json default_config_json() {
  Json j;
  j["data"] = {{"train_objects", 64}, {"test_objects", 16}, {"views", 8},          {"cond_views", 4},
               {"resolution", 32},    {"seed", 1},          {"test_seed", 2},      {"max_primitives", 4},
               {"radius_lo", 1.5},    {"radius_hi", 2.2},   {"fov_deg", 40.0},     {"cond_radius", 2.0}};
  j["model"] = refine::model_config_to_json(desk_model());
  const refine::LossWeights w;
  j["train"] = {{"base_steps", 2000},
                {"refine_steps", 1000},
                {"unroll", 3},
                {"batch", 1},
                {"lr", 3e-3},
                {"refine_lr", 3e-3},
                {"beta1", 0.9},
                {"beta2", 0.95},
                {"weight_decay", 0.01},
                {"seed", 7},
                {"samples", 32},
                {"jitter", true},
                {"supervision_views", 0},
                {"tv_scale", 1e-3},
                {"weights",
                 {{"rgb", w.rgb},
                  {"perceptual", w.perceptual},
                  {"mask", w.mask},
                  {"depth", w.depth},
                  {"normal", w.normal},
                  {"regularizer", w.regularizer}}},
                {"checkpoint_every", 250},
                {"log_every", 50}};
  j["eval"] = {{"iterations", 2},   {"max_iterations", 3}, {"resolution", 32},     {"samples", 64},
               {"radius", 2.0},     {"fov_deg", 40.0},     {"perceptual", "pyramid-l1"}, {"objects", 0},
               {"cost_repeats", 5}};
  return j;
}

RunConfig::RunConfig() : j_(default_config_json()) {}

RunConfig RunConfig::from_json(const Json& j) {
  RunConfig c;
  merge_strict(c.j_, j, "");
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void RunConfig::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << dump() << "\n";
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeFailure("cannot write " + path);
}

void RunConfig::set(const std::string& path, const std::string& value, bool check) {
  Json parsed;
  try {
    parsed = Json::parse(value);
  } catch (const nlohmann::json::exception&) {
    parsed = value;
  }
  Json patch = parsed;
  std::size_t end = path.size();
  while (true) {
    const std::size_t dot = path.rfind('.', end - 1);
    const std::string key = path.substr(dot == std::string::npos ? 0 : dot + 1, end - (dot == std::string::npos ? 0 : dot + 1));
    if (key.empty()) throw ValidationError("bad config path '" + path + "'");
    Json wrap;
    wrap[key] = patch;
    patch = wrap;
    if (dot == std::string::npos) break;
    end = dot;
  }
  merge_strict(j_, patch, "");
  if (check) validate();
}

std::string RunConfig::hash() const { return sha256_hex(j_.dump()); }

void RunConfig::validate() const {
  train_data();
  test_data();
  model().validate();
  baseline_train().validate();
  refiner_train().validate();
  if (get<int>(j_, "data", "resolution") != model().encoder.image_size)
    throw ValidationError("data.resolution must equal model.encoder.image_size");
  if (eval_iterations() < 1) throw ValidationError("eval.iterations must be >= 1");
  if (sweep_iterations() < 2) throw ValidationError("eval.max_iterations must be >= 2");
  if (eval().samples < 8) throw ValidationError("eval.samples must be >= 8");
  metrics::perceptual_metric(eval().perceptual);
}

scenekit::DatasetConfig RunConfig::train_data() const {
  scenekit::DatasetConfig c;
  c.objects = get<int>(j_, "data", "train_objects");
  c.views = get<int>(j_, "data", "views");
  c.cond_views = get<int>(j_, "data", "cond_views");
  c.resolution = get<int>(j_, "data", "resolution");
  c.seed = get<std::uint64_t>(j_, "data", "seed");
  c.max_primitives = get<int>(j_, "data", "max_primitives");
  c.radius_lo = get<double>(j_, "data", "radius_lo");
  c.radius_hi = get<double>(j_, "data", "radius_hi");
  c.fov_deg = get<double>(j_, "data", "fov_deg");
  c.cond_radius = get<double>(j_, "data", "cond_radius");
  return c;
}

scenekit::DatasetConfig RunConfig::test_data() const {
  scenekit::DatasetConfig c = train_data();
  c.objects = get<int>(j_, "data", "test_objects");
  c.seed = get<std::uint64_t>(j_, "data", "test_seed");
  if (c.seed == train_data().seed) throw ValidationError("data.test_seed must differ from data.seed");
  return c;
}

refine::ModelConfig RunConfig::model() const { return refine::model_config_from_json(j_.at("model")); }

refine::TrainConfig RunConfig::baseline_train() const {
  const Json& t = j_.at("train");
  refine::TrainConfig c;
  c.stage = refine::Stage::kBaseline;
  c.steps = t.at("base_steps").get<int>();
  c.batch = t.at("batch").get<int>();
  c.lr = t.at("lr").get<double>();
  c.beta1 = t.at("beta1").get<double>();
  c.beta2 = t.at("beta2").get<double>();
  c.weight_decay = t.at("weight_decay").get<double>();
  c.seed = t.at("seed").get<std::uint64_t>();
  c.samples = t.at("samples").get<int>();
  c.jitter = t.at("jitter").get<bool>();
  c.supervision_views = t.at("supervision_views").get<int>();
  c.tv_scale = t.at("tv_scale").get<double>();
  const Json& w = t.at("weights");
  c.weights.rgb = w.at("rgb").get<double>();
  c.weights.perceptual = w.at("perceptual").get<double>();
  c.weights.mask = w.at("mask").get<double>();
  c.weights.depth = w.at("depth").get<double>();
  c.weights.normal = w.at("normal").get<double>();
  c.weights.regularizer = w.at("regularizer").get<double>();
  return c;
}

refine::TrainConfig RunConfig::refiner_train(refine::Ablation ablation) const {
  refine::TrainConfig c = baseline_train();
  const Json& t = j_.at("train");
  c.stage = refine::Stage::kRefiner;
  c.ablation = ablation;
  c.steps = t.at("refine_steps").get<int>();
  c.unroll = t.at("unroll").get<int>();
  c.lr = t.at("refine_lr").get<double>();
  c.seed = derive_seed({c.seed, 0x4ef1});
  return c;
}

metrics::EvalSettings RunConfig::eval() const {
  metrics::EvalSettings s;
  s.resolution = get<int>(j_, "eval", "resolution");
  s.samples = get<int>(j_, "eval", "samples");
  s.grid.radius = get<double>(j_, "eval", "radius");
  s.grid.fov_deg = get<double>(j_, "eval", "fov_deg");
  s.perceptual = get<std::string>(j_, "eval", "perceptual");
  return s;
}

int RunConfig::eval_iterations() const { return get<int>(j_, "eval", "iterations"); }
int RunConfig::sweep_iterations() const { return get<int>(j_, "eval", "max_iterations"); }
int RunConfig::eval_objects() const { return get<int>(j_, "eval", "objects"); }
int RunConfig::cost_repeats() const { return get<int>(j_, "eval", "cost_repeats"); }
int RunConfig::checkpoint_every() const { return get<int>(j_, "train", "checkpoint_every"); }
int RunConfig::log_every() const { return get<int>(j_, "train", "log_every"); }

std::string output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

}  // namespace geofuse::app
