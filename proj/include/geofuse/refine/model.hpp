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

#include <cstdint>
#include <string>
#include <vector>

#include "geofuse/encoders/encoder.hpp"
#include "geofuse/geofuser/fuser.hpp"
#include "geofuse/scenekit/view.hpp"
#include "geofuse/triplane/decoder.hpp"
#include "geofuse/triplane/renderer.hpp"

namespace geofuse::refine {

template <typename T>
using Var = ad::Var<T>;
template <typename T>
using Mat = ad::Mat<T>;

struct ModelConfig {
  encoders::EncoderConfig encoder;  // semantic encoder; the geometry encoder adds one channel
  triplane::DecoderConfig decoder;
  int fuser_hidden = 0;  // 0 = token width
  geofuser::FusionMode fusion = geofuser::FusionMode::kResidual;
  encoders::GeometryChannels geometry_channels;
  bool geoformer_random_init = false;
  int render_samples = 32;  // samples per ray for geometry feedback renders
  int chunk_rays = 128;
  double depth_scale = encoders::depth_scale_for(2.2);

  void validate() const;
};

// Backbone = semantic encoder + triplane decoder (with field MLP).
// Refiner = geometry encoder + fusion network.
template <typename T>
struct Model {
  ModelConfig config;
  encoders::Encoder<T> semantic;
  triplane::TriplaneDecoder<T> decoder;
  bool has_refiner = false;
  encoders::Encoder<T> geometry;
  geofuser::FusionNetwork<T> fuser;

  static Model init_baseline(const ModelConfig& config, std::uint64_t seed);
  // Copy-initialised (or, per config, freshly drawn) geometry encoder and a
  // zero-output fusion network.
  void attach_refiner(std::uint64_t seed);

  ParamList<T> backbone_parameters() const;
  ParamList<T> refiner_parameters() const;
  ParamList<T> parameters() const;
  void set_backbone_trainable(bool on) const;
  void set_refiner_trainable(bool on) const;
};

// Turns off gradients on every model parameter for its lifetime, so forward
// passes record no graph; restores the previous flags on exit.
template <typename T>
class NoGradScope {
 public:
  explicit NoGradScope(const Model<T>& model) : params_(model.parameters()) {
    for (auto& p : params_) {
      flags_.push_back(p.var.requires_grad());
      p.var.set_requires_grad(false);
    }
  }
  ~NoGradScope() {
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i].var.set_requires_grad(flags_[i]);
  }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  ParamList<T> params_;
  std::vector<bool> flags_;
};

template <typename T>
struct GeometryMaps {
  Mat<T> depth;   // HW x 1, 0 on background
  Mat<T> normal;  // HW x 3 camera space, 0 on background
};

template <typename T>
struct ReconstructionState {
  int step = 0;
  triplane::Triplane<T> triplane;
  std::vector<GeometryMaps<T>> geometry;  // empty at step 0, else one per conditioning view

  bool has_geometry() const { return !geometry.empty(); }
};

triplane::RenderSettings feedback_settings(const ModelConfig& config);

// Detached depth and normal maps of a triplane under `camera`.
template <typename T>
GeometryMaps<T> render_geometry(const triplane::Triplane<T>& tp, const triplane::FieldMlp<T>& field,
                                const scenekit::CameraPose& camera, const ModelConfig& config);

template <typename T>
std::vector<encoders::TokenGrid<T>> semantic_tokens(const std::vector<scenekit::ViewRecord>& cond,
                                                    const Model<T>& model);

// One pass of the loop. With `prev` null the fusion stage is bypassed and the
// decoder sees semantic tokens only (step 0). Otherwise each conditioning view
// gets depth/normal rendered from prev's triplane (detached), encoded by the
// geometry encoder and fused with its semantic tokens before decoding.
// `semantic` may carry precomputed semantic tokens.
template <typename T>
ReconstructionState<T> reconstruct_once(const std::vector<scenekit::ViewRecord>& cond, const Model<T>& model,
                                        const ReconstructionState<T>* prev,
                                        const std::vector<encoders::TokenGrid<T>>* semantic = nullptr);

// Runs `iterations` passes and returns every state.
template <typename T>
std::vector<ReconstructionState<T>> infer(const std::vector<scenekit::ViewRecord>& cond, const Model<T>& model,
                                          int iterations);

}  // namespace geofuse::refine
