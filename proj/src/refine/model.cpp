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

#include "geofuse/refine/model.hpp"

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"

namespace geofuse::refine {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.channels != 3) throw ValidationError("semantic encoder must take 3 channels");
  if (encoder.dim != decoder.dim)
    throw ValidationError("encoder width " + std::to_string(encoder.dim) + " != decoder width " +
                          std::to_string(decoder.dim));
  if (fuser_hidden < 0) throw ValidationError("fuser_hidden must be >= 0");
  if (render_samples < 8) throw ValidationError("render_samples must be >= 8");
  if (chunk_rays < 1) throw ValidationError("chunk_rays must be >= 1");
  if (!(depth_scale > 0)) throw ValidationError("depth_scale must be positive");
  if (!geometry_channels.normal && !geometry_channels.depth)
    throw ValidationError("geometry input needs at least one channel group");
}

template <typename T>
Model<T> Model<T>::init_baseline(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  Rng enc_rng(derive_seed({seed, 1}));
  m.semantic = encoders::Encoder<T>::init(config.encoder, enc_rng);
  Rng dec_rng(derive_seed({seed, 2}));
  m.decoder.init(config.decoder, dec_rng);
  return m;
}

template <typename T>
void Model<T>::attach_refiner(std::uint64_t seed) {
  if (config.geoformer_random_init) {
    encoders::EncoderConfig c = config.encoder;
    c.channels = 4;
    Rng rng(derive_seed({seed, 3}));
    geometry = encoders::Encoder<T>::init(c, rng);
  } else {
    geometry = encoders::init_geoformer_from_semantic(semantic);
  }
  Rng rng(derive_seed({seed, 4}));
  fuser = geofuser::FusionNetwork<T>(config.encoder.dim, config.fuser_hidden, config.fusion, rng);
  has_refiner = true;
}

template <typename T>
ParamList<T> Model<T>::backbone_parameters() const {
  ParamList<T> ps = semantic.parameters("sem");
  const auto d = decoder.parameters("dec");
  ps.insert(ps.end(), d.begin(), d.end());
  return ps;
}

template <typename T>
ParamList<T> Model<T>::refiner_parameters() const {
  if (!has_refiner) return {};
  ParamList<T> ps = geometry.parameters("geo");
  const auto f = fuser.parameters("fuser");
  ps.insert(ps.end(), f.begin(), f.end());
  return ps;
}

template <typename T>
ParamList<T> Model<T>::parameters() const {
  ParamList<T> ps = backbone_parameters();
  const auto r = refiner_parameters();
  ps.insert(ps.end(), r.begin(), r.end());
  return ps;
}

template <typename T>
void Model<T>::set_backbone_trainable(bool on) const {
  set_trainable(backbone_parameters(), on);
}

template <typename T>
void Model<T>::set_refiner_trainable(bool on) const {
  set_trainable(refiner_parameters(), on);
}

triplane::RenderSettings feedback_settings(const ModelConfig& config) {
  triplane::RenderSettings s;
  s.resolution = config.encoder.image_size;
  s.samples = config.render_samples;
  s.chunk_rays = config.chunk_rays;
  return s;
}

template <typename T>
GeometryMaps<T> render_geometry(const triplane::Triplane<T>& tp, const triplane::FieldMlp<T>& field,
                                const scenekit::CameraPose& camera, const ModelConfig& config) {
  triplane::Triplane<T> frozen = tp;
  frozen.planes = ad::detach(tp.planes);
  const triplane::FieldMlp<T> f{ad::detach(field.w1), ad::detach(field.b1), ad::detach(field.w2),
                                ad::detach(field.b2), ad::detach(field.w3), ad::detach(field.b3)};
  const Mat<T> out = triplane::render_view(frozen, f, camera, feedback_settings(config)).value();
  return {out.col(kernels::kColDepth), out.middleCols(kernels::kColNormal, 3)};
}

template <typename T>
std::vector<encoders::TokenGrid<T>> semantic_tokens(const std::vector<scenekit::ViewRecord>& cond,
                                                    const Model<T>& model) {
  std::vector<encoders::TokenGrid<T>> out;
  out.reserve(cond.size());
  for (std::size_t k = 0; k < cond.size(); ++k) {
    const auto& v = cond[k];
    if (v.rgb.height != model.config.encoder.image_size || v.rgb.width != model.config.encoder.image_size)
      throw ValidationError("conditioning view " + std::to_string(k) + " is " + std::to_string(v.rgb.height) +
                            "px, encoder expects " + std::to_string(model.config.encoder.image_size));
    out.push_back(encoders::encode_semantic(v.rgb, v.camera, model.semantic, static_cast<int>(k)));
  }
  return out;
}

template <typename T>
ReconstructionState<T> reconstruct_once(const std::vector<scenekit::ViewRecord>& cond, const Model<T>& model,
                                        const ReconstructionState<T>* prev,
                                        const std::vector<encoders::TokenGrid<T>>* semantic) {
  if (cond.empty()) throw ValidationError("reconstruction needs at least one conditioning view");
  std::vector<encoders::TokenGrid<T>> own;
  if (!semantic) {
    own = semantic_tokens(cond, model);
    semantic = &own;
  }
  if (semantic->size() != cond.size()) throw ValidationError("semantic token count does not match views");
  ReconstructionState<T> state;
  if (!prev) {
    state.step = 0;
    state.triplane = model.decoder.decode(*semantic);
    return state;
  }
  if (!model.has_refiner) throw ValidationError("refinement pass requested but the model has no geometry encoder");
  std::vector<encoders::TokenGrid<T>> fused;
  for (std::size_t k = 0; k < cond.size(); ++k) {
    GeometryMaps<T> g = render_geometry(prev->triplane, model.decoder.field, cond[k].camera, model.config);
    const Mat<T> input =
        encoders::geometry_matrix<T>(g.depth, g.normal, model.config.depth_scale, model.config.geometry_channels);
    const auto geo = encoders::encode_geometry(ad::constant(input), cond[k].camera, model.geometry,
                                               static_cast<int>(k));
    fused.push_back(geofuser::fuse((*semantic)[k], geo, model.fuser));
    state.geometry.push_back(std::move(g));
  }
  state.step = prev->step + 1;
  state.triplane = model.decoder.decode(fused);
  return state;
}

template <typename T>
std::vector<ReconstructionState<T>> infer(const std::vector<scenekit::ViewRecord>& cond, const Model<T>& model,
                                          int iterations) {
  if (iterations < 1) throw ValidationError("iterations must be >= 1");
  const auto sem = semantic_tokens(cond, model);
  std::vector<ReconstructionState<T>> states;
  states.reserve(iterations);
  for (int i = 0; i < iterations; ++i) {
    states.push_back(reconstruct_once(cond, model, states.empty() ? nullptr : &states.back(), &sem));
  }
  return states;
}

#define GEOFUSE_INSTANTIATE_MODEL(T)                                                                                  \
  template struct Model<T>;                                                                                           \
  template GeometryMaps<T> render_geometry<T>(const triplane::Triplane<T>&, const triplane::FieldMlp<T>&,             \
                                              const scenekit::CameraPose&, const ModelConfig&);                       \
  template std::vector<encoders::TokenGrid<T>> semantic_tokens<T>(const std::vector<scenekit::ViewRecord>&,           \
                                                                  const Model<T>&);                                   \
  template ReconstructionState<T> reconstruct_once<T>(const std::vector<scenekit::ViewRecord>&, const Model<T>&,      \
                                                      const ReconstructionState<T>*,                                  \
                                                      const std::vector<encoders::TokenGrid<T>>*);                    \
  template std::vector<ReconstructionState<T>> infer<T>(const std::vector<scenekit::ViewRecord>&, const Model<T>&, int);

GEOFUSE_INSTANTIATE_MODEL(float)
GEOFUSE_INSTANTIATE_MODEL(double)

}  // namespace geofuse::refine
