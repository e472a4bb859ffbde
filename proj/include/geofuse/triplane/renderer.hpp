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

#include <vector>

#include "geofuse/core/image.hpp"
#include "geofuse/core/ops.hpp"
#include "geofuse/scenekit/camera.hpp"
#include "geofuse/scenekit/view.hpp"
#include "geofuse/triplane/field.hpp"
#include "geofuse/triplane/kernels.hpp"

namespace geofuse::triplane {

struct RenderSettings {
  int resolution = 32;
  int samples = 32;
  bool jitter = false;
  std::uint64_t seed = 0;
  int chunk_rays = 128;
};

// Central-difference offset for density-gradient normals.
inline double normal_step(int plane_resolution) { return 2.0 / plane_resolution; }

kernels::RaySetup ray_setup(const RenderSettings& s, int plane_resolution);

// Differentiable render: HW x 8, columns [r g b depth nx ny nz accumulation].
template <typename T>
Var<T> render_view(const Triplane<T>& tp, const FieldMlp<T>& mlp, const scenekit::CameraPose& camera,
                   const RenderSettings& settings, std::vector<T>* transmittance = nullptr);

struct RenderedView {
  Image rgb, depth, normal, mask, accumulation;
  scenekit::CameraPose camera;

  scenekit::ViewRecord as_view_record() const;
};

template <typename T>
RenderedView unpack_render(const Mat<T>& out, int resolution, const scenekit::CameraPose& camera);

// Column slices of a render output, kept differentiable.
template <typename T>
Var<T> render_rgb(const Var<T>& out) {
  return ad::slice_cols(out, kernels::kColRgb, 3);
}
template <typename T>
Var<T> render_depth(const Var<T>& out) {
  return ad::slice_cols(out, kernels::kColDepth, 1);
}
template <typename T>
Var<T> render_normal(const Var<T>& out) {
  return ad::slice_cols(out, kernels::kColNormal, 3);
}
template <typename T>
Var<T> render_accumulation(const Var<T>& out) {
  return ad::slice_cols(out, kernels::kColAccum, 1);
}

}  // namespace geofuse::triplane
