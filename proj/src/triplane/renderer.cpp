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

#include "geofuse/triplane/renderer.hpp"

#include <stdexcept>

#include "geofuse/core/ops.hpp"

namespace geofuse::triplane {

kernels::RaySetup ray_setup(const RenderSettings& s, int plane_resolution) {
  kernels::RaySetup r;
  r.resolution = s.resolution;
  r.samples = s.samples;
  r.jitter = s.jitter;
  r.seed = s.seed;
  r.chunk_rays = s.chunk_rays;
  r.normal_step = normal_step(plane_resolution);
  return r;
}

template <typename T>
Var<T> render_view(const Triplane<T>& tp, const FieldMlp<T>& mlp, const scenekit::CameraPose& camera,
                   const RenderSettings& settings, std::vector<T>* transmittance) {
  if (tp.planes.rows() != 3 * tp.resolution * tp.resolution || tp.planes.cols() != mlp.channels())
    throw std::invalid_argument("render_view: triplane shape does not match the field MLP");
  const kernels::RaySetup setup = ray_setup(settings, tp.resolution);
  kernels::FieldRefs<T> refs{&tp.planes.value(), tp.resolution, &mlp.w1.value(), &mlp.b1.value(),
                             &mlp.w2.value(), &mlp.b2.value(), &mlp.w3.value(), &mlp.b3.value()};
  const bool want_planes = tp.planes.requires_grad();
  const bool want_mlp = mlp.w1.requires_grad() || mlp.b1.requires_grad() || mlp.w2.requires_grad() ||
                        mlp.b2.requires_grad() || mlp.w3.requires_grad() || mlp.b3.requires_grad();
  std::shared_ptr<kernels::RenderCache<T>> cache;
  Mat<T> out =
      kernels::render_forward<T>(refs, camera, setup, (want_planes || want_mlp) ? &cache : nullptr, transmittance);
  const int res = tp.resolution;
  return ad::make_node<T>(
      std::move(out), {tp.planes, mlp.w1, mlp.b1, mlp.w2, mlp.b2, mlp.w3, mlp.b3},
      [cache, res](ad::Node<T>& nd) {
        auto& ps = nd.parents;
        kernels::FieldRefs<T> r{&ps[0]->value, res,          &ps[1]->value, &ps[2]->value,
                                &ps[3]->value, &ps[4]->value, &ps[5]->value, &ps[6]->value};
        bool mlp_on = false;
        for (int i = 1; i < 7; ++i) mlp_on = mlp_on || ps[i]->requires_grad;
        kernels::FieldGrads<T> g;
        g.init(r, ps[0]->requires_grad, mlp_on);
        kernels::render_backward<T>(r, *cache, nd.grad, g);
        if (ps[0]->requires_grad) ps[0]->grad_buffer() += g.planes;
        const Mat<T>* parts[6] = {&g.w1, &g.b1, &g.w2, &g.b2, &g.w3, &g.b3};
        for (int i = 1; i < 7; ++i) {
          if (ps[i]->requires_grad) ps[i]->grad_buffer() += *parts[i - 1];
        }
      });
}

scenekit::ViewRecord RenderedView::as_view_record() const {
  scenekit::ViewRecord v;
  v.rgb = rgb;
  v.depth = depth;
  v.normal = normal;
  v.mask = mask;
  v.camera = camera;
  return v;
}

template <typename T>
RenderedView unpack_render(const Mat<T>& out, int resolution, const scenekit::CameraPose& camera) {
  if (out.rows() != static_cast<Eigen::Index>(resolution) * resolution || out.cols() != kernels::kRenderColumns)
    throw std::invalid_argument("unpack_render: unexpected render shape");
  RenderedView v;
  v.camera = camera;
  v.rgb = Image(resolution, resolution, 3);
  v.depth = Image(resolution, resolution, 1);
  v.normal = Image(resolution, resolution, 3);
  v.mask = Image(resolution, resolution, 1);
  v.accumulation = Image(resolution, resolution, 1);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Eigen::Index r = static_cast<Eigen::Index>(y) * resolution + x;
      for (int c = 0; c < 3; ++c) {
        v.rgb.at(y, x, c) = static_cast<float>(out(r, kernels::kColRgb + c));
        v.normal.at(y, x, c) = static_cast<float>(out(r, kernels::kColNormal + c));
      }
      const T acc = out(r, kernels::kColAccum);
      v.depth.at(y, x, 0) = static_cast<float>(out(r, kernels::kColDepth));
      v.accumulation.at(y, x, 0) = static_cast<float>(acc);
      v.mask.at(y, x, 0) = acc > T(0.5) ? 1.0f : 0.0f;
    }
  }
  return v;
}

template Var<float> render_view<float>(const Triplane<float>&, const FieldMlp<float>&, const scenekit::CameraPose&,
                                       const RenderSettings&, std::vector<float>*);
template Var<double> render_view<double>(const Triplane<double>&, const FieldMlp<double>&,
                                         const scenekit::CameraPose&, const RenderSettings&, std::vector<double>*);
template RenderedView unpack_render<float>(const Mat<float>&, int, const scenekit::CameraPose&);
template RenderedView unpack_render<double>(const Mat<double>&, int, const scenekit::CameraPose&);

}  // namespace geofuse::triplane
