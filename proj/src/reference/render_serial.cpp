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

#include <algorithm>
#include <cmath>

#include "geofuse/triplane/reference.hpp"

namespace geofuse::reference {

namespace {

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log(T(1) + std::exp(x));
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
T silu(T x) {
  return x * sigmoid(x);
}

template <typename T>
std::vector<T> dense(const std::vector<T>& in, const Mat<T>& w, const Mat<T>& b, bool act) {
  std::vector<T> out(w.cols());
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    T s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += in[i] * w(i, j);
    out[j] = act ? silu(s) : s;
  }
  return out;
}

template <typename T>
T density_at(const kernels::FieldRefs<T>& refs, const T p[3]) {
  return softplus(field_point(refs, sample_triplane_point(*refs.planes, refs.resolution, p))[0]);
}

}  // namespace

template <typename T>
std::vector<T> sample_triplane_point(const Mat<T>& planes, int resolution, const T point[3]) {
  const int R = resolution;
  const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  std::vector<T> feat(planes.cols(), T(0));
  for (int p = 0; p < 3; ++p) {
    T gx[2];
    int i0[2];
    for (int a = 0; a < 2; ++a) {
      const T x = std::min(std::max(point[axes[p][a]], T(-1)), T(1));
      const T g = (x + T(1)) / T(2) * T(R - 1);
      i0[a] = std::min(static_cast<int>(std::floor(g)), R - 2);
      gx[a] = g - T(i0[a]);
    }
    for (int dv = 0; dv < 2; ++dv) {
      for (int du = 0; du < 2; ++du) {
        const T w = (du ? gx[0] : T(1) - gx[0]) * (dv ? gx[1] : T(1) - gx[1]);
        const Eigen::Index row = static_cast<Eigen::Index>(p) * R * R + (i0[1] + dv) * R + (i0[0] + du);
        for (Eigen::Index c = 0; c < planes.cols(); ++c) feat[c] += w * planes(row, c);
      }
    }
  }
  return feat;
}

template <typename T>
std::vector<T> field_point(const kernels::FieldRefs<T>& refs, const std::vector<T>& feature) {
  const auto h1 = dense(feature, *refs.w1, *refs.b1, true);
  const auto h2 = dense(h1, *refs.w2, *refs.b2, true);
  return dense(h2, *refs.w3, *refs.b3, false);
}

template <typename T>
Mat<T> render_view_serial(const kernels::FieldRefs<T>& refs, const scenekit::CameraPose& camera,
                          const kernels::RaySetup& setup) {
  const int res = setup.resolution;
  const int S = setup.samples;
  const double dist = camera.position.norm();
  const double t_near = std::max(0.0, dist - std::sqrt(3.0));
  const double delta = (dist + std::sqrt(3.0) - t_near) / S;
  Mat<T> out = Mat<T>::Zero(static_cast<Eigen::Index>(res) * res, kernels::kRenderColumns);
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const int ray = y * res + x;
      const Eigen::Vector3d d = camera.ray_direction(y, x, res);
      T trans = 1, acc = 0, wt = 0;
      T rgb[3] = {0, 0, 0};
      for (int i = 0; i < S; ++i) {
        const double t = t_near + (i + kernels::stratum_offset(setup, ray, i)) * delta;
        T p[3];
        for (int k = 0; k < 3; ++k) p[k] = static_cast<T>(camera.position[k] + t * d[k]);
        const auto raw = field_point(refs, sample_triplane_point(*refs.planes, refs.resolution, p));
        const T alpha = T(1) - std::exp(-softplus(raw[0]) * static_cast<T>(delta));
        const T w = trans * alpha;
        for (int k = 0; k < 3; ++k) rgb[k] += w * sigmoid(raw[1 + k]);
        acc += w;
        wt += w * static_cast<T>(t);
        trans *= T(1) - alpha;
      }
      for (int k = 0; k < 3; ++k) out(ray, k) = rgb[k] + (T(1) - acc) * static_cast<T>(setup.background[k]);
      out(ray, kernels::kColAccum) = acc;
      if (acc <= T(0.5)) continue;
      const T depth = wt / std::max(acc, T(1e-6));
      out(ray, kernels::kColDepth) = depth;
      const T h = static_cast<T>(setup.normal_step);
      T grad[3];
      for (int a = 0; a < 3; ++a) {
        T pp[3], pm[3];
        for (int k = 0; k < 3; ++k) pp[k] = pm[k] = static_cast<T>(camera.position[k]) + depth * static_cast<T>(d[k]);
        pp[a] += h;
        pm[a] -= h;
        grad[a] = (density_at(refs, pp) - density_at(refs, pm)) / (T(2) * h);
      }
      const T len = std::sqrt(grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
      if (len <= T(1e-12)) continue;
      for (int r = 0; r < 3; ++r) {
        T s = 0;
        for (int k = 0; k < 3; ++k) s += static_cast<T>(camera.rotation(r, k)) * (-grad[k] / len);
        out(ray, kernels::kColNormal + r) = s;
      }
    }
  }
  return out;
}

#define GEOFUSE_INSTANTIATE_REFERENCE(T)                                                                  \
  template std::vector<T> sample_triplane_point<T>(const Mat<T>&, int, const T[3]);                       \
  template std::vector<T> field_point<T>(const kernels::FieldRefs<T>&, const std::vector<T>&);            \
  template Mat<T> render_view_serial<T>(const kernels::FieldRefs<T>&, const scenekit::CameraPose&,        \
                                        const kernels::RaySetup&);

GEOFUSE_INSTANTIATE_REFERENCE(float)
GEOFUSE_INSTANTIATE_REFERENCE(double)

}  // namespace geofuse::reference
