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

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "geofuse/core/autodiff.hpp"
#include "geofuse/scenekit/camera.hpp"

// Batched field and volume-rendering kernels. Rays are split into fixed-size
// chunks processed with OpenMP; every reduction runs over chunks in index
// order, so results do not depend on the thread count.
namespace geofuse::kernels {

template <typename T>
using Mat = ad::Mat<T>;

inline constexpr int kRenderColumns = 8;
inline constexpr int kColRgb = 0;
inline constexpr int kColDepth = 3;
inline constexpr int kColNormal = 4;
inline constexpr int kColAccum = 7;

// Bilinear footprint of one point on one plane.
template <typename T>
struct PlaneSample {
  Eigen::Index base = 0;  // row of the (r0, c0) corner
  T fu = 0, fv = 0;       // fractional offsets inside the cell
  T du = 0, dv = 0;       // d(grid coordinate)/d(world coordinate); 0 when clamped
};

template <typename T>
struct FieldRefs {
  const Mat<T>* planes = nullptr;
  int resolution = 0;
  const Mat<T>* w1 = nullptr;
  const Mat<T>* b1 = nullptr;
  const Mat<T>* w2 = nullptr;
  const Mat<T>* b2 = nullptr;
  const Mat<T>* w3 = nullptr;
  const Mat<T>* b3 = nullptr;
};

template <typename T>
struct FieldTape {
  Mat<T> feat, z1, h1, z2, h2;
  std::vector<PlaneSample<T>> samples;  // 3 per point
};

template <typename T>
struct FieldGrads {
  bool planes_on = false;
  bool mlp_on = false;
  Mat<T> planes, w1, b1, w2, b2, w3, b3;

  void init(const FieldRefs<T>& refs, bool want_planes, bool want_mlp);
  void accumulate(const FieldGrads& other);
};

// Plane footprints for one point; adds the summed feature into `feat`.
template <typename T>
void sample_point(const Mat<T>& planes, int resolution, const T* point, PlaneSample<T>* out,
                  Eigen::Ref<Eigen::Matrix<T, 1, Eigen::Dynamic>> feat);

template <typename T>
void sample_points(const Mat<T>& planes, int resolution, const Mat<T>& points, Mat<T>& feat,
                   std::vector<PlaneSample<T>>& samples);

// d(feat)/d(point) contracted with d_feat, plus scatter of d_feat into planes.
template <typename T>
void sample_points_backward(const Mat<T>& planes, int resolution, const std::vector<PlaneSample<T>>& samples,
                            const Mat<T>& d_feat, Mat<T>* d_planes, Mat<T>* d_points);

// raw = MLP(sample(points)); the tape is filled when non-null.
template <typename T>
void field_forward(const FieldRefs<T>& refs, const Mat<T>& points, Mat<T>& raw, FieldTape<T>* tape);

template <typename T>
void field_backward(const FieldRefs<T>& refs, const FieldTape<T>& tape, const Mat<T>& d_raw, FieldGrads<T>& grads,
                    Mat<T>* d_points);

struct RaySetup {
  int resolution = 32;
  int samples = 32;
  bool jitter = false;
  std::uint64_t seed = 0;
  Eigen::Vector3d background = Eigen::Vector3d::Ones();
  double normal_step = 0.125;  // central-difference offset in world units
  int chunk_rays = 128;
};

// Density (n) and colour (n x 3) for n points; used for the analytic-field
// test hook. Colour may be left empty when only density is needed.
using FieldFunction = std::function<void(const Mat<double>& points, Eigen::VectorXd& density, Mat<double>* rgb)>;

template <typename T>
struct RenderCache;

// Forward render. Returns HW x 8 [rgb, depth, normal, accumulation]. When
// `cache` is non-null everything needed for render_backward is kept.
// `transmittance`, when non-null, receives the residual transmittance per ray.
template <typename T>
Mat<T> render_forward(const FieldRefs<T>& refs, const scenekit::CameraPose& camera, const RaySetup& setup,
                      std::shared_ptr<RenderCache<T>>* cache, std::vector<T>* transmittance = nullptr);

template <typename T>
void render_backward(const FieldRefs<T>& refs, const RenderCache<T>& cache, const Mat<T>& d_out,
                     FieldGrads<T>& grads);

// Same compositing rules with an arbitrary field; forward only, double.
Mat<double> render_function(const FieldFunction& field, const scenekit::CameraPose& camera, const RaySetup& setup,
                            std::vector<double>* transmittance = nullptr);

// t-range of every ray: [|position| - sqrt(3), |position| + sqrt(3)].
std::pair<double, double> ray_bounds(const scenekit::CameraPose& camera);

// Sample offset in [0,1) inside stratum i of ray r.
double stratum_offset(const RaySetup& setup, int ray, int sample);

}  // namespace geofuse::kernels
