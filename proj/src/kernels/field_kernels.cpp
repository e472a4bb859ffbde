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

#include "geofuse/core/flops.hpp"
#include "geofuse/triplane/kernels.hpp"

namespace geofuse::kernels {

namespace {

template <typename T>
inline T silu_grad(T z) {
  const T s = T(1) / (T(1) + std::exp(-z));
  return s * (T(1) + z * (T(1) - s));
}

template <typename T>
void silu_inplace(const Mat<T>& z, Mat<T>& h) {
  h.resize(z.rows(), z.cols());
  const T* zp = z.data();
  T* hp = h.data();
  for (Eigen::Index i = 0; i < z.size(); ++i) hp[i] = zp[i] / (T(1) + std::exp(-zp[i]));
}

// Plane axes: XY, XZ, YZ.
constexpr int kAxisU[3] = {0, 0, 1};
constexpr int kAxisV[3] = {1, 2, 2};

}  // namespace

template <typename T>
void FieldGrads<T>::init(const FieldRefs<T>& refs, bool want_planes, bool want_mlp) {
  planes_on = want_planes;
  mlp_on = want_mlp;
  if (planes_on) planes = Mat<T>::Zero(refs.planes->rows(), refs.planes->cols());
  if (mlp_on) {
    w1 = Mat<T>::Zero(refs.w1->rows(), refs.w1->cols());
    b1 = Mat<T>::Zero(refs.b1->rows(), refs.b1->cols());
    w2 = Mat<T>::Zero(refs.w2->rows(), refs.w2->cols());
    b2 = Mat<T>::Zero(refs.b2->rows(), refs.b2->cols());
    w3 = Mat<T>::Zero(refs.w3->rows(), refs.w3->cols());
    b3 = Mat<T>::Zero(refs.b3->rows(), refs.b3->cols());
  }
}

template <typename T>
void FieldGrads<T>::accumulate(const FieldGrads& o) {
  if (planes_on && o.planes_on) planes += o.planes;
  if (mlp_on && o.mlp_on) {
    w1 += o.w1;
    b1 += o.b1;
    w2 += o.w2;
    b2 += o.b2;
    w3 += o.w3;
    b3 += o.b3;
  }
}

template <typename T>
void sample_point(const Mat<T>& planes, int resolution, const T* point, PlaneSample<T>* out,
                  Eigen::Ref<Eigen::Matrix<T, 1, Eigen::Dynamic>> feat) {
  const int R = resolution;
  const T half = T(R - 1) / T(2);
  for (int p = 0; p < 3; ++p) {
    T g[2], d[2];
    int c0[2];
    const int axes[2] = {kAxisU[p], kAxisV[p]};
    for (int a = 0; a < 2; ++a) {
      const T x = point[axes[a]];
      const bool clamped = !(x > T(-1) && x < T(1));
      const T xc = std::clamp(x, T(-1), T(1));
      const T grid = (xc + T(1)) * half;
      c0[a] = std::min(static_cast<int>(std::floor(grid)), R - 2);
      g[a] = grid - T(c0[a]);
      d[a] = clamped ? T(0) : half;
    }
    PlaneSample<T>& s = out[p];
    s.base = static_cast<Eigen::Index>(p) * R * R + static_cast<Eigen::Index>(c0[1]) * R + c0[0];
    s.fu = g[0];
    s.fv = g[1];
    s.du = d[0];
    s.dv = d[1];
    const T w00 = (T(1) - s.fu) * (T(1) - s.fv), w01 = s.fu * (T(1) - s.fv);
    const T w10 = (T(1) - s.fu) * s.fv, w11 = s.fu * s.fv;
    feat.noalias() += w00 * planes.row(s.base) + w01 * planes.row(s.base + 1) + w10 * planes.row(s.base + R) +
                      w11 * planes.row(s.base + R + 1);
  }
}

template <typename T>
void sample_points(const Mat<T>& planes, int resolution, const Mat<T>& points, Mat<T>& feat,
                   std::vector<PlaneSample<T>>& samples) {
  const Eigen::Index n = points.rows();
  feat = Mat<T>::Zero(n, planes.cols());
  samples.resize(static_cast<std::size_t>(n) * 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    sample_point<T>(planes, resolution, points.row(i).data(), &samples[static_cast<std::size_t>(i) * 3], feat.row(i));
  }
  flops::add(static_cast<std::uint64_t>(n) * 3 * 8 * planes.cols());
}

template <typename T>
void sample_points_backward(const Mat<T>& planes, int resolution, const std::vector<PlaneSample<T>>& samples,
                            const Mat<T>& d_feat, Mat<T>* d_planes, Mat<T>* d_points) {
  const int R = resolution;
  const Eigen::Index n = d_feat.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto g = d_feat.row(i);
    for (int p = 0; p < 3; ++p) {
      const PlaneSample<T>& s = samples[static_cast<std::size_t>(i) * 3 + p];
      const T fu = s.fu, fv = s.fv;
      if (d_planes) {
        d_planes->row(s.base) += ((T(1) - fu) * (T(1) - fv)) * g;
        d_planes->row(s.base + 1) += (fu * (T(1) - fv)) * g;
        d_planes->row(s.base + R) += ((T(1) - fu) * fv) * g;
        d_planes->row(s.base + R + 1) += (fu * fv) * g;
      }
      if (d_points && (s.du != T(0) || s.dv != T(0))) {
        const auto f00 = planes.row(s.base), f01 = planes.row(s.base + 1);
        const auto f10 = planes.row(s.base + R), f11 = planes.row(s.base + R + 1);
        if (s.du != T(0)) {
          const T dfu = (T(1) - fv) * g.dot(f01 - f00) + fv * g.dot(f11 - f10);
          (*d_points)(i, kAxisU[p]) += s.du * dfu;
        }
        if (s.dv != T(0)) {
          const T dfv = (T(1) - fu) * g.dot(f10 - f00) + fu * g.dot(f11 - f01);
          (*d_points)(i, kAxisV[p]) += s.dv * dfv;
        }
      }
    }
  }
}

template <typename T>
void field_forward(const FieldRefs<T>& refs, const Mat<T>& points, Mat<T>& raw, FieldTape<T>* tape) {
  FieldTape<T> local;
  FieldTape<T>& tp = tape ? *tape : local;
  sample_points<T>(*refs.planes, refs.resolution, points, tp.feat, tp.samples);
  tp.z1.noalias() = tp.feat * *refs.w1;
  tp.z1.rowwise() += refs.b1->row(0);
  silu_inplace(tp.z1, tp.h1);
  tp.z2.noalias() = tp.h1 * *refs.w2;
  tp.z2.rowwise() += refs.b2->row(0);
  silu_inplace(tp.z2, tp.h2);
  raw.noalias() = tp.h2 * *refs.w3;
  raw.rowwise() += refs.b3->row(0);
  const std::uint64_t n = static_cast<std::uint64_t>(points.rows());
  const std::uint64_t c = static_cast<std::uint64_t>(refs.w1->rows()), h = static_cast<std::uint64_t>(refs.w1->cols());
  flops::add(2 * n * (c * h + h * h + h * static_cast<std::uint64_t>(refs.w3->cols())));
}

template <typename T>
void field_backward(const FieldRefs<T>& refs, const FieldTape<T>& tape, const Mat<T>& d_raw, FieldGrads<T>& grads,
                    Mat<T>* d_points) {
  if (grads.mlp_on) {
    grads.w3.noalias() += tape.h2.transpose() * d_raw;
    grads.b3 += d_raw.colwise().sum();
  }
  Mat<T> dz2 = d_raw * refs.w3->transpose();
  for (Eigen::Index i = 0; i < dz2.size(); ++i) dz2.data()[i] *= silu_grad(tape.z2.data()[i]);
  if (grads.mlp_on) {
    grads.w2.noalias() += tape.h1.transpose() * dz2;
    grads.b2 += dz2.colwise().sum();
  }
  Mat<T> dz1 = dz2 * refs.w2->transpose();
  for (Eigen::Index i = 0; i < dz1.size(); ++i) dz1.data()[i] *= silu_grad(tape.z1.data()[i]);
  if (grads.mlp_on) {
    grads.w1.noalias() += tape.feat.transpose() * dz1;
    grads.b1 += dz1.colwise().sum();
  }
  if (!grads.planes_on && !d_points) return;
  const Mat<T> d_feat = dz1 * refs.w1->transpose();
  sample_points_backward<T>(*refs.planes, refs.resolution, tape.samples, d_feat,
                            grads.planes_on ? &grads.planes : nullptr, d_points);
  const std::uint64_t n = static_cast<std::uint64_t>(d_raw.rows());
  const std::uint64_t c = static_cast<std::uint64_t>(refs.w1->rows()), h = static_cast<std::uint64_t>(refs.w1->cols());
  flops::add(4 * n * (c * h + h * h + h * static_cast<std::uint64_t>(refs.w3->cols())));
}

#define GEOFUSE_INSTANTIATE_FIELD(T)                                                                                \
  template struct FieldGrads<T>;                                                                                    \
  template void sample_point<T>(const Mat<T>&, int, const T*, PlaneSample<T>*,                                      \
                                Eigen::Ref<Eigen::Matrix<T, 1, Eigen::Dynamic>>);                                    \
  template void sample_points<T>(const Mat<T>&, int, const Mat<T>&, Mat<T>&, std::vector<PlaneSample<T>>&);         \
  template void sample_points_backward<T>(const Mat<T>&, int, const std::vector<PlaneSample<T>>&, const Mat<T>&,    \
                                          Mat<T>*, Mat<T>*);                                                        \
  template void field_forward<T>(const FieldRefs<T>&, const Mat<T>&, Mat<T>&, FieldTape<T>*);                       \
  template void field_backward<T>(const FieldRefs<T>&, const FieldTape<T>&, const Mat<T>&, FieldGrads<T>&, Mat<T>*);

GEOFUSE_INSTANTIATE_FIELD(float)
GEOFUSE_INSTANTIATE_FIELD(double)

}  // namespace geofuse::kernels
