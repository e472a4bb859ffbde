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

#include "geofuse/triplane/field.hpp"

#include <cmath>
#include <stdexcept>

#include "geofuse/core/ops.hpp"
#include "geofuse/triplane/kernels.hpp"

namespace geofuse::triplane {

template <typename T>
FieldMlp<T> FieldMlp<T>::init(int channels, int hidden, Rng& rng) {
  if (channels <= 0 || hidden <= 0) throw std::invalid_argument("field MLP widths must be positive");
  FieldMlp m;
  m.w1 = make_param<T>(normal_init<T>(rng, channels, hidden, 1.0 / std::sqrt(double(channels))));
  m.b1 = make_param<T>(Mat<T>::Zero(1, hidden));
  m.w2 = make_param<T>(normal_init<T>(rng, hidden, hidden, 1.0 / std::sqrt(double(hidden))));
  m.b2 = make_param<T>(Mat<T>::Zero(1, hidden));
  m.w3 = make_param<T>(normal_init<T>(rng, hidden, 4, 1.0 / std::sqrt(double(hidden))));
  m.b3 = make_param<T>(Mat<T>::Zero(1, 4));
  return m;
}

template <typename T>
ParamList<T> FieldMlp<T>::parameters(const std::string& prefix) const {
  return {{prefix + ".l1.w", w1}, {prefix + ".l1.b", b1}, {prefix + ".l2.w", w2},
          {prefix + ".l2.b", b2}, {prefix + ".out.w", w3}, {prefix + ".out.b", b3}};
}

template <typename T>
FieldMlp<T> FieldMlp<T>::clone() const {
  return {clone_param(w1), clone_param(b1), clone_param(w2), clone_param(b2), clone_param(w3), clone_param(b3)};
}

template <typename T>
Var<T> sample_triplane(const Var<T>& planes, int resolution, const Var<T>& points) {
  if (resolution < 2) throw std::invalid_argument("triplane resolution must be >= 2");
  if (planes.rows() != 3 * resolution * resolution) throw std::invalid_argument("sample_triplane: plane rows");
  if (points.cols() != 3) throw std::invalid_argument("sample_triplane: points must be n x 3");
  Mat<T> feat;
  std::vector<kernels::PlaneSample<T>> samples;
  kernels::sample_points<T>(planes.value(), resolution, points.value(), feat, samples);
  return ad::make_node<T>(std::move(feat), {planes, points},
                          [samples = std::move(samples), resolution](ad::Node<T>& nd) {
                            auto& pp = *nd.parents[0];
                            auto& pt = *nd.parents[1];
                            kernels::sample_points_backward<T>(pp.value, resolution, samples, nd.grad,
                                                               pp.requires_grad ? &pp.grad_buffer() : nullptr,
                                                               pt.requires_grad ? &pt.grad_buffer() : nullptr);
                          });
}

template <typename T>
Var<T> field_raw(const Var<T>& features, const FieldMlp<T>& mlp) {
  if (features.cols() != mlp.channels()) throw std::invalid_argument("field_raw: feature width mismatch");
  const Var<T> h1 = ad::silu(ad::linear(features, mlp.w1, mlp.b1));
  const Var<T> h2 = ad::silu(ad::linear(h1, mlp.w2, mlp.b2));
  return ad::linear(h2, mlp.w3, mlp.b3);
}

template <typename T>
Var<T> field_activation(const Var<T>& raw) {
  if (raw.cols() != 4) throw std::invalid_argument("field_activation: expects n x 4");
  return ad::concat_cols(ad::softplus(ad::slice_cols(raw, 0, 1)), ad::sigmoid(ad::slice_cols(raw, 1, 3)));
}

#define GEOFUSE_INSTANTIATE_FIELD_OPS(T)                                 \
  template struct FieldMlp<T>;                                           \
  template Var<T> sample_triplane<T>(const Var<T>&, int, const Var<T>&); \
  template Var<T> field_raw<T>(const Var<T>&, const FieldMlp<T>&);       \
  template Var<T> field_activation<T>(const Var<T>&);

GEOFUSE_INSTANTIATE_FIELD_OPS(float)
GEOFUSE_INSTANTIATE_FIELD_OPS(double)

}  // namespace geofuse::triplane
