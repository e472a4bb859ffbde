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

#include <string>

#include "geofuse/core/autodiff.hpp"
#include "geofuse/core/params.hpp"

namespace geofuse::triplane {

template <typename T>
using Var = ad::Var<T>;
template <typename T>
using Mat = ad::Mat<T>;

// Three R x R x C feature planes over [-1,1]^3, stored as a 3R^2 x C matrix:
// row = plane * R^2 + row * R + col, planes ordered XY, XZ, YZ. For a plane
// spanning axes (a, b), columns follow a and rows follow b. Grid nodes sit
// on the cube faces (node k at coordinate -1 + 2k/(R-1)).
template <typename T>
struct Triplane {
  Var<T> planes;
  int resolution = 0;
  int channels = 0;
};

// MLP feature -> (density, rgb): C -> H -> H -> 4 with SiLU hidden units.
// Density is softplus of output 0, colour the sigmoid of outputs 1..3.
template <typename T>
struct FieldMlp {
  Var<T> w1, b1, w2, b2, w3, b3;

  static FieldMlp init(int channels, int hidden, Rng& rng);
  ParamList<T> parameters(const std::string& prefix) const;
  FieldMlp clone() const;
  int channels() const { return static_cast<int>(w1.rows()); }
  int hidden() const { return static_cast<int>(w1.cols()); }
};

// Bilinear lookup on each plane (coordinates clamped to the cube), summed
// over the three planes. points: n x 3 -> n x C.
template <typename T>
Var<T> sample_triplane(const Var<T>& planes, int resolution, const Var<T>& points);

// Raw MLP output (n x 4) before activations.
template <typename T>
Var<T> field_raw(const Var<T>& features, const FieldMlp<T>& mlp);

// n x 4: softplus density, sigmoid rgb.
template <typename T>
Var<T> field_activation(const Var<T>& raw);

template <typename T>
Var<T> field_decode(const Var<T>& features, const FieldMlp<T>& mlp) {
  return field_activation(field_raw(features, mlp));
}

}  // namespace geofuse::triplane
