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

#include "geofuse/scenekit/view.hpp"
#include "geofuse/triplane/field.hpp"

namespace geofuse::refine {

template <typename T>
using Var = ad::Var<T>;
template <typename T>
using Mat = ad::Mat<T>;

struct LossWeights {
  double rgb = 1.0;
  double perceptual = 2.0;
  double mask = 1.0;
  double depth = 0.5;
  double normal = 0.2;
  double regularizer = 1.0;
};

struct LossBreakdown {
  double rgb = 0, perceptual = 0, mask = 0, depth = 0, normal = 0, regularizer = 0;
  double total = 0;
};

// total = w_rgb*rgb + w_p*perceptual + w_m*mask + w_d*depth + w_n*normal + w_r*regularizer,
// summed in that order.
double weighted_total(const LossBreakdown& b, const LossWeights& w);

// Throws RuntimeFailure naming the first non-finite component.
void check_finite(const LossBreakdown& b, const std::string& where);

inline constexpr int kPyramidLevels = 3;

// Laplacian pyramid of `diff` (size x size pixels, HW x C) with 2x2 average
// pooling and nearest upsampling; returns the sum over levels of mean |L_l|.
template <typename T>
Var<T> pyramid_l1(const Var<T>& diff, int size);

template <typename T>
struct ViewTerms {
  Var<T> rgb, perceptual, mask, depth, normal;
};

// Per-view terms of a render (HW x 8) against ground truth.
template <typename T>
ViewTerms<T> view_terms(const Var<T>& render, const scenekit::ViewRecord& gt);

// HW x 8 matrix laid out like a render, built from a ground-truth view.
template <typename T>
Mat<T> view_as_render(const scenekit::ViewRecord& gt);

inline constexpr int kProbeGrid = 16;

// Mean absolute density difference between axis neighbours on a grid of
// cell-centred probes, times `scale`.
template <typename T>
Var<T> density_tv(const triplane::Triplane<T>& tp, const triplane::FieldMlp<T>& field, double scale,
                  int grid = kProbeGrid);

template <typename T>
struct LossResult {
  LossBreakdown values;
  Var<T> total;  // differentiable, same weights
};

// Components are averaged over the views; `regularizer` (scalar, may be
// undefined) is added once.
template <typename T>
LossResult<T> loss_total(const std::vector<Var<T>>& renders, const std::vector<scenekit::ViewRecord>& gts,
                         const Var<T>& regularizer, const LossWeights& weights);

}  // namespace geofuse::refine
