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

#include "geofuse/triplane/kernels.hpp"

// Scalar single-threaded versions of the batched kernels. They share no code
// with the kernels and exist for cross-checking and benchmarking.
namespace geofuse::reference {

template <typename T>
using Mat = ad::Mat<T>;

template <typename T>
std::vector<T> sample_triplane_point(const Mat<T>& planes, int resolution, const T point[3]);

// Raw MLP output (4 values) for one feature vector.
template <typename T>
std::vector<T> field_point(const kernels::FieldRefs<T>& refs, const std::vector<T>& feature);

// HW x 8, same layout as kernels::render_forward.
template <typename T>
Mat<T> render_view_serial(const kernels::FieldRefs<T>& refs, const scenekit::CameraPose& camera,
                          const kernels::RaySetup& setup);

}  // namespace geofuse::reference
