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
#include <Eigen/Geometry>

#include <string>
#include <vector>

#include "geofuse/triplane/field.hpp"

namespace geofuse::app {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> faces;  // counter-clockwise seen from low density
};

// Density of the field at each row of `points` (n x 3).
std::vector<double> field_density(const triplane::Triplane<float>& tp, const triplane::FieldMlp<float>& field,
                                  const std::vector<Eigen::Vector3d>& points);

// Iso-surface density == level over [-1,1]^3 sampled on grid^3 nodes. Each
// cube is split into six tetrahedra; edge crossings are refined by bisection
// on the field itself, so vertices sit on the level set up to `tolerance`
// along their edge.
Mesh extract_mesh(const triplane::Triplane<float>& tp, const triplane::FieldMlp<float>& field, int grid, double level,
                  int bisection_steps = 24);

void write_obj(const std::string& path, const Mesh& mesh);

}  // namespace geofuse::app
