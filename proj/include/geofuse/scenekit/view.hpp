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
#include <vector>

#include "geofuse/core/image.hpp"
#include "geofuse/scenekit/camera.hpp"
#include "geofuse/scenekit/scene.hpp"

namespace geofuse::scenekit {

// One posed view. Background: rgb white, depth 0, normal (0,0,0), mask 0.
// Depth is distance along the viewing ray; normals are in camera space.
struct ViewRecord {
  Image rgb;     // H x W x 3
  Image depth;   // H x W x 1
  Image normal;  // H x W x 3
  Image mask;    // H x W x 1, values {0,1}
  CameraPose camera;

  int resolution() const { return rgb.height; }
};

// Returns human-readable violations of the view invariants (empty = valid).
std::vector<std::string> check_view(const ViewRecord& view, double normal_tol = 1e-4);

bool is_supported_resolution(int resolution);

// Sphere-traced ground truth: <= 256 steps, hit threshold 1e-4, central
// difference normals (h = 1e-4), headlight Lambert shading
// albedo * (0.2 + 0.8 max(0, n.l)).
ViewRecord render_ground_truth(const SceneSpec& scene, const CameraPose& camera, int resolution);

}  // namespace geofuse::scenekit
