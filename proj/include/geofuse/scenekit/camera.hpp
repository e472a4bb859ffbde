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

#include <array>
#include <cstdint>

namespace geofuse::scenekit {

inline constexpr int kConditioningSize = 20;

// Pinhole camera looking at the origin. `rotation` maps world directions to
// camera space (x right, y down, z forward).
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double fov_deg = 40.0;

  // 12 extrinsic entries ([R | -R p], row-major), fx, fy, cx, cy in
  // normalised image units, then 4 zeros.
  std::array<double, kConditioningSize> conditioning() const;

  // Focal length in units of image width.
  double focal() const;

  // Unit world-space direction through the centre of pixel (row, col).
  Eigen::Vector3d ray_direction(int row, int col, int resolution) const;
};

CameraPose look_at_origin(const Eigen::Vector3d& position, double fov_deg);

// Uniform direction on the sphere, radius ~ U(radius_lo, radius_hi).
CameraPose sample_camera(std::uint64_t seed, double radius_lo = 1.5, double radius_hi = 2.2,
                         double fov_deg = 40.0);

// Orbital pose, z-up: elevation above the xy plane, azimuth from +x.
CameraPose orbit_camera(double elevation_deg, double azimuth_deg, double radius, double fov_deg = 40.0);

}  // namespace geofuse::scenekit
