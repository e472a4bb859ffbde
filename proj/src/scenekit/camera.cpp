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

#include "geofuse/scenekit/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>

#include "geofuse/core/error.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::scenekit {

std::array<double, kConditioningSize> CameraPose::conditioning() const {
  std::array<double, kConditioningSize> out{};
  const Eigen::Vector3d t = -(rotation * position);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r * 4 + c] = rotation(r, c);
    out[r * 4 + 3] = t(r);
  }
  out[12] = focal();
  out[13] = focal();
  out[14] = 0.5;
  out[15] = 0.5;
  return out;
}

double CameraPose::focal() const { return 0.5 / std::tan(0.5 * fov_deg * M_PI / 180.0); }

Eigen::Vector3d CameraPose::ray_direction(int row, int col, int resolution) const {
  const double f = focal();
  const double u = (col + 0.5) / resolution - 0.5;
  const double v = (row + 0.5) / resolution - 0.5;
  const Eigen::Vector3d d_cam = Eigen::Vector3d(u / f, v / f, 1.0).normalized();
  return rotation.transpose() * d_cam;
}

CameraPose look_at_origin(const Eigen::Vector3d& position, double fov_deg) {
  if (!position.allFinite() || position.norm() < 1e-9) {
    throw ValidationError("look_at_origin: camera position must be finite and away from the origin");
  }
  const Eigen::Vector3d forward = (-position).normalized();
  Eigen::Vector3d up(0.0, 0.0, 1.0);
  if (std::abs(std::abs(forward.dot(up)) - 1.0) < 1e-3) up = Eigen::Vector3d(1.0, 0.0, 0.0);
  const Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.position = position;
  cam.fov_deg = fov_deg;
  return cam;
}

CameraPose sample_camera(std::uint64_t seed, double radius_lo, double radius_hi, double fov_deg) {
  if (!(radius_lo > 0.0) || !(radius_lo <= radius_hi)) {
    throw ValidationError("sample_camera: need 0 < radius_lo <= radius_hi");
  }
  if (fov_deg < 10.0 || fov_deg > 90.0) throw ValidationError("sample_camera: fov must lie in [10, 90] degrees");
  Rng rng(seed);
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double r = rng.uniform(radius_lo, radius_hi);
  return look_at_origin(Eigen::Vector3d(r * s * std::cos(phi), r * s * std::sin(phi), r * z), fov_deg);
}

CameraPose orbit_camera(double elevation_deg, double azimuth_deg, double radius, double fov_deg) {
  const double e = elevation_deg * M_PI / 180.0;
  const double a = azimuth_deg * M_PI / 180.0;
  return look_at_origin(
      Eigen::Vector3d(radius * std::cos(e) * std::cos(a), radius * std::cos(e) * std::sin(a), radius * std::sin(e)),
      fov_deg);
}

}  // namespace geofuse::scenekit
