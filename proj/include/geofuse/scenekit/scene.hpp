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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace geofuse::scenekit {

enum class ShapeKind { kSphere, kBox, kTorus, kRoundedBox };

std::string to_string(ShapeKind kind);

// size: sphere {radius}; box {hx, hy, hz}; torus (axis z) {major, minor};
// rounded box {hx, hy, hz, rounding}. Unused entries are zero.
struct Primitive {
  ShapeKind kind = ShapeKind::kSphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::array<double, 4> size{};
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);

  double bounding_radius() const;
  double distance(const Eigen::Vector3d& p) const;
};

struct SceneSpec {
  std::vector<Primitive> primitives;
  double blend_radius = 0.0;  // 0 = hard union
  std::uint64_t seed = 0;

  // Throws ValidationError on a broken invariant.
  void validate() const;
};

struct SdfSample {
  double distance = 0.0;
  Eigen::Vector3d albedo = Eigen::Vector3d::Zero();
};

inline constexpr double kSceneExtent = 0.95;

SceneSpec make_scene(std::uint64_t seed, int max_primitives);
SdfSample sdf_eval(const SceneSpec& scene, const Eigen::Vector3d& point);
// Central-difference gradient direction, unit length.
Eigen::Vector3d sdf_normal(const SceneSpec& scene, const Eigen::Vector3d& point, double h = 1e-4);

}  // namespace geofuse::scenekit
