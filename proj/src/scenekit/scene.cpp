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

#include "geofuse/scenekit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geofuse/core/error.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::scenekit {

namespace {

double box_distance(const Eigen::Vector3d& q_in, const Eigen::Vector3d& half) {
  const Eigen::Vector3d q = q_in.cwiseAbs() - half;
  return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
}

double smooth_min(double a, double b, double k) {
  if (k <= 0.0) return std::min(a, b);
  const double h = std::max(k - std::abs(a - b), 0.0) / k;
  return std::min(a, b) - h * h * k * 0.25;
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kTorus: return "torus";
    case ShapeKind::kRoundedBox: return "rounded-box";
  }
  return "unknown";
}

double Primitive::bounding_radius() const {
  switch (kind) {
    case ShapeKind::kSphere: return size[0];
    case ShapeKind::kBox:
    case ShapeKind::kRoundedBox: return Eigen::Vector3d(size[0], size[1], size[2]).norm();
    case ShapeKind::kTorus: return size[0] + size[1];
  }
  return 0.0;
}

double Primitive::distance(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d q = p - center;
  switch (kind) {
    case ShapeKind::kSphere: return q.norm() - size[0];
    case ShapeKind::kBox: return box_distance(q, Eigen::Vector3d(size[0], size[1], size[2]));
    case ShapeKind::kRoundedBox: {
      const double r = size[3];
      return box_distance(q, Eigen::Vector3d(size[0] - r, size[1] - r, size[2] - r)) - r;
    }
    case ShapeKind::kTorus: {
      const double ring = std::hypot(q.x(), q.y()) - size[0];
      return std::hypot(ring, q.z()) - size[1];
    }
  }
  return 0.0;
}

void SceneSpec::validate() const {
  if (primitives.empty() || primitives.size() > 6) {
    throw ValidationError("scene must hold 1..6 primitives, has " + std::to_string(primitives.size()));
  }
  if (!(blend_radius >= 0.0)) throw ValidationError("blend radius must be >= 0");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    const double r = p.bounding_radius();
    if (!(r > 0.0)) throw ValidationError("primitive " + std::to_string(i) + " has non-positive size");
    for (int a = 0; a < 3; ++a) {
      if (std::abs(p.center[a]) + r > kSceneExtent + 1e-12) {
        throw ValidationError("primitive " + std::to_string(i) + " leaves the [-0.95,0.95]^3 margin");
      }
    }
  }
}

SceneSpec make_scene(std::uint64_t seed, int max_primitives) {
  if (max_primitives < 1 || max_primitives > 6) {
    throw ValidationError("make_scene: max_primitives must lie in [1,6], got " + std::to_string(max_primitives));
  }
  Rng rng(derive_seed({seed, 0x5ce4e}));
  SceneSpec scene;
  scene.seed = seed;
  const int count = rng.uniform_int(1, max_primitives);
  for (int i = 0; i < count; ++i) {
    Primitive p;
    p.kind = static_cast<ShapeKind>(rng.uniform_int(0, 3));
    switch (p.kind) {
      case ShapeKind::kSphere: p.size = {rng.uniform(0.25, 0.55), 0, 0, 0}; break;
      case ShapeKind::kBox:
        p.size = {rng.uniform(0.15, 0.42), rng.uniform(0.15, 0.42), rng.uniform(0.15, 0.42), 0};
        break;
      case ShapeKind::kTorus: p.size = {rng.uniform(0.28, 0.48), rng.uniform(0.08, 0.16), 0, 0}; break;
      case ShapeKind::kRoundedBox: {
        const double hx = rng.uniform(0.15, 0.42);
        const double hy = rng.uniform(0.15, 0.42);
        const double hz = rng.uniform(0.15, 0.42);
        p.size = {hx, hy, hz, rng.uniform(0.2, 0.5) * std::min({hx, hy, hz})};
        break;
      }
    }
    // Keep primitives clustered near the origin so scenes read as one object.
    const double slack = std::max(0.0, kSceneExtent - p.bounding_radius());
    const double spread = std::min(slack, 0.45);
    for (int a = 0; a < 3; ++a) p.center[a] = rng.uniform(-spread, spread);
    for (int c = 0; c < 3; ++c) p.albedo[c] = rng.uniform(0.15, 0.95);
    scene.primitives.push_back(p);
  }
  scene.blend_radius = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.02, 0.12);
  scene.validate();
  return scene;
}

SdfSample sdf_eval(const SceneSpec& scene, const Eigen::Vector3d& point) {
  SdfSample out;
  double best = std::numeric_limits<double>::infinity();
  double combined = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const double d = scene.primitives[i].distance(point);
    if (d < best) {
      best = d;
      out.albedo = scene.primitives[i].albedo;
    }
    combined = i == 0 ? d : smooth_min(combined, d, scene.blend_radius);
  }
  out.distance = combined;
  return out;
}

Eigen::Vector3d sdf_normal(const SceneSpec& scene, const Eigen::Vector3d& point, double h) {
  Eigen::Vector3d g;
  for (int a = 0; a < 3; ++a) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e[a] = h;
    g[a] = sdf_eval(scene, point + e).distance - sdf_eval(scene, point - e).distance;
  }
  const double n = g.norm();
  return n > 0.0 ? Eigen::Vector3d(g / n) : Eigen::Vector3d(0.0, 0.0, 1.0);
}

}  // namespace geofuse::scenekit
