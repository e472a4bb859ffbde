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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/scenekit/view.hpp"

namespace geofuse::scenekit {

namespace {

constexpr int kMaxSteps = 256;
constexpr double kHitEps = 1e-4;
constexpr double kRelax = 1.6;
constexpr double kSqrt3 = 1.7320508075688772;

enum class TraceResult { kHit, kMiss, kDiverged };

struct Trace {
  TraceResult result = TraceResult::kMiss;
  double t = 0.0;
  double distance = 0.0;  // SDF value at t
};

// Over-relaxed sphere tracing (step = omega * d while consecutive unbounding
// spheres overlap, falling back to plain steps otherwise). `footprint` is the
// pixel cone half-width per unit distance: a ray that runs out of steps while
// closer to the surface than its cone radius counts as a hit at that point.
Trace sphere_trace(const SceneSpec& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double t_near,
                   double t_far, double footprint) {
  Trace tr;
  double t = t_near;
  double omega = kRelax;
  double prev_radius = 0.0;
  double step = 0.0;
  double d = 0.0;
  for (int i = 0; i < kMaxSteps; ++i) {
    d = sdf_eval(scene, origin + t * dir).distance;
    const double radius = std::abs(d);
    const bool fail = omega > 1.0 && radius + prev_radius < step;
    if (fail) {
      step -= omega * step;
      omega = 1.0;
    } else {
      if (d < kHitEps) {
        tr.result = TraceResult::kHit;
        tr.t = t;
        return tr;
      }
      step = omega * d;
    }
    prev_radius = radius;
    t += step;
    if (t > t_far) return tr;
  }
  tr.t = t;
  tr.distance = d;
  if (d < std::max(10.0 * kHitEps, footprint * t)) {
    tr.result = TraceResult::kHit;
  } else {
    tr.result = TraceResult::kDiverged;
  }
  return tr;
}

}  // namespace

bool is_supported_resolution(int resolution) {
  return resolution == 16 || resolution == 32 || resolution == 64 || resolution == 128;
}

std::vector<std::string> check_view(const ViewRecord& v, double normal_tol) {
  std::vector<std::string> errors;
  const int h = v.rgb.height;
  const int w = v.rgb.width;
  if (v.rgb.channels != 3 || v.depth.channels != 1 || v.normal.channels != 3 || v.mask.channels != 1 ||
      v.depth.height != h || v.normal.height != h || v.mask.height != h || v.depth.width != w ||
      v.normal.width != w || v.mask.width != w) {
    errors.emplace_back("plane shapes disagree");
    return errors;
  }
  const double dist = v.camera.position.norm();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::ostringstream where;
      where << "(" << y << "," << x << ")";
      const float m = v.mask.at(y, x, 0);
      const double d = v.depth.at(y, x, 0);
      const Eigen::Vector3d n(v.normal.at(y, x, 0), v.normal.at(y, x, 1), v.normal.at(y, x, 2));
      for (int c = 0; c < 3; ++c) {
        const float val = v.rgb.at(y, x, c);
        if (!(val >= 0.0f && val <= 1.0f)) errors.push_back("rgb out of [0,1] at " + where.str());
      }
      if (m == 1.0f) {
        if (std::abs(n.norm() - 1.0) > normal_tol) errors.push_back("non-unit normal at " + where.str());
        if (!(d > 0.0)) errors.push_back("non-positive foreground depth at " + where.str());
        if (!(d > dist - kSqrt3 && d < dist + kSqrt3)) errors.push_back("depth outside range at " + where.str());
      } else if (m == 0.0f) {
        if (d != 0.0 || n.squaredNorm() != 0.0) errors.push_back("background not zeroed at " + where.str());
      } else {
        errors.push_back("mask not binary at " + where.str());
      }
    }
  }
  return errors;
}

ViewRecord render_ground_truth(const SceneSpec& scene, const CameraPose& camera, int resolution) {
  if (!is_supported_resolution(resolution)) {
    throw ValidationError("render_ground_truth: resolution must be one of 16, 32, 64, 128");
  }
  ViewRecord v;
  v.camera = camera;
  v.rgb = Image(resolution, resolution, 3, 1.0f);
  v.depth = Image(resolution, resolution, 1);
  v.normal = Image(resolution, resolution, 3);
  v.mask = Image(resolution, resolution, 1);
  const double dist = camera.position.norm();
  const double t_near = std::max(0.0, dist - kSqrt3);
  const double t_far = dist + kSqrt3;
  const double footprint = std::tan(camera.fov_deg * M_PI / 360.0) / resolution;
  std::vector<std::pair<int, int>> diverged;
  std::vector<Trace> diverged_traces;
  int hits = 0;
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Eigen::Vector3d dir = camera.ray_direction(y, x, resolution);
      Trace tr = sphere_trace(scene, camera.position, dir, t_near, t_far, footprint);
      if (tr.result == TraceResult::kDiverged) {
        // Crept past a silhouette and ran out of steps while clear of the
        // surface: resume once from there with a fresh budget.
        const double t0 = tr.t;
        tr = sphere_trace(scene, camera.position, dir, t0, t_far, footprint);
      }
      if (tr.result == TraceResult::kDiverged) {
        diverged.emplace_back(y, x);
        diverged_traces.push_back(tr);
        continue;
      }
      if (tr.result == TraceResult::kMiss) continue;
      ++hits;
      const Eigen::Vector3d p = camera.position + tr.t * dir;
      const Eigen::Vector3d n_world = sdf_normal(scene, p);
      const Eigen::Vector3d n_cam = (camera.rotation * n_world).normalized();
      const Eigen::Vector3d albedo = sdf_eval(scene, p).albedo;
      const double shade = 0.2 + 0.8 * std::max(0.0, n_world.dot(-dir));
      for (int c = 0; c < 3; ++c) {
        v.rgb.at(y, x, c) = static_cast<float>(std::clamp(albedo[c] * shade, 0.0, 1.0));
        v.normal.at(y, x, c) = static_cast<float>(n_cam[c]);
      }
      v.depth.at(y, x, 0) = static_cast<float>(tr.t);
      v.mask.at(y, x, 0) = 1.0f;
    }
  }
  if (!diverged.empty() && diverged.size() * 1000 > static_cast<std::size_t>(hits + diverged.size())) {
    std::ostringstream msg;
    msg << "sphere tracing diverged on " << diverged.size() << " rays:";
    for (std::size_t i = 0; i < std::min<std::size_t>(diverged.size(), 16); ++i) {
      msg << " (" << diverged[i].first << "," << diverged[i].second << " t=" << diverged_traces[i].t
          << " d=" << diverged_traces[i].distance << ")";
    }
    throw RuntimeFailure(msg.str());
  }
  // Isolated divergences are treated as background.
  return v;
}

}  // namespace geofuse::scenekit
