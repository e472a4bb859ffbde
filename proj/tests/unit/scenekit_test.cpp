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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/hash.hpp"
#include "geofuse/core/rng.hpp"
#include "geofuse/scenekit/dataset.hpp"

namespace geofuse::scenekit {
namespace {

namespace fs = std::filesystem;

SceneSpec unit_sphere_scene(double radius) {
  SceneSpec s;
  Primitive p;
  p.kind = ShapeKind::kSphere;
  p.size = {radius, 0, 0, 0};
  p.albedo = Eigen::Vector3d(0.8, 0.4, 0.2);
  s.primitives.push_back(p);
  return s;
}

// Analytic first intersection of a ray with a sphere at the origin.
double ray_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double b = o.dot(d);
  const double c = o.squaredNorm() - r * r;
  return -b - std::sqrt(b * b - c);
}

TEST(MakeScene, DeterministicAndSeedSensitive) {
  const SceneSpec a = make_scene(0, 1);
  const SceneSpec b = make_scene(0, 1);
  ASSERT_EQ(a.primitives.size(), 1u);
  EXPECT_EQ(a.primitives[0].center, b.primitives[0].center);
  EXPECT_EQ(a.primitives[0].size, b.primitives[0].size);
  EXPECT_EQ(a.blend_radius, b.blend_radius);
  const SceneSpec c = make_scene(1, 1);
  EXPECT_NE(a.primitives[0].center, c.primitives[0].center);
}

TEST(MakeScene, BoundingSpheresStayInsideMarginOver1000Seeds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SceneSpec s = make_scene(seed, 6);
    ASSERT_GE(s.primitives.size(), 1u);
    ASSERT_LE(s.primitives.size(), 6u);
    ASSERT_GE(s.blend_radius, 0.0);
    for (const auto& p : s.primitives) {
      const double r = p.bounding_radius();
      for (int a = 0; a < 3; ++a) {
        ASSERT_LE(p.center[a] + r, 0.95 + 1e-12) << "seed " << seed;
        ASSERT_GE(p.center[a] - r, -0.95 - 1e-12) << "seed " << seed;
      }
    }
  }
}

TEST(MakeScene, RejectsPrimitiveCountOutsideRange) {
  EXPECT_THROW(make_scene(0, 0), ValidationError);
  EXPECT_THROW(make_scene(0, 7), ValidationError);
}

TEST(SdfEval, SphereClosedForm) {
  const SceneSpec s = unit_sphere_scene(0.5);
  EXPECT_DOUBLE_EQ(sdf_eval(s, {0, 0, 0}).distance, -0.5);
  EXPECT_DOUBLE_EQ(sdf_eval(s, {1, 0, 0}).distance, 0.5);
}

TEST(SdfEval, HardUnionIsOneLipschitz) {
  Rng rng(11);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 10000; ++seed) {
    SceneSpec s = make_scene(seed, 6);
    s.blend_radius = 0.0;
    for (int i = 0; i < 500; ++i, ++checked) {
      const Eigen::Vector3d p(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
      const Eigen::Vector3d q(rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2));
      ASSERT_LE(std::abs(sdf_eval(s, p).distance - sdf_eval(s, q).distance), (p - q).norm() + 1e-12);
    }
  }
}

TEST(SdfEval, AlbedoFromNearestPrimitiveWithIndexTieBreak) {
  SceneSpec s;
  Primitive a;
  a.size = {0.2, 0, 0, 0};
  a.center = {-0.5, 0, 0};
  a.albedo = {1, 0, 0};
  Primitive b = a;
  b.center = {0.5, 0, 0};
  b.albedo = {0, 0, 1};
  s.primitives = {a, b};
  EXPECT_EQ(sdf_eval(s, {-0.4, 0, 0}).albedo, a.albedo);
  EXPECT_EQ(sdf_eval(s, {0.45, 0, 0}).albedo, b.albedo);
  EXPECT_EQ(sdf_eval(s, {0.0, 0, 0}).albedo, a.albedo);
}

TEST(SampleCamera, RadiusBoundsAndLookAt) {
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const CameraPose c = sample_camera(seed);
    const double r = c.position.norm();
    ASSERT_GE(r, 1.5);
    ASSERT_LE(r, 2.2);
    const Eigen::Vector3d fwd = c.rotation * (-c.position).normalized();
    ASSERT_NEAR(fwd.x(), 0.0, 1e-6);
    ASSERT_NEAR(fwd.y(), 0.0, 1e-6);
    ASSERT_NEAR(fwd.z(), 1.0, 1e-6);
    ASSERT_LT((c.rotation.transpose() * c.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(SampleCamera, DirectionsAreUniform) {
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += sample_camera(static_cast<std::uint64_t>(i) * 7919 + 3).position.normalized();
  EXPECT_LT((acc / n).norm(), 0.02);
}

TEST(SampleCamera, PolarPoseUsesFallbackUp) {
  const CameraPose c = look_at_origin({0, 0, -2}, 40);
  EXPECT_LT((c.rotation.transpose() * c.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR((c.rotation * Eigen::Vector3d(0, 0, 1)).z(), 1.0, 1e-12);
}

TEST(SampleCamera, RejectsBadArguments) {
  EXPECT_THROW(sample_camera(0, 2.0, 1.5), ValidationError);
  EXPECT_THROW(sample_camera(0, 0.0, 1.5), ValidationError);
  EXPECT_THROW(sample_camera(0, 1.5, 2.2, 5.0), ValidationError);
}

TEST(CameraConditioning, DeterministicLayout) {
  const CameraPose c = sample_camera(42);
  const auto a = c.conditioning();
  const auto b = c.conditioning();
  EXPECT_EQ(a, b);
  for (int i = 16; i < 20; ++i) EXPECT_EQ(a[i], 0.0);
  EXPECT_DOUBLE_EQ(a[14], 0.5);
  EXPECT_DOUBLE_EQ(a[12], c.focal());
}

TEST(RenderGroundTruth, SphereCenterPixelMatchesAnalyticIntersection) {
  const SceneSpec s = unit_sphere_scene(0.5);
  const CameraPose cam = look_at_origin({0, 0, -2.0}, 40.0);
  const int res = 32;
  const ViewRecord v = render_ground_truth(s, cam, res);
  const int c = res / 2;
  const Eigen::Vector3d dir = cam.ray_direction(c, c, res);
  const double t = ray_sphere(cam.position, dir, 0.5);
  EXPECT_NEAR(v.depth.at(c, c, 0), 1.5, 1e-3);
  EXPECT_NEAR(v.depth.at(c, c, 0), t, 2e-4);
  const Eigen::Vector3d n_cam = cam.rotation * (cam.position + t * dir).normalized();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(v.normal.at(c, c, k), n_cam[k], 1e-3);
  EXPECT_LT(v.normal.at(c, c, 2), -0.99);
  // Corner ray misses.
  EXPECT_EQ(v.mask.at(0, 0, 0), 0.0f);
  EXPECT_EQ(v.depth.at(0, 0, 0), 0.0f);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(v.normal.at(0, 0, k), 0.0f);
}

TEST(RenderGroundTruth, ViewInvariantsAndReprojection) {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const SceneSpec s = make_scene(seed, 6);
    const CameraPose cam = sample_camera(seed + 100);
    const ViewRecord v = render_ground_truth(s, cam, 32);
    const auto errors = check_view(v);
    ASSERT_TRUE(errors.empty()) << errors.front();
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        if (v.mask.at(y, x, 0) != 1.0f) continue;
        const Eigen::Vector3d p = cam.position + double(v.depth.at(y, x, 0)) * cam.ray_direction(y, x, 32);
        ASSERT_LT(std::abs(sdf_eval(s, p).distance), 5e-3);
      }
  }
}

TEST(RenderGroundTruth, NormalsAgreeWithDepthDerivedNormals) {
  const int res = 64;
  double total = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const SceneSpec s = make_scene(seed, 3);
    const CameraPose cam = sample_camera(seed + 7);
    const ViewRecord v = render_ground_truth(s, cam, res);
    auto point = [&](int y, int x) {
      Eigen::Vector3d d = cam.rotation * cam.ray_direction(y, x, res);
      return Eigen::Vector3d(double(v.depth.at(y, x, 0)) * d);
    };
    auto normal = [&](int y, int x) {
      return Eigen::Vector3d(v.normal.at(y, x, 0), v.normal.at(y, x, 1), v.normal.at(y, x, 2));
    };
    for (int y = 1; y < res - 1; ++y) {
      for (int x = 1; x < res - 1; ++x) {
        bool smooth = true;
        for (int dy = -1; dy <= 1 && smooth; ++dy)
          for (int dx = -1; dx <= 1 && smooth; ++dx) {
            if (v.mask.at(y + dy, x + dx, 0) != 1.0f) smooth = false;
            else if (normal(y + dy, x + dx).dot(normal(y, x)) < std::cos(5.0 * M_PI / 180.0)) smooth = false;
          }
        if (!smooth) continue;
        Eigen::Vector3d n = (point(y, x + 1) - point(y, x - 1)).cross(point(y + 1, x) - point(y - 1, x));
        n.normalize();
        if (n.dot(point(y, x)) > 0) n = -n;
        total += std::acos(std::clamp(n.dot(normal(y, x)), -1.0, 1.0)) * 180.0 / M_PI;
        ++count;
      }
    }
  }
  ASSERT_GT(count, 100);
  EXPECT_LT(total / count, 5.0);
}

TEST(RenderGroundTruth, RejectsUnsupportedResolution) {
  EXPECT_THROW(render_ground_truth(unit_sphere_scene(0.5), sample_camera(0), 48), ValidationError);
}

class DatasetTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("geofuse_ds_" + std::to_string(::getpid()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

TEST_F(DatasetTest, BuildCountsDeterminismAndRoundTrip) {
  DatasetConfig cfg;
  cfg.objects = 4;
  cfg.views = 8;
  cfg.cond_views = 4;
  cfg.resolution = 16;
  cfg.seed = 3;
  cfg.out = (root_ / "a").string();
  const std::string h1 = build_dataset(cfg);
  int folders = 0;
  for (const auto& e : fs::directory_iterator(cfg.out)) folders += e.is_directory();
  EXPECT_EQ(folders, 4);

  DatasetConfig again = cfg;
  again.out = (root_ / "b").string();
  EXPECT_EQ(build_dataset(again), h1);
  EXPECT_EQ(sha256_file(cfg.out + "/manifest.json").size(), 64u);

  const Dataset ds = load_dataset(cfg.out);
  ASSERT_EQ(ds.objects.size(), 4u);
  for (const auto& obj : ds.objects) {
    ASSERT_EQ(obj.supervision.size(), 8u);
    ASSERT_EQ(obj.conditioning.size(), 4u);
    for (const auto& v : obj.supervision) {
      const auto errors = check_view(v);
      ASSERT_TRUE(errors.empty()) << errors.front();
    }
    for (const auto& v : obj.conditioning) ASSERT_TRUE(check_view(v).empty());
  }
  // Cameras survive the 9-significant-digit text format.
  const auto cams = conditioning_cameras(cfg);
  EXPECT_LT((ds.objects[0].conditioning[1].camera.rotation - cams[1].rotation).cwiseAbs().maxCoeff(), 1e-8);
}

TEST_F(DatasetTest, RefusesOverwriteWithoutForce) {
  DatasetConfig cfg;
  cfg.objects = 1;
  cfg.views = 1;
  cfg.cond_views = 1;
  cfg.resolution = 16;
  cfg.out = root_.string();
  build_dataset(cfg);
  EXPECT_THROW(build_dataset(cfg), ValidationError);
  cfg.force = true;
  EXPECT_NO_THROW(build_dataset(cfg));
}

TEST_F(DatasetTest, DetectsTamperedFiles) {
  DatasetConfig cfg;
  cfg.objects = 1;
  cfg.views = 1;
  cfg.cond_views = 1;
  cfg.resolution = 16;
  cfg.out = root_.string();
  build_dataset(cfg);
  std::ofstream(root_ / "obj_0000" / "cam_0.txt", std::ios::app) << "0\n";
  EXPECT_THROW(load_dataset(cfg.out), ValidationError);
}

}  // namespace
}  // namespace geofuse::scenekit
