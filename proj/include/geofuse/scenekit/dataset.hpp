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

#include <cstdint>
#include <string>
#include <vector>

#include "geofuse/scenekit/view.hpp"

namespace geofuse::scenekit {

struct DatasetConfig {
  int objects = 4;
  int views = 8;       // supervision views per object
  int cond_views = 4;  // conditioning views per object
  int resolution = 32;
  std::uint64_t seed = 0;
  int max_primitives = 4;
  double radius_lo = 1.5;
  double radius_hi = 2.2;
  double fov_deg = 40.0;
  double cond_radius = 2.0;
  std::string out;
  bool force = false;
};

struct ObjectEntry {
  std::string id;
  std::uint64_t scene_seed = 0;
  std::vector<ViewRecord> supervision;
  std::vector<ViewRecord> conditioning;
};

struct Dataset {
  DatasetConfig config;
  std::string content_hash;
  std::string manifest_hash;  // sha256 of manifest.json
  std::vector<ObjectEntry> objects;
};

// Scene seed of object `index` in a dataset generated with `dataset_seed`.
std::uint64_t object_scene_seed(std::uint64_t dataset_seed, int index);

// Fixed orbit for conditioning views: azimuths 30 + 360k/C degrees,
// elevations alternating +20 / -10 degrees, radius cond_radius.
std::vector<CameraPose> conditioning_cameras(const DatasetConfig& config);
CameraPose supervision_camera(const DatasetConfig& config, std::uint64_t scene_seed, int view);

ObjectEntry render_object(const DatasetConfig& config, int index);

// Writes manifest.json plus obj_NNNN/{rgb_k.png, geo_k.pfm, cam_k.txt}.
// View indices 0..V-1 are supervision views, V..V+C-1 conditioning views.
// Returns the manifest content hash.
std::string build_dataset(const DatasetConfig& config);

Dataset load_dataset(const std::string& dir);

void write_camera_txt(const std::string& path, const CameraPose& camera);
CameraPose read_camera_txt(const std::string& path);

}  // namespace geofuse::scenekit
