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

#include "geofuse/scenekit/dataset.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/hash.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::scenekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "geofuse-dataset/1";

std::string object_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "obj_%04d", index);
  return buf;
}

json config_to_json(const DatasetConfig& c) {
  return json{{"objects", c.objects},       {"views", c.views},
              {"cond_views", c.cond_views}, {"resolution", c.resolution},
              {"seed", c.seed},             {"max_primitives", c.max_primitives},
              {"radius_lo", c.radius_lo},   {"radius_hi", c.radius_hi},
              {"fov_deg", c.fov_deg},       {"cond_radius", c.cond_radius}};
}

DatasetConfig config_from_json(const json& j) {
  DatasetConfig c;
  c.objects = j.at("objects").get<int>();
  c.views = j.at("views").get<int>();
  c.cond_views = j.at("cond_views").get<int>();
  c.resolution = j.at("resolution").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.max_primitives = j.at("max_primitives").get<int>();
  c.radius_lo = j.at("radius_lo").get<double>();
  c.radius_hi = j.at("radius_hi").get<double>();
  c.fov_deg = j.at("fov_deg").get<double>();
  c.cond_radius = j.at("cond_radius").get<double>();
  return c;
}

void validate_config(const DatasetConfig& c) {
  if (c.objects < 1) throw ValidationError("dataset needs at least one object");
  if (c.views < 1 || c.cond_views < 1) throw ValidationError("dataset needs >= 1 supervision and conditioning view");
  if (!is_supported_resolution(c.resolution)) throw ValidationError("resolution must be one of 16, 32, 64, 128");
  if (c.max_primitives < 1 || c.max_primitives > 6) throw ValidationError("max_primitives must lie in [1,6]");
}

std::vector<Image> geo_planes(const ViewRecord& v) {
  const int r = v.resolution();
  std::vector<Image> planes(5, Image(r, r, 1));
  for (int y = 0; y < r; ++y) {
    for (int x = 0; x < r; ++x) {
      planes[0].at(y, x, 0) = v.depth.at(y, x, 0);
      for (int c = 0; c < 3; ++c) planes[1 + c].at(y, x, 0) = v.normal.at(y, x, c);
      planes[4].at(y, x, 0) = v.mask.at(y, x, 0);
    }
  }
  return planes;
}

ViewRecord load_view(const fs::path& dir, int k, int resolution) {
  ViewRecord v;
  v.rgb = read_png((dir / ("rgb_" + std::to_string(k) + ".png")).string());
  if (v.rgb.channels != 3 || v.rgb.height != resolution || v.rgb.width != resolution) {
    throw ValidationError("unexpected rgb shape in " + dir.string());
  }
  const auto planes = read_pfm_planes((dir / ("geo_" + std::to_string(k) + ".pfm")).string(), resolution);
  if (planes.size() != 5) throw ValidationError("geo file must hold 5 planes in " + dir.string());
  v.depth = planes[0];
  v.mask = planes[4];
  v.normal = Image(resolution, resolution, 3);
  for (int y = 0; y < resolution; ++y)
    for (int x = 0; x < resolution; ++x)
      for (int c = 0; c < 3; ++c) v.normal.at(y, x, c) = planes[1 + c].at(y, x, 0);
  v.camera = read_camera_txt((dir / ("cam_" + std::to_string(k) + ".txt")).string());
  return v;
}

std::vector<fs::path> view_files(const fs::path& root, const json& manifest) {
  std::vector<fs::path> files;
  const int total = manifest.at("config").at("views").get<int>() + manifest.at("config").at("cond_views").get<int>();
  for (const auto& obj : manifest.at("objects")) {
    const fs::path dir = root / obj.at("id").get<std::string>();
    for (int k = 0; k < total; ++k) {
      files.push_back(dir / ("rgb_" + std::to_string(k) + ".png"));
      files.push_back(dir / ("geo_" + std::to_string(k) + ".pfm"));
      files.push_back(dir / ("cam_" + std::to_string(k) + ".txt"));
    }
  }
  return files;
}

std::string hash_files(const fs::path& root, const std::vector<fs::path>& files) {
  Sha256 h;
  for (const auto& f : files) {
    h.update(fs::relative(f, root).generic_string());
    h.update(sha256_file(f.string()));
  }
  return h.hex_digest();
}

}  // namespace

std::uint64_t object_scene_seed(std::uint64_t dataset_seed, int index) {
  return derive_seed({dataset_seed, static_cast<std::uint64_t>(index), 0x0b1ec7}) >> 1;
}

std::vector<CameraPose> conditioning_cameras(const DatasetConfig& config) {
  std::vector<CameraPose> cams;
  for (int k = 0; k < config.cond_views; ++k) {
    const double az = 30.0 + 360.0 * k / config.cond_views;
    const double el = (k % 2 == 0) ? 20.0 : -10.0;
    cams.push_back(orbit_camera(el, az, config.cond_radius, config.fov_deg));
  }
  return cams;
}

CameraPose supervision_camera(const DatasetConfig& config, std::uint64_t scene_seed, int view) {
  return sample_camera(derive_seed({scene_seed, static_cast<std::uint64_t>(view), 0xca3e7a}), config.radius_lo,
                       config.radius_hi, config.fov_deg);
}

ObjectEntry render_object(const DatasetConfig& config, int index) {
  ObjectEntry obj;
  obj.id = object_id(index);
  obj.scene_seed = object_scene_seed(config.seed, index);
  const SceneSpec scene = make_scene(obj.scene_seed, config.max_primitives);
  for (int k = 0; k < config.views; ++k) {
    obj.supervision.push_back(
        render_ground_truth(scene, supervision_camera(config, obj.scene_seed, k), config.resolution));
  }
  for (const auto& cam : conditioning_cameras(config)) {
    obj.conditioning.push_back(render_ground_truth(scene, cam, config.resolution));
  }
  return obj;
}

void write_camera_txt(const std::string& path, const CameraPose& camera) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write " + path);
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g\n", v);
    out << buf;
  };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) put(camera.rotation(r, c));
  for (int i = 0; i < 3; ++i) put(camera.position(i));
  put(camera.fov_deg);
}

CameraPose read_camera_txt(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<double> vals;
  double v = 0.0;
  while (in >> v) vals.push_back(v);
  if (vals.size() != 13) throw ValidationError("camera file must hold 13 values: " + path);
  CameraPose cam;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.rotation(r, c) = vals[r * 3 + c];
  cam.position = Eigen::Vector3d(vals[9], vals[10], vals[11]);
  cam.fov_deg = vals[12];
  return cam;
}

std::string build_dataset(const DatasetConfig& config) {
  validate_config(config);
  const fs::path root(config.out);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!config.force) throw ValidationError("refusing to overwrite existing dataset at " + root.string());
    fs::remove_all(root);
  }
  fs::create_directories(root);

  std::vector<ObjectEntry> objects(config.objects);
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < config.objects; ++i) objects[i] = render_object(config, i);

  json manifest;
  manifest["format"] = kFormat;
  manifest["config"] = config_to_json(config);
  json list = json::array();
  for (const auto& obj : objects) {
    const fs::path dir = root / obj.id;
    fs::create_directories(dir);
    int k = 0;
    auto write_view = [&](const ViewRecord& v) {
      write_png((dir / ("rgb_" + std::to_string(k) + ".png")).string(), v.rgb);
      write_pfm_planes((dir / ("geo_" + std::to_string(k) + ".pfm")).string(), geo_planes(v));
      write_camera_txt((dir / ("cam_" + std::to_string(k) + ".txt")).string(), v.camera);
      ++k;
    };
    for (const auto& v : obj.supervision) write_view(v);
    for (const auto& v : obj.conditioning) write_view(v);
    json sup = json::array();
    json cond = json::array();
    for (int s = 0; s < config.views; ++s) sup.push_back(s);
    for (int c = 0; c < config.cond_views; ++c) cond.push_back(config.views + c);
    list.push_back({{"id", obj.id}, {"seed", obj.scene_seed}, {"supervision_views", sup}, {"conditioning_views", cond}});
  }
  manifest["objects"] = list;
  manifest["content_hash"] = hash_files(root, view_files(root, manifest));
  std::ofstream out(root / "manifest.json");
  out << manifest.dump(2) << "\n";
  if (!out) throw RuntimeFailure("cannot write manifest");
  return manifest["content_hash"].get<std::string>();
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("no manifest.json in " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  if (manifest.value("format", "") != kFormat) throw ValidationError("unknown dataset format in " + dir);
  Dataset ds;
  try {
    ds.config = config_from_json(manifest.at("config"));
    ds.content_hash = manifest.at("content_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("incomplete manifest: ") + e.what());
  }
  ds.config.out = dir;
  if (hash_files(root, view_files(root, manifest)) != ds.content_hash) {
    throw ValidationError("dataset content hash mismatch in " + dir);
  }
  ds.manifest_hash = sha256_file(manifest_path.string());
  for (const auto& obj : manifest.at("objects")) {
    ObjectEntry e;
    e.id = obj.at("id").get<std::string>();
    e.scene_seed = obj.at("seed").get<std::uint64_t>();
    const fs::path odir = root / e.id;
    for (const auto& k : obj.at("supervision_views"))
      e.supervision.push_back(load_view(odir, k.get<int>(), ds.config.resolution));
    for (const auto& k : obj.at("conditioning_views"))
      e.conditioning.push_back(load_view(odir, k.get<int>(), ds.config.resolution));
    ds.objects.push_back(std::move(e));
  }
  return ds;
}

}  // namespace geofuse::scenekit
