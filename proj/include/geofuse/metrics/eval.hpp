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

#include "geofuse/metrics/metrics.hpp"
#include "geofuse/refine/model.hpp"
#include "geofuse/scenekit/dataset.hpp"

namespace geofuse::metrics {

struct ViewGrid {
  std::vector<double> elevations{-20, -10, 0, 10, 20};
  std::vector<double> azimuths{0, 60, 120, 180, 240, 300};
  double radius = 2.0;
  double fov_deg = 40.0;

  std::vector<scenekit::CameraPose> cameras() const;  // elevation-major
  std::string describe() const;
};

struct EvalSettings {
  ViewGrid grid;
  int resolution = 32;
  int samples = 64;
  std::string perceptual = "pyramid-l1";
};

// Ground truth for one held-out object: its conditioning views plus the
// sphere-traced grid views.
struct EvalObject {
  std::string id;
  std::uint64_t scene_seed = 0;
  std::vector<scenekit::ViewRecord> conditioning;
  std::vector<scenekit::ViewRecord> grid;
};

std::vector<EvalObject> prepare_eval_objects(const scenekit::Dataset& held_out, const EvalSettings& settings);

// Throws ValidationError when the evaluation set shares a manifest or any
// scene seed with the training set.
void check_disjoint(const std::vector<std::uint64_t>& train_seeds, const std::string& train_manifest_hash,
                    const scenekit::Dataset& eval);

struct ObjectScores {
  std::string id;
  Triple rgb, normal;  // means over the grid views
};

struct MetricsReport {
  std::string method;
  int iterations = 1;
  Triple rgb, normal;
  int objects = 0;
  int views_per_object = 0;
  std::string grid;
  std::string averaging = "per view, then per object";
  std::string normal_space = "camera";
  std::vector<ObjectScores> per_object;
};

// One inference per object with `max_iterations` passes; report k scores the
// state after k passes (k = 1..max_iterations).
std::vector<MetricsReport> evaluate_iterations(const refine::Model<float>& model, const std::vector<EvalObject>& objects,
                                               int max_iterations, const EvalSettings& settings,
                                               const std::string& method);

MetricsReport eval_model(const refine::Model<float>& model, const std::vector<EvalObject>& objects, int iterations,
                         const EvalSettings& settings, const std::string& method);

// Ground truth scored against itself.
MetricsReport eval_ground_truth(const std::vector<EvalObject>& objects, const EvalSettings& settings);

// object_id,iterations,domain,psnr,ssim,perceptual (one row per object,
// iteration and domain).
void write_object_csv(const std::string& path, const std::vector<MetricsReport>& reports);
// iterations,rgb_psnr,rgb_ssim,rgb_perceptual,normal_psnr,normal_ssim,normal_perceptual
void write_summary_csv(const std::string& path, const std::vector<MetricsReport>& reports);
// Line plot of RGB and normal PSNR against iterations.
Image plot_sweep(const std::vector<MetricsReport>& reports);

// Fixed-width table: method, iterations, RGB triple, normal triple.
std::string format_metrics_table(const std::vector<MetricsReport>& reports);

}  // namespace geofuse::metrics
