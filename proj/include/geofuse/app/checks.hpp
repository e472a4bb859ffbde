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

#include "geofuse/refine/model.hpp"
#include "geofuse/scenekit/dataset.hpp"

namespace geofuse::app {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  bool soft = false;  // reported, never fails the run
  std::string detail;
  double seconds = 0;
  double limit_seconds = 0;  // runtime budget; exceeding it fails the check
};

std::string format_check(const CheckResult& r);  // "PASS [3] name: detail (1.2s)"

// Untrained refiner on top of `baseline`: infer(2) renders equal infer(1)
// renders within 1e-6 on every held-out object (6 grid views each).
CheckResult check_zero_init_identity(const refine::Model<float>& baseline,
                                     const std::vector<scenekit::ObjectEntry>& held_out);
// Copy-initialised geometry encoder vs semantic encoder on normals-as-RGB,
// bitwise, over `cases` random inputs.
CheckResult check_copy_init(int cases = 100);
// Reverse mode vs central differences: fuser, AdaLN encoder, triplane
// sampling, field MLP and a masked render loss (double < 1e-4, float < 1e-2).
CheckResult check_gradients();
// Dense-sphere depth vs analytic hit; weights + transmittance = 1.
CheckResult check_renderer();
// Backbone parameter hash before/after `steps` refiner steps.
CheckResult check_frozen_backbone(int steps = 200);
// Analytic FLOPs ratio(2 vs 1) > 1.8 and analytic vs counted within 10%.
CheckResult check_cost(const refine::ModelConfig& config);
// PSNR closed form, SSIM self, perceptual identity/symmetry, normal 8-bit round trip.
CheckResult check_metrics();

// Criteria that need no trained model, in id order.
std::vector<CheckResult> run_invariant_checks(const refine::ModelConfig& config,
                                              const std::vector<scenekit::ObjectEntry>& held_out);

}  // namespace geofuse::app
