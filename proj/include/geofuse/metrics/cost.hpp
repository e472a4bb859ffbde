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

#include "geofuse/refine/model.hpp"

namespace geofuse::metrics {

inline constexpr double kReferenceFlopRatio = 8.687 / 3.878;  // published TFLOPs, two passes vs one

struct StageFlops {
  double encoder = 0, fuser = 0, decoder = 0, renderer = 0;
  double total() const { return encoder + fuser + decoder + renderer; }
};

// 2*m*n per (1 x m) by (m x n) product, 4*n*m*d per attention over n queries
// and m keys, 24*C per trilinear triplane lookup.
double linear_flops(double rows, double in, double out);
double attention_flops(double queries, double keys, double width);

StageFlops encoder_flops(const encoders::EncoderConfig& config);  // one view
StageFlops decoder_flops(const refine::ModelConfig& config, int views, bool token_concat);
StageFlops fuser_flops(const refine::ModelConfig& config);  // one view
// Field evaluations of one render: rays * samples points plus six normal
// stencil points on every foreground ray.
StageFlops render_flops(const refine::ModelConfig& config, int rays, int samples, long foreground_rays);

// Analytic count of infer(iterations) over `views` conditioning views.
// `foreground_rays` totals the foreground rays of the geometry renders.
StageFlops analytic_flops(const refine::ModelConfig& config, int views, int iterations, long foreground_rays);

struct CostRow {
  int iterations = 1;
  StageFlops analytic;
  double counted = 0;      // instrumented operation counter
  double seconds = 0;      // median wall time
  long foreground_rays = 0;
};

struct CostReport {
  std::vector<CostRow> rows;
  int repeats = 5;
  double reference_ratio = kReferenceFlopRatio;
};

CostReport cost_report(const refine::Model<float>& model, const std::vector<scenekit::ViewRecord>& conditioning,
                       const std::vector<int>& iterations, int repeats = 5);

std::string format_cost_table(const CostReport& report);

}  // namespace geofuse::metrics
