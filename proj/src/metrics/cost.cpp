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

#include "geofuse/metrics/cost.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/flops.hpp"

namespace geofuse::metrics {

double linear_flops(double rows, double in, double out) { return 2.0 * rows * in * out; }
double attention_flops(double queries, double keys, double width) { return 4.0 * queries * keys * width; }

StageFlops encoder_flops(const encoders::EncoderConfig& c) {
  const double n = c.tokens(), d = c.dim;
  double f = linear_flops(n, c.patch_inputs(), d);
  for (int l = 0; l < c.layers; ++l) {
    f += linear_flops(1, c.cond_dim, 6 * d);
    f += 4 * linear_flops(n, d, d) + attention_flops(n, n, d);
    f += linear_flops(n, d, 4 * d) + linear_flops(n, 4 * d, d);
  }
  StageFlops s;
  s.encoder = f;
  return s;
}

StageFlops decoder_flops(const refine::ModelConfig& c, int views, bool token_concat) {
  const auto& dc = c.decoder;
  const double q = 3.0 * dc.resolution * dc.resolution, d = dc.dim;
  const double m = static_cast<double>(views) * c.encoder.tokens() * (token_concat ? 2 : 1);
  double f = 0;
  for (int l = 0; l < dc.layers; ++l) {
    f += 2 * linear_flops(q, d, d) + 2 * linear_flops(m, d, d) + attention_flops(q, m, d);
    f += 4 * linear_flops(q, d, d) + attention_flops(q, q, d);
    f += linear_flops(q, d, 4 * d) + linear_flops(q, 4 * d, d);
  }
  f += linear_flops(q, d, dc.plane_channels());
  StageFlops s;
  s.decoder = f;
  return s;
}

StageFlops fuser_flops(const refine::ModelConfig& c) {
  StageFlops s;
  if (c.fusion != geofuser::FusionMode::kResidual) return s;
  const double n = c.encoder.tokens(), d = c.encoder.dim;
  const double h = c.fuser_hidden > 0 ? c.fuser_hidden : d;
  s.fuser = linear_flops(n, 2 * d, h) + linear_flops(n, h, d);
  return s;
}

StageFlops render_flops(const refine::ModelConfig& c, int rays, int samples, long foreground_rays) {
  const double ch = c.decoder.plane_channels(), h = c.decoder.mlp_hidden();
  const double per_point = 24.0 * ch + linear_flops(1, ch, h) + linear_flops(1, h, h) + linear_flops(1, h, 4);
  StageFlops s;
  s.renderer = per_point * (static_cast<double>(rays) * samples + 6.0 * foreground_rays);
  return s;
}

StageFlops analytic_flops(const refine::ModelConfig& c, int views, int iterations, long foreground_rays) {
  if (iterations < 1) throw ValidationError("analytic_flops: iterations must be >= 1");
  StageFlops s;
  const bool concat = c.fusion == geofuser::FusionMode::kTokenConcat;
  const double enc = encoder_flops(c.encoder).encoder;
  encoders::EncoderConfig geo = c.encoder;
  geo.channels = 4;
  const double enc_geo = encoder_flops(geo).encoder;
  s.encoder = views * enc;
  s.decoder = decoder_flops(c, views, false).decoder;
  const int res = c.encoder.image_size;
  for (int t = 1; t < iterations; ++t) {
    s.encoder += views * enc_geo;
    s.fuser += views * fuser_flops(c).fuser;
    s.decoder += decoder_flops(c, views, concat).decoder;
    s.renderer += render_flops(c, views * res * res, c.render_samples, 0).renderer;
  }
  s.renderer += render_flops(c, 0, 0, foreground_rays).renderer;
  return s;
}

CostReport cost_report(const refine::Model<float>& model, const std::vector<scenekit::ViewRecord>& conditioning,
                       const std::vector<int>& iterations, int repeats) {
  if (repeats < 1) throw ValidationError("cost_report: repeats must be >= 1");
  refine::NoGradScope<float> no_grad(model);
  CostReport report;
  report.repeats = repeats;
  for (int it : iterations) {
    CostRow row;
    row.iterations = it;
    std::vector<refine::ReconstructionState<float>> states;
    {
      flops::Scope scope;
      states = refine::infer(conditioning, model, it);
      row.counted = static_cast<double>(scope.count());
    }
    for (const auto& s : states)
      for (const auto& g : s.geometry) row.foreground_rays += (g.depth.array() > 0.0f).count();
    row.analytic = analytic_flops(model.config, static_cast<int>(conditioning.size()), it, row.foreground_rays);
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      refine::infer(conditioning, model, it);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    row.seconds = times[times.size() / 2];
    report.rows.push_back(row);
  }
  return report;
}

std::string format_cost_table(const CostReport& report) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%5s | %10s %10s %10s %10s | %11s %11s %7s | %9s\n", "iters", "encoder", "fuser",
                "decoder", "renderer", "analytic", "counted", "diff%", "median s");
  s << buf << std::string(98, '-') << '\n';
  for (const auto& r : report.rows) {
    const double a = r.analytic.total();
    std::snprintf(buf, sizeof(buf), "%5d | %10.4g %10.4g %10.4g %10.4g | %11.5g %11.5g %7.2f | %9.4f\n", r.iterations,
                  r.analytic.encoder, r.analytic.fuser, r.analytic.decoder, r.analytic.renderer, a, r.counted,
                  r.counted > 0 ? 100.0 * (a - r.counted) / r.counted : 0.0, r.seconds);
    s << buf;
  }
  if (report.rows.size() >= 2) {
    const double base = report.rows.front().analytic.total();
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "FLOP ratio %d/%d iterations: %.3f (published reference %.3f)\n",
                    report.rows[i].iterations, report.rows.front().iterations, report.rows[i].analytic.total() / base,
                    report.reference_ratio);
      s << buf;
    }
  }
  s << "wall time: median of " << report.repeats << " runs\n";
  return s.str();
}

}  // namespace geofuse::metrics
