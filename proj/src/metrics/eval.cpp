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

#include "geofuse/metrics/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "geofuse/core/draw.hpp"
#include "geofuse/core/error.hpp"
#include "geofuse/scenekit/scene.hpp"
#include "geofuse/triplane/renderer.hpp"

namespace geofuse::metrics {

std::vector<scenekit::CameraPose> ViewGrid::cameras() const {
  std::vector<scenekit::CameraPose> out;
  for (double el : elevations)
    for (double az : azimuths) out.push_back(scenekit::orbit_camera(el, az, radius, fov_deg));
  return out;
}

std::string ViewGrid::describe() const {
  std::ostringstream s;
  s << elevations.size() << " elevations {";
  for (std::size_t i = 0; i < elevations.size(); ++i) s << (i ? "," : "") << elevations[i];
  s << "} x " << azimuths.size() << " azimuths, radius " << radius;
  return s.str();
}

std::vector<EvalObject> prepare_eval_objects(const scenekit::Dataset& held_out, const EvalSettings& settings) {
  if (held_out.objects.empty()) throw ValidationError("evaluation dataset has no objects");
  const auto cams = settings.grid.cameras();
  std::vector<EvalObject> out;
  for (const auto& o : held_out.objects) {
    EvalObject e;
    e.id = o.id;
    e.scene_seed = o.scene_seed;
    e.conditioning = o.conditioning;
    const auto scene = scenekit::make_scene(o.scene_seed, held_out.config.max_primitives);
    for (const auto& cam : cams) e.grid.push_back(scenekit::render_ground_truth(scene, cam, settings.resolution));
    out.push_back(std::move(e));
  }
  return out;
}

void check_disjoint(const std::vector<std::uint64_t>& train_seeds, const std::string& train_manifest_hash,
                    const scenekit::Dataset& eval) {
  if (!train_manifest_hash.empty() && train_manifest_hash == eval.manifest_hash)
    throw ValidationError("train/test overlap: evaluation manifest is the training manifest");
  const std::set<std::uint64_t> seen(train_seeds.begin(), train_seeds.end());
  for (const auto& o : eval.objects)
    if (seen.count(o.scene_seed))
      throw ValidationError("train/test overlap: object " + o.id + " (scene seed " + std::to_string(o.scene_seed) +
                            ") was used for training");
}

namespace {

struct Scored {
  Triple rgb, normal;
};

Scored score_view(const Image& pred_rgb, const Image& pred_normal, const Image& pred_mask,
                  const scenekit::ViewRecord& gt, const PerceptualFn& perceptual) {
  Scored s;
  s.rgb = compare(pred_rgb, gt.rgb, perceptual);
  s.normal = compare(encode_normals(pred_normal, pred_mask), encode_normals(gt.normal, gt.mask), perceptual);
  return s;
}

MetricsReport assemble(const std::string& method, int iterations, const EvalSettings& settings,
                       const std::vector<EvalObject>& objects, const std::vector<std::vector<Scored>>& scores) {
  MetricsReport r;
  r.method = method;
  r.iterations = iterations;
  r.objects = static_cast<int>(objects.size());
  r.views_per_object = objects.empty() ? 0 : static_cast<int>(objects[0].grid.size());
  r.grid = settings.grid.describe();
  std::vector<std::vector<Triple>> rgb(objects.size()), normal(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    for (const auto& s : scores[o]) {
      rgb[o].push_back(s.rgb);
      normal[o].push_back(s.normal);
    }
    r.per_object.push_back({objects[o].id, average_per_object({rgb[o]}), average_per_object({normal[o]})});
  }
  r.rgb = average_per_object(rgb);
  r.normal = average_per_object(normal);
  return r;
}

}  // namespace

std::vector<MetricsReport> evaluate_iterations(const refine::Model<float>& model, const std::vector<EvalObject>& objects,
                                               int max_iterations, const EvalSettings& settings,
                                               const std::string& method) {
  if (max_iterations < 1) throw ValidationError("evaluation needs iterations >= 1");
  const PerceptualFn perceptual = perceptual_metric(settings.perceptual);
  refine::NoGradScope<float> no_grad(model);
  triplane::RenderSettings rs;
  rs.resolution = settings.resolution;
  rs.samples = settings.samples;
  rs.chunk_rays = model.config.chunk_rays;
  // scores[k][object][view]
  std::vector<std::vector<std::vector<Scored>>> scores(max_iterations,
                                                       std::vector<std::vector<Scored>>(objects.size()));
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const auto states = refine::infer(objects[o].conditioning, model, max_iterations);
    for (int k = 0; k < max_iterations; ++k) {
      for (const auto& gt : objects[o].grid) {
        const auto out = triplane::render_view(states[k].triplane, model.decoder.field, gt.camera, rs);
        const auto view = triplane::unpack_render(out.value(), settings.resolution, gt.camera);
        scores[k][o].push_back(score_view(view.rgb, view.normal, view.mask, gt, perceptual));
      }
    }
  }
  std::vector<MetricsReport> out;
  for (int k = 0; k < max_iterations; ++k) out.push_back(assemble(method, k + 1, settings, objects, scores[k]));
  return out;
}

MetricsReport eval_model(const refine::Model<float>& model, const std::vector<EvalObject>& objects, int iterations,
                         const EvalSettings& settings, const std::string& method) {
  return evaluate_iterations(model, objects, iterations, settings, method).back();
}

MetricsReport eval_ground_truth(const std::vector<EvalObject>& objects, const EvalSettings& settings) {
  const PerceptualFn perceptual = perceptual_metric(settings.perceptual);
  std::vector<std::vector<Scored>> scores(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o)
    for (const auto& gt : objects[o].grid) scores[o].push_back(score_view(gt.rgb, gt.normal, gt.mask, gt, perceptual));
  return assemble("ground-truth", 0, settings, objects, scores);
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << body;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeFailure("cannot write " + path);
}

}  // namespace

void write_object_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
  std::ostringstream s;
  s << "object_id,iterations,domain,psnr,ssim,perceptual\n";
  for (const auto& r : reports)
    for (const auto& o : r.per_object) {
      s << o.id << ',' << r.iterations << ",rgb," << fmt(o.rgb.psnr) << ',' << fmt(o.rgb.ssim) << ','
        << fmt(o.rgb.perceptual) << '\n';
      s << o.id << ',' << r.iterations << ",normal," << fmt(o.normal.psnr) << ',' << fmt(o.normal.ssim) << ','
        << fmt(o.normal.perceptual) << '\n';
    }
  write_text(path, s.str());
}

void write_summary_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
  std::ostringstream s;
  s << "iterations,rgb_psnr,rgb_ssim,rgb_perceptual,normal_psnr,normal_ssim,normal_perceptual\n";
  for (const auto& r : reports)
    s << r.iterations << ',' << fmt(r.rgb.psnr) << ',' << fmt(r.rgb.ssim) << ',' << fmt(r.rgb.perceptual) << ','
      << fmt(r.normal.psnr) << ',' << fmt(r.normal.ssim) << ',' << fmt(r.normal.perceptual) << '\n';
  write_text(path, s.str());
}

Image plot_sweep(const std::vector<MetricsReport>& reports) {
  const int W = 360, H = 240, left = 48, right = 16, top = 28, bottom = 36;
  Image img(H, W, 3, 1.0f);
  const draw::Color black{0, 0, 0}, grey{0.8f, 0.8f, 0.8f}, blue{0.1f, 0.3f, 0.9f}, red{0.9f, 0.2f, 0.1f};
  if (reports.empty()) return img;
  double lo = 1e9, hi = -1e9;
  for (const auto& r : reports) {
    lo = std::min({lo, r.rgb.psnr, r.normal.psnr});
    hi = std::max({hi, r.rgb.psnr, r.normal.psnr});
  }
  if (hi - lo < 1e-6) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.1 * (hi - lo);
  lo -= pad;
  hi += pad;
  const int pw = W - left - right, ph = H - top - bottom;
  const int n = static_cast<int>(reports.size());
  auto px = [&](int i) { return left + (n == 1 ? pw / 2 : i * pw / (n - 1)); };
  auto py = [&](double v) { return top + static_cast<int>(std::lround((hi - v) / (hi - lo) * ph)); };
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    draw::line(img, py(v), left, py(v), W - right, grey);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    draw::text(img, py(v) - 3, 4, buf, black);
  }
  draw::line(img, top, left, H - bottom, left, black);
  draw::line(img, H - bottom, left, H - bottom, W - right, black);
  for (int i = 0; i < n; ++i) draw::text(img, H - bottom + 6, px(i) - 2, std::to_string(reports[i].iterations), black);
  draw::text(img, H - 14, left + pw / 2 - draw::text_width("ITERATIONS") / 2, "ITERATIONS", black);
  auto series = [&](auto get, const draw::Color& c) {
    for (int i = 0; i < n; ++i) {
      const int x = px(i), y = py(get(reports[i]));
      draw::fill_rect(img, y - 2, x - 2, 5, 5, c);
      if (i + 1 < n) draw::line(img, y, x, py(get(reports[i + 1])), px(i + 1), c);
    }
  };
  series([](const MetricsReport& r) { return r.rgb.psnr; }, blue);
  series([](const MetricsReport& r) { return r.normal.psnr; }, red);
  draw::text(img, 8, left, "PSNR DB", black);
  draw::fill_rect(img, 9, left + 70, 5, 5, blue);
  draw::text(img, 8, left + 80, "RGB", blue);
  draw::fill_rect(img, 9, left + 120, 5, 5, red);
  draw::text(img, 8, left + 130, "NORMAL", red);
  return img;
}

std::string format_metrics_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream s;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-16s %5s | %8s %7s %8s | %8s %7s %8s\n", "method", "iters", "RGB PSNR", "SSIM",
                "Percep", "Nrm PSNR", "SSIM", "Percep");
  s << buf << std::string(82, '-') << '\n';
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-16s %5d | %8.3f %7.4f %8.4f | %8.3f %7.4f %8.4f\n", r.method.c_str(),
                  r.iterations, r.rgb.psnr, r.rgb.ssim, r.rgb.perceptual, r.normal.psnr, r.normal.ssim,
                  r.normal.perceptual);
    s << buf;
  }
  if (!reports.empty())
    s << "views: " << reports[0].grid << "; " << reports[0].objects << " objects; averaged "
      << reports[0].averaging << "; normals in " << reports[0].normal_space << " space\n";
  return s.str();
}

}  // namespace geofuse::metrics
