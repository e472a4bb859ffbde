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
#include "geofuse/core/flops.hpp"
#include "geofuse/core/rng.hpp"
#include "geofuse/metrics/cost.hpp"
#include "geofuse/metrics/eval.hpp"
#include "geofuse/metrics/metrics.hpp"

namespace geofuse {
namespace {

using namespace metrics;

Image random_image(Rng& rng, int h, int w, int c) {
  Image img(h, w, c);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

Image add_noise(const Image& img, double amp, std::uint64_t seed) {
  Rng rng(seed);
  Image out = img;
  for (float& v : out.data) v = static_cast<float>(std::clamp(v + amp * (2 * rng.uniform() - 1), 0.0, 1.0));
  return out;
}

TEST(Psnr, IdenticalHitsCap) {
  Rng rng(1);
  const Image a = random_image(rng, 16, 16, 3);
  EXPECT_EQ(psnr(a, a), 99.0);
}

TEST(Psnr, ConstantOffsetClosedForm) {
  Image a(16, 16, 3, 0.25), b(16, 16, 3, 0.35);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
}

TEST(Psnr, MatchesBruteForce) {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const Image a = random_image(rng, 8, 12, 3), b = random_image(rng, 8, 12, 3);
    double se = 0;
    int n = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 12; ++x)
        for (int c = 0; c < 3; ++c, ++n) se += std::pow(double(a.at(y, x, c)) - b.at(y, x, c), 2);
    EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(se / n), 1e-9);
  }
  EXPECT_THROW(psnr(Image(4, 4, 3), Image(4, 4, 1)), ValidationError);
}

// Direct per-window computation with two-pass moments.
double ssim_reference(const Image& a, const Image& b) {
  auto g = [](const Image& im, int y, int x) {
    double s = 0;
    for (int c = 0; c < im.channels; ++c) s += im.at(y, x, c);
    return s / im.channels;
  };
  double total = 0;
  int count = 0;
  for (int y = 0; y + 8 <= a.height; y += 4)
    for (int x = 0; x + 8 <= a.width; x += 4) {
      std::vector<double> wa, wb;
      for (int r = 0; r < 8; ++r)
        for (int q = 0; q < 8; ++q) {
          wa.push_back(g(a, y + r, x + q));
          wb.push_back(g(b, y + r, x + q));
        }
      double ma = 0, mb = 0;
      for (int i = 0; i < 64; ++i) {
        ma += wa[i] / 64;
        mb += wb[i] / 64;
      }
      double va = 0, vb = 0, cv = 0;
      for (int i = 0; i < 64; ++i) {
        va += (wa[i] - ma) * (wa[i] - ma) / 64;
        vb += (wb[i] - mb) * (wb[i] - mb) / 64;
        cv += (wa[i] - ma) * (wb[i] - mb) / 64;
      }
      const double c1 = 1e-4, c2 = 9e-4;
      total += (2 * ma * mb + c1) * (2 * cv + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / count;
}

TEST(Ssim, SelfIsExactlyOne) {
  Rng rng(3);
  const Image a = random_image(rng, 32, 32, 3);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, InvertedBinaryIsNegative) {
  Rng rng(4);
  Image a(16, 16, 1);
  for (float& v : a.data) v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
  Image b = a;
  for (float& v : b.data) v = 1.0f - v;
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(Ssim, MatchesPerWindowReference) {
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const Image a = random_image(rng, 32, 32, 3);
    const Image b = add_noise(a, 0.2, 100 + i);
    EXPECT_NEAR(ssim(a, b), ssim_reference(a, b), 1e-9);
  }
  EXPECT_THROW(ssim(Image(4, 4, 3), Image(4, 4, 3)), ValidationError);
}

TEST(Perceptual, IdentitySymmetryAndNoiseMonotone) {
  Rng rng(6);
  const Image a = random_image(rng, 32, 32, 3);
  EXPECT_EQ(perceptual_distance(a, a), 0.0);
  const Image b = random_image(rng, 32, 32, 3);
  EXPECT_EQ(perceptual_distance(a, b), perceptual_distance(b, a));
  EXPECT_GT(perceptual_distance(a, b), 0.0);
  double prev_p = -1, prev_psnr = 1e9;
  for (double amp : {0.02, 0.05, 0.1}) {
    const Image n = add_noise(a, amp, 7);
    const double p = perceptual_distance(a, n), q = psnr(a, n);
    EXPECT_GT(p, prev_p);
    EXPECT_LT(q, prev_psnr);
    prev_p = p;
    prev_psnr = q;
  }
  EXPECT_EQ(perceptual_metric("pyramid-l1")(a, b), perceptual_distance(a, b));
  EXPECT_THROW(perceptual_metric("lpips"), ValidationError);
}

TEST(NormalEncoding, RoundTripWithin8Bits) {
  Rng rng(8);
  Image n(16, 16, 3), mask(16, 16, 1, 1.0f);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
      v.normalize();
      for (int c = 0; c < 3; ++c) n.at(y, x, c) = static_cast<float>(v[c]);
    }
  mask.at(3, 4, 0) = 0.0f;
  const Image enc = quantize8(encode_normals(n, mask));
  EXPECT_EQ(enc.at(3, 4, 0), 1.0f);
  EXPECT_EQ(enc.at(3, 4, 2), 1.0f);
  const Image dec = decode_normals(enc);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      if (mask.at(y, x, 0) == 0.0f) continue;
      for (int c = 0; c < 3; ++c) EXPECT_LE(std::abs(dec.at(y, x, c) - n.at(y, x, c)), 1.0 / 255.0 + 1e-6);
    }
}

TEST(Averaging, PerViewThenPerObject) {
  // Object A: 1 view at 10 dB; object B: 3 views at 40 dB.
  const std::vector<std::vector<Triple>> fixture{{{10, 0.1, 1.0}}, {{40, 0.7, 0.1}, {40, 0.7, 0.1}, {40, 0.7, 0.1}}};
  const Triple t = average_per_object(fixture);
  EXPECT_DOUBLE_EQ(t.psnr, 25.0);  // a flat mean over views would give 32.5
  EXPECT_DOUBLE_EQ(t.ssim, 0.4);
  EXPECT_DOUBLE_EQ(t.perceptual, 0.55);
}

refine::ModelConfig tiny_model() {
  refine::ModelConfig c;
  c.encoder.image_size = 16;
  c.encoder.patch = 8;
  c.encoder.dim = 16;
  c.encoder.layers = 1;
  c.encoder.heads = 2;
  c.decoder.resolution = 4;
  c.decoder.dim = 16;
  c.decoder.layers = 1;
  c.decoder.heads = 2;
  c.render_samples = 16;
  c.chunk_rays = 64;
  return c;
}

scenekit::Dataset tiny_dataset(int objects, std::uint64_t seed) {
  scenekit::Dataset d;
  d.config.objects = objects;
  d.config.views = 1;
  d.config.cond_views = 2;
  d.config.resolution = 16;
  d.config.seed = seed;
  d.manifest_hash = "m" + std::to_string(seed);
  for (int i = 0; i < objects; ++i) d.objects.push_back(scenekit::render_object(d.config, i));
  return d;
}

EvalSettings small_settings() {
  EvalSettings s;
  s.resolution = 16;
  s.samples = 16;
  return s;
}

TEST(Eval, GridHasThirtyViews) {
  ViewGrid g;
  const auto cams = g.cameras();
  ASSERT_EQ(cams.size(), 30u);
  for (const auto& c : cams) EXPECT_NEAR(c.position.norm(), 2.0, 1e-12);
  // elevation-major: first six share elevation -20
  EXPECT_NEAR(cams[0].position.z(), cams[5].position.z(), 1e-12);
  EXPECT_LT(cams[0].position.z(), 0.0);
}

TEST(Eval, GroundTruthAgainstItself) {
  const auto objs = prepare_eval_objects(tiny_dataset(2, 90), small_settings());
  const auto r = eval_ground_truth(objs, small_settings());
  EXPECT_EQ(r.rgb.psnr, 99.0);
  EXPECT_EQ(r.normal.psnr, 99.0);
  EXPECT_EQ(r.rgb.ssim, 1.0);
  EXPECT_EQ(r.normal.ssim, 1.0);
  EXPECT_EQ(r.rgb.perceptual, 0.0);
  EXPECT_EQ(r.normal.perceptual, 0.0);
  EXPECT_EQ(r.views_per_object, 30);
}

TEST(Eval, UntrainedRefinerReportsMatchAndSweepIsFlat) {
  auto model = refine::Model<float>::init_baseline(tiny_model(), 3);
  model.attach_refiner(4);
  const auto objs = prepare_eval_objects(tiny_dataset(2, 91), small_settings());
  const auto reports = evaluate_iterations(model, objs, 3, small_settings(), "proposed");
  ASSERT_EQ(reports.size(), 3u);
  for (int k = 1; k < 3; ++k) {
    EXPECT_NEAR(reports[k].rgb.psnr, reports[0].rgb.psnr, 1e-6);
    EXPECT_NEAR(reports[k].normal.psnr, reports[0].normal.psnr, 1e-6);
    EXPECT_NEAR(reports[k].normal.perceptual, reports[0].normal.perceptual, 1e-6);
  }
  // Requires-grad flags are restored afterwards.
  for (const auto& p : model.parameters()) EXPECT_TRUE(p.var.requires_grad()) << p.name;
  const auto once = eval_model(model, objs, 1, small_settings(), "baseline");
  EXPECT_EQ(once.rgb.psnr, reports[0].rgb.psnr);
  EXPECT_GT(once.rgb.psnr, 0.0);
  EXPECT_LE(once.rgb.psnr, 99.0);
  EXPECT_GE(once.rgb.ssim, -1.0);
  EXPECT_LE(once.rgb.ssim, 1.0);

  const auto dir = std::filesystem::temp_directory_path() / "geofuse_metrics_test";
  std::filesystem::create_directories(dir);
  write_summary_csv((dir / "s.csv").string(), reports);
  write_object_csv((dir / "o.csv").string(), reports);
  std::ifstream s(dir / "s.csv"), o(dir / "o.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(s, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);  // header + maxT rows
  EXPECT_EQ(lines[0], "iterations,rgb_psnr,rgb_ssim,rgb_perceptual,normal_psnr,normal_ssim,normal_perceptual");
  int rows = 0;
  std::getline(o, line);
  EXPECT_EQ(line, "object_id,iterations,domain,psnr,ssim,perceptual");
  while (std::getline(o, line)) ++rows;
  EXPECT_EQ(rows, 3 * 2 * 2);
  std::filesystem::remove_all(dir);

  const Image plot = plot_sweep(reports);
  EXPECT_EQ(plot.channels, 3);
  EXPECT_GT(plot.width, 0);
  const std::string table = format_metrics_table(reports);
  EXPECT_LT(table.find("RGB PSNR"), table.find("Nrm PSNR"));
}

TEST(Eval, OverlapIsRejected) {
  const auto data = tiny_dataset(2, 92);
  EXPECT_THROW(check_disjoint({data.objects[1].scene_seed}, "other", data), ValidationError);
  EXPECT_THROW(check_disjoint({}, data.manifest_hash, data), ValidationError);
  EXPECT_NO_THROW(check_disjoint({1, 2, 3}, "other", data));
}

TEST(Cost, SingleLinearFormula) {
  EXPECT_EQ(linear_flops(16, 64, 64), 2.0 * 16 * 64 * 64);
}

TEST(Cost, AnalyticMatchesCounter) {
  auto model = refine::Model<float>::init_baseline(tiny_model(), 5);
  model.attach_refiner(6);
  const auto data = tiny_dataset(1, 93);
  const auto report = cost_report(model, data.objects[0].conditioning, {1, 2, 3}, 1);
  ASSERT_EQ(report.rows.size(), 3u);
  for (const auto& r : report.rows) {
    ASSERT_GT(r.counted, 0.0);
    EXPECT_LT(std::abs(r.analytic.total() - r.counted) / r.counted, 0.10) << "iterations " << r.iterations;
  }
  EXPECT_GT(report.rows[1].analytic.total(), report.rows[0].analytic.total());
  EXPECT_GT(report.rows[1].analytic.total() / report.rows[0].analytic.total(), 1.8);
  EXPECT_EQ(report.rows[0].analytic.fuser, 0.0);
  EXPECT_NE(format_cost_table(report).find("2.240"), std::string::npos);
}

TEST(Cost, DefaultConfigRatio) {
  const refine::ModelConfig c;
  const double one = analytic_flops(c, 4, 1, 0).total();
  const double two = analytic_flops(c, 4, 2, 0).total();
  EXPECT_GT(two / one, 1.8);
}

}  // namespace
}  // namespace geofuse
