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

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "geofuse/app/cli.hpp"
#include "geofuse/app/config.hpp"
#include "geofuse/app/grid.hpp"
#include "geofuse/app/mesh.hpp"
#include "geofuse/app/pipeline.hpp"
#include "geofuse/core/error.hpp"

namespace geofuse {
namespace {

namespace fs = std::filesystem;
using app::RunConfig;

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("geofuse_app_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------- config ----------

TEST(RunConfig, DefaultsValidateAndRoundTrip) {
  const RunConfig a;
  const auto path = (scratch("cfg") / "c.json").string();
  a.save(path);
  const RunConfig b = RunConfig::load(path);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 64u);
}

TEST(RunConfig, UnknownKeysAndWrongTypesAreRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("train.lrr", "1e-3"), ValidationError);
  EXPECT_THROW(c.set("nosection.x", "1"), ValidationError);
  EXPECT_THROW(c.set("train.lr", "\"fast\""), ValidationError);
  EXPECT_THROW(c.set("train.jitter", "3"), ValidationError);
  auto j = app::default_config_json();
  j["eval"]["typo"] = 1;
  EXPECT_THROW(RunConfig::from_json(j), ValidationError);
  // Partial files keep the defaults for everything else.
  const RunConfig partial = RunConfig::from_json({{"train", {{"lr", 0.5}}}});
  EXPECT_EQ(partial.baseline_train().lr, 0.5);
  EXPECT_EQ(partial.baseline_train().steps, RunConfig().baseline_train().steps);
}

TEST(RunConfig, OverridesChangeHashAndReachTypedViews) {
  RunConfig c;
  const std::string h0 = c.hash();
  c.set("train.refine_lr", "2e-4");
  c.set("train.unroll", "4");
  c.set("eval.perceptual", "pyramid-l1");
  EXPECT_NE(c.hash(), h0);
  EXPECT_EQ(c.refiner_train().lr, 2e-4);
  EXPECT_EQ(c.refiner_train().unroll, 4);
  EXPECT_EQ(c.refiner_train().stage, refine::Stage::kRefiner);
  EXPECT_NE(c.refiner_train().seed, c.baseline_train().seed);
  EXPECT_THROW(c.set("data.test_seed", std::to_string(c.train_data().seed)), ValidationError);
  EXPECT_THROW(c.set("eval.perceptual", "\"lpips\""), ValidationError);
}

TEST(RunConfig, BaselineHashIgnoresRefinerKeys) {
  RunConfig a, b;
  b.set("train.refine_steps", "7");
  EXPECT_EQ(app::training_hash(a, refine::Stage::kBaseline), app::training_hash(b, refine::Stage::kBaseline));
  EXPECT_NE(app::training_hash(a, refine::Stage::kRefiner), app::training_hash(b, refine::Stage::kRefiner));
  b.set("train.lr", "0.1");
  EXPECT_NE(app::training_hash(a, refine::Stage::kBaseline), app::training_hash(b, refine::Stage::kBaseline));
}

TEST(RunConfig, OutputRootPrecedence) {
  ::setenv(app::kOutputRootEnv, "/tmp/env_root", 1);
  EXPECT_EQ(app::output_root("flag"), "flag");
  EXPECT_EQ(app::output_root(""), "/tmp/env_root");
  ::unsetenv(app::kOutputRootEnv);
  EXPECT_EQ(app::output_root(""), "runs");
}

// ---------- grids ----------

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

struct GridFixture {
  refine::Model<float> model;
  scenekit::ObjectEntry obj;
  std::vector<refine::ReconstructionState<float>> states;
};

const GridFixture& fixture() {
  static const GridFixture f = [] {
    GridFixture g;
    g.model = refine::Model<float>::init_baseline(tiny_model(), 3);
    // Low density, so most rays miss.
    g.model.decoder.field.b3.mutable_value()(0, 0) = -4.0f;
    g.model.attach_refiner(4);
    scenekit::DatasetConfig dc;
    dc.views = 3;
    dc.cond_views = 2;
    dc.resolution = 16;
    dc.seed = 11;
    g.obj = scenekit::render_object(dc, 0);
    g.states = refine::infer(g.obj.conditioning, g.model, 2);
    return g;
  }();
  return f;
}

TEST(Grid, DimensionsFollowTheDocumentedFormula) {
  const auto& f = fixture();
  const Image img = app::grid_image(f.states, f.model.decoder.field, f.obj.supervision, 16);
  const int s = 16 * app::kGridUpscale;
  EXPECT_EQ(img.width, (1 + 2 * 3) * (s + 2) + 2);
  EXPECT_EQ(img.height, app::kGridHeader + 2 * (s + 2) + 2);
  EXPECT_EQ(img.channels, 3);
  const app::GridLayout layout{2, 7, s};
  EXPECT_EQ(layout.width(), img.width);
  EXPECT_EQ(layout.height(), img.height);
}

TEST(Grid, ReEmissionIsByteIdentical) {
  const auto& f = fixture();
  const auto dir = scratch("grid");
  app::emit_grid(f.states, f.model.decoder.field, f.obj.supervision, 16, (dir / "a.png").string());
  app::emit_grid(f.states, f.model.decoder.field, f.obj.supervision, 16, (dir / "b.png").string());
  const std::string a = read_bytes((dir / "a.png").string());
  EXPECT_GT(a.size(), 100u);
  EXPECT_EQ(a, read_bytes((dir / "b.png").string()));
}

TEST(Grid, NormalTileBackgroundIsWhite) {
  const auto& f = fixture();
  triplane::RenderSettings rs;
  rs.resolution = 16;
  rs.samples = 16;
  const auto& cam = f.obj.supervision[0].camera;
  const auto out = triplane::render_view(f.states[0].triplane, f.model.decoder.field, cam, rs).value();
  const auto tiles = app::render_tiles(f.states[0], f.model.decoder.field, cam, rs);
  int background = 0, foreground = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      if (out(y * 16 + x, kernels::kColAccum) > 0.5f) {
        ++foreground;
        continue;
      }
      ++background;
      for (int c = 0; c < 3; ++c) ASSERT_EQ(tiles.normal.at(y, x, c), 1.0f);
    }
  EXPECT_GT(background, 0);
  // The same pixels inside the grid: row 0, first normal column (1 + V).
  const Image img = app::grid_image(f.states, f.model.decoder.field, f.obj.supervision, 16);
  const app::GridLayout g{2, 7, 16 * app::kGridUpscale};
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c)
        ASSERT_EQ(img.at(g.tile_y(0) + y * app::kGridUpscale + app::kGridUpscale - 1,
                         g.tile_x(4) + x * app::kGridUpscale + 1, c),
                  tiles.normal.at(y, x, c));
  std::printf("normal tile: %d foreground, %d background pixels\n", foreground, background);
}

TEST(Grid, ComparisonHasFiveColumnsPerView) {
  const auto& f = fixture();
  const Image img = app::comparison_image(f.obj.conditioning[0].rgb, f.states.front(), f.states.back(),
                                          f.model.decoder.field, f.obj.supervision, 16);
  const app::GridLayout g{3, 5, 16 * app::kGridUpscale};
  EXPECT_EQ(img.width, g.width());
  EXPECT_EQ(img.height, g.height());
}

TEST(Grid, RejectsEmptyInput) {
  const auto& f = fixture();
  EXPECT_THROW(app::grid_image({}, f.model.decoder.field, f.obj.supervision, 16), ValidationError);
  EXPECT_THROW(app::grid_image(f.states, f.model.decoder.field, {}, 16), ValidationError);
}

// ---------- mesh ----------

// Density grows towards the origin: plane feature 0 is a Gaussian bump
// routed to the density output.
triplane::Triplane<float> bump_planes(int R, int C) {
  ad::Mat<float> planes = ad::Mat<float>::Zero(3 * R * R, C);
  for (int p = 0; p < 3; ++p)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const double u = -1 + 2.0 * x / (R - 1), v = -1 + 2.0 * y / (R - 1);
        planes(p * R * R + y * R + x, 0) = static_cast<float>(2.0 * std::exp(-3.0 * (u * u + v * v)));
      }
  return {ad::Var<float>(planes), R, C};
}

triplane::FieldMlp<float> density_passthrough(int C) {
  Rng rng(5);
  auto mlp = triplane::FieldMlp<float>::init(C, C, rng);
  mlp.w1.mutable_value().setZero();
  mlp.w1.mutable_value()(0, 0) = 1.0f;
  mlp.b1.mutable_value().setZero();
  mlp.w2.mutable_value().setZero();
  mlp.w2.mutable_value()(0, 0) = 1.0f;
  mlp.b2.mutable_value().setZero();
  mlp.w3.mutable_value().setZero();
  mlp.w3.mutable_value()(0, 0) = 4.0f;
  mlp.b3.mutable_value().setZero();
  return mlp;
}

TEST(Mesh, VerticesSitOnTheLevelSetAndSurfaceIsClosed) {
  const auto tp = bump_planes(16, 4);
  const auto mlp = density_passthrough(4);
  const double level = 10.0;
  const auto mesh = app::extract_mesh(tp, mlp, 24, level);
  ASSERT_GT(mesh.faces.size(), 50u);
  const auto rho = app::field_density(tp, mlp, mesh.vertices);
  for (double r : rho) ASSERT_NEAR(r, level, 1e-3 * level);
  // Closed 2-manifold of genus 0: every edge shared by two faces, V - E + F = 2.
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  for (const auto& [e, n] : edges) ASSERT_EQ(n, 2);
  const long chi = static_cast<long>(mesh.vertices.size()) - static_cast<long>(edges.size()) +
                   static_cast<long>(mesh.faces.size());
  EXPECT_EQ(chi, 2);
  // Normals point away from the dense centre.
  int outward = 0;
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
    if ((b - a).cross(c - a).dot((a + b + c) / 3.0) > 0) ++outward;
  }
  EXPECT_EQ(outward, static_cast<int>(mesh.faces.size()));
}

TEST(Mesh, EmptyFieldGivesNoFacesAndObjIsWritten) {
  const auto tp = bump_planes(8, 4);
  const auto mlp = density_passthrough(4);
  EXPECT_TRUE(app::extract_mesh(tp, mlp, 8, 1e6).faces.empty());
  const auto mesh = app::extract_mesh(tp, mlp, 12, 10.0);
  const auto path = (scratch("mesh") / "m.obj").string();
  app::write_obj(path, mesh);
  std::ifstream in(path);
  std::string line;
  std::size_t v = 0, f = 0;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++v;
    if (line.rfind("f ", 0) == 0) ++f;
  }
  EXPECT_EQ(v, mesh.vertices.size());
  EXPECT_EQ(f, mesh.faces.size());
  EXPECT_THROW(app::extract_mesh(tp, mlp, 1, 10.0), ValidationError);
}

// ---------- command line ----------

int cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* log_text = nullptr) {
  args.insert(args.begin(), "geofuse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, log;
  const int code = app::run_cli(static_cast<int>(argv.size()), argv.data(), out, log);
  if (out_text) *out_text = out.str() + log.str();
  if (log_text) *log_text = log.str();
  return code;
}

TEST(Cli, ExitCodes) {
  std::string text;
  EXPECT_EQ(cli({"--help"}, &text), 0);
  EXPECT_NE(text.find("selftest"), std::string::npos);
  EXPECT_EQ(cli({}, &text), 1);
  EXPECT_EQ(cli({"frobnicate"}, &text), 1);
  EXPECT_EQ(cli({"cost", "--no-such-flag"}, &text), 1);
  EXPECT_EQ(cli({"cost", "--train.no_such_key", "1"}, &text), 1);
  EXPECT_NE(text.find("train.no_such_key"), std::string::npos);
  EXPECT_EQ(cli({"cost", "--train.lr"}, &text), 1);
  // Missing inputs are validation errors; an unwritable output is a runtime failure.
  const auto dir = scratch("cli");
  EXPECT_EQ(cli({"--out", dir.string(), "eval"}, &text), 1);
  EXPECT_EQ(cli({"--out", "/proc/geofuse_no_such_dir", "gen-data", "--objects", "1"}, &text), 2);
}

TEST(Cli, ResolvedConfigIsLoggedFirst) {
  std::string text, log;
  const auto dir = scratch("cli_cost");
  ASSERT_EQ(cli({"--out", dir.string(), "--eval.cost_repeats=1", "--model.encoder.image_size", "16",
                 "--data.resolution", "16", "--model.encoder.dim", "16", "cost",
                 "--iterations", "1,2"},
                &text, &log),
            0)
      << text;
  EXPECT_EQ(log.rfind("geofuse cost  config_hash=", 0), 0u);
  EXPECT_NE(log.find("\"train\""), std::string::npos);
  EXPECT_NE(text.find("ratio"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "cost" / "cost.txt"));
  EXPECT_TRUE(fs::exists(dir / "cost" / "config.json"));
}

TEST(Cli, GenDataTrainEvalInferRoundTrip) {
  const auto dir = scratch("pipeline");
  const std::vector<std::string> common{
      "--out",           dir.string(),    "--model.encoder.image_size", "16", "--model.encoder.dim", "16",
      "--model.encoder.layers", "1",      "--model.decoder.layers", "1",
      "--model.decoder.resolution", "4",  "--model.render_samples", "16", "--train.samples", "16",
      "--train.base_steps", "3",          "--train.refine_steps", "2",  "--eval.samples", "16",
      "--eval.resolution", "16",          "--eval.objects", "1",        "--train.log_every", "1"};
  auto run = [&](std::vector<std::string> extra, std::string* text = nullptr) {
    std::vector<std::string> a = common;
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a, text);
  };
  std::string text;
  ASSERT_EQ(run({"gen-data", "--objects", "2", "--test-objects", "1", "--views", "2", "--cond-views", "2", "--res",
                 "16"},
                &text),
            0)
      << text;
  const std::vector<std::string> data{"--data.train_objects", "2", "--data.test_objects", "1", "--data.views", "2",
                                      "--data.cond_views", "2", "--data.resolution", "16"};
  auto with_data = [&](std::vector<std::string> extra) {
    extra.insert(extra.begin(), data.begin(), data.end());
    return extra;
  };
  ASSERT_EQ(run(with_data({"train-base"}), &text), 0) << text;
  EXPECT_TRUE(fs::exists(dir / "ckpt" / "base.gfck.log.csv"));
  ASSERT_EQ(run(with_data({"train-refine", "--ablation", "normal-only"}), &text), 0) << text;
  ASSERT_TRUE(fs::exists(dir / "ckpt" / "refine_normal-only.gfck"));
  ASSERT_EQ(run(with_data({"eval", "--ckpt", (dir / "ckpt" / "refine_normal-only.gfck").string()}), &text), 0)
      << text;
  EXPECT_TRUE(fs::exists(dir / "eval" / "normal-only_summary.csv"));
  const std::string first = read_bytes((dir / "eval" / "normal-only_objects.csv").string());
  ASSERT_EQ(run(with_data({"eval", "--ckpt", (dir / "ckpt" / "refine_normal-only.gfck").string()}), &text), 0);
  EXPECT_EQ(first, read_bytes((dir / "eval" / "normal-only_objects.csv").string()));
  // A different training config is refused unless overridden.
  EXPECT_EQ(run(with_data({"--train.lr", "0.5", "eval", "--ckpt", (dir / "ckpt" / "base.gfck").string()}), &text), 1);
  EXPECT_NE(text.find("mismatch"), std::string::npos);
  EXPECT_EQ(run(with_data({"--train.lr", "0.5", "eval", "--allow-mismatch", "--ckpt",
                           (dir / "ckpt" / "base.gfck").string()}),
                &text),
            0)
      << text;
  ASSERT_EQ(run(with_data({"infer", "--ckpt", (dir / "ckpt" / "refine_normal-only.gfck").string(), "--iterations",
                           "2", "--grid", "--export-mesh", "--mesh-grid", "8", "--mesh-level", "0.5"}),
                &text),
            0)
      << text;
  const auto infer_dir = dir / "infer";
  ASSERT_TRUE(fs::exists(infer_dir));
  const auto obj_dir = fs::directory_iterator(infer_dir)->path();
  EXPECT_TRUE(fs::exists(obj_dir / "comparison.png"));
  EXPECT_TRUE(fs::exists(obj_dir / "states.png"));
  EXPECT_TRUE(fs::exists(obj_dir / "mesh.obj"));
  const Image cmp = read_png((obj_dir / "comparison.png").string());
  EXPECT_EQ(cmp.width, app::GridLayout({2, 5, 64}).width());
}

TEST(Cli, TwoPipelineRunsGiveIdenticalCsvs) {
  std::vector<std::string> csvs;
  for (const char* name : {"repro_a", "repro_b"}) {
    const auto dir = scratch(name);
    const std::vector<std::string> common{
        "--out", dir.string(), "--model.encoder.image_size", "16", "--model.encoder.dim", "16",
        "--model.encoder.layers", "1", "--model.decoder.layers", "1", "--model.decoder.resolution", "4",
        "--model.render_samples", "16", "--train.samples", "16", "--train.base_steps", "2",
        "--train.refine_steps", "2", "--eval.samples", "16", "--eval.resolution", "16", "--eval.objects", "1",
        "--data.train_objects", "2", "--data.test_objects", "1", "--data.views", "2", "--data.cond_views", "2",
        "--data.resolution", "16"};
    for (const std::vector<std::string> cmd : {std::vector<std::string>{"gen-data"}, {"train-base"}, {"train-refine"},
                                               {"sweep"}}) {
      std::vector<std::string> a = common;
      a.insert(a.end(), cmd.begin(), cmd.end());
      std::string text;
      ASSERT_EQ(cli(a, &text), 0) << cmd[0] << ": " << text;
    }
    csvs.push_back(read_bytes((dir / "sweep" / "objects.csv").string()) +
                   read_bytes((dir / "sweep" / "summary.csv").string()));
    EXPECT_TRUE(fs::exists(dir / "sweep" / "sweep.png"));
  }
  EXPECT_GT(csvs[0].size(), 100u);
  EXPECT_EQ(csvs[0], csvs[1]);
}

}  // namespace
}  // namespace geofuse
