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

#include "geofuse/app/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "geofuse/app/checks.hpp"
#include "geofuse/app/grid.hpp"
#include "geofuse/app/mesh.hpp"
#include "geofuse/app/pipeline.hpp"
#include "geofuse/core/error.hpp"
#include "geofuse/metrics/cost.hpp"

namespace geofuse::app {

namespace {

struct Override {
  std::string path, value;
};

// Pulls "--section.key value" and "--section.key=value" out of argv.
std::vector<Override> extract_overrides(std::vector<std::string>& args) {
  static const std::regex pattern(R"(--((data|model|train|eval)\.[A-Za-z0-9_.]+)(=(.*))?)");
  std::vector<Override> found;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::smatch m;
    if (!std::regex_match(args[i], m, pattern)) {
      rest.push_back(args[i]);
      continue;
    }
    if (m[3].matched) {
      found.push_back({m[1], m[4]});
    } else {
      if (i + 1 >= args.size()) throw ValidationError("missing value for --" + std::string(m[1]));
      found.push_back({m[1], args[++i]});
    }
  }
  args = rest;
  return found;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("bad integer list '" + s + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty integer list");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw RuntimeFailure("cannot write " + path);
  f << text;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<Override> overrides;
  try {
    overrides = extract_overrides(args);
  } catch (const ValidationError& e) {
    log << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App app{"iterative geometry-aware reconstruction at desk scale", "geofuse"};
  app.require_subcommand(1);
  std::string config_path, out_flag;
  app.add_option("--config", config_path, "JSON run config (every key optional)");
  app.add_option("--out", out_flag, std::string("output root (default $") + kOutputRootEnv + " or ./runs)");
  app.footer("Any config key can be overridden as --section.key VALUE, e.g. --train.lr 1e-3.");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render the synthetic train and held-out datasets");
  std::optional<int> objects, views, cond_views, res, test_objects;
  std::optional<std::uint64_t> data_seed;
  std::string data_dir;
  bool force = false;
  gen->add_option("--objects", objects, "training objects (data.train_objects)");
  gen->add_option("--test-objects", test_objects, "held-out objects (data.test_objects)");
  gen->add_option("--views", views, "supervision views per object (data.views)");
  gen->add_option("--cond-views", cond_views, "conditioning views per object (data.cond_views)");
  gen->add_option("--res", res, "image resolution (data.resolution)");
  gen->add_option("--seed", data_seed, "dataset seed (data.seed)");
  gen->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  gen->add_flag("--force", force, "overwrite an existing dataset");

  // train-base / train-refine
  std::string ckpt_out, base_path, ablation_name = "none";
  std::optional<int> unroll;
  bool fresh = false;
  auto* tb = app.add_subcommand("train-base", "train the baseline reconstructor");
  tb->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  tb->add_option("--ckpt-out", ckpt_out, "checkpoint path (default <out>/ckpt/base.gfck)");
  tb->add_flag("--fresh", fresh, "ignore an existing checkpoint instead of resuming it");
  auto* tr = app.add_subcommand("train-refine", "train the refiner on a frozen baseline");
  tr->add_option("--base", base_path, "baseline checkpoint (default <out>/ckpt/base.gfck)");
  tr->add_option("--ablation", ablation_name, "none | random-init | token-concat | normal-only | depth-only");
  tr->add_option("--unroll", unroll, "unrolled passes per step (train.unroll)");
  tr->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  tr->add_option("--ckpt-out", ckpt_out, "checkpoint path (default <out>/ckpt/refine_<method>.gfck)");
  tr->add_flag("--fresh", fresh, "ignore an existing checkpoint instead of resuming it");

  // infer
  std::string ckpt_path;
  std::optional<int> iterations;
  int object = 0, mesh_grid = 48;
  double mesh_level = 10.0;
  bool grid = false, export_mesh = false;
  auto* inf = app.add_subcommand("infer", "reconstruct one held-out object");
  inf->add_option("--ckpt", ckpt_path, "checkpoint (default <out>/ckpt/refine_proposed.gfck)");
  inf->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  inf->add_option("--object", object, "held-out object index")->check(CLI::NonNegativeNumber);
  inf->add_option("--iterations", iterations, "passes (eval.iterations)");
  inf->add_flag("--grid", grid, "write comparison and per-state grid images");
  inf->add_flag("--export-mesh", export_mesh, "write the final density iso-surface as OBJ");
  inf->add_option("--mesh-grid", mesh_grid, "mesh sampling grid per axis")->check(CLI::Range(2, 512));
  inf->add_option("--mesh-level", mesh_level, "density iso level");

  // eval / sweep
  bool allow_mismatch = false;
  std::string method;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on the held-out set");
  ev->add_option("--ckpt", ckpt_path, "checkpoint (default <out>/ckpt/refine_proposed.gfck)");
  ev->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  ev->add_option("--iterations", iterations, "passes (eval.iterations)");
  ev->add_option("--method", method, "method label in tables and CSVs");
  ev->add_flag("--allow-mismatch", allow_mismatch, "evaluate despite dataset/config hash mismatch");
  auto* sw = app.add_subcommand("sweep", "metrics for 1..max iterations, CSVs and a plot");
  sw->add_option("--ckpt", ckpt_path, "checkpoint (default <out>/ckpt/refine_proposed.gfck)");
  sw->add_option("--data", data_dir, "dataset directory (default <out>/data)");
  sw->add_option("--max-iterations", iterations, "largest pass count (eval.max_iterations)");
  sw->add_flag("--allow-mismatch", allow_mismatch, "evaluate despite dataset/config hash mismatch");

  // cost
  std::string iteration_list = "1,2,3";
  auto* co = app.add_subcommand("cost", "analytic and counted FLOPs plus wall time per iteration count");
  co->add_option("--ckpt", ckpt_path, "checkpoint (default: freshly initialised model from the config)");
  co->add_option("--iterations", iteration_list, "comma-separated pass counts");

  // ablate
  bool all = false;
  auto* ab = app.add_subcommand("ablate", "train and score the ablation variants");
  ab->add_flag("--all", all, "baseline, the four variants and the proposed configuration")->required();
  ab->add_option("--data", data_dir, "dataset directory (default <out>/data)");

  auto* st = app.add_subcommand("selftest", "identity, gradient, renderer, cost and metric invariants");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  auto say = [&log](const std::string& s) { log << s << std::endl; };
  try {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::load(config_path);
    for (const auto& o : overrides) cfg.set(o.path, o.value, false);
    if (objects) cfg.set("data.train_objects", std::to_string(*objects), false);
    if (test_objects) cfg.set("data.test_objects", std::to_string(*test_objects), false);
    if (views) cfg.set("data.views", std::to_string(*views), false);
    if (cond_views) cfg.set("data.cond_views", std::to_string(*cond_views), false);
    if (data_seed) cfg.set("data.seed", std::to_string(*data_seed), false);
    if (res) {
      cfg.set("data.resolution", std::to_string(*res), false);
      cfg.set("model.encoder.image_size", std::to_string(*res), false);
    }
    if (unroll) cfg.set("train.unroll", std::to_string(*unroll), false);
    cfg.validate();

    const Paths paths{output_root(out_flag)};
    if (data_dir.empty()) data_dir = paths.data();
    const std::string cmd = app.get_subcommands().front()->get_name();
    log << "geofuse " << cmd << "  config_hash=" << cfg.hash() << "  seed=" << cfg.json()["train"]["seed"]
        << "  data.seed=" << cfg.json()["data"]["seed"] << "\n"
        << cfg.dump() << std::endl;

    if (gen->parsed()) {
      gen_data(cfg, data_dir, force, say);
      return kExitOk;
    }
    if (tb->parsed()) {
      const auto train = scenekit::load_dataset(data_dir + "/train");
      const std::string path = ckpt_out.empty() ? paths.base_ckpt() : ckpt_out;
      train_base(cfg, train, path, fresh, say);
      out << "baseline checkpoint: " << path << "\n";
      return kExitOk;
    }
    if (tr->parsed()) {
      const auto ablation = refine::ablation_from_string(ablation_name);
      const auto train = scenekit::load_dataset(data_dir + "/train");
      const std::string path = ckpt_out.empty() ? paths.refine_ckpt(ablation) : ckpt_out;
      train_refine(cfg, train, base_path.empty() ? paths.base_ckpt() : base_path, ablation, path, fresh, say);
      out << "refiner checkpoint: " << path << "\n";
      return kExitOk;
    }
    const std::string ckpt_file = ckpt_path.empty() ? paths.refine_ckpt(refine::Ablation::kNone) : ckpt_path;
    if (inf->parsed()) {
      const int iters = iterations.value_or(cfg.eval_iterations());
      if (iters < 1) throw ValidationError("--iterations must be >= 1");
      const auto test = scenekit::load_dataset(data_dir + "/test");
      if (object >= static_cast<int>(test.objects.size())) throw ValidationError("--object out of range");
      auto model = refine::model_from_checkpoint(refine::read_checkpoint(ckpt_file));
      if (iters > 1 && !model.has_refiner) {
        say("checkpoint has no refiner; attaching an untrained (identity) refiner");
        model.attach_refiner(derive_seed({cfg.refiner_train().seed, 0xa77a}));
      }
      const auto& obj = test.objects[object];
      refine::NoGradScope<float> no_grad(model);
      const auto states = refine::infer(obj.conditioning, model, iters);
      const std::string dir = paths.root + "/infer/" + obj.id;
      ensure_dir(dir);
      cfg.save(dir + "/config.json");
      triplane::RenderSettings rs;
      rs.resolution = obj.supervision[0].resolution();
      rs.samples = cfg.eval().samples;
      for (std::size_t v = 0; v < obj.supervision.size(); ++v) {
        const auto t = render_tiles(states.back(), model.decoder.field, obj.supervision[v].camera, rs);
        write_png(dir + "/rgb_" + std::to_string(v) + ".png", t.rgb);
        write_png(dir + "/normal_" + std::to_string(v) + ".png", t.normal);
      }
      out << "renders of " << obj.id << " after " << iters << " passes: " << dir << "\n";
      if (grid) {
        std::vector<scenekit::ViewRecord> views(obj.supervision.begin(),
                                                obj.supervision.begin() + std::min<std::size_t>(4, obj.supervision.size()));
        write_png(dir + "/comparison.png", comparison_image(obj.conditioning[0].rgb, states.front(), states.back(),
                                                            model.decoder.field, views, rs.samples));
        emit_grid(states, model.decoder.field, views, rs.samples, dir + "/states.png");
        out << "grids: " << dir << "/comparison.png " << dir << "/states.png\n";
      }
      if (export_mesh) {
        const auto mesh = extract_mesh(states.back().triplane, model.decoder.field, mesh_grid, mesh_level);
        write_obj(dir + "/mesh.obj", mesh);
        out << "mesh: " << dir << "/mesh.obj (" << mesh.vertices.size() << " vertices, " << mesh.faces.size()
            << " faces)\n";
      }
      return kExitOk;
    }
    if (ev->parsed() || sw->parsed()) {
      const auto data = load_data(data_dir);
      const auto ckpt = refine::read_checkpoint(ckpt_file);
      check_provenance(ckpt, cfg, data.train, allow_mismatch);
      const auto model = refine::model_from_checkpoint(ckpt);
      const auto objs = eval_objects(cfg, data);
      if (method.empty()) method = model.has_refiner ? method_name(refine::ablation_from_string(ckpt.header.value("ablation", "none"))) : "baseline";
      if (ev->parsed()) {
        const int iters = iterations.value_or(model.has_refiner ? cfg.eval_iterations() : 1);
        if (iters > 1 && !model.has_refiner) throw ValidationError("a baseline checkpoint supports --iterations 1 only");
        const auto reports = metrics::evaluate_iterations(model, objs, iters, cfg.eval(), method);
        const std::string dir = paths.eval_dir();
        ensure_dir(dir);
        cfg.save(dir + "/config.json");
        metrics::write_object_csv(dir + "/" + method + "_objects.csv", reports);
        metrics::write_summary_csv(dir + "/" + method + "_summary.csv", reports);
        out << metrics::format_metrics_table(reports);
        return kExitOk;
      }
      if (!model.has_refiner) throw ValidationError("sweep needs a refiner checkpoint");
      const int max_it = iterations.value_or(cfg.sweep_iterations());
      const auto reports = metrics::evaluate_iterations(model, objs, max_it, cfg.eval(), method);
      const std::string dir = paths.root + "/sweep";
      ensure_dir(dir);
      cfg.save(dir + "/config.json");
      metrics::write_object_csv(dir + "/objects.csv", reports);
      metrics::write_summary_csv(dir + "/summary.csv", reports);
      write_png(dir + "/sweep.png", metrics::plot_sweep(reports));
      out << metrics::format_metrics_table(reports);
      return kExitOk;
    }
    if (co->parsed()) {
      refine::Model<float> model;
      if (ckpt_path.empty()) {
        model = refine::Model<float>::init_baseline(cfg.model(), derive_seed({cfg.baseline_train().seed, 0xba5e}));
      } else {
        model = refine::model_from_checkpoint(refine::read_checkpoint(ckpt_path));
      }
      if (!model.has_refiner) model.attach_refiner(derive_seed({cfg.refiner_train().seed, 0xa77a}));
      auto dc = cfg.test_data();
      dc.objects = 1;
      const auto obj = scenekit::render_object(dc, 0);
      refine::NoGradScope<float> no_grad(model);
      const auto report = metrics::cost_report(model, obj.conditioning, parse_int_list(iteration_list), cfg.cost_repeats());
      const std::string table = metrics::format_cost_table(report);
      const std::string dir = paths.root + "/cost";
      ensure_dir(dir);
      cfg.save(dir + "/config.json");
      write_text(dir + "/cost.txt", table);
      out << table;
      return kExitOk;
    }
    if (ab->parsed()) {
      const auto data = load_data(data_dir);
      const auto objs = eval_objects(cfg, data);
      const auto rows = run_ablations(cfg, paths, data, objs, say);
      const std::string dir = paths.root + "/ablation";
      ensure_dir(dir);
      cfg.save(dir + "/config.json");
      write_ablation_csv(dir + "/ablation.csv", rows);
      const std::string table = format_ablation_table(rows);
      write_text(dir + "/ablation.txt", table);
      out << table;
      return kExitOk;
    }
    if (st->parsed()) {
      auto dc = cfg.test_data();
      dc.objects = std::min(dc.objects, 10);
      std::vector<scenekit::ObjectEntry> held;
      for (int i = 0; i < dc.objects; ++i) held.push_back(scenekit::render_object(dc, i));
      bool ok = true;
      for (const auto& r : run_invariant_checks(cfg.model(), held)) {
        out << format_check(r) << std::endl;
        ok = ok && (r.passed || r.soft);
      }
      return ok ? kExitOk : kExitRuntime;
    }
  } catch (const ValidationError& e) {
    log << "validation error: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const std::exception& e) {
    log << "runtime failure: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace geofuse::app
