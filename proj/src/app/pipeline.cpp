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

#include "geofuse/app/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/hash.hpp"
#include "geofuse/core/rng.hpp"

namespace geofuse::app {

namespace fs = std::filesystem;

std::string method_name(refine::Ablation a) {
  return a == refine::Ablation::kNone ? "proposed" : refine::to_string(a);
}

std::string Paths::refine_ckpt(refine::Ablation a) const { return ckpt_dir() + "/refine_" + method_name(a) + ".gfck"; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create " + dir + ": " + ec.message());
}

std::string training_hash(const RunConfig& cfg, refine::Stage stage) {
  Json j;
  j["data"] = cfg.json().at("data");
  j["model"] = cfg.json().at("model");
  j["train"] = cfg.json().at("train");
  j["train"].erase("checkpoint_every");
  j["train"].erase("log_every");
  if (stage == refine::Stage::kBaseline)
    for (const char* k : {"refine_steps", "refine_lr", "unroll"}) j["train"].erase(k);
  return sha256_hex(j.dump());
}

void gen_data(const RunConfig& cfg, const std::string& dir, bool force, const Logger& log) {
  ensure_dir(dir);
  for (auto [split, dc] : {std::pair{"train", cfg.train_data()}, std::pair{"test", cfg.test_data()}}) {
    dc.out = dir + "/" + split;
    dc.force = force;
    const std::string h = scenekit::build_dataset(dc);
    log(std::string(split) + ": " + std::to_string(dc.objects) + " objects, content hash " + h);
  }
  cfg.save(dir + "/config.json");
}

DataPair load_data(const std::string& dir) {
  return {scenekit::load_dataset(dir + "/train"), scenekit::load_dataset(dir + "/test")};
}

namespace {

class LossLog {
 public:
  LossLog(const std::string& path, bool append) : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw RuntimeFailure("cannot write " + path);
    if (!append) out_ << "step,pass,lr,updated,total,rgb,perceptual,mask,depth,normal,regularizer\n";
  }
  void write(const std::vector<refine::StepLog>& logs) {
    char buf[256];
    for (const auto& s : logs) {
      const auto& l = s.loss;
      std::snprintf(buf, sizeof(buf), "%d,%d,%.6g,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.step, s.pass, s.lr,
                    s.updated ? 1 : 0, l.total, l.rgb, l.perceptual, l.mask, l.depth, l.normal, l.regularizer);
      out_ << buf;
    }
    out_.flush();
  }

 private:
  std::ofstream out_;
};

// Returns true when `path` holds a checkpoint with the given training hash.
bool matching_checkpoint(const std::string& path, const std::string& hash, refine::Checkpoint& out) {
  if (!fs::exists(path)) return false;
  out = refine::read_checkpoint(path);
  return out.header.value("training_hash", "") == hash;
}

void run_stage(refine::Model<float>& model, const scenekit::Dataset& train, const refine::TrainConfig& tc,
               const RunConfig& cfg, const std::string& path, const refine::Checkpoint* resume, const Json& extra,
               const Logger& log) {
  refine::Trainer<float> trainer(model, train, tc);
  if (resume) refine::resume_trainer(*resume, trainer);
  LossLog losses(path + ".log.csv", resume != nullptr);
  const int every = cfg.checkpoint_every(), log_every = cfg.log_every();
  double window = 0;
  int window_n = 0;
  refine::run_training(trainer, [&](const std::vector<refine::StepLog>& logs) {
    losses.write(logs);
    window += logs.back().loss.total;
    ++window_n;
    const int done = trainer.steps_done();
    if (done % log_every == 0 || done == tc.steps) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s step %d/%d  loss(last pass, mean of %d) %.4f  normal %.4f  lr %.3g",
                    refine::to_string(tc.stage).c_str(), done, tc.steps, window_n, window / window_n,
                    logs.back().loss.normal, logs.back().lr);
      log(buf);
      window = 0;
      window_n = 0;
    }
    if (every > 0 && done % every == 0 && done < tc.steps)
      refine::write_checkpoint(path, refine::make_checkpoint(model, trainer, train, extra));
  });
  refine::write_checkpoint(path, refine::make_checkpoint(model, trainer, train, extra));
}

Json stage_extra(const RunConfig& cfg, refine::Stage stage) {
  return {{"training_hash", training_hash(cfg, stage)}, {"config_hash", cfg.hash()}, {"config", cfg.json()}};
}

}  // namespace

void train_base(const RunConfig& cfg, const scenekit::Dataset& train, const std::string& path, bool fresh,
                const Logger& log) {
  ensure_dir(fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
  const refine::TrainConfig tc = cfg.baseline_train();
  refine::Checkpoint existing;
  if (!fresh && matching_checkpoint(path, training_hash(cfg, tc.stage), existing)) {
    const int step = existing.header.at("step").get<int>();
    if (step >= tc.steps) {
      log("baseline checkpoint " + path + " is complete (" + std::to_string(step) + " steps); reusing it");
      return;
    }
    log("resuming baseline from step " + std::to_string(step));
    auto model = refine::model_from_checkpoint(existing);
    run_stage(model, train, tc, cfg, path, &existing, stage_extra(cfg, tc.stage), log);
    return;
  }
  auto model = refine::Model<float>::init_baseline(cfg.model(), derive_seed({tc.seed, 0xba5e}));
  run_stage(model, train, tc, cfg, path, nullptr, stage_extra(cfg, tc.stage), log);
}

void train_refine(const RunConfig& cfg, const scenekit::Dataset& train, const std::string& base,
                  refine::Ablation ablation, const std::string& path, bool fresh, const Logger& log) {
  ensure_dir(fs::path(path).parent_path().string().empty() ? "." : fs::path(path).parent_path().string());
  const refine::TrainConfig tc = cfg.refiner_train(ablation);
  const refine::Checkpoint base_ckpt = refine::read_checkpoint(base);
  check_provenance(base_ckpt, cfg, train, false);
  Json extra = stage_extra(cfg, tc.stage);
  extra["base_backbone_hash"] = base_ckpt.header.at("backbone_hash");
  refine::Checkpoint existing;
  if (!fresh && matching_checkpoint(path, training_hash(cfg, tc.stage), existing) &&
      existing.header.value("ablation", "") == refine::to_string(ablation) &&
      existing.header.value("base_backbone_hash", "") == base_ckpt.header.at("backbone_hash").get<std::string>()) {
    const int step = existing.header.at("step").get<int>();
    if (step >= tc.steps) {
      log("refiner checkpoint " + path + " is complete (" + std::to_string(step) + " steps); reusing it");
      return;
    }
    log("resuming refiner from step " + std::to_string(step));
    auto model = refine::model_from_checkpoint(existing);
    run_stage(model, train, tc, cfg, path, &existing, extra, log);
    return;
  }
  auto model = refine::model_from_checkpoint(base_ckpt);
  if (model.has_refiner) throw ValidationError(base + " is not a baseline checkpoint");
  model.config = refine::apply_ablation(model.config, ablation);
  model.attach_refiner(derive_seed({tc.seed, 0xa77a, static_cast<std::uint64_t>(ablation)}));
  run_stage(model, train, tc, cfg, path, nullptr, extra, log);
}

void check_provenance(const refine::Checkpoint& ckpt, const RunConfig& cfg, const scenekit::Dataset& train,
                      bool allow_mismatch) {
  std::vector<std::string> problems;
  const std::string data_hash = ckpt.header.at("dataset").value("content_hash", "");
  if (data_hash != train.content_hash)
    problems.push_back("dataset hash " + data_hash.substr(0, 12) + " != " + train.content_hash.substr(0, 12));
  const auto stage = ckpt.header.value("has_refiner", false) ? refine::Stage::kRefiner : refine::Stage::kBaseline;
  const std::string th = ckpt.header.value("training_hash", ""), want = training_hash(cfg, stage);
  if (th != want) problems.push_back("training config hash " + th.substr(0, 12) + " != " + want.substr(0, 12));
  if (problems.empty() || allow_mismatch) return;
  std::string msg = "checkpoint provenance mismatch:";
  for (const auto& p : problems) msg += " " + p + ";";
  throw ValidationError(msg + " pass --allow-mismatch to override");
}

std::vector<metrics::EvalObject> eval_objects(const RunConfig& cfg, const DataPair& data) {
  std::vector<std::uint64_t> seeds;
  for (const auto& o : data.train.objects) seeds.push_back(o.scene_seed);
  metrics::check_disjoint(seeds, data.train.manifest_hash, data.test);
  scenekit::Dataset held = data.test;
  if (cfg.eval_objects() > 0 && cfg.eval_objects() < static_cast<int>(held.objects.size()))
    held.objects.resize(cfg.eval_objects());
  return metrics::prepare_eval_objects(held, cfg.eval());
}

std::vector<AblationRow> run_ablations(const RunConfig& cfg, const Paths& paths, const DataPair& data,
                                       const std::vector<metrics::EvalObject>& objects, const Logger& log) {
  std::vector<AblationRow> rows;
  const auto base_ckpt = refine::read_checkpoint(paths.base_ckpt());
  check_provenance(base_ckpt, cfg, data.train, false);
  const auto base = refine::model_from_checkpoint(base_ckpt);
  rows.push_back({"baseline", metrics::eval_model(base, objects, 1, cfg.eval(), "baseline")});
  std::vector<refine::Ablation> order = refine::all_ablations();
  order.push_back(refine::Ablation::kNone);
  for (refine::Ablation a : order) {
    const std::string path = paths.refine_ckpt(a);
    train_refine(cfg, data.train, paths.base_ckpt(), a, path, false, log);
    const auto model = refine::model_from_checkpoint(refine::read_checkpoint(path));
    rows.push_back({method_name(a), metrics::eval_model(model, objects, cfg.eval_iterations(), cfg.eval(), method_name(a))});
    log("evaluated " + method_name(a));
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-14s %4s | %8s %7s %8s | %8s %7s %8s\n", "method", "T", "N-PSNR", "N-SSIM",
                "N-PERC", "RGB-PSNR", "RGB-SSIM", "RGB-PERC");
  out << buf << std::string(80, '-') << "\n";
  for (const auto& r : rows) {
    const auto& m = r.report;
    std::snprintf(buf, sizeof(buf), "%-14s %4d | %8.3f %7.4f %8.4f | %8.3f %7.4f %8.4f\n", r.method.c_str(),
                  m.iterations, m.normal.psnr, m.normal.ssim, m.normal.perceptual, m.rgb.psnr, m.rgb.ssim,
                  m.rgb.perceptual);
    out << buf;
  }
  return out.str();
}

void write_ablation_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw RuntimeFailure("cannot write " + path);
    out << "method,iterations,normal_psnr,normal_ssim,normal_perceptual,rgb_psnr,rgb_ssim,rgb_perceptual\n";
    char buf[200];
    for (const auto& r : rows) {
      const auto& m = r.report;
      std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.method.c_str(), m.iterations,
                    m.normal.psnr, m.normal.ssim, m.normal.perceptual, m.rgb.psnr, m.rgb.ssim, m.rgb.perceptual);
      out << buf;
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeFailure("cannot write " + path);
}

}  // namespace geofuse::app
