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

#include "geofuse/app/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "geofuse/core/gradcheck.hpp"
#include "geofuse/core/ops.hpp"
#include "geofuse/metrics/cost.hpp"
#include "geofuse/metrics/eval.hpp"
#include "geofuse/metrics/metrics.hpp"
#include "geofuse/refine/checkpoint.hpp"
#include "geofuse/refine/trainer.hpp"

namespace geofuse::app {

namespace {

using MatD = ad::Mat<double>;
using VarD = ad::Var<double>;
using gradcheck::numeric_gradient;
using gradcheck::random_matrix;
using gradcheck::relative_error;

CheckResult timed(int id, const std::string& name, double limit,
                  const std::function<bool(std::ostringstream&)>& body) {
  CheckResult r;
  r.id = id;
  r.name = name;
  r.limit_seconds = limit;
  std::ostringstream detail;
  detail.precision(4);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.passed = body(detail);
  } catch (const std::exception& e) {
    r.passed = false;
    detail << "exception: " << e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.seconds > limit) {
    r.passed = false;
    detail << "; over the " << limit << "s budget";
  }
  r.detail = detail.str();
  return r;
}

double max_abs(const Image& a, const Image& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, static_cast<double>(std::abs(a.data[i] - b.data[i])));
  return m;
}

}  // namespace

std::string format_check(const CheckResult& r) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), " (%.1fs)", r.seconds);
  std::string status = r.passed ? "PASS" : (r.soft ? "SOFT-FAIL" : "FAIL");
  return status + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail + buf;
}

CheckResult check_zero_init_identity(const refine::Model<float>& baseline,
                                     const std::vector<scenekit::ObjectEntry>& held_out) {
  return timed(1, "zero-init pipeline identity", 60, [&](std::ostringstream& d) {
    refine::Model<float> model = baseline;
    model.attach_refiner(0x1de7);
    refine::NoGradScope<float> no_grad(model);
    metrics::ViewGrid grid;
    grid.elevations = {0};
    triplane::RenderSettings rs;
    rs.resolution = model.config.encoder.image_size;
    rs.samples = model.config.render_samples;
    double worst = 0;
    for (const auto& obj : held_out) {
      const auto one = refine::infer(obj.conditioning, model, 1);
      const auto two = refine::infer(obj.conditioning, model, 2);
      for (const auto& cam : grid.cameras()) {
        const auto a = triplane::render_view(one.back().triplane, model.decoder.field, cam, rs).value();
        const auto b = triplane::render_view(two.back().triplane, model.decoder.field, cam, rs).value();
        worst = std::max(worst, static_cast<double>((a - b).cwiseAbs().maxCoeff()));
      }
    }
    d << held_out.size() << " objects x 6 views, max |diff| " << worst;
    return !held_out.empty() && worst <= 1e-6;
  });
}

CheckResult check_copy_init(int cases) {
  return timed(2, "copy-init equivalence", 60, [&](std::ostringstream& d) {
    Rng rng(0xc0b1);
    const auto sem = encoders::Encoder<float>::init(encoders::EncoderConfig{}, rng);
    const auto geo = encoders::init_geoformer_from_semantic(sem);
    const int s = sem.config().image_size;
    int equal = 0;
    for (int i = 0; i < cases; ++i) {
      Image nimg(s, s, 3);
      for (auto& v : nimg.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      ad::Mat<float> depth(s * s, 1);
      for (Eigen::Index k = 0; k < depth.size(); ++k) depth(k) = static_cast<float>(rng.uniform(0.5, 3.5));
      const auto cam = scenekit::sample_camera(rng.next());
      const auto g = encoders::geometry_matrix<float>(depth, encoders::image_matrix<float>(nimg),
                                                      encoders::depth_scale_for(2.2));
      const auto a = encoders::encode_geometry(ad::constant(g), cam, geo);
      const auto b = encoders::encode_semantic(nimg, cam, sem);
      if (a.tokens.value() == b.tokens.value()) ++equal;
    }
    d << equal << "/" << cases << " bitwise equal";
    return equal == cases;
  });
}

CheckResult check_gradients() {
  return timed(3, "gradient suite", 300, [](std::ostringstream& d) {
    Rng rng(0x96ad);
    double worst = 0;
    auto note = [&](const char* what, double err) {
      d << what << " " << err << "; ";
      worst = std::max(worst, err);
    };

    {  // fusion network with a non-zero output layer
      geofuser::FusionNetwork<double> net(4, 5, geofuser::FusionMode::kResidual, rng);
      net.w2.mutable_value() = random_matrix(rng, 5, 4, 0.5);
      net.b2.mutable_value() = random_matrix(rng, 1, 4, 0.5);
      MatD s = random_matrix(rng, 3, 4), g = random_matrix(rng, 3, 4);
      const MatD w = random_matrix(rng, 3, 4);
      using Grid = encoders::TokenGrid<double>;
      auto f = [&] {
        return geofuser::fuse<double>(Grid{VarD(s), 0, encoders::TokenKind::kSemantic},
                                      Grid{VarD(g), 0, encoders::TokenKind::kGeometric}, net)
            .tokens.value()
            .cwiseProduct(w)
            .sum();
      };
      const Grid sv{VarD(s, true), 0, encoders::TokenKind::kSemantic};
      const Grid gv{VarD(g, true), 0, encoders::TokenKind::kGeometric};
      ad::backward(ad::sum(ad::mul(geofuser::fuse<double>(sv, gv, net).tokens, ad::constant(w))));
      double e = std::max(relative_error(sv.tokens.grad(), numeric_gradient(f, s)),
                          relative_error(gv.tokens.grad(), numeric_gradient(f, g)));
      for (const auto& p : net.parameters("fuser"))
        e = std::max(e, relative_error(p.var.grad(), numeric_gradient(f, const_cast<VarD&>(p.var).mutable_value())));
      note("fuser", e);
    }
    {  // AdaLN encoder: modulation maps and camera conditioning
      encoders::EncoderConfig c;
      c.image_size = 8;
      c.patch = 4;
      c.dim = 4;
      c.layers = 1;
      c.heads = 1;
      auto enc = encoders::Encoder<double>::init(c, rng);
      for (auto& b : enc.blocks) {
        b.mod_w.mutable_value() = random_matrix(rng, b.mod_w.rows(), b.mod_w.cols(), 0.3);
        b.mod_b.mutable_value() = random_matrix(rng, 1, b.mod_b.cols(), 0.3);
      }
      const MatD img = random_matrix(rng, 64, 3, 0.5);
      MatD cond = encoders::conditioning_row<double>(scenekit::sample_camera(rng.next()));
      const MatD w = random_matrix(rng, 4, 4);
      auto f = [&] { return enc.forward(ad::constant(img), ad::constant(cond)).value().cwiseProduct(w).sum(); };
      const VarD cv(cond, true);
      ad::backward(ad::sum(ad::mul(enc.forward(ad::constant(img), cv), ad::constant(w))));
      double e = relative_error(cv.grad(), numeric_gradient(f, cond));
      for (auto& b : enc.blocks) {
        e = std::max(e, relative_error(b.mod_w.grad(), numeric_gradient(f, b.mod_w.mutable_value())));
        e = std::max(e, relative_error(b.mod_b.grad(), numeric_gradient(f, b.mod_b.mutable_value())));
      }
      note("adaln", e);
    }
    {  // triplane sampling
      const int R = 4;
      MatD planes = random_matrix(rng, 3 * R * R, 3);
      MatD pts(6, 3);
      for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-0.95, 0.95);
      const MatD w = random_matrix(rng, 6, 3);
      auto f = [&] { return triplane::sample_triplane<double>(VarD(planes), R, VarD(pts)).value().cwiseProduct(w).sum(); };
      const VarD pv(planes, true), xv(pts, true);
      ad::backward(ad::sum(ad::mul(triplane::sample_triplane<double>(pv, R, xv), ad::constant(w))));
      note("sampling", std::max(relative_error(pv.grad(), numeric_gradient(f, planes)),
                                relative_error(xv.grad(), numeric_gradient(f, pts))));
    }
    {  // field MLP
      auto mlp = triplane::FieldMlp<double>::init(4, 6, rng);
      MatD feat = random_matrix(rng, 5, 4);
      const MatD w = random_matrix(rng, 5, 4);
      auto f = [&] { return triplane::field_decode<double>(VarD(feat), mlp).value().cwiseProduct(w).sum(); };
      const VarD fv(feat, true);
      ad::backward(ad::sum(ad::mul(triplane::field_decode<double>(fv, mlp), ad::constant(w))));
      double e = relative_error(fv.grad(), numeric_gradient(f, feat));
      for (const auto& p : mlp.parameters("field"))
        e = std::max(e, relative_error(p.var.grad(), numeric_gradient(f, const_cast<VarD&>(p.var).mutable_value())));
      note("field", e);
    }
    // End to end: masked rgb+depth loss wrt one triplane entry, in double and float.
    const int R = 4, C = 4;
    MatD planes = random_matrix(rng, 3 * R * R, C, 0.3);
    for (int p = 0; p < 3; ++p)
      for (int y = 0; y < R; ++y)
        for (int x = 0; x < R; ++x) {
          const double u = -1 + 2.0 * x / (R - 1), v = -1 + 2.0 * y / (R - 1);
          planes(p * R * R + y * R + x, 0) += 2.0 * std::exp(-6.0 * (u * u + v * v));
        }
    auto mlp = triplane::FieldMlp<double>::init(C, 8, rng);
    mlp.w1.mutable_value().row(0).setZero();
    mlp.w1.mutable_value()(0, 0) = 1.0;
    mlp.w2.mutable_value().row(0).setZero();
    mlp.w2.mutable_value().col(0).setZero();
    mlp.w2.mutable_value()(0, 0) = 1.0;
    mlp.w3.mutable_value().row(0).setZero();
    mlp.w3.mutable_value().col(0) *= 0.3;
    mlp.w3.mutable_value()(0, 0) = 2.0;
    mlp.b3.mutable_value()(0, 0) = -3.0;
    const auto cam = scenekit::orbit_camera(20, 45, 1.9);
    triplane::RenderSettings rs;
    rs.resolution = 8;
    rs.samples = 16;
    rs.chunk_rays = 16;
    double fd_err = 0, ff_err = 0;
    {
      triplane::Triplane<double> tp{VarD(planes, true), R, C};
      const VarD out = triplane::render_view(tp, mlp, cam, rs);
      MatD mask = MatD::Zero(out.rows(), out.cols());
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        if (out.value()(r, kernels::kColAccum) > 0.5) mask.row(r).head(4).setOnes();
      ad::backward(ad::sum(ad::mul(out, ad::constant(mask))));
      Eigen::Index idx;
      tp.planes.grad().cwiseAbs().reshaped<Eigen::RowMajor>().maxCoeff(&idx);
      const double g = tp.planes.grad().data()[idx];
      MatD entry(1, 1);
      entry(0, 0) = planes.data()[idx];
      auto f = [&] {
        MatD p = planes;
        p.data()[idx] = entry(0, 0);
        triplane::Triplane<double> t{VarD(p), R, C};
        return triplane::render_view(t, mlp, cam, rs).value().cwiseProduct(mask).sum();
      };
      MatD ga(1, 1);
      ga(0, 0) = g;
      fd_err = relative_error(ga, numeric_gradient(f, entry));
      note("render(double)", fd_err);
    }
    {
      using VarF = ad::Var<float>;
      triplane::Triplane<float> tp{VarF(planes.cast<float>(), true), R, C};
      const triplane::FieldMlp<float> m{VarF(mlp.w1.value().cast<float>()), VarF(mlp.b1.value().cast<float>()),
                                        VarF(mlp.w2.value().cast<float>()), VarF(mlp.b2.value().cast<float>()),
                                        VarF(mlp.w3.value().cast<float>()), VarF(mlp.b3.value().cast<float>())};
      const VarF out = triplane::render_view(tp, m, cam, rs);
      ad::Mat<float> mask = ad::Mat<float>::Zero(out.rows(), out.cols());
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        if (out.value()(r, kernels::kColAccum) > 0.5f) mask.row(r).head(4).setOnes();
      ad::backward(ad::sum(ad::mul(out, ad::constant(mask))));
      Eigen::Index idx;
      tp.planes.grad().cwiseAbs().reshaped<Eigen::RowMajor>().maxCoeff(&idx);
      const float g = tp.planes.grad().data()[idx];
      const float h = 1e-2f, orig = tp.planes.value().data()[idx];
      auto loss = [&](float v) {
        tp.planes.mutable_value().data()[idx] = v;
        return triplane::render_view(tp, m, cam, rs).value().cwiseProduct(mask).sum();
      };
      const float num = (loss(orig + h) - loss(orig - h)) / (2 * h);
      ff_err = std::abs(g - num) / std::max(1e-3f, std::abs(num));
      d << "render(float) " << ff_err;
    }
    return worst < 1e-4 && ff_err < 1e-2;
  });
}

CheckResult check_renderer() {
  return timed(4, "renderer oracle", 60, [](std::ostringstream& d) {
    const double radius = 0.5;
    auto sphere = [radius](const MatD& p, Eigen::VectorXd& dens, MatD* rgb) {
      dens.resize(p.rows());
      for (Eigen::Index i = 0; i < p.rows(); ++i) dens[i] = p.row(i).norm() < radius ? 1e4 : 0.0;
      if (rgb) rgb->setConstant(0.3);
    };
    bool ok = true;
    double worst_ratio = 0;
    for (int s : {32, 64, 128}) {
      kernels::RaySetup setup;
      setup.resolution = 16;
      setup.samples = s;
      const auto cam = scenekit::orbit_camera(25, 140, 2.0);
      const MatD out = kernels::render_function(sphere, cam, setup);
      const auto [tn, tf] = kernels::ray_bounds(cam);
      const double tol = 2 * (tf - tn) / s;
      for (int y = 0; y < setup.resolution; ++y)
        for (int x = 0; x < setup.resolution; ++x) {
          const Eigen::Vector3d dir = cam.ray_direction(y, x, setup.resolution);
          const double b = cam.position.dot(dir), c = cam.position.squaredNorm() - radius * radius;
          if (b * b - c < 0.05 * radius * radius) continue;  // skip grazing rays
          const double analytic = -b - std::sqrt(b * b - c);
          const double err = std::abs(out(y * setup.resolution + x, kernels::kColDepth) - analytic);
          worst_ratio = std::max(worst_ratio, err / tol);
        }
    }
    ok = worst_ratio <= 1.0;
    d << "depth error / bound " << worst_ratio;
    Rng rng(0x5e7);
    triplane::Triplane<float> tp{ad::Var<float>(ad::Mat<float>::Random(3 * 64, 16) * 2.0f), 8, 16};
    const auto mlp = triplane::FieldMlp<float>::init(16, 16, rng);
    double worst = 0;
    for (int v = 0; v < 4; ++v) {
      std::vector<float> trans;
      triplane::RenderSettings rs;
      rs.resolution = 16;
      rs.samples = 32;
      const auto out = triplane::render_view(tp, mlp, scenekit::sample_camera(100 + v), rs, &trans).value();
      for (Eigen::Index r = 0; r < out.rows(); ++r)
        worst = std::max(worst, std::abs(static_cast<double>(out(r, kernels::kColAccum)) + trans[r] - 1.0));
    }
    d << "; max |sum w + T - 1| " << worst;
    return ok && worst <= 1e-5;
  });
}

CheckResult check_frozen_backbone(int steps) {
  return timed(5, "frozen backbone", 600, [steps](std::ostringstream& d) {
    scenekit::DatasetConfig dc;
    dc.objects = 2;
    dc.views = 2;
    dc.cond_views = 2;
    dc.resolution = 16;
    dc.seed = 0xf0;
    scenekit::Dataset data;
    data.config = dc;
    for (int i = 0; i < dc.objects; ++i) data.objects.push_back(scenekit::render_object(dc, i));
    refine::ModelConfig mc;
    mc.encoder.image_size = 16;
    mc.encoder.patch = 8;
    mc.encoder.dim = 16;
    mc.encoder.layers = 1;
    mc.encoder.heads = 2;
    mc.decoder.dim = 16;
    mc.decoder.layers = 1;
    mc.decoder.heads = 2;
    mc.decoder.resolution = 4;
    mc.render_samples = 16;
    mc.chunk_rays = 64;
    auto model = refine::Model<float>::init_baseline(mc, 0xba5e);
    model.attach_refiner(0x4ef1);
    const std::string before = refine::parameter_hash(model.backbone_parameters());
    const std::string refiner_before = refine::parameter_hash(model.refiner_parameters());
    refine::TrainConfig tc;
    tc.stage = refine::Stage::kRefiner;
    tc.steps = steps;
    tc.unroll = 3;
    tc.samples = 16;
    tc.lr = 1e-3;
    tc.seed = 0xf1;
    refine::Trainer<float> trainer(model, data, tc);
    refine::run_training(trainer);
    const std::string after = refine::parameter_hash(model.backbone_parameters());
    const bool moved = refine::parameter_hash(model.refiner_parameters()) != refiner_before;
    d << steps << " steps, backbone " << before.substr(0, 12) << " -> " << after.substr(0, 12)
      << ", refiner " << (moved ? "updated" : "unchanged");
    return before == after && moved;
  });
}

CheckResult check_cost(const refine::ModelConfig& config) {
  return timed(9, "cost accounting", 60, [&](std::ostringstream& d) {
    scenekit::DatasetConfig dc;
    dc.objects = 1;
    dc.cond_views = 4;
    dc.views = 1;
    dc.resolution = config.encoder.image_size;
    dc.seed = 0xc057;
    const auto obj = scenekit::render_object(dc, 0);
    auto model = refine::Model<float>::init_baseline(config, 0xc0);
    model.attach_refiner(0xc1);
    const auto rep = metrics::cost_report(model, obj.conditioning, {1, 2}, 1);
    const double ratio = rep.rows[1].analytic.total() / rep.rows[0].analytic.total();
    double worst = 0;
    for (const auto& row : rep.rows)
      worst = std::max(worst, std::abs(row.analytic.total() - row.counted) / row.counted);
    d << "analytic ratio " << ratio << " (reference " << metrics::kReferenceFlopRatio << "), analytic vs counted "
      << 100 * worst << "%";
    return ratio > 1.8 && worst <= 0.10;
  });
}

CheckResult check_metrics() {
  return timed(10, "metric unit suite", 60, [](std::ostringstream& d) {
    Rng rng(0x3e7);
    Image a(32, 32, 3);
    for (auto& v : a.data) v = static_cast<float>(rng.uniform(0.2, 0.8));
    Image b = a;
    for (auto& v : b.data) v += 0.1f;
    const double p = metrics::psnr(a, b);
    const double s = metrics::ssim(a, a);
    Image c(32, 32, 3);
    for (auto& v : c.data) v = static_cast<float>(rng.uniform());
    const double z = metrics::pyramid_distance(a, a);
    const double ab = metrics::pyramid_distance(a, c), ba = metrics::pyramid_distance(c, a);
    Image n(32, 32, 3), mask(32, 32, 1, 1.0f);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) {
        Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
        v.normalize();
        for (int k = 0; k < 3; ++k) n.at(y, x, k) = static_cast<float>(v[k]);
      }
    const Image back = metrics::decode_normals(metrics::quantize8(metrics::encode_normals(n, mask)));
    // One 8-bit step of the encoding is 2/255 in normal units, so half a step
    // of rounding is 1/255.
    const double rt = max_abs(back, n);
    d << "psnr(+0.1) " << p << " dB, ssim(x,x) " << s << ", perceptual(x,x) " << z << ", |d(a,b)-d(b,a)| "
      << std::abs(ab - ba) << ", normal round trip " << rt * 255 << "/255";
    return std::abs(p - 20.0) < 1e-3 && s == 1.0 && z == 0.0 && ab == ba && ab > 0 && rt <= 1.0 / 255 + 1e-6;
  });
}

std::vector<CheckResult> run_invariant_checks(const refine::ModelConfig& config,
                                              const std::vector<scenekit::ObjectEntry>& held_out) {
  std::vector<CheckResult> out;
  out.push_back(check_zero_init_identity(refine::Model<float>::init_baseline(config, 0xba5e), held_out));
  out.push_back(check_copy_init());
  out.push_back(check_gradients());
  out.push_back(check_renderer());
  out.push_back(check_frozen_backbone());
  out.push_back(check_cost(config));
  out.push_back(check_metrics());
  return out;
}

}  // namespace geofuse::app
