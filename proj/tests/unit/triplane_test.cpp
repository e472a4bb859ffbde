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
#include <omp.h>

#include <algorithm>
#include <cmath>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"
#include "geofuse/triplane/decoder.hpp"
#include "geofuse/triplane/reference.hpp"
#include "geofuse/triplane/renderer.hpp"
#include "testing/gradcheck.hpp"

namespace geofuse {
namespace {

using MatD = ad::Mat<double>;
using VarD = ad::Var<double>;
using triplane::FieldMlp;
using triplane::Triplane;

// ---------- decoder ----------

MatD ln(const MatD& in) {
  MatD out(in.rows(), in.cols());
  for (int r = 0; r < in.rows(); ++r) {
    double mu = 0, var = 0;
    for (int j = 0; j < in.cols(); ++j) mu += in(r, j);
    mu /= in.cols();
    for (int j = 0; j < in.cols(); ++j) var += (in(r, j) - mu) * (in(r, j) - mu);
    var /= in.cols();
    for (int j = 0; j < in.cols(); ++j) out(r, j) = (in(r, j) - mu) / std::sqrt(var + 1e-6);
  }
  return out;
}

MatD lin(const MatD& in, const VarD& w, const VarD& b) {
  MatD out(in.rows(), w.cols());
  for (int r = 0; r < in.rows(); ++r)
    for (int j = 0; j < w.cols(); ++j) {
      double s = b.value()(0, j);
      for (int i = 0; i < w.rows(); ++i) s += in(r, i) * w.value()(i, j);
      out(r, j) = s;
    }
  return out;
}

MatD attend(const MatD& q, const MatD& k, const MatD& v) {
  MatD out = MatD::Zero(q.rows(), v.cols());
  for (int i = 0; i < q.rows(); ++i) {
    std::vector<double> s(k.rows());
    double mx = -1e300, z = 0;
    for (int j = 0; j < k.rows(); ++j) {
      double dot = 0;
      for (int t = 0; t < q.cols(); ++t) dot += q(i, t) * k(j, t);
      mx = std::max(mx, s[j] = dot / std::sqrt(double(q.cols())));
    }
    for (int j = 0; j < k.rows(); ++j) z += (s[j] = std::exp(s[j] - mx));
    for (int j = 0; j < k.rows(); ++j)
      for (int t = 0; t < v.cols(); ++t) out(i, t) += s[j] / z * v(j, t);
  }
  return out;
}

MatD loop_decode(const triplane::TriplaneDecoder<double>& dec, const std::vector<MatD>& views) {
  int rows = 0;
  for (const auto& v : views) rows += v.rows();
  MatD kv(rows, views[0].cols());
  int at = 0;
  for (const auto& v : views) {
    kv.middleRows(at, v.rows()) = v;
    at += v.rows();
  }
  kv = ln(kv);
  MatD x = dec.queries.value();
  for (const auto& b : dec.blocks) {
    MatD h = ln(x);
    x += lin(attend(lin(h, b.cq_w, b.cq_b), lin(kv, b.ck_w, b.ck_b), lin(kv, b.cv_w, b.cv_b)), b.co_w, b.co_b);
    h = ln(x);
    x += lin(attend(lin(h, b.sq_w, b.sq_b), lin(h, b.sk_w, b.sk_b), lin(h, b.sv_w, b.sv_b)), b.so_w, b.so_b);
    MatD f = lin(ln(x), b.ff1_w, b.ff1_b);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double u = f.data()[i];
      f.data()[i] = 0.5 * u * (1 + std::tanh(std::sqrt(2 / M_PI) * (u + 0.044715 * u * u * u)));
    }
    x += lin(f, b.ff2_w, b.ff2_b);
  }
  return lin(ln(x), dec.out_w, dec.out_b);
}

triplane::DecoderConfig micro_decoder() {
  triplane::DecoderConfig c;
  c.resolution = 2;
  c.dim = 4;
  c.layers = 1;
  c.heads = 1;
  return c;
}

std::vector<encoders::TokenGrid<double>> random_views(Rng& rng, int count, int tokens, int dim) {
  std::vector<encoders::TokenGrid<double>> v;
  for (int i = 0; i < count; ++i) v.push_back({VarD(testing::random_matrix(rng, tokens, dim)), i});
  return v;
}

TEST(Decoder, Shape) {
  Rng rng(1);
  triplane::TriplaneDecoder<float> dec;
  dec.init(triplane::DecoderConfig{}, rng);
  std::vector<encoders::TokenGrid<float>> views;
  for (int i = 0; i < 4; ++i) views.push_back({ad::Var<float>(ad::Mat<float>::Random(16, 64)), i});
  const auto tp = dec.decode(views);
  EXPECT_EQ(tp.planes.rows(), 3 * 8 * 8);
  EXPECT_EQ(tp.planes.cols(), 64);
  EXPECT_EQ(tp.resolution, 8);
  EXPECT_EQ(dec.queries.rows(), 3 * 8 * 8);
}

TEST(Decoder, MicroConfigMatchesLoopOracle) {
  Rng rng(2);
  triplane::TriplaneDecoder<double> dec;
  dec.init(micro_decoder(), rng);
  const auto views = random_views(rng, 3, 4, 4);
  std::vector<MatD> raw;
  for (const auto& v : views) raw.push_back(v.tokens.value());
  const MatD got = dec.decode(views).planes.value();
  EXPECT_LT((got - loop_decode(dec, raw)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Decoder, ViewOrderDoesNotMatter) {
  Rng rng(3);
  triplane::TriplaneDecoder<double> dec;
  dec.init(micro_decoder(), rng);
  auto views = random_views(rng, 4, 4, 4);
  const MatD ref = dec.decode(views).planes.value();
  std::vector<int> perm{0, 1, 2, 3};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<encoders::TokenGrid<double>> p;
    for (int i : perm) p.push_back(views[i]);
    EXPECT_LT((dec.decode(p).planes.value() - ref).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Decoder, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  triplane::TriplaneDecoder<double> dec;
  dec.init(micro_decoder(), rng);
  auto views = random_views(rng, 2, 4, 4);
  MatD tok0 = views[0].tokens.value();
  const MatD w = testing::random_matrix(rng, 12, 4);
  auto f = [&] {
    std::vector<encoders::TokenGrid<double>> v{{VarD(tok0), 0}, views[1]};
    return dec.decode(v).planes.value().cwiseProduct(w).sum();
  };
  VarD t0(tok0, true);
  ad::backward(ad::sum(ad::mul(dec.decode({{t0, 0}, views[1]}).planes, ad::constant(w))));
  EXPECT_LT(testing::relative_error(t0.grad(), testing::numeric_gradient(f, tok0)), 1e-4);
  for (const auto& p : dec.parameters("dec")) {
    if (p.name.find(".field.") != std::string::npos) continue;  // not on this path
    auto& value = const_cast<VarD&>(p.var).mutable_value();
    EXPECT_LT(testing::relative_error(p.var.grad(), testing::numeric_gradient(f, value)), 1e-4) << p.name;
  }
}

TEST(Decoder, RejectsWidthMismatch) {
  Rng rng(5);
  triplane::TriplaneDecoder<double> dec;
  dec.init(micro_decoder(), rng);
  EXPECT_THROW(dec.decode(random_views(rng, 1, 4, 5)), ValidationError);
  EXPECT_THROW(dec.decode({}), ValidationError);
}

// ---------- sampling and field ----------

MatD point(double x, double y, double z) {
  MatD p(1, 3);
  p << x, y, z;
  return p;
}

TEST(SampleTriplane, NodeGivesSumOfEntries) {
  Rng rng(6);
  const int R = 5;
  const MatD planes = testing::random_matrix(rng, 3 * R * R, 3);
  // Node (i, j, k) of the grid; coordinate -1 + 2i/(R-1).
  const int i = 1, j = 3, k = 4;
  auto c = [&](int n) { return -1.0 + 2.0 * n / (R - 1); };
  const MatD f = triplane::sample_triplane<double>(VarD(planes), R, VarD(point(c(i), c(j), c(k)))).value();
  const MatD expected = planes.row(0 * R * R + j * R + i) + planes.row(1 * R * R + k * R + i) +
                        planes.row(2 * R * R + k * R + j);
  EXPECT_LT((f - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleTriplane, CellCenterGivesMeanOfCorners) {
  Rng rng(7);
  const int R = 4;
  const MatD planes = testing::random_matrix(rng, 3 * R * R, 2);
  auto mid = [&](int n) { return -1.0 + 2.0 * (n + 0.5) / (R - 1); };
  const int i = 0, j = 2, k = 1;
  const MatD f = triplane::sample_triplane<double>(VarD(planes), R, VarD(point(mid(i), mid(j), mid(k)))).value();
  auto mean4 = [&](int p, int row, int col) {
    const int b = p * R * R + row * R + col;
    return MatD((planes.row(b) + planes.row(b + 1) + planes.row(b + R) + planes.row(b + R + 1)) / 4.0);
  };
  const MatD expected = mean4(0, j, i) + mean4(1, k, i) + mean4(2, k, j);
  EXPECT_LT((f - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleTriplane, ClampsOutsideCube) {
  Rng rng(8);
  const MatD planes = testing::random_matrix(rng, 3 * 16, 2);
  const MatD a = triplane::sample_triplane<double>(VarD(planes), 4, VarD(point(1.7, -3.0, 0.2))).value();
  const MatD b = triplane::sample_triplane<double>(VarD(planes), 4, VarD(point(1.0, -1.0, 0.2))).value();
  EXPECT_EQ(a, b);
}

TEST(SampleTriplane, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  const int R = 4;
  MatD planes = testing::random_matrix(rng, 3 * R * R, 3);
  MatD pts(6, 3);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-0.95, 0.95);
  const MatD w = testing::random_matrix(rng, 6, 3);
  auto f = [&] { return triplane::sample_triplane<double>(VarD(planes), R, VarD(pts)).value().cwiseProduct(w).sum(); };
  VarD pv(planes, true), xv(pts, true);
  ad::backward(ad::sum(ad::mul(triplane::sample_triplane<double>(pv, R, xv), ad::constant(w))));
  EXPECT_LT(testing::relative_error(pv.grad(), testing::numeric_gradient(f, planes)), 1e-4);
  EXPECT_LT(testing::relative_error(xv.grad(), testing::numeric_gradient(f, pts)), 1e-4);
}

TEST(FieldDecode, ZeroFeatureZeroBias) {
  Rng rng(10);
  const auto mlp = FieldMlp<double>::init(4, 6, rng);
  const MatD out = triplane::field_decode<double>(VarD(MatD::Zero(2, 4)), mlp).value();
  EXPECT_NEAR(out(0, 0), std::log(2.0), 1e-12);
  for (int c = 1; c < 4; ++c) EXPECT_NEAR(out(1, c), 0.5, 1e-12);
}

TEST(FieldDecode, MatchesLoopMlpAndIsMonotoneInDensity) {
  Rng rng(11);
  auto mlp = FieldMlp<double>::init(4, 6, rng);
  const MatD feat = testing::random_matrix(rng, 5, 4);
  const MatD out = triplane::field_raw<double>(VarD(feat), mlp).value();
  const MatD planes = MatD::Zero(12, 4);
  kernels::FieldRefs<double> refs{&planes, 2, &mlp.w1.value(), &mlp.b1.value(), &mlp.w2.value(),
                                  &mlp.b2.value(), &mlp.w3.value(), &mlp.b3.value()};
  for (int r = 0; r < 5; ++r) {
    const std::vector<double> f(feat.row(r).data(), feat.row(r).data() + 4);
    const auto ref = reference::field_point(refs, f);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(out(r, c), ref[c], 1e-12);
  }
  double prev = -1;
  for (double b = -5; b <= 5; b += 0.5) {
    mlp.b3.mutable_value()(0, 0) = b;
    const double d = triplane::field_decode<double>(VarD(feat.topRows(1)), mlp).value()(0, 0);
    EXPECT_GT(d, prev);
    EXPECT_GE(d, 0.0);
    prev = d;
  }
}

// ---------- rendering ----------

struct Field {
  Triplane<double> tp;
  FieldMlp<double> mlp;
  kernels::FieldRefs<double> refs() const {
    return {&tp.planes.value(), tp.resolution, &mlp.w1.value(), &mlp.b1.value(), &mlp.w2.value(),
            &mlp.b2.value(),    &mlp.w3.value(), &mlp.b3.value()};
  }
};

// A random field with a blob of density near the origin.
Field blob_field(std::uint64_t seed, double bias = -3.0, int R = 4, int C = 4, int H = 8) {
  Rng rng(seed);
  Field f;
  f.tp.resolution = R;
  f.tp.channels = C;
  MatD planes = testing::random_matrix(rng, 3 * R * R, C, 0.3);
  for (int p = 0; p < 3; ++p)
    for (int y = 0; y < R; ++y)
      for (int x = 0; x < R; ++x) {
        const double u = -1 + 2.0 * x / (R - 1), v = -1 + 2.0 * y / (R - 1);
        planes(p * R * R + y * R + x, 0) += 2.0 * std::exp(-6.0 * (u * u + v * v));
      }
  f.tp.planes = VarD(planes, true);
  f.mlp = FieldMlp<double>::init(C, H, rng);
  // Route channel 0 straight to density through the hidden layers.
  f.mlp.w1.mutable_value().row(0).setZero();
  f.mlp.w1.mutable_value()(0, 0) = 1.0;
  f.mlp.w2.mutable_value().row(0).setZero();
  f.mlp.w2.mutable_value().col(0).setZero();
  f.mlp.w2.mutable_value()(0, 0) = 1.0;
  f.mlp.w3.mutable_value().row(0).setZero();
  f.mlp.w3.mutable_value().col(0) *= 0.3;
  f.mlp.w3.mutable_value()(0, 0) = 2.0;
  f.mlp.b3.mutable_value()(0, 0) = bias;
  return f;
}

triplane::RenderSettings small_settings(int res = 8, int samples = 16) {
  triplane::RenderSettings s;
  s.resolution = res;
  s.samples = samples;
  s.chunk_rays = 16;
  return s;
}

TEST(Render, EmptyVolume) {
  kernels::RaySetup setup;
  setup.resolution = 16;
  setup.samples = 32;
  const auto cam = scenekit::orbit_camera(20, 30, 2.0);
  std::vector<double> trans;
  const MatD out = kernels::render_function(
      [](const MatD& p, Eigen::VectorXd& d, MatD*) { d = Eigen::VectorXd::Zero(p.rows()); }, cam, setup, &trans);
  EXPECT_TRUE((out.col(kernels::kColAccum).array() == 0.0).all());
  EXPECT_TRUE((out.leftCols(3).array() == 1.0).all());
  EXPECT_TRUE((out.col(kernels::kColDepth).array() == 0.0).all());
  EXPECT_TRUE((out.middleCols(kernels::kColNormal, 3).array() == 0.0).all());
  for (double t : trans) EXPECT_EQ(t, 1.0);
}

double sphere_hit(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r) {
  const double b = o.dot(d), c = o.squaredNorm() - r * r;
  return -b - std::sqrt(b * b - c);
}

kernels::FieldFunction dense_sphere(double kappa, double radius) {
  return [kappa, radius](const MatD& p, Eigen::VectorXd& d, MatD* rgb) {
    d.resize(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) d[i] = p.row(i).norm() < radius ? kappa : 0.0;
    if (rgb) rgb->setConstant(0.3);
  };
}

TEST(Render, DenseSphereDepthOracle) {
  for (int s : {32, 64, 128}) {
    kernels::RaySetup setup;
    setup.resolution = 16;
    setup.samples = s;
    const auto cam = scenekit::orbit_camera(25, 140, 2.0);
    const MatD out = kernels::render_function(dense_sphere(1e4, 0.5), cam, setup);
    const int c = setup.resolution / 2;
    const Eigen::Vector3d dir = cam.ray_direction(c, c, setup.resolution);
    const double analytic = sphere_hit(cam.position, dir, 0.5);
    const auto [tn, tf] = kernels::ray_bounds(cam);
    EXPECT_NEAR(out(c * setup.resolution + c, kernels::kColDepth), analytic, 2 * (tf - tn) / s) << "samples " << s;
    // Normal points back at the camera near the centre of the sphere.
    EXPECT_GT(-out(c * setup.resolution + c, kernels::kColNormal + 2), 0.9);
  }
}

TEST(Render, DoublingSamplesBarelyMovesDepth) {
  const auto cam = scenekit::orbit_camera(-10, 75, 1.9);
  kernels::RaySetup a;
  a.resolution = 8;
  a.samples = 512;
  kernels::RaySetup b = a;
  b.samples = 1024;
  const MatD da = kernels::render_function(dense_sphere(1e4, 0.5), cam, a);
  const MatD db = kernels::render_function(dense_sphere(1e4, 0.5), cam, b);
  int checked = 0;
  for (Eigen::Index r = 0; r < da.rows(); ++r) {
    if (da(r, kernels::kColAccum) < 0.99 || db(r, kernels::kColAccum) < 0.99) continue;
    EXPECT_LT(std::abs(da(r, kernels::kColDepth) - db(r, kernels::kColDepth)) / db(r, kernels::kColDepth), 0.01);
    ++checked;
  }
  EXPECT_GT(checked, 4);
}

TEST(Render, WeightsPlusTransmittanceIsOne) {
  Rng rng(12);
  Triplane<float> tp;
  tp.resolution = 8;
  tp.channels = 16;
  tp.planes = ad::Var<float>(ad::Mat<float>::Random(3 * 64, 16) * 2.0f);
  const auto mlp = FieldMlp<float>::init(16, 16, rng);
  for (int v = 0; v < 4; ++v) {
    std::vector<float> trans;
    const auto cam = scenekit::sample_camera(100 + v);
    const auto out = triplane::render_view(tp, mlp, cam, small_settings(16, 32), &trans).value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      ASSERT_NEAR(out(r, kernels::kColAccum) + trans[r], 1.0f, 1e-5f) << "ray " << r;
      ASSERT_GE(out(r, kernels::kColAccum), 0.0f);
      ASSERT_LE(out(r, kernels::kColAccum), 1.0f + 1e-6f);
    }
  }
}

TEST(Render, KernelMatchesSerialReference) {
  const Field f = blob_field(15);
  for (bool jitter : {false, true}) {
    auto settings = small_settings(12, 24);
    settings.jitter = jitter;
    settings.seed = 77;
    const auto cam = scenekit::orbit_camera(15, 60, 1.8);
    const MatD fast = triplane::render_view(f.tp, f.mlp, cam, settings).value();
    const MatD slow = reference::render_view_serial(f.refs(), cam, triplane::ray_setup(settings, f.tp.resolution));
    EXPECT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-10) << "jitter " << jitter;
    EXPECT_GT((fast.col(kernels::kColAccum).array() > 0.5).count(), 10);
  }
}

TEST(Render, JitterIsSeededAndStratified) {
  triplane::RenderSettings s = small_settings();
  const auto setup = triplane::ray_setup(s, 4);
  EXPECT_EQ(kernels::stratum_offset(setup, 3, 4), 0.5);
  auto j = setup;
  j.jitter = true;
  j.seed = 5;
  const double a = kernels::stratum_offset(j, 3, 4);
  EXPECT_GE(a, 0.0);
  EXPECT_LT(a, 1.0);
  EXPECT_EQ(a, kernels::stratum_offset(j, 3, 4));
  EXPECT_NE(a, kernels::stratum_offset(j, 3, 5));
  j.seed = 6;
  EXPECT_NE(a, kernels::stratum_offset(j, 3, 4));
}

TEST(Render, ThreadCountDoesNotChangeResults) {
  Field f = blob_field(14);
  const auto cam = scenekit::orbit_camera(30, 10, 2.0);
  const MatD w = MatD::Random(64, 8);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    f.tp.planes.zero_grad();
    const VarD out = triplane::render_view(f.tp, f.mlp, cam, small_settings());
    ad::backward(ad::sum(ad::mul(out, ad::constant(w))));
    return std::make_pair(MatD(out.value()), MatD(f.tp.planes.grad()));
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(one.first, four.first);
  EXPECT_EQ(one.second, four.second);
}

double render_loss(const Field& f, const scenekit::CameraPose& cam, const triplane::RenderSettings& s, const MatD& w) {
  return triplane::render_view(f.tp, f.mlp, cam, s).value().cwiseProduct(w).sum();
}

TEST(Render, EndToEndGradientHighPrecision) {
  Field f = blob_field(15);
  const auto cam = scenekit::orbit_camera(20, 45, 1.9);
  const auto s = small_settings();
  Rng rng(16);
  const MatD w = testing::random_matrix(rng, 64, 8);
  const VarD out = triplane::render_view(f.tp, f.mlp, cam, s);
  const int fg = static_cast<int>((out.value().col(kernels::kColAccum).array() > 0.5).count());
  ASSERT_GT(fg, 5);
  ASSERT_LT(fg, 60);
  ad::backward(ad::sum(ad::mul(out, ad::constant(w))));
  auto loss = [&] { return render_loss(f, cam, s, w); };
  MatD& planes = f.tp.planes.mutable_value();
  EXPECT_LT(testing::relative_error(f.tp.planes.grad(), testing::numeric_gradient(loss, planes)), 1e-4);
  for (const auto& p : f.mlp.parameters("field")) {
    auto& value = const_cast<VarD&>(p.var).mutable_value();
    EXPECT_LT(testing::relative_error(p.var.grad(), testing::numeric_gradient(loss, value)), 1e-4) << p.name;
  }
}

TEST(Render, MaskedPixelGradientSinglePrecision) {
  const Field fd = blob_field(17);
  Triplane<float> tp;
  tp.resolution = fd.tp.resolution;
  tp.channels = fd.tp.channels;
  tp.planes = ad::Var<float>(fd.tp.planes.value().cast<float>(), true);
  FieldMlp<float> mlp{ad::Var<float>(fd.mlp.w1.value().cast<float>()), ad::Var<float>(fd.mlp.b1.value().cast<float>()),
                      ad::Var<float>(fd.mlp.w2.value().cast<float>()), ad::Var<float>(fd.mlp.b2.value().cast<float>()),
                      ad::Var<float>(fd.mlp.w3.value().cast<float>()), ad::Var<float>(fd.mlp.b3.value().cast<float>())};
  const auto cam = scenekit::orbit_camera(20, 45, 1.9);
  const auto s = small_settings();
  const ad::Var<float> out = triplane::render_view(tp, mlp, cam, s);
  // Masked loss: rgb + depth on foreground pixels.
  ad::Mat<float> mask = ad::Mat<float>::Zero(64, 8);
  for (int r = 0; r < 64; ++r)
    if (out.value()(r, kernels::kColAccum) > 0.5f) mask.row(r).head(4).setOnes();
  ad::backward(ad::sum(ad::mul(out, ad::constant(mask))));
  // Perturb the entry with the largest gradient.
  Eigen::Index idx;
  tp.planes.grad().cwiseAbs().reshaped<Eigen::RowMajor>().maxCoeff(&idx);
  const float g = tp.planes.grad().data()[idx];
  const float h = 1e-2f;
  auto loss = [&] { return triplane::render_view(tp, mlp, cam, s).value().cwiseProduct(mask).sum(); };
  const float orig = tp.planes.value().data()[idx];
  tp.planes.mutable_value().data()[idx] = orig + h;
  const float lp = loss();
  tp.planes.mutable_value().data()[idx] = orig - h;
  const float lm = loss();
  const float num = (lp - lm) / (2 * h);
  EXPECT_LT(std::abs(g - num) / std::abs(num), 1e-2);
}

TEST(Render, FrozenFieldKeepsNoGraph) {
  Field f = blob_field(18);
  f.tp.planes.set_requires_grad(false);
  for (const auto& p : f.mlp.parameters("f")) const_cast<VarD&>(p.var).set_requires_grad(false);
  const VarD out = triplane::render_view(f.tp, f.mlp, scenekit::orbit_camera(0, 0, 2.0), small_settings());
  EXPECT_FALSE(out.requires_grad());
  EXPECT_TRUE(out.node()->parents.empty());
}

TEST(Render, NonFiniteDensityAborts) {
  Field f = blob_field(19);
  f.tp.planes.mutable_value().setConstant(std::numeric_limits<double>::quiet_NaN());
  try {
    triplane::render_view(f.tp, f.mlp, scenekit::orbit_camera(0, 0, 2.0), small_settings());
    FAIL() << "expected RuntimeFailure";
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite density"), std::string::npos) << e.what();
  }
}

TEST(Render, RejectsTooFewSamples) {
  const Field f = blob_field(20);
  EXPECT_THROW(triplane::render_view(f.tp, f.mlp, scenekit::orbit_camera(0, 0, 2.0), small_settings(8, 7)),
               ValidationError);
}

TEST(Render, UnpackedViewSatisfiesInvariants) {
  const Field f = blob_field(21);
  const auto cam = scenekit::orbit_camera(10, 200, 2.0);
  const MatD out = triplane::render_view(f.tp, f.mlp, cam, small_settings(16, 32)).value();
  const auto v = triplane::unpack_render(out, 16, cam);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const float a = v.accumulation.at(y, x, 0);
      EXPECT_EQ(v.mask.at(y, x, 0), a > 0.5f ? 1.0f : 0.0f);
      if (a > 0.5f) {
        const Eigen::Vector3f n(v.normal.at(y, x, 0), v.normal.at(y, x, 1), v.normal.at(y, x, 2));
        EXPECT_NEAR(n.norm(), 1.0f, 1e-4f);
      } else {
        EXPECT_EQ(v.depth.at(y, x, 0), 0.0f);
      }
    }
}

}  // namespace
}  // namespace geofuse
