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

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/flops.hpp"
#include "geofuse/core/rng.hpp"
#include "geofuse/triplane/kernels.hpp"

namespace geofuse::kernels {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

template <typename T>
inline T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

struct Geometry {
  Eigen::Vector3d origin;
  double t_near = 0, delta = 0;
  int rays = 0, samples = 0, chunks = 0;
};

Geometry make_geometry(const scenekit::CameraPose& camera, const RaySetup& setup) {
  if (setup.samples < 8) throw ValidationError("samples_per_ray must be >= 8, got " + std::to_string(setup.samples));
  if (setup.resolution < 1) throw ValidationError("render resolution must be positive");
  if (setup.chunk_rays < 1) throw ValidationError("chunk_rays must be positive");
  Geometry g;
  const auto [lo, hi] = ray_bounds(camera);
  g.origin = camera.position;
  g.t_near = lo;
  g.delta = (hi - lo) / setup.samples;
  g.rays = setup.resolution * setup.resolution;
  g.samples = setup.samples;
  g.chunks = (g.rays + setup.chunk_rays - 1) / setup.chunk_rays;
  return g;
}

constexpr int kStencil = 6;  // +x, -x, +y, -y, +z, -z

}  // namespace

std::pair<double, double> ray_bounds(const scenekit::CameraPose& camera) {
  const double dist = camera.position.norm();
  return {std::max(0.0, dist - kSqrt3), dist + kSqrt3};
}

double stratum_offset(const RaySetup& setup, int ray, int sample) {
  if (!setup.jitter) return 0.5;
  return hash_to_unit(derive_seed({setup.seed, static_cast<std::uint64_t>(ray), static_cast<std::uint64_t>(sample)}));
}

template <typename T>
struct ChunkCache {
  int ray_begin = 0, ray_count = 0;
  Mat<T> dirs;  // ray_count x 3
  Mat<T> raw;   // ray_count*S x 4
  FieldTape<T> tape;
  std::vector<T> t, sigma, trans, weight;
  std::vector<T> acc, depth_raw;
  std::vector<int> fg;  // local ray indices with a normal estimate
  Mat<T> nraw;
  FieldTape<T> ntape;
  Mat<T> density_grad;  // fg x 3
};

template <typename T>
struct RenderCache {
  RaySetup setup;
  scenekit::CameraPose camera;
  std::vector<ChunkCache<T>> chunks;
};

namespace {

// Per-chunk evaluation shared by the triplane path and the function hook.
// `eval` maps points (n x 3) to field outputs (n x 4): pre-activation values
// when kRaw, otherwise density and rgb directly.
template <bool kRaw, typename T, typename Eval>
void composite_chunk(const Geometry& g, const RaySetup& setup, const scenekit::CameraPose& camera, ChunkCache<T>& c,
                     Mat<T>& out, std::vector<T>* transmittance, Eval&& eval, std::atomic<bool>& bad) {
  const int S = g.samples;
  const int n = c.ray_count;
  c.dirs.resize(n, 3);
  Mat<T> pts(static_cast<Eigen::Index>(n) * S, 3);
  c.t.resize(static_cast<std::size_t>(n) * S);
  const int res = setup.resolution;
  for (int r = 0; r < n; ++r) {
    const int ray = c.ray_begin + r;
    const Eigen::Vector3d d = camera.ray_direction(ray / res, ray % res, res);
    for (int k = 0; k < 3; ++k) c.dirs(r, k) = static_cast<T>(d[k]);
    for (int i = 0; i < S; ++i) {
      const double t = g.t_near + (i + stratum_offset(setup, ray, i)) * g.delta;
      const Eigen::Index row = static_cast<Eigen::Index>(r) * S + i;
      c.t[row] = static_cast<T>(t);
      for (int k = 0; k < 3; ++k) pts(row, k) = static_cast<T>(g.origin[k] + t * d[k]);
    }
  }
  eval(pts, c.raw, &c.tape);

  const T delta = static_cast<T>(g.delta);
  c.sigma.resize(c.t.size());
  c.trans.resize(c.t.size());
  c.weight.resize(c.t.size());
  c.acc.assign(n, T(0));
  c.depth_raw.assign(n, T(0));
  c.fg.clear();
  for (int r = 0; r < n; ++r) {
    T tr = T(1), acc = T(0), wt = T(0);
    T rgb[3] = {0, 0, 0};
    for (int i = 0; i < S; ++i) {
      const std::size_t j = static_cast<std::size_t>(r) * S + i;
      const T sigma = kRaw ? softplus(c.raw(j, 0)) : c.raw(j, 0);
      if (!std::isfinite(sigma)) bad = true;
      c.sigma[j] = sigma;
      const T decay = std::exp(-sigma * delta);
      const T w = tr * (T(1) - decay);
      c.trans[j] = tr;
      c.weight[j] = w;
      for (int k = 0; k < 3; ++k) rgb[k] += w * (kRaw ? sigmoid(c.raw(j, 1 + k)) : c.raw(j, 1 + k));
      acc += w;
      wt += w * c.t[j];
      tr *= decay;
    }
    const int ray = c.ray_begin + r;
    c.acc[r] = acc;
    c.depth_raw[r] = wt / std::max(acc, T(1e-6));
    for (int k = 0; k < 3; ++k) out(ray, kColRgb + k) = rgb[k] + (T(1) - acc) * static_cast<T>(setup.background[k]);
    out(ray, kColDepth) = acc > T(0.5) ? c.depth_raw[r] : T(0);
    out(ray, kColAccum) = acc;
    if (transmittance) (*transmittance)[ray] = tr;
    if (acc > T(0.5)) c.fg.push_back(r);
  }

  // Density gradient at the expected-depth point.
  const int m = static_cast<int>(c.fg.size());
  c.density_grad = Mat<T>::Zero(m, 3);
  if (m == 0) return;
  Mat<T> npts(static_cast<Eigen::Index>(m) * kStencil, 3);
  const T h = static_cast<T>(setup.normal_step);
  for (int f = 0; f < m; ++f) {
    const int r = c.fg[f];
    for (int s = 0; s < kStencil; ++s) {
      const Eigen::Index row = static_cast<Eigen::Index>(f) * kStencil + s;
      for (int k = 0; k < 3; ++k) npts(row, k) = static_cast<T>(g.origin[k]) + c.depth_raw[r] * c.dirs(r, k);
      npts(row, s / 2) += (s % 2 == 0) ? h : -h;
    }
  }
  eval(npts, c.nraw, &c.ntape);
  const Eigen::Matrix<T, 3, 3> rot = camera.rotation.template cast<T>();
  for (int f = 0; f < m; ++f) {
    const int r = c.fg[f];
    Eigen::Matrix<T, 3, 1> grad;
    for (int k = 0; k < 3; ++k) {
      const Eigen::Index row = static_cast<Eigen::Index>(f) * kStencil + 2 * k;
      const T plus = kRaw ? softplus(c.nraw(row, 0)) : c.nraw(row, 0);
      const T minus = kRaw ? softplus(c.nraw(row + 1, 0)) : c.nraw(row + 1, 0);
      grad[k] = (plus - minus) / (T(2) * h);
    }
    c.density_grad.row(f) = grad.transpose();
    const T len = grad.norm();
    const Eigen::Matrix<T, 3, 1> n_cam = len > T(1e-12) ? Eigen::Matrix<T, 3, 1>(rot * (-grad / len))
                                                         : Eigen::Matrix<T, 3, 1>::Zero();
    for (int k = 0; k < 3; ++k) out(c.ray_begin + r, kColNormal + k) = n_cam[k];
  }
}

template <bool kRaw, typename T, typename Eval>
Mat<T> render_chunks(const scenekit::CameraPose& camera, const RaySetup& setup, std::vector<ChunkCache<T>>& chunks,
                     std::vector<T>* transmittance, Eval&& eval) {
  const Geometry g = make_geometry(camera, setup);
  Mat<T> out = Mat<T>::Zero(g.rays, kRenderColumns);
  if (transmittance) transmittance->assign(g.rays, T(0));
  chunks.resize(g.chunks);
  for (int k = 0; k < g.chunks; ++k) {
    chunks[k].ray_begin = k * setup.chunk_rays;
    chunks[k].ray_count = std::min(setup.chunk_rays, g.rays - chunks[k].ray_begin);
  }
  std::atomic<bool> bad{false};
  std::atomic<bool> failed{false};
  std::string failure;
  // flops::add is atomic, so counting stays exact under threads.
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < g.chunks; ++k) {
    try {
      composite_chunk<kRaw, T>(g, setup, camera, chunks[k], out, transmittance, eval, bad);
    } catch (const std::exception& e) {
#pragma omp critical(geofuse_render_failure)
      {
        if (!failed) failure = e.what();
        failed = true;
      }
    }
  }
  if (failed) throw RuntimeFailure("render failed: " + failure);
  if (bad) {
    std::ostringstream msg;
    msg << "non-finite density while rendering";
    for (const auto& c : chunks) {
      for (std::size_t j = 0; j < c.sigma.size(); ++j) {
        if (!std::isfinite(c.sigma[j])) {
          const int ray = c.ray_begin + static_cast<int>(j) / setup.samples;
          msg << " at pixel (" << ray / setup.resolution << "," << ray % setup.resolution << ") sample "
              << j % setup.samples << " raw=" << c.raw(j, 0);
          throw RuntimeFailure(msg.str());
        }
      }
    }
    throw RuntimeFailure(msg.str());
  }
  return out;
}

}  // namespace

template <typename T>
Mat<T> render_forward(const FieldRefs<T>& refs, const scenekit::CameraPose& camera, const RaySetup& setup,
                      std::shared_ptr<RenderCache<T>>* cache, std::vector<T>* transmittance) {
  auto rc = std::make_shared<RenderCache<T>>();
  rc->setup = setup;
  rc->camera = camera;
  const bool keep = cache != nullptr;
  auto eval = [&refs, keep](const Mat<T>& pts, Mat<T>& raw, FieldTape<T>* tape) {
    field_forward<T>(refs, pts, raw, keep ? tape : nullptr);
  };
  Mat<T> out = render_chunks<true, T>(camera, setup, rc->chunks, transmittance, eval);
  if (cache) *cache = std::move(rc);
  return out;
}

template <typename T>
void render_backward(const FieldRefs<T>& refs, const RenderCache<T>& cache, const Mat<T>& d_out,
                     FieldGrads<T>& grads) {
  const RaySetup& setup = cache.setup;
  const int S = setup.samples;
  const auto [lo, hi] = ray_bounds(cache.camera);
  const T delta = static_cast<T>((hi - lo) / S);
  const T h = static_cast<T>(setup.normal_step);
  const Eigen::Matrix<T, 3, 3> rot = cache.camera.rotation.template cast<T>();
  const int nchunks = static_cast<int>(cache.chunks.size());
  std::vector<FieldGrads<T>> partial(nchunks);

#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < nchunks; ++k) {
    const ChunkCache<T>& c = cache.chunks[k];
    FieldGrads<T>& pg = partial[k];
    pg.init(refs, grads.planes_on, grads.mlp_on);
    const int n = c.ray_count;
    const int m = static_cast<int>(c.fg.size());
    std::vector<T> g_depth_raw(n, T(0));

    // Normal branch first: it feeds the expected depth.
    if (m > 0) {
      Mat<T> d_nraw = Mat<T>::Zero(c.nraw.rows(), 4);
      bool any = false;
      for (int f = 0; f < m; ++f) {
        const int ray = c.ray_begin + c.fg[f];
        const Eigen::Matrix<T, 3, 1> g_cam(d_out(ray, kColNormal), d_out(ray, kColNormal + 1),
                                           d_out(ray, kColNormal + 2));
        const Eigen::Matrix<T, 3, 1> grad = c.density_grad.row(f).transpose();
        const T len = grad.norm();
        if (len <= T(1e-12) || g_cam.isZero()) continue;
        any = true;
        const Eigen::Matrix<T, 3, 1> g_world = rot.transpose() * g_cam;
        const Eigen::Matrix<T, 3, 1> u = grad / len;
        const Eigen::Matrix<T, 3, 1> g_grad = -(g_world - u * u.dot(g_world)) / len;
        for (int a = 0; a < 3; ++a) {
          const Eigen::Index row = static_cast<Eigen::Index>(f) * kStencil + 2 * a;
          const T ds = g_grad[a] / (T(2) * h);
          d_nraw(row, 0) = ds * sigmoid(c.nraw(row, 0));
          d_nraw(row + 1, 0) = -ds * sigmoid(c.nraw(row + 1, 0));
        }
      }
      if (any) {
        Mat<T> d_pts = Mat<T>::Zero(c.nraw.rows(), 3);
        field_backward<T>(refs, c.ntape, d_nraw, pg, &d_pts);
        for (int f = 0; f < m; ++f) {
          const int r = c.fg[f];
          T g = 0;
          for (int s = 0; s < kStencil; ++s) g += d_pts.row(static_cast<Eigen::Index>(f) * kStencil + s).dot(c.dirs.row(r));
          g_depth_raw[r] += g;
        }
      }
    }

    Mat<T> d_raw = Mat<T>::Zero(c.raw.rows(), 4);
    std::vector<T> G(S);
    for (int r = 0; r < n; ++r) {
      const int ray = c.ray_begin + r;
      const T acc = c.acc[r];
      T g_rgb[3];
      for (int a = 0; a < 3; ++a) g_rgb[a] = d_out(ray, kColRgb + a);
      T g_dr = T(0);
      if (acc > T(0.5)) g_dr = d_out(ray, kColDepth) + g_depth_raw[r];
      const T A = std::max(acc, T(1e-6));
      const T dr = c.depth_raw[r];
      const T g_acc = d_out(ray, kColAccum);
      const std::size_t base = static_cast<std::size_t>(r) * S;
      for (int i = 0; i < S; ++i) {
        const std::size_t j = base + i;
        T gi = g_acc;
        for (int a = 0; a < 3; ++a) {
          const T col = sigmoid(c.raw(j, 1 + a));
          gi += g_rgb[a] * (col - static_cast<T>(setup.background[a]));
          const T dc = c.weight[j] * g_rgb[a];
          d_raw(j, 1 + a) = dc * col * (T(1) - col);
        }
        if (g_dr != T(0)) gi += g_dr * (acc > T(1e-6) ? (c.t[j] - dr) / A : c.t[j] / A);
        G[i] = gi;
      }
      T suffix = 0;  // sum_{i>j} G_i w_i
      for (int i = S - 1; i >= 0; --i) {
        const std::size_t j = base + i;
        const T t_next = c.trans[j] - c.weight[j];
        const T d_sigma = delta * (G[i] * t_next - suffix);
        d_raw(j, 0) = d_sigma * sigmoid(c.raw(j, 0));
        suffix += G[i] * c.weight[j];
      }
    }
    field_backward<T>(refs, c.tape, d_raw, pg, nullptr);
  }
  for (const auto& pg : partial) grads.accumulate(pg);
}

Mat<double> render_function(const FieldFunction& field, const scenekit::CameraPose& camera, const RaySetup& setup,
                            std::vector<double>* transmittance) {
  std::vector<ChunkCache<double>> chunks;
  auto eval = [&field](const Mat<double>& pts, Mat<double>& out, FieldTape<double>*) {
    Eigen::VectorXd density;
    Mat<double> rgb = Mat<double>::Constant(pts.rows(), 3, 0.5);
    field(pts, density, &rgb);
    if (density.size() != pts.rows()) throw ValidationError("field hook returned wrong density count");
    out.resize(pts.rows(), 4);
    out.col(0) = density;
    out.rightCols(3) = rgb;
  };
  return render_chunks<false, double>(camera, setup, chunks, transmittance, eval);
}

#define GEOFUSE_INSTANTIATE_RENDER(T)                                                                            \
  template struct ChunkCache<T>;                                                                                 \
  template struct RenderCache<T>;                                                                                \
  template Mat<T> render_forward<T>(const FieldRefs<T>&, const scenekit::CameraPose&, const RaySetup&,           \
                                    std::shared_ptr<RenderCache<T>>*, std::vector<T>*);                          \
  template void render_backward<T>(const FieldRefs<T>&, const RenderCache<T>&, const Mat<T>&, FieldGrads<T>&);

GEOFUSE_INSTANTIATE_RENDER(float)
GEOFUSE_INSTANTIATE_RENDER(double)

}  // namespace geofuse::kernels
