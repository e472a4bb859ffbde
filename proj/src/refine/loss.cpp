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

#include "geofuse/refine/loss.hpp"

#include <cmath>
#include <sstream>

#include "geofuse/core/error.hpp"
#include "geofuse/core/ops.hpp"
#include "geofuse/triplane/kernels.hpp"

namespace geofuse::refine {

double weighted_total(const LossBreakdown& b, const LossWeights& w) {
  double t = w.rgb * b.rgb;
  t += w.perceptual * b.perceptual;
  t += w.mask * b.mask;
  t += w.depth * b.depth;
  t += w.normal * b.normal;
  t += w.regularizer * b.regularizer;
  return t;
}

void check_finite(const LossBreakdown& b, const std::string& where) {
  const std::pair<const char*, double> parts[] = {{"rgb", b.rgb},       {"perceptual", b.perceptual},
                                                  {"mask", b.mask},     {"depth", b.depth},
                                                  {"normal", b.normal}, {"regularizer", b.regularizer}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "non-finite loss component '" << name << "' (" << v << ") at " << where;
      throw RuntimeFailure(msg.str());
    }
  }
}

namespace {

template <typename T>
Var<T> avg_pool2(const Var<T>& x, int size) {
  const int half = size / 2;
  const Eigen::Index C = x.cols();
  Mat<T> out = Mat<T>::Zero(static_cast<Eigen::Index>(half) * half, C);
  for (int y = 0; y < size; ++y)
    for (int xx = 0; xx < size; ++xx) out.row((y / 2) * half + xx / 2) += x.value().row(y * size + xx);
  out *= T(0.25);
  return ad::make_node<T>(std::move(out), {x}, [size, half](ad::Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (int y = 0; y < size; ++y)
      for (int xx = 0; xx < size; ++xx) g.row(y * size + xx) += T(0.25) * n.grad.row((y / 2) * half + xx / 2);
  });
}

template <typename T>
Var<T> upsample2(const Var<T>& x, int size) {
  const int big = size * 2;
  Mat<T> out(static_cast<Eigen::Index>(big) * big, x.cols());
  for (int y = 0; y < big; ++y)
    for (int xx = 0; xx < big; ++xx) out.row(y * big + xx) = x.value().row((y / 2) * size + xx / 2);
  return ad::make_node<T>(std::move(out), {x}, [size, big](ad::Node<T>& n) {
    auto& g = n.parents[0]->grad_buffer();
    for (int y = 0; y < big; ++y)
      for (int xx = 0; xx < big; ++xx) g.row((y / 2) * size + xx / 2) += n.grad.row(y * big + xx);
  });
}

// Per-row cosine similarity between `pred` (differentiable) and a fixed
// target; rows with a zero-length side give 0.
template <typename T>
Var<T> row_cosine(const Var<T>& pred, const Mat<T>& target) {
  const Eigen::Index n = target.rows();
  Mat<T> out(n, 1);
  Mat<T> unit_t = Mat<T>::Zero(n, 3);
  Mat<T> inv_p(n, 1);
  for (Eigen::Index r = 0; r < n; ++r) {
    const T lt = target.row(r).norm();
    const T lp = pred.value().row(r).norm();
    if (lt > T(0)) unit_t.row(r) = target.row(r) / lt;
    inv_p(r, 0) = lp > T(0) ? T(1) / lp : T(0);
    out(r, 0) = pred.value().row(r).dot(unit_t.row(r)) * inv_p(r, 0);
  }
  Mat<T> cos = out;
  return ad::make_node<T>(std::move(out), {pred}, [unit_t, inv_p, cos](ad::Node<T>& nd) {
    auto& p = *nd.parents[0];
    auto& g = p.grad_buffer();
    for (Eigen::Index r = 0; r < unit_t.rows(); ++r) {
      if (inv_p(r, 0) == T(0)) continue;
      // d cos / d p = (t_hat - cos * p_hat) / |p|
      const T ip = inv_p(r, 0);
      g.row(r) += nd.grad(r, 0) * ip * (unit_t.row(r) - cos(r, 0) * p.value.row(r) * ip);
    }
  });
}

template <typename T>
Var<T> scalar(T v) {
  return ad::constant<T>(Mat<T>::Constant(1, 1, v));
}

}  // namespace

template <typename T>
Var<T> pyramid_l1(const Var<T>& diff, int size) {
  if (size % (1 << (kPyramidLevels - 1)) != 0 || diff.rows() != static_cast<Eigen::Index>(size) * size)
    throw ValidationError("pyramid_l1: image size must be divisible by 4 and match the pixel count");
  std::vector<Var<T>> gauss{diff};
  int s = size;
  for (int l = 1; l < kPyramidLevels; ++l, s /= 2) gauss.push_back(avg_pool2(gauss.back(), s));
  std::vector<Var<T>> terms;
  s = size;
  for (int l = 0; l < kPyramidLevels; ++l, s /= 2) {
    const Var<T> band = (l + 1 < kPyramidLevels) ? ad::sub(gauss[l], upsample2(gauss[l + 1], s / 2)) : gauss[l];
    terms.push_back(ad::mean(ad::abs(band)));
  }
  return ad::weighted_sum(terms, std::vector<T>(terms.size(), T(1)));
}

template <typename T>
Mat<T> view_as_render(const scenekit::ViewRecord& gt) {
  const int H = gt.rgb.height, W = gt.rgb.width;
  Mat<T> m(static_cast<Eigen::Index>(H) * W, kernels::kRenderColumns);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Eigen::Index r = static_cast<Eigen::Index>(y) * W + x;
      for (int c = 0; c < 3; ++c) {
        m(r, kernels::kColRgb + c) = gt.rgb.at(y, x, c);
        m(r, kernels::kColNormal + c) = gt.normal.at(y, x, c);
      }
      m(r, kernels::kColDepth) = gt.depth.at(y, x, 0);
      m(r, kernels::kColAccum) = gt.mask.at(y, x, 0);
    }
  return m;
}

template <typename T>
ViewTerms<T> view_terms(const Var<T>& render, const scenekit::ViewRecord& gt) {
  const int H = gt.rgb.height;
  if (gt.rgb.width != H || render.rows() != static_cast<Eigen::Index>(H) * H ||
      render.cols() != kernels::kRenderColumns)
    throw ValidationError("loss: render is " + std::to_string(render.rows()) + " rays, ground truth is " +
                          std::to_string(H) + "x" + std::to_string(gt.rgb.width));
  const Mat<T> ref = view_as_render<T>(gt);
  const Mat<T> mask = ref.col(kernels::kColAccum);
  const T fg = mask.sum();

  ViewTerms<T> t;
  const Var<T> rgb_diff = ad::sub(ad::slice_cols(render, kernels::kColRgb, 3),
                                  ad::constant<T>(ref.middleCols(kernels::kColRgb, 3)));
  t.rgb = ad::mean(ad::square(rgb_diff));
  t.perceptual = pyramid_l1(rgb_diff, H);
  t.mask = ad::mean(ad::square(
      ad::sub(ad::slice_cols(render, kernels::kColAccum, 1), ad::constant<T>(ref.col(kernels::kColAccum)))));
  if (fg > T(0)) {
    const Var<T> dd = ad::mul(ad::sub(ad::slice_cols(render, kernels::kColDepth, 1),
                                      ad::constant<T>(ref.col(kernels::kColDepth))),
                              ad::constant<T>(mask));
    t.depth = ad::scale(ad::sum(ad::abs(dd)), T(1) / fg);
    const Var<T> cos = row_cosine(ad::slice_cols(render, kernels::kColNormal, 3),
                                  Mat<T>(ref.middleCols(kernels::kColNormal, 3)));
    const Var<T> cos_mean = ad::scale(ad::sum(ad::mul(cos, ad::constant<T>(mask))), T(1) / fg);
    t.normal = ad::sub(scalar<T>(T(1)), cos_mean);
  } else {
    t.depth = scalar<T>(T(0));
    t.normal = scalar<T>(T(0));
  }
  return t;
}

template <typename T>
Var<T> density_tv(const triplane::Triplane<T>& tp, const triplane::FieldMlp<T>& field, double scale, int grid) {
  const int n = grid;
  Mat<T> pts(static_cast<Eigen::Index>(n) * n * n, 3);
  auto coord = [n](int i) { return static_cast<T>(-1.0 + (2.0 * i + 1.0) / n); };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Eigen::Index r = (static_cast<Eigen::Index>(i) * n + j) * n + k;
        pts(r, 0) = coord(i);
        pts(r, 1) = coord(j);
        pts(r, 2) = coord(k);
      }
  const Var<T> feat = triplane::sample_triplane(tp.planes, tp.resolution, ad::constant(pts));
  const Var<T> sigma = ad::softplus(ad::slice_cols(triplane::field_raw(feat, field), 0, 1));
  const Eigen::Index pairs = 3LL * n * n * (n - 1);
  const T w = static_cast<T>(scale) / static_cast<T>(pairs);
  const int strides[3] = {n * n, n, 1};
  T total = 0;
  const auto& s = sigma.value();
  for (int a = 0; a < 3; ++a)
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
      const int idx = static_cast<int>((r / strides[a]) % n);
      if (idx + 1 < n) total += std::abs(s(r + strides[a], 0) - s(r, 0));
    }
  Mat<T> out(1, 1);
  out(0, 0) = total * w;
  return ad::make_node<T>(std::move(out), {sigma}, [n, w, strides](ad::Node<T>& nd) {
    auto& p = *nd.parents[0];
    auto& g = p.grad_buffer();
    const T up = nd.grad(0, 0) * w;
    for (int a = 0; a < 3; ++a)
      for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
        const int idx = static_cast<int>((r / strides[a]) % n);
        if (idx + 1 >= n) continue;
        const T d = p.value(r + strides[a], 0) - p.value(r, 0);
        const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
        g(r + strides[a], 0) += up * sgn;
        g(r, 0) -= up * sgn;
      }
  });
}

template <typename T>
LossResult<T> loss_total(const std::vector<Var<T>>& renders, const std::vector<scenekit::ViewRecord>& gts,
                         const Var<T>& regularizer, const LossWeights& weights) {
  if (renders.empty() || renders.size() != gts.size())
    throw ValidationError("loss_total: need one ground-truth view per render");
  std::vector<Var<T>> terms;
  std::vector<T> coeff;
  LossResult<T> res;
  const T inv = T(1) / static_cast<T>(renders.size());
  for (std::size_t v = 0; v < renders.size(); ++v) {
    const ViewTerms<T> t = view_terms(renders[v], gts[v]);
    res.values.rgb += t.rgb.item();
    res.values.perceptual += t.perceptual.item();
    res.values.mask += t.mask.item();
    res.values.depth += t.depth.item();
    res.values.normal += t.normal.item();
    terms.insert(terms.end(), {t.rgb, t.perceptual, t.mask, t.depth, t.normal});
    coeff.insert(coeff.end(), {static_cast<T>(weights.rgb) * inv, static_cast<T>(weights.perceptual) * inv,
                               static_cast<T>(weights.mask) * inv, static_cast<T>(weights.depth) * inv,
                               static_cast<T>(weights.normal) * inv});
  }
  const double n = static_cast<double>(renders.size());
  res.values.rgb /= n;
  res.values.perceptual /= n;
  res.values.mask /= n;
  res.values.depth /= n;
  res.values.normal /= n;
  if (regularizer.defined()) {
    res.values.regularizer = regularizer.item();
    terms.push_back(regularizer);
    coeff.push_back(static_cast<T>(weights.regularizer));
  }
  res.values.total = weighted_total(res.values, weights);
  res.total = ad::weighted_sum(terms, coeff);
  return res;
}

#define GEOFUSE_INSTANTIATE_LOSS(T)                                                                                \
  template Var<T> pyramid_l1<T>(const Var<T>&, int);                                                              \
  template ViewTerms<T> view_terms<T>(const Var<T>&, const scenekit::ViewRecord&);                                \
  template Mat<T> view_as_render<T>(const scenekit::ViewRecord&);                                                 \
  template Var<T> density_tv<T>(const triplane::Triplane<T>&, const triplane::FieldMlp<T>&, double, int);         \
  template LossResult<T> loss_total<T>(const std::vector<Var<T>>&, const std::vector<scenekit::ViewRecord>&,      \
                                       const Var<T>&, const LossWeights&);

GEOFUSE_INSTANTIATE_LOSS(float)
GEOFUSE_INSTANTIATE_LOSS(double)

}  // namespace geofuse::refine
